//! Line-oriented experiment configuration.
//!
//! ```text
//! # bit-oriented 16-cell array
//! [memory]
//! n = 16
//! word_bits = 1
//! read_ports = 1
//! fill = 0
//! placement = pairs
//!
//! [iteration]
//! p = 0b11
//! q_coeffs = 1,1
//! seed = 1,0
//! trajectory = up            # up | down | pseudorandom
//! addr_poly = 0b10011        # pseudorandom only
//! addr_seed = 1
//! inversion = none           # none | input | output | input_output
//! scheme = ring              # ring | scan
//! misr_poly = 19
//! steps = 16
//! refill = 0
//! ```
//!
//! One `[iteration]` block per iteration. A `lanes = 19:1,9 | 19:2,2` key
//! replaces `p`/`q_coeffs` with side-by-side lane registers (`p:c1,...,ck`
//! per lane, lane 0 in the low bits). Integers accept decimal, `0b` and
//! `0x` forms.

use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{FeedbackNetwork, InversionMode, IterationConfig, Schedule, Scheme, Trajectory};
use crate::faults::Placement;
use crate::galois::{self, parse_int, FeedbackSpec, FieldSpec, Poly2};
use crate::memory::MemorySpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{msg}", at_line(*.line))]
pub struct ConfigError {
    /// 0 when the problem is not tied to one line.
    pub line: usize,
    pub msg: String,
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!("line {line}: ")
    }
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { line, msg: msg.into() })
}

/// Geometry, fault placement and schedule of one experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub spec: MemorySpec,
    pub placement: Placement,
    pub schedule: Schedule,
}

#[derive(Default)]
struct RawIteration {
    line: usize,
    p: Option<(usize, u32)>,
    q: Option<(usize, Vec<u32>)>,
    c0: Option<(usize, u32)>,
    lanes: Option<(usize, String)>,
    seed: Option<(usize, Vec<u32>)>,
    trajectory: Option<(usize, String)>,
    addr_poly: Option<u32>,
    addr_seed: Option<u32>,
    inversion: Option<InversionMode>,
    scheme: Option<Scheme>,
    misr_poly: Option<u32>,
    steps: Option<usize>,
    refill: Option<u32>,
}

fn int(line: usize, v: &str) -> Result<u32, ConfigError> {
    parse_int(v).ok_or_else(|| ConfigError {
        line,
        msg: format!("expected an integer, found `{v}`"),
    })
}

fn list(line: usize, v: &str) -> Result<Vec<u32>, ConfigError> {
    v.split(',').map(|x| int(line, x)).collect()
}

fn field(line: usize, p: u32) -> Result<FieldSpec, ConfigError> {
    FieldSpec::new(Poly2(p)).or_else(|e| err(line, format!("field generator {p}: {e}")))
}

fn default_field(word_bits: u32) -> Option<FieldSpec> {
    if word_bits == 1 {
        Some(FieldSpec::gf2())
    } else {
        galois::first_primitive(word_bits).and_then(|p| FieldSpec::new(p).ok())
    }
}

impl RawIteration {
    fn build(self, spec: &MemorySpec) -> Result<IterationConfig, ConfigError> {
        let line = self.line;
        let feedback = match (self.lanes, self.q) {
            (Some((ll, text)), None) => {
                let mut lanes = Vec::new();
                for lane in text.split('|') {
                    let (p, q) = lane
                        .split_once(':')
                        .ok_or_else(|| ConfigError { line: ll, msg: format!("bad lane `{lane}`") })?;
                    let f = field(ll, int(ll, p)?)?;
                    let fb = FeedbackSpec::new(f, list(ll, q)?)
                        .or_else(|e| err(ll, format!("lane `{}`: {e}", lane.trim())))?;
                    lanes.push(fb);
                }
                FeedbackNetwork::Lanes(lanes)
            }
            (None, Some((ql, coeffs))) => {
                let f = match self.p {
                    Some((pl, p)) => field(pl, p)?,
                    None => default_field(spec.word_bits)
                        .ok_or_else(|| ConfigError { line, msg: "no default field".into() })?,
                };
                let c0 = self.c0.map_or(1, |(_, c)| c);
                let fb = FeedbackSpec::with_constant(f, c0, coeffs)
                    .or_else(|e| err(ql, format!("q_coeffs: {e}")))?;
                FeedbackNetwork::WholeWord(fb)
            }
            (Some((ll, _)), Some(_)) => return err(ll, "`lanes` and `q_coeffs` are exclusive"),
            (None, None) => return err(line, "iteration needs `q_coeffs` or `lanes`"),
        };
        let (_, seed) = self.seed.ok_or_else(|| ConfigError { line, msg: "missing `seed`".into() })?;
        let trajectory = match self.trajectory {
            None => Trajectory::Up,
            Some((tl, t)) => match t.as_str() {
                "up" => Trajectory::Up,
                "down" => Trajectory::Down,
                "pseudorandom" => Trajectory::Pseudorandom {
                    poly: self.addr_poly.map(Poly2),
                    seed: self.addr_seed.unwrap_or(1),
                },
                other => return err(tl, format!("unknown trajectory `{other}`")),
            },
        };
        Ok(IterationConfig {
            feedback,
            seed,
            trajectory,
            inversion: self.inversion.unwrap_or_default(),
            scheme: self.scheme.unwrap_or_default(),
            misr_poly: self.misr_poly.map(Poly2),
            steps: self.steps,
            refill: self.refill,
        })
    }
}

/// Parse an experiment configuration; iterations are validated against the
/// `[memory]` geometry.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    enum Section {
        None,
        Memory,
        Iteration,
    }
    let mut section = Section::None;
    let (mut n, mut word_bits, mut read_ports, mut fill) = (None, 1u32, 1u32, 0u32);
    let mut placement = Placement::default();
    let mut raws: Vec<RawIteration> = Vec::new();
    let mut memory_seen = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|c| c.strip_suffix(']')) {
            section = match name.trim() {
                "memory" if !memory_seen => {
                    memory_seen = true;
                    Section::Memory
                }
                "memory" => return err(line, "duplicate [memory] section"),
                "iteration" => {
                    raws.push(RawIteration { line, ..Default::default() });
                    Section::Iteration
                }
                other => return err(line, format!("unknown section [{other}]")),
            };
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| ConfigError { line, msg: format!("expected `key = value`, found `{content}`") })?;
        match section {
            Section::None => return err(line, "key outside of a section"),
            Section::Memory => match key {
                "n" => n = Some(int(line, value)? as usize),
                "word_bits" => word_bits = int(line, value)?,
                "read_ports" => read_ports = int(line, value)?,
                "fill" => fill = int(line, value)?,
                "placement" => placement = value.parse().or_else(|e: String| err(line, e))?,
                other => return err(line, format!("unknown memory key `{other}`")),
            },
            Section::Iteration => {
                let it = raws.last_mut().expect("inside an iteration");
                match key {
                    "p" => it.p = Some((line, int(line, value)?)),
                    "q_coeffs" | "q" => it.q = Some((line, list(line, value)?)),
                    "c0" => it.c0 = Some((line, int(line, value)?)),
                    "lanes" => it.lanes = Some((line, value.to_string())),
                    "seed" => it.seed = Some((line, list(line, value)?)),
                    "trajectory" => it.trajectory = Some((line, value.to_string())),
                    "addr_poly" => it.addr_poly = Some(int(line, value)?),
                    "addr_seed" => it.addr_seed = Some(int(line, value)?),
                    "inversion" => it.inversion = Some(value.parse().or_else(|e: String| err(line, e))?),
                    "scheme" => {
                        it.scheme = Some(match value {
                            "ring" => Scheme::Ring,
                            "scan" => Scheme::Scan,
                            other => return err(line, format!("unknown scheme `{other}`")),
                        })
                    }
                    "misr_poly" => it.misr_poly = Some(int(line, value)?),
                    "steps" => it.steps = Some(int(line, value)? as usize),
                    "refill" => it.refill = Some(int(line, value)?),
                    other => return err(line, format!("unknown iteration key `{other}`")),
                }
            }
        }
    }

    let n = n.ok_or_else(|| ConfigError { line: 0, msg: "missing [memory] n".into() })?;
    let spec = MemorySpec::new(n, word_bits, read_ports).or_else(|e| err(0, e.to_string()))?;
    if raws.is_empty() {
        return err(0, "no [iteration] blocks");
    }
    let mut iterations = Vec::new();
    for raw in raws {
        let line = raw.line;
        let cfg = raw.build(&spec)?;
        crate::engine::Iteration::new(&cfg, &spec).or_else(|e| err(line, e.to_string()))?;
        iterations.push(cfg);
    }
    if fill > spec.word_mask() {
        return err(0, format!("fill {fill} does not fit in {word_bits} bits"));
    }
    Ok(ExperimentConfig {
        spec,
        placement,
        schedule: Schedule { iterations, fill },
    })
}

fn join(xs: &[u32]) -> String {
    xs.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

/// Canonical text form, parseable by [`parse_config`].
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let spec = &cfg.spec;
    let placement = match cfg.placement {
        Placement::Single => "single",
        Placement::Pairs => "pairs",
        Placement::AdjacentPairs => "adjacent-pairs",
    };
    let _ = writeln!(s, "[memory]\nn = {}\nword_bits = {}\nread_ports = {}", spec.n_cells, spec.word_bits, spec.read_ports);
    let _ = writeln!(s, "fill = {}\nplacement = {placement}", cfg.schedule.fill);
    for it in &cfg.schedule.iterations {
        let _ = writeln!(s, "\n[iteration]");
        match &it.feedback {
            FeedbackNetwork::WholeWord(fb) => {
                let _ = writeln!(s, "p = {}", fb.field().generator().bits());
                let _ = writeln!(s, "q_coeffs = {}", join(fb.coeffs()));
                if fb.constant() != 1 {
                    let _ = writeln!(s, "c0 = {}", fb.constant());
                }
            }
            FeedbackNetwork::Lanes(lanes) => {
                let text: Vec<String> = lanes
                    .iter()
                    .map(|l| format!("{}:{}", l.field().generator().bits(), join(l.coeffs())))
                    .collect();
                let _ = writeln!(s, "lanes = {}", text.join(" | "));
            }
        }
        let _ = writeln!(s, "seed = {}", join(&it.seed));
        let _ = writeln!(s, "trajectory = {}", it.trajectory);
        if let Trajectory::Pseudorandom { poly, seed } = it.trajectory {
            if let Some(p) = poly {
                let _ = writeln!(s, "addr_poly = {}", p.bits());
            }
            let _ = writeln!(s, "addr_seed = {seed}");
        }
        let _ = writeln!(s, "inversion = {}", it.inversion);
        let _ = writeln!(s, "scheme = {}", it.scheme);
        if let Some(p) = it.misr_poly {
            let _ = writeln!(s, "misr_poly = {}", p.bits());
        }
        if let Some(st) = it.steps {
            let _ = writeln!(s, "steps = {st}");
        }
        if let Some(r) = it.refill {
            let _ = writeln!(s, "refill = {r}");
        }
    }
    s
}
