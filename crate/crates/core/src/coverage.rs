//! Single-fault coverage experiments.
//!
//! Every fault instance gets its own fresh array and a full run of the
//! schedule. Simulations are independent and run in parallel; rows come
//! back in instance order.

use std::fmt::Write as _;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{render_config, ExperimentConfig};
use crate::engine::{any_detected, EngineError, IterationConfig, PreparedSchedule, Schedule};
use crate::faults::FaultInstance;
use crate::memory::MemorySpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("internal consistency error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageRow {
    pub fault_id: String,
    pub name: String,
    pub family: String,
    pub primitive: String,
    pub two_cell: bool,
    pub victim: String,
    pub aggressor: Option<String>,
    pub iter_flags: Vec<bool>,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeta {
    pub config_hash: String,
    pub iterations: usize,
    pub n_cells: usize,
    pub word_bits: u32,
    pub scheme: String,
}

/// Detected/total for one group of rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub key: String,
    pub two_cell: bool,
    pub detected: usize,
    pub total: usize,
}

impl Tally {
    pub fn ratio(&self) -> f64 {
        self.detected as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub meta: RunMeta,
}

pub const CSV_HEADER: &str = "fault_id,primitive,victim,aggressor,iter_flags,detected";

fn ratio<'a>(rows: impl Iterator<Item = &'a CoverageRow>) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for r in rows {
        total += 1;
        hit += r.detected as usize;
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "NA".to_string(), |r| format!("{r:.4}"))
}

impl CoverageReport {
    pub fn r_single(&self) -> Option<f64> {
        ratio(self.rows.iter().filter(|r| !r.two_cell))
    }

    pub fn r_two(&self) -> Option<f64> {
        ratio(self.rows.iter().filter(|r| r.two_cell))
    }

    fn tally(&self, key: impl Fn(&CoverageRow) -> &str) -> Vec<Tally> {
        let mut out: Vec<Tally> = Vec::new();
        for r in &self.rows {
            let k = key(r);
            let t = match out.iter_mut().position(|t| t.key == k) {
                Some(i) => &mut out[i],
                None => {
                    out.push(Tally {
                        key: k.to_string(),
                        two_cell: r.two_cell,
                        detected: 0,
                        total: 0,
                    });
                    out.last_mut().unwrap()
                }
            };
            t.total += 1;
            t.detected += r.detected as usize;
        }
        out
    }

    /// Per catalog name, in first-appearance order.
    pub fn per_primitive(&self) -> Vec<Tally> {
        self.tally(|r| &r.name)
    }

    /// Per family (`WDF`, `CFtr`, ...), in first-appearance order.
    pub fn per_family(&self) -> Vec<Tally> {
        self.tally(|r| &r.family)
    }

    pub fn family(&self, name: &str) -> Option<Tally> {
        self.per_family().into_iter().find(|t| t.key == name)
    }

    /// Families with the lowest coverage among single- or two-cell rows.
    pub fn hardest_families(&self, two_cell: bool) -> Vec<Tally> {
        let fams: Vec<Tally> = self.per_family().into_iter().filter(|t| t.two_cell == two_cell).collect();
        let min = fams.iter().map(Tally::ratio).fold(f64::INFINITY, f64::min);
        fams.into_iter().filter(|t| t.ratio() == min).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let flags: String = r.iter_flags.iter().map(|&f| if f { '1' } else { '0' }).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.fault_id,
                r.primitive,
                r.victim,
                r.aggressor.as_deref().unwrap_or(""),
                flags,
                r.detected as u8
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let m = &self.meta;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "config {} | r = {} | N = {} x {} bit | scheme {}",
            m.config_hash, m.iterations, m.n_cells, m.word_bits, m.scheme
        );
        let single = self.rows.iter().filter(|r| !r.two_cell).count();
        let _ = writeln!(s, "instances: {} single-cell, {} two-cell", single, self.rows.len() - single);
        let _ = writeln!(s, "R_single = {}", fmt_ratio(self.r_single()));
        let _ = writeln!(s, "R_two    = {}", fmt_ratio(self.r_two()));
        let _ = writeln!(s, "per family:");
        for t in self.per_family() {
            let _ = writeln!(s, "  {:<8} {:.4} ({}/{})", t.key, t.ratio(), t.detected, t.total);
        }
        let _ = writeln!(s, "per primitive:");
        for t in self.per_primitive() {
            let _ = writeln!(s, "  {:<8} {:.4} ({}/{})", t.key, t.ratio(), t.detected, t.total);
        }
        s
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(render_config(cfg).as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Run the schedule once per instance, each on a fresh array.
pub fn run_coverage(cfg: &ExperimentConfig, instances: &[FaultInstance]) -> Result<CoverageReport, CoverageError> {
    let prepared = PreparedSchedule::new(&cfg.spec, &cfg.schedule)?;
    let clean = prepared.run(Vec::new())?;
    if clean.iter().any(|o| o.detected) {
        return Err(CoverageError::Internal("fault-free run reported a detection".into()));
    }
    #[cfg(feature = "parallel")]
    let iter = instances.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = instances.iter();
    let rows = iter
        .map(|inst| {
            let outcomes = prepared.run(vec![inst.clone()])?;
            let iter_flags: Vec<bool> = outcomes.iter().map(|o| o.detected).collect();
            Ok(CoverageRow {
                fault_id: inst.id.clone(),
                name: inst.name.clone(),
                family: inst.family.clone(),
                primitive: inst.primitive.to_string(),
                two_cell: inst.primitive.is_two_cell(),
                victim: inst.victim.to_string(),
                aggressor: inst.aggressor.map(|a| a.to_string()),
                detected: iter_flags.iter().any(|&f| f),
                iter_flags,
            })
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    let schemes: Vec<String> = cfg.schedule.iterations.iter().map(|i| i.scheme.to_string()).collect();
    let scheme = if schemes.windows(2).all(|w| w[0] == w[1]) {
        schemes[0].clone()
    } else {
        "mixed".into()
    };
    Ok(CoverageReport {
        rows,
        meta: RunMeta {
            config_hash: config_hash(cfg),
            iterations: cfg.schedule.len(),
            n_cells: cfg.spec.n_cells,
            word_bits: cfg.spec.word_bits,
            scheme,
        },
    })
}

/// Exhaustive search for a schedule of `size` distinct candidates, taken in
/// lexicographic order of candidate indices, that detects every instance.
/// Returns the indices of the first such schedule.
pub fn search_schedule(
    spec: &MemorySpec,
    candidates: &[IterationConfig],
    instances: &[FaultInstance],
    size: usize,
) -> Result<Option<Vec<usize>>, EngineError> {
    let n = candidates.len();
    if size == 0 || size > n {
        return Ok(None);
    }
    let mut pick: Vec<usize> = (0..size).collect();
    loop {
        let schedule = Schedule::new(pick.iter().map(|&i| candidates[i].clone()).collect());
        let prepared = PreparedSchedule::new(spec, &schedule)?;
        let mut all = true;
        for inst in instances {
            if !any_detected(&prepared.run(vec![inst.clone()])?) {
                all = false;
                break;
            }
        }
        if all {
            return Ok(Some(pick));
        }
        // next combination
        let Some(i) = (0..size).rev().find(|&i| pick[i] < n - size + i) else {
            return Ok(None);
        };
        pick[i] += 1;
        for j in i + 1..size {
            pick[j] = pick[j - 1] + 1;
        }
    }
}
