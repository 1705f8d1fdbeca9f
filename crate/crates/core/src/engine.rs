//! The pseudo-ring test engine.
//!
//! A virtual register of `k` stages lives in `k` memory cells that are
//! consecutive along a trajectory. Each push step reads the window, computes
//! the feedback and writes it to the next trajectory position, so the window
//! slides one position per step while the data stay in place. An iteration
//! is: write the seed (init), `steps` pushes, read the final window
//! (unload), and compare against a software replica of the same recurrence.
//!
//! ```text
//!   position:  t     t+1   ...  t+k-1 | t+k
//!              r     r          r     | w = fb(r_t, ..., r_{t+k-1})
//! ```
//!
//! In the ring scheme every value read also enters a multiple-input
//! signature register; in the scan scheme a shadow copy of the window is
//! kept and checked against the replica.

use std::fmt;

use thiserror::Error;

use crate::faults::{FaultError, FaultInstance, FaultyMemory};
use crate::galois::{self, FeedbackSpec, FieldSpec, GaloisError, Poly2};
use crate::memory::{cycles_per_step, MemorySpec, MemoryState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error("internal consistency error: {0}")]
    Internal(String),
}

fn config<T>(msg: impl Into<String>) -> Result<T, EngineError> {
    Err(EngineError::Config(msg.into()))
}

/// Order in which the register window visits the cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Trajectory {
    #[default]
    Up,
    Down,
    /// Address LFSR over `w = ceil(log2(n + 1))` bits. `poly` defaults to
    /// the smallest primitive polynomial of degree `w`.
    Pseudorandom { poly: Option<Poly2>, seed: u32 },
}

impl Trajectory {
    pub fn is_monotone(&self) -> bool {
        !matches!(self, Trajectory::Pseudorandom { .. })
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trajectory::Up => f.write_str("up"),
            Trajectory::Down => f.write_str("down"),
            Trajectory::Pseudorandom { .. } => f.write_str("pseudorandom"),
        }
    }
}

/// Bits needed by the address LFSR for `n` addresses.
pub fn address_lfsr_width(n: usize) -> u32 {
    usize::BITS - n.leading_zeros()
}

/// Visit order of addresses `0..n`.
///
/// The pseudorandom order runs the address register `s <- s*x mod poly`
/// from the seed, maps each state `s` to address `s - 1` and skips
/// addresses `>= n`.
pub fn realize_trajectory(t: &Trajectory, n: usize) -> Result<Vec<usize>, EngineError> {
    if n == 0 {
        return config("trajectory over an empty array");
    }
    match *t {
        Trajectory::Up => Ok((0..n).collect()),
        Trajectory::Down => Ok((0..n).rev().collect()),
        Trajectory::Pseudorandom { poly, seed } => {
            let w = address_lfsr_width(n);
            let poly = match poly {
                Some(p) => p,
                None => galois::first_primitive(w)
                    .ok_or_else(|| EngineError::Config(format!("no address LFSR for {n} cells")))?,
            };
            if poly.degree() != Some(w) {
                return config(format!(
                    "address polynomial {poly} must have degree {w} for {n} cells"
                ));
            }
            let states = (1u32 << w) - 1;
            if seed == 0 || seed > states {
                return config(format!("address seed {seed} must be in 1..={states}"));
            }
            let field = FieldSpec::new(poly)
                .map_err(|_| EngineError::Config(format!("address polynomial {poly} is reducible")))?;
            let mut order = Vec::with_capacity(n);
            let mut s = seed;
            for _ in 0..states {
                let addr = (s - 1) as usize;
                if addr < n {
                    order.push(addr);
                }
                s = field.mul_unchecked(s, 2);
            }
            if s != seed || order.len() != n {
                return config(format!("address polynomial {poly} is not maximal-length"));
            }
            Ok(order)
        }
    }
}

/// Complementing of data around the feedback network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InversionMode {
    #[default]
    None,
    /// Complement the feedback value before it is written.
    Input,
    /// Complement every value read into the feedback.
    Output,
    InputOutput,
}

impl InversionMode {
    fn input(self) -> bool {
        matches!(self, Self::Input | Self::InputOutput)
    }

    fn output(self) -> bool {
        matches!(self, Self::Output | Self::InputOutput)
    }
}

impl std::str::FromStr for InversionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" => Ok(Self::None),
            "input" => Ok(Self::Input),
            "output" => Ok(Self::Output),
            "input_output" | "input-output" => Ok(Self::InputOutput),
            other => Err(format!("unknown inversion mode `{other}`")),
        }
    }
}

impl fmt::Display for InversionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Input => "input",
            Self::Output => "output",
            Self::InputOutput => "input_output",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scheme {
    /// Window plus signature analyzer over every read.
    #[default]
    Ring,
    /// Window only, with a shadow register.
    Scan,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ring => "ring",
            Self::Scan => "scan",
        })
    }
}

/// How a word is fed back: one register over GF(2^word_bits), or several
/// narrower registers side by side (lane 0 in the low bits).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FeedbackNetwork {
    WholeWord(FeedbackSpec),
    Lanes(Vec<FeedbackSpec>),
}

impl FeedbackNetwork {
    pub fn stages(&self) -> usize {
        match self {
            Self::WholeWord(fb) => fb.len(),
            Self::Lanes(lanes) => lanes.first().map_or(0, FeedbackSpec::len),
        }
    }

    pub fn width(&self) -> u32 {
        match self {
            Self::WholeWord(fb) => fb.field().degree(),
            Self::Lanes(lanes) => lanes.iter().map(|l| l.field().degree()).sum(),
        }
    }

    fn validate(&self, spec: &MemorySpec) -> Result<(), EngineError> {
        if let Self::Lanes(lanes) = self {
            if lanes.is_empty() {
                return config("lane network without lanes");
            }
            let k = lanes[0].len();
            if lanes.iter().any(|l| l.len() != k) {
                return config("all lanes must have the same number of stages");
            }
        }
        if self.width() != spec.word_bits {
            return config(format!(
                "feedback network is {} bits wide but cells hold {} bits",
                self.width(),
                spec.word_bits
            ));
        }
        Ok(())
    }

    /// Default signature polynomial.
    fn default_misr(&self) -> Option<Poly2> {
        match self {
            Self::WholeWord(fb) => Some(fb.field().generator()),
            Self::Lanes(_) => galois::first_primitive(self.width()),
        }
    }

    /// Feedback word for a window of `k` words, oldest first.
    pub fn next(&self, window: &[u32]) -> u32 {
        match self {
            Self::WholeWord(fb) => fb.next_unchecked(window.iter().copied()),
            Self::Lanes(lanes) => {
                let mut shift = 0;
                let mut out = 0;
                for lane in lanes {
                    let m = lane.field().degree();
                    let mask = lane.field().mask();
                    let v = lane.next_unchecked(window.iter().map(|w| w >> shift & mask));
                    out |= v << shift;
                    shift += m;
                }
                out
            }
        }
    }
}

/// One multiple-input signature register step: multiply the signature by
/// `x` modulo `poly`, then add the input into the low stages.
pub fn misr_step(sig: u32, input: u32, poly: Poly2) -> Result<u32, EngineError> {
    let d = match poly.degree() {
        Some(d) if (1..=galois::MAX_FIELD_DEGREE).contains(&d) => d,
        _ => return config(format!("signature polynomial {poly} must have degree 1..=16")),
    };
    if input >> d != 0 || sig >> d != 0 {
        return config(format!("input {input:#x} wider than the {d}-bit signature"));
    }
    Ok(misr_step_unchecked(sig, input, poly.bits(), d))
}

#[inline]
fn misr_step_unchecked(sig: u32, input: u32, poly: u32, degree: u32) -> u32 {
    let mut s = sig << 1;
    if s >> degree & 1 == 1 {
        s ^= poly;
    }
    s ^ input
}

/// The four controlling parameters of one iteration plus scheme options.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IterationConfig {
    pub feedback: FeedbackNetwork,
    pub seed: Vec<u32>,
    pub trajectory: Trajectory,
    pub inversion: InversionMode,
    pub scheme: Scheme,
    /// Ring scheme only; defaults to the field generator.
    pub misr_poly: Option<Poly2>,
    /// Push steps; defaults to the array size.
    pub steps: Option<usize>,
    /// Refill the whole array with this background before the iteration.
    pub refill: Option<u32>,
}

impl IterationConfig {
    pub fn new(feedback: FeedbackSpec, seed: Vec<u32>) -> Self {
        Self {
            feedback: FeedbackNetwork::WholeWord(feedback),
            seed,
            trajectory: Trajectory::Up,
            inversion: InversionMode::None,
            scheme: Scheme::Ring,
            misr_poly: None,
            steps: None,
            refill: None,
        }
    }

    /// Bit-oriented register over GF(2) with taps `coeffs`.
    pub fn bit_lfsr(coeffs: &[u32], seed: &[u32]) -> Self {
        let fb = FeedbackSpec::new(FieldSpec::gf2(), coeffs.to_vec()).expect("valid GF(2) taps");
        Self::new(fb, seed.to_vec())
    }

    pub fn with_trajectory(mut self, t: Trajectory) -> Self {
        self.trajectory = t;
        self
    }

    pub fn with_inversion(mut self, i: InversionMode) -> Self {
        self.inversion = i;
        self
    }

    pub fn with_scheme(mut self, s: Scheme) -> Self {
        self.scheme = s;
        self
    }

    pub fn with_misr(mut self, p: Poly2) -> Self {
        self.misr_poly = Some(p);
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = Some(steps);
        self
    }

    pub fn with_refill(mut self, v: u32) -> Self {
        self.refill = Some(v);
        self
    }

    pub fn stages(&self) -> usize {
        self.feedback.stages()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    pub iterations: Vec<IterationConfig>,
    /// Background written into a fresh array before the first iteration.
    pub fill: u32,
}

impl Schedule {
    pub fn new(iterations: Vec<IterationConfig>) -> Self {
        Self { iterations, fill: 0 }
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationOutcome {
    pub final_window: Vec<u32>,
    pub golden_window: Vec<u32>,
    pub signature: Option<u32>,
    pub golden_signature: Option<u32>,
    pub detected: bool,
    pub cycles: u64,
    /// Scan scheme: first push step whose shadow register disagreed with the
    /// replica.
    pub shadow_divergence: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Misr {
    poly: u32,
    degree: u32,
}

/// An iteration validated against a geometry, with its fault-free replica
/// precomputed.
#[derive(Debug, Clone)]
pub struct Iteration {
    cfg: IterationConfig,
    order: Vec<usize>,
    k: usize,
    steps: usize,
    mask: u32,
    spec: MemorySpec,
    misr: Option<Misr>,
    /// Values stored at trajectory positions `0..steps + k` in a fault-free run.
    golden_stream: Vec<u32>,
    golden_signature: Option<u32>,
}

impl Iteration {
    pub fn new(cfg: &IterationConfig, spec: &MemorySpec) -> Result<Self, EngineError> {
        spec.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        cfg.feedback.validate(spec)?;
        let k = cfg.stages();
        if k == 0 {
            return config("register needs at least one stage");
        }
        if spec.n_cells < k + 1 {
            return config(format!("{} cells cannot hold a {k}-stage register", spec.n_cells));
        }
        if cfg.seed.len() != k {
            return config(format!("seed has {} words, register has {k} stages", cfg.seed.len()));
        }
        let mask = spec.word_mask();
        if let Some(&bad) = cfg.seed.iter().find(|&&s| s > mask) {
            return config(format!("seed word {bad} does not fit in {} bits", spec.word_bits));
        }
        if cfg.inversion == InversionMode::None && cfg.seed.iter().all(|&s| s == 0) {
            return config("all-zero seed without inversion never leaves zero");
        }
        if let Some(r) = cfg.refill {
            if r > mask {
                return config(format!("refill {r} does not fit in {} bits", spec.word_bits));
            }
        }
        let steps = cfg.steps.unwrap_or(spec.n_cells);
        if steps == 0 {
            return config("steps must be positive");
        }
        let order = realize_trajectory(&cfg.trajectory, spec.n_cells)?;
        let misr = match cfg.scheme {
            Scheme::Scan => None,
            Scheme::Ring => {
                let poly = cfg
                    .misr_poly
                    .or_else(|| cfg.feedback.default_misr())
                    .ok_or_else(|| EngineError::Config("no signature polynomial".into()))?;
                misr_step(0, mask, poly).map_err(|_| {
                    EngineError::Config(format!(
                        "signature polynomial {poly} narrower than {}-bit cells",
                        spec.word_bits
                    ))
                })?;
                Some(Misr {
                    poly: poly.bits(),
                    degree: poly.degree().unwrap(),
                })
            }
        };
        let mut it = Self {
            cfg: cfg.clone(),
            order,
            k,
            steps,
            mask,
            spec: *spec,
            misr,
            golden_stream: Vec::new(),
            golden_signature: None,
        };
        it.compute_golden();
        Ok(it)
    }

    fn compute_golden(&mut self) {
        let (k, steps) = (self.k, self.steps);
        let mut stream = self.cfg.seed.clone();
        stream.reserve(steps);
        let mut sig = self.misr.map(|_| 0);
        for t in 0..steps {
            let window: Vec<u32> = stream[t..t + k].to_vec();
            if let Some(s) = sig.as_mut() {
                for &v in &window {
                    *s = self.sign(*s, v);
                }
            }
            stream.push(self.feedback(&window));
        }
        if let Some(s) = sig.as_mut() {
            for &v in &stream[steps..steps + k] {
                *s = self.sign(*s, v);
            }
        }
        self.golden_stream = stream;
        self.golden_signature = sig;
    }

    #[inline]
    fn sign(&self, sig: u32, v: u32) -> u32 {
        let m = self.misr.expect("ring scheme");
        misr_step_unchecked(sig, v, m.poly, m.degree)
    }

    /// Stored value for the next position given the stored window.
    fn feedback(&self, stored: &[u32]) -> u32 {
        let v = if self.cfg.inversion.output() {
            let inv: Vec<u32> = stored.iter().map(|w| w ^ self.mask).collect();
            self.cfg.feedback.next(&inv)
        } else {
            self.cfg.feedback.next(stored)
        };
        if self.cfg.inversion.input() {
            v ^ self.mask
        } else {
            v
        }
    }

    pub fn config(&self) -> &IterationConfig {
        &self.cfg
    }

    pub fn stages(&self) -> usize {
        self.k
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Cell addresses in trajectory order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Address of trajectory position `pos` (wrapping).
    pub fn address(&self, pos: usize) -> usize {
        self.order[pos % self.order.len()]
    }

    /// Values a fault-free run writes, by trajectory position: the seed,
    /// then one value per push step.
    pub fn golden_stream(&self) -> &[u32] {
        &self.golden_stream
    }

    pub fn golden_window(&self) -> &[u32] {
        &self.golden_stream[self.steps..]
    }

    pub fn golden_signature(&self) -> Option<u32> {
        self.golden_signature
    }

    pub fn cycles_per_step(&self) -> u64 {
        cycles_per_step(self.k, self.spec.read_ports)
    }

    /// `k` init writes, `steps` pushes and `k` unload reads.
    pub fn expected_cycles(&self) -> u64 {
        2 * self.k as u64 + self.steps as u64 * self.cycles_per_step()
    }

    /// Write the seed into trajectory positions `0..k`.
    pub fn init(&self, mem: &mut FaultyMemory) -> Result<(), EngineError> {
        if let Some(bg) = self.cfg.refill {
            mem.fill(bg)?;
        }
        for (pos, &s) in self.cfg.seed.iter().enumerate() {
            mem.write(self.address(pos), s)?;
            mem.advance(1);
        }
        Ok(())
    }

    fn read_window(
        &self,
        mem: &mut FaultyMemory,
        first: usize,
        sig: &mut Option<u32>,
        per_cycle: usize,
    ) -> Result<Vec<u32>, EngineError> {
        let mut window = Vec::with_capacity(self.k);
        for i in 0..self.k {
            let v = mem.read(self.address(first + i))?;
            if let Some(s) = sig.as_mut() {
                *s = self.sign(*s, v);
            }
            window.push(v);
            if (i + 1) % per_cycle == 0 || i + 1 == self.k {
                mem.advance(1);
            }
        }
        Ok(window)
    }

    /// Push step `t`: read positions `t..t+k`, write position `t+k`.
    /// Returns the written value and the raw window read.
    pub fn push_step(
        &self,
        mem: &mut FaultyMemory,
        t: usize,
        sig: &mut Option<u32>,
    ) -> Result<(u32, Vec<u32>), EngineError> {
        let window = self.read_window(mem, t, sig, self.spec.read_ports as usize)?;
        let v = self.feedback(&window);
        mem.write(self.address(t + self.k), v)?;
        mem.advance(1);
        Ok((v, window))
    }

    /// Read the window the register occupies after the last push.
    pub fn unload(&self, mem: &mut FaultyMemory, sig: &mut Option<u32>) -> Result<Vec<u32>, EngineError> {
        self.read_window(mem, self.steps, sig, 1)
    }

    pub fn run(&self, mem: &mut FaultyMemory) -> Result<IterationOutcome, EngineError> {
        if *mem.spec() != self.spec {
            return config("memory geometry differs from the one the iteration was built for");
        }
        let start = mem.state().cycle();
        let mut sig = self.misr.map(|_| 0);
        self.init(mem)?;
        let mut shadow_divergence = None;
        for t in 0..self.steps {
            let (_, window) = self.push_step(mem, t, &mut sig)?;
            if self.cfg.scheme == Scheme::Scan
                && shadow_divergence.is_none()
                && window[..] != self.golden_stream[t..t + self.k]
            {
                shadow_divergence = Some(t);
            }
        }
        let final_window = self.unload(mem, &mut sig)?;
        let cycles = mem.state().cycle() - start;
        let golden_window = self.golden_window().to_vec();
        let detected = final_window != golden_window || sig != self.golden_signature;
        if mem.instances().next().is_none() && (detected || shadow_divergence.is_some()) {
            return Err(EngineError::Internal(
                "fault-free run disagrees with the replica".into(),
            ));
        }
        Ok(IterationOutcome {
            final_window,
            golden_window,
            signature: sig,
            golden_signature: self.golden_signature,
            detected,
            cycles,
            shadow_divergence,
        })
    }
}

/// Write the seed of `cfg` into `mem`.
pub fn pi_init(mem: &mut FaultyMemory, cfg: &IterationConfig) -> Result<(), EngineError> {
    Iteration::new(cfg, mem.spec())?.init(mem)
}

/// Run one full iteration on `mem`.
pub fn run_iteration(mem: &mut FaultyMemory, cfg: &IterationConfig) -> Result<IterationOutcome, EngineError> {
    let spec = *mem.spec();
    Iteration::new(cfg, &spec)?.run(mem)
}

/// A schedule validated against one geometry.
#[derive(Debug, Clone)]
pub struct PreparedSchedule {
    spec: MemorySpec,
    fill: u32,
    iterations: Vec<Iteration>,
}

impl PreparedSchedule {
    pub fn new(spec: &MemorySpec, schedule: &Schedule) -> Result<Self, EngineError> {
        if schedule.is_empty() {
            return config("schedule has no iterations");
        }
        if schedule.fill > spec.word_mask() {
            return config(format!("fill {} does not fit in {} bits", schedule.fill, spec.word_bits));
        }
        let iterations = schedule
            .iterations
            .iter()
            .map(|c| Iteration::new(c, spec))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            spec: *spec,
            fill: schedule.fill,
            iterations,
        })
    }

    pub fn spec(&self) -> &MemorySpec {
        &self.spec
    }

    pub fn iterations(&self) -> &[Iteration] {
        &self.iterations
    }

    /// Fresh array with `instances` injected.
    pub fn memory(&self, instances: Vec<FaultInstance>) -> Result<FaultyMemory, EngineError> {
        let mem = MemoryState::new(self.spec, self.fill).map_err(FaultError::from)?;
        Ok(FaultyMemory::new(mem, instances)?)
    }

    /// Run every iteration in order on one fresh array.
    pub fn run(&self, instances: Vec<FaultInstance>) -> Result<Vec<IterationOutcome>, EngineError> {
        let mut mem = self.memory(instances)?;
        self.run_on(&mut mem)
    }

    pub fn run_on(&self, mem: &mut FaultyMemory) -> Result<Vec<IterationOutcome>, EngineError> {
        self.iterations.iter().map(|it| it.run(mem)).collect()
    }
}

/// Run `schedule` on a fresh array holding `instances`; the array persists
/// between iterations unless an iteration asks for a refill.
pub fn run_schedule(
    spec: &MemorySpec,
    schedule: &Schedule,
    instances: &[FaultInstance],
) -> Result<Vec<IterationOutcome>, EngineError> {
    PreparedSchedule::new(spec, schedule)?.run(instances.to_vec())
}

/// Overall verdict of a schedule.
pub fn any_detected(outcomes: &[IterationOutcome]) -> bool {
    outcomes.iter().any(|o| o.detected)
}
