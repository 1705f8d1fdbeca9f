//! Pseudo-ring memory self-test simulator.
//!
//! A virtual (generalized) LFSR is emulated by the memory under test: its
//! stages are a sliding window of cells, each step writes the feedback of
//! the window into the next cell, and after a pass over the array the final
//! window (and optionally a signature of everything read) is compared with
//! a software replica.
//!
//! - [`galois`]: GF(2) polynomials, GF(2^m) fields, GLFSR recurrences.
//! - [`memory`]: the simulated array, access trace and cycle cost model.
//! - [`faults`]: `<S/F/R>` fault primitives, catalog, injection.
//! - [`engine`]: trajectories, iterations, ring/scan schemes, schedules.
//! - [`march`]: March notation parser and interpreter.
//! - [`romsig`]: two-stage ROM signature with a precomputed sum table.
//! - [`config`], [`coverage`]: experiment files and single-fault coverage.

pub mod config;
pub mod coverage;
pub mod engine;
pub mod faults;
pub mod galois;
pub mod march;
pub mod memory;
pub mod romsig;

pub use config::{parse_config, render_config, ConfigError, ExperimentConfig};
pub use coverage::{run_coverage, CoverageReport};
pub use engine::{
    run_iteration, run_schedule, FeedbackNetwork, InversionMode, Iteration, IterationConfig, IterationOutcome,
    PreparedSchedule, Schedule, Scheme, Trajectory,
};
pub use faults::{enumerate_instances, parse_fp, FaultCatalog, FaultInstance, FaultyMemory, Placement};
pub use galois::{FeedbackSpec, FieldSpec, Poly2};
pub use march::{parse_march, pi_as_march, run_march, MarchAlgorithm};
pub use memory::{MemorySpec, MemoryState};
pub use romsig::{gen_table, rom_signature, SigState, SumTable};
