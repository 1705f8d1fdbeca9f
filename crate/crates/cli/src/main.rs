use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prt_core::config::{parse_config, ExperimentConfig};
use prt_core::coverage::{run_coverage, CoverageError};
use prt_core::engine::{EngineError, PreparedSchedule};
use prt_core::faults::{
    enumerate_instances, instances_from_list, parse_fault_list, FaultCatalog, FaultInstance, FaultyMemory, Placement,
};
use prt_core::galois::{parse_int, parse_poly, sequence_period, FeedbackSpec, FieldSpec, Poly2};
use prt_core::march::{parse_march, run_march, MarchAlgorithm};
use prt_core::memory::{MemorySpec, MemoryState};
use prt_core::romsig::{gen_table, rom_signature, SigState};

#[derive(Parser)]
#[command(name = "prt", version, about = "Pseudo-ring memory self-test simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the table of c2*i ^ c1*j over GF(2^m).
    FieldTable {
        #[arg(long, value_parser = poly)]
        p: Poly2,
        #[arg(long, value_parser = int)]
        c1: u32,
        #[arg(long, value_parser = int)]
        c2: u32,
        /// Omit the `.db ` line prefix.
        #[arg(long)]
        bare: bool,
    },
    /// Period of the register q(z) over GF(2^m) from a seed.
    Period {
        #[arg(long, value_parser = poly)]
        p: Poly2,
        /// Coefficients c1,...,ck.
        #[arg(long, value_delimiter = ',', value_parser = int)]
        q: Vec<u32>,
        /// Seed words, oldest first; defaults to 1,0,...,0.
        #[arg(long, value_delimiter = ',', value_parser = int)]
        seed: Option<Vec<u32>>,
    },
    /// Run a schedule on one array with the listed faults injected together.
    Run {
        #[command(flatten)]
        input: ExperimentInput,
    },
    /// Single-fault coverage: one simulation per fault instance.
    Coverage {
        #[command(flatten)]
        input: ExperimentInput,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a March algorithm, fault-free or once per listed fault.
    March {
        #[arg(long, conflicts_with = "alg_file", required_unless_present = "alg_file")]
        alg: Option<String>,
        #[arg(long)]
        alg_file: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        word_bits: u32,
        /// Field generator for `c*x` terms; defaults by word width.
        #[arg(long, value_parser = poly)]
        p: Option<Poly2>,
        #[arg(long)]
        faults: Option<PathBuf>,
    },
    /// Signature of a binary ROM image.
    Romsig {
        #[arg(long)]
        rom: PathBuf,
        #[arg(long, value_parser = poly)]
        p: Poly2,
        #[arg(long, value_parser = int)]
        c1: u32,
        #[arg(long, value_parser = int)]
        c2: u32,
        /// Initial register as MM:LL (hex).
        #[arg(long, default_value = "00:00")]
        seed: SigState,
    },
}

#[derive(Args)]
struct ExperimentInput {
    #[arg(long)]
    config: PathBuf,
    /// Fault list; defaults to the built-in catalog with the configured placement.
    #[arg(long)]
    faults: Option<PathBuf>,
}

fn int(s: &str) -> Result<u32, String> {
    parse_int(s).ok_or_else(|| format!("`{s}` is not an integer"))
}

fn poly(s: &str) -> Result<Poly2, String> {
    parse_poly(s).ok_or_else(|| format!("`{s}` is not a polynomial"))
}

enum Failure {
    Config(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

fn cfg_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Internal(_) => Failure::Internal(e.to_string()),
            other => cfg_err(other),
        }
    }
}

impl From<CoverageError> for Failure {
    fn from(e: CoverageError) -> Self {
        match e {
            CoverageError::Engine(e) => e.into(),
            CoverageError::Internal(_) => Failure::Internal(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn load(input: &ExperimentInput) -> Result<(ExperimentConfig, Vec<FaultInstance>), Failure> {
    let cfg = parse_config(&read(&input.config)?)
        .map_err(|e| Failure::Config(format!("{}: {e}", input.config.display())))?;
    let instances = match &input.faults {
        Some(path) => {
            let list = parse_fault_list(&read(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            instances_from_list(&list, &cfg.spec, cfg.placement).map_err(cfg_err)?
        }
        None => enumerate_instances(&FaultCatalog::default_catalog(), &cfg.spec, cfg.placement),
    };
    Ok((cfg, instances))
}

fn words(ws: &[u32]) -> String {
    ws.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::FieldTable { p, c1, c2, bare } => {
            let field = FieldSpec::new(p).map_err(cfg_err)?;
            let table = gen_table(&field, c1, c2).map_err(cfg_err)?;
            print!("{}", table.render(if bare { "" } else { ".db " }));
        }
        Command::Period { p, q, seed } => {
            let field = FieldSpec::new(p).map_err(cfg_err)?;
            let fb = FeedbackSpec::new(field, q).map_err(cfg_err)?;
            let seed = seed.unwrap_or_else(|| {
                let mut s = vec![0; fb.len()];
                s[0] = 1;
                s
            });
            println!("{}", sequence_period(&fb, &seed).map_err(cfg_err)?);
        }
        Command::Run { input } => {
            let (cfg, instances) = load(&input)?;
            let prepared = PreparedSchedule::new(&cfg.spec, &cfg.schedule)?;
            println!("faults injected: {}", instances.len());
            let outcomes = prepared.run(instances)?;
            for (i, o) in outcomes.iter().enumerate() {
                let sig = match (o.signature, o.golden_signature) {
                    (Some(s), Some(g)) => format!(" signature {s:#x} (expected {g:#x})"),
                    _ => String::new(),
                };
                println!(
                    "iteration {}: window {} (expected {}){} cycles {} -> {}",
                    i + 1,
                    words(&o.final_window),
                    words(&o.golden_window),
                    sig,
                    o.cycles,
                    if o.detected { "DETECTED" } else { "pass" }
                );
            }
            let detected = outcomes.iter().any(|o| o.detected);
            println!("verdict: {}", if detected { "fault detected" } else { "no fault detected" });
        }
        Command::Coverage { input, out } => {
            let (cfg, instances) = load(&input)?;
            let report = run_coverage(&cfg, &instances)?;
            fs::write(&out, report.to_csv()).map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?;
            print!("{}", report.summary());
        }
        Command::March { alg, alg_file, n, word_bits, p, faults } => {
            let text = match (alg, alg_file) {
                (Some(a), _) => a,
                (None, Some(f)) => read(&f)?,
                (None, None) => unreachable!("clap requires one of --alg/--alg-file"),
            };
            let spec = MemorySpec::new(n, word_bits, 1).map_err(cfg_err)?;
            let field = match p {
                Some(p) => Some(FieldSpec::new(p).map_err(cfg_err)?),
                None if word_bits == 1 => Some(FieldSpec::gf2()),
                None => prt_core::galois::first_primitive(word_bits).and_then(|p| FieldSpec::new(p).ok()),
            };
            let mut alg: MarchAlgorithm = parse_march(text.trim()).map_err(cfg_err)?;
            if let Some(f) = field {
                alg = alg.with_field(f);
            }
            march(&alg, spec, faults.as_deref())?;
        }
        Command::Romsig { rom, p, c1, c2, seed } => {
            let bytes = fs::read(&rom).map_err(|e| Failure::Config(format!("{}: {e}", rom.display())))?;
            let field = FieldSpec::new(p).map_err(cfg_err)?;
            let table = gen_table(&field, c1, c2).map_err(cfg_err)?;
            println!("{}", rom_signature(&bytes, &table, seed).map_err(cfg_err)?);
        }
    }
    Ok(())
}

fn march(alg: &MarchAlgorithm, spec: MemorySpec, faults: Option<&Path>) -> Result<(), Failure> {
    let fresh = |insts: Vec<FaultInstance>| -> Result<FaultyMemory, Failure> {
        let mem = MemoryState::new(spec, 0).map_err(cfg_err)?;
        FaultyMemory::new(mem, insts).map_err(cfg_err)
    };
    println!("{alg}");
    let clean = run_march(alg, &mut fresh(Vec::new())?).map_err(cfg_err)?;
    if clean.detected {
        return Err(Failure::Config("algorithm reads a value it never wrote on a fault-free array".into()));
    }
    let Some(path) = faults else {
        println!("fault-free: {} reads, no mismatch", clean.reads.len());
        return Ok(());
    };
    let list = parse_fault_list(&read(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let instances = instances_from_list(&list, &spec, Placement::Pairs).map_err(cfg_err)?;
    let mut hits = 0;
    for inst in &instances {
        let report = run_march(alg, &mut fresh(vec![inst.clone()])?).map_err(cfg_err)?;
        hits += report.detected as usize;
        println!("{} {}", inst.id, if report.detected { "detected" } else { "missed" });
    }
    println!("detected {hits}/{}", instances.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, msg) = match &f {
                Failure::Config(m) => ("error", m),
                Failure::Internal(m) => ("internal error", m),
            };
            eprintln!("prt: {kind}: {msg}");
            ExitCode::from(f.code())
        }
    }
}
