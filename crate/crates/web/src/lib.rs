//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain strings/numbers and returns a JSON string; the
//! `*_json` functions do the work and are usable natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use prt_core::config::parse_config;
use prt_core::coverage::run_coverage;
use prt_core::engine::PreparedSchedule;
use prt_core::faults::{enumerate_instances, instances_from_list, parse_fault_list, FaultCatalog, FaultInstance};
use prt_core::galois::{parse_int, parse_poly, sequence_period, FeedbackSpec, FieldSpec};
use prt_core::romsig::gen_table;

/// Largest array the demo will simulate.
pub const MAX_DEMO_CELLS: usize = 256;

#[derive(Serialize)]
struct FieldView {
    field: String,
    degree: u32,
    table: Vec<Vec<u8>>,
    period: Option<u64>,
    max_period: Option<u64>,
    period_error: Option<String>,
}

fn ints(text: &str) -> Result<Vec<u32>, String> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_int(s).ok_or_else(|| format!("`{}` is not an integer", s.trim())))
        .collect()
}

/// Sum table `c2*i ^ c1*j` over GF(2^m) and the period of `q` (taps
/// `c1,...,ck`, comma separated) from `seed`.
pub fn field_json(p: &str, c1: u32, c2: u32, q: &str, seed: &str) -> Result<String, String> {
    let p = parse_poly(p).ok_or("bad polynomial")?;
    let field = FieldSpec::new(p).map_err(|e| e.to_string())?;
    let table = gen_table(&field, c1, c2).map_err(|e| e.to_string())?;
    let side = table.side();
    let rows = table.entries().chunks(side).map(<[u8]>::to_vec).collect();
    let (mut period, mut max_period, mut period_error) = (None, None, None);
    if !q.trim().is_empty() {
        let result = ints(q).and_then(|coeffs| {
            let fb = FeedbackSpec::new(field, coeffs).map_err(|e| e.to_string())?;
            let seed = if seed.trim().is_empty() {
                let mut s = vec![0; fb.len()];
                s[0] = 1;
                s
            } else {
                ints(seed)?
            };
            let t = sequence_period(&fb, &seed).map_err(|e| e.to_string())?;
            Ok((t, (1u64 << (field.degree() as u64 * fb.len() as u64)) - 1))
        });
        match result {
            Ok((t, max)) => {
                period = Some(t);
                max_period = Some(max);
            }
            Err(e) => period_error = Some(e),
        }
    }
    let view = FieldView {
        field: p.to_string(),
        degree: field.degree(),
        table: rows,
        period,
        max_period,
        period_error,
    };
    Ok(serde_json::to_string(&view).unwrap())
}

#[derive(Serialize)]
struct Frame {
    step: Option<usize>,
    reads: Vec<usize>,
    write: Option<usize>,
    cells: Vec<u32>,
}

#[derive(Serialize)]
struct IterationView {
    order: Vec<usize>,
    frames: Vec<Frame>,
    final_window: Vec<u32>,
    golden_window: Vec<u32>,
    signature: Option<u32>,
    golden_signature: Option<u32>,
    cycles: u64,
    detected: bool,
}

#[derive(Serialize)]
struct TraceView {
    n: usize,
    word_bits: u32,
    faults: Vec<String>,
    iterations: Vec<IterationView>,
}

fn load(config: &str, faults: &str) -> Result<(prt_core::ExperimentConfig, Vec<FaultInstance>), String> {
    let cfg = parse_config(config).map_err(|e| format!("config: {e}"))?;
    if cfg.spec.n_cells > MAX_DEMO_CELLS {
        return Err(format!("the demo is limited to {MAX_DEMO_CELLS} cells"));
    }
    let list = parse_fault_list(faults).map_err(|e| format!("fault list: {e}"))?;
    let insts = instances_from_list(&list, &cfg.spec, cfg.placement).map_err(|e| e.to_string())?;
    Ok((cfg, insts))
}

/// Cell contents after the seed and after every push step of each
/// iteration, with `faults` injected together.
pub fn trace_json(config: &str, faults: &str) -> Result<String, String> {
    let (cfg, insts) = load(config, faults)?;
    let prepared = PreparedSchedule::new(&cfg.spec, &cfg.schedule).map_err(|e| e.to_string())?;
    let faults = insts.iter().map(|i| i.id.clone()).collect();
    let mut mem = prepared.memory(insts).map_err(|e| e.to_string())?;
    let mut iterations = Vec::new();
    for it in prepared.iterations() {
        let k = it.stages();
        let mut replay = mem.clone();
        let mut sig = it.golden_signature().map(|_| 0);
        it.init(&mut replay).map_err(|e| e.to_string())?;
        let mut frames = vec![Frame {
            step: None,
            reads: Vec::new(),
            write: None,
            cells: replay.state().cells().to_vec(),
        }];
        for t in 0..it.steps() {
            it.push_step(&mut replay, t, &mut sig).map_err(|e| e.to_string())?;
            frames.push(Frame {
                step: Some(t),
                reads: (t..t + k).map(|p| it.address(p)).collect(),
                write: Some(it.address(t + k)),
                cells: replay.state().cells().to_vec(),
            });
        }
        let out = it.run(&mut mem).map_err(|e| e.to_string())?;
        iterations.push(IterationView {
            order: it.order().to_vec(),
            frames,
            final_window: out.final_window,
            golden_window: out.golden_window,
            signature: out.signature,
            golden_signature: out.golden_signature,
            cycles: out.cycles,
            detected: out.detected,
        });
    }
    let view = TraceView {
        n: cfg.spec.n_cells,
        word_bits: cfg.spec.word_bits,
        faults,
        iterations,
    };
    Ok(serde_json::to_string(&view).unwrap())
}

#[derive(Serialize)]
struct TallyView {
    name: String,
    two_cell: bool,
    detected: usize,
    total: usize,
}

#[derive(Serialize)]
struct CoverageView {
    instances: usize,
    r_single: Option<f64>,
    r_two: Option<f64>,
    families: Vec<TallyView>,
    primitives: Vec<TallyView>,
}

/// Single-fault coverage of the configured schedule; an empty fault list
/// means the whole built-in catalog.
pub fn coverage_json(config: &str, faults: &str) -> Result<String, String> {
    let (cfg, mut insts) = load(config, faults)?;
    if parse_fault_list(faults).map(|l| l.is_empty()).unwrap_or(false) {
        insts = enumerate_instances(&FaultCatalog::default_catalog(), &cfg.spec, cfg.placement);
    }
    let report = run_coverage(&cfg, &insts).map_err(|e| e.to_string())?;
    let view = |t: prt_core::coverage::Tally| TallyView {
        name: t.key,
        two_cell: t.two_cell,
        detected: t.detected,
        total: t.total,
    };
    let out = CoverageView {
        instances: report.rows.len(),
        r_single: report.r_single(),
        r_two: report.r_two(),
        families: report.per_family().into_iter().map(view).collect(),
        primitives: report.per_primitive().into_iter().map(view).collect(),
    };
    Ok(serde_json::to_string(&out).unwrap())
}

#[wasm_bindgen]
pub fn field_explorer(p: &str, c1: u32, c2: u32, q: &str, seed: &str) -> Result<String, JsValue> {
    field_json(p, c1, c2, q, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn pi_trace(config: &str, faults: &str) -> Result<String, JsValue> {
    trace_json(config, faults).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn coverage(config: &str, faults: &str) -> Result<String, JsValue> {
    coverage_json(config, faults).map_err(|e| JsValue::from_str(&e))
}
