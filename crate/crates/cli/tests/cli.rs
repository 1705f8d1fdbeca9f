use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn prt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prt")).args(args).output().expect("spawn prt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

#[test]
fn period_examples() {
    let o = prt(&["period", "--p", "19", "--q", "2,2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "255");
    let o = prt(&["period", "--p", "0b11", "--q", "1,0,0,1", "--seed", "1,0,0,0"]);
    assert_eq!(stdout(&o).trim(), "15");
}

#[test]
fn field_table_prefix() {
    let o = prt(&["field-table", "--p", "19", "--c1", "1", "--c2", "9"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 16);
    assert_eq!(text.lines().nth(3).unwrap(), ".db 8,9,10,11,12,13,14,15,0,1,2,3,4,5,6,7");
    let bare = stdout(&prt(&["field-table", "--p", "19", "--c1", "1", "--c2", "9", "--bare"]));
    assert!(bare.starts_with("0,1,2,"));
}

#[test]
fn march_detects_stuck_at() {
    let o = prt(&["march", "--alg", "a(w0);u(r0,w1);d(r1,w0)", "--n", "8", "--faults", &cfg("faults_sf.txt")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("detected 16/16"), "{text}");
    assert!(!text.contains("missed"));
}

#[test]
fn march_from_file_fault_free() {
    let dir = tempfile::tempdir().unwrap();
    let alg = dir.path().join("alg.txt");
    fs::write(&alg, "u(w0); u(r0, w1); d(r1)\n").unwrap();
    let o = prt(&["march", "--alg-file", alg.to_str().unwrap(), "--n", "4"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("fault-free: 8 reads"));
}

#[test]
fn coverage_writes_csv_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run = |out: &PathBuf| prt(&["coverage", "--config", &cfg("sample.cfg"), "--out", out.to_str().unwrap()]);
    let o = run(&a);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("R_single = "));
    run(&b);
    let csv = fs::read_to_string(&a).unwrap();
    assert_eq!(csv, fs::read_to_string(&b).unwrap());
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("fault_id,primitive,victim,aggressor,iter_flags,detected"));
    // 12 single-cell primitives x 16 cells + 32 two-cell primitives x 240 pairs
    assert_eq!(lines.count(), 192 + 32 * 240);
}

#[test]
fn coverage_with_empty_list_reports_na() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("none.txt");
    fs::write(&empty, "# nothing\n").unwrap();
    let out = dir.path().join("out.csv");
    let o = prt(&[
        "coverage",
        "--config",
        &cfg("sample.cfg"),
        "--faults",
        empty.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("R_single = NA"));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1);
}

#[test]
fn run_reports_each_iteration() {
    let o = prt(&["run", "--config", &cfg("gf16_words.cfg"), "--faults", &cfg("faults_mixed.txt")]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("iteration 1:") && text.contains("iteration 2:"));
    assert!(text.contains("verdict: fault detected"));
    let o = prt(&["run", "--config", &cfg("sample.cfg"), "--faults", "/dev/null"]);
    assert!(stdout(&o).contains("verdict: no fault detected"));
}

#[test]
fn romsig_examples() {
    let dir = tempfile::tempdir().unwrap();
    let rom = dir.path().join("rom.bin");
    fs::write(&rom, [1u8, 0]).unwrap();
    let o = prt(&["romsig", "--rom", rom.to_str().unwrap(), "--p", "19", "--c1", "1", "--c2", "9"]);
    assert_eq!(stdout(&o).trim(), "01:01");
    fs::write(&rom, [0u8; 16]).unwrap();
    let o = prt(&["romsig", "--rom", rom.to_str().unwrap(), "--p", "19", "--c1", "1", "--c2", "9", "--seed", "00:00"]);
    assert_eq!(stdout(&o).trim(), "00:00");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "[memory]\nn = 16\n\n[iteration]\nq_coeffs = 1,1\nseed = 0,0\n").unwrap();
    let o = prt(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line"), "{err}");

    let o = prt(&["period", "--p", "18", "--q", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = prt(&["run", "--config", "/nonexistent.cfg"]);
    assert_eq!(o.status.code(), Some(2));

    let o = prt(&["march", "--alg", "u(r1)", "--n", "4"]);
    assert_eq!(o.status.code(), Some(2));

    let faults = dir.path().join("f.txt");
    fs::write(&faults, "SF0 <1/0/->\nSF1 <0/2/->\n").unwrap();
    let o = prt(&["run", "--config", &cfg("sample.cfg"), "--faults", faults.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}
