use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

use privrand::capacity::AdditivityReport;
use privrand::cli::{run, SimulationOutput, VerifyOutput, EXIT_INPUT, EXIT_OK};
use privrand::decouple::DecouplingReport;
use privrand::entropy::EntropyReport;
use privrand::ibit::{build_alpha, AlphaState};
use privrand::io::{density_to_string, pure_to_string, StateFile};
use privrand::protosim::singlet_protocol_script;
use privrand::qmath::{random_pure, DensityMatrix, PureState, SubsystemLayout};
use privrand::rates::{OneSidedReport, RateRegion};

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("privrand").chain(args.iter().copied());
    let code = run(argv.map(std::ffi::OsString::from), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn phi_file(dir: &TempDir) -> PathBuf {
    write(dir, "phi.json", &pure_to_string(&PureState::maximally_entangled("A", "B", 2).unwrap()).unwrap())
}

#[test]
fn rates_setting_two_on_phi() {
    let dir = TempDir::new().unwrap();
    let phi = phi_file(&dir);
    let (code, out, _) = invoke(&["rates", "--state", s(&phi), "--setting", "2"]);
    assert_eq!(code, EXIT_OK);
    let region: RateRegion = serde_json::from_str(&out).unwrap();
    let want = [(2.0, 0.0), (0.0, 2.0), (0.0, 0.0)];
    assert_eq!(region.vertices.len(), 3);
    for (g, w) in region.vertices.iter().zip(want) {
        assert!((g.0 - w.0).abs() < 1e-9 && (g.1 - w.1).abs() < 1e-9, "{:?}", region.vertices);
    }
    assert_eq!(serde_json::to_string_pretty(&region).unwrap() + "\n", out);
}

#[test]
fn rates_csv_closes_the_polygon() {
    let dir = TempDir::new().unwrap();
    let phi = phi_file(&dir);
    let (code, out, _) = invoke(&["rates", "--state", s(&phi), "--setting", "1", "--out", "csv"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "R_A,R_B");
    assert_eq!(lines[1], *lines.last().unwrap());
}

#[test]
fn one_sided_on_phi() {
    let dir = TempDir::new().unwrap();
    let phi = phi_file(&dir);
    let (code, out, _) = invoke(&["rates", "--state", s(&phi), "--one-sided"]);
    assert_eq!(code, EXIT_OK);
    let r: OneSidedReport = serde_json::from_str(&out).unwrap();
    assert!((r.exact.unwrap() - 1.5).abs() < 1e-9);
}

#[test]
fn entropy_report_round_trips() {
    let dir = TempDir::new().unwrap();
    let psi = random_pure(&SubsystemLayout::new(["A", "B", "C"], [2, 2, 2]).unwrap(), 3);
    let path = write(&dir, "psi.json", &pure_to_string(&psi).unwrap());
    let (code, out, _) = invoke(&["entropy", "--state", s(&path), "--alice", "A", "--bob", "B,C"]);
    assert_eq!(code, EXIT_OK);
    let r: EntropyReport = serde_json::from_str(&out).unwrap();
    assert!((r.s_a_given_b - (r.s_ab - r.s_b)).abs() < 1e-15);
    assert!(r.i_ab >= -1e-12);
}

#[test]
fn identity_capacity_is_two() {
    let dir = TempDir::new().unwrap();
    let ch = write(&dir, "id.json", r#"{"kind": "identity", "dim": 2}"#);
    let (code, out, _) = invoke(&["capacity", "--channel", s(&ch)]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!((v["capacity"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!(v.get("trace").is_none());
}

#[test]
fn capacity_trace_and_nonconvergence() {
    let dir = TempDir::new().unwrap();
    let ch = write(&dir, "ad.json", r#"{"kind": "amplitude_damping", "gamma": 0.3}"#);
    let (code, out, _) = invoke(&["capacity", "--channel", s(&ch), "--trace"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["trace"].as_array().unwrap().len() >= 2);
    let (code, _, _) = invoke(&["capacity", "--channel", s(&ch), "--tol", "1e-300", "--max-iter", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn additivity_pair() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"kind": "dephasing", "p": 0.4, "dim": 2}"#);
    let b = write(&dir, "b.json", r#"{"kind": "depolarizing", "p": 0.2, "dim": 2}"#);
    let (code, out, _) = invoke(&["capacity", "--additivity", s(&a), s(&b)]);
    assert_eq!(code, EXIT_OK);
    let r: AdditivityReport = serde_json::from_str(&out).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn decouple_is_bit_identical_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let psi = random_pure(&SubsystemLayout::new(["A", "B", "E"], [2, 2, 2]).unwrap(), 9);
    let path = write(&dir, "psi.json", &pure_to_string(&psi).unwrap());
    let args = ["decouple", "--state", s(&path), "--n", "2", "--key-bits", "1", "--trials", "20", "--seed", "5"];
    let (code, first, _) = invoke(&args);
    assert_eq!(code, EXIT_OK);
    assert_eq!(first, invoke(&args).1);
    let r: DecouplingReport = serde_json::from_str(&first).unwrap();
    assert_eq!(r.per_trial.len(), 20);
    assert_eq!(serde_json::to_string_pretty(&r).unwrap() + "\n", first);
}

#[test]
fn decouple_rejects_mixed_input() {
    let dir = TempDir::new().unwrap();
    let l = SubsystemLayout::new(["A", "B", "E"], [2, 2, 2]).unwrap();
    let path = write(&dir, "rho.json", &density_to_string(&DensityMatrix::maximally_mixed(l)).unwrap());
    let (code, _, err) = invoke(&["decouple", "--state", s(&path)]);
    assert_eq!(code, EXIT_INPUT);
    assert!(!err.is_empty());
}

#[test]
fn simulate_singlet_protocol() {
    let dir = TempDir::new().unwrap();
    let (script, psi) = singlet_protocol_script().unwrap();
    let sp = write(&dir, "script.json", &serde_json::to_string(&script).unwrap());
    let st = write(&dir, "psi.json", &pure_to_string(&psi).unwrap());
    let (code, out, _) = invoke(&["simulate", "--script", s(&sp), "--state", s(&st)]);
    assert_eq!(code, EXIT_OK);
    let r: SimulationOutput = serde_json::from_str(&out).unwrap();
    assert_eq!(r.extracted_bits, 3.0);
    assert!(r.ideal_distance < 1e-9 && (r.standard_distance - r.ideal_distance).abs() < 1e-9);
    let ccq = r.ccq.clone().into_state().unwrap().density();
    assert!((ccq.matrix().trace().re - 1.0).abs() < 1e-10);
}

#[test]
fn ibit_verify_accepts_an_untwisted_bit() {
    let dir = TempDir::new().unwrap();
    let shield = DensityMatrix::maximally_mixed(SubsystemLayout::single("S", 2).unwrap());
    let rho = build_alpha(&AlphaState::untwisted((2, 1), shield).unwrap()).unwrap();
    let path = write(&dir, "alpha.json", &density_to_string(&rho).unwrap());
    let (code, out, _) = invoke(&["ibit", "verify", "--state", s(&path), "--keys", "KA,KB"]);
    assert_eq!(code, EXIT_OK);
    let v: VerifyOutput = serde_json::from_str(&out).unwrap();
    assert!(v.ok);
}

#[test]
fn ibit_build_writes_a_state_file() {
    let dir = TempDir::new().unwrap();
    let spec = r#"{"a": 2, "b": 1, "unitaries": [[[[1.0, 0.0]]], [[[1.0, 0.0]]]], "shield": [[[1.0, 0.0]]], "shield_labels": ["S"], "shield_dims": [1]}"#;
    let path = write(&dir, "twist.json", spec);
    let (code, out, err) = invoke(&["ibit", "build", "--twisting", s(&path)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let state: StateFile = serde_json::from_str(&out).unwrap();
    let rho = state.into_state().unwrap().density();
    assert_eq!(rho.layout().labels(), ["KA", "KB", "S"]);
}

#[test]
fn input_errors_exit_one() {
    for args in [
        vec!["rates", "--state", "/nonexistent/state.json", "--setting", "1"],
        vec!["rates", "--setting", "1"],
        vec!["entropy"],
        vec!["bogus"],
    ] {
        let (code, out, err) = invoke(&args);
        assert_eq!(code, EXIT_INPUT, "{args:?}");
        assert!(out.is_empty() && !err.is_empty(), "{args:?}");
    }
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_privrand");
    let ok = Command::new(exe).arg("--help").output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("capacity"));
    let bad = Command::new(exe).args(["rates", "--setting", "9", "--state", "x"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_INPUT));
}
