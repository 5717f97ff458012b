use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::PathBuf;
use std::process::{Command, Output};
use tempus::cloning::{BoundReport, SearchResult};
use tempus::io::AnyClock;
use tempus::order::{ClassicalOrderVerdict, OrderVerdict, PrepFidelity};
use tempus::ValidationReport;

fn data(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("../../data");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn tempus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempus")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}, stderr {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Parses `text` as `T` and checks that serializing it again gives the
/// same bytes.
fn round_trip<T: Serialize + DeserializeOwned>(text: &str) -> T {
    let value: T = serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"));
    assert_eq!(serde_json::to_string_pretty(&value).unwrap() + "\n", text);
    value
}

fn error_line(out: &Output) -> serde_json::Value {
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    serde_json::from_str(err.trim_end()).unwrap()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, contents: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn fisher_of_the_equatorial_qubit_is_four_variance() {
    let text = stdout(&tempus(&["fisher", "--clock", &data("plus_qubit.json")]));
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    // H = diag(0, 1), populations ½, ½: 4·Var = 4·¼.
    assert!((value["F"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn four_levels_majorize_the_equatorial_qubit() {
    let text = stdout(&tempus(&["order", "--resource", &data("four_level.json"), "--target", &data("plus_qubit.json")]));
    let verdict: OrderVerdict = round_trip(&text);
    assert!(verdict.feasible);
    assert!(verdict.witness_channel.is_some());
}

#[test]
fn three_levels_do_not_majorize_the_equatorial_qubit() {
    let out = tempus(&["order", "--resource", &data("three_level.json"), "--target", &data("plus_qubit.json")]);
    let verdict: OrderVerdict = round_trip(&stdout(&out));
    assert!(!verdict.feasible);
    let analytic = 0.5 + 2f64.sqrt() / 3.0;
    assert!((verdict.fidelity_achieved - analytic).abs() < 1e-3, "{}", verdict.fidelity_achieved);

    let prep: PrepFidelity =
        round_trip(&stdout(&tempus(&["prep-fidelity", "--resource", &data("three_level.json"), "--target", &data("plus_qubit.json")])));
    assert!(prep.fidelity <= analytic + 1e-9 && prep.upper_bound >= analytic - 1e-9);
}

#[test]
fn classical_clocks_use_the_convolution_order() {
    let dir = tempfile::tempdir().unwrap();
    let sharp: Vec<f64> = (0..16).map(|k| if k == 3 { 16.0 } else { 0.0 }).collect();
    let flat = vec![1.0; 16];
    let clock = |d: &[f64]| serde_json::json!({"type": "classical", "density": d, "omega": 1.0}).to_string();
    let a = write_temp(&dir, "sharp.json", &clock(&sharp));
    let b = write_temp(&dir, "flat.json", &clock(&flat));
    let forward: ClassicalOrderVerdict = round_trip(&stdout(&tempus(&["order", "--resource", &a, "--target", &b])));
    assert!(forward.feasible);
    let backward: ClassicalOrderVerdict = round_trip(&stdout(&tempus(&["order", "--resource", &b, "--target", &a])));
    assert!(!backward.feasible);
    assert!(backward.missing_mode.is_some());
    assert!(backward.min_density.is_nan());
}

#[test]
fn transfer_round_trips_and_measurement_density_is_normalized() {
    let text = stdout(&tempus(&["transfer", "--clock", &data("plus_qubit.json"), "--grid-n", "16"]));
    let reading: AnyClock = round_trip(&text);
    let AnyClock::Classical(c) = reading else { panic!("expected a classical clock") };
    let mass: f64 = c.density().iter().sum::<f64>() / 16.0;
    assert!((mass - 1.0).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let classical = write_temp(&dir, "reading.json", &text);
    let prepared: AnyClock = round_trip(&stdout(&tempus(&["transfer", "--clock", &classical, "--seed-clock", &data("plus_qubit.json")])));
    assert!(matches!(prepared, AnyClock::Quantum(_)));
    let missing = tempus(&["transfer", "--clock", &classical]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn broadcast_search_is_deterministic_and_feeds_clone_bound() {
    let args = [
        "broadcast-search",
        "--resource",
        &data("plus_qubit.json"),
        "--h1",
        &data("qubit_hamiltonian.json"),
        "--h2",
        &data("qubit_hamiltonian.json"),
        "--restarts",
        "2",
        "--seed",
        "7",
    ];
    let first = stdout(&tempus(&args));
    let second = stdout(&tempus(&args));
    assert_eq!(first, second);
    let result: SearchResult = round_trip(&first);
    assert!(result.objective > 0.0 && result.objective <= 0.5 + 1e-6);

    let dir = tempfile::tempdir().unwrap();
    let instance = write_temp(&dir, "instance.json", &serde_json::to_string(&result.instance).unwrap());
    let report: BoundReport = round_trip(&stdout(&tempus(&["clone-bound", "--instance", &instance])));
    assert!(report.uncertainty_pass);
    assert!((report.resource_fisher - 1.0).abs() < 1e-12);
}

#[test]
fn sync_reports_relative_information_and_order() {
    let text = stdout(&tempus(&["sync", "--sync", &data("bell_sync.json"), "--target", &data("half_correlated_sync.json")]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["validation"]["valid"], true);
    assert!((v["relative_fisher"].as_f64().unwrap() - 4.0).abs() < 1e-8);
    assert!((v["target_relative_fisher"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    assert_eq!(v["order"]["feasible"], true);
}

#[test]
fn signal_split_writes_csv() {
    let args = ["signal-split", "--energies", "10,20", "--de", "1", "--grid-n", "512"];
    let text = stdout(&tempus(&args));
    assert_eq!(text, stdout(&tempus(&args)));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "E,dE,input_F,f1_est,f2_est,correlation,purity1,norm_residual");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 10.0);
    assert!((rows[1][2] - 4.0).abs() < 1e-4);
    assert!(rows[1][6] < rows[0][6], "purity falls with energy");
}

#[test]
fn validate_reports_invalid_states_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_temp(&dir, "bad.json", r#"{"type": "quantum", "rho": [[[0.7, 0], [0, 0]], [[0, 0], [0.7, 0]]], "eigenvalues": [0, 1]}"#);
    let report: ValidationReport = round_trip(&stdout(&tempus(&["validate", "--clock", &bad])));
    assert!(!report.valid);
    assert!(!report.check("trace").map_or(true, |c| c.passed));

    let good: ValidationReport = round_trip(&stdout(&tempus(&["validate", "--sync", &data("bell_sync.json")])));
    assert!(good.valid);

    // Using the same state as a resource is a domain error.
    let out = tempus(&["fisher", "--clock", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "domain");
}

#[test]
fn parse_io_and_usage_errors_exit_two_with_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write_temp(&dir, "broken.json", "{\"type\": \"quantum\", \"rho\": [[");
    for (args, kind) in [
        (vec!["fisher", "--clock", malformed.as_str()], "parse"),
        (vec!["fisher", "--clock", "/nonexistent/clock.json"], "io"),
        (vec!["frobnicate"], "usage"),
        (vec!["fisher"], "usage"),
    ] {
        let out = tempus(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_line(&out)["error"], kind);
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn output_flag_and_logging_leave_stdout_clean() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out.json");
    let out = Command::new(env!("CARGO_BIN_EXE_tempus"))
        .args(["order", "--resource", &data("three_level.json"), "--target", &data("plus_qubit.json")])
        .args(["--output", target.to_str().unwrap()])
        .env("TEMPUS_LOG", "debug")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("DEBUG"));
    let written = std::fs::read_to_string(&target).unwrap();
    let verdict: OrderVerdict = round_trip(&written);
    assert!(!verdict.feasible);
}
