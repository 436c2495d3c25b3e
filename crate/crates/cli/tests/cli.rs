use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 11

[trap]
num_ions = 4
axial_com_freq = 500e3
radial_com_freq = 3.0e6

[basis]
duration = 200e-6
num_tones = 48

[target]
ions = [1, 2]

[optimizer]
starts = 2

[scan]
offsets_hz = [-100.0, 0.0, 100.0]

[echo]
type = "c"
d = 4
"#;

fn iongate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iongate")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("job.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn run_in(dir: &Path, cfg: &str, out: &str, args: &[&str]) -> Output {
    let out = dir.join(out);
    let mut all = vec!["--config", cfg, "--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    iongate(&all)
}

#[test]
fn shift_prints_swaps() {
    let o = iongate(&["shift", "6", "2"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "d=6 m=2 swaps=6\n2 4 1 3 5 1\n");
    let o = iongate(&["shift", "5", "-1"]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("d=5 m=-1 swaps=4\n"));
}

#[test]
fn type_c_odd_dimension_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("d = 4", "d = 3"));
    let o = run_in(dir.path(), &cfg, "out", &["echo"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("even dimension") && err.contains("d = 3"), "{err}");
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("num_tones = 48", "num_tone = 48"));
    let o = run_in(dir.path(), &cfg, "out", &["modes"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 11"), "{err}");
}

#[test]
fn echo_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run_in(dir.path(), &cfg, "out", &["echo"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("echo.json")).unwrap()).unwrap();
    assert_eq!(report["distinct_phases"], 2);
    assert_eq!(report["ls_applications"], 8);
    assert_eq!(report["nonentangling_global"], true);
    let program = fs::read_to_string(out.join("sequence.txt")).unwrap();
    assert_eq!(program.lines().filter(|l| *l == "LS").count(), 8);
    let ledger = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert_eq!(ledger.lines().count(), 17);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "echo");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    let names: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
    for f in ["sequence.txt", "ledger.csv", "echo.json"] {
        assert!(names.contains(&f), "{names:?}");
    }
}

#[test]
fn shape_is_deterministic_and_scan_reads_pulse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for out in ["a", "b"] {
        let o = run_in(dir.path(), &cfg, out, &["shape"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/shape.json"), read("b/shape.json"));
    assert_eq!(read("a/pulse.csv"), read("b/pulse.csv"));
    let o = run_in(dir.path(), &cfg, "a", &["--threads", "1", "shape"]);
    assert!(o.status.success());
    assert_eq!(read("a/pulse.csv"), read("b/pulse.csv"));

    let report: serde_json::Value = serde_json::from_slice(&read("a/shape.json")).unwrap();
    assert_eq!(report["converged"], true);
    let chi = report["chi_12"].as_f64().unwrap();
    assert!((chi - std::f64::consts::PI / 8.0).abs() < 1e-8);

    let pulse = dir.path().join("a/pulse.csv");
    let o = run_in(dir.path(), &cfg, "s", &["scan", "--pulse", pulse.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scan = String::from_utf8(read("s/scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 4);
    let zero: Vec<f64> = scan.lines().nth(2).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(zero[0], 0.0);
    assert!(zero[1..4].iter().all(|x| x.abs() < 1e-8), "{zero:?}");
}

#[test]
fn missing_pulse_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run_in(dir.path(), &cfg, "s", &["scan", "--pulse", "/nonexistent/pulse.csv"]);
    assert_eq!(o.status.code(), Some(1));
}
