use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn singlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn field(stdout: &[u8], key: &str) -> f64 {
    let s = String::from_utf8_lossy(stdout);
    let tok = s
        .split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {s}"));
    tok.parse().unwrap()
}

#[test]
fn nevanlinna_single_radius() {
    let d = tempfile::tempdir().unwrap();
    let o = singlab(&["nevanlinna", "--fn", "exp(z^2+z^-2)", "--r", "0.5"], d.path());
    assert_eq!(code(&o), 0);
    let t0 = field(&o.stdout, "T0");
    assert!((t0 - (0.25 + 4.0) / std::f64::consts::PI).abs() < 1e-6);
    let csv = fs::read_to_string(d.path().join("nevanlinna.csv")).unwrap();
    assert!(csv.starts_with("r,m0,N0,T0,logM0_ln,bound_ln,logderiv_max_ln,violation_flag\n"));
}

#[test]
fn order_and_type_of_exp_inverse_square() {
    let d = tempfile::tempdir().unwrap();
    let o = singlab(&["order", "--fn", "exp(z^-2)", "--kind", "M"], d.path());
    assert_eq!(code(&o), 0);
    assert!((field(&o.stdout, "sigma") - 2.0).abs() < 0.05);
    assert!((field(&o.stdout, "tau") - 1.0).abs() < 0.01);
}

#[test]
fn usage_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    let o = singlab(&["nevanlinna", "--fn", "exp("], d.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("offset 4"));
    let o = singlab(&["nevanlinna", "--fn", "z", "--bogus"], d.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));
    let o = singlab(&["nevanlinna", "--fn", "-exp(1/z)", "--r", "0.2"], d.path());
    assert_eq!(code(&o), 0, "leading minus is an expression, not a flag");
    let o = singlab(&["order", "--fn", "z", "--kind", "Q"], d.path());
    assert_eq!(code(&o), 1);
    let o = singlab(&["nevanlinna", "--fn", "z", "--ratio", "1.5"], d.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn numeric_failure_exits_two() {
    let d = tempfile::tempdir().unwrap();
    // V₀ grows past the truncation long before the schedule ends
    let o = singlab(&["central-index", "--fn", "exp(1/z)", "--trunc", "16"], d.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn contract_violation_exits_three() {
    let d = tempfile::tempdir().unwrap();
    let o = singlab(
        &[
            "logderiv-check",
            "--fn",
            "exp(1/z)",
            "--bound",
            "coro1",
            "--sigma",
            "0",
            "--max-measure",
            "0.1",
        ],
        d.path(),
    );
    assert_eq!(code(&o), 3);
    let o = singlab(&["reduce", "--solutions", "exp(1/z);exp(-1/z)", "--q", "1"], d.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn identical_runs_give_identical_reports() {
    // the output directory is part of the embedded config, so reuse it
    let d = tempfile::tempdir().unwrap();
    let args = ["logderiv-check", "--fn", "exp(1/z)/(z-0.3)", "--bound", "th1", "--count", "20"];
    let files = ["logderiv-check.json", "logderiv-check.csv"];
    assert_eq!(code(&singlab(&args, d.path())), 0);
    let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(d.path().join(f)).unwrap()).collect();
    assert_eq!(code(&singlab(&args, d.path())), 0);
    for (f, before) in files.iter().zip(&first) {
        assert!(fs::read(d.path().join(f)).unwrap() == *before, "{f} changed");
    }
}

#[test]
fn config_file_is_honoured_and_embedded() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, "seed = 7\n[schedule]\ncount = 15\nratio = 0.8\n").unwrap();
    let o = singlab(
        &["nevanlinna", "--fn", "exp(1/z)", "--config", cfg.to_str().unwrap()],
        d.path(),
    );
    assert_eq!(code(&o), 0);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("nevanlinna.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["seed"], 7);
    assert_eq!(json["config"]["schedule"]["count"], 15);
    assert_eq!(json["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(json["rows"].as_array().unwrap().len(), 15);

    fs::write(&cfg, "[schedule]\nbogus = 1\n").unwrap();
    let o = singlab(&["nevanlinna", "--fn", "z", "--config", cfg.to_str().unwrap()], d.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn report_rerenders_same_csv() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&singlab(&["wv-check", "--fn", "exp(1/z)", "--count", "20"], d.path())), 0);
    let out = d.path().join("again.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_singlab"))
        .args(["report", "--input"])
        .arg(d.path().join("wv-check.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let a = fs::read_to_string(d.path().join("wv-check.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(&out).unwrap());
}

#[test]
fn ode_growth_on_eqc_instance() {
    let d = tempfile::tempdir().unwrap();
    let o = singlab(
        &["ode-growth", "--eq", "2;exp(1/z);z", "--rays=-0.3927,0,0.3927", "--refine"],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!((field(&o.stdout, "sigma2") - 1.0).abs() < 0.2);
    let o = singlab(&["ode-growth", "--eq", "2;z"], d.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn indicator_profile_and_sandwich() {
    let d = tempfile::tempdir().unwrap();
    let o = singlab(&["indicator", "--a", "1", "--n", "2"], d.path());
    assert_eq!(code(&o), 0);
    let o = singlab(
        &["indicator", "--fn", "z", "--a", "1", "--phi", "0", "--eps", "0.1"],
        d.path(),
    );
    assert_eq!(code(&o), 0);
    let o = singlab(&["indicator", "--a", "1", "--phi", "0"], d.path());
    assert_eq!(code(&o), 1);
}
