use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const ISO: &str = "[background]\np = [0.3333333333333333, 0.3333333333333333, 0.3333333333333333]\np_phi = 0.5773502691896257\n";
const ANISO: &str = "[background]\np = [0.5, 0.25, 0.25]\np_phi = 0.5590169943749475\n";
const VACUUM: &str = "[background]\np = [0.6666666666666666, 0.6666666666666666, -0.3333333333333333]\n";

fn run(dir: &Path, command: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{command}.toml"));
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_scatter"))
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap()
}

fn report(dir: &Path, command: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{command}.json"))).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_wave_data_gives_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("cutoff = 2\n{ISO}\n[wave_roundtrip]\namplitude = 0.0\ndecay = 2.0\ns = 0.0\nthreshold = 1e-6\n");
    let o = run(dir.path(), "wave-roundtrip", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path(), "wave-roundtrip");
    assert_eq!(r["results"]["relative_error"], 0.0);
    assert_eq!(r["pass"], true);
    assert_eq!(r["version"], "0.1.0");
    assert_eq!(r["config"]["cutoff"], 2);
}

#[test]
fn wave_round_trip_seed_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "wave-roundtrip", &format!("cutoff = 8\nseed = 1\n{ISO}"), &["--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path(), "wave-roundtrip");
    assert!(r["results"]["relative_error"].as_f64().unwrap() <= 1e-6);
    assert!(dir.path().join("wave-roundtrip.modes.csv").exists());
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("wave-roundtrip.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["threads"], 2);
}

#[test]
fn degenerate_background_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "wave-roundtrip", "[background]\np = [1.0, 0.0, 0.0]\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn bessel_validation_reference_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{ISO}\n[bessel_validate]\nmodes = [[1, 0, 0], [5, 3, 0], [32, 0, 0]]\nc_j = [1.0, 0.0]\nc_y = [0.0, 0.0]\nsamples = 64\nthreshold = 1e-8\n");
    let o = run(dir.path(), "bessel-validate", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path(), "bessel-validate");
    let rows = r["results"]["rows"].as_array().unwrap();
    assert!((rows[0]["phi_re"].as_f64().unwrap() - 0.511_827_7).abs() < 5e-8);
    assert!(r["results"]["max_rel_err"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn bessel_validation_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = format!("{ISO}\n[bessel_validate]\nmodes = []\nc_j = [1.0, 0.0]\nc_y = [0.0, 0.0]\nsamples = 8\nthreshold = 1e-8\n");
    let o = run(dir.path(), "bessel-validate", &empty, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(dir.path(), "bessel-validate")["results"]["modes"], 0);

    let mixed = format!("{ANISO}\n[bessel_validate]\nmodes = [[1, 1, 0]]\nc_j = [1.0, 0.0]\nc_y = [0.0, 0.0]\nsamples = 8\nthreshold = 1e-8\n");
    let o = run(dir.path(), "bessel-validate", &mixed, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("power-law"), "{}", stderr(&o));
}

#[test]
fn energy_sweep_single_mode_and_refusal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{ISO}\n[energy_sweep]\ndirections = [[1, 0, 0]]\nmagnitudes = [4]\nsamples = 16\ngrowth_limit = 2.0\n");
    let o = run(dir.path(), "energy-sweep", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(dir.path(), "energy-sweep")["results"]["rows"].as_array().unwrap().len(), 1);

    let o = run(dir.path(), "energy-sweep", &format!("sector = \"einstein\"\n{VACUUM}"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("subcritical"), "{}", stderr(&o));
}

#[test]
fn dyadic_energy_sweep_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{ISO}\n[energy_sweep]\ndirections = [[1, 0, 0], [1, 1, 1]]\nmagnitudes = [4, 8, 16, 32, 64, 128]\nsamples = 32\ngrowth_limit = 2.0\n");
    let o = run(dir.path(), "energy-sweep", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path(), "energy-sweep");
    assert_eq!(r["results"]["growth_pass"], true);
    let plot = std::fs::read_to_string(dir.path().join("energy-sweep.plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 7);
}

#[test]
fn einstein_round_trip_seed_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "einstein-roundtrip", &format!("sector = \"einstein\"\ncutoff = 4\nseed = 2\n{ANISO}"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path(), "einstein-roundtrip");
    assert!(r["results"]["relative_error"].as_f64().unwrap() <= 1e-5);
    assert!(r["results"]["asymptotic_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn zero_einstein_data_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let zero = "\n[einstein_roundtrip]\namplitude = 0.0\ndecay = 2.0\ns = 0.0\nthreshold = 1e-5\nasymptotic_threshold = 1e-6\n\
                \n[einstein_constraints]\namplitude = 0.0\ndecay = 2.0\nsamples = 4\nthreshold = 1e-7\n\
                \n[norms]\namplitude = 0.0\ndecay = 2.0\ns_values = [0.0, 1.0]\n";
    let cfg = format!("sector = \"einstein\"\ncutoff = 2\n{ANISO}{zero}");
    for cmd in ["einstein-roundtrip", "einstein-constraints", "norms"] {
        let o = run(dir.path(), cmd, &cfg, &[]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    assert_eq!(report(dir.path(), "einstein-roundtrip")["results"]["relative_error"], 0.0);
    assert_eq!(report(dir.path(), "einstein-constraints")["results"]["max_relative_residual"], 0.0);
    let rows = report(dir.path(), "norms")["results"]["rows"].clone();
    assert!(rows.as_array().unwrap().iter().all(|r| r["cauchy"] == 0.0 && r["asymptotic"] == 0.0));
}

#[test]
fn einstein_constraint_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "einstein-constraints", &format!("sector = \"einstein\"\ncutoff = 2\n{ANISO}"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(report(dir.path(), "einstein-constraints")["results"]["max_relative_residual"].as_f64().unwrap() <= 1e-7);
    let csv = std::fs::read_to_string(dir.path().join("einstein-constraints.residuals.csv")).unwrap();
    assert!(csv.starts_with("lambda,t,max_relative"));
}

#[test]
fn vacuum_scan_never_subcritical() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "subcritical-scan", &format!("seed = 11\n{ISO}\n[subcritical_scan]\nsamples = 10000\n"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path(), "subcritical-scan");
    assert!(r["results"]["vacuum_max_margin"].as_f64().unwrap() <= 0.0);
    assert!((r["results"]["background_margin"].as_f64().unwrap() - 2.0 / 3.0).abs() <= 1e-12);
}

#[test]
fn wave_norms_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "norms", &format!("cutoff = 3\n{ANISO}"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = report(dir.path(), "norms")["results"]["rows"].clone();
    assert_eq!(rows.as_array().unwrap().len(), 3);
    assert!(rows[0]["asymptotic"].as_f64().unwrap() > 0.0);
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = format!("sector = \"einstein\"\ncutoff = 2\nseed = 5\n{ANISO}");
    let oa = run(a.path(), "einstein-roundtrip", &cfg, &["--threads", "1"]);
    let ob = Command::new(env!("CARGO_BIN_EXE_scatter"))
        .args(["einstein-roundtrip", "--config"])
        .arg(a.path().join("einstein-roundtrip.toml"))
        .arg("--out")
        .arg(b.path())
        .env("SCATTER_THREADS", "3")
        .output()
        .unwrap();
    assert!(oa.status.success() && ob.status.success());
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    // Output paths differ, so compare everything but the resolved output directory.
    let strip = |bytes: Vec<u8>| -> Value {
        let mut v: Value = serde_json::from_slice(&bytes).unwrap();
        v["config"]["output_dir"] = Value::Null;
        v
    };
    assert_eq!(strip(read(a.path(), "einstein-roundtrip.json")), strip(read(b.path(), "einstein-roundtrip.json")));
    assert_eq!(read(a.path(), "einstein-roundtrip.modes.csv"), read(b.path(), "einstein-roundtrip.modes.csv"));
    let meta: Value = serde_json::from_slice(&read(b.path(), "einstein-roundtrip.meta.json")).unwrap();
    assert_eq!(meta["threads"], 3);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "norms", &format!("cutoff = 1\nseed = 1\n{ISO}"), &["--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(report(dir.path(), "norms")["config"]["seed"], 9);
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "norms", &format!("cutof = 1\n{ISO}"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cutof"), "{}", stderr(&o));

    let o = run(dir.path(), "norms", &format!("{ISO}\n[tolerances]\nrel_tol = -1.0\nabs_tol = 1e-14\ntail_tol = 1e-8\nc_safe = 10.0\nconstraint_tol = 1e-8\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rel_tol"));

    let o = run(dir.path(), "norms", "[background]\np = [0.5, 0.5, 0.5]\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Kasner relation"));
}

#[test]
fn generated_background() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "sector = \"einstein\"\ncutoff = 1\n[background]\ngenerator_seed = 4\ndim = 3\nmin_delta = 0.1\n";
    let o = run(dir.path(), "einstein-roundtrip", cfg, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(dir.path(), "einstein-roundtrip");
    assert_eq!(r["background"]["p"].as_array().unwrap().len(), 3);
}
