use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gns::dataset::load_dataset_csv;
use gns::sampling::{build_projector, FrequencySet};

const SMALL: &str = r#"
n_runs = 2
band_size = 8
[dataset.synthetic]
n_nodes = 30
steps = 30
[graph]
k = 5
[mask_spec]
count = 20
[tuning]
grid_points = 4
pilot_runs = 2
"#;

fn gns(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gns"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path
}

#[test]
fn run_twice_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = gns(&["run", "--runs", "1", "--seed", "7"], &cfg, out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["metrics.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,algorithm,spatial_mse,spectral_mae\n"));
    // 3 default algorithms x 30 steps + header
    assert_eq!(metrics.lines().count(), 91);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(a.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 7);
    assert_eq!(meta["config"]["n_runs"], 1);
}

#[test]
fn different_seed_changes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(gns(&["run", "--seed", "1"], &cfg, &a).status.success());
    assert!(gns(&["run", "--seed", "2"], &cfg, &b).status.success());
    assert_ne!(fs::read(a.join("metrics.csv")).unwrap(), fs::read(b.join("metrics.csv")).unwrap());
}

#[test]
fn band_larger_than_observed_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = gns(&["run", "--band-size", "25"], &cfg, &out);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("identifiable"), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_flag_and_bad_config_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = gns(&["run", "--bogus", "1"], &cfg, dir.path());
    assert!(!o.status.success());
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "n_runs = 0").unwrap();
    assert!(!gns(&["run"], &bad, &dir.path().join("x")).status.success());
    let typo = dir.path().join("typo.toml");
    fs::write(&typo, "n_runz = 3").unwrap();
    assert!(!gns(&["run"], &typo, &dir.path().join("y")).status.success());
}

#[test]
fn table1_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("t1");
    let o = gns(&["table1"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("table1.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "algorithm,alpha=1.05,alpha=1.1,alpha=1.15,alpha=1.2,alpha=1.25");
    assert_eq!(lines.len(), 4);
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["GLMS", "G-Sign", "GNS"]);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("alpha,algorithm,steady_mse,iters_to_steady\n"));
    assert_eq!(summary.lines().count(), 16);
    assert!(out.join("metrics_alpha_1.05.csv").exists());
}

#[test]
fn convergence_and_tune_emit_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("conv.toml");
    fs::write(
        &cfg,
        SMALL.replace("n_runs = 2", "n_runs = 2\niterations = 120\nmode = \"time_invariant\""),
    )
    .unwrap();
    let out = dir.path().join("conv");
    let o = gns(&["convergence"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let steady = fs::read_to_string(out.join("steady_state.csv")).unwrap();
    assert!(steady.starts_with("algorithm,window,rel_tol,iterations_to_steady,steady_value\n"));
    // default and alternative criterion for each of three algorithms
    assert_eq!(steady.lines().count(), 7);
    assert_eq!(fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 361);

    let out = dir.path().join("tune");
    let o = gns(&["tune", "--alpha", "1.2"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tuning = fs::read_to_string(out.join("tuning.csv")).unwrap();
    assert_eq!(tuning.lines().count(), 1 + 3 * 4);
    assert_eq!(tuning.lines().skip(1).filter(|l| l.ends_with(",true")).count(), 3);
}

#[test]
fn gen_data_round_trips_and_is_bandlimited() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("data");
    assert!(gns(&["gen-data"], &cfg, &out).status.success());
    let bundle = load_dataset_csv(&out.join("dataset.csv")).unwrap();
    assert_eq!((bundle.n_nodes(), bundle.steps()), (30, 30));

    // the regenerated dataset, fed back as a CSV source, gives the same setup
    let csv_cfg = dir.path().join("csv.toml");
    fs::write(&csv_cfg, SMALL.replace("[dataset.synthetic]\nn_nodes = 30\nsteps = 30", "[dataset]\npath = \"data/dataset.csv\"")).unwrap();
    let config = gns::config::Config::load(&csv_cfg).unwrap();
    let setup = config.setup().unwrap();
    let band = FrequencySet::new(setup.projector.band().indices().to_vec(), 30).unwrap();
    let proj = build_projector(&setup.spectrum, &band).unwrap();
    for t in 0..bundle.steps() {
        let x = bundle.snapshot(t);
        let resid = &x - proj.matrix() * &x;
        assert!(resid.amax() < 1e-9, "step {t}: {}", resid.amax());
    }
}
