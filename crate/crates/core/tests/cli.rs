//! End-to-end runs of the `podgpr` binary on a tiny configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use podgpr::dataset::load_matrix;

const TINY: &str = r#"
preset = "cylinder"
scale = 0.125

[solver]
num_periods = 3
domain_half_width = 1.2

[solver.geometry]
layer_radii = [0.4]
layer_permittivities = [2.0]

[sampling]
counts = [3]
snapshots_per_period = 8

[gpr]
restarts = 1
max_iters = 60

[evaluation]
thetas = [[2.2]]
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let config = self.path("run.toml");
        Command::new(env!("CARGO_BIN_EXE_podgpr"))
            .arg("--config")
            .arg(&config)
            .args(args)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_three_components_deterministically() {
    let ws = Workspace::new(TINY);
    for name in ["a", "b"] {
        let out = ws.run(&["simulate", "--theta", "2.25", "--out", path_str(&ws.path(name))]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for c in ["ez", "hx", "hy"] {
        let rel = format!("theta_2.25/{c}.fmx");
        let m = load_matrix(ws.path("a").join(&rel)).unwrap();
        assert_eq!(m.ncols(), 8);
        assert_eq!(fs::read(ws.path("a").join(&rel)).unwrap(), fs::read(ws.path("b").join(&rel)).unwrap());
    }
    assert!(ws.path("a/theta_2.25/meta.toml").is_file());
}

#[test]
fn configuration_errors_exit_with_validation_code() {
    let ws = Workspace::new(&TINY.replace("num_periods = 3", "num_periods = 3\ncfl_factor = 2.0"));
    let out = ws.run(&["simulate", "--theta", "2"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("cfl_factor"), "{}", stderr(&out));

    let ws = Workspace::new(TINY);
    let out = ws.run(&["--preset", "sphere", "simulate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("sphere"));

    let out = ws.run(&["simulate", "--theta", "2,x"]);
    assert_eq!(code(&out), 1);

    let out = Command::new(env!("CARGO_BIN_EXE_podgpr"))
        .args(["--config", "/nonexistent/run.toml", "build"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);

    let out = Command::new(env!("CARGO_BIN_EXE_podgpr")).args(["frobnicate"]).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn reuse_snapshots_lists_missing_parameters() {
    let ws = Workspace::new(TINY);
    let work = ws.path("work");
    let out = ws.run(&["build", "--reuse-snapshots", "--out", path_str(&work)]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("3 of 3") && err.contains("[1.0]") && err.contains("[5.0]"), "{err}");

    // a partial set still names what is missing
    let out = ws.run(&["simulate", "--theta", "1", "--out", path_str(&work.join("snapshots"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = ws.run(&["build", "--reuse-snapshots", "--out", path_str(&work)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("2 of 3"), "{}", stderr(&out));
    assert!(!work.join("build.lock").exists());
}

#[test]
fn build_evaluate_benchmark_round_trip() {
    let ws = Workspace::new(TINY);
    let work = ws.path("work");
    let model = work.join("model");

    let out = ws.run(&["build", "--out", path_str(&work)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = stdout(&out);
    assert!(summary.contains("d_u") && summary.contains("ez") && summary.contains("hy"), "{summary}");
    assert!(model.join("manifest.toml").is_file());
    assert!(!work.join("build.lock").exists());
    let basis = fs::read(model.join("ez/basis.fmx")).unwrap();

    // reusing the snapshots the first build wrote reproduces the model
    let out = ws.run(&["build", "--reuse-snapshots", "--out", path_str(&work)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(model.join("ez/basis.fmx")).unwrap(), basis);

    let eval = ws.path("eval");
    let out = ws.run(&["evaluate", "--model", path_str(&model), "--t", "0.5", "--out", path_str(&eval)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("outside"), "{}", stderr(&out));

    let out = ws.run(&[
        "evaluate",
        "--model",
        path_str(&model),
        "--theta",
        "2.2",
        "--theta",
        "7",
        "--with-reference",
        "--out",
        path_str(&eval),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("(extrapolated)"));
    let csv = fs::read_to_string(eval.join("theta_2.2/errors_ez.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,theta_1,rom_error,projection_error"));
    assert_eq!(lines.count(), 8);
    assert_eq!(load_matrix(eval.join("theta_2.2/hy.fmx")).unwrap().ncols(), 8);
    let status = fs::read_to_string(eval.join("theta_7/status.toml")).unwrap();
    assert!(status.contains("extrapolated = true"), "{status}");

    let out = ws.run(&["benchmark", "--model", path_str(&model), "--trials", "0", "--out", path_str(&work)]);
    assert_eq!(code(&out), 1);
    let out = ws.run(&["benchmark", "--model", path_str(&model), "--trials", "1", "--out", path_str(&work)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(work.join("benchmark.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["full_order_average", "online_average", "gp_training"]);

    // a model built for another configuration is refused
    let other = Workspace::new(&TINY.replace("domain_half_width = 1.2", "domain_half_width = 1.3"));
    let out = other.run(&["evaluate", "--model", path_str(&model), "--theta", "2.2", "--out", path_str(&eval)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("stale"), "{}", stderr(&out));

    // a held lock blocks a concurrent build
    fs::write(work.join("build.lock"), "1").unwrap();
    let out = ws.run(&["build", "--reuse-snapshots", "--out", path_str(&work)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("locked"));
}
