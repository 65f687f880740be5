//! Batch commands behind the `podgpr` binary: simulate, build, evaluate, benchmark.
//!
//! Workspace layout:
//!
//! ```text
//! <workspace>/snapshots/theta_<values>/{ez,hx,hy}.fmx, meta.toml
//! <workspace>/model/...          persisted RomModel
//! <workspace>/evaluation/theta_<values>/{ez,hx,hy}.fmx, status.toml, errors_<c>.csv
//! <workspace>/benchmark.csv
//! <workspace>/build.lock         present only while a build runs
//! ```

mod config;

pub use config::{Evaluation, Paths, Preset, Resolved, RunConfig, Sampling};

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_matrix, save_matrix, SnapshotSet};
use crate::error::{Error, Result, ResultExt};
use crate::fom::{extract_snapshots, run_full_order, Component, FdtdSolver, FullOrderSolver};
use crate::rom::{build_from_snapshots, config_fingerprint, ErrorReport, RomModel};

pub const LOCK_FILE: &str = "build.lock";

/// Directory name for one parameter point, e.g. `theta_5.15_3.375`.
pub fn theta_tag(theta: &[f64]) -> String {
    let parts: Vec<String> = theta.iter().map(|v| v.to_string()).collect();
    format!("theta_{}", parts.join("_"))
}

/// Parse `"5.15,3.375"` into a parameter vector.
pub fn parse_theta(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("theta: cannot parse {s:?} as a number")))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotMeta {
    theta: Vec<f64>,
    times: Vec<f64>,
    dofs: usize,
    fingerprint: String,
}

/// Exclusive lock on a workspace; released on drop.
#[derive(Debug)]
pub struct WorkspaceLock {
    path: PathBuf,
}

impl WorkspaceLock {
    pub fn acquire(workspace: &Path) -> Result<Self> {
        fs::create_dir_all(workspace).map_err(|e| Error::io(workspace, e))?;
        let path = workspace.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Validation(format!(
                "workspace {} is locked by another build (remove {} if it is stale)",
                workspace.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_components(dir: &Path, fields: &[DMatrix<f64>; 3]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (c, m) in Component::ALL.into_iter().zip(fields) {
        save_matrix(dir.join(format!("{}.fmx", c.name())), m)?;
    }
    Ok(())
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Numerical(format!("serializing {}: {e}", path.display())))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Solve the full-order model at each `theta` and write snapshot files under `out`.
///
/// An empty `thetas` solves every training point of the sampling grid.
pub fn cmd_simulate(config: &RunConfig, thetas: &[Vec<f64>], out: &Path) -> Result<Vec<PathBuf>> {
    let resolved = config.resolve()?;
    let thetas = if thetas.is_empty() {
        resolved.grid.parameter_points.clone()
    } else {
        thetas.to_vec()
    };
    let solver = FdtdSolver::new(resolved.solver.clone())?;
    if let Some(t) = thetas.iter().find(|t| t.len() != solver.parameter_dim()) {
        return Err(Error::Validation(format!(
            "theta {t:?} has {} entries, the geometry needs {}",
            t.len(),
            solver.parameter_dim()
        )));
    }
    let fingerprint = config_fingerprint(&resolved.solver);
    let times = &resolved.grid.snapshot_times;
    thetas
        .par_iter()
        .map(|theta| {
            let series = solver.run(theta, times)?;
            let fields = extract_snapshots(&series, times)?;
            let dir = out.join(theta_tag(theta));
            write_components(&dir, &fields)?;
            write_toml(
                &dir.join("meta.toml"),
                &SnapshotMeta {
                    theta: theta.clone(),
                    times: times.clone(),
                    dofs: solver.dofs(),
                    fingerprint: fingerprint.clone(),
                },
            )?;
            info!("wrote snapshots for theta = {theta:?} to {}", dir.display());
            Ok(dir)
        })
        .collect::<Result<Vec<_>>>()
        .context("simulate")
}

/// Snapshot sets for `thetas` read from `dir`, or the list of missing points.
fn load_snapshots(dir: &Path, resolved: &Resolved) -> Result<[SnapshotSet; 3]> {
    let thetas = &resolved.grid.parameter_points;
    let missing: Vec<&Vec<f64>> = thetas
        .iter()
        .filter(|t| !dir.join(theta_tag(t)).join("meta.toml").is_file())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "--reuse-snapshots: {} of {} snapshot sets missing in {}: theta = {:?}",
            missing.len(),
            thetas.len(),
            dir.display(),
            missing
        )));
    }
    let fingerprint = config_fingerprint(&resolved.solver);
    let times = &resolved.grid.snapshot_times;
    let mut sets = Component::ALL.map(|component| SnapshotSet {
        component,
        matrices: Vec::with_capacity(thetas.len()),
        times: times.clone(),
        parameters: thetas.clone(),
    });
    for theta in thetas {
        let tdir = dir.join(theta_tag(theta));
        let meta_path = tdir.join("meta.toml");
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: SnapshotMeta = toml::from_str(&text).map_err(|e| Error::Format {
            path: meta_path.clone(),
            detail: e.to_string(),
        })?;
        if meta.fingerprint != fingerprint || &meta.times != times {
            return Err(Error::Validation(format!(
                "snapshots in {} were produced with a different solver configuration or time grid",
                tdir.display()
            )));
        }
        for (set, c) in sets.iter_mut().zip(Component::ALL) {
            set.matrices.push(load_matrix(tdir.join(format!("{}.fmx", c.name())))?);
        }
    }
    Ok(sets)
}

/// Dimensions and mode counts of a finished build.
#[derive(Debug, Clone)]
pub struct BuildSummary {
    pub model_dir: PathBuf,
    pub dims: [usize; 3],
    pub mode_counts: [Vec<usize>; 3],
    pub snapshot_seconds: f64,
    pub pod_seconds: f64,
    pub gpr_seconds: f64,
}

impl fmt::Display for BuildSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model: {}", self.model_dir.display())?;
        writeln!(f, "component  d_u  Q_(u,l) for l = 1..d_u")?;
        for (c, (d, q)) in Component::ALL.iter().zip(self.dims.iter().zip(&self.mode_counts)) {
            let q: Vec<String> = q.iter().map(usize::to_string).collect();
            writeln!(f, "{:<9}  {:>3}  {}", c.name(), d, q.join(" "))?;
        }
        write!(
            f,
            "time: snapshots {:.2} s, POD {:.2} s, GP training {:.2} s",
            self.snapshot_seconds, self.pod_seconds, self.gpr_seconds
        )
    }
}

/// Offline stage: snapshots (solved or reused), reduced bases and mode surrogates,
/// persisted to `<workspace>/model`.
pub fn cmd_build(config: &RunConfig, reuse_snapshots: bool, workspace: &Path) -> Result<BuildSummary> {
    let resolved = config.resolve()?;
    let _lock = WorkspaceLock::acquire(workspace)?;
    let snapshot_dir = workspace.join("snapshots");
    let start = Instant::now();
    if !reuse_snapshots {
        cmd_simulate(config, &[], &snapshot_dir)?;
    }
    let sets = load_snapshots(&snapshot_dir, &resolved)?;
    let snapshot_seconds = start.elapsed().as_secs_f64();

    let mut model = build_from_snapshots(&resolved.solver, &resolved.grid, &sets, None, &resolved.options)?;
    model.timings.snapshots = snapshot_seconds;
    let model_dir = workspace.join("model");
    model.save(&model_dir)?;
    fs::write(workspace.join("config.toml"), config.to_toml()?).map_err(|e| Error::io(workspace, e))?;

    let summary = BuildSummary {
        model_dir,
        dims: model.dims(),
        mode_counts: Component::ALL.map(|c| model.component(c).mode_counts()),
        snapshot_seconds,
        pod_seconds: model.timings.pod,
        gpr_seconds: model.timings.gpr,
    };
    for line in summary.to_string().lines() {
        info!("{line}");
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub theta: Vec<f64>,
    pub extrapolated: bool,
    pub directory: PathBuf,
    /// Time-averaged `(rom_error, projection_error)` for ez, hx, hy when a
    /// reference was computed and the component is nonzero.
    pub errors: Option<[Option<(f64, f64)>; 3]>,
}

/// Online stage at `thetas` and `times` (default: the model's snapshot times).
pub fn cmd_evaluate(
    model: &RomModel,
    times: Option<&[f64]>,
    thetas: &[Vec<f64>],
    with_reference: bool,
    out: &Path,
) -> Result<Vec<EvaluationRecord>> {
    if thetas.is_empty() {
        return Err(Error::Validation("evaluate: no parameter points given".into()));
    }
    let times = times.unwrap_or(&model.grid.snapshot_times);
    let mut records = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let result = model
            .online_trajectory(times, theta)
            .context_with(|| format!("evaluate theta = {theta:?}"))?;
        if result.extrapolated {
            warn!("theta = {theta:?} or a requested time lies outside the training range; values are extrapolated");
        }
        let dir = out.join(theta_tag(theta));
        write_components(&dir, &result.fields)?;

        let errors = if with_reference {
            let reference = run_full_order(&model.config, theta, times)
                .context_with(|| format!("reference solve at theta = {theta:?}"))?;
            let report: ErrorReport = model.error_report(theta, &reference)?;
            report.write_csv(&dir)?;
            Some(Component::ALL.map(|c| report.time_averaged(c, theta)))
        } else {
            None
        };
        let record = EvaluationRecord {
            theta: theta.clone(),
            extrapolated: result.extrapolated,
            directory: dir.clone(),
            errors,
        };
        write_toml(&dir.join("status.toml"), &record)?;
        records.push(record);
    }
    Ok(records)
}

/// Average wall-clock times, in the same three rows as a solver-time comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkReport {
    pub trials: usize,
    pub full_order_seconds: f64,
    pub online_seconds: f64,
    pub gp_training_seconds: f64,
}

impl BenchmarkReport {
    pub fn speedup(&self) -> f64 {
        self.full_order_seconds / self.online_seconds
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let rows = [
            ("quantity", "seconds".to_string()),
            ("full_order_average", format!("{:e}", self.full_order_seconds)),
            ("online_average", format!("{:e}", self.online_seconds)),
            ("gp_training", format!("{:e}", self.gp_training_seconds)),
        ];
        for (name, value) in rows {
            w.write_record([name, value.as_str()]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Time `trials` full-order solves and online trajectories over the last period at `theta`
/// (default: centre of the parameter box) and write `benchmark.csv` into `out`.
pub fn cmd_benchmark(model: &RomModel, trials: usize, theta: Option<&[f64]>, out: &Path) -> Result<BenchmarkReport> {
    if trials == 0 {
        return Err(Error::Validation("benchmark: trials must be >= 1".into()));
    }
    let centre: Vec<f64> = model.grid.parameter_box().iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect();
    let theta = theta.unwrap_or(&centre);
    let times = &model.grid.snapshot_times;
    let solver = FdtdSolver::new(model.config.clone())?;
    model.check_query(times, theta)?;

    let (mut full, mut online) = (0.0, 0.0);
    for _ in 0..trials {
        let start = Instant::now();
        solver.run(theta, times)?;
        full += start.elapsed().as_secs_f64();
        let start = Instant::now();
        model.online_trajectory(times, theta)?;
        online += start.elapsed().as_secs_f64();
    }
    let report = BenchmarkReport {
        trials,
        full_order_seconds: full / trials as f64,
        online_seconds: online / trials as f64,
        gp_training_seconds: model.timings.gpr,
    };
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("benchmark.csv");
    fs::write(&path, report.to_csv()).map_err(|e| Error::io(&path, e))?;
    info!("speedup {:.1}x over {trials} trial(s)", report.speedup());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_parsing_and_tags() {
        assert_eq!(parse_theta("5.15, 3.375").unwrap(), vec![5.15, 3.375]);
        assert!(parse_theta("1,x").is_err());
        assert_eq!(theta_tag(&[2.25]), "theta_2.25");
        assert_eq!(theta_tag(&[5.0, 1.375]), "theta_5_1.375");
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = WorkspaceLock::acquire(dir.path()).unwrap();
        let err = WorkspaceLock::acquire(dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        drop(lock);
        WorkspaceLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn benchmark_csv_rows() {
        let r = BenchmarkReport {
            trials: 2,
            full_order_seconds: 2.0,
            online_seconds: 0.1,
            gp_training_seconds: 5.0,
        };
        assert_eq!(r.speedup(), 20.0);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.contains("online_average,1e-1"));
    }
}
