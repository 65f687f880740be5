//! Offline build and online evaluation on a small physical problem.

use std::fs;
use std::path::Path;

use podgpr::dataset::{assemble_snapshots, SamplingGrid, SnapshotSet};
use podgpr::fom::{run_full_order, Component, FdtdSolver, GeometrySpec, SolverConfig};
use podgpr::gpr::GprOptions;
use podgpr::modes::ToleranceSchedule;
use podgpr::rom::{build_from_snapshots, check_budget, BuildOptions, PodTolerances, RomModel};
use rayon::prelude::*;

const N_L: usize = 8;

fn small_config() -> SolverConfig {
    let mut config = SolverConfig {
        domain_half_width: 1.2,
        grid_points_per_wavelength: 12,
        cfl_factor: 0.9,
        frequency: 1.0,
        num_periods: 4,
        geometry: GeometrySpec::cylinder(0.4, 2.0),
        mu_r: 1.0,
        steps_per_period: None,
    };
    config.steps_per_period = Some(FdtdSolver::steps_per_period_for(&config, N_L));
    config
}

fn options(epsilon_theta: f64) -> BuildOptions {
    BuildOptions::uniform(
        PodTolerances {
            epsilon_t: 1e-4,
            epsilon_theta,
        },
        ToleranceSchedule::uniform(1e-4),
        GprOptions {
            restarts: 2,
            max_iters: 100,
            seed: 11,
        },
    )
}

fn setup() -> (SolverConfig, SamplingGrid, [SnapshotSet; 3]) {
    let config = small_config();
    let params: Vec<Vec<f64>> = [1.5, 2.0, 2.5, 3.0, 3.5].iter().map(|e| vec![*e]).collect();
    let grid = SamplingGrid::shared(params, config.last_period_times(N_L));
    let solver = FdtdSolver::new(config.clone()).unwrap();
    let sets = assemble_snapshots(&solver, &grid.parameter_points, &grid.snapshot_times).unwrap();
    (config, grid, sets)
}

#[test]
fn budget_holds_and_projection_is_optimal_on_training_data() {
    let (config, grid, sets) = setup();
    let model = build_from_snapshots(&config, &grid, &sets, None, &options(1e-4)).unwrap();
    for check in check_budget(&model, &sets).unwrap() {
        assert!(check.holds(1e-9), "{check:?}");
    }
    for (j, theta) in grid.parameter_points.iter().enumerate() {
        let reference = run_full_order(&config, theta, &grid.snapshot_times).unwrap();
        assert_eq!(reference[3].ez.as_slice(), sets[0].snapshot(j, 3).as_slice());
        let report = model.error_report(theta, &reference).unwrap();
        for c in Component::ALL {
            for row in report.component(c) {
                assert!(row.projection_error <= row.rom_error + 1e-12, "{c} {row:?}");
            }
        }
    }
}

#[test]
fn budget_is_monotone_in_parameter_tolerance() {
    let (config, grid, sets) = setup();
    let mut previous = [0.0; 3];
    for eps in [1e-6, 1e-4, 1e-2] {
        let model = build_from_snapshots(&config, &grid, &sets, None, &options(eps)).unwrap();
        let checks = check_budget(&model, &sets).unwrap();
        for (c, check) in checks.iter().enumerate() {
            assert!(check.holds(1e-9), "{check:?}");
            assert!(
                check.projection_bound >= previous[c] * (1.0 - 1e-12),
                "epsilon_theta = {eps}: {} after {}",
                check.projection_bound,
                previous[c]
            );
            previous[c] = check.projection_bound;
        }
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            out.push((
                path.strip_prefix(root).unwrap().display().to_string(),
                fs::read(&path).unwrap(),
            ));
        }
    }
}

#[test]
fn rebuild_is_bitwise_identical() {
    let (config, grid, sets) = setup();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        build_from_snapshots(&config, &grid, &sets, None, &options(1e-4))
            .unwrap()
            .save(dir.path())
            .unwrap();
    }
    let files = dirs.each_ref().map(|d| {
        let mut files = Vec::new();
        for c in Component::ALL {
            collect_files(d.path(), &d.path().join(c.name()), &mut files);
        }
        files
    });
    assert!(files[0].len() > 10);
    assert_eq!(files[0], files[1]);

    let model = RomModel::load(dirs[0].path()).unwrap();
    let t = grid.snapshot_times[2];
    let a = model.online_evaluate(t, &[2.2]).unwrap();
    let b = model.online_evaluate(t, &[2.2]).unwrap();
    assert_eq!(a.fields, b.fields);
}

#[test]
fn concurrent_queries_match_serial_ones() {
    let (config, grid, sets) = setup();
    let model = build_from_snapshots(&config, &grid, &sets, None, &options(1e-4)).unwrap();
    let thetas = [1.7, 2.2, 2.9, 3.4, 4.5];
    let serial: Vec<_> = thetas
        .iter()
        .map(|e| model.online_trajectory(&grid.snapshot_times, &[*e]).unwrap())
        .collect();
    let parallel: Vec<_> = thetas
        .par_iter()
        .map(|e| model.online_trajectory(&grid.snapshot_times, &[*e]).unwrap())
        .collect();
    for (s, p) in serial.iter().zip(&parallel) {
        assert_eq!(s.fields, p.fields);
    }
    assert!(!serial[1].extrapolated);
    assert!(serial[4].extrapolated);
}

#[test]
fn degenerate_grid_builds_a_valid_model() {
    let config = small_config();
    let times = config.last_period_times(N_L)[..4].to_vec();
    let grid = SamplingGrid::shared(vec![vec![2.0]], times);
    let solver = FdtdSolver::new(config.clone()).unwrap();
    let sets = assemble_snapshots(&solver, &grid.parameter_points, &grid.snapshot_times).unwrap();
    let model = build_from_snapshots(&config, &grid, &sets, None, &options(1e-4)).unwrap();
    assert!(model.dims().iter().all(|d| *d >= 1 && *d <= 4), "{:?}", model.dims());
    for check in check_budget(&model, &sets).unwrap() {
        assert!(check.holds(1e-9), "{check:?}");
    }
}
