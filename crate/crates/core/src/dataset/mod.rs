//! Sampling grids, snapshot assembly and matrix persistence.

pub mod fmx;

pub use fmx::{load_matrix, save_matrix};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::fom::{extract_snapshots, Component, FullOrderSolver};

/// Time and parameter samples for basis extraction and regression training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub parameter_points: Vec<Vec<f64>>,
    pub snapshot_times: Vec<f64>,
    pub training_times: Vec<f64>,
    pub training_parameters: Vec<Vec<f64>>,
}

impl SamplingGrid {
    /// Grid whose training set equals its snapshot set.
    pub fn shared(parameter_points: Vec<Vec<f64>>, times: Vec<f64>) -> Self {
        Self {
            training_parameters: parameter_points.clone(),
            training_times: times.clone(),
            parameter_points,
            snapshot_times: times,
        }
    }

    pub fn training_equals_snapshots(&self) -> bool {
        self.parameter_points == self.training_parameters
            && self.snapshot_times == self.training_times
    }

    pub fn parameter_dim(&self) -> usize {
        self.parameter_points.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        check_points("parameter_points", &self.parameter_points)?;
        check_points("training_parameters", &self.training_parameters)?;
        if self.training_parameters.first().map(Vec::len) != Some(self.parameter_dim()) {
            return Err(Error::Validation(
                "training parameters and snapshot parameters differ in dimension".into(),
            ));
        }
        check_times("snapshot_times", &self.snapshot_times)?;
        check_times("training_times", &self.training_times)?;
        Ok(())
    }

    /// Per-dimension `[min, max]` of the training parameters.
    pub fn parameter_box(&self) -> Vec<[f64; 2]> {
        (0..self.parameter_dim())
            .map(|m| {
                self.training_parameters.iter().fold(
                    [f64::INFINITY, f64::NEG_INFINITY],
                    |[lo, hi], p| [lo.min(p[m]), hi.max(p[m])],
                )
            })
            .collect()
    }
}

fn check_points(name: &str, points: &[Vec<f64>]) -> Result<()> {
    let Some(first) = points.first() else {
        return Err(Error::Validation(format!("{name} is empty")));
    };
    if first.is_empty() || points.iter().any(|p| p.len() != first.len()) {
        return Err(Error::Validation(format!(
            "{name}: parameter vectors must share one nonzero length"
        )));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("{name}: non-finite parameter")));
    }
    for (a, pa) in points.iter().enumerate() {
        if let Some(b) = points[a + 1..].iter().position(|pb| pb == pa) {
            return Err(Error::Validation(format!(
                "{name}: duplicate parameter point {pa:?} at positions {a} and {}",
                a + 1 + b
            )));
        }
    }
    Ok(())
}

fn check_times(name: &str, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Validation(format!("{name} is empty")));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(format!(
            "{name} must be finite and strictly increasing"
        )));
    }
    Ok(())
}

/// Cartesian product of per-dimension uniform grids, first dimension slowest.
///
/// A dimension with count 1 contributes only its lower bound.
pub fn build_parameter_grid(ranges: &[[f64; 2]], counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    if ranges.len() != counts.len() || ranges.is_empty() {
        return Err(Error::Validation(format!(
            "{} ranges but {} counts",
            ranges.len(),
            counts.len()
        )));
    }
    let mut axes = Vec::with_capacity(ranges.len());
    for (m, (&[lo, hi], &count)) in ranges.iter().zip(counts).enumerate() {
        if count == 0 {
            return Err(Error::Validation(format!("count for dimension {m} is 0")));
        }
        if count > 1 && !(lo < hi) {
            return Err(Error::Validation(format!(
                "range for dimension {m} needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        let axis: Vec<f64> = if count == 1 {
            vec![lo]
        } else {
            (0..count)
                .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                .collect()
        };
        axes.push(axis);
    }

    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    Ok(points)
}

/// Snapshot matrices of one field component, one `N_h x N_l` block per parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub component: Component,
    pub matrices: Vec<DMatrix<f64>>,
    pub times: Vec<f64>,
    pub parameters: Vec<Vec<f64>>,
}

impl SnapshotSet {
    pub fn dofs(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = (self.dofs(), self.times.len());
        if self.matrices.len() != self.parameters.len() {
            return Err(Error::Validation(format!(
                "{} snapshot blocks for {} parameter points",
                self.matrices.len(),
                self.parameters.len()
            )));
        }
        if let Some(j) = self
            .matrices
            .iter()
            .position(|m| m.shape() != (rows, cols))
        {
            return Err(Error::Validation(format!(
                "snapshot block {j} has shape {:?}, expected ({rows}, {cols})",
                self.matrices[j].shape()
            )));
        }
        Ok(())
    }

    /// Column `i` of block `j`, i.e. the field at `(times[i], parameters[j])`.
    pub fn snapshot(&self, j: usize, i: usize) -> nalgebra::DVectorView<'_, f64> {
        self.matrices[j].column(i)
    }
}

/// Run the full-order solver once per parameter point (in parallel) and
/// gather per-component snapshot sets in grid order.
pub fn assemble_snapshots<S: FullOrderSolver>(
    solver: &S,
    parameters: &[Vec<f64>],
    times: &[f64],
) -> Result<[SnapshotSet; 3]> {
    check_points("parameter_points", parameters)?;
    check_times("snapshot_times", times)?;

    let blocks: Vec<[DMatrix<f64>; 3]> = parameters
        .par_iter()
        .map(|theta| {
            solver
                .run(theta, times)
                .and_then(|series| extract_snapshots(&series, times))
                .context_with(|| format!("full-order solve at theta = {theta:?}"))
        })
        .collect::<Result<_>>()?;

    let mut sets = Component::ALL.map(|component| SnapshotSet {
        component,
        matrices: Vec::with_capacity(blocks.len()),
        times: times.to_vec(),
        parameters: parameters.to_vec(),
    });
    for [ez, hx, hy] in blocks {
        sets[0].matrices.push(ez);
        sets[1].matrices.push(hx);
        sets[2].matrices.push(hy);
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{FdtdSolver, GeometrySpec, SolverConfig};

    #[test]
    fn single_dimension_grid() {
        let grid = build_parameter_grid(&[[1.0, 5.0]], &[81]).unwrap();
        assert_eq!(grid.len(), 81);
        assert_eq!(grid[0], vec![1.0]);
        assert!((grid[1][0] - 1.05).abs() < 1e-14);
        assert_eq!(grid[80], vec![5.0]);
    }

    #[test]
    fn degenerate_grid_starts_at_lo() {
        assert_eq!(
            build_parameter_grid(&[[2.0, 3.0]], &[1]).unwrap(),
            vec![vec![2.0]]
        );
    }

    #[test]
    fn layered_grid_is_lexicographic() {
        let ranges = [[5.0, 5.6], [3.25, 3.75], [2.0, 2.5], [1.25, 1.75]];
        let grid = build_parameter_grid(&ranges, &[3, 3, 3, 3]).unwrap();
        assert_eq!(grid.len(), 81);
        assert_eq!(grid[0], vec![5.0, 3.25, 2.0, 1.25]);
        assert_eq!(grid[1], vec![5.0, 3.25, 2.0, 1.5]);
        assert_eq!(grid[3], vec![5.0, 3.25, 2.25, 1.25]);
        assert_eq!(grid[80], vec![5.6, 3.75, 2.5, 1.75]);
    }

    #[test]
    fn grid_count_is_product() {
        for counts in [[1usize, 1], [2, 3], [4, 1], [5, 5]] {
            let g = build_parameter_grid(&[[0.0, 1.0], [2.0, 3.0]], &counts).unwrap();
            assert_eq!(g.len(), counts.iter().product::<usize>());
        }
        assert!(build_parameter_grid(&[[1.0, 1.0]], &[3]).is_err());
        assert!(build_parameter_grid(&[[0.0, 1.0]], &[0]).is_err());
    }

    #[test]
    fn grid_validation_catches_duplicates() {
        let grid = SamplingGrid::shared(vec![vec![1.0], vec![2.0], vec![1.0]], vec![0.0, 1.0]);
        let err = grid.validate().unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        let grid = SamplingGrid::shared(vec![vec![1.0]], vec![1.0, 0.5]);
        assert!(grid.validate().is_err());
    }

    fn tiny_config() -> SolverConfig {
        let mut cfg = SolverConfig {
            domain_half_width: 1.2,
            grid_points_per_wavelength: 10,
            cfl_factor: 0.9,
            frequency: 1.0,
            num_periods: 2,
            geometry: GeometrySpec::cylinder(0.5, 2.0),
            mu_r: 1.0,
            steps_per_period: None,
        };
        cfg.steps_per_period = Some(FdtdSolver::steps_per_period_for(&cfg, 2));
        cfg
    }

    #[test]
    fn assembly_shapes_and_order() {
        let cfg = tiny_config();
        let solver = FdtdSolver::new(cfg.clone()).unwrap();
        let times = cfg.last_period_times(2);
        let sets = assemble_snapshots(&solver, &[vec![2.0]], &times).unwrap();
        for set in &sets {
            set.validate().unwrap();
            assert_eq!(set.matrices.len(), 1);
            assert_eq!(set.matrices[0].shape(), (solver.dofs(), 2));
        }

        let params = vec![vec![3.0], vec![1.5]];
        let sets = assemble_snapshots(&solver, &params, &times).unwrap();
        let direct = solver.run(&[1.5], &times).unwrap();
        assert_eq!(sets[0].snapshot(1, 1).as_slice(), direct[1].ez.as_slice());
        // determinism
        assert_eq!(sets, assemble_snapshots(&solver, &params, &times).unwrap());
    }

    #[test]
    fn assembly_rejects_duplicates_and_annotates_errors() {
        let cfg = tiny_config();
        let solver = FdtdSolver::new(cfg.clone()).unwrap();
        let times = cfg.last_period_times(2);
        assert!(assemble_snapshots(&solver, &[vec![2.0], vec![2.0]], &times).is_err());
        let err = assemble_snapshots(&solver, &[vec![2.0, 1.0]], &times).unwrap_err();
        assert!(err.to_string().contains("theta = [2.0, 1.0]"));
    }
}
