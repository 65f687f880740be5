//! Full-order solvers.
//!
//! The reduced-order pipeline only ever talks to [`FullOrderSolver`]; the
//! shipped [`FdtdSolver`] is a 2D transverse-magnetic leapfrog scheme on a
//! uniform staggered grid, but any solver producing co-located snapshots of
//! `(Ez, Hx, Hy)` can be plugged in.

mod fdtd;

pub use fdtd::{incident_mismatch, FdtdSolver, Grid};

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field component of the TM system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Ez,
    Hx,
    Hy,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Ez, Component::Hx, Component::Hy];

    pub fn name(self) -> &'static str {
        match self {
            Component::Ez => "ez",
            Component::Hx => "hx",
            Component::Hy => "hy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Concentric dielectric layers centred at the origin, embedded in a
/// homogeneous background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    /// Outer radius of each layer, strictly ascending (m).
    pub layer_radii: Vec<f64>,
    /// Default relative permittivity per layer; overridden by the parameter vector.
    pub layer_permittivities: Vec<f64>,
    #[serde(default = "one")]
    pub background_permittivity: f64,
}

fn one() -> f64 {
    1.0
}

impl GeometrySpec {
    /// Homogeneous cylinder of the given radius.
    pub fn cylinder(radius: f64, permittivity: f64) -> Self {
        Self {
            layer_radii: vec![radius],
            layer_permittivities: vec![permittivity],
            background_permittivity: 1.0,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layer_radii.len()
    }

    pub fn outer_radius(&self) -> f64 {
        self.layer_radii.last().copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_radii.len() != self.layer_permittivities.len() {
            return Err(Error::Config(format!(
                "geometry: {} layer radii but {} permittivities",
                self.layer_radii.len(),
                self.layer_permittivities.len()
            )));
        }
        if self.layer_radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("geometry.layer_radii must be positive".into()));
        }
        if self.layer_radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "geometry.layer_radii must be strictly ascending".into(),
            ));
        }
        if self
            .layer_permittivities
            .iter()
            .chain(std::iter::once(&self.background_permittivity))
            .any(|e| !(e.is_finite() && *e >= 1.0))
        {
            return Err(Error::Config("geometry: permittivities must be >= 1".into()));
        }
        Ok(())
    }

    /// Relative permittivity at `(x, y)` given per-layer values `theta`.
    pub fn permittivity_at(&self, x: f64, y: f64, theta: &[f64]) -> f64 {
        let r = (x * x + y * y).sqrt();
        self.layer_radii
            .iter()
            .zip(theta)
            .find(|(radius, _)| r <= **radius)
            .map(|(_, eps)| *eps)
            .unwrap_or(self.background_permittivity)
    }
}

/// Full-order solver settings in normalized units (c = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// The domain is the square `[-w, w]^2`.
    pub domain_half_width: f64,
    pub grid_points_per_wavelength: usize,
    /// Fraction of the 2D Courant limit used for the time step.
    pub cfl_factor: f64,
    /// Periods per time unit.
    #[serde(default = "one")]
    pub frequency: f64,
    pub num_periods: usize,
    pub geometry: GeometrySpec,
    #[serde(default = "one")]
    pub mu_r: f64,
    /// Time steps per incident period. When absent the smallest stable count is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_period: Option<usize>,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return Err(Error::Config(format!(
                "solver.cfl_factor = {} outside (0, 1]",
                self.cfl_factor
            )));
        }
        if self.grid_points_per_wavelength < 10 {
            return Err(Error::Config(format!(
                "solver.grid_points_per_wavelength = {} (need >= 10)",
                self.grid_points_per_wavelength
            )));
        }
        if self.num_periods < 1 {
            return Err(Error::Config("solver.num_periods must be >= 1".into()));
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::Config("solver.frequency must be positive".into()));
        }
        if self.mu_r != 1.0 {
            return Err(Error::Config("solver.mu_r must be 1 (non-magnetic media)".into()));
        }
        self.geometry.validate()?;
        if !(self.domain_half_width > self.geometry.outer_radius()) {
            return Err(Error::Config(format!(
                "solver.domain_half_width = {} does not enclose the outer layer radius {}",
                self.domain_half_width,
                self.geometry.outer_radius()
            )));
        }
        if self.steps_per_period == Some(0) {
            return Err(Error::Config("solver.steps_per_period must be >= 1".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn wavelength(&self) -> f64 {
        // c = 1
        1.0 / self.frequency
    }

    /// Final simulation time `T_f`.
    pub fn final_time(&self) -> f64 {
        self.num_periods as f64 * self.period()
    }

    /// `n` equidistant times spanning the final period, endpoint-exclusive.
    pub fn last_period_times(&self, n: usize) -> Vec<f64> {
        let start = (self.num_periods - 1) as f64 * self.period();
        (0..n)
            .map(|i| start + i as f64 * self.period() / n as f64)
            .collect()
    }

    pub fn incident(&self) -> IncidentWave {
        IncidentWave::new(self.frequency)
    }
}

/// Plane wave travelling in `+x`: `Ez = cos(wt - kx)`, `Hy = -Ez`, `Hx = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    pub omega: f64,
    pub k: f64,
}

impl IncidentWave {
    pub fn new(frequency: f64) -> Self {
        let omega = 2.0 * PI * frequency;
        Self { omega, k: omega }
    }

    pub fn ez(&self, x: f64, t: f64) -> f64 {
        (self.omega * t - self.k * x).cos()
    }

    /// Returns `(hx, hy, ez)`.
    pub fn field(&self, x: f64, _y: f64, t: f64) -> (f64, f64, f64) {
        let ez = self.ez(x, t);
        (0.0, -ez, ez)
    }
}

/// `(hx, hy, ez)` of the unit incident plane wave at frequency `f` (c = 1).
pub fn incident_field(x: f64, y: f64, t: f64, frequency: f64) -> (f64, f64, f64) {
    IncidentWave::new(frequency).field(x, y, t)
}

/// One co-located solution of all three components at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub ez: Vec<f64>,
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
    pub time: f64,
}

impl FieldState {
    pub fn zeros(dofs: usize, time: f64) -> Self {
        Self {
            ez: vec![0.0; dofs],
            hx: vec![0.0; dofs],
            hy: vec![0.0; dofs],
            time,
        }
    }

    pub fn component(&self, c: Component) -> &[f64] {
        match c {
            Component::Ez => &self.ez,
            Component::Hx => &self.hx,
            Component::Hy => &self.hy,
        }
    }

    pub fn component_mut(&mut self, c: Component) -> &mut Vec<f64> {
        match c {
            Component::Ez => &mut self.ez,
            Component::Hx => &mut self.hx,
            Component::Hy => &mut self.hy,
        }
    }

    pub fn dofs(&self) -> usize {
        self.ez.len()
    }

    pub fn is_finite(&self) -> bool {
        Component::ALL
            .iter()
            .all(|&c| self.component(c).iter().all(|v| v.is_finite()))
    }
}

/// Anything that can produce snapshots for a parameter vector.
///
/// Implementations must be deterministic and free of shared mutable state so
/// that independent parameter points can be solved concurrently.
pub trait FullOrderSolver: Sync {
    /// Degrees of freedom per field component.
    fn dofs(&self) -> usize;

    /// Length of the parameter vector.
    fn parameter_dim(&self) -> usize;

    /// Simulated window `[0, T_f]`.
    fn final_time(&self) -> f64;

    /// Solve for `theta`, returning states at exactly `times` (in that order).
    fn run(&self, theta: &[f64], times: &[f64]) -> Result<Vec<FieldState>>;
}

/// Convenience wrapper building an [`FdtdSolver`] from `config`.
pub fn run_full_order(config: &SolverConfig, theta: &[f64], times: &[f64]) -> Result<Vec<FieldState>> {
    FdtdSolver::new(config.clone())?.run(theta, times)
}

/// Per-component snapshot matrices (`N_h x N_l`) from a solved time series.
///
/// Column `j` is the state at `times[j]`. Times must coincide with states in
/// `series`; no interpolation is performed.
pub fn extract_snapshots(series: &[FieldState], times: &[f64]) -> Result<[DMatrix<f64>; 3]> {
    let (first, last) = match (series.first(), series.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Validation("empty time series".into())),
    };
    let lo = series.iter().map(|s| s.time).fold(first.time, f64::min);
    let hi = series.iter().map(|s| s.time).fold(last.time, f64::max);
    let dofs = first.dofs();
    let tol = 1e-9 * hi.abs().max(1.0);

    let mut columns = Vec::with_capacity(times.len());
    for &t in times {
        if t < lo - tol || t > hi + tol {
            return Err(Error::Validation(format!(
                "time {t} outside the simulated window [{lo}, {hi}]"
            )));
        }
        let state = series
            .iter()
            .find(|s| (s.time - t).abs() <= tol)
            .ok_or_else(|| Error::Validation(format!("time {t} is not on the sample grid")))?;
        columns.push(state);
    }

    let build = |c: Component| {
        DMatrix::from_fn(dofs, columns.len(), |i, j| columns[j].component(c)[i])
    };
    Ok([build(Component::Ez), build(Component::Hx), build(Component::Hy)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_config(eps: f64) -> SolverConfig {
        let mut cfg = SolverConfig {
            domain_half_width: 1.5,
            grid_points_per_wavelength: 12,
            cfl_factor: 0.9,
            frequency: 1.0,
            num_periods: 3,
            geometry: GeometrySpec::cylinder(0.6, eps),
            mu_r: 1.0,
            steps_per_period: None,
        };
        cfg.steps_per_period = Some(FdtdSolver::steps_per_period_for(&cfg, 4));
        cfg
    }

    #[test]
    fn incident_at_phase_zero() {
        assert_eq!(incident_field(0.0, 3.0, 0.0, 1.0), (0.0, -1.0, 1.0));
    }

    #[test]
    fn incident_zero_crossing() {
        // wt - kx = pi/2 with t = 0.25, x = 0
        let (hx, hy, ez) = incident_field(0.0, 0.0, 0.25, 1.0);
        assert_eq!(hx, 0.0);
        assert!(hy.abs() < 1e-15 && ez.abs() < 1e-15);
    }

    #[test]
    fn incident_quarter_wavelength() {
        let (_, _, ez) = incident_field(0.25, 0.0, 0.0, 1.0);
        assert!(ez.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_cfl() {
        let mut cfg = desk_config(2.0);
        cfg.cfl_factor = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(matches!(FdtdSolver::new(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_small_domain_and_bad_layers() {
        let mut cfg = desk_config(2.0);
        cfg.domain_half_width = 0.5;
        assert!(cfg.validate().is_err());

        let mut cfg = desk_config(2.0);
        cfg.geometry = GeometrySpec {
            layer_radii: vec![0.3, 0.2],
            layer_permittivities: vec![2.0, 2.0],
            background_permittivity: 1.0,
        };
        assert!(cfg.validate().is_err());

        let mut cfg = desk_config(2.0);
        cfg.geometry.layer_permittivities.push(3.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn layered_permittivity_lookup() {
        let g = GeometrySpec {
            layer_radii: vec![0.15, 0.3, 0.45, 0.6],
            layer_permittivities: vec![5.0, 3.25, 2.0, 1.25],
            background_permittivity: 1.0,
        };
        let theta = [5.3, 3.5, 2.25, 1.5];
        assert_eq!(g.permittivity_at(0.0, 0.0, &theta), 5.3);
        assert_eq!(g.permittivity_at(0.2, 0.0, &theta), 3.5);
        assert_eq!(g.permittivity_at(0.0, -0.4, &theta), 2.25);
        assert_eq!(g.permittivity_at(0.5, 0.0, &theta), 1.5);
        assert_eq!(g.permittivity_at(0.6, 0.6, &theta), 1.0);
    }

    #[test]
    fn extract_identity_repackaging() {
        let cfg = desk_config(2.0);
        let solver = FdtdSolver::new(cfg.clone()).unwrap();
        let times = cfg.last_period_times(4);
        let series = solver.run(&[2.0], &times).unwrap();
        let [ez, hx, hy] = extract_snapshots(&series, &times).unwrap();
        assert_eq!(ez.ncols(), 4);
        for (j, s) in series.iter().enumerate() {
            assert_eq!(ez.column(j).as_slice(), s.ez.as_slice());
            assert_eq!(hx.column(j).as_slice(), s.hx.as_slice());
            assert_eq!(hy.column(j).as_slice(), s.hy.as_slice());
        }
        // reversed order is honoured
        let rev: Vec<f64> = times.iter().rev().copied().collect();
        let [ez_rev, _, _] = extract_snapshots(&series, &rev).unwrap();
        assert_eq!(ez_rev.column(0), ez.column(3));
    }

    #[test]
    fn extract_rejects_out_of_window_and_off_grid() {
        let cfg = desk_config(2.0);
        let times = cfg.last_period_times(4);
        let series = run_full_order(&cfg, &[2.0], &times).unwrap();
        let beyond = cfg.final_time() + 1.0;
        let err = extract_snapshots(&series, &[beyond]).unwrap_err();
        assert!(err.to_string().contains("outside"));
        let mid = 0.5 * (times[0] + times[1]);
        let err = extract_snapshots(&series, &[mid]).unwrap_err();
        assert!(err.to_string().contains("sample grid"));
    }
}
