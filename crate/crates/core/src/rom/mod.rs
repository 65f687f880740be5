//! Offline/online reduced-order pipeline: snapshots, reduced bases and
//! mode surrogates are built offline; online queries only evaluate GP means
//! and reconstruct fields from the bases.

pub mod metrics;
mod store;

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use metrics::{fourier_extract, projection_error, relative_l2_error, ErrorReport, ErrorRow, Timing};

use crate::dataset::{assemble_snapshots, SamplingGrid, SnapshotSet};
use crate::error::{Error, Result, ResultExt};
use crate::fom::{Component, FdtdSolver, FieldState, SolverConfig};
use crate::gpr::GprOptions;
use crate::modes::{build_coefficient_matrices, decompose, train_mode_surrogate, ModeSurrogate, ToleranceSchedule};
use crate::pod::{projection_residual_norm_sum, two_step_pod, ReducedBasis};

/// One value per field component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerComponent<T> {
    pub ez: T,
    pub hx: T,
    pub hy: T,
}

impl<T: Clone> PerComponent<T> {
    pub fn uniform(value: T) -> Self {
        Self {
            ez: value.clone(),
            hx: value.clone(),
            hy: value,
        }
    }
}

impl<T> PerComponent<T> {
    pub fn get(&self, c: Component) -> &T {
        match c {
            Component::Ez => &self.ez,
            Component::Hx => &self.hx,
            Component::Hy => &self.hy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PodTolerances {
    pub epsilon_t: f64,
    pub epsilon_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub pod: PerComponent<PodTolerances>,
    pub schedules: PerComponent<ToleranceSchedule>,
    pub gpr: GprOptions,
}

impl BuildOptions {
    pub fn uniform(pod: PodTolerances, schedule: ToleranceSchedule, gpr: GprOptions) -> Self {
        Self {
            pod: PerComponent::uniform(pod),
            schedules: PerComponent::uniform(schedule),
            gpr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in Component::ALL {
            let p = self.pod.get(c);
            for (name, v) in [("epsilon_t", p.epsilon_t), ("epsilon_theta", p.epsilon_theta)] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::Config(format!("pod.{c}.{name} = {v} outside (0, 1)")));
                }
            }
            self.schedules.get(c).validate().context_with(|| format!("schedules.{c}"))?;
        }
        if self.gpr.restarts == 0 || self.gpr.max_iters == 0 {
            return Err(Error::Config("gpr restarts and max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Wall-clock seconds spent in each offline phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildTimings {
    pub snapshots: f64,
    pub pod: f64,
    pub gpr: f64,
}

/// Reduced basis and per-coefficient surrogates of one component.
#[derive(Debug, Clone)]
pub struct ComponentModel {
    pub component: Component,
    pub basis: ReducedBasis,
    pub surrogates: Vec<ModeSurrogate>,
    /// Parameter blocks left out of the POD because the component vanished there.
    pub zero_blocks: Vec<usize>,
}

impl ComponentModel {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Retained mode count per coefficient.
    pub fn mode_counts(&self) -> Vec<usize> {
        self.surrogates.iter().map(ModeSurrogate::q).collect()
    }

    /// Recovered coefficient matrix `d x len(times)` at `theta`.
    pub fn coefficients(&self, times: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.dim(), times.len());
        for (l, s) in self.surrogates.iter().enumerate() {
            out.set_row(l, &s.trajectory(times, theta)?.transpose());
        }
        Ok(out)
    }

    /// Fields `Psi * alpha_hat` as an `N_h x len(times)` matrix.
    pub fn reconstruct(&self, times: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        Ok(crate::pod::matmul(&self.basis.basis, &self.coefficients(times, theta)?))
    }
}

/// Hex SHA-256 of the canonical text form of a solver configuration.
pub fn config_fingerprint(config: &SolverConfig) -> String {
    let text = toml::to_string(config).unwrap_or_else(|_| format!("{config:?}"));
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct RomModel {
    pub config: SolverConfig,
    pub fingerprint: String,
    pub grid: SamplingGrid,
    pub options: BuildOptions,
    pub components: [ComponentModel; 3],
    pub timings: BuildTimings,
}

/// Reduced fields at one or more times, with the extrapolation flag.
#[derive(Debug, Clone)]
pub struct OnlineResult {
    pub times: Vec<f64>,
    /// `N_h x len(times)` per component, in ez, hx, hy order.
    pub fields: [DMatrix<f64>; 3],
    pub extrapolated: bool,
}

impl OnlineResult {
    pub fn field(&self, c: Component) -> &DMatrix<f64> {
        &self.fields[c as usize]
    }

    /// Field state at the `i`-th requested time.
    pub fn state(&self, i: usize) -> FieldState {
        let column = |c: Component| self.field(c).column(i).iter().copied().collect();
        FieldState {
            ez: column(Component::Ez),
            hx: column(Component::Hx),
            hy: column(Component::Hy),
            time: self.times[i],
        }
    }

    pub fn states(&self) -> Vec<FieldState> {
        (0..self.times.len()).map(|i| self.state(i)).collect()
    }
}

/// Run every offline phase: snapshots, two-step POD, coefficient matrices, mode surrogates.
pub fn offline_build(config: &SolverConfig, grid: &SamplingGrid, options: &BuildOptions) -> Result<RomModel> {
    grid.validate()?;
    options.validate()?;
    let solver = FdtdSolver::new(config.clone())?;
    let start = Instant::now();
    let snapshots =
        assemble_snapshots(&solver, &grid.parameter_points, &grid.snapshot_times).context("snapshot phase")?;
    let training = if grid.training_equals_snapshots() {
        None
    } else {
        Some(
            assemble_snapshots(&solver, &grid.training_parameters, &grid.training_times)
                .context("training-data phase")?,
        )
    };
    let snapshot_seconds = start.elapsed().as_secs_f64();
    let mut model = build_from_snapshots(config, grid, &snapshots, training.as_ref(), options)?;
    model.timings.snapshots = snapshot_seconds;
    Ok(model)
}

/// Offline build from already assembled snapshot (and optional separate training) sets.
pub fn build_from_snapshots(
    config: &SolverConfig,
    grid: &SamplingGrid,
    snapshots: &[SnapshotSet; 3],
    training: Option<&[SnapshotSet; 3]>,
    options: &BuildOptions,
) -> Result<RomModel> {
    grid.validate()?;
    options.validate()?;
    let training = training.unwrap_or(snapshots);
    for (c, (s, t)) in Component::ALL.iter().zip(snapshots.iter().zip(training)) {
        s.validate()?;
        t.validate()?;
        if s.component != *c || t.component != *c {
            return Err(Error::Validation("snapshot sets out of component order".into()));
        }
        if s.parameters != grid.parameter_points || s.times != grid.snapshot_times {
            return Err(Error::Validation(format!("{c} snapshots do not match the sampling grid")));
        }
        if t.parameters != grid.training_parameters || t.times != grid.training_times {
            return Err(Error::Validation(format!("{c} training data do not match the sampling grid")));
        }
    }

    let start = Instant::now();
    let mut bases = Vec::with_capacity(3);
    for (c, set) in Component::ALL.into_iter().zip(snapshots) {
        let zero_blocks: Vec<usize> = (0..set.matrices.len())
            .filter(|&j| set.matrices[j].iter().all(|v| *v == 0.0))
            .collect();
        let blocks: Vec<DMatrix<f64>> = set
            .matrices
            .iter()
            .enumerate()
            .filter(|(j, _)| !zero_blocks.contains(j))
            .map(|(_, m)| m.clone())
            .collect();
        if !zero_blocks.is_empty() {
            log::info!("{c}: identically zero at parameter blocks {zero_blocks:?}; left out of the POD");
        }
        let tol = options.pod.get(c);
        let basis = two_step_pod(&blocks, tol.epsilon_t, tol.epsilon_theta).context_with(|| format!("{c} POD phase"))?;
        log::info!("{c}: reduced basis dimension {}", basis.dim());
        bases.push((basis, zero_blocks));
    }
    let pod_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut jobs = Vec::new();
    for (ci, (c, set)) in Component::ALL.into_iter().zip(training).enumerate() {
        let coeffs = build_coefficient_matrices(&bases[ci].0.basis, set).context_with(|| format!("{c} coefficient phase"))?;
        jobs.extend(coeffs.into_iter().map(|m| (ci, m)));
    }
    let surrogates: Vec<(usize, ModeSurrogate)> = jobs
        .par_iter()
        .map(|(ci, m)| {
            let c = m.component;
            let delta = options.schedules.get(c).delta_for(m.index);
            let dec = decompose(&m.values, delta).context_with(|| format!("{c} coefficient l = {}", m.index))?;
            let s = train_mode_surrogate(
                &dec,
                &grid.training_times,
                &grid.training_parameters,
                c,
                m.index,
                &options.gpr,
            )?;
            Ok((*ci, s))
        })
        .collect::<Result<_>>()
        .context("regression phase")?;
    let gpr_seconds = start.elapsed().as_secs_f64();

    let mut per_component: [Vec<ModeSurrogate>; 3] = Default::default();
    for (ci, s) in surrogates {
        per_component[ci].push(s);
    }
    let mut bases = bases.into_iter();
    let components = Component::ALL.map(|c| {
        let (basis, zero_blocks) = bases.next().expect("three components");
        let surrogates = std::mem::take(&mut per_component[c as usize]);
        let q: Vec<usize> = surrogates.iter().map(ModeSurrogate::q).collect();
        log::info!("{c}: modes per coefficient Q = {q:?}");
        ComponentModel {
            component: c,
            basis,
            surrogates,
            zero_blocks,
        }
    });

    Ok(RomModel {
        config: config.clone(),
        fingerprint: config_fingerprint(config),
        grid: grid.clone(),
        options: options.clone(),
        components,
        timings: BuildTimings {
            snapshots: 0.0,
            pod: pod_seconds,
            gpr: gpr_seconds,
        },
    })
}

impl RomModel {
    pub fn component(&self, c: Component) -> &ComponentModel {
        &self.components[c as usize]
    }

    pub fn dims(&self) -> [usize; 3] {
        self.components.each_ref().map(ComponentModel::dim)
    }

    pub fn parameter_dim(&self) -> usize {
        self.grid.parameter_dim()
    }

    /// Training time window `[first, last]`.
    pub fn time_window(&self) -> [f64; 2] {
        let t = &self.grid.training_times;
        [t[0], t[t.len() - 1]]
    }

    /// Whether `theta` lies outside the training parameter box.
    pub fn is_extrapolation(&self, theta: &[f64]) -> bool {
        self.grid
            .parameter_box()
            .iter()
            .zip(theta)
            .any(|([lo, hi], v)| *v < lo - 1e-12 * lo.abs().max(1.0) || *v > hi + 1e-12 * hi.abs().max(1.0))
    }

    /// Validate an online query without evaluating it.
    pub fn check_query(&self, times: &[f64], theta: &[f64]) -> Result<()> {
        if theta.len() != self.parameter_dim() {
            return Err(Error::Validation(format!(
                "parameter has {} entries, model expects {}",
                theta.len(),
                self.parameter_dim()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite parameter {theta:?}")));
        }
        let [lo, hi] = self.time_window();
        let slack = 1e-9 * hi.abs().max(1.0);
        if let Some(t) = times.iter().find(|&&t| !(t >= lo - slack && t <= hi + slack)) {
            return Err(Error::Validation(format!(
                "time {t} outside the trained window [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// Reduced fields at a single `(t, theta)`.
    pub fn online_evaluate(&self, t: f64, theta: &[f64]) -> Result<OnlineResult> {
        self.online_trajectory(&[t], theta)
    }

    /// Reduced fields at every time in `times` for one parameter point.
    pub fn online_trajectory(&self, times: &[f64], theta: &[f64]) -> Result<OnlineResult> {
        self.check_query(times, theta)?;
        let fields = [
            self.components[0].reconstruct(times, theta)?,
            self.components[1].reconstruct(times, theta)?,
            self.components[2].reconstruct(times, theta)?,
        ];
        Ok(OnlineResult {
            times: times.to_vec(),
            fields,
            extrapolated: self.is_extrapolation(theta),
        })
    }

    /// Compare an online trajectory against full-order reference states.
    pub fn error_report(&self, theta: &[f64], reference: &[FieldState]) -> Result<ErrorReport> {
        let times: Vec<f64> = reference.iter().map(|s| s.time).collect();
        let online = self.online_trajectory(&times, theta)?;
        let bases = self.components.each_ref().map(|c| &c.basis.basis);
        ErrorReport::compare(bases, theta, reference, &online.states())
    }
}

/// Recovery error budget of one component and its measured counterpart on the training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetCheck {
    pub component: Component,
    /// Two-step projection bound.
    pub projection_bound: f64,
    /// `sqrt(N_s * sum_l delta_l * sum_k zeta_k^2)`.
    pub truncation_term: f64,
    /// Sum of projection residual norms over all training snapshots.
    pub measured_projection: f64,
    /// Sum of `||u - u_reg||` over all training snapshots.
    pub measured_recovery: f64,
}

impl BudgetCheck {
    pub fn budget(&self) -> f64 {
        self.projection_bound + self.truncation_term
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.measured_projection <= self.projection_bound + slack && self.measured_recovery <= self.budget() + slack
    }
}

/// Budget of `component` on a training set of `samples` snapshots.
pub fn error_budget(component: &ComponentModel, samples: usize) -> f64 {
    component.basis.projection_bound() + truncation_term(component, samples)
}

fn truncation_term(component: &ComponentModel, samples: usize) -> f64 {
    let sum: f64 = component.surrogates.iter().map(ModeSurrogate::truncation_budget).sum();
    (samples as f64 * sum).sqrt()
}

/// Measure projection and recovery error sums on the snapshot set the model was built from.
pub fn check_budget(model: &RomModel, snapshots: &[SnapshotSet; 3]) -> Result<[BudgetCheck; 3]> {
    if !model.grid.training_equals_snapshots() {
        return Err(Error::Validation(
            "budget check needs a model whose training data are its snapshots".into(),
        ));
    }
    let times = &model.grid.snapshot_times;
    let samples = times.len() * model.grid.parameter_points.len();
    let mut out = Vec::with_capacity(3);
    for (cm, set) in model.components.iter().zip(snapshots) {
        let mut measured_projection = 0.0;
        let mut measured_recovery = 0.0;
        for (block, theta) in set.matrices.iter().zip(&set.parameters) {
            measured_projection += projection_residual_norm_sum(&cm.basis.basis, block);
            let approx = cm.reconstruct(times, theta)?;
            measured_recovery += (block - approx).column_iter().map(|c| c.norm()).sum::<f64>();
        }
        out.push(BudgetCheck {
            component: cm.component,
            projection_bound: cm.basis.projection_bound(),
            truncation_term: truncation_term(cm, samples),
            measured_projection,
            measured_recovery,
        });
    }
    Ok([out[0], out[1], out[2]])
}
