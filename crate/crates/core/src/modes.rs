//! Time/parameter separation of projection coefficients: each coefficient's
//! training matrix is split by a truncated SVD, and every retained time mode
//! and parameter mode gets its own Gaussian process.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::SnapshotSet;
use crate::error::{Error, Result, ResultExt};
use crate::fom::Component;
use crate::gpr::{GprHyperparams, GprModel, GprOptions};
use crate::pod::{energy_truncation, numerical_rank, thin_svd};

/// Training values of one projection coefficient: entry `(i, j)` is the
/// coefficient at training time `i` and training parameter `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub component: Component,
    /// 1-based coefficient index.
    pub index: usize,
    pub values: DMatrix<f64>,
}

/// Project every snapshot onto every basis vector and regroup by coefficient.
pub fn build_coefficient_matrices(basis: &DMatrix<f64>, set: &SnapshotSet) -> Result<Vec<CoefficientMatrix>> {
    set.validate()?;
    if basis.nrows() != set.dofs() {
        return Err(Error::Validation(format!(
            "basis has {} rows but snapshots have {} dofs",
            basis.nrows(),
            set.dofs()
        )));
    }
    let (n_t, n_theta) = (set.times.len(), set.matrices.len());
    let mut out: Vec<CoefficientMatrix> = (0..basis.ncols())
        .map(|l| CoefficientMatrix {
            component: set.component,
            index: l + 1,
            values: DMatrix::zeros(n_t, n_theta),
        })
        .collect();
    for (j, block) in set.matrices.iter().enumerate() {
        let reduced = basis.tr_mul(block);
        for (l, coeff) in out.iter_mut().enumerate() {
            for i in 0..n_t {
                coeff.values[(i, j)] = reduced[(l, i)];
            }
        }
    }
    Ok(out)
}

/// Truncated SVD `P ~ sum_k zeta_k xi_k phi_k'`.
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    /// All nonzero singular values, descending; only the first `q` are kept.
    pub singular_values: Vec<f64>,
    /// `N_t x q`; the largest-magnitude entry of each column is positive.
    pub time_modes: DMatrix<f64>,
    /// `N_theta x q`.
    pub param_modes: DMatrix<f64>,
    pub q: usize,
    pub delta: f64,
}

impl ModeDecomposition {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn energy(&self) -> f64 {
        self.singular_values.iter().map(|s| s * s).sum()
    }

    /// Squared Frobenius norm of the discarded part.
    pub fn truncation_residual(&self) -> f64 {
        self.singular_values[self.q..].iter().map(|s| s * s).sum()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.time_modes.nrows(), self.q, |i, k| {
            self.time_modes[(i, k)] * self.singular_values[k]
        });
        scaled * self.param_modes.transpose()
    }
}

pub fn decompose(p: &DMatrix<f64>, delta: f64) -> Result<ModeDecomposition> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Validation(format!("truncation tolerance {delta} outside (0, 1)")));
    }
    let svd = thin_svd(p)?;
    let rank = numerical_rank(&svd.singular_values);
    if rank == 0 {
        return Err(Error::Numerical("coefficient matrix is zero".into()));
    }
    let q = energy_truncation(&svd.singular_values, delta);
    Ok(ModeDecomposition {
        singular_values: svd.singular_values[..rank].to_vec(),
        time_modes: svd.u.columns(0, q).into_owned(),
        param_modes: svd.v_t.rows(0, q).transpose(),
        q,
        delta,
    })
}

/// Piecewise-constant map from coefficient index to truncation tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSchedule {
    pub entries: Vec<ScheduleEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// Inclusive upper index; `None` on the final, open-ended entry.
    pub max_index: Option<usize>,
    pub delta: f64,
}

impl ToleranceSchedule {
    pub fn uniform(delta: f64) -> Self {
        Self {
            entries: vec![ScheduleEntry { max_index: None, delta }],
        }
    }

    fn from_pairs(bounded: &[(usize, f64)], last: f64) -> Self {
        let mut entries: Vec<ScheduleEntry> = bounded
            .iter()
            .map(|&(max, delta)| ScheduleEntry {
                max_index: Some(max),
                delta,
            })
            .collect();
        entries.push(ScheduleEntry {
            max_index: None,
            delta: last,
        });
        Self { entries }
    }

    /// Grouping used for the single dielectric cylinder.
    pub fn cylinder() -> Self {
        Self::from_pairs(
            &[(5, 1e-4), (10, 5e-4), (20, 1e-3), (30, 2e-3), (40, 3e-3), (55, 4e-3)],
            5e-3,
        )
    }

    /// Grouping used for the layered scatterer.
    pub fn multilayer() -> Self {
        Self::from_pairs(&[(2, 6e-5), (5, 1e-4), (10, 5e-4)], 1e-3)
    }

    pub fn validate(&self) -> Result<()> {
        let Some((last, head)) = self.entries.split_last() else {
            return Err(Error::Config("tolerance schedule is empty".into()));
        };
        if last.max_index.is_some() || head.iter().any(|e| e.max_index.is_none()) {
            return Err(Error::Config(
                "only the last tolerance schedule entry may (and must) omit max_index".into(),
            ));
        }
        let bounds: Vec<usize> = head.iter().filter_map(|e| e.max_index).collect();
        if bounds.first() == Some(&0) || bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "tolerance schedule bounds must be positive and strictly increasing: {bounds:?}"
            )));
        }
        if let Some(e) = self.entries.iter().find(|e| !(e.delta > 0.0 && e.delta < 1.0)) {
            return Err(Error::Config(format!("schedule tolerance {} outside (0, 1)", e.delta)));
        }
        Ok(())
    }

    /// Tolerance for 1-based coefficient index `l`.
    pub fn delta_for(&self, l: usize) -> f64 {
        self.entries
            .iter()
            .find(|e| e.max_index.is_none_or(|m| l <= m))
            .map_or(f64::NAN, |e| e.delta)
    }
}

/// Value of a recovered coefficient, flagged when outside the training hull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientEstimate {
    pub value: f64,
    pub extrapolated: bool,
}

/// Regression surrogate for one projection coefficient.
#[derive(Debug, Clone)]
pub struct ModeSurrogate {
    pub component: Component,
    pub index: usize,
    pub delta: f64,
    pub rank: usize,
    /// Sum of all squared singular values of the training matrix.
    pub energy: f64,
    /// Retained singular values.
    pub zeta: Vec<f64>,
    time_gps: Vec<GprModel>,
    param_gps: Vec<GprModel>,
    time_range: [f64; 2],
    param_box: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SurrogateManifest {
    component: Component,
    index: usize,
    delta: f64,
    rank: usize,
    energy: f64,
    zeta: Vec<f64>,
}

fn gp_seed(base: u64, index: usize, k: usize, param: bool) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((index as u64) << 20)
        .wrapping_add((k as u64) << 1)
        .wrapping_add(param as u64)
}

fn hull(points: &DMatrix<f64>) -> Vec<[f64; 2]> {
    points.column_iter().map(|c| [c.min(), c.max()]).collect()
}

/// Train a mode GP; a single sample has nothing to optimize and gives a constant predictor.
fn fit_mode(inputs: DMatrix<f64>, targets: DVector<f64>, options: &GprOptions) -> Result<GprModel> {
    if inputs.nrows() > 1 {
        return GprModel::train(inputs, targets, options);
    }
    let hyper = GprHyperparams {
        mean_const: 0.0,
        lengthscales: vec![1.0; inputs.ncols()],
        signal_std: targets[0].abs().max(1e-12),
        noise_std: 0.0,
    };
    GprModel::fit_with(inputs, targets, hyper)
}

/// Train one time GP and one parameter GP per retained mode.
pub fn train_mode_surrogate(
    decomposition: &ModeDecomposition,
    times: &[f64],
    parameters: &[Vec<f64>],
    component: Component,
    index: usize,
    options: &GprOptions,
) -> Result<ModeSurrogate> {
    let dec = decomposition;
    assert!(dec.q >= 1, "a nonzero coefficient matrix keeps at least one mode");
    if dec.time_modes.nrows() != times.len() || dec.param_modes.nrows() != parameters.len() {
        return Err(Error::Validation(format!(
            "mode lengths ({}, {}) do not match {} times and {} parameter points",
            dec.time_modes.nrows(),
            dec.param_modes.nrows(),
            times.len(),
            parameters.len()
        )));
    }
    let p_dim = parameters.first().map_or(0, Vec::len);
    let t_inputs = DMatrix::from_column_slice(times.len(), 1, times);
    let p_inputs = DMatrix::from_fn(parameters.len(), p_dim, |j, m| parameters[j][m]);

    let mut time_gps = Vec::with_capacity(dec.q);
    let mut param_gps = Vec::with_capacity(dec.q);
    for k in 0..dec.q {
        let label = |kind: &str| format!("{component} coefficient l = {index}, mode k = {}, {kind} GP", k + 1);
        let opts = GprOptions {
            seed: gp_seed(options.seed, index, k, false),
            ..*options
        };
        let xi = dec.time_modes.column(k).into_owned();
        time_gps.push(fit_mode(t_inputs.clone(), xi, &opts).context_with(|| label("time"))?);
        let opts = GprOptions {
            seed: gp_seed(options.seed, index, k, true),
            ..*options
        };
        let phi = dec.param_modes.column(k).into_owned();
        param_gps.push(fit_mode(p_inputs.clone(), phi, &opts).context_with(|| label("param"))?);
    }
    Ok(ModeSurrogate::from_gps(dec, component, index, time_gps, param_gps))
}

const HULL_SLACK: f64 = 1e-9;

impl ModeSurrogate {
    /// Assemble from already conditioned GPs, one time and one parameter GP per retained mode.
    pub fn from_gps(
        decomposition: &ModeDecomposition,
        component: Component,
        index: usize,
        time_gps: Vec<GprModel>,
        param_gps: Vec<GprModel>,
    ) -> Self {
        assert_eq!(time_gps.len(), decomposition.q);
        assert_eq!(param_gps.len(), decomposition.q);
        let t = time_gps[0].inputs().column(0);
        Self {
            component,
            index,
            delta: decomposition.delta,
            rank: decomposition.rank(),
            energy: decomposition.energy(),
            zeta: decomposition.singular_values[..decomposition.q].to_vec(),
            time_range: [t.min(), t.max()],
            param_box: hull(param_gps[0].inputs()),
            time_gps,
            param_gps,
        }
    }

    pub fn q(&self) -> usize {
        self.zeta.len()
    }

    pub fn time_gps(&self) -> &[GprModel] {
        &self.time_gps
    }

    pub fn param_gps(&self) -> &[GprModel] {
        &self.param_gps
    }

    /// Upper bound on the squared truncation residual over the training grid.
    pub fn truncation_budget(&self) -> f64 {
        self.delta * self.energy
    }

    pub fn is_extrapolation(&self, t: f64, theta: &[f64]) -> bool {
        let span = |[lo, hi]: [f64; 2]| HULL_SLACK * (1.0 + hi.abs().max(lo.abs()));
        let out = |v: f64, r: [f64; 2]| v < r[0] - span(r) || v > r[1] + span(r);
        out(t, self.time_range) || theta.iter().zip(&self.param_box).any(|(&v, &r)| out(v, r))
    }

    /// `zeta_k * phi_k(theta)` for every retained mode.
    pub fn param_weights(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.param_gps
            .iter()
            .zip(&self.zeta)
            .map(|(gp, z)| gp.predict_mean(theta).map(|v| v * z))
            .collect()
    }

    /// `xi_k(t)` for every retained mode at each of `times`, as a `len x q` matrix.
    pub fn time_values(&self, times: &[f64]) -> Result<DMatrix<f64>> {
        let points = DMatrix::from_column_slice(times.len(), 1, times);
        let mut out = DMatrix::zeros(times.len(), self.q());
        for (k, gp) in self.time_gps.iter().enumerate() {
            out.set_column(k, &gp.predict_means(&points)?);
        }
        Ok(out)
    }

    /// Coefficient trajectory at `times` for a fixed parameter point.
    pub fn trajectory(&self, times: &[f64], theta: &[f64]) -> Result<DVector<f64>> {
        let w = DVector::from_vec(self.param_weights(theta)?);
        Ok(self.time_values(times)? * w)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = SurrogateManifest {
            component: self.component,
            index: self.index,
            delta: self.delta,
            rank: self.rank,
            energy: self.energy,
            zeta: self.zeta.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Numerical(format!("serializing manifest: {e}")))?;
        let path = dir.join("manifest.toml");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        for (k, (tg, pg)) in self.time_gps.iter().zip(&self.param_gps).enumerate() {
            tg.save(dir.join(format!("time_{k}")))?;
            pg.save(dir.join(format!("param_{k}")))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.toml");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: SurrogateManifest = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.clone(),
            detail: e.to_string(),
        })?;
        let mut time_gps = Vec::with_capacity(m.zeta.len());
        let mut param_gps = Vec::with_capacity(m.zeta.len());
        for k in 0..m.zeta.len() {
            time_gps.push(GprModel::load(dir.join(format!("time_{k}")))?);
            param_gps.push(GprModel::load(dir.join(format!("param_{k}")))?);
        }
        let Some(first) = time_gps.first() else {
            return Err(Error::Format {
                path,
                detail: "surrogate without modes".into(),
            });
        };
        let t = first.inputs().column(0);
        let time_range = [t.min(), t.max()];
        let param_box = hull(param_gps[0].inputs());
        Ok(Self {
            component: m.component,
            index: m.index,
            delta: m.delta,
            rank: m.rank,
            energy: m.energy,
            zeta: m.zeta,
            time_gps,
            param_gps,
            time_range,
            param_box,
        })
    }
}

/// Recovered coefficient `sum_k zeta_k xi_k(t) phi_k(theta)` from posterior means.
pub fn evaluate_coefficient(surrogate: &ModeSurrogate, t: f64, theta: &[f64]) -> Result<CoefficientEstimate> {
    let weights = surrogate.param_weights(theta)?;
    let mut value = 0.0;
    for (gp, w) in surrogate.time_gps.iter().zip(weights) {
        value += w * gp.predict_mean(&[t])?;
    }
    Ok(CoefficientEstimate {
        value,
        extrapolated: surrogate.is_extrapolation(t, theta),
    })
}
