//! Gaussian process regression with an ARD squared-exponential kernel and a
//! constant mean, trained by maximizing the log marginal likelihood.

mod kernel;
mod likelihood;
mod optim;

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use kernel::ard_se;
pub use likelihood::{log_marginal_likelihood, LogLikelihood};

use crate::dataset::{load_matrix, save_matrix};
use crate::error::{Error, Result};
use kernel::{correlation, correlation_row};
use likelihood::{evaluate, factorize, profile_mean};
use optim::{minimize, Bounds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprHyperparams {
    pub mean_const: f64,
    pub lengthscales: Vec<f64>,
    pub signal_std: f64,
    pub noise_std: f64,
}

impl GprHyperparams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::Validation(format!(
                "{} lengthscales for {dim} input dimensions",
                self.lengthscales.len()
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !self.lengthscales.iter().all(|&l| positive(l)) || !positive(self.signal_std) {
            return Err(Error::Validation(format!(
                "lengthscales and signal std must be positive and finite: {self:?}"
            )));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) || !self.mean_const.is_finite() {
            return Err(Error::Validation(format!("bad noise std or mean: {self:?}")));
        }
        Ok(())
    }

    /// Covariance between two points.
    pub fn kernel(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        ard_se(x, x_prime, &self.lengthscales, self.signal_std)
    }

    fn from_log(p: &[f64]) -> Self {
        let d = p.len() - 2;
        Self {
            mean_const: 0.0,
            lengthscales: p[..d].iter().map(|v| v.exp()).collect(),
            signal_std: p[d].exp(),
            noise_std: p[d + 1].exp(),
        }
    }
}

/// Largest noise level, relative to the target scale, the optimizer may choose.
///
/// Training data are noiseless simulation output; without this cap an oscillatory,
/// sparsely sampled target is often "explained" as pure noise and predicted by its mean.
pub const NOISE_CEILING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprOptions {
    /// Number of optimizer starts; the first is the deterministic default initialization.
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for GprOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_iters: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// A conditioned Gaussian process. Immutable once built.
#[derive(Debug, Clone)]
pub struct GprModel {
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
    hyper: GprHyperparams,
    jitter: f64,
    log_likelihood: f64,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    inv_l2: Vec<f64>,
}

/// Text part of a persisted model; matrices live in sibling FMX files.
#[derive(Debug, Serialize, Deserialize)]
struct ModelRecord {
    n: usize,
    d: usize,
    jitter: f64,
    log_likelihood: f64,
    hyper: GprHyperparams,
}

const RECORD_FILE: &str = "gp.toml";
const MATRIX_FILES: [&str; 4] = ["inputs.fmx", "targets.fmx", "chol.fmx", "alpha.fmx"];

fn check_data(inputs: &DMatrix<f64>, targets: &DVector<f64>) -> Result<()> {
    if inputs.nrows() != targets.len() {
        return Err(Error::Validation(format!(
            "{} input rows for {} targets",
            inputs.nrows(),
            targets.len()
        )));
    }
    if inputs.ncols() == 0 || inputs.nrows() == 0 {
        return Err(Error::Validation("empty training data".into()));
    }
    if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite training data".into()));
    }
    for i in 0..inputs.nrows() {
        for j in i + 1..inputs.nrows() {
            if inputs.row(i) == inputs.row(j) && targets[i] != targets[j] {
                return Err(Error::Validation(format!(
                    "training rows {i} and {j} share inputs but have targets {} and {}",
                    targets[i], targets[j]
                )));
            }
        }
    }
    Ok(())
}

fn column_stats(inputs: &DMatrix<f64>) -> Vec<(f64, f64)> {
    // (standard deviation, range) per dimension, each falling back to 1 when degenerate
    inputs
        .column_iter()
        .map(|c| {
            let n = c.len() as f64;
            let mean = c.sum() / n;
            let std = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let range = c.max() - c.min();
            (
                if std > 0.0 { std } else { 1.0 },
                if range > 0.0 { range } else { 1.0 },
            )
        })
        .collect()
}

fn target_scale(targets: &DVector<f64>) -> f64 {
    let n = targets.len() as f64;
    let mean = targets.sum() / n;
    let std = (targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std > 0.0 {
        std
    } else {
        1.0
    }
}

impl GprModel {
    /// Condition on `(inputs, targets)` at fixed kernel hyperparameters. The
    /// constant mean is re-estimated; `hyper.mean_const` is overwritten.
    pub fn fit_with(inputs: DMatrix<f64>, targets: DVector<f64>, hyper: GprHyperparams) -> Result<Self> {
        check_data(&inputs, &targets)?;
        hyper.validate(inputs.ncols())?;
        let corr = correlation(&inputs, &inputs, &hyper.lengthscales);
        let ll = evaluate(&corr, &inputs, &targets, &hyper)?;
        let sf2 = hyper.signal_std.powi(2);
        let factor = factorize(&corr, sf2, hyper.noise_std.powi(2))?;
        let (beta, alpha) = profile_mean(&factor.chol, &targets);
        let hyper = GprHyperparams {
            mean_const: beta,
            ..hyper
        };
        Ok(Self::assemble(inputs, targets, hyper, factor.jitter, ll.value, factor.chol.unpack(), alpha))
    }

    fn assemble(
        inputs: DMatrix<f64>,
        targets: DVector<f64>,
        hyper: GprHyperparams,
        jitter: f64,
        log_likelihood: f64,
        chol: DMatrix<f64>,
        alpha: DVector<f64>,
    ) -> Self {
        let inv_l2 = hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        Self {
            inputs,
            targets,
            hyper,
            jitter,
            log_likelihood,
            chol,
            alpha,
            inv_l2,
        }
    }

    /// Maximize the log marginal likelihood over kernel hyperparameters and condition on the data.
    pub fn train(inputs: DMatrix<f64>, targets: DVector<f64>, options: &GprOptions) -> Result<Self> {
        check_data(&inputs, &targets)?;
        if inputs.nrows() < 2 {
            return Err(Error::Validation(format!(
                "training needs at least 2 points, got {}",
                inputs.nrows()
            )));
        }
        if options.restarts == 0 {
            return Err(Error::Validation("restarts must be at least 1".into()));
        }
        let d = inputs.ncols();
        let stats = column_stats(&inputs);
        let ys = target_scale(&targets);

        // bounds correspond to [1e-3, 1e3] lengthscales on standardized inputs
        let mut lower: Vec<f64> = stats.iter().map(|(s, _)| (1e-3 * s).ln()).collect();
        let mut upper: Vec<f64> = stats.iter().map(|(s, _)| (1e3 * s).ln()).collect();
        lower.extend([(1e-6 * ys).ln(), (1e-8 * ys).ln()]);
        upper.extend([(1e3 * ys).ln(), (NOISE_CEILING * ys).ln()]);
        let bounds = Bounds { lower, upper };

        let mut start: Vec<f64> = stats.iter().map(|(_, r)| r.ln()).collect();
        start.extend([ys.ln(), (1e-2 * ys).ln()]);

        let objective = |p: &[f64]| {
            let h = GprHyperparams::from_log(p);
            let corr = correlation(&inputs, &inputs, &h.lengthscales);
            evaluate(&corr, &inputs, &targets, &h)
                .ok()
                .map(|ll| (-ll.value, ll.gradient.iter().map(|g| -g).collect()))
        };

        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut best: Option<optim::Minimum> = None;
        let mut failures = Vec::new();
        for restart in 0..options.restarts {
            let x0: Vec<f64> = if restart == 0 {
                start.clone()
            } else {
                start.iter().map(|v| v + rng.random_range(-1.5..1.5)).collect()
            };
            match minimize(objective, &x0, &bounds, options.max_iters) {
                Some(m) if best.as_ref().is_none_or(|b| m.value < b.value) => best = Some(m),
                Some(_) => {}
                None => failures.push(format!("restart {restart}: initial point not factorizable")),
            }
        }
        let Some(best) = best else {
            return Err(Error::Training(format!(
                "all {} restarts failed (n = {}, d = {d}): {}",
                options.restarts,
                inputs.nrows(),
                failures.join("; ")
            )));
        };
        log::debug!(
            "GP n = {} d = {d}: -lml {:.6e} after {} iterations (converged: {})",
            inputs.nrows(),
            best.value,
            best.iterations,
            best.converged
        );
        Self::fit_with(inputs, targets, GprHyperparams::from_log(&best.x))
    }

    pub fn hyper(&self) -> &GprHyperparams {
        &self.hyper
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Lower-triangular factor of the regularized kernel matrix.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Validation(format!(
                "prediction point has {} coordinates, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn cross(&self, x: &[f64]) -> Vec<f64> {
        correlation_row(DVector::from_column_slice(x).column(0), &self.inputs, &self.inv_l2)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_point(x)?;
        let sf2 = self.hyper.signal_std.powi(2);
        let k = DVector::from_vec(self.cross(x)) * sf2;
        let mean = self.hyper.mean_const + k.dot(&self.alpha);
        let v = self
            .chol
            .solve_lower_triangular(&k)
            .ok_or_else(|| Error::Numerical("singular stored Cholesky factor".into()))?;
        let variance = (sf2 - v.norm_squared()).clamp(0.0, sf2);
        Ok(Prediction { mean, variance })
    }

    /// Posterior mean only; skips the triangular solve.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let sf2 = self.hyper.signal_std.powi(2);
        let dot: f64 = self.cross(x).iter().zip(self.alpha.iter()).map(|(k, a)| k * a).sum();
        Ok(self.hyper.mean_const + sf2 * dot)
    }

    /// Posterior means at every row of `points`.
    pub fn predict_means(&self, points: &DMatrix<f64>) -> Result<DVector<f64>> {
        if points.ncols() != self.input_dim() {
            return Err(Error::Validation(format!(
                "prediction points have {} columns, model expects {}",
                points.ncols(),
                self.input_dim()
            )));
        }
        let k = correlation(points, &self.inputs, &self.hyper.lengthscales);
        let sf2 = self.hyper.signal_std.powi(2);
        Ok((k * &self.alpha * sf2).add_scalar(self.hyper.mean_const))
    }

    /// Write the model into `dir` (created if needed).
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let record = ModelRecord {
            n: self.inputs.nrows(),
            d: self.inputs.ncols(),
            jitter: self.jitter,
            log_likelihood: self.log_likelihood,
            hyper: self.hyper.clone(),
        };
        let text = toml::to_string(&record).map_err(|e| Error::Numerical(format!("serializing GP record: {e}")))?;
        let path = dir.join(RECORD_FILE);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let targets = DMatrix::from_column_slice(self.targets.len(), 1, self.targets.as_slice());
        let alpha = DMatrix::from_column_slice(self.alpha.len(), 1, self.alpha.as_slice());
        for (name, m) in MATRIX_FILES.iter().zip([&self.inputs, &targets, &self.chol, &alpha]) {
            save_matrix(dir.join(name), m)?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(RECORD_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let record: ModelRecord = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.clone(),
            detail: e.to_string(),
        })?;
        let [inputs, targets, chol, alpha] = MATRIX_FILES.map(|name| load_matrix(dir.join(name)));
        let (inputs, targets, chol, alpha) = (inputs?, targets?, chol?, alpha?);
        let (n, d) = (record.n, record.d);
        let shapes_ok = inputs.shape() == (n, d)
            && targets.shape() == (n, 1)
            && chol.shape() == (n, n)
            && alpha.shape() == (n, 1);
        if !shapes_ok || record.hyper.validate(d).is_err() {
            return Err(Error::Format {
                path,
                detail: format!("stored matrices or hyperparameters inconsistent with n = {n}, d = {d}"),
            });
        }
        Ok(Self::assemble(
            inputs,
            targets.column(0).into_owned(),
            record.hyper,
            record.jitter,
            record.log_likelihood,
            chol,
            alpha.column(0).into_owned(),
        ))
    }
}

/// Reference posterior through an explicitly inverted kernel matrix. Test oracle only.
#[cfg(test)]
fn dense_posterior(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    hyper: &GprHyperparams,
    jitter: f64,
    x: &[f64],
) -> (f64, f64) {
    let n = inputs.nrows();
    let row = |i: usize| inputs.row(i).iter().copied().collect::<Vec<_>>();
    let mut k = DMatrix::from_fn(n, n, |i, j| hyper.kernel(&row(i), &row(j)));
    for i in 0..n {
        k[(i, i)] += hyper.noise_std.powi(2) + jitter;
    }
    let k_inv = k.try_inverse().unwrap();
    let ones = DVector::from_element(n, 1.0);
    let beta = (ones.transpose() * &k_inv * targets)[0] / (ones.transpose() * &k_inv * &ones)[0];
    let ks = DVector::from_fn(n, |i, _| hyper.kernel(x, &row(i)));
    let mean = beta + (ks.transpose() * &k_inv * targets.add_scalar(-beta))[0];
    let var = hyper.kernel(x, x) - (ks.transpose() * &k_inv * &ks)[0];
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hyper(ls: Vec<f64>, sf: f64, sy: f64) -> GprHyperparams {
        GprHyperparams {
            mean_const: 0.0,
            lengthscales: ls,
            signal_std: sf,
            noise_std: sy,
        }
    }

    fn line(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64)
    }

    #[test]
    fn three_point_posterior_matches_dense_oracle() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.5, -0.4, 1.2]);
        let y = DVector::from_row_slice(&[0.3, -1.1, 2.0]);
        let h = hyper(vec![0.8, 1.4], 1.5, 0.1);
        let model = GprModel::fit_with(x.clone(), y.clone(), h.clone()).unwrap();
        for p in [[0.2, 0.3], [1.0, 0.5], [-2.0, 3.0]] {
            let got = model.predict(&p).unwrap();
            let (mean, var) = dense_posterior(&x, &y, &h, model.jitter(), &p);
            assert!((got.mean - mean).abs() < 1e-10, "{} vs {mean}", got.mean);
            assert!((got.variance - var).abs() < 1e-10, "{} vs {var}", got.variance);
        }
    }

    #[test]
    fn chol_reproduces_kernel_matrix() {
        let x = line(8);
        let y = x.column(0).map(|t| t * t);
        let h = hyper(vec![0.3], 2.0, 0.05);
        let model = GprModel::fit_with(x.clone(), y, h.clone()).unwrap();
        let mut k = correlation(&x, &x, &h.lengthscales) * 4.0;
        for i in 0..8 {
            k[(i, i)] += 0.05f64.powi(2) + model.jitter();
        }
        let l = model.chol();
        assert!((l * l.transpose() - &k).norm() <= 1e-10 * k.norm());
    }

    #[test]
    fn noise_free_interpolation() {
        let x = line(12);
        let y = x.column(0).map(|t| (3.0 * t).cos() * 4.0);
        let model = GprModel::fit_with(x.clone(), y.clone(), hyper(vec![0.2], 2.0, 0.0)).unwrap();
        assert!(model.jitter() <= 1e-10 * 4.0 * (1.0 + 1e-12));
        for i in 0..12 {
            let p = model.predict(&[x[(i, 0)]]).unwrap();
            assert!((p.mean - y[i]).abs() <= 1e-6 * (1.0 + y[i].abs()));
            assert!(p.variance <= 1e-8);
        }
    }

    #[test]
    fn far_away_reverts_to_prior() {
        let x = line(6);
        let y = x.column(0).map(|t| t.sin());
        let model = GprModel::fit_with(x, y, hyper(vec![0.5], 1.7, 0.01)).unwrap();
        let p = model.predict(&[1e3]).unwrap();
        assert!((p.mean - model.hyper().mean_const).abs() < 1e-6);
        assert!((p.variance - 1.7f64.powi(2)).abs() < 1e-6);
    }

    #[test]
    fn constant_targets_are_reproduced() {
        let x = line(10);
        let y = DVector::from_element(10, 7.0);
        let model = GprModel::train(x, y, &GprOptions::default()).unwrap();
        for t in [-0.5, 0.05, 0.37, 0.99, 3.0] {
            assert!((model.predict_mean(&[t]).unwrap() - 7.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn sine_recovered_between_samples() {
        let x = line(30);
        let y = x.column(0).map(|t| (2.0 * std::f64::consts::PI * t).sin());
        let model = GprModel::train(x.clone(), y.clone(), &GprOptions::default()).unwrap();
        for i in 0..29 {
            let t = (x[(i, 0)] + x[(i + 1, 0)]) / 2.0;
            let got = model.predict_mean(&[t]).unwrap();
            let (oracle, _) = dense_posterior(&x, &y, model.hyper(), model.jitter(), &[t]);
            // near-noiseless fit: the explicit inverse only carries a few digits
            assert!((got - oracle).abs() < 1e-5, "{got} vs {oracle}");
            assert!((got - (2.0 * std::f64::consts::PI * t).sin()).abs() < 1e-3, "t = {t}: {got}");
        }
    }

    #[test]
    fn more_restarts_never_hurt() {
        let x = DMatrix::from_fn(15, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 10.0);
        let y = DVector::from_fn(15, |i, _| (x[(i, 0)] * 5.0).sin() + x[(i, 1)]);
        let opts = |restarts| GprOptions {
            restarts,
            max_iters: 100,
            seed: 42,
        };
        let one = GprModel::train(x.clone(), y.clone(), &opts(1)).unwrap();
        let five = GprModel::train(x, y, &opts(5)).unwrap();
        assert!(five.log_likelihood() >= one.log_likelihood());
    }

    #[test]
    fn trained_likelihood_beats_initialization() {
        let x = line(20);
        let y = x.column(0).map(|t| (6.0 * t).sin() + 0.5 * t);
        let model = GprModel::train(x.clone(), y.clone(), &GprOptions::default()).unwrap();
        let init = hyper(vec![1.0], target_scale(&y), 1e-2 * target_scale(&y));
        let init_ll = log_marginal_likelihood(&init, &x, &y).unwrap().value;
        assert!(model.log_likelihood() >= init_ll);
    }

    #[test]
    fn batch_and_single_means_agree() {
        let x = line(9);
        let y = x.column(0).map(|t| t.exp());
        let model = GprModel::fit_with(x, y, hyper(vec![0.4], 1.0, 1e-3)).unwrap();
        let pts = DMatrix::from_column_slice(4, 1, &[0.1, 0.55, 0.9, 1.3]);
        let batch = model.predict_means(&pts).unwrap();
        for i in 0..4 {
            let single = model.predict_mean(&[pts[(i, 0)]]).unwrap();
            assert!((batch[i] - single).abs() < 1e-12);
            assert!((single - model.predict(&[pts[(i, 0)]]).unwrap().mean).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 0.0]);
        let y = DVector::from_row_slice(&[1.0, 2.0]);
        assert!(GprModel::train(x, y, &GprOptions::default()).is_err());
        let one = GprModel::train(line(2).rows(0, 1).into_owned(), DVector::from_element(1, 1.0), &GprOptions::default());
        assert!(matches!(one, Err(Error::Validation(_))));
        let model = GprModel::fit_with(line(3), DVector::from_element(3, 1.0), hyper(vec![1.0], 1.0, 0.1)).unwrap();
        assert!(model.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = DMatrix::from_fn(7, 2, |i, j| (i + 2 * j) as f64 * 0.3);
        let y = DVector::from_fn(7, |i, _| (i as f64).sqrt());
        let model = GprModel::fit_with(x, y, hyper(vec![0.7, 1.1], 1.2, 0.02)).unwrap();
        model.save(dir.path().join("gp")).unwrap();
        let back = GprModel::load(dir.path().join("gp")).unwrap();
        assert_eq!(back.hyper(), model.hyper());
        let p = [0.4, 0.9];
        assert_eq!(back.predict(&p).unwrap(), model.predict(&p).unwrap());
        std::fs::remove_file(dir.path().join("gp/alpha.fmx")).unwrap();
        assert!(matches!(GprModel::load(dir.path().join("gp")).unwrap_err().root(), Error::Io { .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn variance_within_prior_bounds(
            xs in proptest::collection::vec(-3.0f64..3.0, 5),
            q in -10.0f64..10.0,
            ls in 0.1f64..3.0,
            sf in 0.1f64..3.0,
        ) {
            let x = DMatrix::from_column_slice(5, 1, &xs);
            let y = DVector::from_fn(5, |i, _| xs[i].sin());
            if let Ok(model) = GprModel::fit_with(x, y, hyper(vec![ls], sf, 0.05)) {
                let p = model.predict(&[q]).unwrap();
                prop_assert!(p.variance >= 0.0 && p.variance <= sf * sf);
            }
        }

        #[test]
        fn shifting_targets_shifts_means(
            shift in -100.0f64..100.0,
            q in -1.0f64..2.0,
        ) {
            let x = line(8);
            let y = x.column(0).map(|t| (4.0 * t).sin());
            let h = hyper(vec![0.3], 1.0, 0.01);
            let a = GprModel::fit_with(x.clone(), y.clone(), h.clone()).unwrap();
            let b = GprModel::fit_with(x, y.add_scalar(shift), h).unwrap();
            let (pa, pb) = (a.predict(&[q]).unwrap(), b.predict(&[q]).unwrap());
            prop_assert!((pb.mean - pa.mean - shift).abs() <= 1e-9 * (1.0 + shift.abs()));
            prop_assert!((pb.variance - pa.variance).abs() <= 1e-10);
        }
    }
}
