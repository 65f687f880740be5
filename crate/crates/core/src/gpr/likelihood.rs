//! Log marginal likelihood with the constant mean profiled out by generalized
//! least squares, and its analytic gradient in log-hyperparameter space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::correlation;
use super::GprHyperparams;
use crate::error::{Error, Result};

/// Relative jitter levels tried in order, as multiples of `mean(diag K)`.
pub(crate) const JITTER_LEVELS: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Cholesky factor of `K = sf^2 C + (sy^2 + jitter) I` at the smallest jitter level that works.
pub(crate) struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    /// Relative level `c`; the absolute jitter is `c (sf^2 + sy^2)`.
    pub level: f64,
    pub jitter: f64,
}

pub(crate) fn factorize(corr: &DMatrix<f64>, sf2: f64, sy2: f64) -> Result<Factor> {
    let diag = sf2 + sy2;
    for level in JITTER_LEVELS {
        let jitter = level * diag;
        let mut k = corr * sf2;
        for i in 0..k.nrows() {
            k[(i, i)] += sy2 + jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            return Ok(Factor { chol, level, jitter });
        }
    }
    Err(Error::Conditioning {
        jitter: JITTER_LEVELS[JITTER_LEVELS.len() - 1] * diag,
    })
}

/// Closed-form GLS estimate `1' K^-1 y / 1' K^-1 1` and the weighted residual `K^-1 (y - beta 1)`.
pub(crate) fn profile_mean(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> (f64, DVector<f64>) {
    let ones = DVector::from_element(y.len(), 1.0);
    let k_inv_1 = chol.solve(&ones);
    let k_inv_y = chol.solve(y);
    let beta = k_inv_y.sum() / k_inv_1.sum();
    let alpha = k_inv_y - k_inv_1 * beta;
    (beta, alpha)
}

/// Value, decomposition and gradient of the log marginal likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    /// `-1/2 r' K^-1 r` with `r = y - beta 1`.
    pub fit: f64,
    /// `-1/2 log|K|`.
    pub complexity: f64,
    /// Derivatives with respect to `[log l_1, .., log l_d, log sf, log sy]`.
    pub gradient: Vec<f64>,
    /// Profiled constant mean.
    pub beta: f64,
    pub jitter: f64,
}

/// Log marginal likelihood at the kernel hyperparameters of `hyper`.
///
/// `hyper.mean_const` is ignored: the constant mean is re-estimated in
/// closed form and returned in [`LogLikelihood::beta`].
pub fn log_marginal_likelihood(
    hyper: &GprHyperparams,
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
) -> Result<LogLikelihood> {
    hyper.validate(inputs.ncols())?;
    if inputs.nrows() != targets.len() || targets.is_empty() {
        return Err(Error::Validation(format!(
            "{} input rows for {} targets",
            inputs.nrows(),
            targets.len()
        )));
    }
    let corr = correlation(inputs, inputs, &hyper.lengthscales);
    evaluate(&corr, inputs, targets, hyper)
}

pub(crate) fn evaluate(
    corr: &DMatrix<f64>,
    inputs: &DMatrix<f64>,
    y: &DVector<f64>,
    hyper: &GprHyperparams,
) -> Result<LogLikelihood> {
    let n = y.len();
    let sf2 = hyper.signal_std * hyper.signal_std;
    let sy2 = hyper.noise_std * hyper.noise_std;
    let factor = factorize(corr, sf2, sy2)?;
    let (beta, alpha) = profile_mean(&factor.chol, y);

    let residual = y.add_scalar(-beta);
    let fit = -0.5 * residual.dot(&alpha);
    let l = factor.chol.l_dirty();
    let complexity = -(0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
    let value = fit + complexity - 0.5 * n as f64 * LN_2PI;

    // dL/dp = 1/2 tr((a a' - K^-1) dK/dp); beta is stationary so needs no chain term
    let mut a = factor.chol.inverse();
    a.neg_mut();
    a.ger(1.0, &alpha, &alpha, 1.0);

    let c = factor.level;
    let d = inputs.ncols();
    let mut gradient = vec![0.0; d + 2];
    for (m, g) in gradient.iter_mut().enumerate().take(d) {
        let inv_l2 = 1.0 / (hyper.lengthscales[m] * hyper.lengthscales[m]);
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let diff = inputs[(i, m)] - inputs[(j, m)];
                acc += a[(i, j)] * corr[(i, j)] * diff * diff;
            }
        }
        *g = 0.5 * sf2 * inv_l2 * acc;
    }
    let trace_a = a.trace();
    let a_dot_c = a.dot(corr);
    gradient[d] = sf2 * (a_dot_c + c * trace_a);
    gradient[d + 1] = sy2 * (1.0 + c) * trace_a;

    Ok(LogLikelihood {
        value,
        fit,
        complexity,
        gradient,
        beta,
        jitter: factor.jitter,
    })
}
