use nalgebra::{DMatrix, DVectorView};

/// ARD squared-exponential covariance `sf^2 exp(-1/2 sum_m (x_m - x'_m)^2 / l_m^2)`.
pub fn ard_se(x: &[f64], x_prime: &[f64], lengthscales: &[f64], signal_std: f64) -> f64 {
    debug_assert_eq!(x.len(), x_prime.len());
    debug_assert_eq!(x.len(), lengthscales.len());
    let r2: f64 = x
        .iter()
        .zip(x_prime)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let z = (a - b) / l;
            z * z
        })
        .sum();
    signal_std * signal_std * (-0.5 * r2).exp()
}

/// Unit-variance correlation matrix between the rows of `a` and `b`.
pub(crate) fn correlation(a: &DMatrix<f64>, b: &DMatrix<f64>, lengthscales: &[f64]) -> DMatrix<f64> {
    let inv: Vec<f64> = lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let mut r2 = 0.0;
        for (m, w) in inv.iter().enumerate() {
            let d = a[(i, m)] - b[(j, m)];
            r2 += d * d * w;
        }
        (-0.5 * r2).exp()
    })
}

/// Unit-variance correlation between a single point and every row of `rows`.
pub(crate) fn correlation_row(point: DVectorView<'_, f64>, rows: &DMatrix<f64>, inv_l2: &[f64]) -> Vec<f64> {
    (0..rows.nrows())
        .map(|i| {
            let mut r2 = 0.0;
            for (m, w) in inv_l2.iter().enumerate() {
                let d = rows[(i, m)] - point[m];
                r2 += d * d * w;
            }
            (-0.5 * r2).exp()
        })
        .collect()
}
