//! Proper orthogonal decomposition with the energy truncation criterion, and
//! the two-step variant that compresses each parameter's snapshots before
//! compressing their union.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense product `a * b`; faer's kernels are markedly faster than nalgebra's
/// for the tall-skinny shapes of field reconstruction.
pub(crate) fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    let (m, n) = out.shape();
    faer::linalg::matmul::matmul(
        faer::MatMut::from_column_major_slice_mut(out.as_mut_slice(), m, n),
        faer::Accum::Replace,
        faer::MatRef::from_column_major_slice(a.as_slice(), a.nrows(), a.ncols()),
        faer::MatRef::from_column_major_slice(b.as_slice(), b.nrows(), b.ncols()),
        1.0,
        faer::Par::Seq,
    );
    clear_upper_simd_state();
    out
}

/// faer's AVX kernels may return with the upper halves of the vector registers
/// dirty; every later SSE instruction on this thread then pays a state-transition
/// penalty (measured at 25x on GP prediction). `vzeroupper` resets the state.
fn clear_upper_simd_state() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        #[target_feature(enable = "avx")]
        unsafe fn zeroupper() {
            std::arch::x86_64::_mm256_zeroupper()
        }
        // SAFETY: AVX support was checked above.
        unsafe { zeroupper() }
    }
}

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Thin SVD with descending singular values and deterministic signs.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `m x k` left singular vectors, `k = min(m, n)`.
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `k x n` right singular vectors (transposed).
    pub v_t: DMatrix<f64>,
}

/// Thin SVD of `m`. Each left singular vector is flipped so that its entry of
/// largest magnitude is positive; the matching row of `v_t` is flipped with it.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("SVD input contains non-finite entries".into()));
    }
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(m.nrows(), 0),
            singular_values: Vec::new(),
            v_t: DMatrix::zeros(0, m.ncols()),
        });
    }
    // nalgebra's bidiagonal SVD returns wrong left vectors on some exactly
    // rank-deficient inputs, so the factorization itself is delegated to faer
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = fm
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")));
    clear_upper_simd_state();
    let svd = svd?;
    let (fu, fv, fs) = (svd.U(), svd.V(), svd.S().column_vector());
    let u = DMatrix::from_fn(m.nrows(), k, |i, j| fu[(i, j)]);
    let v_t = DMatrix::from_fn(k, m.ncols(), |i, j| fv[(j, i)]);
    let sigma: Vec<f64> = (0..k).map(|i| fs[i]).collect();

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let mut u_sorted = DMatrix::zeros(u.nrows(), k);
    let mut v_sorted = DMatrix::zeros(k, v_t.ncols());
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let pivot = col.iter().fold(0.0f64, |best, &v| {
            if v.abs() > best.abs() {
                v
            } else {
                best
            }
        });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        u_sorted.set_column(dst, &(col * sign));
        v_sorted.set_row(dst, &(v_t.row(src) * sign));
        values.push(sigma[src]);
    }
    Ok(ThinSvd {
        u: u_sorted,
        singular_values: values,
        v_t: v_sorted,
    })
}

/// Number of singular values above `RANK_CUTOFF * sigma_max`.
pub fn numerical_rank(singular_values: &[f64]) -> usize {
    let max = singular_values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .filter(|&&s| s > RANK_CUTOFF * max)
        .count()
}

/// Cumulative energy ratio `sum_{i<=d} s_i^2 / sum_{i<=r} s_i^2`.
pub fn energy_ratio(singular_values: &[f64], d: usize) -> f64 {
    let r = numerical_rank(singular_values);
    let total: f64 = singular_values[..r].iter().map(|s| s * s).sum();
    let head: f64 = singular_values[..d.min(r)].iter().map(|s| s * s).sum();
    head / total
}

/// Smallest `d` whose captured energy reaches `1 - epsilon`.
///
/// Evaluated as `tail(d) <= epsilon * total` with the tail summed from the
/// smallest value up, which is the same set in exact arithmetic.
pub fn energy_truncation(singular_values: &[f64], epsilon: f64) -> usize {
    let r = numerical_rank(singular_values);
    let energies: Vec<f64> = singular_values[..r].iter().map(|s| s * s).collect();
    let total: f64 = energies.iter().rev().sum();
    let mut tail = 0.0;
    let mut d = r;
    // walk down from d = r while dropping the next value keeps the tail in budget
    while d > 1 {
        let next = tail + energies[d - 1];
        if next <= epsilon * total {
            tail = next;
            d -= 1;
        } else {
            break;
        }
    }
    d
}

fn check_tolerance(name: &str, eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} = {eps} outside (0, 1)")))
    }
}

/// Result of [`pod_truncate`].
#[derive(Debug, Clone)]
pub struct PodTruncation {
    /// First `dim` left singular vectors.
    pub basis: DMatrix<f64>,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
    pub dim: usize,
    pub rank: usize,
}

/// POD of `matrix` truncated by the energy criterion at `epsilon`.
pub fn pod_truncate(matrix: &DMatrix<f64>, epsilon: f64) -> Result<PodTruncation> {
    check_tolerance("epsilon", epsilon)?;
    let svd = thin_svd(matrix)?;
    let rank = numerical_rank(&svd.singular_values);
    if rank == 0 {
        return Err(Error::Numerical(
            "cannot extract a basis from a zero matrix".into(),
        ));
    }
    let dim = energy_truncation(&svd.singular_values, epsilon);
    Ok(PodTruncation {
        basis: svd.u.columns(0, dim).into_owned(),
        singular_values: svd.singular_values,
        dim,
        rank,
    })
}

/// Ingredients of the two-step projection error bound
/// `sqrt(eps_t) * l1 + sqrt(eps_theta) * l2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBound {
    /// `(1 + ||Psi Psi^T||_F) * sum_j sqrt(N_l * sum_i (sigma_i^j)^2)`.
    pub l1: f64,
    /// `max_j sum_i ||S_j(:,i)|| * max ||T_j(:,i)|| * sqrt(N_u * sum_i sigma_i^2)`.
    pub l2: f64,
}

impl ProjectionBound {
    pub fn value(&self, tolerance_t: f64, tolerance_theta: f64) -> f64 {
        tolerance_t.sqrt() * self.l1 + tolerance_theta.sqrt() * self.l2
    }
}

/// Orthonormal, time- and parameter-independent reduced basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    /// `N_h x d` with orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Singular values of the concatenated first-step bases.
    pub singular_values: Vec<f64>,
    pub tolerance_t: f64,
    pub tolerance_theta: f64,
    pub first_step_dims: Vec<usize>,
    pub bound: ProjectionBound,
}

impl ReducedBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dofs(&self) -> usize {
        self.basis.nrows()
    }

    pub fn project(&self, field: &[f64]) -> Result<DVector<f64>> {
        project(&self.basis, field)
    }

    pub fn reconstruct(&self, coefficients: &[f64]) -> Result<DVector<f64>> {
        reconstruct(&self.basis, coefficients)
    }

    /// Right-hand side of the two-step projection bound.
    pub fn projection_bound(&self) -> f64 {
        self.bound.value(self.tolerance_t, self.tolerance_theta)
    }
}

/// Two-step POD: per-block truncation at `tolerance_t`, then POD of the
/// concatenated block bases at `tolerance_theta`.
pub fn two_step_pod(
    blocks: &[DMatrix<f64>],
    tolerance_t: f64,
    tolerance_theta: f64,
) -> Result<ReducedBasis> {
    check_tolerance("tolerance_t", tolerance_t)?;
    check_tolerance("tolerance_theta", tolerance_theta)?;
    let Some(first) = blocks.first() else {
        return Err(Error::Validation("no snapshot blocks".into()));
    };
    let dofs = first.nrows();
    if let Some(j) = blocks.iter().position(|b| b.nrows() != dofs) {
        return Err(Error::Validation(format!(
            "snapshot block {j} has {} rows, expected {dofs}",
            blocks[j].nrows()
        )));
    }

    let step1: Vec<PodTruncation> = blocks
        .par_iter()
        .enumerate()
        .map(|(j, block)| {
            pod_truncate(block, tolerance_t)
                .map_err(|e| e.context(format!("first-step POD of parameter block {j}")))
        })
        .collect::<Result<_>>()?;

    let first_step_dims: Vec<usize> = step1.iter().map(|p| p.dim).collect();
    let total: usize = first_step_dims.iter().sum();
    let mut composite = DMatrix::zeros(dofs, total);
    let mut offset = 0;
    for p in &step1 {
        composite.columns_mut(offset, p.dim).copy_from(&p.basis);
        offset += p.dim;
    }
    let step2 = pod_truncate(&composite, tolerance_theta)
        .map_err(|e| e.context("second-step POD of the composite basis"))?;

    let frob_projector = (step2.dim as f64).sqrt();
    let l1 = (1.0 + frob_projector)
        * blocks
            .iter()
            .zip(&step1)
            .map(|(b, p)| {
                let energy: f64 = p.singular_values.iter().map(|s| s * s).sum();
                (b.ncols() as f64 * energy).sqrt()
            })
            .sum::<f64>();
    let max_block_norm_sum = blocks
        .iter()
        .map(|b| b.column_iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let max_t_norm = composite
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let composite_energy: f64 = step2.singular_values.iter().map(|s| s * s).sum();
    let l2 = max_block_norm_sum * max_t_norm * (total as f64 * composite_energy).sqrt();

    Ok(ReducedBasis {
        basis: step2.basis,
        singular_values: step2.singular_values,
        tolerance_t,
        tolerance_theta,
        first_step_dims,
        bound: ProjectionBound { l1, l2 },
    })
}

/// Coefficients `Psi^T u`.
pub fn project(basis: &DMatrix<f64>, field: &[f64]) -> Result<DVector<f64>> {
    if field.len() != basis.nrows() {
        return Err(Error::Validation(format!(
            "field has {} entries, basis has {} rows",
            field.len(),
            basis.nrows()
        )));
    }
    Ok(basis.tr_mul(&DVector::from_column_slice(field)))
}

/// Field `Psi alpha`.
pub fn reconstruct(basis: &DMatrix<f64>, coefficients: &[f64]) -> Result<DVector<f64>> {
    if coefficients.len() != basis.ncols() {
        return Err(Error::Validation(format!(
            "{} coefficients for a basis of dimension {}",
            coefficients.len(),
            basis.ncols()
        )));
    }
    Ok(basis * DVector::from_column_slice(coefficients))
}

/// Sum over columns of `||s - Psi Psi^T s||^2`.
pub fn squared_projection_residual(basis: &DMatrix<f64>, snapshots: &DMatrix<f64>) -> f64 {
    let coeffs = basis.tr_mul(snapshots);
    (snapshots - basis * coeffs).norm_squared()
}

/// Sum over columns of `||s - Psi Psi^T s||` (the unsquared quantity bounded
/// by [`ReducedBasis::projection_bound`]).
pub fn projection_residual_norm_sum(basis: &DMatrix<f64>, snapshots: &DMatrix<f64>) -> f64 {
    let coeffs = basis.tr_mul(snapshots);
    (snapshots - basis * coeffs)
        .column_iter()
        .map(|c| c.norm())
        .sum()
}

/// Sine of the largest principal angle between the column spaces of two
/// orthonormal bases of equal dimension.
pub fn max_principal_angle_sin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let residual = b - a * a.tr_mul(b);
    residual
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
        (q.tr_mul(q) - DMatrix::identity(q.ncols(), q.ncols())).amax()
    }

    #[test]
    fn rank_one_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let pod = pod_truncate(&m, 1e-6).unwrap();
        assert_eq!(pod.dim, 1);
        assert_eq!(pod.rank, 1);
        let expected = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
        assert!((pod.basis[(0, 0)] - expected[0]).abs() < 1e-14);
        assert!((pod.basis[(1, 0)] - expected[1]).abs() < 1e-14);
    }

    #[test]
    fn diagonal_energy_threshold() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let pod = pod_truncate(&m, 0.25).unwrap();
        // E(1) = 4/5 >= 0.75
        assert_eq!(pod.dim, 1);
        assert!((energy_ratio(&pod.singular_values, 1) - 0.8).abs() < 1e-15);
        // 1/5 is exactly at the boundary for eps = 0.2: ties count as reached
        assert_eq!(energy_truncation(&[2.0, 1.0], 0.2), 1);
        assert_eq!(energy_truncation(&[2.0, 1.0], 0.19), 2);
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let err = pod_truncate(&DMatrix::zeros(3, 2), 0.1).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert!(pod_truncate(&DMatrix::identity(2, 2), 0.0).is_err());
        assert!(pod_truncate(&DMatrix::identity(2, 2), 1.0).is_err());
    }

    #[test]
    fn residual_identity_on_random_matrix() {
        let m = random(30, 20, 7);
        let pod = pod_truncate(&m, 1e-14).unwrap();
        assert_eq!(pod.dim, 20);
        for eps in [1e-14, 1e-3, 0.1, 0.5] {
            let pod = pod_truncate(&m, eps).unwrap();
            let tail: f64 = pod.singular_values[pod.dim..].iter().map(|s| s * s).sum();
            let measured = squared_projection_residual(&pod.basis, &m);
            let scale = m.norm_squared();
            assert!((measured - tail).abs() <= 1e-10 * scale, "eps {eps}");
            assert!(orthonormality_error(&pod.basis) < 1e-12);
        }
    }

    #[test]
    fn numerical_rank_of_low_rank_product() {
        let m = random(30, 4, 1) * random(4, 20, 2);
        let pod = pod_truncate(&m, 1e-14).unwrap();
        assert_eq!(pod.rank, 4);
        assert_eq!(pod.dim, 4);
    }

    #[test]
    fn signs_are_deterministic() {
        let m = random(12, 5, 3);
        let svd = thin_svd(&m).unwrap();
        for col in svd.u.column_iter() {
            let pivot = col.iter().fold(0.0f64, |b, &v| if v.abs() > b.abs() { v } else { b });
            assert!(pivot > 0.0);
        }
        let rebuilt = &svd.u * DMatrix::from_diagonal(&DVector::from_vec(svd.singular_values.clone())) * &svd.v_t;
        assert!((rebuilt - m).amax() < 1e-12);
    }

    #[test]
    fn single_block_two_step_matches_single_step() {
        let m = random(40, 12, 11) * DMatrix::from_diagonal(&DVector::from_fn(12, |i, _| 0.5f64.powi(i as i32)));
        let direct = pod_truncate(&m, 1e-4).unwrap();
        let two = two_step_pod(&[m], 1e-4, 1e-15).unwrap();
        assert_eq!(two.dim(), direct.dim);
        assert!(max_principal_angle_sin(&direct.basis, &two.basis) <= 1e-8);
    }

    #[test]
    fn duplicate_blocks_add_no_directions() {
        let m = random(40, 10, 5) * DMatrix::from_diagonal(&DVector::from_fn(10, |i, _| 0.3f64.powi(i as i32)));
        let single = pod_truncate(&m, 1e-6).unwrap();
        let blocks = vec![m.clone(), m.clone(), m.clone(), m];
        let two = two_step_pod(&blocks, 1e-6, 1e-10).unwrap();
        assert_eq!(two.first_step_dims, vec![single.dim; 4]);
        assert_eq!(two.dim(), single.dim);
    }

    #[test]
    fn two_step_matches_global_pod() {
        let blocks: Vec<_> = (0..5).map(|j| random(50, 10, 100 + j)).collect();
        let mut global = DMatrix::zeros(50, 50);
        for (j, b) in blocks.iter().enumerate() {
            global.columns_mut(10 * j, 10).copy_from(b);
        }
        let direct = pod_truncate(&global, 1e-12).unwrap();
        let two = two_step_pod(&blocks, 1e-12, 1e-12).unwrap();
        assert_eq!(two.dim(), direct.dim);
        assert!(max_principal_angle_sin(&direct.basis, &two.basis) <= 1e-6);
    }

    #[test]
    fn two_step_error_names_zero_block() {
        let blocks = vec![random(10, 3, 1), DMatrix::zeros(10, 3)];
        let err = two_step_pod(&blocks, 1e-3, 1e-3).unwrap_err();
        assert!(err.to_string().contains("block 1"));
    }

    #[test]
    fn two_step_bound_dominates_residual() {
        // decaying spectra so the truncation actually drops energy
        let blocks: Vec<_> = (0..4)
            .map(|j| {
                random(60, 12, 40 + j)
                    * DMatrix::from_diagonal(&DVector::from_fn(12, |i, _| 0.4f64.powi(i as i32)))
            })
            .collect();
        for (et, eth) in [(1e-2, 1e-2), (1e-3, 1e-4), (1e-6, 1e-8)] {
            let rb = two_step_pod(&blocks, et, eth).unwrap();
            let measured: f64 = blocks
                .iter()
                .map(|b| projection_residual_norm_sum(&rb.basis, b))
                .sum();
            assert!(measured <= rb.projection_bound() + 1e-9);
            assert!(orthonormality_error(&rb.basis) < 1e-12);
        }
    }

    #[test]
    fn monotone_in_tolerances() {
        let blocks: Vec<_> = (0..3)
            .map(|j| {
                random(30, 8, 70 + j)
                    * DMatrix::from_diagonal(&DVector::from_fn(8, |i, _| 0.5f64.powi(i as i32)))
            })
            .collect();
        let tols = [1e-1, 1e-2, 1e-3, 1e-4, 1e-6];
        let dims: Vec<usize> = tols
            .iter()
            .map(|&e| two_step_pod(&blocks, e, 1e-3).unwrap().dim())
            .collect();
        assert!(dims.windows(2).all(|w| w[1] >= w[0]), "{dims:?}");
        let dims: Vec<usize> = tols
            .iter()
            .map(|&e| two_step_pod(&blocks, 1e-3, e).unwrap().dim())
            .collect();
        assert!(dims.windows(2).all(|w| w[1] >= w[0]), "{dims:?}");
    }

    #[test]
    fn projection_and_reconstruction() {
        let q = thin_svd(&random(20, 4, 9)).unwrap().u;
        // in-span idempotence
        let alpha = [0.3, -1.2, 2.0, 0.7];
        let u = reconstruct(&q, &alpha).unwrap();
        let back = project(&q, u.as_slice()).unwrap();
        for (a, b) in alpha.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let again = reconstruct(&q, back.as_slice()).unwrap();
        assert!((&again - &u).norm() <= 1e-10 * u.norm());

        // e_k picks column k, zero gives zero
        let e2 = reconstruct(&q, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(e2, q.column(2).into_owned());
        assert_eq!(reconstruct(&q, &[0.0; 4]).unwrap().norm(), 0.0);

        // orthogonal complement projects to zero
        let v = DVector::from_fn(20, |i, _| (i as f64).cos());
        let w = &v - &q * q.tr_mul(&v);
        assert!(project(&q, w.as_slice()).unwrap().norm() < 1e-12);

        // Pythagoras
        let p = &q * project(&q, v.as_slice()).unwrap();
        let lhs = (&v - &p).norm_squared() + p.norm_squared();
        assert!((lhs - v.norm_squared()).abs() <= 1e-10 * v.norm_squared());

        assert!(project(&q, &[1.0; 3]).is_err());
        assert!(reconstruct(&q, &[1.0; 3]).is_err());
    }
}
