//! Small dense kernels shared by the approximators, estimators and oracles.

use nalgebra::{DMatrix, DVector};

/// Thin Householder QR with the convention that `R` has a nonnegative diagonal.
///
/// For an `m x n` input returns `Q` (`m x k`) and `R` (`k x n`), `k = min(m, n)`.
/// The sign convention makes the factorization unique for full-column-rank input.
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows().min(r.ncols()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    (q, r)
}

/// Solves `R X = B` for upper-triangular `R`. `None` on an exactly zero pivot.
pub fn solve_upper(r: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if (0..r.nrows()).any(|i| r[(i, i)] == 0.0) {
        return None;
    }
    r.solve_upper_triangular(b)
}

/// Solves `R* X = B` for upper-triangular `R`.
pub fn solve_upper_transpose(r: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if (0..r.nrows()).any(|i| r[(i, i)] == 0.0) {
        return None;
    }
    r.tr_solve_upper_triangular(b)
}

/// Inverse through partial-pivoting LU.
pub fn lu_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().lu().try_inverse()
}

/// Solves `A x = b` through partial-pivoting LU.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Reciprocal 1-norm condition number from a matrix and its computed inverse.
pub fn rcond_1(a: &DMatrix<f64>, a_inv: &DMatrix<f64>) -> f64 {
    let k = norm_1(a) * norm_1(a_inv);
    if k.is_finite() && k > 0.0 {
        1.0 / k
    } else {
        0.0
    }
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// `sigma_min / sigma_max`, zero for a zero matrix.
pub fn rcond_2(a: &DMatrix<f64>) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if max > 0.0 => min / max,
        _ => 0.0,
    }
}

/// Frobenius error of the best rank-`k` approximation given the singular values.
pub fn tail_norm(singular_values: &[f64], k: usize) -> f64 {
    singular_values.iter().skip(k).map(|s| s * s).sum::<f64>().sqrt()
}

/// Copy of `a` without column `j`.
pub fn drop_column(a: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    a.clone().remove_column(j)
}

/// Copy of `a` without row `i` and column `j`.
pub fn drop_row_column(a: &DMatrix<f64>, i: usize, j: usize) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows() - 1, a.ncols() - 1, |p, q| {
        a[(p + usize::from(p >= i), q + usize::from(q >= j))]
    })
}

/// Relative Frobenius distance `‖a - b‖ / ‖b‖` (absolute when `b = 0`).
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let nb = b.norm();
    let d = (a - b).norm();
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |i, j| ((i * 31 + j * 17) % 11) as f64 - 5.0 + if i == j { 9.0 } else { 0.0 })
    }

    #[test]
    fn qr_has_positive_diagonal_and_reconstructs() {
        let a = sample(7, 4);
        let (q, r) = thin_qr(&a);
        assert_eq!((q.nrows(), q.ncols(), r.nrows(), r.ncols()), (7, 4, 4, 4));
        assert!(rel_diff(&(&q * &r), &a) < 1e-14);
        assert!((q.tr_mul(&q) - DMatrix::identity(4, 4)).norm() < 1e-14);
        for i in 0..4 {
            assert!(r[(i, i)] > 0.0);
        }
    }

    #[test]
    fn triangular_solves() {
        let (_, r) = thin_qr(&sample(6, 6));
        let b = sample(6, 2);
        let x = solve_upper(&r, &b).unwrap();
        assert!(rel_diff(&(&r * &x), &b) < 1e-13);
        let y = solve_upper_transpose(&r, &b).unwrap();
        assert!(rel_diff(&(r.transpose() * &y), &b) < 1e-13);
        let mut singular = r.clone();
        singular[(2, 2)] = 0.0;
        assert!(solve_upper(&singular, &b).is_none());
    }

    #[test]
    fn drop_row_column_matches_remove() {
        let a = sample(5, 5);
        let expected = a.clone().remove_row(1).remove_column(3);
        assert_eq!(drop_row_column(&a, 1, 3), expected);
    }

    #[test]
    fn rcond_of_identity_and_zero() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert_eq!(rcond_2(&i), 1.0);
        assert_eq!(rcond_1(&i, &i), 1.0);
        assert_eq!(rcond_2(&DMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn tail_norm_sums_trailing_squares() {
        assert!((tail_norm(&[3.0, 2.0, 1.0], 1) - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(tail_norm(&[3.0], 4), 0.0);
    }
}
