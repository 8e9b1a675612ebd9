//! Brute-force leave-one-out estimators and rank-one replicate updates.
//!
//! The naïve estimators rebuild every replicate from its own reduced sketch:
//! a fresh core assembled from the retained sample vectors and a fresh LU or
//! QR factorization of it. They share no algebra with the fast formulas in
//! [`crate::estimators`], which makes them usable as independent oracles.
//!
//! The replicate-update functions go the other way: they start from the full
//! factors and subtract a rank-one correction. Both families are checked
//! against dense from-scratch replicates ([`replicate_from_scratch`]).
//!
//! Indices are zero-based throughout.

use nalgebra::{DMatrix, DVector};

use crate::approximators::{generalized_nystrom, gn_dense, nystrom, GNFactors, NystromFactors};
use crate::error::{Error, Result};
use crate::estimators::{gram_inverse, DEGENERACY_FLOOR};
use crate::linalg::{drop_column, drop_row_column, lu_inverse, lu_solve, solve_upper, thin_qr};
use crate::operator::LinearOperator;
use crate::sketching::SketchPair;

/// Which sample vectors a replicate omits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplicateSpec {
    /// Left vector `left` and right vector `right`.
    Pair { left: usize, right: usize },
    /// Left and right vectors sharing index `j`.
    Twin(usize),
    /// Right vector `j` only.
    Right(usize),
}

impl ReplicateSpec {
    pub fn validate(&self, s: usize, r: usize) -> Result<()> {
        let ok = match *self {
            ReplicateSpec::Pair { left, right } => left < r && right < s,
            ReplicateSpec::Twin(j) => j < s && j < r,
            ReplicateSpec::Right(j) => j < s,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!("{self:?} out of range for s = {s}, r = {r}")))
        }
    }

    fn left(&self) -> Option<usize> {
        match *self {
            ReplicateSpec::Pair { left, .. } => Some(left),
            ReplicateSpec::Twin(j) => Some(j),
            ReplicateSpec::Right(_) => None,
        }
    }

    fn right(&self) -> usize {
        match *self {
            ReplicateSpec::Pair { right, .. } => right,
            ReplicateSpec::Twin(j) | ReplicateSpec::Right(j) => j,
        }
    }
}

fn check_sketch_shapes(a: &dyn LinearOperator, omega: &DMatrix<f64>, phi: Option<&DMatrix<f64>>) -> Result<()> {
    if omega.nrows() != a.ncols() || omega.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!("Ω is {}x{} for {} columns", omega.nrows(), omega.ncols(), a.ncols())));
    }
    if let Some(phi) = phi {
        if phi.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!("Φ is {}x{} for {} rows", phi.nrows(), phi.ncols(), a.nrows())));
        }
    }
    Ok(())
}

/// Solves a replicate's square core system, or reports the replicate singular.
fn replicate_solve(core: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    lu_solve(core, rhs).ok_or(Error::SingularCore { rcond: 0.0 })
}

/// Per-index residual norms `‖(A - Ã_{-j}) ω_j‖` of the Nyström replicates.
pub fn loo_nystrom_naive_terms(a: &dyn LinearOperator, omega: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_sketch_shapes(a, omega, None)?;
    let s = omega.ncols();
    let y = a.apply_block(omega);
    let mut terms = DVector::zeros(s);
    for j in 0..s {
        let aw = y.column(j).into_owned();
        if s == 1 {
            terms[j] = aw.norm();
            continue;
        }
        let omega_rest = drop_column(omega, j);
        let y_rest = drop_column(&y, j);
        let core = omega_rest.tr_mul(&y_rest);
        let coeffs = replicate_solve(&core, &y_rest.tr_mul(&omega.column(j)))?;
        terms[j] = (aw - &y_rest * coeffs).norm();
    }
    Ok(terms)
}

/// Nyström LOO by recomputing each of the `s` replicates.
pub fn loo_nystrom_naive(a: &dyn LinearOperator, omega: &DMatrix<f64>) -> Result<f64> {
    let terms = loo_nystrom_naive_terms(a, omega)?;
    Ok(root_mean_square(&terms))
}

fn root_mean_square(terms: &DVector<f64>) -> f64 {
    (terms.iter().map(|t| t * t).sum::<f64>() / terms.len() as f64).sqrt()
}

/// All pairwise sample products `ϕ_l* A ω_j` (`r x s`), from one access to `A`.
fn sample_products(a: &dyn LinearOperator, omega: &DMatrix<f64>, phi: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let y = a.apply_block(omega);
    let products = phi.tr_mul(&y);
    (y, products)
}

/// `|ϕ_l*(A - Â_{-l,-j}) ω_j|` for one pair, with a fresh core and LU.
fn pair_term(products: &DMatrix<f64>, left: usize, right: usize) -> Result<f64> {
    let s = products.ncols();
    let direct = products[(left, right)];
    if s == 1 {
        return Ok(direct.abs());
    }
    let core = drop_row_column(products, left, right);
    // Φ_{-l}* A ω_j and ϕ_l* A Ω_{-j}
    let rhs = DVector::from_iterator(s - 1, (0..s).filter(|&i| i != left).map(|i| products[(i, right)]));
    let row = DVector::from_iterator(s - 1, (0..s).filter(|&k| k != right).map(|k| products[(left, k)]));
    let coeffs = replicate_solve(&core, &rhs)?;
    Ok((direct - row.dot(&coeffs)).abs())
}

fn require_square(omega: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<()> {
    if omega.ncols() != phi.ncols() {
        return Err(Error::DiscrepancyViolation { s: omega.ncols(), r: phi.ncols() });
    }
    Ok(())
}

/// Term matrix of the naïve LPO, entry `(j, l)` for right index `j`, left index `l`.
pub fn lpo_naive_terms(a: &dyn LinearOperator, omega: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_sketch_shapes(a, omega, Some(phi))?;
    require_square(omega, phi)?;
    let s = omega.ncols();
    let (_, products) = sample_products(a, omega, phi);
    let mut terms = DMatrix::zeros(s, s);
    for j in 0..s {
        for l in 0..s {
            terms[(j, l)] = pair_term(&products, l, j)?;
        }
    }
    Ok(terms)
}

/// Leave-pair-out by recomputing all `s²` replicates.
pub fn lpo_naive(a: &dyn LinearOperator, omega: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<f64> {
    let terms = lpo_naive_terms(a, omega, phi)?;
    Ok(terms.norm() / omega.ncols() as f64)
}

/// Per-index terms `|ϕ_j*(A - Â_{-j,-j}) ω_j|` of the naïve LTO.
pub fn lto_naive_terms(a: &dyn LinearOperator, omega: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_sketch_shapes(a, omega, Some(phi))?;
    require_square(omega, phi)?;
    let (_, products) = sample_products(a, omega, phi);
    let s = omega.ncols();
    let mut terms = DVector::zeros(s);
    for j in 0..s {
        terms[j] = pair_term(&products, j, j)?;
    }
    Ok(terms)
}

/// Leave-twins-out by recomputing `s` replicates.
pub fn lto_naive(a: &dyn LinearOperator, omega: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<f64> {
    Ok(root_mean_square(&lto_naive_terms(a, omega, phi)?))
}

/// Per-index residual norms `‖(A - Â_{:,-j}) ω_j‖` of the naïve LRO.
pub fn lro_naive_terms(a: &dyn LinearOperator, omega: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_sketch_shapes(a, omega, Some(phi))?;
    let (s, r) = (omega.ncols(), phi.ncols());
    if r < s {
        return Err(Error::DiscrepancyViolation { s, r });
    }
    let (y, products) = sample_products(a, omega, phi);
    let mut terms = DVector::zeros(s);
    for j in 0..s {
        let aw = y.column(j).into_owned();
        if s == 1 {
            terms[j] = aw.norm();
            continue;
        }
        let core = drop_column(&products, j);
        let (q, rfac) = thin_qr(&core);
        let rhs = q.tr_mul(&products.columns(j, 1));
        let coeffs = solve_upper(&rfac, &rhs).ok_or(Error::RankDeficientCore { rcond: 0.0 })?;
        terms[j] = (aw - drop_column(&y, j) * coeffs).norm();
    }
    Ok(terms)
}

/// Leave-right-out by recomputing `s` replicates.
pub fn lro_naive(a: &dyn LinearOperator, omega: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<f64> {
    Ok(root_mean_square(&lro_naive_terms(a, omega, phi)?))
}

/// Dense replicate built from scratch by re-running the generalized Nyström
/// construction on the reduced sketches. The empty replicate is zero.
pub fn replicate_from_scratch(
    a: &dyn LinearOperator,
    omega: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    spec: ReplicateSpec,
) -> Result<DMatrix<f64>> {
    check_sketch_shapes(a, omega, Some(phi))?;
    spec.validate(omega.ncols(), phi.ncols())?;
    if omega.ncols() == 1 {
        return Ok(DMatrix::zeros(a.nrows(), a.ncols()));
    }
    let reduced_omega = drop_column(omega, spec.right());
    let reduced_phi = match spec.left() {
        Some(l) => drop_column(phi, l),
        None => phi.clone(),
    };
    let sketch = SketchPair {
        omega: reduced_omega,
        phi: reduced_phi,
        seed_omega: Default::default(),
        seed_phi: Default::default(),
    };
    Ok(gn_dense(&generalized_nystrom(a, &sketch)?))
}

/// Dense Nyström replicate on `Ω_{:,-j}`, built from scratch.
pub fn nystrom_replicate_from_scratch(a: &dyn LinearOperator, omega: &DMatrix<f64>, j: usize) -> Result<DMatrix<f64>> {
    check_sketch_shapes(a, omega, None)?;
    if j >= omega.ncols() {
        return Err(Error::DimensionMismatch(format!("index {j} out of range for s = {}", omega.ncols())));
    }
    if omega.ncols() == 1 {
        return Ok(DMatrix::zeros(a.nrows(), a.ncols()));
    }
    Ok(nystrom(a, &drop_column(omega, j))?.dense())
}

fn checked_divisor(x: f64) -> Result<f64> {
    if x.abs() < DEGENERACY_FLOOR {
        Err(Error::DegenerateEntry { value: x })
    } else {
        Ok(x)
    }
}

/// `Â_{-l,-j} = Â - t_l z_j* / [H^{-1}]_{j,l}` with `T = AΩH^{-1}` and
/// `Z = A*Φ H^{-*}` (so `z_j* = e_j* H^{-1} Φ*A`).
///
/// For `l = j` this is the twin update; for `l != j` the right factor is the
/// row of `H^{-1}` indexed by the omitted right vector.
pub fn replicate_update_pair(f: &GNFactors, j: usize, l: usize) -> Result<DMatrix<f64>> {
    let (s, r) = (f.s(), f.r());
    if r != s {
        return Err(Error::DiscrepancyViolation { s, r });
    }
    ReplicateSpec::Pair { left: l, right: j }.validate(s, r)?;
    let hinv = lu_inverse(f.h()).ok_or(Error::SingularCore { rcond: 0.0 })?;
    let pivot = checked_divisor(hinv[(j, l)])?;
    let t_l = f.range_sketch() * hinv.column(l);
    let z_j = hinv.row(j) * f.z();
    Ok(gn_dense(f) - t_l * z_j / pivot)
}

/// `Â_{:,-j} = Â - f_j g_j* / [(H*H)^{-1}]_{jj}` with `F = AΩ(H*H)^{-1}` and
/// `G = A*Φ(H†)*`.
pub fn replicate_update_right(f: &GNFactors, j: usize) -> Result<DMatrix<f64>> {
    ReplicateSpec::Right(j).validate(f.s(), f.r())?;
    let (gram_inv, _) = gram_inverse(f.h())?;
    let pivot = checked_divisor(gram_inv[(j, j)])?;
    let f_j = f.range_sketch() * gram_inv.column(j);
    // e_j* H† Φ*A = e_j* (H*H)^{-1} H* Φ*A
    let g_j = (gram_inv.row(j) * f.h().transpose()) * f.z();
    Ok(gn_dense(f) - f_j * g_j / pivot)
}

/// `Ã_{-j} = Ã - t_j t_j* / [H^{-1}]_{jj}` with `T = AΩH^{-1}`.
pub fn nystrom_replicate_update(f: &NystromFactors, j: usize) -> Result<DMatrix<f64>> {
    if j >= f.s() {
        return Err(Error::DimensionMismatch(format!("index {j} out of range for s = {}", f.s())));
    }
    let hinv = lu_inverse(&f.h).ok_or(Error::SingularCore { rcond: 0.0 })?;
    let pivot = checked_divisor(hinv[(j, j)])?;
    let t_j = &f.y * hinv.column(j);
    let update = &t_j * t_j.transpose() / pivot;
    let rep = f.dense() - update;
    Ok((&rep + rep.transpose()) * 0.5)
}

/// `H^{-1} - H^{-1} e_l e_j* H^{-1} / [H^{-1}]_{j,l}`: row `j` and column `l`
/// vanish and the rest is the inverse of `H` without row `l` and column `j`.
pub fn inverse_downdate(hinv: &DMatrix<f64>, j: usize, l: usize) -> Result<DMatrix<f64>> {
    let pivot = checked_divisor(hinv[(j, l)])?;
    Ok(hinv - hinv.column(l) * hinv.row(j) / pivot)
}

/// `(H*H)^{-1} - (H*H)^{-1} e_j e_j* (H*H)^{-1} / [(H*H)^{-1}]_{jj}`: row and
/// column `j` vanish and the rest is `(H_{:,-j}* H_{:,-j})^{-1}`.
pub fn gram_inverse_downdate(gram_inv: &DMatrix<f64>, j: usize) -> Result<DMatrix<f64>> {
    inverse_downdate(gram_inv, j, j)
}

/// `H† - (H*H)^{-1} e_j e_j* H† / [(H*H)^{-1}]_{jj}`: row `j` vanishes and
/// the rest is `(H_{:,-j})†`.
pub fn pinv_downdate(gram_inv: &DMatrix<f64>, h_pinv: &DMatrix<f64>, j: usize) -> Result<DMatrix<f64>> {
    let pivot = checked_divisor(gram_inv[(j, j)])?;
    Ok(h_pinv - gram_inv.column(j) * h_pinv.row(j) / pivot)
}

/// Inverse of a square `H` assembled blockwise from its leading
/// `(s-1) x (s-1)` block and the Schur complement of that block.
pub fn banachiewicz_inverse(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = h.nrows();
    if s != h.ncols() || s < 2 {
        return Err(Error::DimensionMismatch(format!("need a square core of size >= 2, got {}x{}", h.nrows(), h.ncols())));
    }
    let k = s - 1;
    let lead = h.view((0, 0), (k, k)).into_owned();
    let h1 = h.view((0, k), (k, 1)).into_owned();
    let h2 = h.view((k, 0), (1, k)).into_owned();
    let h3 = h[(k, k)];
    let lead_inv = lu_inverse(&lead).ok_or(Error::SingularCore { rcond: 0.0 })?;
    let schur = h3 - (&h2 * &lead_inv * &h1)[(0, 0)];
    let schur_inv = 1.0 / checked_divisor(schur)?;
    let left = &lead_inv * &h1; // H̄^{-1} h1
    let top = &h2 * &lead_inv; // h2 H̄^{-1}
    let mut out = DMatrix::zeros(s, s);
    out.view_mut((0, 0), (k, k)).copy_from(&(&lead_inv + &left * &top * schur_inv));
    out.view_mut((0, k), (k, 1)).copy_from(&(-&left * schur_inv));
    out.view_mut((k, 0), (1, k)).copy_from(&(-&top * schur_inv));
    out[(k, k)] = schur_inv;
    Ok(out)
}
