//! Fast leave-one-out replicate formulas.
//!
//! Each estimator reads only the small precomputed factors (the core `H` and,
//! for LOO and LRO, the R factor of the range sketch). None of them touches
//! the target matrix again.
//!
//! All four values use the root-sum-of-squares normalization
//! `(1/√s)(Σ e_j²)^{1/2}` (LPO: `(1/s)(Σ e_{jl}²)^{1/2}`).

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_inverse, rcond_1, solve_upper, thin_qr};

/// Square cores with a 1-norm reciprocal condition below this are singular.
pub const SINGULAR_RCOND: f64 = 1e-14;

/// Reciprocals of entries smaller than this in magnitude are taken as `+inf`.
pub const DEGENERACY_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EstimatorKind {
    Loo,
    Lpo,
    Lto,
    Lro,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Loo => "LOO",
            EstimatorKind::Lpo => "LPO",
            EstimatorKind::Lto => "LTO",
            EstimatorKind::Lro => "LRO",
        }
    }

    /// LPO and LTO need a square core (`r = s`).
    pub fn requires_square_core(self) -> bool {
        matches!(self, EstimatorKind::Lpo | EstimatorKind::Lto)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LOO" => Ok(EstimatorKind::Loo),
            "LPO" => Ok(EstimatorKind::Lpo),
            "LTO" => Ok(EstimatorKind::Lto),
            "LRO" => Ok(EstimatorKind::Lro),
            other => Err(Error::Config(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub kind: EstimatorKind,
    /// Estimated Frobenius error; `+inf` when a denominator underflows.
    pub value: f64,
    /// Reciprocal 1-norm condition estimate of the core (of `R_H` for LRO).
    pub rcond_h: f64,
    /// Smallest `|x|` among the entries whose reciprocal enters the estimate.
    pub min_abs_reciprocal_arg: f64,
    pub degenerate: bool,
    pub elapsed: Duration,
}

/// Accumulates `Σ (scale_j / x_j)²` style sums, tracking degeneracy.
struct ReciprocalSum {
    sum: f64,
    min_abs: f64,
    degenerate: bool,
}

impl ReciprocalSum {
    fn new() -> Self {
        ReciprocalSum { sum: 0.0, min_abs: f64::INFINITY, degenerate: false }
    }

    /// Adds `(numerator / x)²`.
    fn add(&mut self, numerator: f64, x: f64) {
        self.min_abs = self.min_abs.min(x.abs());
        if x.abs() < DEGENERACY_FLOOR {
            self.degenerate = true;
        } else {
            let v = numerator / x;
            self.sum += v * v;
        }
    }

    fn finish(self, normalization: f64) -> (f64, f64, bool) {
        let value = if self.degenerate { f64::INFINITY } else { self.sum.sqrt() / normalization };
        (value, self.min_abs, self.degenerate)
    }
}

fn square_core_inverse(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if h.nrows() != h.ncols() {
        return Err(Error::DiscrepancyViolation { s: h.ncols(), r: h.nrows() });
    }
    if h.is_empty() {
        return Err(Error::DimensionMismatch("empty core".into()));
    }
    let inv = lu_inverse(h).ok_or(Error::SingularCore { rcond: 0.0 })?;
    let rcond = rcond_1(h, &inv);
    Ok((inv, rcond))
}

/// Applies the conditioning floor. The fast estimators call this only after
/// forming the estimate, so their cost does not depend on the outcome.
fn check_floor(report: EstimateReport) -> Result<EstimateReport> {
    if report.rcond_h >= SINGULAR_RCOND {
        return Ok(report);
    }
    let rcond = report.rcond_h;
    Err(match report.kind {
        EstimatorKind::Lro => Error::RankDeficientCore { rcond },
        _ => Error::SingularCore { rcond },
    })
}

/// `‖M diag(1/M_jj)‖_F` accumulated column by column, where `M = left * inv`.
fn scaled_columns_sum(product: &DMatrix<f64>, diag_source: &DMatrix<f64>) -> ReciprocalSum {
    let mut acc = ReciprocalSum::new();
    for j in 0..product.ncols() {
        acc.add(product.column(j).norm(), diag_source[(j, j)]);
    }
    acc
}

/// Nyström LOO: `(1/√s)‖R H^{-1} diag(1/[H^{-1}]_jj)‖_F`.
pub fn loo_nystrom_fast(rfac: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    if rfac.ncols() != h.nrows() {
        return Err(Error::DimensionMismatch(format!("R is {}x{}, H is {}x{}", rfac.nrows(), rfac.ncols(), h.nrows(), h.ncols())));
    }
    let (hinv, rcond) = square_core_inverse(h)?;
    let acc = scaled_columns_sum(&(rfac * &hinv), &hinv);
    let (value, min_abs, degenerate) = acc.finish((h.ncols() as f64).sqrt());
    check_floor(EstimateReport {
        kind: EstimatorKind::Loo,
        value,
        rcond_h: rcond,
        min_abs_reciprocal_arg: min_abs,
        degenerate,
        elapsed: start.elapsed(),
    })
}

/// Leave-pair-out: `(1/s)‖{1/[H^{-1}]_{jl}}‖_F` over all `s²` entries.
pub fn lpo_fast(h: &DMatrix<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    let (hinv, rcond) = square_core_inverse(h)?;
    let mut acc = ReciprocalSum::new();
    for x in hinv.iter() {
        acc.add(1.0, *x);
    }
    let (value, min_abs, degenerate) = acc.finish(h.ncols() as f64);
    check_floor(EstimateReport {
        kind: EstimatorKind::Lpo,
        value,
        rcond_h: rcond,
        min_abs_reciprocal_arg: min_abs,
        degenerate,
        elapsed: start.elapsed(),
    })
}

/// Leave-twins-out: `(1/√s)‖diag(1/[H^{-1}]_jj)‖_F`.
pub fn lto_fast(h: &DMatrix<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    let (hinv, rcond) = square_core_inverse(h)?;
    let mut acc = ReciprocalSum::new();
    for j in 0..hinv.ncols() {
        acc.add(1.0, hinv[(j, j)]);
    }
    let (value, min_abs, degenerate) = acc.finish((h.ncols() as f64).sqrt());
    check_floor(EstimateReport {
        kind: EstimatorKind::Lto,
        value,
        rcond_h: rcond,
        min_abs_reciprocal_arg: min_abs,
        degenerate,
        elapsed: start.elapsed(),
    })
}

/// `(H*H)^{-1}` from the R factor of `H` as `R^{-1} R^{-*}`, plus the rcond of `R`.
fn gram_inverse_unchecked(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let s = h.ncols();
    let (_, core_r) = thin_qr(h);
    let core_r = core_r.rows(0, s).into_owned();
    let rinv = solve_upper(&core_r, &DMatrix::identity(s, s)).ok_or(Error::RankDeficientCore { rcond: 0.0 })?;
    let rcond = rcond_1(&core_r, &rinv);
    Ok((&rinv * rinv.transpose(), rcond))
}

/// [`gram_inverse_unchecked`] with the conditioning floor applied.
pub(crate) fn gram_inverse(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (inv, rcond) = gram_inverse_unchecked(h)?;
    if rcond < SINGULAR_RCOND {
        return Err(Error::RankDeficientCore { rcond });
    }
    Ok((inv, rcond))
}

/// Leave-right-out: `(1/√s)‖R_Ω (H*H)^{-1} diag(1/[(H*H)^{-1}]_jj)‖_F`.
pub fn lro_fast(r_omega: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    let (s, r) = (h.ncols(), h.nrows());
    if r < s {
        return Err(Error::DiscrepancyViolation { s, r });
    }
    if s == 0 || r_omega.ncols() != s {
        return Err(Error::DimensionMismatch(format!("R_Ω is {}x{}, H is {r}x{s}", r_omega.nrows(), r_omega.ncols())));
    }
    let (gram_inv, rcond) = gram_inverse_unchecked(h)?;
    let acc = scaled_columns_sum(&(r_omega * &gram_inv), &gram_inv);
    let (value, min_abs, degenerate) = acc.finish((s as f64).sqrt());
    check_floor(EstimateReport {
        kind: EstimatorKind::Lro,
        value,
        rcond_h: rcond,
        min_abs_reciprocal_arg: min_abs,
        degenerate,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximators::{generalized_nystrom, nystrom};
    use crate::sketching::{gaussian_sketch, haar_orthogonal, Seed, SketchPair};

    fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn lpo_hand_example() {
        let rep = lpo_fast(&m2(2.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((rep.value - 3.25f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((rep.value - 0.901388).abs() < 1e-6);
        assert!(!rep.degenerate);
        assert_eq!(rep.kind, EstimatorKind::Lpo);
    }

    #[test]
    fn lto_hand_examples() {
        let rep = lto_fast(&m2(2.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((rep.value - (1.25f64 / 2.0).sqrt()).abs() < 1e-14);
        assert!((rep.value - 0.790569).abs() < 1e-6);
        let rep = lto_fast(&(DMatrix::identity(4, 4) * 2.0)).unwrap();
        assert!((rep.value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_cores_collapse() {
        let h = DMatrix::from_element(1, 1, -3.5);
        assert!((lpo_fast(&h).unwrap().value - 3.5).abs() < 1e-15);
        assert!((lto_fast(&h).unwrap().value - 3.5).abs() < 1e-15);
        let tall = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        let rho = DMatrix::from_element(1, 1, 4.25);
        assert!((lro_fast(&rho, &tall).unwrap().value - 4.25).abs() < 1e-14);
    }

    #[test]
    fn identity_core_is_degenerate_for_lpo() {
        let rep = lpo_fast(&DMatrix::identity(2, 2)).unwrap();
        assert!(rep.value.is_infinite());
        assert!(rep.degenerate);
        assert_eq!(rep.min_abs_reciprocal_arg, 0.0);
        // twins only see the diagonal
        let rep = lto_fast(&DMatrix::identity(2, 2)).unwrap();
        assert!(!rep.degenerate);
        assert!((rep.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn error_paths() {
        let tall = DMatrix::from_element(3, 2, 1.0);
        assert!(matches!(lpo_fast(&tall), Err(Error::DiscrepancyViolation { s: 2, r: 3 })));
        assert!(matches!(lto_fast(&tall), Err(Error::DiscrepancyViolation { .. })));
        let singular = m2(1.0, 2.0, 2.0, 4.0);
        assert!(matches!(lpo_fast(&singular), Err(Error::SingularCore { .. })));
        assert!(matches!(loo_nystrom_fast(&DMatrix::identity(2, 2), &singular), Err(Error::SingularCore { .. })));
        let deficient = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(lro_fast(&DMatrix::identity(2, 2), &deficient), Err(Error::RankDeficientCore { .. })));
        let wide = DMatrix::from_element(2, 3, 1.0);
        assert!(matches!(lro_fast(&DMatrix::identity(3, 3), &wide), Err(Error::DiscrepancyViolation { .. })));
    }

    #[test]
    fn exact_rank_gives_zero_estimates() {
        // rank(A) = s - 1: every replicate is exact
        let s = 6;
        let a = gaussian_sketch(40, s - 1, Seed(1)) * gaussian_sketch(35, s - 1, Seed(2)).transpose();
        let scale = a.norm();
        // An exactly rank-(s-1) target makes H rank deficient at width s, so
        // add a tail far below the tolerance but above the core's rank floor.
        let noise = gaussian_sketch(40, 35, Seed(3)) * (1e-12 * scale);
        let a = a + noise;
        for r in [s, s + 4] {
            let f = generalized_nystrom(&a, &SketchPair::from_seed(40, 35, s, r, Seed(4))).unwrap();
            let lro = lro_fast(f.r_omega(), f.h()).unwrap();
            assert!(lro.value <= 1e-8 * scale, "lro {}", lro.value);
            if r == s {
                assert!(lto_fast(f.h()).unwrap().value <= 1e-8 * scale);
            }
        }
        let q = haar_orthogonal(30, Seed(5));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(30, |i, _| if i < s - 1 { 1.0 + i as f64 } else { 1e-13 }));
        let spsd = &q * d * q.transpose();
        let f = nystrom(&spsd, &gaussian_sketch(30, s, Seed(6))).unwrap();
        let loo = loo_nystrom_fast(&f.rfac, &f.h).unwrap().value;
        assert!(loo <= 1e-8 * spsd.norm(), "loo {loo} rcond {}", f.rcond_h);
    }

    #[test]
    fn estimators_are_homogeneous() {
        let a = gaussian_sketch(30, 30, Seed(7));
        let c = 2.75;
        for r in [8, 12] {
            let sk = SketchPair::from_seed(30, 30, 8, r, Seed(8));
            let f = generalized_nystrom(&a, &sk).unwrap();
            let g = generalized_nystrom(&(&a * c), &sk).unwrap();
            let base = lro_fast(f.r_omega(), f.h()).unwrap().value;
            let scaled = lro_fast(g.r_omega(), g.h()).unwrap().value;
            assert!((scaled - c * base).abs() <= 1e-10 * c * base);
            if r == 8 {
                for est in [lpo_fast, lto_fast] {
                    let (b, s) = (est(f.h()).unwrap().value, est(g.h()).unwrap().value);
                    assert!((s - c * b).abs() <= 1e-10 * c * b);
                }
            }
        }
        let spsd = a.tr_mul(&a);
        let omega = gaussian_sketch(30, 8, Seed(9));
        let f = nystrom(&spsd, &omega).unwrap();
        let g = nystrom(&(&spsd * c), &omega).unwrap();
        let (b, s) = (loo_nystrom_fast(&f.rfac, &f.h).unwrap().value, loo_nystrom_fast(&g.rfac, &g.h).unwrap().value);
        assert!((s - c * b).abs() <= 1e-10 * c * b);
    }

    #[test]
    fn estimators_invariant_under_left_rotation() {
        let (m, n, s) = (25, 20, 6);
        let a = gaussian_sketch(m, n, Seed(10));
        let u = haar_orthogonal(m, Seed(11));
        for r in [s, s + 3] {
            let sk = SketchPair::from_seed(m, n, s, r, Seed(12));
            let rotated = SketchPair { phi: &u * &sk.phi, ..sk.clone() };
            let f = generalized_nystrom(&a, &sk).unwrap();
            let g = generalized_nystrom(&(&u * &a), &rotated).unwrap();
            assert!((f.h() - g.h()).norm() <= 1e-12 * f.h().norm());
            assert!((f.r_omega() - g.r_omega()).norm() <= 1e-12 * f.r_omega().norm());
            let pairs = [
                (lro_fast(f.r_omega(), f.h()).unwrap().value, lro_fast(g.r_omega(), g.h()).unwrap().value),
            ];
            for (x, y) in pairs {
                assert!((x - y).abs() <= 1e-10 * x);
            }
            if r == s {
                for est in [lpo_fast, lto_fast] {
                    let (x, y) = (est(f.h()).unwrap().value, est(g.h()).unwrap().value);
                    assert!((x - y).abs() <= 1e-10 * x);
                }
            }
        }
    }

    #[test]
    fn square_core_estimators_finite_when_invertible() {
        let a = gaussian_sketch(20, 20, Seed(13));
        let f = generalized_nystrom(&a, &SketchPair::from_seed(20, 20, 7, 7, Seed(14))).unwrap();
        assert!(lto_fast(f.h()).unwrap().value.is_finite());
        assert!(lro_fast(f.r_omega(), f.h()).unwrap().value.is_finite());
    }

    #[test]
    fn estimator_kind_parses() {
        assert_eq!("lro".parse::<EstimatorKind>().unwrap(), EstimatorKind::Lro);
        assert!("xyz".parse::<EstimatorKind>().is_err());
        assert_eq!(EstimatorKind::Lpo.to_string(), "LPO");
    }
}
