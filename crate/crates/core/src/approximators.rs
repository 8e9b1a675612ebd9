//! Nyström and generalized Nyström factorizations.
//!
//! Both approximations are held in factored form. The generalized Nyström
//! approximation `Â = (AΩ)(Φ*AΩ)†(Φ*A)` never forms the pseudoinverse of the
//! core: it is applied through a QR factorization of `H = Φ*AΩ`, which is
//! full column rank whenever the factors exist.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{rcond_2, solve_upper, thin_qr};
use crate::operator::LinearOperator;
use crate::sketching::SketchPair;

/// Cores with `sigma_min / sigma_max` below this are rejected.
pub const CORE_RCOND_FLOOR: f64 = 1e-14;

/// Nyström approximation `X̃ = (XS)(S*XS)^{-1}(XS)*` of an SPSD matrix.
#[derive(Clone, Debug)]
pub struct NystromFactors {
    /// `XS`, `n x s`.
    pub y: DMatrix<f64>,
    /// `S*XS`, symmetrized.
    pub h: DMatrix<f64>,
    /// Q factor of `y`.
    pub q: DMatrix<f64>,
    /// R factor of `y` (positive diagonal).
    pub rfac: DMatrix<f64>,
    pub rcond_h: f64,
}

/// Builds the Nyström factors of an SPSD operator (symmetry is caller-asserted).
pub fn nystrom(a: &dyn LinearOperator, s: &DMatrix<f64>) -> Result<NystromFactors> {
    if a.nrows() != a.ncols() || s.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Nyström needs a square operator and n x s test matrix; got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    if s.ncols() == 0 || s.ncols() > s.nrows() {
        return Err(Error::DimensionMismatch(format!("invalid sketch width {}", s.ncols())));
    }
    let y = a.apply_block(s);
    let h = s.tr_mul(&y);
    let h = (&h + h.transpose()) * 0.5;
    let rcond_h = rcond_2(&h);
    if rcond_h < CORE_RCOND_FLOOR {
        return Err(Error::SingularCore { rcond: rcond_h });
    }
    let (q, rfac) = thin_qr(&y);
    Ok(NystromFactors { y, h, q, rfac, rcond_h })
}

impl NystromFactors {
    pub fn s(&self) -> usize {
        self.h.ncols()
    }

    /// Dense `X̃ = Q (R H^{-1} R*) Q*`, exactly symmetric.
    pub fn dense(&self) -> DMatrix<f64> {
        let core = self.core();
        let dense = &self.q * core * self.q.transpose();
        (&dense + dense.transpose()) * 0.5
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * (self.core() * self.q.tr_mul(x))
    }

    fn core(&self) -> DMatrix<f64> {
        let hinv_rt = self
            .h
            .clone()
            .lu()
            .solve(&self.rfac.transpose())
            .expect("core checked nonsingular at construction");
        let core = &self.rfac * hinv_rt;
        (&core + core.transpose()) * 0.5
    }
}

/// Factored generalized Nyström approximation.
#[derive(Clone, Debug)]
pub struct GNFactors {
    q_omega: DMatrix<f64>,
    r_omega: DMatrix<f64>,
    h: DMatrix<f64>,
    z: DMatrix<f64>,
    core_q: DMatrix<f64>,
    core_r: DMatrix<f64>,
    rcond_h: f64,
}

/// Generalized Nyström factors of `a` for the given sketch pair.
pub fn generalized_nystrom(a: &dyn LinearOperator, sketch: &SketchPair) -> Result<GNFactors> {
    let (m, n) = (a.nrows(), a.ncols());
    let (s, r) = (sketch.s(), sketch.r());
    if sketch.omega.nrows() != n || sketch.phi.nrows() != m {
        return Err(Error::DimensionMismatch(format!(
            "sketches are {}x{} and {}x{} for a {m}x{n} operator",
            sketch.omega.nrows(),
            s,
            sketch.phi.nrows(),
            r
        )));
    }
    if r < s {
        return Err(Error::DiscrepancyViolation { s, r });
    }
    if s == 0 || s > m.min(n) {
        return Err(Error::DimensionMismatch(format!("sketch width {s} for a {m}x{n} operator")));
    }
    let y = a.apply_block(&sketch.omega);
    let z = a.adjoint_apply_block(&sketch.phi).transpose();
    let h = sketch.phi.tr_mul(&y);
    GNFactors::from_sketches(y, z, h)
}

impl GNFactors {
    /// Assembles factors from precomputed sketches `AΩ` (`m x s`), `Φ*A`
    /// (`r x n`) and the core `Φ*AΩ` (`r x s`).
    pub fn from_sketches(y: DMatrix<f64>, z: DMatrix<f64>, h: DMatrix<f64>) -> Result<GNFactors> {
        let (s, r) = (h.ncols(), h.nrows());
        if y.ncols() != s || z.nrows() != r {
            return Err(Error::DimensionMismatch(format!(
                "sketch shapes {}x{}, {}x{} do not match a {r}x{s} core",
                y.nrows(),
                y.ncols(),
                z.nrows(),
                z.ncols()
            )));
        }
        if r < s {
            return Err(Error::DiscrepancyViolation { s, r });
        }
        let rcond_h = rcond_2(&h);
        if rcond_h < CORE_RCOND_FLOOR {
            return Err(Error::RankDeficientCore { rcond: rcond_h });
        }
        let (q_omega, r_omega) = thin_qr(&y);
        let (core_q, core_r) = thin_qr(&h);
        Ok(GNFactors { q_omega, r_omega, h, z, core_q, core_r, rcond_h })
    }

    /// Orthonormal basis of `AΩ`, `m x s`.
    pub fn q_omega(&self) -> &DMatrix<f64> {
        &self.q_omega
    }

    /// R factor of `AΩ` with positive diagonal, `s x s`.
    pub fn r_omega(&self) -> &DMatrix<f64> {
        &self.r_omega
    }

    /// Core `Φ*AΩ`, `r x s`.
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Row sketch `Φ*A`, `r x n`.
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn s(&self) -> usize {
        self.h.ncols()
    }

    pub fn r(&self) -> usize {
        self.h.nrows()
    }

    pub fn nrows(&self) -> usize {
        self.q_omega.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.z.ncols()
    }

    /// `sigma_min(H) / sigma_max(H)`.
    pub fn rcond_h(&self) -> f64 {
        self.rcond_h
    }

    /// `AΩ = Q_Ω R_Ω`.
    pub fn range_sketch(&self) -> DMatrix<f64> {
        &self.q_omega * &self.r_omega
    }

    /// `H† B` as the least-squares solution `R_H^{-1} Q_H* B`.
    pub fn core_pinv_mul(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        solve_upper(&self.core_r, &self.core_q.tr_mul(b)).expect("core checked full rank at construction")
    }

    /// R factor of the core's QR, `s x s`.
    pub fn core_r(&self) -> &DMatrix<f64> {
        &self.core_r
    }
}

/// `Â x` without densifying.
pub fn gn_apply(f: &GNFactors, x: &DVector<f64>) -> DVector<f64> {
    let coeffs = f.core_pinv_mul(&DMatrix::from_column_slice(f.r(), 1, (&f.z * x).as_slice()));
    let out = &f.q_omega * (&f.r_omega * coeffs);
    DVector::from_column_slice(out.as_slice())
}

/// Dense `Â`.
pub fn gn_dense(f: &GNFactors) -> DMatrix<f64> {
    &f.q_omega * (&f.r_omega * f.core_pinv_mul(&f.z))
}

/// `‖A - Â‖_F`, evaluated densely.
pub fn true_error(a: &dyn LinearOperator, f: &GNFactors) -> f64 {
    true_error_dense(&a.to_dense(), f)
}

/// `‖A - Â‖_F` for an already materialized `A`.
pub fn true_error_dense(a: &DMatrix<f64>, f: &GNFactors) -> f64 {
    (a - gn_dense(f)).norm()
}
