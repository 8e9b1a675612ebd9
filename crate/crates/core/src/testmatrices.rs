//! Synthetic and PDE-derived test matrices.
//!
//! * [`expdecay_matrix`]: `U diag(2^{-i/rate}) V*` with Haar factors.
//! * [`chan_matrix`]: unit upper-triangular with every strictly-upper entry
//!   equal to `-1`, the classical hard case for rank-revealing QR.
//! * [`AdvectionDiffusion`] and [`GreensOperator`]: the stationary operator
//!   `-α ∆C + v·∇C` on the unit square with Dirichlet boundary, and its
//!   inverse, which is the discretized Green's function.

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::sketching::{haar_orthogonal, Seed};

/// Singular values `2^{-i/rate}` for `i = 1..=n`.
pub fn expdecay_spectrum(n: usize, rate_denominator: f64) -> Vec<f64> {
    (1..=n).map(|i| (-(i as f64) / rate_denominator).exp2()).collect()
}

/// `U diag(2^{-i/rate}) V*` with independent Haar `U` and `V`
/// drawn from `seed.derive(1)` and `seed.derive(2)`.
pub fn expdecay_matrix(n: usize, rate_denominator: f64, seed: Seed) -> DMatrix<f64> {
    let u = haar_orthogonal(n, seed.derive(1));
    let v = haar_orthogonal(n, seed.derive(2));
    scale_columns(u, &expdecay_spectrum(n, rate_denominator)) * v.transpose()
}

/// Symmetric positive definite `U diag(2^{-i/rate}) U*` with Haar `U` from
/// `seed.derive(1)`.
pub fn psd_expdecay_matrix(n: usize, rate_denominator: f64, seed: Seed) -> DMatrix<f64> {
    let u = haar_orthogonal(n, seed.derive(1));
    let a = scale_columns(u.clone(), &expdecay_spectrum(n, rate_denominator)) * u.transpose();
    (&a + a.transpose()) * 0.5
}

fn scale_columns(mut m: DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    for (mut col, &x) in m.column_iter_mut().zip(d) {
        col *= x;
    }
    m
}

/// `1` on the diagonal, `-1` strictly above it, `0` below.
pub fn chan_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => -1.0,
        std::cmp::Ordering::Greater => 0.0,
    })
}

/// Discretization parameters for the advection-diffusion problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeConfig {
    /// Interior grid points per dimension; the operator has size `grid²`.
    pub grid_points_per_dim: usize,
    /// Diffusivity.
    pub alpha: f64,
    /// Advection speed.
    pub u: f64,
    /// Velocity is `u * direction`. The default `(1, 1)` applies `u` to both axes.
    pub direction: [f64; 2],
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig { grid_points_per_dim: 18, alpha: 1.0, u: 1.5, direction: [1.0, 1.0] }
    }
}

impl PdeConfig {
    pub fn dimension(&self) -> usize {
        self.grid_points_per_dim * self.grid_points_per_dim
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.grid_points_per_dim as f64 + 1.0)
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.u * self.direction[0], self.u * self.direction[1]]
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_dim == 0 {
            return Err(Error::Config("grid_points_per_dim must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !self.u.is_finite() || self.direction.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config("velocity must be finite".into()));
        }
        Ok(())
    }
}

/// Matrix-free five-point discretization of `-α ∆C + v·∇C` with central
/// differences on the interior nodes. Node `(i, j)` (x index `i`, y index
/// `j`) has linear index `i + grid * j`.
#[derive(Clone, Debug)]
pub struct AdvectionDiffusion {
    cfg: PdeConfig,
}

impl AdvectionDiffusion {
    pub fn new(cfg: PdeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(AdvectionDiffusion { cfg })
    }

    pub fn config(&self) -> &PdeConfig {
        &self.cfg
    }

    /// Applies the stencil with advection multiplied by `sign`; `-1` gives the adjoint.
    fn stencil(&self, x: &DVector<f64>, sign: f64) -> DVector<f64> {
        let n = self.cfg.grid_points_per_dim;
        let h = self.cfg.spacing();
        let diff = self.cfg.alpha / (h * h);
        let [vx, vy] = self.cfg.velocity();
        let (ax, ay) = (sign * vx / (2.0 * h), sign * vy / (2.0 * h));
        let at = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
                0.0
            } else {
                x[i as usize + n * j as usize]
            }
        };
        DVector::from_fn(n * n, |k, _| {
            let (i, j) = ((k % n) as isize, (k / n) as isize);
            let (e, w, no, so) = (at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1));
            diff * (4.0 * at(i, j) - e - w - no - so) + ax * (e - w) + ay * (no - so)
        })
    }
}

impl LinearOperator for AdvectionDiffusion {
    fn nrows(&self) -> usize {
        self.cfg.dimension()
    }

    fn ncols(&self) -> usize {
        self.cfg.dimension()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.stencil(x, 1.0)
    }

    fn adjoint_apply(&self, y: &DVector<f64>) -> DVector<f64> {
        self.stencil(y, -1.0)
    }
}

/// The inverse of [`AdvectionDiffusion`], applied through dense LU factors
/// of `L` and `L*` computed once at construction.
pub struct GreensOperator {
    dim: usize,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_adjoint: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl GreensOperator {
    pub fn new(cfg: PdeConfig) -> Result<Self> {
        let op = AdvectionDiffusion::new(cfg)?;
        let l = op.to_dense();
        let lu = l.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SolveFailure("discretized operator is singular".into()));
        }
        let lu_adjoint = l.transpose().lu();
        Ok(GreensOperator { dim: l.nrows(), lu, lu_adjoint })
    }

    fn solve(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>, b: &DMatrix<f64>) -> DMatrix<f64> {
        // The factors were checked invertible at construction.
        lu.solve(b).expect("invertible LU factors")
    }
}

impl LinearOperator for GreensOperator {
    fn nrows(&self) -> usize {
        self.dim
    }

    fn ncols(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(x).expect("invertible LU factors")
    }

    fn adjoint_apply(&self, y: &DVector<f64>) -> DVector<f64> {
        self.lu_adjoint.solve(y).expect("invertible LU factors")
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        Self::solve(&self.lu, x)
    }

    fn adjoint_apply_block(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        Self::solve(&self.lu_adjoint, y)
    }
}

pub fn advection_diffusion_operator(cfg: PdeConfig) -> Result<AdvectionDiffusion> {
    AdvectionDiffusion::new(cfg)
}

pub fn greens_operator(cfg: PdeConfig) -> Result<GreensOperator> {
    GreensOperator::new(cfg)
}
