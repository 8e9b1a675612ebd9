//! Matrix access through products with vectors.
//!
//! Every approximation in this crate touches the target matrix only through
//! [`LinearOperator::apply`] and [`LinearOperator::adjoint_apply`] (and their
//! blocked forms). Dense `DMatrix<f64>` values implement the trait directly.

use nalgebra::{DMatrix, DVector};

pub trait LinearOperator: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `A x` for `x` of length `ncols`.
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `A* y` for `y` of length `nrows`.
    fn adjoint_apply(&self, y: &DVector<f64>) -> DVector<f64>;

    /// `A X`, column by column unless the implementor knows better.
    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows(), x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            out.set_column(j, &self.apply(&col.into_owned()));
        }
        out
    }

    /// `A* Y`, column by column unless the implementor knows better.
    fn adjoint_apply_block(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.ncols(), y.ncols());
        for (j, col) in y.column_iter().enumerate() {
            out.set_column(j, &self.adjoint_apply(&col.into_owned()));
        }
        out
    }

    /// Materializes the operator by applying it to the identity.
    fn to_dense(&self) -> DMatrix<f64> {
        self.apply_block(&DMatrix::identity(self.ncols(), self.ncols()))
    }
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }

    fn adjoint_apply(&self, y: &DVector<f64>) -> DVector<f64> {
        self.tr_mul(y)
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }

    fn adjoint_apply_block(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(y)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// Relative adjoint-consistency defect `|<Ax, y> - <x, A*y>| / (‖Ax‖‖y‖)`.
pub fn adjoint_defect(op: &dyn LinearOperator, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let ax = op.apply(x);
    let aty = op.adjoint_apply(y);
    let lhs = ax.dot(y);
    let rhs = x.dot(&aty);
    let scale = (ax.norm() * y.norm()).max(x.norm() * aty.norm());
    if scale == 0.0 {
        return (lhs - rhs).abs();
    }
    (lhs - rhs).abs() / scale
}
