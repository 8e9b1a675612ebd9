//! Generalized Nyström low-rank approximation with fast leave-one-out error
//! estimators.
//!
//! The approximation `Â = AΩ (Φ*AΩ)† Φ*A` is built from a right sketch `AΩ`
//! (`s` columns) and a left sketch `Φ*A` (`r >= s` rows). Its error can be
//! estimated from the small core `H = Φ*AΩ` alone:
//!
//! * LPO (leave-pair-out) and LTO (leave-twins-out) need `r = s`;
//! * LRO (leave-right-out) works for any `r >= s`;
//! * LOO is the classical estimator for the symmetric Nyström method.
//!
//! [`oracles`] recomputes the same quantities by brute force, and
//! [`harness`] runs parameter sweeps and writes CSV files.

pub mod adaptive;
pub mod approximators;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod operator;
pub mod oracles;
pub mod sketching;
pub mod testmatrices;

pub use adaptive::{adaptive_gn, AdaptiveConfig, AdaptiveTrace, Termination};
pub use approximators::{generalized_nystrom, gn_apply, gn_dense, nystrom, true_error, GNFactors, NystromFactors};
pub use error::{Error, Result};
pub use estimators::{loo_nystrom_fast, lpo_fast, lro_fast, lto_fast, EstimateReport, EstimatorKind};
pub use operator::LinearOperator;
pub use sketching::{Seed, SketchPair};
