//! Seeded random test matrices and the randomized rangefinder.
//!
//! Reproducibility contract: a [`Seed`] initializes a ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng::seed_from_u64`), and standard normal variates
//! are drawn from it with the ziggurat sampler of `rand_distr::StandardNormal`.
//! Matrices are filled in column-major order, so entry `(i, j)` of a
//! `rows x cols` sketch is draw number `j * rows + i`. Consequently the first
//! `k` columns of `gaussian_sketch(rows, c, seed)` do not depend on `c >= k`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{singular_values, thin_qr};
use crate::operator::LinearOperator;

/// Default oversampling for the rangefinder.
pub const DEFAULT_OVERSAMPLING: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// Independent child seed for a numbered sub-stream.
    pub fn derive(self, stream: u64) -> Seed {
        Seed(mix64(self.0 ^ mix64(stream.wrapping_add(0x9E37_79B9_7F4A_7C15))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `rows x cols` matrix of i.i.d. standard normal entries.
pub fn gaussian_sketch(rows: usize, cols: usize, seed: Seed) -> DMatrix<f64> {
    let mut rng = seed.rng();
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Haar-distributed orthogonal matrix: the Q factor of a Gaussian matrix with
/// the signs fixed so that R has a positive diagonal.
pub fn haar_orthogonal(n: usize, seed: Seed) -> DMatrix<f64> {
    thin_qr(&gaussian_sketch(n, n, seed)).0
}

/// Right and left Gaussian test matrices for a generalized Nyström sketch.
#[derive(Clone, Debug)]
pub struct SketchPair {
    /// `n x s`; column `j` is the right sample vector.
    pub omega: DMatrix<f64>,
    /// `m x r`; column `l` is the left sample vector.
    pub phi: DMatrix<f64>,
    pub seed_omega: Seed,
    pub seed_phi: Seed,
}

impl SketchPair {
    /// Gaussian pair for an `m x n` target with `s` right and `r` left vectors.
    pub fn gaussian(m: usize, n: usize, s: usize, r: usize, seed_omega: Seed, seed_phi: Seed) -> Self {
        SketchPair {
            omega: gaussian_sketch(n, s, seed_omega),
            phi: gaussian_sketch(m, r, seed_phi),
            seed_omega,
            seed_phi,
        }
    }

    /// Gaussian pair with independent streams derived from one seed.
    pub fn from_seed(m: usize, n: usize, s: usize, r: usize, seed: Seed) -> Self {
        Self::gaussian(m, n, s, r, seed.derive(1), seed.derive(2))
    }

    pub fn s(&self) -> usize {
        self.omega.ncols()
    }

    pub fn r(&self) -> usize {
        self.phi.ncols()
    }
}

/// Orthonormal `m x k` basis for the range of `a` from a sketch of width `k + p`.
///
/// The basis is the leading `k` columns of a QR factorization of `A Ω`.
/// Fails with [`Error::RankDeficientSketch`] when the sketch has numerical
/// rank below `k`.
pub fn rangefinder(a: &dyn LinearOperator, k: usize, p: usize, seed: Seed) -> Result<DMatrix<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    let width = k + p;
    if k == 0 || width > m.min(n) {
        return Err(Error::DimensionMismatch(format!(
            "rangefinder needs 1 <= k and k + p <= min(m, n); got k = {k}, p = {p}, m = {m}, n = {n}"
        )));
    }
    let y = a.apply_block(&gaussian_sketch(n, width, seed));
    let sv = singular_values(&y);
    let lead = sv.first().copied().unwrap_or(0.0);
    let tol = (m.max(width) as f64) * f64::EPSILON * lead;
    let rank = if lead == 0.0 { 0 } else { sv.iter().take_while(|&&v| v > tol).count() };
    // Unpivoted QR keeps the bases nested across k for a fixed seed.
    let (q, r) = thin_qr(&y);
    let leading = (0..k).take_while(|&i| r[(i, i)] > tol).count();
    if rank.min(leading) < k {
        return Err(Error::RankDeficientSketch { rank: rank.min(leading), requested: k });
    }
    Ok(q.columns(0, k).into_owned())
}

/// Standard normal vector, used for random forcings.
pub fn gaussian_vector(len: usize, seed: Seed) -> DVector<f64> {
    DVector::from_column_slice(gaussian_sketch(len, 1, seed).as_slice())
}
