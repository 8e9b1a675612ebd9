//! Rank-adaptive generalized Nyström.
//!
//! The driver draws `Ω` (`n x s_max`) and `Φ` (`m x (s_max + discrepancy)`)
//! once and uses column prefixes of growing width, so every step's sketch
//! contains the previous one. Factors are rebuilt from scratch at each step.
//!
//! The chosen estimator measures the error of the rank-`(s-1)` replicates;
//! the stopping test uses it as a slightly pessimistic stand-in for the
//! error of the rank-`s` approximation actually returned.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::approximators::{generalized_nystrom, GNFactors};
use crate::error::{Error, Result};
use crate::estimators::{lro_fast, lto_fast, EstimatorKind};
use crate::operator::LinearOperator;
use crate::sketching::{gaussian_sketch, Seed, SketchPair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    /// Target Frobenius error.
    pub tol: f64,
    /// Interpret `tol` relative to the estimate `‖AΩ‖_F / √s` of `‖A‖_F`.
    #[serde(default)]
    pub relative: bool,
    pub s0: usize,
    pub growth: usize,
    pub s_max: usize,
    /// `r - s`.
    #[serde(default = "default_discrepancy")]
    pub discrepancy: usize,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    pub seed: Seed,
}

fn default_discrepancy() -> usize {
    5
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Lro
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be finite and nonnegative, got {}", self.tol)));
        }
        if self.s0 == 0 || self.growth == 0 {
            return Err(Error::Config("s0 and growth must be positive".into()));
        }
        if self.s0 > self.s_max {
            return Err(Error::Config(format!("s0 = {} exceeds s_max = {}", self.s0, self.s_max)));
        }
        match self.estimator {
            EstimatorKind::Lro => Ok(()),
            EstimatorKind::Lto if self.discrepancy == 0 => Ok(()),
            EstimatorKind::Lto => Err(Error::Config("LTO requires discrepancy = 0".into())),
            other => Err(Error::Config(format!("adaptive driver supports LTO and LRO, not {other}"))),
        }
    }

    /// Sketch widths visited: `s0, s0 + growth, ...`, ending exactly at `s_max`.
    pub fn schedule(&self) -> Vec<usize> {
        let mut widths: Vec<usize> = (self.s0..self.s_max).step_by(self.growth).collect();
        widths.push(self.s_max);
        widths
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TolMet,
    SMaxReached,
    /// The estimator returned `+inf` on two consecutive steps.
    Degenerate,
    /// The core lost rank while growing; the last full-rank step is returned.
    RankExhausted,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::TolMet => "tol_met",
            Termination::SMaxReached => "s_max_reached",
            Termination::Degenerate => "degenerate",
            Termination::RankExhausted => "rank_exhausted",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub s: usize,
    pub r: usize,
    pub estimate: f64,
    /// The stopping threshold in force at this step.
    pub threshold: f64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct AdaptiveTrace {
    pub entries: Vec<TraceEntry>,
    pub termination: Termination,
}

impl AdaptiveTrace {
    pub fn final_s(&self) -> usize {
        self.entries.last().map_or(0, |e| e.s)
    }
}

fn is_rank_loss(e: &Error) -> bool {
    matches!(e, Error::RankDeficientCore { .. } | Error::SingularCore { .. })
}

/// Grows the sketch until the estimator certifies `tol` or `s_max` is reached.
pub fn adaptive_gn(a: &dyn LinearOperator, cfg: &AdaptiveConfig) -> Result<(GNFactors, AdaptiveTrace)> {
    cfg.validate()?;
    let (m, n) = (a.nrows(), a.ncols());
    if cfg.s_max > m.min(n) || cfg.s_max + cfg.discrepancy > m {
        return Err(Error::Config(format!(
            "s_max = {} with discrepancy {} does not fit a {m}x{n} operator",
            cfg.s_max, cfg.discrepancy
        )));
    }
    let omega = gaussian_sketch(n, cfg.s_max, cfg.seed.derive(1));
    let phi = gaussian_sketch(m, cfg.s_max + cfg.discrepancy, cfg.seed.derive(2));

    let mut entries: Vec<TraceEntry> = Vec::new();
    let mut last: Option<GNFactors> = None;
    let mut infinite_run = 0;
    for s in cfg.schedule() {
        let r = s + cfg.discrepancy;
        let start = Instant::now();
        let sketch = SketchPair {
            omega: omega.columns(0, s).into_owned(),
            phi: phi.columns(0, r).into_owned(),
            seed_omega: cfg.seed.derive(1),
            seed_phi: cfg.seed.derive(2),
        };
        let step = generalized_nystrom(a, &sketch).and_then(|f| {
            let report = match cfg.estimator {
                EstimatorKind::Lto => lto_fast(f.h()),
                _ => lro_fast(f.r_omega(), f.h()),
            }?;
            Ok((f, report.value))
        });
        let (factors, estimate) = match (step, last.take()) {
            (Ok(v), _) => v,
            (Err(e), Some(prev)) if is_rank_loss(&e) => {
                return Ok((prev, AdaptiveTrace { entries, termination: Termination::RankExhausted }));
            }
            (Err(e), _) => return Err(e),
        };
        let threshold = if cfg.relative { cfg.tol * norm_estimate(factors.range_sketch()) } else { cfg.tol };
        entries.push(TraceEntry { s, r, estimate, threshold, elapsed: start.elapsed() });

        infinite_run = if estimate.is_infinite() { infinite_run + 1 } else { 0 };
        let termination = if estimate <= threshold {
            Some(Termination::TolMet)
        } else if infinite_run >= 2 {
            Some(Termination::Degenerate)
        } else if s == cfg.s_max {
            Some(Termination::SMaxReached)
        } else {
            None
        };
        if let Some(termination) = termination {
            return Ok((factors, AdaptiveTrace { entries, termination }));
        }
        last = Some(factors);
    }
    unreachable!("the schedule ends at s_max, which always terminates")
}

/// `‖AΩ‖_F / √s`, whose square is an unbiased estimate of `‖A‖_F²`.
fn norm_estimate(y: DMatrix<f64>) -> f64 {
    y.norm() / (y.ncols() as f64).sqrt()
}
