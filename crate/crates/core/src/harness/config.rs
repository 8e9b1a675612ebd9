//! Experiment configuration, read from TOML.
//!
//! ```toml
//! s_grid = [25, 50, 75]
//! discrepancy = 0
//! estimators = ["LPO", "LTO", "LRO"]
//! include_naive = true
//! trials = 1
//! base_seed = 1
//! output_path = "out/expdecay.csv"
//!
//! [matrix]
//! kind = "expdecay"
//! n = 500
//! rate = 6.0
//! seed = 1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::sketching::Seed;
use crate::testmatrices::PdeConfig;

/// Which target matrix an experiment sketches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSpec {
    /// `U diag(2^{-i/rate}) V*`.
    Expdecay { n: usize, rate: f64, seed: Seed },
    /// `U diag(2^{-i/rate}) U*`, symmetric positive definite.
    PsdExpdecay { n: usize, rate: f64, seed: Seed },
    Chan { n: usize },
    /// `G₁ G₂*` with `n x rank` Gaussian factors.
    LowRank { n: usize, rank: usize, seed: Seed },
    /// Green's operator of the advection-diffusion problem.
    Advdiff(PdeConfig),
}

impl MatrixSpec {
    pub fn dimension(&self) -> usize {
        match self {
            MatrixSpec::Expdecay { n, .. }
            | MatrixSpec::PsdExpdecay { n, .. }
            | MatrixSpec::Chan { n }
            | MatrixSpec::LowRank { n, .. } => *n,
            MatrixSpec::Advdiff(cfg) => cfg.dimension(),
        }
    }

    pub fn is_spsd(&self) -> bool {
        matches!(self, MatrixSpec::PsdExpdecay { .. })
    }

    /// Stable identifier written to the `matrix_id` column.
    pub fn id(&self) -> String {
        match self {
            MatrixSpec::Expdecay { n, rate, seed } => format!("expdecay_n{n}_rate{rate}_seed{}", seed.0),
            MatrixSpec::PsdExpdecay { n, rate, seed } => format!("psd_expdecay_n{n}_rate{rate}_seed{}", seed.0),
            MatrixSpec::Chan { n } => format!("chan_n{n}"),
            MatrixSpec::LowRank { n, rank, seed } => format!("lowrank_n{n}_rank{rank}_seed{}", seed.0),
            MatrixSpec::Advdiff(c) => format!(
                "advdiff_grid{}_alpha{}_u{}_dir{}x{}",
                c.grid_points_per_dim, c.alpha, c.u, c.direction[0], c.direction[1]
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MatrixSpec::Expdecay { n, rate, .. } | MatrixSpec::PsdExpdecay { n, rate, .. } => {
                if *n == 0 {
                    return Err(Error::Config("matrix.n must be positive".into()));
                }
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::Config(format!("matrix.rate must be positive, got {rate}")));
                }
                Ok(())
            }
            MatrixSpec::Chan { n } if *n == 0 => Err(Error::Config("matrix.n must be positive".into())),
            MatrixSpec::Chan { .. } => Ok(()),
            MatrixSpec::LowRank { n, rank, .. } if *rank == 0 || rank > n => {
                Err(Error::Config(format!("matrix.rank must be in 1..={n}, got {rank}")))
            }
            MatrixSpec::LowRank { .. } => Ok(()),
            MatrixSpec::Advdiff(cfg) => cfg.validate(),
        }
    }
}

fn default_trials() -> usize {
    1
}

fn default_timing_repeats() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub matrix: MatrixSpec,
    pub s_grid: Vec<usize>,
    /// `r - s`.
    #[serde(default)]
    pub discrepancy: usize,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub include_naive: bool,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub base_seed: Seed,
    pub output_path: PathBuf,
    /// Record wall-clock columns. Off by default so reruns are byte-identical.
    #[serde(default)]
    pub timings: bool,
    /// Each timed call runs this many times and the minimum is recorded.
    #[serde(default = "default_timing_repeats")]
    pub timing_repeats: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative `output_path`s are kept as written.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn r_for(&self, s: usize) -> usize {
        s + self.discrepancy
    }

    pub fn validate(&self) -> Result<()> {
        self.matrix.validate()?;
        if self.s_grid.is_empty() {
            return Err(Error::Config("s_grid is empty".into()));
        }
        if self.s_grid[0] == 0 || self.s_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("s_grid must be positive and strictly increasing".into()));
        }
        let n = self.matrix.dimension();
        let s_max = *self.s_grid.last().unwrap();
        if s_max + self.discrepancy > n {
            return Err(Error::Config(format!(
                "largest s = {s_max} with discrepancy {} exceeds the dimension {n}",
                self.discrepancy
            )));
        }
        if self.trials == 0 || self.timing_repeats == 0 {
            return Err(Error::Config("trials and timing_repeats must be positive".into()));
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(e) {
                return Err(Error::Config(format!("estimator {e} listed twice")));
            }
            if e.requires_square_core() && self.discrepancy > 0 {
                return Err(Error::Config(format!("{e} requires discrepancy = 0")));
            }
            if *e == EstimatorKind::Loo && !self.matrix.is_spsd() {
                return Err(Error::Config("LOO needs a symmetric positive semidefinite matrix kind".into()));
            }
        }
        if self.output_path.as_os_str().is_empty() {
            return Err(Error::Config("output_path is empty".into()));
        }
        Ok(())
    }

    /// Per-row seed: `base_seed` XOR a hash of `(s, trial)`.
    pub fn row_seed(&self, s: usize, trial: usize) -> Seed {
        let key = ((s as u64) << 32) ^ trial as u64;
        Seed(self.base_seed.0 ^ crate::sketching::mix64(key.wrapping_add(0xD1B5_4A32_D192_ED03)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
s_grid = [5, 10]
discrepancy = 0
estimators = ["LPO", "LTO", "LRO"]
include_naive = true
trials = 2
base_seed = 9
output_path = "x.csv"

[matrix]
kind = "expdecay"
n = 40
rate = 6.0
seed = 1
"#;

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.s_grid, vec![5, 10]);
        assert_eq!(cfg.estimators, vec![EstimatorKind::Lpo, EstimatorKind::Lto, EstimatorKind::Lro]);
        assert_eq!(cfg.matrix, MatrixSpec::Expdecay { n: 40, rate: 6.0, seed: Seed(1) });
        assert!(!cfg.timings);
        assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn parses_pde_and_chan() {
        let pde = "s_grid=[5]\nestimators=[\"LRO\"]\nbase_seed=1\noutput_path=\"o.csv\"\n[matrix]\nkind=\"advdiff\"\n";
        let cfg = ExperimentConfig::from_toml_str(pde).unwrap();
        assert_eq!(cfg.matrix, MatrixSpec::Advdiff(PdeConfig::default()));
        assert_eq!(cfg.matrix.dimension(), 324);
        let chan = pde.replace("kind=\"advdiff\"", "kind=\"chan\"\nn=30");
        assert_eq!(ExperimentConfig::from_toml_str(&chan).unwrap().matrix, MatrixSpec::Chan { n: 30 });
    }

    fn rejects(text: &str) {
        assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))), "accepted:\n{text}");
    }

    #[test]
    fn validation_errors() {
        rejects(&SAMPLE.replace("discrepancy = 0", "discrepancy = 5"));
        rejects(&SAMPLE.replace("[5, 10]", "[10, 5]"));
        rejects(&SAMPLE.replace("[5, 10]", "[]"));
        rejects(&SAMPLE.replace("[5, 10]", "[5, 41]"));
        rejects(&SAMPLE.replace("trials = 2", "trials = 0"));
        rejects(&SAMPLE.replace("\"LRO\"", "\"LOO\""));
        rejects(&SAMPLE.replace("\"LRO\"", "\"XYZ\""));
        rejects(&SAMPLE.replace("kind = \"expdecay\"", "kind = \"hilbert\""));
        rejects(&SAMPLE.replace("trials = 2", "trial = 2"));
        rejects("not toml at all [");
    }

    #[test]
    fn row_seeds_differ() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_ne!(cfg.row_seed(5, 0), cfg.row_seed(5, 1));
        assert_ne!(cfg.row_seed(5, 0), cfg.row_seed(10, 0));
        assert_eq!(cfg.row_seed(5, 1), cfg.row_seed(5, 1));
    }
}
