//! Built-in sweeps reproducing the four published experiments.
//!
//! Every sweep uses `s = 25, 50, ..., 250`. Figures 1 and 2 are the
//! exponential-decay matrix without and with discrepancy, figure 3 is the
//! Chan matrix in both regimes, and figure 4 is the advection-diffusion
//! Green's operator without discrepancy.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::harness::config::{ExperimentConfig, MatrixSpec};
use crate::sketching::Seed;
use crate::testmatrices::PdeConfig;

pub const SWEEP_S_GRID: [usize; 10] = [25, 50, 75, 100, 125, 150, 175, 200, 225, 250];

/// Oversampling used in the discrepant runs.
pub const SWEEP_DISCREPANCY: usize = 5;

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub out_dir: PathBuf,
    pub include_naive: bool,
    pub timings: bool,
    pub trials: usize,
    pub base_seed: Seed,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { out_dir: PathBuf::from("results"), include_naive: true, timings: true, trials: 1, base_seed: Seed(2024) }
    }
}

fn experiment(matrix: MatrixSpec, discrepancy: usize, file: &str, opts: &SweepOptions) -> ExperimentConfig {
    let estimators = if discrepancy == 0 {
        vec![EstimatorKind::Lpo, EstimatorKind::Lto, EstimatorKind::Lro]
    } else {
        vec![EstimatorKind::Lro]
    };
    ExperimentConfig {
        matrix,
        s_grid: SWEEP_S_GRID.to_vec(),
        discrepancy,
        estimators,
        include_naive: opts.include_naive,
        trials: opts.trials,
        base_seed: opts.base_seed,
        output_path: opts.out_dir.join(file),
        timings: opts.timings,
        timing_repeats: 1,
    }
}

pub fn expdecay_spec(seed: Seed) -> MatrixSpec {
    MatrixSpec::Expdecay { n: 500, rate: 6.0, seed }
}

/// Experiment configs behind one figure (two for figure 3).
pub fn figure_configs(figure: u8, opts: &SweepOptions) -> Result<Vec<ExperimentConfig>> {
    let matrix_seed = opts.base_seed.derive(0xF16);
    let configs = match figure {
        1 => vec![experiment(expdecay_spec(matrix_seed), 0, "figure1.csv", opts)],
        2 => vec![experiment(expdecay_spec(matrix_seed), SWEEP_DISCREPANCY, "figure2.csv", opts)],
        3 => vec![
            experiment(MatrixSpec::Chan { n: 500 }, 0, "figure3_nondiscrepant.csv", opts),
            experiment(MatrixSpec::Chan { n: 500 }, SWEEP_DISCREPANCY, "figure3_discrepant.csv", opts),
        ],
        4 => vec![experiment(MatrixSpec::Advdiff(PdeConfig::default()), 0, "figure4.csv", opts)],
        other => return Err(Error::Config(format!("unknown figure {other}; expected 1, 2, 3 or 4"))),
    };
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}

/// Output paths a figure sweep will write, in order.
pub fn figure_outputs(figure: u8, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let opts = SweepOptions { out_dir: out_dir.to_path_buf(), ..SweepOptions::default() };
    Ok(figure_configs(figure, &opts)?.into_iter().map(|c| c.output_path).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_configs_follow_published_setup() {
        let opts = SweepOptions::default();
        let f1 = figure_configs(1, &opts).unwrap();
        assert_eq!(f1.len(), 1);
        assert_eq!(f1[0].s_grid.len(), 10);
        assert_eq!(f1[0].s_grid, (25..=250).step_by(25).collect::<Vec<_>>());
        assert_eq!(f1[0].discrepancy, 0);
        let f2 = figure_configs(2, &opts).unwrap();
        assert_eq!(f2[0].discrepancy, 5);
        assert_eq!(f2[0].estimators, vec![EstimatorKind::Lro]);
        let f3 = figure_configs(3, &opts).unwrap();
        assert_eq!(f3.len(), 2);
        let f4 = figure_configs(4, &opts).unwrap();
        assert_eq!(f4[0].matrix.dimension(), 324);
        assert!(matches!(figure_configs(5, &opts), Err(Error::Config(_))));
    }

    #[test]
    fn outputs_live_in_out_dir() {
        let paths = figure_outputs(3, Path::new("/tmp/x")).unwrap();
        assert!(paths.iter().all(|p| p.starts_with("/tmp/x")));
    }
}
