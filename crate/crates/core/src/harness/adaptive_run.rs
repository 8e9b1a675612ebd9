//! CLI-facing wrapper around [`adaptive_gn`]: one CSV row per step.
//!
//! ```toml
//! output_path = "out/adaptive.csv"
//!
//! [matrix]
//! kind = "expdecay"
//! n = 300
//! rate = 6.0
//! seed = 1
//!
//! [adaptive]
//! tol = 1e-6
//! relative = true
//! s0 = 10
//! growth = 10
//! s_max = 150
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_gn, AdaptiveConfig, AdaptiveTrace};
use crate::approximators::true_error_dense;
use crate::error::{Error, Result};
use crate::harness::config::MatrixSpec;
use crate::harness::experiment::{format_float, write_atomic, Target};

pub const TRACE_COLUMNS: [&str; 9] =
    ["matrix_id", "step", "s", "r", "estimate", "threshold", "t_step", "true_fro_error", "termination"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveRunConfig {
    pub matrix: MatrixSpec,
    pub adaptive: AdaptiveConfig,
    pub output_path: PathBuf,
    /// Record per-step wall-clock time (`t_step`).
    #[serde(default)]
    pub timings: bool,
}

impl AdaptiveRunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: AdaptiveRunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.matrix.validate()?;
        cfg.adaptive.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveRunResult {
    pub trace: AdaptiveTrace,
    pub true_fro_error: f64,
    pub csv: Vec<u8>,
}

/// Runs the driver, writes the trace CSV, and returns it with the final true error.
///
/// The true error and the termination reason appear on the last row only.
pub fn run_adaptive(cfg: &AdaptiveRunConfig) -> Result<AdaptiveRunResult> {
    let target = Target::build(&cfg.matrix)?;
    let (factors, trace) = adaptive_gn(target.op(), &cfg.adaptive)?;
    let true_fro_error = true_error_dense(&target.dense, &factors);

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(TRACE_COLUMNS).map_err(io)?;
    let last = trace.entries.len() - 1;
    for (step, e) in trace.entries.iter().enumerate() {
        let is_last = step == last;
        w.write_record([
            target.id.clone(),
            step.to_string(),
            e.s.to_string(),
            e.r.to_string(),
            format_float(e.estimate),
            format_float(e.threshold),
            if cfg.timings { format_float(e.elapsed.as_secs_f64()) } else { String::new() },
            if is_last { format_float(true_fro_error) } else { String::new() },
            if is_last { trace.termination.to_string() } else { String::new() },
        ])
        .map_err(io)?;
    }
    let csv = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(&cfg.output_path, &csv)?;
    Ok(AdaptiveRunResult { trace, true_fro_error, csv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::Termination;

    fn config(dir: &Path, matrix: &str, adaptive: &str) -> AdaptiveRunConfig {
        let text = format!(
            "output_path = {:?}\n[matrix]\n{matrix}\n[adaptive]\n{adaptive}\n",
            dir.join("trace.csv").to_str().unwrap()
        );
        AdaptiveRunConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn rank_twelve_target_is_certified() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            dir.path(),
            "kind = \"low_rank\"\nn = 60\nrank = 12\nseed = 3",
            "tol = 1e-8\nrelative = true\ns0 = 4\ngrowth = 4\ns_max = 40\nseed = 5",
        );
        let out = run_adaptive(&cfg).unwrap();
        let text = std::fs::read_to_string(&cfg.output_path).unwrap();
        assert_eq!(text.as_bytes(), out.csv.as_slice());
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], TRACE_COLUMNS.join(","));
        assert!(rows.last().unwrap().ends_with(out.trace.termination.as_str()));
        assert!(matches!(out.trace.termination, Termination::TolMet | Termination::RankExhausted));
        assert!(out.trace.final_s() <= 16);
        let norm = Target::build(&cfg.matrix).unwrap().frobenius_norm();
        assert!(out.true_fro_error <= 1e-6 * norm);
    }

    #[test]
    fn exhaustion_is_flagged_on_last_row() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            dir.path(),
            "kind = \"chan\"\nn = 60",
            "tol = 0.0\ns0 = 5\ngrowth = 5\ns_max = 20\nseed = 1",
        );
        let out = run_adaptive(&cfg).unwrap();
        assert_eq!(out.trace.termination, Termination::SMaxReached);
        let text = String::from_utf8(out.csv).unwrap();
        assert!(text.lines().last().unwrap().ends_with(",s_max_reached"));
        let s: Vec<usize> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
        assert_eq!(s, vec![5, 10, 15, 20]);
    }

    #[test]
    fn bad_adaptive_config_is_rejected() {
        let text = "output_path=\"x\"\n[matrix]\nkind=\"chan\"\nn=10\n[adaptive]\ntol=1.0\ns0=5\ngrowth=1\ns_max=4\nseed=1\n";
        assert!(matches!(AdaptiveRunConfig::from_toml_str(text), Err(Error::Config(_))));
    }
}
