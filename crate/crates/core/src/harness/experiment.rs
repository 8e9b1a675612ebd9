//! Sketch-size sweeps: one CSV row per `(s, trial)`.
//!
//! Each row records the true and optimal (truncated SVD) Frobenius errors,
//! the requested fast estimates, optionally their brute-force counterparts,
//! and optionally wall-clock times. Numerical failures do not abort the run;
//! they are reported in the row's `flags` column as `stage:tag` items
//! separated by `;` (for example `gn:rank_deficient_core` or `lto:singular_core`).

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::approximators::{nystrom, true_error_dense, GNFactors};
use crate::error::{Error, Result};
use crate::estimators::{loo_nystrom_fast, lpo_fast, lro_fast, lto_fast, EstimateReport, EstimatorKind};
use crate::harness::config::{ExperimentConfig, MatrixSpec};
use crate::linalg::{singular_values, tail_norm, thin_qr};
use crate::operator::LinearOperator;
use crate::oracles::{loo_nystrom_naive, lpo_naive, lro_naive, lto_naive};
use crate::sketching::{gaussian_sketch, SketchPair};
use crate::testmatrices::{chan_matrix, expdecay_matrix, psd_expdecay_matrix, GreensOperator};

/// Fast and brute-force values whose relative gap exceeds this are flagged.
pub const MISMATCH_TOL: f64 = 1e-6;

/// CSV header. The trailing `*_naive` columns follow `flags`.
pub const COLUMNS: [&str; 24] = [
    "matrix_id",
    "n",
    "m",
    "s",
    "r",
    "trial",
    "seed",
    "true_fro_error",
    "optimal_fro_error",
    "lpo",
    "lto",
    "lro",
    "loo",
    "t_fast_lpo",
    "t_naive_lpo",
    "t_fast_lto",
    "t_naive_lto",
    "t_fast_lro",
    "t_naive_lro",
    "flags",
    "lpo_naive",
    "lto_naive",
    "lro_naive",
    "loo_naive",
];

/// A materialized experiment target together with its cached spectrum.
pub struct Target {
    pub id: String,
    pub spsd: bool,
    /// Matrix-free access, when the target has one.
    operator: Option<Box<dyn LinearOperator>>,
    pub dense: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl Target {
    pub fn build(spec: &MatrixSpec) -> Result<Target> {
        spec.validate()?;
        let (operator, dense): (Option<Box<dyn LinearOperator>>, DMatrix<f64>) = match spec {
            MatrixSpec::Expdecay { n, rate, seed } => (None, expdecay_matrix(*n, *rate, *seed)),
            MatrixSpec::PsdExpdecay { n, rate, seed } => (None, psd_expdecay_matrix(*n, *rate, *seed)),
            MatrixSpec::Chan { n } => (None, chan_matrix(*n)),
            MatrixSpec::LowRank { n, rank, seed } => {
                (None, gaussian_sketch(*n, *rank, seed.derive(1)) * gaussian_sketch(*n, *rank, seed.derive(2)).transpose())
            }
            MatrixSpec::Advdiff(cfg) => {
                let g = GreensOperator::new(cfg.clone())?;
                let dense = g.to_dense();
                (Some(Box::new(g)), dense)
            }
        };
        let singular_values = singular_values(&dense);
        Ok(Target { id: spec.id(), spsd: spec.is_spsd(), operator, dense, singular_values })
    }

    /// The operator that sketches are drawn from.
    pub fn op(&self) -> &dyn LinearOperator {
        match &self.operator {
            Some(op) => op.as_ref(),
            None => &self.dense,
        }
    }

    pub fn optimal_error(&self, rank: usize) -> f64 {
        tail_norm(&self.singular_values, rank)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// Values of one estimator in one row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimatorCell {
    pub fast: Option<f64>,
    pub naive: Option<f64>,
    /// Seconds.
    pub t_fast: Option<f64>,
    pub t_naive: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub matrix_id: String,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub r: usize,
    pub trial: usize,
    pub seed: u64,
    pub true_fro_error: Option<f64>,
    pub optimal_fro_error: f64,
    pub lpo: EstimatorCell,
    pub lto: EstimatorCell,
    pub lro: EstimatorCell,
    pub loo: EstimatorCell,
    pub flags: Vec<String>,
}

impl ResultRow {
    pub fn cell(&self, kind: EstimatorKind) -> &EstimatorCell {
        match kind {
            EstimatorKind::Lpo => &self.lpo,
            EstimatorKind::Lto => &self.lto,
            EstimatorKind::Lro => &self.lro,
            EstimatorKind::Loo => &self.loo,
        }
    }

    fn cell_mut(&mut self, kind: EstimatorKind) -> &mut EstimatorCell {
        match kind {
            EstimatorKind::Lpo => &mut self.lpo,
            EstimatorKind::Lto => &mut self.lto,
            EstimatorKind::Lro => &mut self.lro,
            EstimatorKind::Loo => &mut self.loo,
        }
    }

    pub fn has_flag(&self, prefix: &str) -> bool {
        self.flags.iter().any(|f| f.starts_with(prefix))
    }

    fn record(&mut self, item: String) {
        self.flags.push(item);
    }

    fn fields(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        vec![
            self.matrix_id.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.s.to_string(),
            self.r.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            f(self.true_fro_error),
            format_float(self.optimal_fro_error),
            f(self.lpo.fast),
            f(self.lto.fast),
            f(self.lro.fast),
            f(self.loo.fast),
            f(self.lpo.t_fast),
            f(self.lpo.t_naive),
            f(self.lto.t_fast),
            f(self.lto.t_naive),
            f(self.lro.t_fast),
            f(self.lro.t_naive),
            self.flags.join(";"),
            f(self.lpo.naive),
            f(self.lto.naive),
            f(self.lro.naive),
            f(self.loo.naive),
        ]
    }
}

/// Shortest decimal string that parses back to the same `f64`; `inf`, `-inf`, `NaN` otherwise.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Runs `f` `repeats` times and returns the last result with the fastest time in seconds.
fn timed<T>(repeats: usize, mut f: impl FnMut() -> T) -> (T, f64) {
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let v = f();
        best = best.min(start.elapsed().as_secs_f64());
        out = Some(v);
    }
    (out.expect("repeats >= 1"), best)
}

fn rel_gap(fast: f64, naive: f64) -> f64 {
    (fast - naive).abs() / naive.abs()
}

/// Computes one row. Never fails: numerical problems become flags.
pub fn compute_row(cfg: &ExperimentConfig, target: &Target, s: usize, trial: usize) -> ResultRow {
    let op = target.op();
    let (m, n) = (op.nrows(), op.ncols());
    let r = cfg.r_for(s);
    let seed = cfg.row_seed(s, trial);
    let mut row = ResultRow {
        matrix_id: target.id.clone(),
        n,
        m,
        s,
        r,
        trial,
        seed: seed.0,
        true_fro_error: None,
        optimal_fro_error: target.optimal_error(s),
        lpo: EstimatorCell::default(),
        lto: EstimatorCell::default(),
        lro: EstimatorCell::default(),
        loo: EstimatorCell::default(),
        flags: Vec::new(),
    };

    let sketch = SketchPair::from_seed(m, n, s, r, seed);
    let y = op.apply_block(&sketch.omega);
    let z = op.adjoint_apply_block(&sketch.phi).transpose();
    let h = sketch.phi.tr_mul(&y);
    let r_omega = thin_qr(&y).1;

    match GNFactors::from_sketches(y, z, h.clone()) {
        Ok(f) => {
            let err = true_error_dense(&target.dense, &f);
            if err < row.optimal_fro_error - 1e-10 * target.frobenius_norm() {
                row.record("eckart_young_violation".into());
            }
            row.true_fro_error = Some(err);
        }
        Err(e) => row.record(format!("gn:{}", e.tag())),
    }

    let repeats = cfg.timing_repeats;
    for &kind in &cfg.estimators {
        let name = kind.name().to_ascii_lowercase();
        let (fast, t_fast): (Result<EstimateReport>, f64) = match kind {
            EstimatorKind::Lpo => timed(repeats, || lpo_fast(&h)),
            EstimatorKind::Lto => timed(repeats, || lto_fast(&h)),
            EstimatorKind::Lro => timed(repeats, || lro_fast(&r_omega, &h)),
            EstimatorKind::Loo => timed(repeats, || {
                nystrom(op, &sketch.omega).and_then(|ny| loo_nystrom_fast(&ny.rfac, &ny.h))
            }),
        };
        let fast = match fast {
            Ok(report) => {
                if report.degenerate {
                    row.record(format!("{name}:degenerate"));
                }
                Some(report.value)
            }
            Err(e) => {
                row.record(format!("{name}:{}", e.tag()));
                None
            }
        };
        let (naive, t_naive) = if cfg.include_naive {
            let (v, t) = match kind {
                EstimatorKind::Lpo => timed(repeats, || lpo_naive(op, &sketch.omega, &sketch.phi)),
                EstimatorKind::Lto => timed(repeats, || lto_naive(op, &sketch.omega, &sketch.phi)),
                EstimatorKind::Lro => timed(repeats, || lro_naive(op, &sketch.omega, &sketch.phi)),
                EstimatorKind::Loo => timed(repeats, || loo_nystrom_naive(op, &sketch.omega)),
            };
            match v {
                Ok(v) => (Some(v), Some(t)),
                Err(e) => {
                    row.record(format!("{name}_naive:{}", e.tag()));
                    (None, Some(t))
                }
            }
        } else {
            (None, None)
        };
        if let (Some(a), Some(b)) = (fast, naive) {
            if a.is_finite() && b.is_finite() && rel_gap(a, b) > MISMATCH_TOL {
                row.record(format!("{name}:mismatch"));
            }
        }
        let cell = row.cell_mut(kind);
        cell.fast = fast;
        cell.naive = naive;
        if cfg.timings {
            cell.t_fast = Some(t_fast);
            cell.t_naive = t_naive;
        }
    }
    row
}

/// All rows of an experiment, ordered by `(s, trial)`, without writing anything.
pub fn compute_rows(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let target = Target::build(&cfg.matrix)?;
    let mut rows = Vec::with_capacity(cfg.s_grid.len() * cfg.trials);
    for &s in &cfg.s_grid {
        for trial in 0..cfg.trials {
            rows.push(compute_row(cfg, &target, s, trial));
        }
    }
    Ok(rows)
}

/// Runs the experiment and writes its CSV to `cfg.output_path`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let rows = compute_rows(cfg)?;
    write_csv(&rows, &cfg.output_path)?;
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Serializes rows to CSV bytes (UTF-8, LF line endings).
pub fn to_csv_bytes(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(COLUMNS).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.fields()).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_atomic(path, &to_csv_bytes(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketching::Seed;

    fn config(estimators: Vec<EstimatorKind>, discrepancy: usize) -> ExperimentConfig {
        ExperimentConfig {
            matrix: MatrixSpec::Expdecay { n: 40, rate: 4.0, seed: Seed(1) },
            s_grid: vec![4, 8, 12],
            discrepancy,
            estimators,
            include_naive: true,
            trials: 2,
            base_seed: Seed(5),
            output_path: "unused.csv".into(),
            timings: false,
            timing_repeats: 1,
        }
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1e-300, 123456.789, 2f64.powf(-41.5), 3.0] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(3.0), "3.0");
    }

    #[test]
    fn rows_are_ordered_and_consistent() {
        let cfg = config(vec![EstimatorKind::Lpo, EstimatorKind::Lto, EstimatorKind::Lro], 0);
        let rows = compute_rows(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        let keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.s, r.trial)).collect();
        assert_eq!(keys, vec![(4, 0), (4, 1), (8, 0), (8, 1), (12, 0), (12, 1)]);
        for row in &rows {
            assert!(row.flags.is_empty(), "{:?}", row.flags);
            assert!(row.true_fro_error.unwrap() >= row.optimal_fro_error);
            for kind in [EstimatorKind::Lpo, EstimatorKind::Lto, EstimatorKind::Lro] {
                let c = row.cell(kind);
                assert!(rel_gap(c.fast.unwrap(), c.naive.unwrap()) <= 1e-8);
                assert!(c.t_fast.is_none());
            }
            assert!(row.loo.fast.is_none());
        }
    }

    #[test]
    fn csv_has_header_and_empty_absent_fields() {
        let mut cfg = config(vec![EstimatorKind::Lro], 5);
        cfg.include_naive = false;
        let rows = compute_rows(&cfg).unwrap();
        let text = String::from_utf8(to_csv_bytes(&rows).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), COLUMNS.len());
        assert_eq!(first[3], "4");
        assert_eq!(first[4], "9");
        assert!(first[9].is_empty() && first[10].is_empty());
        assert!(!first[11].is_empty());
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn timings_are_recorded_when_enabled() {
        let mut cfg = config(vec![EstimatorKind::Lro], 0);
        cfg.timings = true;
        cfg.s_grid = vec![6];
        cfg.trials = 1;
        let rows = compute_rows(&cfg).unwrap();
        assert!(rows[0].lro.t_fast.unwrap() >= 0.0);
        assert!(rows[0].lro.t_naive.unwrap() >= 0.0);
        assert!(rows[0].lpo.t_fast.is_none());
    }

    #[test]
    fn loo_on_spsd_target() {
        let mut cfg = config(vec![EstimatorKind::Loo, EstimatorKind::Lro], 0);
        cfg.matrix = MatrixSpec::PsdExpdecay { n: 40, rate: 4.0, seed: Seed(2) };
        let rows = compute_rows(&cfg).unwrap();
        for row in rows {
            assert!(rel_gap(row.loo.fast.unwrap(), row.loo.naive.unwrap()) <= 1e-8);
        }
    }

    #[test]
    fn numerical_failures_become_flags() {
        // Rank 3 target: cores wider than 3 are rank deficient.
        let cfg = ExperimentConfig {
            matrix: MatrixSpec::Expdecay { n: 30, rate: 0.05, seed: Seed(3) },
            s_grid: vec![2, 20],
            ..config(vec![EstimatorKind::Lto, EstimatorKind::Lro], 0)
        };
        let rows = compute_rows(&cfg).unwrap();
        assert!(rows[0].flags.is_empty(), "{:?}", rows[0].flags);
        let wide = &rows[2];
        assert!(wide.has_flag("gn:rank_deficient_core"), "{:?}", wide.flags);
        assert!(wide.true_fro_error.is_none());
        assert!(wide.lro.fast.is_none());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("out.csv");
        write_atomic(&path, b"one\n").unwrap();
        write_atomic(&path, b"two\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two\n");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
