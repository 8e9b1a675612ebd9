use std::collections::HashMap;

use gnloo::harness::experiment::COLUMNS;
use gnloo::harness::{run_adaptive, run_experiment, AdaptiveRunConfig, ExperimentConfig};
use gnloo::Termination;

fn read_rows(path: &std::path::Path) -> (Vec<String>, Vec<HashMap<String, String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect();
    (header, rows)
}

fn num(row: &HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap_or_else(|_| panic!("{col} = {:?}", row[col]))
}

#[test]
fn experiment_csv_has_consistent_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/run.csv");
    let text = format!(
        r#"
        s_grid = [5, 10, 15]
        estimators = ["LPO", "LTO", "LRO"]
        include_naive = true
        trials = 2
        base_seed = 11
        output_path = {out:?}

        [matrix]
        kind = "expdecay"
        n = 80
        rate = 4.0
        seed = 2
        "#
    );
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 6);

    let (header, records) = read_rows(&out);
    assert_eq!(header, COLUMNS.iter().map(|c| c.to_string()).collect::<Vec<_>>());
    assert_eq!(records.len(), 6);
    for rec in &records {
        assert_eq!(rec["flags"], "", "unexpected flags in {rec:?}");
        assert_eq!(rec["s"], rec["r"]);
        assert_eq!(rec["loo"], "");
        assert_eq!(rec["t_fast_lro"], "");
        let truth = num(rec, "true_fro_error");
        assert!(truth >= num(rec, "optimal_fro_error"));
        for est in ["lpo", "lto", "lro"] {
            let (fast, naive) = (num(rec, est), num(rec, &format!("{est}_naive")));
            assert!((fast - naive).abs() <= 1e-8 * naive, "{est}: {fast} vs {naive}");
        }
    }
}

#[test]
fn discrepant_sweep_reports_lro_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let text = format!(
        "s_grid = [4, 8]\ndiscrepancy = 3\nestimators = [\"LRO\"]\ninclude_naive = false\nbase_seed = 1\noutput_path = {out:?}\n[matrix]\nkind = \"chan\"\nn = 40\n"
    );
    run_experiment(&ExperimentConfig::from_toml_str(&text).unwrap()).unwrap();
    let (_, records) = read_rows(&out);
    for rec in &records {
        assert_eq!(num(rec, "r"), num(rec, "s") + 3.0);
        assert!(num(rec, "lro") > 0.0);
        assert_eq!(rec["lpo"], "");
        assert_eq!(rec["lro_naive"], "");
    }
}

#[test]
fn adaptive_run_stops_at_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let text = format!(
        "output_path = {out:?}\n[matrix]\nkind = \"expdecay\"\nn = 200\nrate = 4.0\nseed = 5\n[adaptive]\ntol = 1e-3\nrelative = true\ns0 = 10\ngrowth = 10\ns_max = 120\nseed = 9\n"
    );
    let cfg = AdaptiveRunConfig::from_toml_str(&text).unwrap();
    let result = run_adaptive(&cfg).unwrap();
    assert_eq!(result.trace.termination, Termination::TolMet);
    let last = result.trace.entries.last().unwrap();
    assert!(last.estimate <= last.threshold);
    assert!(result.trace.entries[..result.trace.entries.len() - 1].iter().all(|e| e.estimate > e.threshold));
    // The estimate is meant to track the true error, not bound it.
    assert!(result.true_fro_error <= 10.0 * last.threshold);
    assert_eq!(std::fs::read(&out).unwrap(), result.csv);
}
