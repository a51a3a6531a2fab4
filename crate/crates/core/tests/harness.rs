use std::fs;

use lsbw::harness::figures::FigureId;
use lsbw::harness::run::{load_records, CONFIG_FILE, METADATA_FILE, RECORDS_FILE, SUMMARY_FILE};
use lsbw::harness::summary::Summary;
use lsbw::harness::{emit_figures_data, load_result, run_experiment, run_until, ExperimentConfig};
use lsbw::processes::{innovations, StreamSeed};
use lsbw::Error;

fn cv_config(reps: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"model": {{"curve": "sin_full", "n": 300}},
            "selector": {{"method": "cv", "cutoff": 0.12}},
            "replications": {reps}, "base_seed": 11}}"#
    ))
    .unwrap()
}

fn lepski_config(reps: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"model": {{"curve": "step", "n": 600}},
            "selector": {{"method": "lepski"}},
            "u_grid_points": 41, "replications": {reps}}}"#
    ))
    .unwrap()
}

#[test]
fn single_replication_aggregates_equal_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&cv_config(1), dir.path()).unwrap();
    assert_eq!(r.records.len(), 1);
    let rec = r.cv_records()[0].clone();
    let Summary::Cv(s) = &r.summary else { panic!() };
    let q = s.h_hat.unwrap();
    assert_eq!((q.q05, q.median, q.q95), (rec.h_hat, rec.h_hat, rec.h_hat));
    assert_eq!(s.ratio.unwrap().median, rec.ratio);
    assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 1);
    for f in [CONFIG_FILE, RECORDS_FILE, SUMMARY_FILE, METADATA_FILE] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn runs_are_bitwise_deterministic_across_worker_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = cv_config(9);
    run_experiment(&cfg, a.path()).unwrap();
    let mut cfg_b = cfg.clone();
    cfg_b.workers = Some(4);
    run_experiment(&cfg_b, b.path()).unwrap();
    for f in [RECORDS_FILE, SUMMARY_FILE] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn interrupted_run_resumes_to_identical_output() {
    let (full, part) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = cv_config(8);
    run_experiment(&cfg, full.path()).unwrap();
    assert_eq!(run_until(&cfg, part.path(), 3).unwrap(), 3);
    let path = part.path().join(RECORDS_FILE);
    let mut bytes = fs::read(&path).unwrap();
    bytes.extend_from_slice(b"{\"replication\":3,\"sta");
    fs::write(&path, bytes).unwrap();
    assert_eq!(load_records(part.path()).unwrap().len(), 3);
    let resumed = run_experiment(&cfg, part.path()).unwrap();
    assert_eq!(resumed.records.len(), 8);
    for f in [RECORDS_FILE, SUMMARY_FILE] {
        assert_eq!(fs::read(full.path().join(f)).unwrap(), fs::read(part.path().join(f)).unwrap(), "{f}");
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(part.path().join(METADATA_FILE)).unwrap()).unwrap();
    assert_eq!(meta["resumed_from"], 3);
}

#[test]
fn growing_the_replication_count_keeps_earlier_records() {
    let (small, large) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = run_experiment(&cv_config(3), small.path()).unwrap();
    let b = run_experiment(&cv_config(6), large.path()).unwrap();
    assert_eq!(a.records[..], b.records[..3]);
}

#[test]
fn a_directory_of_another_experiment_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cv_config(2), dir.path()).unwrap();
    let mut other = cv_config(2);
    other.base_seed = 12;
    assert!(matches!(run_experiment(&other, dir.path()), Err(Error::Config(_))));
}

#[test]
fn failure_budget_breach_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    // cutoff 0.5 removes the whole kernel support: every replication fails
    let cfg = ExperimentConfig::from_json(
        r#"{"model": {"curve": "sin_full", "n": 300},
            "selector": {"method": "cv", "cutoff": 0.5}, "replications": 4}"#,
    )
    .unwrap();
    let err = run_experiment(&cfg, dir.path()).unwrap_err();
    assert_eq!(err, Error::FailureBudget { failed: 4, total: 4 });
    let records = load_records(dir.path()).unwrap();
    assert!(records.iter().all(|r| r.failed()));
}

#[test]
fn summary_is_recomputable_from_records() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&cv_config(5), dir.path()).unwrap();
    let loaded = load_result(dir.path()).unwrap();
    assert_eq!(loaded.records, r.records);
    assert_eq!(loaded.summary, r.summary);
    let Summary::Cv(s) = &r.summary else { panic!() };
    let mut ratios: Vec<f64> = r.cv_records().iter().map(|c| c.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    assert_eq!(s.ratio.unwrap().median, ratios[2]);
    assert!(s.h_opt_formula.is_some());
}

#[test]
fn cv_figures_have_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&cv_config(3), dir.path()).unwrap();
    let out = dir.path().join("figures");
    let header = |id: FigureId| {
        let p = emit_figures_data(&r, id, &out).unwrap();
        let text = fs::read_to_string(p).unwrap();
        (text.lines().next().unwrap().to_string(), text.lines().count())
    };
    assert_eq!(header(FigureId::CvHistogram), ("h,count".into(), 51));
    assert_eq!(header(FigureId::CvBoxplot), ("replication,d_hat,d_star,ratio".into(), 4));
    let (sweep, rows) = header(FigureId::CvAlphaSweep);
    let cols: Vec<&str> = sweep.split(',').collect();
    assert_eq!(cols.len(), 36);
    assert_eq!((cols[0], cols[1], cols[35]), ("h", "cutoff_0.01", "cutoff_0.35"));
    assert_eq!(rows, 51);
    assert!(matches!(
        emit_figures_data(&r, FigureId::LepskiQuantiles, &out),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn lepski_figures_have_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&lepski_config(3), dir.path()).unwrap();
    let out = dir.path().join("figures");
    let p = emit_figures_data(&r, FigureId::LepskiQuantiles, &out).unwrap();
    let text = fs::read_to_string(p).unwrap();
    assert_eq!(text.lines().next().unwrap(), "u,q05,q95,truth,oracle_q05,oracle_q95");
    assert_eq!(text.lines().count(), 42);
    for id in [FigureId::LepskiSingle, FigureId::LepskiBoxplot] {
        emit_figures_data(&r, id, &out).unwrap();
    }
    assert_eq!(FigureId::for_result(&r).len(), 3);
}

#[test]
fn unknown_and_empty_figure_requests_fail() {
    assert!(matches!("histogram".parse::<FigureId>(), Err(Error::UnknownFigure(_))));
    let dir = tempfile::tempdir().unwrap();
    let mut r = run_experiment(&cv_config(1), dir.path()).unwrap();
    r.records.clear();
    assert_eq!(
        emit_figures_data(&r, FigureId::CvHistogram, dir.path()).unwrap_err(),
        Error::EmptyResult
    );
    let empty = tempfile::tempdir().unwrap();
    assert!(load_result(empty.path()).is_err());
}

#[test]
fn neighbouring_substreams_are_uncorrelated() {
    let n = 5000;
    for r in 0..5u64 {
        let x = innovations(StreamSeed::new(3, r), n);
        let y = innovations(StreamSeed::new(3, r + 1), n);
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let norm = (x.iter().map(|a| a * a).sum::<f64>() * y.iter().map(|b| b * b).sum::<f64>()).sqrt();
        assert!((dot / norm).abs() < 4.0 / (n as f64).sqrt(), "streams {r}, {}", r + 1);
    }
}
