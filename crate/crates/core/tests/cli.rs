use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lsbw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsbw")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn single_path_commands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases: [(&[&str], &str, &str); 4] = [
        (&["simulate", "--model", "sin_scaled", "--n", "50"], "path.csv", "# n=50"),
        (
            &["estimate", "--model", "sin_scaled", "--n", "400", "--h", "0.2", "--variant", "raw"],
            "estimate.csv",
            "u,value_1,h,variant",
        ),
        (
            &["select-cv", "--model", "sin_full", "--n", "300", "--alpha-cutoff", "0.12", "--grid", "25"],
            "cv.csv",
            "h,objective",
        ),
        (
            &["select-lepski", "--model", "step", "--n", "600", "--c-sharp", "0.8", "--lrv-rn", "10"],
            "lepski.csv",
            "u,h_hat,estimate_1,sigma_trace,flags",
        ),
    ];
    for (args, file, head) in cases {
        let mut full = args.to_vec();
        full.extend(["--out-dir", out, "--seed", "4"]);
        let o = lsbw(&full);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(dir.path().join(file)).unwrap();
        assert!(text.starts_with(head), "{file}: {}", &text[..text.len().min(80)]);
    }
}

#[test]
fn seed_flag_determines_the_path() {
    let run = |seed: &str| lsbw(&["simulate", "--model", "step", "--n", "20", "--seed", seed]).stdout;
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}

#[test]
fn experiment_and_figures_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model": {"curve": "sin_full", "n": 300}, "selector": {"method": "cv", "cutoff": 0.12}, "replications": 3}"#,
    );
    let run_dir = dir.path().join("run");
    let run_dir = run_dir.to_str().unwrap();
    let o = lsbw(&["experiment", "--config", &cfg, "--out-dir", run_dir, "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lsbw(&["figures", "--out-dir", run_dir, "--figure", "cv_histogram"]);
    assert!(o.status.success());
    assert!(Path::new(run_dir).join("figures/cv_histogram.csv").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(
        dir.path(),
        "u.json",
        r#"{"model": {"curve": "sin_full", "n": 300}, "selector": {"method": "cv", "cutoff": 0.12}, "extra": 1}"#,
    );
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["experiment", "--config", unknown.as_str(), "--out-dir", out],
        vec!["experiment", "--config", "/nonexistent.json"],
        vec!["experiment"],
        vec!["simulate", "--model", "wobbly", "--n", "10"],
        vec!["select-cv", "--model", "sin_full", "--n", "300", "--strategy", "median"],
        vec!["figures", "--out-dir", out, "--figure", "pie_chart"],
        vec!["simulate", "--no-such-flag"],
    ] {
        assert_eq!(lsbw(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn failure_budget_breach_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dead.json",
        r#"{"model": {"curve": "sin_full", "n": 300}, "selector": {"method": "cv", "cutoff": 0.5}, "replications": 3}"#,
    );
    let run_dir = dir.path().join("run");
    let o = lsbw(&["experiment", "--config", &cfg, "--out-dir", run_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
