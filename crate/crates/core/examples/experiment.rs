//! A small replicated study written to a directory, followed by its figure data.
//!
//! `cargo run --release --example experiment -- <out-dir>`
use lsbw::harness::{emit_figures_data, run_experiment, ExperimentConfig, FigureId};

fn main() -> lsbw::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-experiment".into());
    let cfg = ExperimentConfig::from_json(
        r#"{
            "model": {"curve": "sin_full", "n": 500},
            "selector": {"method": "cv", "cutoff": 0.12},
            "replications": 20,
            "base_seed": 1
        }"#,
    )?;
    let result = run_experiment(&cfg, out.as_ref())?;
    println!("{}", serde_json::to_string_pretty(&result.summary).unwrap());
    for id in FigureId::for_result(&result) {
        println!("{}", emit_figures_data(&result, id, &result.out_dir.join("figures"))?.display());
    }
    Ok(())
}
