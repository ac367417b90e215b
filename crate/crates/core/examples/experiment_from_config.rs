//! Runs a JSON experiment configuration and writes CSV, JSON and SVG output.
//!
//! `cargo run --release --example experiment_from_config -- config.json out/`
//! Without arguments a small homogenization run is used.

use reslab::harness::{emit_report, run_experiment, ExperimentConfig, OutputFormat};

const DEFAULT: &str = r#"{
  "experiment": "homogenize",
  "scheme": "gasket",
  "levels": [1, 2, 3, 4],
  "alpha": 0.5,
  "replicas": 200,
  "seed": 11
}"#;

fn main() -> reslab::Result<()> {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(p) => std::fs::read_to_string(p)?,
        None => DEFAULT.to_string(),
    };
    let out = args.next().unwrap_or_else(|| "target/experiment_from_config".into());
    let config = ExperimentConfig::from_json(&text)?;
    let report = run_experiment(&config)?;
    for f in emit_report(&report, std::path::Path::new(&out), &OutputFormat::ALL)? {
        println!("{}", f.display());
    }
    println!("content hash {}", report.content_hash);
    println!("all checks pass: {}", report.all_checks_pass());
    Ok(())
}
