//! Cross-level KS distances for the trap model and the random conductance
//! walks on the gasket, written to `target/scaling_experiment/`.
//!
//! `cargo run --release --example scaling_experiment -- btm 2000`

use reslab::environments::ConductanceLaw;
use reslab::harness::{emit_report, run_experiment, ExperimentConfig, ExperimentKind, OutputFormat};

fn main() -> reslab::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind = args.next().unwrap_or_else(|| "btm".into());
    let replicas: usize = args.next().map(|s| s.parse().expect("replicas is an integer")).unwrap_or(1000);
    let mut c = match kind.as_str() {
        "btm" => ExperimentConfig::new(ExperimentKind::Btm, vec![2, 3, 4]),
        "lbm" => {
            let mut c = ExperimentConfig::new(ExperimentKind::Lbm, vec![2, 3, 4]);
            c.kappa = Some(0.2);
            c
        }
        "rcm" => {
            let mut c = ExperimentConfig::new(ExperimentKind::RcmFractal, vec![2, 3, 4]);
            c.times = vec![0.01, 0.05, 0.2];
            c
        }
        other => panic!("unknown experiment {other}; use btm, lbm or rcm"),
    };
    c.alpha = Some(0.5);
    c.law = Some(ConductanceLaw::pareto(0.5));
    c.replicas = replicas;
    c.seed = 1;
    let report = run_experiment(&c)?;

    let ks = report.table("ks").unwrap();
    for r in 0..ks.rows.len() {
        let cells: Vec<String> = (0..ks.columns.len()).map(|k| ks.cell(r, k)).collect();
        println!("{}", cells.join("\t"));
    }
    for (name, ok) in &report.checks {
        println!("{name}: {ok}");
    }
    for rule in &report.scaling {
        println!("{}: {} with constant {:.4} (estimated: {})", rule.walk, rule.formula, rule.constant, rule.estimated);
    }
    let dir = std::path::Path::new("target/scaling_experiment").join(&kind);
    let files = emit_report(&report, &dir, &OutputFormat::ALL)?;
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}
