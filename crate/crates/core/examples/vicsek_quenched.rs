//! Quenched comparison on the Vicsek tree: one environment per replica and
//! level, VSRW clock `rho 15^n t` with `rho = E[1/w]` estimated from the law.

use reslab::harness::{run_experiment, ExperimentConfig, ExperimentKind, Walk};

fn main() -> reslab::Result<()> {
    let mut c = ExperimentConfig::new(ExperimentKind::RcmTree, vec![1, 2, 3]);
    c.scheme = "vicsek".into();
    c.alpha = Some(0.5);
    c.walks = vec![Walk::Vsrw, Walk::Csrw];
    c.times = vec![0.02, 0.1, 0.5];
    c.replicas = 20;
    c.quenched = true;
    let report = run_experiment(&c)?;
    println!("rho = {:.4} +- {:.4}", report.summary["rho"], report.summary["rho_se"]);
    let res = report.table("resistance").unwrap();
    for row in &res.rows {
        println!("level {}: sup |a_n R^w - rho a_n R| = {:.4} (se {:.4})", row[0], row[1], row[2]);
    }
    for (name, ok) in &report.checks {
        println!("{name}: {ok}");
    }
    Ok(())
}
