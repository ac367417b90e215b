use super::*;
use crate::network::FractalScheme;

fn small(kind: ExperimentKind, levels: Vec<usize>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind, levels);
    c.replicas = 8;
    c.seed = 3;
    c
}

#[test]
fn validation_rejects_bad_configs() {
    let mut c = small(ExperimentKind::Btm, vec![2, 3]);
    assert!(c.validate().is_err());
    c.alpha = Some(0.5);
    c.validate().unwrap();
    c.levels = vec![3, 2];
    assert!(matches!(c.validate(), Err(crate::Error::Config(_))));
    c.levels = vec![2];
    assert!(c.validate().is_err());
    c.levels = vec![2, 3];
    c.replicas = 0;
    assert!(c.validate().is_err());
    c.replicas = 2;
    c.times = vec![1.0, 0.5];
    assert!(c.validate().is_err());
    c.times = vec![0.5];
    c.scheme = "carpet".into();
    assert!(c.validate().is_err());

    let mut t = small(ExperimentKind::RcmTree, vec![1, 2]);
    t.alpha = Some(0.5);
    assert!(t.validate().is_err(), "gasket graphs are not trees");
    t.scheme = "vicsek".into();
    t.validate().unwrap();

    assert!(ExperimentConfig::from_json(r#"{"experiment":"btm","levels":[1,2],"alpha":0.5,"bogus":1}"#).is_err());
    let parsed = ExperimentConfig::from_json(r#"{"experiment":"btm","levels":[1,2],"alpha":0.5}"#).unwrap();
    assert_eq!(parsed.replicas, 1000);
}

#[test]
fn schema_lists_fields() {
    let schema = ExperimentConfig::schema();
    let props = schema["properties"].as_object().unwrap();
    for key in ["experiment", "scheme", "levels", "alpha", "kappa", "times", "replicas", "seed", "output"] {
        assert!(props.contains_key(key), "{key}");
    }
}

#[test]
fn scaling_bases() {
    let g = FractalScheme::gasket();
    let v = FractalScheme::vicsek();
    assert!((ScalingRule::btm(&g, 0.5).unwrap().base - 15.0).abs() < 1e-9);
    assert!((ScalingRule::vsrw(&g).unwrap().base - 5.0).abs() < 1e-12);
    assert!((ScalingRule::csrw(&g, 0.5).unwrap().base - 15.0).abs() < 1e-9);
    assert!((ScalingRule::vsrw(&v).unwrap().base - 15.0).abs() < 1e-9);
    assert!((ScalingRule::csrw(&v, 0.5).unwrap().base - 75.0).abs() < 1e-9);
    let r = ScalingRule::vsrw(&g).unwrap().with_constant(2.0, None, false);
    assert!((r.time(3, 0.5) - 125.0).abs() < 1e-9);
}

#[test]
fn btm_report_is_deterministic() {
    let mut c = small(ExperimentKind::Btm, vec![1, 2, 3]);
    c.alpha = Some(0.5);
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.content_hash, a.compute_hash().unwrap());
    let ks = a.table("ks").unwrap();
    assert_eq!(ks.rows.len(), 3 * 3 * 2);
    assert!(ks.column("ks").unwrap().iter().all(|v| (0.0..=1.0).contains(v)));
    c.seed = 4;
    assert_ne!(run_experiment(&c).unwrap().content_hash, a.content_hash);
}

#[test]
fn lbm_without_coupling_is_the_counting_walk() {
    let mut c = small(ExperimentKind::Lbm, vec![1, 2]);
    c.kappa = Some(0.0);
    let lbm = run_experiment(&c).unwrap();
    let ks = lbm.table("ks").unwrap().column("ks").unwrap();
    let noise = lbm.table("ks").unwrap().column("noise").unwrap();
    assert!(noise.iter().all(|v| *v < 1e-12), "kappa = 0 leaves no randomness");
    assert!(ks.iter().all(|v| v.is_finite()));
    let sup = lbm.table("sup_gff").unwrap();
    assert_eq!(sup.rows.len(), 2);
}

#[test]
fn simulate_method_agrees_with_exact_in_law() {
    let mut c = small(ExperimentKind::Lbm, vec![1, 2]);
    c.kappa = Some(0.0);
    c.replicas = 4000;
    let exact = run_experiment(&c).unwrap();
    c.method = MarginalMethod::Simulate;
    let sim = run_experiment(&c).unwrap();
    let e = exact.table("ks").unwrap().column("ks").unwrap();
    let s = sim.table("ks").unwrap().column("ks").unwrap();
    for (a, b) in e.iter().zip(&s) {
        assert!((a - b).abs() < 0.06, "{a} vs {b}");
    }
}

#[test]
fn homogenize_point_mass_has_no_drift() {
    let mut c = small(ExperimentKind::Homogenize, vec![1, 2, 3]);
    c.law = Some(crate::environments::ConductanceLaw::Constant { value: 2.0 });
    let r = run_experiment(&c).unwrap();
    assert!((r.summary["rho"] - 5.0 / 3.0).abs() < 1e-8);
    let t = r.table("iterates").unwrap();
    for d in t.column("drift").unwrap().iter().skip(1) {
        assert!(d.abs() < 1e-9);
    }
    for v in t.column("max_variance").unwrap() {
        assert!(v.abs() < 1e-18);
    }
}

#[test]
fn c0_estimate_tracks_edge_density() {
    let g = FractalScheme::gasket();
    let law = crate::environments::ConductanceLaw::pareto(0.5);
    let (c0, se) = estimate_c0(&g, 3, &law, crate::environments::SamplingMode::PerCell, 0.5, 20_000, 1).unwrap();
    // nu(F) = 2 sum w_e is stable with scale 2 |E|^2 for alpha = 1/2
    let graph = crate::network::build_fractal_graph(&g, 3).unwrap();
    let ratio = graph.network.edge_count() as f64 / graph.network.vertex_count() as f64;
    let oracle = 2.0 * ratio * ratio;
    assert!((c0 - oracle).abs() < 4.0 * se + 1e-9, "{c0} +- {se} vs {oracle}");
}

#[test]
fn emit_writes_all_formats() {
    let mut c = small(ExperimentKind::Homogenize, vec![1, 2]);
    c.alpha = Some(0.5);
    let r = run_experiment(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&r, dir.path(), &OutputFormat::ALL).unwrap();
    assert!(files.iter().any(|p| p.ends_with("report.json")));
    assert!(files.iter().any(|p| p.ends_with("iterates.csv")));
    assert!(files.iter().any(|p| p.ends_with("iterates.svg")));
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back: Report = serde_json::from_str(&text).unwrap();
    // NaN != NaN, so compare through the serialized form
    assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&r).unwrap());
    assert_eq!(back.compute_hash().unwrap(), r.content_hash);
    let svg = std::fs::read_to_string(dir.path().join("iterates.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
}
