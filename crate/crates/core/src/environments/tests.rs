use super::*;
use crate::network::{build_fractal_graph, build_path, random_connected, FractalScheme};
use crate::resistance::resistance_matrix;
use crate::rng::stream;

fn within_sigma(p_hat: f64, p: f64, n: usize, k: f64) -> bool {
    (p_hat - p).abs() <= k * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn constant_law_sets_every_edge() {
    let g = build_fractal_graph(&FractalScheme::gasket(), 2).unwrap();
    let law = ConductanceLaw::Constant { value: 2.5 };
    for mode in [SamplingMode::PerEdge, SamplingMode::PerCell, SamplingMode::PerCellShared] {
        let net = sample_conductances(&g.network, &law, mode, &mut stream(1, 0)).unwrap();
        assert!(net.edges().iter().all(|e| e.conductance == 2.5));
    }
}

#[test]
fn pareto_tail_and_median() {
    let mut rng = stream(2, 0);
    let n = 100_000;
    let law = ConductanceLaw::pareto(0.5);
    let mut draws: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
    let tail = draws.iter().filter(|w| **w > 10.0).count() as f64 / n as f64;
    assert!(within_sigma(tail, 10f64.powf(-0.5), n, 3.0), "tail {tail}");
    assert!(draws.iter().all(|w| *w >= 1.0));
    draws.sort_by(f64::total_cmp);
    let median = draws[n / 2];
    // P(w <= median_hat) = 1/2 + O(n^-1/2); map back through the CDF
    let cdf = 1.0 - median.powf(-0.5);
    assert!((cdf - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt(), "median {median} vs {}", 2f64.powf(2.0));
    let alpha = hill_estimator(&draws, 2_000).unwrap();
    assert!((alpha - 0.5).abs() < 0.05, "hill {alpha}");
}

#[test]
fn law_validation() {
    assert!(ConductanceLaw::pareto(0.0).validate().is_err());
    assert!(ConductanceLaw::Constant { value: -1.0 }.validate().is_err());
    assert!(ConductanceLaw::Lognormal { log_mean: 0.0, log_sd: 1.0, floor: 0.0 }.validate().is_err());
    let l = ConductanceLaw::Lognormal { log_mean: 0.0, log_sd: 1.0, floor: 0.5 };
    let mut rng = stream(3, 0);
    assert!((0..1000).all(|_| l.sample(&mut rng) > 0.5));
    assert!(!ConductanceLaw::pareto(0.5).has_finite_mean());
    assert!(ConductanceLaw::pareto(2.0).has_finite_mean());
    let json = serde_json::to_string(&l).unwrap();
    assert_eq!(serde_json::from_str::<ConductanceLaw>(&json).unwrap(), l);
}

#[test]
fn per_cell_modes() {
    let path = build_path(4, 1.0).unwrap();
    let law = ConductanceLaw::pareto(0.5);
    assert!(sample_conductances(&path, &law, SamplingMode::PerCell, &mut stream(4, 0)).is_err());

    let g = build_fractal_graph(&FractalScheme::gasket(), 2).unwrap();
    let shared = sample_conductances(&g.network, &law, SamplingMode::PerCellShared, &mut stream(4, 0)).unwrap();
    let cells = g.cell_index();
    for edges in &cells.edges {
        let c0 = shared.edges()[edges[0]].conductance;
        assert!(edges.iter().all(|e| shared.edges()[*e].conductance == c0));
    }
    let indep = sample_conductances(&g.network, &law, SamplingMode::PerCell, &mut stream(4, 0)).unwrap();
    let distinct = cells.edges.iter().filter(|edges| {
        let c0 = indep.edges()[edges[0]].conductance;
        edges.iter().any(|e| indep.edges()[*e].conductance != c0)
    });
    assert_eq!(distinct.count(), cells.len());
}

#[test]
fn trap_landscape_tail() {
    let net = build_path(99_999, 1.0).unwrap();
    let xi = trap_landscape(&net, 0.5, &mut stream(5, 0)).unwrap();
    assert!(xi.iter().all(|x| *x >= 1.0));
    let n = xi.len();
    let tail = xi.iter().filter(|x| **x > 100.0).count() as f64 / n as f64;
    assert!(within_sigma(tail, 0.1, n, 3.0), "tail {tail}");
    assert!(trap_landscape(&net, 1.0, &mut stream(5, 0)).is_err());
}

#[test]
fn degree_measure_handshake() {
    assert_eq!(degree_measure(&build_path(1, 1.0).unwrap()), vec![1.0, 1.0]);
    let mut rng = stream(6, 0);
    for _ in 0..10 {
        let net = random_connected(20, 15, &mut rng).unwrap();
        let nu = degree_measure(&net);
        let total: f64 = net.edges().iter().map(|e| e.conductance).sum();
        assert!((nu.iter().sum::<f64>() - 2.0 * total).abs() < 1e-12 * total);
    }
    let g = build_fractal_graph(&FractalScheme::gasket(), 1).unwrap();
    let nu = degree_measure(&g.network);
    for (x, v) in nu.iter().enumerate() {
        assert_eq!(*v as usize, g.network.neighbors(x).len());
    }
}

#[test]
fn gff_variances_match_resistance() {
    let mut rng = stream(7, 0);
    let net = random_connected(12, 10, &mut rng).unwrap();
    let r = resistance_matrix(&net).unwrap();
    let sampler = GffSampler::new(&net).unwrap();
    let root = net.root();
    for x in 0..12 {
        assert!((sampler.variance()[x] - r.get(root, x)).abs() < 1e-10);
    }
    let n = 10_000;
    let samples: Vec<GffSample> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    assert!(samples.iter().all(|s| s.values[root] == 0.0));
    for x in 0..12 {
        for y in x + 1..12 {
            let v = samples.iter().map(|s| (s.values[x] - s.values[y]).powi(2)).sum::<f64>() / n as f64;
            assert!((v / r.get(x, y) - 1.0).abs() < 0.05, "pair ({x},{y}): {v} vs {}", r.get(x, y));
        }
    }
}

#[test]
fn liouville_normalisation() {
    let mut rng = stream(8, 0);
    let net = build_path(6, 1.0).unwrap();
    let sampler = GffSampler::new(&net).unwrap();
    let mu = net.measure().to_vec();
    let s = sampler.sample(&mut rng);
    assert_eq!(liouville_measure(&s, 0.0, &mu).unwrap(), mu);
    assert!(liouville_measure(&s, -1.0, &mu).is_err());

    let kappa = 0.5;
    let n = 10_000;
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|_| liouville_measure(&sampler.sample(&mut rng), kappa, &mu).unwrap())
        .collect();
    for x in 0..7 {
        let g = sampler.variance()[x];
        let mean = draws.iter().map(|d| d[x]).sum::<f64>() / n as f64;
        let second = draws.iter().map(|d| d[x] * d[x]).sum::<f64>() / n as f64;
        let sd = ((kappa * kappa * g).exp() - 1.0).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * sd / (n as f64).sqrt() + 1e-12, "vertex {x}: {mean}");
        // lognormal second moment e^{kappa^2 g}; E nu^4 = e^{6 k^2 g} gives its sd
        let m2 = (kappa * kappa * g).exp();
        let sd2 = ((6.0 * kappa * kappa * g).exp() - m2 * m2).sqrt();
        assert!((second - m2).abs() <= 4.0 * sd2 / (n as f64).sqrt() + 1e-12, "vertex {x}: {second} vs {m2}");
    }
}

#[test]
fn fin_measure_basics() {
    let mut rng = stream(9, 0);
    let empty = fin_measure(&[0.0; 5], 0.5, 1e-3, &mut rng).unwrap();
    assert!(empty.atoms.is_empty());
    assert_eq!(empty.metadata.bias, 0.0);
    assert!(fin_measure(&[1.0], 0.5, 0.0, &mut rng).is_err());
    assert!(fin_measure(&[1.0], 1.5, 1e-3, &mut rng).is_err());

    // atom count is Poisson with mean mu(F) v_min^-alpha
    let base = vec![0.25; 4];
    let v_min: f64 = 1e-2;
    let reps = 20_000;
    let mut count = 0usize;
    for _ in 0..reps {
        let m = fin_measure(&base, 0.5, v_min, &mut rng).unwrap();
        assert!(m.atoms.iter().all(|a| a.1 >= v_min));
        count += m.metadata.atom_count;
    }
    let expected = v_min.powf(-0.5);
    let mean = count as f64 / reps as f64;
    assert!((mean - expected).abs() < 4.0 * (expected / reps as f64).sqrt(), "{mean} vs {expected}");

    let m = fin_measure(&base, 0.5, v_min, &mut rng).unwrap();
    assert!((m.metadata.bias - 1.0 * 0.5 * v_min.sqrt() / 0.5).abs() < 1e-15);
    let mut side = Vec::new();
    m.write_sidecar(&mut side).unwrap();
    let back: FinMetadata = serde_json::from_slice(&side).unwrap();
    assert_eq!(back, m.metadata);
}

#[test]
fn fin_atoms_above_threshold() {
    // atoms above v0: Poisson with mean mu(F) v0^-alpha; per-atom weights drawn as in fin_measure
    let mut rng = stream(10, 0);
    let (alpha, v_min, v0): (f64, f64, f64) = (0.5, 1e-2, 0.5);
    let reps = 20_000;
    let mut above = 0usize;
    for _ in 0..reps {
        let count = rand_distr::Poisson::new(v_min.powf(-alpha)).unwrap().sample(&mut rng) as usize;
        above += (0..count).filter(|_| v_min * pareto(&mut rng, alpha) >= v0).count();
    }
    let expected = v0.powf(-alpha);
    let mean = above as f64 / reps as f64;
    assert!((mean - expected).abs() < 4.0 * (expected / reps as f64).sqrt(), "{mean} vs {expected}");
}

#[test]
fn fin_laplace_functional_small_budget() {
    let mut rng = stream(11, 0);
    let n = 10_000;
    let lambda = 1.0;
    let vals: Vec<f64> = (0..n)
        .map(|_| (-lambda * fin_measure(&[1.0], 0.5, 1e-4, &mut rng).unwrap().total()).exp())
        .collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let exact = fin_laplace_transform(lambda, 0.5, 1.0);
    assert!((exact - (-std::f64::consts::PI.sqrt()).exp()).abs() < 1e-12);
    assert!((mean - exact).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {exact}");
}
