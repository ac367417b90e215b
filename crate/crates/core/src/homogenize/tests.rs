use super::*;
use crate::network::{build_fractal_graph, FractalScheme};
use crate::resistance::effective_resistance;
use rand::Rng;

fn random_qm<R: Rng>(k: usize, rng: &mut R, lo: f64, hi: f64) -> QMatrix {
    let pairs: Vec<_> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, rng.random_range(lo..hi)))
        .collect();
    QMatrix::from_conductances(k, &pairs).unwrap()
}

fn probe<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn membership_predicates() {
    let u = QMatrix::uniform(3, 1.0).unwrap();
    assert!(u.in_q() && u.in_qm() && u.in_interior() && u.is_irreducible());
    let path = QMatrix::from_conductances(3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
    assert!(path.in_qm() && !path.in_interior() && path.is_irreducible());
    let split = QMatrix::from_conductances(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
    assert!(split.in_qm() && !split.is_irreducible());
    let neg = QMatrix::from_conductances(3, &[(0, 1, 1.0), (1, 2, -0.5)]).unwrap();
    assert!(neg.in_q() && !neg.in_qm());
    let mut m = u.matrix().clone();
    m[(0, 1)] += 1e-3;
    assert!(!QMatrix::new(m).unwrap().in_q());
    // tolerance is relative: tiny violations pass
    let mut m = u.matrix().clone();
    m[(0, 1)] += 1e-13;
    m[(0, 0)] -= 1e-13;
    assert!(QMatrix::new(m).unwrap().in_q());

    let mut rng = crate::rng::stream(1, 0);
    for _ in 0..200 {
        let q = random_qm(4, &mut rng, 0.01, 5.0);
        assert!(q.in_interior());
        let xi = probe(4, &mut rng);
        let direct: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| 0.5 * q.get(i, j) * (xi[i] - xi[j]).powi(2))
            .sum();
        assert!((q.form(&xi) - direct).abs() < 1e-12 * (1.0 + direct));
        assert!(q.form(&[1.0; 4]).abs() < 1e-12);
    }
}

#[test]
fn qmatrix_json_roundtrip() {
    let q = QMatrix::from_conductances(3, &[(0, 1, 0.1), (0, 2, 1.0 / 3.0), (1, 2, 2.0)]).unwrap();
    let s = serde_json::to_string(&q).unwrap();
    assert!(s.contains("\"labels\""));
    assert_eq!(serde_json::from_str::<QMatrix>(&s).unwrap(), q);
    assert!(serde_json::from_str::<QMatrix>(r#"{"labels":["a","b"],"entries":[1.0]}"#).is_err());
}

#[test]
fn level_zero_trace_is_identity() {
    let q = QMatrix::from_conductances(3, &[(0, 1, 0.7), (0, 2, 1.3), (1, 2, 2.0)]).unwrap();
    let t = trace_to_boundary(&FractalScheme::gasket(), 0, std::slice::from_ref(&q)).unwrap();
    assert!(t.distance(&q) < 1e-14);
}

#[test]
fn gasket_unit_triangle_traces_to_three_fifths() {
    let g = FractalScheme::gasket();
    let unit = QMatrix::uniform(3, 1.0).unwrap();
    let t = trace_to_boundary(&g, 1, &vec![unit.clone(); 3]).unwrap();
    assert!(t.distance(&unit.scaled(0.6)) < 1e-12);
    // wrong count, wrong size and negative conductances are rejected
    assert!(trace_to_boundary(&g, 1, &vec![unit.clone(); 2]).is_err());
    assert!(trace_to_boundary(&g, 1, &vec![QMatrix::uniform(4, 1.0).unwrap(); 3]).is_err());
    let neg = QMatrix::from_conductances(3, &[(0, 1, 1.0), (1, 2, -0.5), (0, 2, 1.0)]).unwrap();
    assert!(trace_to_boundary(&g, 1, &vec![neg; 3]).is_err());
    let split = QMatrix::from_conductances(3, &[(0, 1, 1.0)]).unwrap();
    assert!(trace_to_boundary(&g, 1, &vec![split; 3]).is_err());
}

#[test]
fn self_similarity_of_the_fixed_point() {
    let g = FractalScheme::gasket();
    let fp = fixed_point(&g, &QMatrix::uniform(3, 1.0).unwrap(), 1e-13, 1000).unwrap();
    for n in 0..=4 {
        let assignment = vec![fp.q.clone(); 3usize.pow(n as u32)];
        let t = trace_to_boundary(&g, n, &assignment).unwrap();
        let expect = fp.q.scaled(fp.rho.powi(-(n as i32)));
        assert!(t.distance(&expect) <= 1e-8 * expect.frobenius(), "level {n}");
    }
}

#[test]
fn trace_is_monotone_and_superadditive() {
    let g = FractalScheme::gasket();
    let phi = Renormalizer::new(&g).unwrap();
    let mut rng = crate::rng::stream(2, 0);
    for _ in 0..1000 {
        let q = random_qm(3, &mut rng, 0.0, 3.0);
        let bump = random_qm(3, &mut rng, 0.0, 1.0);
        let q2 = q.combine(1.0, &bump, 1.0);
        let (p, p2) = (phi.renormalize(&q, 5.0 / 3.0).unwrap(), phi.renormalize(&q2, 5.0 / 3.0).unwrap());
        let xi = probe(3, &mut rng);
        assert!(p.form(&xi) <= p2.form(&xi) + 1e-12);

        let (a, b) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let mix = phi.renormalize(&q.combine(a, &q2, b), 5.0 / 3.0).unwrap();
        assert!(mix.form(&xi) >= a * p.form(&xi) + b * p2.form(&xi) - 1e-10);
    }
}

#[test]
fn expected_map_is_dominated_by_map_of_expectation() {
    let g = FractalScheme::gasket();
    let phi = Renormalizer::new(&g).unwrap();
    let mut rng = crate::rng::stream(3, 0);
    let draws: Vec<QMatrix> = (0..2000).map(|_| random_qm(3, &mut rng, 0.5, 4.0)).collect();
    let n = draws.len() as f64;
    let mean_q = draws.iter().skip(1).fold(draws[0].clone(), |acc, q| acc.combine(1.0, q, 1.0)).scaled(1.0 / n);
    let mapped: Vec<QMatrix> = draws.iter().map(|q| phi.renormalize(q, 5.0 / 3.0).unwrap()).collect();
    let mean_phi = mapped.iter().skip(1).fold(mapped[0].clone(), |acc, q| acc.combine(1.0, q, 1.0)).scaled(1.0 / n);
    let phi_mean = phi.renormalize(&mean_q, 5.0 / 3.0).unwrap();
    for _ in 0..1000 {
        let xi = probe(3, &mut rng);
        assert!(mean_phi.form(&xi) <= phi_mean.form(&xi) + 1e-12);
    }
}

#[test]
fn gasket_fixed_point_from_any_start() {
    let g = FractalScheme::gasket();
    let sym = fixed_point(&g, &QMatrix::uniform(3, 2.0).unwrap(), 1e-12, 1000).unwrap();
    assert!((sym.rho - 5.0 / 3.0).abs() < 1e-8);
    let c = sym.q.conductances();
    assert!((c[0] - c[1]).abs() < 1e-12 && (c[1] - c[2]).abs() < 1e-12);
    // renormalize at that rho leaves it fixed
    assert!(renormalize(&sym.q, &g, sym.rho).unwrap().distance(&sym.q) < 1e-10);

    let mut rng = crate::rng::stream(4, 0);
    for _ in 0..5 {
        let start = random_qm(3, &mut rng, 0.05, 20.0);
        let fp = fixed_point(&g, &start, 1e-12, 5000).unwrap();
        assert!((fp.rho - 5.0 / 3.0).abs() < 1e-8);
        assert!(fp.q.distance(&sym.q) < 1e-9);
    }
    let reducible = QMatrix::from_conductances(3, &[(0, 1, 1.0)]).unwrap();
    assert!(fixed_point(&g, &reducible, 1e-12, 10).is_err());
    assert!(matches!(
        fixed_point(&g, &QMatrix::from_conductances(3, &[(0, 1, 1.0), (1, 2, 50.0)]).unwrap(), 1e-14, 2),
        Err(Error::NoConvergence { .. })
    ));
}

#[test]
fn vicsek_rho_matches_resistance_growth() {
    let v = FractalScheme::vicsek();
    let fp = fixed_point(&v, &QMatrix::uniform(4, 1.0).unwrap(), 1e-12, 1000).unwrap();
    // oracle: opposite-corner resistance ratio between the level-1 and level-0 trees
    let g0 = build_fractal_graph(&v, 0).unwrap();
    let g1 = build_fractal_graph(&v, 1).unwrap();
    let b0 = g0.boundary_vertices();
    let b1 = g1.boundary_vertices();
    let r0 = effective_resistance(&g0.network, b0[0], b0[2]).unwrap();
    let r1 = effective_resistance(&g1.network, b1[0], b1[2]).unwrap();
    assert!((fp.rho - r1 / r0).abs() < 1e-8, "rho {} vs {}", fp.rho, r1 / r0);
    // the star template traces to equal conductances
    let star = template_q(&v, &[1.0; 4]).unwrap();
    assert!(star.distance(&QMatrix::uniform(4, 0.25).unwrap()) < 1e-14);
}

#[test]
fn harmonic_matrices_on_the_gasket() {
    let g = FractalScheme::gasket();
    let fp = fixed_point(&g, &QMatrix::uniform(3, 1.0).unwrap(), 1e-13, 1000).unwrap();
    let a = harmonic_matrices(&g, &fp.q).unwrap();
    assert_eq!(a.len(), 3);
    for (k, ak) in a.iter().enumerate() {
        for i in 0..3 {
            assert!((ak.row(i).sum() - 1.0).abs() < 1e-14);
        }
        let corner = g.fixed_corner(k).unwrap();
        for j in 0..3 {
            assert_eq!(ak[(corner, j)], if j == corner { 1.0 } else { 0.0 });
        }
    }
    // Psi_0(a_1) is the midpoint of a_0 a_1: weights 2/5 on a_0, a_1 and 1/5 on a_2
    let row = a.get(0).row(1);
    for (j, w) in [0.4, 0.4, 0.2].iter().enumerate() {
        assert!((row[j] - w).abs() < 1e-12);
    }
    let split = QMatrix::from_conductances(3, &[(0, 1, 1.0)]).unwrap();
    assert!(harmonic_matrices(&g, &split).is_err());
}

#[test]
fn linearized_map_properties() {
    let g = FractalScheme::gasket();
    let fp = fixed_point(&g, &QMatrix::uniform(3, 1.0).unwrap(), 1e-13, 1000).unwrap();
    let a = harmonic_matrices(&g, &fp.q).unwrap();
    let h = |q: &QMatrix| linearized_map(q, &a, fp.rho).unwrap();
    assert!(h(&fp.q).distance(&fp.q) < 1e-10);

    let phi = Renormalizer::new(&g).unwrap();
    let mut rng = crate::rng::stream(5, 0);
    for _ in 0..1000 {
        let q = random_qm(3, &mut rng, 0.0, 5.0);
        let q2 = random_qm(3, &mut rng, 0.0, 5.0);
        let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let lhs = h(&q.combine(x, &q2, y));
        let rhs = h(&q).combine(x, &h(&q2), y);
        assert!(lhs.distance(&rhs) < 1e-12 * (1.0 + rhs.frobenius()));
        let xi = probe(3, &mut rng);
        assert!(h(&q).form(&xi) >= phi.renormalize(&q, fp.rho).unwrap().form(&xi) - 1e-12);
    }

    // power iteration on a perturbation: successive differences shrink geometrically
    let mut d = random_qm(3, &mut rng, 0.0, 1.0).combine(1.0, &fp.q, -0.3);
    let mut prev = f64::INFINITY;
    let mut ratios = Vec::new();
    for _ in 0..80 {
        let next = h(&d);
        let step = next.distance(&d);
        if prev.is_finite() {
            ratios.push(step / prev);
        }
        prev = step;
        d = next;
    }
    assert!(ratios.iter().all(|r| *r < 0.9), "{ratios:?}");
    assert!(prev < 1e-6, "{ratios:?}");
}

#[test]
fn point_mass_law_gives_the_fixed_point() {
    let g = FractalScheme::gasket();
    let fp = fixed_point(&g, &QMatrix::uniform(3, 1.0).unwrap(), 1e-13, 1000).unwrap();
    let law = ConductanceLaw::Constant { value: 1.0 };
    for n in 1..=3 {
        let it = random_iterate(&g, n, &law, SamplingMode::PerCell, fp.rho, 4, 9).unwrap();
        let unit = QMatrix::uniform(3, 1.0).unwrap();
        assert!(it.mean.distance(&unit) < 1e-12);
        assert!(it.variances().iter().all(|v| v.abs() < 1e-24));
        assert_eq!(it.rejected, 0);
    }
    assert!(random_iterate(&g, 1, &law, SamplingMode::PerEdge, fp.rho, 4, 9).is_err());
}

#[test]
fn random_iterate_is_seed_deterministic() {
    let g = FractalScheme::gasket();
    let law = ConductanceLaw::pareto(0.5);
    let a = random_iterate(&g, 2, &law, SamplingMode::PerCell, 5.0 / 3.0, 20, 3).unwrap();
    let b = random_iterate(&g, 2, &law, SamplingMode::PerCell, 5.0 / 3.0, 20, 3).unwrap();
    assert_eq!(a.norms, b.norms);
    assert_eq!(a.mean, b.mean);
    assert!(a.mean.in_interior());
}

#[test]
fn cell_chain_distances() {
    let g = FractalScheme::gasket();
    let g1 = build_fractal_graph(&g, 1).unwrap();
    let b = g1.boundary_vertices();
    assert_eq!(cell_chain_distance(&g1, b[0], b[1]).unwrap(), 2);
    let cells = g1.cell_index();
    let p = cells.boundary(0);
    assert_eq!(cell_chain_distance(&g1, p[1], p[2]).unwrap(), 1);
    assert_eq!(cell_chain_distance(&g1, p[0], p[0]).unwrap(), 1);

    let mut prev = 1;
    for n in 1..=4 {
        let gn = build_fractal_graph(&g, n).unwrap();
        let h = min_corner_chain_distance(&gn).unwrap();
        // oracle: corner-to-corner chains double with each level on the gasket
        assert_eq!(h, 1 << n);
        assert!(h > prev);
        prev = h;
    }
}
