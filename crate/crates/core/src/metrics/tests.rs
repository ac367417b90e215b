use super::*;
use crate::network::{build_fractal_graph, build_path, FractalScheme};
use crate::resistance::resistance_matrix;
use crate::rng::stream;
use crate::simulate::{local_times, simulate_vsrw};
use rand::Rng;

fn line(points: &[f64], masses: &[f64]) -> EmbeddedSpace {
    let coords: Vec<Vec<f64>> = points.iter().map(|x| vec![*x]).collect();
    EmbeddedSpace::euclidean(&coords, masses.to_vec(), 0).unwrap()
}

#[test]
fn construction_checks() {
    assert!(EmbeddedSpace::euclidean(&[], vec![], 0).is_err());
    assert!(EmbeddedSpace::euclidean(&[vec![0.0]], vec![-1.0], 0).is_err());
    assert!(EmbeddedSpace::euclidean(&[vec![0.0]], vec![1.0], 1).is_err());
    assert!(EmbeddedSpace::euclidean(&[vec![0.0], vec![0.0, 1.0]], vec![1.0; 2], 0).is_err());
    let a = line(&[0.0, 1.0], &[1.0, 1.0]);
    let b = line(&[0.0, 2.0], &[1.0, 1.0]);
    assert!(hausdorff_distance(&a, &b).is_err());
}

#[test]
fn hausdorff_trivial_cases() {
    let s = line(&[0.0, 1.0], &[1.0, 1.0]);
    let a = s.subspace(vec![0], vec![1.0], 0).unwrap();
    let b = s.subspace(vec![1], vec![1.0], 0).unwrap();
    assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
    assert_eq!(hausdorff_distance(&a, &b).unwrap(), 1.0);
    assert_eq!(hausdorff_distance(&s, &a).unwrap(), 1.0);
}

#[test]
fn gasket_levels_hausdorff() {
    let g = build_fractal_graph(&FractalScheme::gasket(), 2).unwrap();
    let s = EmbeddedSpace::from_coords(&g.network).unwrap();
    let v1 = g.level_vertices(1).unwrap();
    let sub = s.subspace(v1.clone(), vec![1.0; v1.len()], 0).unwrap();
    // the new points of V_2 are midpoints of level-1 cell sides, a quarter from V_1
    assert!((hausdorff_distance(&s, &sub).unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn metric_axioms_on_random_triples() {
    let mut rng = stream(1, 0);
    let coords: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let base = EmbeddedSpace::euclidean(&coords, vec![1.0; 12], 0).unwrap();
    let pick = |rng: &mut crate::rng::SimRng| {
        let mut pts: Vec<usize> = (0..12).filter(|_| rng.random::<bool>()).collect();
        if pts.is_empty() {
            pts.push(rng.random_range(0..12));
        }
        let m = pts.iter().map(|_| rng.random_range(0..4) as f64 / 8.0).collect();
        base.subspace(pts, m, 0).unwrap()
    };
    for _ in 0..100 {
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        for f in [hausdorff_distance, prohorov_distance] {
            let (ab, ba, bc, ac) = (f(&a, &b).unwrap(), f(&b, &a).unwrap(), f(&b, &c).unwrap(), f(&a, &c).unwrap());
            assert_eq!(ab, ba);
            assert!(ac <= ab + bc + 1e-12);
            assert_eq!(f(&a, &a).unwrap(), 0.0);
        }
    }
}

#[test]
fn prohorov_of_two_point_masses() {
    for (x, y) in [(0.0, 0.3), (0.0, 1.0), (0.0, 2.5), (1.0, 1.0)] {
        let s = line(&[x, y], &[1.0, 1.0]);
        let a = s.subspace(vec![0], vec![1.0], 0).unwrap();
        let b = s.subspace(vec![1], vec![1.0], 0).unwrap();
        assert_eq!(prohorov_distance(&a, &b).unwrap(), f64::min((x - y).abs(), 1.0));
    }
    // unequal totals: the mass gap survives at any radius
    let s = line(&[0.0], &[1.0]);
    let half = s.scale_masses(0.5).unwrap();
    assert_eq!(prohorov_distance(&s, &half).unwrap(), 0.5);
    let empty = s.scale_masses(0.0).unwrap();
    assert_eq!(prohorov_distance(&s, &empty).unwrap(), 1.0);
}

#[test]
fn root_mismatch_only() {
    let s = line(&[0.0, 0.4], &[1.0, 1.0]);
    let t = s.subspace(vec![0, 1], vec![1.0, 1.0], 1).unwrap();
    assert!((common_embedding_gap(&s, &t).unwrap() - 0.4).abs() < 1e-15);
    assert_eq!(common_embedding_gap(&s, &s).unwrap(), 0.0);
}

#[test]
fn gh_vague_saturates_beyond_diameters() {
    let s = line(&[0.0, 0.5, 1.0], &[0.25, 0.25, 0.25]);
    let t = s.subspace(vec![0, 2], vec![0.25, 0.5], 0).unwrap();
    assert_eq!(gh_vague_gap(&s, &s, &[0.0, 5.0]).unwrap(), 0.0);
    let full = common_embedding_gap(&s, &t).unwrap();
    let coarse = gh_vague_gap(&s, &t, &[3.0]).unwrap();
    let fine: Vec<f64> = (0..=300).map(|k| k as f64 / 100.0).collect();
    assert_eq!(coarse, gh_vague_gap(&s, &t, &fine).unwrap());
    // oracle by hand: restrictions are {0} on [0, 0.5), {0, 0.5} vs {0} on [0.5, 1), full from 1
    let r0 = 0.0;
    let r1 = common_embedding_gap(&s.restricted(0.5), &t.restricted(0.5)).unwrap();
    let expect = r0 * (1.0 - (-0.5f64).exp()) + r1.min(1.0) * ((-0.5f64).exp() - (-1.0f64).exp()) + full.min(1.0) * ((-1.0f64).exp() - (-3.0f64).exp());
    assert!((coarse - expect).abs() < 1e-15);
    assert!(gh_vague_gap(&s, &t, &[]).is_err());
    assert!(gh_vague_gap(&s, &t, &[2.0, 1.0]).is_err());
}

#[test]
fn net_projection_basics() {
    let g = build_fractal_graph(&FractalScheme::gasket(), 3).unwrap();
    let s = EmbeddedSpace::from_coords(&g.network).unwrap();
    let all: Vec<usize> = (0..s.len()).collect();
    let id = net_projection(&s, &all, 0.4 * s.min_separation()).unwrap();
    assert_eq!(id.assignment, all);
    assert_eq!(id.max_displacement, 0.0);

    let centers = g.level_vertices(1).unwrap();
    let eps = 0.5;
    let p = net_projection(&s, &centers, eps).unwrap();
    assert!(p.max_displacement <= 2.0 * eps);
    assert!((p.masses.iter().sum::<f64>() - s.total_mass()).abs() < 1e-12);
    let err = net_projection(&s, &centers[..1], 0.1).unwrap_err();
    assert!(err.to_string().contains("do not cover"));
}

#[test]
fn volume_profile_limits() {
    let net = build_path(5, 1.0).unwrap();
    let r = resistance_matrix(&net).unwrap();
    let s = EmbeddedSpace::from_resistance(&net, &r).unwrap();
    let v = volume_profile(&s, &[0, 2, 5], &[0.5, 1.5, 5.5, 6.0]).unwrap();
    assert!((v.r0 - 1.0).abs() < 1e-12);
    assert!((v.r_inf - 5.0).abs() < 1e-12);
    for row in &v.table {
        assert_eq!(row[0], 1.0);
        assert_eq!(row[2], 6.0);
        assert_eq!(row[3], 6.0);
        assert!(row.windows(2).all(|w| w[0] <= w[1]));
    }
    // open balls: radius exactly 1 around vertex 2 holds only vertex 2
    let unit = EmbeddedSpace::euclidean(&(0..6).map(|x| vec![x as f64]).collect::<Vec<_>>(), vec![1.0; 6], 0).unwrap();
    let w = volume_profile(&unit, &[2], &[1.0]).unwrap();
    assert_eq!(w.table[0][0], 1.0);
    assert!(v.doubling >= 1.0 && v.spread >= 1.0);
    assert!(volume_profile(&s, &[0], &[2.0, 1.0]).is_err());
}

#[test]
fn ks_trivial_and_calibrated() {
    assert_eq!(ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert_eq!(ks_distance(&[0.0], &[1.0]).unwrap(), 1.0);
    assert_eq!(ks_distance(&[0.0, 1.0], &[1.0]).unwrap(), 0.5);
    assert!(ks_distance(&[], &[1.0]).is_err());
    assert!((ks_critical_value(1, 1, 0.05) - 1.3581 * 2f64.sqrt()).abs() < 1e-3);

    let n = 10_000;
    let crit = ks_critical_value(n, n, 0.05);
    let mut accepted = 0;
    for rep in 0..100 {
        let mut rng = stream(77, rep);
        let a: Vec<f64> = (0..n).map(|_| crate::rng::exponential(&mut rng, 1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| crate::rng::exponential(&mut rng, 1.0)).collect();
        if ks_distance(&a, &b).unwrap() < crit {
            accepted += 1;
        }
    }
    assert!(accepted >= 94, "{accepted}");
}

#[test]
fn local_time_modulus_limits() {
    let net = build_path(4, 1.0).unwrap();
    let r = resistance_matrix(&net).unwrap();
    let traj = simulate_vsrw(&net, 0, 20.0, &mut stream(3, 0)).unwrap();
    let ltf = local_times(&traj, &net).unwrap();
    let table = local_time_modulus(&ltf, &r, &[0.0, 1.0, 2.0, 10.0], 20.0).unwrap();
    assert_eq!(table[0].1, 0.0);
    assert!(table.windows(2).all(|w| w[0].1 <= w[1].1));
    let lt = ltf.at(20.0).unwrap();
    let spread = lt.iter().cloned().fold(f64::MIN, f64::max) - lt.iter().cloned().fold(f64::MAX, f64::min);
    assert!(table[3].1 >= spread);
}

#[test]
fn weighted_ks_matches_samples() {
    let mut rng = stream(5, 0);
    let a: Vec<f64> = (0..200).map(|_| rng.random_range(0..10) as f64).collect();
    let b: Vec<f64> = (0..300).map(|_| rng.random_range(0..12) as f64).collect();
    let wa: Vec<(f64, f64)> = a.iter().map(|x| (*x, 1.0)).collect();
    let wb: Vec<(f64, f64)> = b.iter().map(|x| (*x, 2.0)).collect();
    let exact = ks_distance(&a, &b).unwrap();
    assert!((ks_distance_weighted(&wa, &wb).unwrap() - exact).abs() < 1e-12);
    assert_eq!(ks_distance_weighted(&[(0.0, 1.0)], &[(0.0, 3.0)]).unwrap(), 0.0);
    assert!(ks_distance_weighted(&[(0.0, 0.0)], &[(0.0, 1.0)]).is_err());
}
