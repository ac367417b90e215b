use rand::Rng;

use super::ResistanceNetwork;
use crate::error::{bail, Result};

/// Path `0 - 1 - ... - n` with equal conductances, counting measure, rooted at 0.
pub fn build_path(n: usize, conductance: f64) -> Result<ResistanceNetwork> {
    if n == 0 {
        bail!(InvalidArgument, "a path needs at least one edge");
    }
    let edges = (0..n).map(|i| (i, i + 1, conductance));
    let coords = (0..=n).map(|i| vec![i as f64]).collect();
    ResistanceNetwork::new(n + 1, edges, vec![1.0; n + 1], 0)?.with_coords(coords)
}

/// Complete graph on `n` vertices with equal conductances and counting measure.
pub fn complete_graph(n: usize, conductance: f64) -> Result<ResistanceNetwork> {
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, conductance)));
    ResistanceNetwork::new(n, edges, vec![1.0; n], 0)
}

/// Uniformly random recursive tree with unit conductances and counting measure.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ResistanceNetwork> {
    if n == 0 {
        bail!(InvalidArgument, "empty tree");
    }
    let edges: Vec<_> = (1..n).map(|i| (rng.random_range(0..i), i, 1.0)).collect();
    ResistanceNetwork::new(n, edges, vec![1.0; n], 0)
}

/// Random connected network: a random spanning tree plus `extra_edges` random
/// chords. Conductances are uniform on `[0.2, 5]` and masses uniform on
/// `[0.5, 2]`, which keeps the test matrices well conditioned.
pub fn random_connected<R: Rng + ?Sized>(
    n: usize,
    extra_edges: usize,
    rng: &mut R,
) -> Result<ResistanceNetwork> {
    if n < 2 {
        bail!(InvalidArgument, "need at least two vertices");
    }
    let mut edges = Vec::with_capacity(n - 1 + extra_edges);
    for i in 1..n {
        edges.push((rng.random_range(0..i), i, rng.random_range(0.2..5.0)));
    }
    for _ in 0..extra_edges {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            edges.push((u, v, rng.random_range(0.2..5.0)));
        }
    }
    let measure = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    ResistanceNetwork::new(n, edges, measure, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_path() {
        let p = build_path(1, 1.0).unwrap();
        assert_eq!(p.vertex_count(), 2);
        assert_eq!(p.edge_count(), 1);
        assert_eq!(p.total_mass(), 2.0);
        assert_eq!(p.root(), 0);
    }

    #[test]
    fn zero_length_path_rejected() {
        assert!(build_path(0, 1.0).is_err());
    }
}
