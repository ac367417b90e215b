//! Finite rooted measured resistance networks.
//!
//! A [`ResistanceNetwork`] is a connected simple graph with positive edge
//! conductances, a nonnegative vertex measure and a distinguished root. It is
//! the discrete object every other module works on. Networks are immutable
//! once built; the `with_*` methods return modified copies.

mod fractal;
mod generate;
mod io;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

pub use fractal::{build_fractal_graph, CellAddress, CellIndex, FractalGraph, FractalScheme, LatticeMap};
pub use generate::{build_path, complete_graph, random_connected, random_tree};
pub use io::{read_network, write_network, NetworkFormat};

/// Undirected edge with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub conductance: f64,
}

#[derive(Clone, Debug)]
pub struct ResistanceNetwork {
    vertex_count: usize,
    coords: Option<Vec<Vec<f64>>>,
    edges: Vec<Edge>,
    measure: Vec<f64>,
    root: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
    cells: Option<Arc<CellIndex>>,
}

impl PartialEq for ResistanceNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.vertex_count == other.vertex_count
            && self.coords == other.coords
            && self.edges == other.edges
            && self.measure == other.measure
            && self.root == other.root
    }
}

impl ResistanceNetwork {
    /// Validates and builds a network.
    ///
    /// Edges are given as `(u, v, conductance)` in any orientation; repeated
    /// pairs are merged by summing their conductances. Self-loops, non-finite
    /// or non-positive conductances, negative masses and disconnected graphs
    /// are rejected.
    pub fn new(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        measure: Vec<f64>,
        root: usize,
    ) -> Result<Self> {
        if vertex_count == 0 {
            bail!(InvalidNetwork, "a network needs at least one vertex");
        }
        if measure.len() != vertex_count {
            bail!(
                InvalidNetwork,
                "measure has {} entries for {} vertices",
                measure.len(),
                vertex_count
            );
        }
        if let Some((i, m)) = measure
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_finite() || **m < 0.0)
        {
            bail!(InvalidNetwork, "vertex {i} has invalid mass {m}");
        }
        check_vertex(root, vertex_count)?;

        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, c) in edges {
            check_vertex(u, vertex_count)?;
            check_vertex(v, vertex_count)?;
            if u == v {
                bail!(InvalidNetwork, "self-loop at vertex {u}");
            }
            if !c.is_finite() || c <= 0.0 {
                bail!(InvalidNetwork, "edge ({u}, {v}) has invalid conductance {c}");
            }
            *merged.entry((u.min(v), u.max(v))).or_insert(0.0) += c;
        }
        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((u, v), conductance)| Edge { u, v, conductance })
            .collect();

        let adjacency = build_adjacency(vertex_count, &edges);
        if !is_connected(&adjacency) {
            bail!(InvalidNetwork, "graph is not connected");
        }
        Ok(Self {
            vertex_count,
            coords: None,
            edges,
            measure,
            root,
            adjacency,
            cells: None,
        })
    }

    /// Attaches per-vertex coordinates (all of the same dimension).
    pub fn with_coords(mut self, coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.len() != self.vertex_count {
            bail!(InvalidNetwork, "{} coordinates for {} vertices", coords.len(), self.vertex_count);
        }
        if let Some(d) = coords.first().map(Vec::len) {
            if coords.iter().any(|c| c.len() != d) {
                bail!(InvalidNetwork, "coordinates of mixed dimension");
            }
        }
        self.coords = Some(coords);
        Ok(self)
    }

    /// Same graph with a different vertex measure.
    pub fn with_measure(&self, measure: Vec<f64>) -> Result<Self> {
        if measure.len() != self.vertex_count {
            bail!(InvalidNetwork, "measure has {} entries for {} vertices", measure.len(), self.vertex_count);
        }
        if measure.iter().any(|m| !m.is_finite() || *m < 0.0) {
            bail!(InvalidNetwork, "measure must be finite and nonnegative");
        }
        let mut out = self.clone();
        out.measure = measure;
        Ok(out)
    }

    /// Same graph with new conductances, given in edge order.
    pub fn with_conductances(&self, conductances: &[f64]) -> Result<Self> {
        if conductances.len() != self.edges.len() {
            bail!(InvalidNetwork, "{} conductances for {} edges", conductances.len(), self.edges.len());
        }
        if let Some(c) = conductances.iter().find(|c| !c.is_finite() || **c <= 0.0) {
            bail!(InvalidNetwork, "invalid conductance {c}");
        }
        let mut out = self.clone();
        for (e, &c) in out.edges.iter_mut().zip(conductances) {
            e.conductance = c;
        }
        out.adjacency = build_adjacency(out.vertex_count, &out.edges);
        Ok(out)
    }

    pub fn with_root(&self, root: usize) -> Result<Self> {
        check_vertex(root, self.vertex_count)?;
        let mut out = self.clone();
        out.root = root;
        Ok(out)
    }

    pub(crate) fn with_cells(mut self, cells: Arc<CellIndex>) -> Self {
        self.cells = Some(cells);
        self
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_mass(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    /// Level-n cell index, present on networks built from a fractal scheme.
    pub fn cell_index(&self) -> Option<&CellIndex> {
        self.cells.as_deref()
    }

    /// Neighbours of `x` with the conductance of the joining edge.
    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    /// Total conductance at `x`, i.e. the degree measure.
    pub fn conductance_sum(&self, x: usize) -> f64 {
        self.adjacency[x].iter().map(|(_, c)| c).sum()
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        check_vertex(x, self.vertex_count)
    }

    /// Errors unless every vertex carries strictly positive mass.
    pub fn require_full_support(&self) -> Result<()> {
        match self.measure.iter().position(|m| *m <= 0.0) {
            Some(i) => bail!(InvalidArgument, "speed measure vanishes at vertex {i}"),
            None => Ok(()),
        }
    }

    /// True if the graph has no cycle.
    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.vertex_count
    }
}

fn check_vertex(x: usize, count: usize) -> Result<()> {
    if x >= count {
        return Err(Error::VertexOutOfRange { vertex: x, count });
    }
    Ok(())
}

fn build_adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.u].push((e.v, e.conductance));
        adj[e.v].push((e.u, e.conductance));
    }
    for row in &mut adj {
        row.sort_by_key(|(y, _)| *y);
    }
    adj
}

fn is_connected(adj: &[Vec<(usize, f64)>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(x) = stack.pop() {
        for &(y, _) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                count += 1;
                stack.push(y);
            }
        }
    }
    count == adj.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_edges_are_summed() {
        let net = ResistanceNetwork::new(2, [(0, 1, 1.0), (1, 0, 2.5)], vec![1.0, 1.0], 0).unwrap();
        assert_eq!(net.edge_count(), 1);
        assert_eq!(net.edges()[0].conductance, 3.5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ResistanceNetwork::new(3, [(0, 1, 1.0)], vec![1.0; 3], 0).is_err());
        assert!(ResistanceNetwork::new(2, [(0, 0, 1.0), (0, 1, 1.0)], vec![1.0; 2], 0).is_err());
        assert!(ResistanceNetwork::new(2, [(0, 1, 0.0)], vec![1.0; 2], 0).is_err());
        assert!(ResistanceNetwork::new(2, [(0, 1, f64::INFINITY)], vec![1.0; 2], 0).is_err());
        assert!(ResistanceNetwork::new(2, [(0, 1, 1.0)], vec![1.0, -1.0], 0).is_err());
        assert!(ResistanceNetwork::new(2, [(0, 1, 1.0)], vec![1.0; 2], 2).is_err());
    }

    #[test]
    fn zero_mass_allowed_but_not_as_speed_measure() {
        let net = ResistanceNetwork::new(2, [(0, 1, 1.0)], vec![1.0, 0.0], 0).unwrap();
        assert!(net.require_full_support().is_err());
    }
}
