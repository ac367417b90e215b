//! Cell structure of uniform finitely ramified fractals and their level-n graphs.
//!
//! Maps are affine similarities `x -> (A x + t) / ratio` acting on integer
//! lattice coordinates, so every level-n vertex has an exact integer key at
//! scale `denominator * ratio^n` and gluing is decided by key equality rather
//! than floating-point proximity.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ResistanceNetwork;
use crate::error::{bail, Result};

/// One contraction `x -> (linear * x + shift) / ratio` in lattice coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeMap {
    pub linear: Vec<Vec<i64>>,
    pub shift: Vec<i64>,
}

impl LatticeMap {
    pub fn translation(shift: Vec<i64>) -> Self {
        let d = shift.len();
        let linear = (0..d)
            .map(|i| (0..d).map(|j| i64::from(i == j)).collect())
            .collect();
        Self { linear, shift }
    }

    /// Applies the map to `p / scale`, returning the image at scale `scale * ratio`.
    fn apply(&self, p: &[i64], scale: i64) -> Vec<i64> {
        self.linear
            .iter()
            .zip(&self.shift)
            .map(|(row, t)| row.iter().zip(p).map(|(a, x)| a * x).sum::<i64>() + t * scale)
            .collect()
    }
}

/// Description of a self-similar cell structure.
///
/// The template lists the points of a 0-cell: the first `boundary_count` are
/// the boundary set `V_0`, any further points are interior template vertices
/// (the Vicsek cross uses one for its centre). Template coordinates are
/// integers over `denominator`, in units where `V_0` has integer coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractalScheme {
    pub name: String,
    pub ratio: i64,
    pub maps: Vec<LatticeMap>,
    pub template_points: Vec<Vec<i64>>,
    pub boundary_count: usize,
    pub denominator: i64,
    pub template_edges: Vec<(usize, usize)>,
    /// Columns map lattice coordinates to the planar embedding.
    pub basis: Vec<Vec<f64>>,
    /// Per-level resistance factor `a_1`, when known.
    pub resistance_scale: Option<f64>,
    /// Per-level mass factor `b_1`.
    pub mass_scale: f64,
}

impl FractalScheme {
    /// Sierpinski gasket in the triangular lattice basis; `a_1 = 3/5`, `b_1 = 1/3`.
    pub fn gasket() -> Self {
        let h = 3f64.sqrt() / 2.0;
        Self {
            name: "gasket".into(),
            ratio: 2,
            maps: vec![
                LatticeMap::translation(vec![0, 0]),
                LatticeMap::translation(vec![1, 0]),
                LatticeMap::translation(vec![0, 1]),
            ],
            template_points: vec![vec![0, 0], vec![1, 0], vec![0, 1]],
            boundary_count: 3,
            denominator: 1,
            template_edges: vec![(0, 1), (0, 2), (1, 2)],
            basis: vec![vec![1.0, 0.5], vec![0.0, h]],
            resistance_scale: Some(3.0 / 5.0),
            mass_scale: 1.0 / 3.0,
        }
    }

    /// Vicsek set: five cross-shaped cells, a tree at every level; `a_1 = 1/3`, `b_1 = 1/5`.
    pub fn vicsek() -> Self {
        Self {
            name: "vicsek".into(),
            ratio: 3,
            maps: vec![
                LatticeMap::translation(vec![0, 0]),
                LatticeMap::translation(vec![2, 0]),
                LatticeMap::translation(vec![2, 2]),
                LatticeMap::translation(vec![0, 2]),
                LatticeMap::translation(vec![1, 1]),
            ],
            template_points: vec![vec![0, 0], vec![2, 0], vec![2, 2], vec![0, 2], vec![1, 1]],
            boundary_count: 4,
            denominator: 2,
            template_edges: vec![(0, 4), (1, 4), (2, 4), (3, 4)],
            basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            resistance_scale: Some(1.0 / 3.0),
            mass_scale: 1.0 / 5.0,
        }
    }

    /// Sierpinski carpet squares. The resistance scale is unknown and left unset.
    pub fn carpet() -> Self {
        let shifts = [[0, 0], [1, 0], [2, 0], [2, 1], [2, 2], [1, 2], [0, 2], [0, 1]];
        Self {
            name: "carpet".into(),
            ratio: 3,
            maps: shifts
                .iter()
                .map(|s| LatticeMap::translation(s.to_vec()))
                .collect(),
            template_points: vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]],
            boundary_count: 4,
            denominator: 1,
            template_edges: vec![(0, 1), (1, 2), (2, 3), (3, 0)],
            basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            resistance_scale: None,
            mass_scale: 1.0 / 8.0,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "gasket" => Ok(Self::gasket()),
            "vicsek" => Ok(Self::vicsek()),
            "carpet" => Ok(Self::carpet()),
            other => bail!(InvalidArgument, "unknown scheme `{other}`"),
        }
    }

    pub fn map_count(&self) -> usize {
        self.maps.len()
    }

    pub fn dimension(&self) -> usize {
        self.template_points[0].len()
    }

    /// `a_n = a_1^n`, if the scheme has a known resistance scale.
    pub fn resistance_factor(&self, level: usize) -> Option<f64> {
        self.resistance_scale.map(|a| a.powi(level as i32))
    }

    /// `b_n = b_1^n`.
    pub fn mass_factor(&self, level: usize) -> f64 {
        self.mass_scale.powi(level as i32)
    }

    /// Boundary point fixed by map `k`, if any.
    pub fn fixed_corner(&self, k: usize) -> Option<usize> {
        let scale = self.denominator;
        (0..self.boundary_count).find(|&i| {
            let p = &self.template_points[i];
            let image = self.maps[k].apply(p, scale);
            image.iter().zip(p).all(|(a, b)| *a == b * self.ratio)
        })
    }

    /// Lattice key of `Psi_w(template point j)` at scale `denominator * ratio^|w|`.
    pub(crate) fn key(&self, address: &CellAddress, point: usize) -> Vec<i64> {
        let mut p = self.template_points[point].clone();
        let mut scale = self.denominator;
        for &letter in address.letters().iter().rev() {
            p = self.maps[letter].apply(&p, scale);
            scale *= self.ratio;
        }
        p
    }

    fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if self.ratio < 2 {
            bail!(Gluing, "contraction ratio must be an integer >= 2");
        }
        if self.maps.is_empty() {
            bail!(Gluing, "scheme has no maps");
        }
        if self.boundary_count < 2 || self.boundary_count > self.template_points.len() {
            bail!(Gluing, "boundary set must have at least two template points");
        }
        if self.denominator < 1 {
            bail!(Gluing, "template denominator must be positive");
        }
        if self.template_points.iter().any(|p| p.len() != d)
            || self
                .maps
                .iter()
                .any(|m| m.shift.len() != d || m.linear.len() != d || m.linear.iter().any(|r| r.len() != d))
        {
            bail!(Gluing, "inconsistent dimensions in scheme");
        }
        if self.basis.is_empty() || self.basis.iter().any(|r| r.len() != d) {
            bail!(Gluing, "embedding basis must have {d} columns");
        }
        for &(a, b) in &self.template_edges {
            if a == b || a >= self.template_points.len() || b >= self.template_points.len() {
                bail!(Gluing, "template edge ({a}, {b}) is invalid");
            }
        }
        if self.fixed_corner(0).is_none() {
            bail!(Gluing, "the first map must fix a boundary point (used as the root)");
        }
        Ok(())
    }
}

/// Word `i_1 ... i_n` over the map indices, stored 0-based. The empty word is the whole space.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellAddress(Vec<usize>);

impl CellAddress {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn new(letters: Vec<usize>, map_count: usize) -> Result<Self> {
        if let Some(l) = letters.iter().find(|l| **l >= map_count) {
            bail!(InvalidArgument, "letter {l} out of range for {map_count} maps");
        }
        Ok(Self(letters))
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, letter: usize) -> Self {
        let mut w = self.0.clone();
        w.push(letter);
        Self(w)
    }

    /// All words of the given length in lexicographic order.
    pub fn all(map_count: usize, length: usize) -> Vec<Self> {
        let mut words = vec![Self::root()];
        for _ in 0..length {
            words = words
                .iter()
                .flat_map(|w| (0..map_count).map(move |k| w.child(k)))
                .collect();
        }
        words
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        for l in &self.0 {
            write!(f, "{}", l + 1)?;
        }
        Ok(())
    }
}

/// The n-cells of a built fractal graph.
#[derive(Clone, Debug, PartialEq)]
pub struct CellIndex {
    pub level: usize,
    pub addresses: Vec<CellAddress>,
    /// Vertex ids of every template point, per cell; the boundary comes first.
    pub points: Vec<Vec<usize>>,
    pub boundary_count: usize,
    /// Edge ids (into the network's edge list) of each template edge, per cell.
    pub edges: Vec<Vec<usize>>,
}

impl CellIndex {
    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    /// Boundary vertices `Psi_w(V_0)` of cell `i`.
    pub fn boundary(&self, i: usize) -> &[usize] {
        &self.points[i][..self.boundary_count]
    }
}

/// A level-n graph together with its scheme and exact vertex keys.
#[derive(Clone, Debug)]
pub struct FractalGraph {
    pub scheme: FractalScheme,
    pub level: usize,
    pub network: ResistanceNetwork,
    keys: HashMap<Vec<i64>, usize>,
}

/// Builds the level-n graph: unit conductances, counting measure, rooted at the
/// fixed point of the first map. Vertex ids follow first appearance when cells
/// are visited in lexicographic address order and template points in order.
pub fn build_fractal_graph(scheme: &FractalScheme, level: usize) -> Result<FractalGraph> {
    scheme.validate()?;
    check_boundary_self_similar(scheme)?;

    let addresses = CellAddress::all(scheme.map_count(), level);
    let npts = scheme.template_points.len();
    let mut keys: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut key_list: Vec<Vec<i64>> = Vec::new();
    // cell owning each vertex as an interior template point
    let mut interior_owner: Vec<Option<usize>> = Vec::new();
    let mut appearances: Vec<usize> = Vec::new();
    let mut points = Vec::with_capacity(addresses.len());

    for (ci, address) in addresses.iter().enumerate() {
        let mut ids = Vec::with_capacity(npts);
        for j in 0..npts {
            let key = scheme.key(address, j);
            let id = match keys.get(&key) {
                Some(&id) => id,
                None => {
                    let id = key_list.len();
                    keys.insert(key.clone(), id);
                    key_list.push(key);
                    interior_owner.push(None);
                    appearances.push(0);
                    id
                }
            };
            if ids.contains(&id) {
                bail!(Gluing, "cell {address} maps two template points to vertex {id}");
            }
            appearances[id] += 1;
            if j >= scheme.boundary_count {
                interior_owner[id] = Some(ci);
            }
            ids.push(id);
        }
        points.push(ids);
    }
    for (id, owner) in interior_owner.iter().enumerate() {
        if let Some(ci) = owner {
            if appearances[id] > 1 {
                bail!(
                    Gluing,
                    "interior point of cell {} is shared with another cell",
                    addresses[*ci]
                );
            }
        }
    }

    let vertex_count = key_list.len();
    let edge_list: Vec<(usize, usize, f64)> = points
        .iter()
        .flat_map(|ids| {
            scheme
                .template_edges
                .iter()
                .map(move |&(a, b)| (ids[a], ids[b], 1.0))
        })
        .collect();

    let scale = (scheme.denominator * scheme.ratio.pow(level as u32)) as f64;
    let coords = key_list
        .iter()
        .map(|k| {
            scheme
                .basis
                .iter()
                .map(|row| row.iter().zip(k).map(|(b, x)| b * (*x as f64) / scale).sum())
                .collect()
        })
        .collect();

    let root_corner = scheme.fixed_corner(0).expect("validated");
    let root = points[0][root_corner];
    let network = ResistanceNetwork::new(vertex_count, edge_list, vec![1.0; vertex_count], root)?
        .with_coords(coords)?;

    let edge_id = |a: usize, b: usize| -> usize {
        let (u, v) = (a.min(b), a.max(b));
        network
            .edges()
            .binary_search_by(|e| (e.u, e.v).cmp(&(u, v)))
            .expect("edge present")
    };
    let cell_edges = points
        .iter()
        .map(|ids| {
            scheme
                .template_edges
                .iter()
                .map(|&(a, b)| edge_id(ids[a], ids[b]))
                .collect()
        })
        .collect();
    let index = CellIndex {
        level,
        addresses,
        points,
        boundary_count: scheme.boundary_count,
        edges: cell_edges,
    };
    let network = network.with_cells(Arc::new(index));

    Ok(FractalGraph {
        scheme: scheme.clone(),
        level,
        network,
        keys,
    })
}

/// Every boundary point must reappear among the level-1 vertices.
fn check_boundary_self_similar(scheme: &FractalScheme) -> Result<()> {
    let level1: std::collections::HashSet<Vec<i64>> = (0..scheme.map_count())
        .flat_map(|k| {
            let w = CellAddress(vec![k]);
            (0..scheme.boundary_count)
                .map(|j| scheme.key(&w, j))
                .collect::<Vec<_>>()
        })
        .collect();
    for j in 0..scheme.boundary_count {
        let scaled: Vec<i64> = scheme.template_points[j]
            .iter()
            .map(|x| x * scheme.ratio)
            .collect();
        if !level1.contains(&scaled) {
            bail!(Gluing, "boundary point {j} is not a vertex of the level-1 graph");
        }
    }
    Ok(())
}

impl FractalGraph {
    pub fn cell_index(&self) -> &CellIndex {
        self.network.cell_index().expect("fractal graphs carry a cell index")
    }

    /// Vertex id of `Psi_w(a_j)` for an address of length at most the built level.
    pub fn vertex_of(&self, address: &CellAddress, corner: usize) -> Result<usize> {
        if address.len() > self.level {
            bail!(InvalidArgument, "address {address} is deeper than the built level {}", self.level);
        }
        let mut key = self.scheme.key(address, corner);
        let up = self.scheme.ratio.pow((self.level - address.len()) as u32);
        key.iter_mut().for_each(|x| *x *= up);
        self.keys
            .get(&key)
            .copied()
            .ok_or_else(|| crate::error::Error::InvalidArgument(format!("point {corner} of {address} is not a vertex")))
    }

    /// The m-cells `(w, Psi_w(V_0))` for `m` up to the built level.
    pub fn cells(&self, level: usize) -> Result<Vec<(CellAddress, Vec<usize>)>> {
        if level > self.level {
            bail!(InvalidArgument, "level {level} exceeds the built level {}", self.level);
        }
        CellAddress::all(self.scheme.map_count(), level)
            .into_iter()
            .map(|w| {
                let ids = (0..self.scheme.boundary_count)
                    .map(|j| self.vertex_of(&w, j))
                    .collect::<Result<Vec<_>>>()?;
                Ok((w, ids))
            })
            .collect()
    }

    /// The boundary vertices `V_0` as ids in this graph.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.scheme.boundary_count)
            .map(|j| self.vertex_of(&CellAddress::root(), j).expect("boundary is present"))
            .collect()
    }

    /// The vertex set `V_m` for `m` up to the built level, sorted.
    pub fn level_vertices(&self, level: usize) -> Result<Vec<usize>> {
        let mut v: Vec<usize> = self.cells(level)?.into_iter().flat_map(|(_, ids)| ids).collect();
        v.sort_unstable();
        v.dedup();
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pow3(n: u32) -> usize {
        3usize.pow(n)
    }

    #[test]
    fn gasket_level_zero_is_the_template() {
        let g = build_fractal_graph(&FractalScheme::gasket(), 0).unwrap();
        assert_eq!(g.network.vertex_count(), 3);
        assert_eq!(g.network.edge_count(), 3);
        assert_eq!(g.network.root(), 0);
    }

    /// Counting oracle: each new level glues three copies at three shared corners.
    #[test]
    fn gasket_counts_follow_induction() {
        let mut vertices = 3usize;
        for n in 0..=6u32 {
            let g = build_fractal_graph(&FractalScheme::gasket(), n as usize).unwrap();
            assert_eq!(g.network.vertex_count(), vertices, "level {n}");
            assert_eq!(g.network.vertex_count(), (pow3(n + 1) + 3) / 2);
            assert_eq!(g.network.edge_count(), pow3(n + 1));
            vertices = 3 * vertices - 3;
        }
    }

    #[test]
    fn vicsek_is_a_tree() {
        for n in 0..4 {
            let g = build_fractal_graph(&FractalScheme::vicsek(), n).unwrap();
            assert!(g.network.is_tree(), "level {n}");
            assert_eq!(g.cell_index().len(), 5usize.pow(n as u32));
        }
        let g = build_fractal_graph(&FractalScheme::vicsek(), 1).unwrap();
        // 5 centres plus the 4x4 corners shared at most pairwise: 5 + 16
        assert_eq!(g.network.vertex_count(), 21);
        let cells = g.cells(1).unwrap();
        assert_eq!(cells.len(), 5);
        assert!(cells.iter().all(|(_, ids)| ids.len() == 4));
    }

    #[test]
    fn root_is_origin() {
        for s in [FractalScheme::gasket(), FractalScheme::vicsek(), FractalScheme::carpet()] {
            let g = build_fractal_graph(&s, 2).unwrap();
            let c = &g.network.coords().unwrap()[g.network.root()];
            assert!(c.iter().all(|x| *x == 0.0), "{}", s.name);
        }
    }

    #[test]
    fn carpet_level_one() {
        let g = build_fractal_graph(&FractalScheme::carpet(), 1).unwrap();
        assert_eq!(g.network.vertex_count(), 16);
        // 8 squares with 4 sides, 8 sides shared by two squares
        assert_eq!(g.network.edge_count(), 24);
    }

    #[test]
    fn gasket_cells_meet_in_at_most_one_vertex() {
        let g = build_fractal_graph(&FractalScheme::gasket(), 3).unwrap();
        let cells = g.cells(2).unwrap();
        assert_eq!(cells.len(), 9);
        for (i, (_, a)) in cells.iter().enumerate() {
            for (_, b) in &cells[i + 1..] {
                let shared = a.iter().filter(|x| b.contains(x)).count();
                assert!(shared <= 1);
            }
        }
        assert!(g.cells(4).is_err());
        let top = g.cells(0).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].1, g.boundary_vertices());
    }

    #[test]
    fn cells_partition_edges() {
        for s in [FractalScheme::gasket(), FractalScheme::vicsek()] {
            let g = build_fractal_graph(&s, 3).unwrap();
            let mut hits = vec![0; g.network.edge_count()];
            for cell in &g.cell_index().edges {
                for &e in cell {
                    hits[e] += 1;
                }
            }
            assert!(hits.iter().all(|h| *h == 1), "{}", s.name);
        }
    }

    #[test]
    fn deterministic_rebuild() {
        let a = build_fractal_graph(&FractalScheme::gasket(), 4).unwrap();
        let b = build_fractal_graph(&FractalScheme::gasket(), 4).unwrap();
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn conflicting_gluing_rejected() {
        // two maps with the same image put the interior point of one cell inside another
        let mut s = FractalScheme::vicsek();
        s.maps[4] = LatticeMap::translation(vec![0, 0]);
        assert!(matches!(
            build_fractal_graph(&s, 1),
            Err(crate::error::Error::Gluing(_))
        ));

        // a degenerate map collapses a cell
        let mut s = FractalScheme::gasket();
        s.maps[1].linear = vec![vec![0, 0], vec![0, 0]];
        assert!(build_fractal_graph(&s, 1).is_err());
    }

    #[test]
    fn vertex_of_matches_cell_index() {
        let g = build_fractal_graph(&FractalScheme::gasket(), 2).unwrap();
        let idx = g.cell_index();
        for (i, w) in idx.addresses.iter().enumerate() {
            for j in 0..3 {
                assert_eq!(g.vertex_of(w, j).unwrap(), idx.points[i][j]);
            }
        }
        assert_eq!(CellAddress::new(vec![0, 2], 3).unwrap().to_string(), "13");
        assert!(CellAddress::new(vec![3], 3).is_err());
    }
}
