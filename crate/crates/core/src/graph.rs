//! Serre graphs: vertices, oriented edges with a fixpoint-free involution, and
//! the endpoint maps `e ↦ e₋`, `e ↦ e₊`.
//!
//! Vertices and edges carry external ASCII tokens; internally they are dense
//! indices whose order is the deterministic vertex-id order used for every
//! tie-break in the crate.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u32);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Distance value for vertices in another component. Graphs built through
/// [`GraphBuilder`] are connected, so this never escapes the crate in practice.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Clone)]
pub struct Graph {
    vertex_names: Vec<String>,
    vertex_index: HashMap<String, VertexId>,
    edge_names: Vec<String>,
    edge_index: HashMap<String, EdgeId>,
    src: Vec<VertexId>,
    dst: Vec<VertexId>,
    inv: Vec<EdgeId>,
    /// Outgoing edges per vertex, sorted by terminal vertex.
    out: Vec<Vec<EdgeId>>,
    valency_bound: usize,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("vertices", &self.vertex_count())
            .field("geometric_edges", &self.geometric_edge_count())
            .field("valency_bound", &self.valency_bound)
            .finish()
    }
}

impl Graph {
    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    /// Number of oriented edges (twice the number of geometric edges).
    pub fn edge_count(&self) -> usize {
        self.edge_names.len()
    }

    pub fn geometric_edge_count(&self) -> usize {
        self.edge_names.len() / 2
    }

    pub fn valency_bound(&self) -> usize {
        self.valency_bound
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertex_names.len() as u32).map(VertexId)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edge_names.len() as u32).map(EdgeId)
    }

    /// One representative per orientation class `{e, ē}` (the smaller index).
    pub fn edge_classes(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges().filter(move |&e| self.is_canonical(e))
    }

    pub fn vertex(&self, name: &str) -> Result<VertexId> {
        self.vertex_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn edge(&self, name: &str) -> Result<EdgeId> {
        self.edge_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Structure(format!("unknown edge `{name}`")))
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v.index()]
    }

    pub fn edge_name(&self, e: EdgeId) -> &str {
        &self.edge_names[e.index()]
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        v.index() < self.vertex_names.len()
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        e.index() < self.edge_names.len()
    }

    /// Initial vertex `e₋`.
    #[inline]
    pub fn src(&self, e: EdgeId) -> VertexId {
        self.src[e.index()]
    }

    /// Terminal vertex `e₊`.
    #[inline]
    pub fn dst(&self, e: EdgeId) -> VertexId {
        self.dst[e.index()]
    }

    /// The reversed edge `ē`.
    #[inline]
    pub fn inv(&self, e: EdgeId) -> EdgeId {
        self.inv[e.index()]
    }

    #[inline]
    pub fn is_canonical(&self, e: EdgeId) -> bool {
        e <= self.inv(e)
    }

    /// Canonical representative of the class of `e` and the sign relating them.
    #[inline]
    pub fn canonical(&self, e: EdgeId) -> (EdgeId, i8) {
        let r = self.inv(e);
        if e <= r {
            (e, 1)
        } else {
            (r, -1)
        }
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out[v.index()]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.out[v.index()].len()
    }

    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.out[v.index()].iter().map(move |&e| self.dst(e))
    }

    /// The oriented edge from `u` to `v`, if any.
    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        let out = &self.out[u.index()];
        out.binary_search_by_key(&v, |&e| self.dst(e))
            .ok()
            .map(|i| out[i])
    }

    /// Breadth-first distances from `v`.
    pub fn distances_from(&self, v: VertexId) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.vertex_count()];
        let mut queue = VecDeque::new();
        dist[v.index()] = 0;
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()];
            for w in self.neighbors(u) {
                if dist[w.index()] == UNREACHABLE {
                    dist[w.index()] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn distance(&self, a: VertexId, b: VertexId) -> u32 {
        self.distances_from(a)[b.index()]
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count() == 0 {
            return true;
        }
        self.distances_from(VertexId(0))
            .iter()
            .all(|&d| d != UNREACHABLE)
    }
}

/// Incremental construction of a [`Graph`], validated on [`GraphBuilder::build`].
#[derive(Default)]
pub struct GraphBuilder {
    vertex_names: Vec<String>,
    vertex_index: HashMap<String, VertexId>,
    edges: Vec<(String, VertexId, VertexId, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, name: impl Into<String>) -> Result<VertexId> {
        let name = name.into();
        check_token(&name)?;
        if self.vertex_index.contains_key(&name) {
            return Err(Error::Structure(format!("duplicate vertex `{name}`")));
        }
        let id = VertexId(self.vertex_names.len() as u32);
        self.vertex_index.insert(name.clone(), id);
        self.vertex_names.push(name);
        Ok(id)
    }

    pub fn vertex(&self, name: &str) -> Result<VertexId> {
        self.vertex_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    /// Add a single oriented edge; its inverse must be added separately under `inv`.
    pub fn add_edge(
        &mut self,
        name: impl Into<String>,
        src: VertexId,
        dst: VertexId,
        inv: impl Into<String>,
    ) -> Result<()> {
        let name = name.into();
        check_token(&name)?;
        self.edges.push((name, src, dst, inv.into()));
        Ok(())
    }

    /// Add the pair `e: u → v`, `ē: v → u`.
    pub fn add_edge_pair(
        &mut self,
        name: impl Into<String>,
        inv: impl Into<String>,
        u: VertexId,
        v: VertexId,
    ) -> Result<()> {
        let name = name.into();
        let inv = inv.into();
        self.add_edge(name.clone(), u, v, inv.clone())?;
        self.add_edge(inv, v, u, name)
    }

    pub fn build(self) -> Result<Graph> {
        let n = self.vertex_names.len();
        let mut edge_index = HashMap::with_capacity(self.edges.len());
        for (i, (name, s, d, _)) in self.edges.iter().enumerate() {
            if s.index() >= n || d.index() >= n {
                return Err(Error::Structure(format!("edge `{name}` has an unknown endpoint")));
            }
            if edge_index.insert(name.clone(), EdgeId(i as u32)).is_some() {
                return Err(Error::Structure(format!("duplicate edge `{name}`")));
            }
        }
        let mut inv = Vec::with_capacity(self.edges.len());
        for (name, s, d, inv_name) in &self.edges {
            let j = *edge_index.get(inv_name).ok_or_else(|| {
                Error::Structure(format!("edge `{name}` names a missing inverse `{inv_name}`"))
            })?;
            let (back_name, bs, bd, back_inv) = &self.edges[j.index()];
            if back_name == name {
                return Err(Error::Structure(format!("edge `{name}` is its own inverse")));
            }
            if back_inv != name {
                return Err(Error::Structure(format!(
                    "involution is not an involution at `{name}`: inverse of `{inv_name}` is `{back_inv}`"
                )));
            }
            if bs != d || bd != s {
                return Err(Error::Structure(format!(
                    "endpoints of `{name}` and its inverse `{inv_name}` do not match"
                )));
            }
            if s == d {
                return Err(Error::Structure(format!("edge `{name}` is a loop")));
            }
            inv.push(j);
        }

        let src: Vec<VertexId> = self.edges.iter().map(|e| e.1).collect();
        let dst: Vec<VertexId> = self.edges.iter().map(|e| e.2).collect();
        let mut out = vec![Vec::new(); n];
        for (i, s) in src.iter().enumerate() {
            out[s.index()].push(EdgeId(i as u32));
        }
        for (v, list) in out.iter_mut().enumerate() {
            list.sort_by_key(|e| dst[e.index()]);
            if list.windows(2).any(|w| dst[w[0].index()] == dst[w[1].index()]) {
                return Err(Error::Structure(format!(
                    "parallel edges at vertex `{}`",
                    self.vertex_names[v]
                )));
            }
        }
        let valency_bound = out.iter().map(Vec::len).max().unwrap_or(0);
        let graph = Graph {
            vertex_names: self.vertex_names,
            vertex_index: self.vertex_index,
            edge_names: self.edges.into_iter().map(|e| e.0).collect(),
            edge_index,
            src,
            dst,
            inv,
            out,
            valency_bound,
        };
        if !graph.is_connected() {
            return Err(Error::Structure("graph is not connected".into()));
        }
        Ok(graph)
    }
}

fn check_token(name: &str) -> Result<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_graphic()) {
        return Err(Error::Structure(format!("invalid id token `{name}`")));
    }
    Ok(())
}

/// Gromov product `(a|b)_{x₀}`, stored doubled so it stays an exact integer.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GromovProduct {
    pub twice: u32,
}

impl GromovProduct {
    pub fn from_distances(d_a_x0: u32, d_b_x0: u32, d_a_b: u32) -> Self {
        let twice = (d_a_x0 + d_b_x0)
            .checked_sub(d_a_b)
            .expect("triangle inequality violated");
        GromovProduct { twice }
    }

    pub fn as_f64(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn to_rational(self) -> crate::chain::Rational {
        crate::chain::Rational::new(self.twice.into(), 2.into())
    }

    /// Largest integer not exceeding the product.
    pub fn floor(self) -> u32 {
        self.twice / 2
    }
}

impl fmt::Display for GromovProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl Graph {
    /// `(a|b)_{x₀}` from three breadth-first searches.
    pub fn gromov_product(&self, a: VertexId, b: VertexId, x0: VertexId) -> GromovProduct {
        let from_x0 = self.distances_from(x0);
        GromovProduct::from_distances(
            from_x0[a.index()],
            from_x0[b.index()],
            self.distance(a, b),
        )
    }
}
