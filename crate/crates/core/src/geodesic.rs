//! Geodesics between two vertices, through the layered DAG of all shortest paths.
//!
//! Every averaged quantity over `S_{a,b}` is computed from path counts on this
//! DAG instead of explicit enumeration: an oriented edge `u → v` lies on
//! exactly `N(a,u)·N(v,b)` geodesics out of `N(a,b)`.

use std::collections::HashMap;

use num_bigint::BigInt;

use crate::chain::{OneChain, Rational, ZeroChain};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};

/// Refuse to enumerate or average over more geodesics than this by default.
pub const DEFAULT_GEODESIC_CAP: u64 = 1_000_000;

#[derive(Clone, Debug)]
pub struct GeodesicDag {
    from: VertexId,
    to: VertexId,
    /// `layers[k]`: vertices at distance `k` from `from` lying on some geodesic, sorted.
    layers: Vec<Vec<VertexId>>,
    layer_of: HashMap<VertexId, u32>,
    /// Number of geodesics `from → v`.
    fwd: HashMap<VertexId, u128>,
    /// Number of geodesics `v → to`.
    bwd: HashMap<VertexId, u128>,
}

impl GeodesicDag {
    /// `dist_to` must be the breadth-first distance row of `to`.
    pub fn new(g: &Graph, from: VertexId, to: VertexId, dist_to: &[u32]) -> Self {
        let len = dist_to[from.index()];
        let mut layers = Vec::with_capacity(len as usize + 1);
        let mut layer_of = HashMap::new();
        layers.push(vec![from]);
        layer_of.insert(from, 0);
        for k in 0..len {
            let mut next: Vec<VertexId> = layers[k as usize]
                .iter()
                .flat_map(|&v| {
                    let want = dist_to[v.index()] - 1;
                    g.neighbors(v).filter(move |w| dist_to[w.index()] == want)
                })
                .collect();
            next.sort_unstable();
            next.dedup();
            for &w in &next {
                layer_of.insert(w, k + 1);
            }
            layers.push(next);
        }

        let mut fwd = HashMap::with_capacity(layer_of.len());
        fwd.insert(from, 1u128);
        for k in 1..layers.len() {
            for &w in &layers[k] {
                let n: u128 = g
                    .neighbors(w)
                    .filter(|u| layer_of.get(u) == Some(&(k as u32 - 1)))
                    .map(|u| fwd[&u])
                    .fold(0u128, u128::saturating_add);
                fwd.insert(w, n);
            }
        }
        let mut bwd = HashMap::with_capacity(layer_of.len());
        bwd.insert(to, 1u128);
        for k in (0..layers.len().saturating_sub(1)).rev() {
            for &v in &layers[k] {
                let n: u128 = g
                    .neighbors(v)
                    .filter(|w| layer_of.get(w) == Some(&(k as u32 + 1)))
                    .map(|w| bwd[&w])
                    .fold(0u128, u128::saturating_add);
                bwd.insert(v, n);
            }
        }
        GeodesicDag { from, to, layers, layer_of, fwd, bwd }
    }

    pub fn from(&self) -> VertexId {
        self.from
    }

    pub fn to(&self) -> VertexId {
        self.to
    }

    /// `d(from, to)`.
    pub fn length(&self) -> u32 {
        (self.layers.len() - 1) as u32
    }

    /// `|S_{from,to}|`.
    pub fn count(&self) -> u128 {
        self.fwd[&self.to]
    }

    pub fn check_cap(&self, g: &Graph, cap: u64) -> Result<()> {
        if self.count() > cap as u128 {
            return Err(Error::GeodesicCap {
                from: g.vertex_name(self.from).into(),
                to: g.vertex_name(self.to).into(),
                count: self.count(),
                cap,
            });
        }
        Ok(())
    }

    pub fn layer(&self, r: u32) -> &[VertexId] {
        &self.layers[r as usize]
    }

    pub fn layers(&self) -> &[Vec<VertexId>] {
        &self.layers
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.layer_of.contains_key(&v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.layers.iter().flatten().copied()
    }

    /// `v` lies on every geodesic (its layer is a singleton).
    pub fn is_cut_vertex(&self, v: VertexId) -> bool {
        self.layer_of
            .get(&v)
            .is_some_and(|&k| self.layers[k as usize].len() == 1)
    }

    /// DAG successors of `v` in vertex-id order.
    pub fn successors<'a>(&'a self, g: &'a Graph, v: VertexId) -> impl Iterator<Item = VertexId> + 'a {
        let next = self.layer_of.get(&v).map(|&k| k + 1);
        g.neighbors(v)
            .filter(move |w| next.is_some() && self.layer_of.get(w).copied() == next)
    }

    /// Oriented DAG edges `u → v` with the number of geodesics through them.
    pub fn edge_counts(&self, g: &Graph) -> Vec<(EdgeId, u128)> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for &u in layer {
                for v in self.successors(g, u) {
                    let e = g.edge_between(u, v).expect("DAG edge exists");
                    out.push((e, self.fwd[&u] * self.bwd[&v]));
                }
            }
        }
        out
    }

    /// `p'[from,to] = |S|⁻¹ Σ_{s∈S} s`.
    pub fn average_chain(&self, g: &Graph) -> OneChain {
        let total = BigInt::from(self.count());
        let mut chain = OneChain::new();
        for (e, n) in self.edge_counts(g) {
            chain.add(g, e, &Rational::new(BigInt::from(n), total.clone()));
        }
        chain
    }

    /// `p'[from,to](r)`: the average of `s(r)` over `s ∈ S`, as a 0-chain.
    pub fn average_point(&self, r: u32) -> Result<ZeroChain> {
        if r > self.length() {
            return Err(Error::OutOfRange(format!(
                "r = {r} exceeds the distance {}",
                self.length()
            )));
        }
        let total = BigInt::from(self.count());
        let mut z = ZeroChain::new();
        for &x in self.layer(r) {
            let n = self.fwd[&x] * self.bwd[&x];
            z.add(x, &Rational::new(BigInt::from(n), total.clone()));
        }
        Ok(z)
    }

    /// The lexicographically smallest geodesic under vertex-id order.
    pub fn first_path(&self, g: &Graph) -> Vec<VertexId> {
        let mut path = vec![self.from];
        let mut cur = self.from;
        while cur != self.to {
            cur = self.successors(g, cur).next().expect("DAG is connected to its sink");
            path.push(cur);
        }
        path
    }

    /// All geodesics in lexicographic order.
    pub fn enumerate(&self, g: &Graph) -> Vec<Vec<VertexId>> {
        let mut out = Vec::new();
        let mut path = vec![self.from];
        self.extend(g, &mut path, &mut out);
        out
    }

    fn extend(&self, g: &Graph, path: &mut Vec<VertexId>, out: &mut Vec<Vec<VertexId>>) {
        let last = *path.last().unwrap();
        if last == self.to {
            out.push(path.clone());
            return;
        }
        for w in self.successors(g, last) {
            path.push(w);
            self.extend(g, path, out);
            path.pop();
        }
    }

    /// `max_{s∈S} min_{v∈s} weight(v)`, by dynamic programming over the layers.
    pub fn bottleneck_max_min<T: Ord + Copy>(
        &self,
        g: &Graph,
        mut weight: impl FnMut(VertexId) -> T,
    ) -> T {
        let mut best: HashMap<VertexId, T> = HashMap::with_capacity(self.layer_of.len());
        for layer in self.layers.iter().rev() {
            for &v in layer {
                let w = weight(v);
                let b = if v == self.to {
                    w
                } else {
                    let tail = self
                        .successors(g, v)
                        .map(|s| best[&s])
                        .max()
                        .expect("non-sink DAG vertex has a successor");
                    w.min(tail)
                };
                best.insert(v, b);
            }
        }
        best[&self.from]
    }

    /// `max_{s∈S} d(x, s)` given the distance row of `x`.
    pub fn max_distance_to_geodesics(&self, g: &Graph, dist_x: &[u32]) -> u32 {
        self.bottleneck_max_min(g, |v| dist_x[v.index()])
    }
}

/// The exhaustive, duplicate-free list `S_{a,b}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeodesicSet {
    pub from: VertexId,
    pub to: VertexId,
    pub paths: Vec<Vec<VertexId>>,
}

impl GeodesicSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Enumerate all geodesics from `a` to `b`, refusing more than `cap` of them.
pub fn all_geodesics(g: &Graph, a: VertexId, b: VertexId, cap: u64) -> Result<GeodesicSet> {
    let dist_b = g.distances_from(b);
    let dag = GeodesicDag::new(g, a, b, &dist_b);
    dag.check_cap(g, cap)?;
    Ok(GeodesicSet { from: a, to: b, paths: dag.enumerate(g) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{integer, path_chain, rational};
    use crate::graph::tests::{cycle_graph, path_graph};
    use crate::graph::GraphBuilder;

    /// Every simple path of length exactly `d(a,b)`, found by exhaustive DFS
    /// without any distance information.
    pub(crate) fn brute_force_geodesics(g: &Graph, a: VertexId, b: VertexId) -> Vec<Vec<VertexId>> {
        fn go(
            g: &Graph,
            b: VertexId,
            max_len: usize,
            path: &mut Vec<VertexId>,
            out: &mut Vec<Vec<VertexId>>,
        ) {
            let last = *path.last().unwrap();
            if last == b {
                out.push(path.clone());
                return;
            }
            if path.len() > max_len {
                return;
            }
            for w in g.neighbors(last) {
                if !path.contains(&w) {
                    path.push(w);
                    go(g, b, max_len, path, out);
                    path.pop();
                }
            }
        }
        let mut all = Vec::new();
        let n = g.vertex_count();
        go(g, b, n, &mut vec![a], &mut all);
        let shortest = all.iter().map(Vec::len).min().unwrap();
        let mut out: Vec<_> = all.into_iter().filter(|p| p.len() == shortest).collect();
        out.sort();
        out
    }

    fn grid(w: usize, h: usize) -> Graph {
        let mut b = GraphBuilder::new();
        let id = |x: usize, y: usize| VertexId((y * w + x) as u32);
        for y in 0..h {
            for x in 0..w {
                b.add_vertex(format!("g{x}_{y}")).unwrap();
            }
        }
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    b.add_edge_pair(format!("h{x}_{y}"), format!("H{x}_{y}"), id(x, y), id(x + 1, y))
                        .unwrap();
                }
                if y + 1 < h {
                    b.add_edge_pair(format!("v{x}_{y}"), format!("V{x}_{y}"), id(x, y), id(x, y + 1))
                        .unwrap();
                }
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn tree_has_one_geodesic() {
        let g = path_graph(5);
        let s = all_geodesics(&g, VertexId(0), VertexId(4), DEFAULT_GEODESIC_CAP).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.paths[0].len(), 5);
    }

    #[test]
    fn four_cycle_antipodal_pair() {
        let g = cycle_graph(4);
        let s = all_geodesics(&g, VertexId(0), VertexId(2), DEFAULT_GEODESIC_CAP).unwrap();
        assert_eq!(s.paths, brute_force_geodesics(&g, VertexId(0), VertexId(2)));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn trivial_pair() {
        let g = cycle_graph(4);
        let s = all_geodesics(&g, VertexId(1), VertexId(1), DEFAULT_GEODESIC_CAP).unwrap();
        assert_eq!(s.paths, vec![vec![VertexId(1)]]);
    }

    #[test]
    fn counts_match_brute_force_on_small_graphs() {
        for g in [grid(3, 4), cycle_graph(6), cycle_graph(7), grid(2, 5)] {
            assert!(g.vertex_count() <= 12);
            for a in g.vertices() {
                let dist = g.distances_from(a);
                for b in g.vertices() {
                    let dag = GeodesicDag::new(&g, b, a, &dist);
                    let brute = brute_force_geodesics(&g, b, a);
                    assert_eq!(dag.count(), brute.len() as u128);
                    assert_eq!(dag.enumerate(&g), brute);
                    assert_eq!(dag.first_path(&g), brute[0]);
                }
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let g = grid(4, 4);
        let err = all_geodesics(&g, VertexId(0), VertexId(15), 10).unwrap_err();
        // C(6,3) = 20 monotone lattice paths
        assert!(matches!(err, Error::GeodesicCap { count: 20, cap: 10, .. }));
    }

    #[test]
    fn average_chain_matches_explicit_average() {
        let g = grid(3, 3);
        let (a, b) = (VertexId(0), VertexId(8));
        let dag = GeodesicDag::new(&g, a, b, &g.distances_from(b));
        let paths = dag.enumerate(&g);
        let mut expect = OneChain::new();
        let w = rational(1, paths.len() as i64);
        for p in &paths {
            expect.add_scaled(&path_chain(&g, p).unwrap(), &w);
        }
        assert_eq!(dag.average_chain(&g), expect);
        assert_eq!(
            dag.average_chain(&g).boundary(&g).unwrap(),
            ZeroChain::difference(b, a)
        );
    }

    #[test]
    fn average_point_on_four_cycle() {
        let g = cycle_graph(4);
        let dag = GeodesicDag::new(&g, VertexId(0), VertexId(2), &g.distances_from(VertexId(2)));
        assert_eq!(dag.average_point(0).unwrap(), ZeroChain::point(VertexId(0)));
        assert_eq!(dag.average_point(2).unwrap(), ZeroChain::point(VertexId(2)));
        let mid = dag.average_point(1).unwrap();
        assert_eq!(mid.get(VertexId(1)), rational(1, 2));
        assert_eq!(mid.get(VertexId(3)), rational(1, 2));
        assert!(dag.average_point(3).is_err());
        assert_eq!(mid.total(), integer(1));
    }

    #[test]
    fn bottleneck_distance_to_all_geodesics() {
        let g = cycle_graph(4);
        let dag = GeodesicDag::new(&g, VertexId(0), VertexId(2), &g.distances_from(VertexId(2)));
        // vertex 1 is on one geodesic and at distance 1 from the other
        let row = g.distances_from(VertexId(1));
        assert_eq!(dag.max_distance_to_geodesics(&g, &row), 1);
        assert!(!dag.is_cut_vertex(VertexId(1)));
        assert!(dag.is_cut_vertex(VertexId(0)));
    }
}
