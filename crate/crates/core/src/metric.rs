//! Shared, lazily filled breadth-first distance rows.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::geodesic::GeodesicDag;
use crate::graph::{EdgeId, Graph, GromovProduct, VertexId};

/// Memory allowed for cached rows before the cache is flushed.
const ROW_BUDGET_BYTES: usize = 1 << 29;

pub struct Metric {
    graph: Arc<Graph>,
    rows: RwLock<HashMap<VertexId, Arc<Vec<u32>>>>,
    max_rows: usize,
}

impl Metric {
    pub fn new(graph: Arc<Graph>) -> Self {
        let max_rows = (ROW_BUDGET_BYTES / (4 * graph.vertex_count().max(1))).max(64);
        Metric { graph, rows: RwLock::new(HashMap::new()), max_rows }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn graph_arc(&self) -> Arc<Graph> {
        Arc::clone(&self.graph)
    }

    fn cached(&self, v: VertexId) -> Option<Arc<Vec<u32>>> {
        self.rows.read().unwrap().get(&v).cloned()
    }

    /// Distances from `v` to every vertex.
    pub fn row(&self, v: VertexId) -> Arc<Vec<u32>> {
        if let Some(r) = self.cached(v) {
            return r;
        }
        let r = Arc::new(self.graph.distances_from(v));
        let mut rows = self.rows.write().unwrap();
        if rows.len() >= self.max_rows {
            rows.clear();
        }
        rows.entry(v).or_insert(r).clone()
    }

    pub fn d(&self, a: VertexId, b: VertexId) -> u32 {
        if let Some(r) = self.cached(b) {
            return r[a.index()];
        }
        self.row(a)[b.index()]
    }

    pub fn gromov(&self, a: VertexId, b: VertexId, x0: VertexId) -> GromovProduct {
        let r = self.row(x0);
        GromovProduct::from_distances(r[a.index()], r[b.index()], self.d(a, b))
    }

    pub fn dag(&self, from: VertexId, to: VertexId) -> GeodesicDag {
        GeodesicDag::new(&self.graph, from, to, &self.row(to))
    }

    /// Distance between the closed unit segments of two edges in the realization,
    /// rounded down to the vertex metric: the smallest endpoint distance.
    pub fn edge_distance(&self, e: EdgeId, f: EdgeId) -> u32 {
        let g = &*self.graph;
        let (e0, e1) = (g.src(e), g.dst(e));
        let (r0, r1) = (self.row(e0), self.row(e1));
        [g.src(f), g.dst(f)]
            .into_iter()
            .flat_map(|v| [r0[v.index()], r1[v.index()]])
            .min()
            .unwrap()
    }

    pub fn cached_rows(&self) -> usize {
        self.rows.read().unwrap().len()
    }
}
