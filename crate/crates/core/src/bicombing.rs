//! The homological bicombings `q'` and `q`.
//!
//! `f̄(b,a)` is the averaged point `p'[b,a](10δ)` (or `a` itself when
//! `d(a,b) ≤ 10δ`), and `q'` follows the recursion
//! `q'[a,b] = q'[a, f̄(b,a)] + p'[f̄(b,a), b]`, extended linearly over 0-chains.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{format_rational, integer, to_f64, OneChain, Rational, ZeroChain};
use crate::error::{Error, Result};
use crate::generators::TruncatedBall;
use crate::geodesic::{GeodesicDag, DEFAULT_GEODESIC_CAP};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::metric::Metric;

/// Thresholds derived from δ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConstantsLedger {
    pub delta: u32,
    pub fbar_cut: u32,
    pub fbar_support_radius: u32,
    pub pprime_tail: u32,
    pub quasigeodesic_c: u32,
    pub coefficient_bound: u32,
}

impl ConstantsLedger {
    pub fn new(delta: u32) -> Self {
        assert!(delta > 0, "δ is a positive integer");
        ConstantsLedger {
            delta,
            fbar_cut: 10 * delta,
            fbar_support_radius: 8 * delta,
            pprime_tail: 18 * delta,
            quasigeodesic_c: 27 * delta,
            coefficient_bound: 2003 * delta * delta,
        }
    }
}

/// Total number of memoized `q'` chains kept before the memo is flushed.
const MEMO_CAP: usize = 200_000;

type SourceMemo = HashMap<VertexId, Arc<OneChain>>;

pub struct BicombingEngine {
    ball: TruncatedBall,
    metric: Arc<Metric>,
    ledger: ConstantsLedger,
    base_row: Arc<Vec<u32>>,
    geodesic_cap: u64,
    memo: Mutex<(usize, HashMap<VertexId, SourceMemo>)>,
}

impl BicombingEngine {
    pub fn new(ball: TruncatedBall, delta: u32) -> Self {
        let metric = Arc::new(Metric::new(Arc::clone(&ball.graph)));
        Self::with_metric(ball, delta, metric)
    }

    pub fn with_metric(ball: TruncatedBall, delta: u32, metric: Arc<Metric>) -> Self {
        let base_row = metric.row(ball.basepoint);
        BicombingEngine {
            ball,
            metric,
            ledger: ConstantsLedger::new(delta),
            base_row,
            geodesic_cap: DEFAULT_GEODESIC_CAP,
            memo: Mutex::new((0, HashMap::new())),
        }
    }

    pub fn with_geodesic_cap(mut self, cap: u64) -> Self {
        self.geodesic_cap = cap;
        self
    }

    pub fn ledger(&self) -> &ConstantsLedger {
        &self.ledger
    }

    pub fn ball(&self) -> &TruncatedBall {
        &self.ball
    }

    pub fn graph(&self) -> &Graph {
        &self.ball.graph
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn metric_arc(&self) -> Arc<Metric> {
        Arc::clone(&self.metric)
    }

    pub fn is_inner(&self, v: VertexId) -> bool {
        self.base_row[v.index()] <= self.ball.trust_radius
    }

    pub fn check_inner(&self, v: VertexId) -> Result<()> {
        if self.is_inner(v) {
            Ok(())
        } else {
            Err(Error::OutsideTrust {
                vertex: self.graph().vertex_name(v).into(),
                trust: self.ball.trust_radius,
            })
        }
    }

    pub fn inner_vertices(&self) -> Vec<VertexId> {
        self.graph().vertices().filter(|&v| self.is_inner(v)).collect()
    }

    fn dag(&self, a: VertexId, b: VertexId) -> Result<GeodesicDag> {
        let dag = self.metric.dag(a, b);
        dag.check_cap(self.graph(), self.geodesic_cap)?;
        Ok(dag)
    }

    /// The fixed geodesic `p[a,b]`: lexicographically smallest by vertex id.
    pub fn p(&self, a: VertexId, b: VertexId) -> Vec<VertexId> {
        self.metric.dag(a, b).first_path(self.graph())
    }

    pub fn p_avg(&self, a: VertexId, b: VertexId) -> Result<OneChain> {
        self.check_inner(a)?;
        self.check_inner(b)?;
        self.p_avg_unchecked(a, b)
    }

    fn p_avg_unchecked(&self, a: VertexId, b: VertexId) -> Result<OneChain> {
        Ok(self.dag(a, b)?.average_chain(self.graph()))
    }

    pub fn p_avg_point(&self, a: VertexId, b: VertexId, r: u32) -> Result<ZeroChain> {
        self.check_inner(a)?;
        self.check_inner(b)?;
        self.dag(a, b)?.average_point(r)
    }

    pub fn fbar(&self, b: VertexId, a: VertexId) -> Result<ZeroChain> {
        self.check_inner(a)?;
        self.check_inner(b)?;
        self.fbar_unchecked(b, a)
    }

    fn fbar_unchecked(&self, b: VertexId, a: VertexId) -> Result<ZeroChain> {
        if self.metric.d(a, b) <= self.ledger.fbar_cut {
            return Ok(ZeroChain::point(a));
        }
        self.dag(b, a)?.average_point(self.ledger.fbar_cut)
    }

    /// `q'[a,b]`, memoized.
    pub fn qprime(&self, a: VertexId, b: VertexId) -> Result<Arc<OneChain>> {
        self.check_inner(a)?;
        self.check_inner(b)?;
        if let Some(c) = self.memo.lock().unwrap().1.get(&a).and_then(|m| m.get(&b)) {
            return Ok(Arc::clone(c));
        }
        let mut local = SourceMemo::new();
        let out = self.qprime_in(a, b, &mut local)?;
        let mut guard = self.memo.lock().unwrap();
        let (count, memo) = &mut *guard;
        if *count + local.len() > MEMO_CAP {
            memo.clear();
            *count = 0;
        }
        let entry = memo.entry(a).or_default();
        for (x, c) in local {
            if entry.insert(x, c).is_none() {
                *count += 1;
            }
        }
        Ok(out)
    }

    /// The recursion with a caller-held memo for the source `a`.
    pub fn qprime_in(&self, a: VertexId, b: VertexId, memo: &mut SourceMemo) -> Result<Arc<OneChain>> {
        if let Some(c) = memo.get(&b) {
            return Ok(Arc::clone(c));
        }
        let mut out = OneChain::new();
        if a != b && self.metric.d(a, b) <= self.ledger.fbar_cut {
            out = self.p_avg_unchecked(a, b)?;
        } else if a != b {
            let g = self.graph();
            let f = self.fbar_unchecked(b, a)?;
            for (x, w) in f.iter() {
                if x != a {
                    let head = self.qprime_in(a, x, memo)?;
                    out.add_scaled(&head, w);
                }
                let tail = self.p_avg_unchecked(x, b)?;
                out.add_scaled(&tail, w);
            }
            debug_assert!(out.boundary(g).is_ok());
        }
        let out = Arc::new(out);
        memo.insert(b, Arc::clone(&out));
        Ok(out)
    }

    /// `q'[a, f] = Σ_x f(x) q'[a,x]`.
    pub fn qprime_of_chain(&self, a: VertexId, f: &ZeroChain) -> Result<OneChain> {
        let mut out = OneChain::new();
        for (x, w) in f.iter() {
            out.add_scaled(&*self.qprime(a, x)?, w);
        }
        Ok(out)
    }

    /// `q[a,b] = ½(q'[a,b] − q'[b,a])`.
    pub fn q(&self, a: VertexId, b: VertexId) -> Result<OneChain> {
        let fwd = self.qprime(a, b)?;
        let back = self.qprime(b, a)?;
        Ok(fwd.sub(&back).scaled(&Rational::new(1.into(), 2.into())))
    }

    pub fn cyclic_sum(&self, a: VertexId, b: VertexId, c: VertexId) -> Result<OneChain> {
        let mut s = self.q(a, b)?;
        s.add_chain(&self.q(b, c)?);
        s.add_chain(&self.q(c, a)?);
        Ok(s)
    }

    /// `‖q[a,b] + q[b,c] + q[c,a]‖₁`.
    pub fn area(&self, a: VertexId, b: VertexId, c: VertexId) -> Result<Rational> {
        Ok(self.cyclic_sum(a, b, c)?.l1())
    }

    /// Twice the largest distance, in the realization, from a support edge of
    /// `chain` to a geodesic of `dag`, maximized over all geodesics.
    pub fn support_distance_twice(&self, dag: &GeodesicDag, chain: &OneChain) -> u32 {
        let g = self.graph();
        let m = &self.metric;
        let mut worst = 0;
        for (e, _) in chain.iter() {
            worst = worst.max(edge_to_geodesics_twice(m, g, dag, e));
        }
        worst
    }

    pub fn verify_bounds(&self, a: VertexId, b: VertexId) -> Result<BoundsReport> {
        let fwd = self.qprime(a, b)?;
        let back = self.qprime(b, a)?;
        Ok(self.bounds_of(a, b, &fwd, &back))
    }

    fn bounds_of(&self, a: VertexId, b: VertexId, fwd: &OneChain, back: &OneChain) -> BoundsReport {
        let g = self.graph();
        let l = &self.ledger;
        let d = self.metric.d(a, b);
        let dag = self.metric.dag(a, b);
        let boundary_ok = fwd.boundary(g).ok() == Some(ZeroChain::difference(b, a))
            && back.boundary(g).ok() == Some(ZeroChain::difference(a, b));
        let l1 = fwd.l1().max(back.l1());
        let l1_limit = integer(l.pprime_tail as i64 * d as i64);
        let support_twice = self
            .support_distance_twice(&dag, fwd)
            .max(self.support_distance_twice(&dag, back));
        let max_coefficient = fwd.linf().max(back.linf());
        let coefficient_ok = max_coefficient <= integer(l.coefficient_bound as i64);
        let l1_ok = l1 <= l1_limit;
        let support_ok = support_twice <= 2 * l.quasigeodesic_c;
        BoundsReport {
            a: g.vertex_name(a).into(),
            b: g.vertex_name(b).into(),
            distance: d,
            boundary_ok,
            l1: format_rational(&l1),
            l1_ratio: if d == 0 { 0.0 } else { to_f64(&l1) / (l.pprime_tail as f64 * d as f64) },
            l1_ok,
            support_distance: support_twice as f64 / 2.0,
            support_ok,
            max_coefficient: format_rational(&max_coefficient),
            coefficient_ok,
            ok: boundary_ok && l1_ok && support_ok && coefficient_ok,
        }
    }

    /// Every ordered pair of `sources × targets`, each source with its own memo.
    pub fn scan_pairs(&self, sources: &[VertexId], targets: &[VertexId]) -> Result<ScanReport> {
        Ok(self.scan_pairs_with(sources, targets, |_, _| true)?.0)
    }

    /// As [`scan_pairs`](Self::scan_pairs), also counting pairs where `oracle(dag, q'[a,b])` fails.
    pub fn scan_pairs_with(
        &self,
        sources: &[VertexId],
        targets: &[VertexId],
        oracle: impl Fn(&GeodesicDag, &OneChain) -> bool + Sync,
    ) -> Result<(ScanReport, u64)> {
        for &v in sources.iter().chain(targets) {
            self.check_inner(v)?;
        }
        let g = self.graph();
        let parts: Vec<Result<(ScanReport, u64)>> = sources
            .par_iter()
            .map(|&a| {
                let mut memo = SourceMemo::new();
                let mut order: Vec<VertexId> = targets.to_vec();
                let row = self.metric.row(a);
                order.sort_by_key(|v| (row[v.index()], *v));
                let mut part = ScanReport::default();
                let mut misses = 0;
                for b in order {
                    let fwd = self.qprime_in(a, b, &mut memo)?;
                    let d = row[b.index()];
                    let dag = self.metric.dag(a, b);
                    let boundary_ok = fwd.boundary(g).ok() == Some(ZeroChain::difference(b, a));
                    let l1 = fwd.l1();
                    let l1_ok = l1 <= integer(self.ledger.pprime_tail as i64 * d as i64);
                    misses += !oracle(&dag, &fwd) as u64;
                    let support_twice = self.support_distance_twice(&dag, &fwd);
                    let coef = fwd.linf();
                    part.absorb(PairOutcome {
                        a,
                        b,
                        boundary_ok,
                        l1_ok,
                        l1_ratio: if d == 0 { 0.0 } else { to_f64(&l1) / (self.ledger.pprime_tail as f64 * d as f64) },
                        support_twice,
                        support_ok: support_twice <= 2 * self.ledger.quasigeodesic_c,
                        coefficient: coef.clone(),
                        coefficient_ok: coef <= integer(self.ledger.coefficient_bound as i64),
                    }, g);
                }
                Ok((part, misses))
            })
            .collect();
        let mut total = ScanReport::default();
        let mut misses = 0;
        for p in parts {
            let (part, m) = p?;
            total.merge(part);
            misses += m;
        }
        Ok((total, misses))
    }
}

/// `max_{γ∈S} 2·sup_{p∈e} d(p, γ)` for one edge, in the realization.
fn edge_to_geodesics_twice(m: &Metric, g: &Graph, dag: &GeodesicDag, e: EdgeId) -> u32 {
    let (u, v) = (g.src(e), g.dst(e));
    if dag.is_cut_vertex(u) && dag.is_cut_vertex(v) && is_dag_step(dag, g, u, v) {
        return 0;
    }
    let (ru, rv) = (m.row(u), m.row(v));
    let mu = dag.bottleneck_max_min(g, |x| ru[x.index()]);
    // The optimum has d(u,γ) ∈ {mu − 1, mu}: d(v,·) and d(u,·) differ by at most one.
    let mut best = 0;
    for s in [mu.saturating_sub(1), mu] {
        let restricted = dag.bottleneck_max_min(g, |x| {
            if ru[x.index()] >= s {
                rv[x.index()] as i64
            } else {
                -1
            }
        });
        if restricted >= 0 {
            best = best.max(s + restricted as u32);
        }
    }
    best + 1
}

fn is_dag_step(dag: &GeodesicDag, g: &Graph, u: VertexId, v: VertexId) -> bool {
    dag.successors(g, u).any(|w| w == v) || dag.successors(g, v).any(|w| w == u)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub a: String,
    pub b: String,
    pub distance: u32,
    pub boundary_ok: bool,
    pub l1: String,
    pub l1_ratio: f64,
    pub l1_ok: bool,
    pub support_distance: f64,
    pub support_ok: bool,
    pub max_coefficient: String,
    pub coefficient_ok: bool,
    pub ok: bool,
}

struct PairOutcome {
    a: VertexId,
    b: VertexId,
    boundary_ok: bool,
    l1_ok: bool,
    l1_ratio: f64,
    support_twice: u32,
    support_ok: bool,
    coefficient: Rational,
    coefficient_ok: bool,
}

/// Aggregate of a pair scan.  Violation lists hold the first few offending pairs.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ScanReport {
    pub pairs: u64,
    pub boundary_violations: u64,
    pub l1_violations: u64,
    pub support_violations: u64,
    pub coefficient_violations: u64,
    pub worst_l1_ratio: f64,
    pub worst_support_distance: f64,
    #[serde(serialize_with = "ser_rational")]
    pub max_coefficient: Rational,
    pub examples: Vec<(String, String)>,
}

fn ser_rational<S: serde::Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(q))
}

const MAX_EXAMPLES: usize = 8;

impl ScanReport {
    pub fn violations(&self) -> u64 {
        self.boundary_violations + self.l1_violations + self.support_violations + self.coefficient_violations
    }

    fn absorb(&mut self, o: PairOutcome, g: &Graph) {
        self.pairs += 1;
        let bad = !(o.boundary_ok && o.l1_ok && o.support_ok && o.coefficient_ok);
        self.boundary_violations += !o.boundary_ok as u64;
        self.l1_violations += !o.l1_ok as u64;
        self.support_violations += !o.support_ok as u64;
        self.coefficient_violations += !o.coefficient_ok as u64;
        self.worst_l1_ratio = self.worst_l1_ratio.max(o.l1_ratio);
        self.worst_support_distance = self.worst_support_distance.max(o.support_twice as f64 / 2.0);
        if o.coefficient.abs() > self.max_coefficient {
            self.max_coefficient = o.coefficient;
        }
        if bad && self.examples.len() < MAX_EXAMPLES {
            self.examples.push((g.vertex_name(o.a).into(), g.vertex_name(o.b).into()));
        }
    }

    fn merge(&mut self, o: ScanReport) {
        self.pairs += o.pairs;
        self.boundary_violations += o.boundary_violations;
        self.l1_violations += o.l1_violations;
        self.support_violations += o.support_violations;
        self.coefficient_violations += o.coefficient_violations;
        self.worst_l1_ratio = self.worst_l1_ratio.max(o.worst_l1_ratio);
        self.worst_support_distance = self.worst_support_distance.max(o.worst_support_distance);
        if o.max_coefficient > self.max_coefficient {
            self.max_coefficient = o.max_coefficient;
        }
        for ex in o.examples {
            if self.examples.len() < MAX_EXAMPLES {
                self.examples.push(ex);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{path_chain, rational};
    use num_traits::Zero;
    use crate::generators::{free_group_ball, free_product_cyclic_ball};
    use crate::geodesic::all_geodesics;
    use crate::graph::tests::{cycle_graph, path_graph};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn whole(g: Graph) -> TruncatedBall {
        let d = g.distances_from(VertexId(0));
        let r = *d.iter().max().unwrap();
        TruncatedBall {
            graph: Arc::new(g),
            basepoint: VertexId(0),
            radius: r,
            trust_radius: r,
            family: None,
            cayley: None,
        }
    }

    /// `p'` from an explicit enumeration of `S_{a,b}`.
    fn enumerated_average(g: &Graph, a: VertexId, b: VertexId) -> OneChain {
        let s = all_geodesics(g, a, b, DEFAULT_GEODESIC_CAP).unwrap();
        let w = rational(1, s.len() as i64);
        let mut out = OneChain::new();
        for p in &s.paths {
            out.add_scaled(&path_chain(g, p).unwrap(), &w);
        }
        out
    }

    #[test]
    fn ledger_multiples() {
        let l = ConstantsLedger::new(2);
        assert_eq!(
            (l.fbar_cut, l.fbar_support_radius, l.pprime_tail, l.quasigeodesic_c, l.coefficient_bound),
            (20, 16, 36, 54, 8012)
        );
    }

    #[test]
    fn p_avg_examples() {
        let eng = BicombingEngine::new(whole(cycle_graph(4)), 1);
        let (a, b) = (VertexId(0), VertexId(2));
        let avg = eng.p_avg(a, b).unwrap();
        assert_eq!(avg, enumerated_average(eng.graph(), a, b));
        assert_eq!(avg.iter().filter(|(_, c)| **c == rational(1, 2)).count(), 2);
        assert!(eng.p_avg(a, a).unwrap().is_zero());
        let mid = eng.p_avg_point(a, b, 1).unwrap();
        assert_eq!(mid.len(), 2);
        assert_eq!(eng.p_avg_point(a, b, 0).unwrap(), ZeroChain::point(a));
        assert_eq!(eng.p_avg_point(a, b, 2).unwrap(), ZeroChain::point(b));
        assert!(eng.p_avg_point(a, b, 3).is_err());
    }

    #[test]
    fn fbar_on_a_line() {
        let g = path_graph(20);
        let eng = BicombingEngine::new(whole(g), 1);
        let (a, b) = (VertexId(0), VertexId(15));
        // tree oracle: the point 10 steps from b toward a
        assert_eq!(eng.fbar(b, a).unwrap(), ZeroChain::point(VertexId(5)));
        assert_eq!(eng.fbar(VertexId(10), a).unwrap(), ZeroChain::point(a));
    }

    #[test]
    fn trust_radius_is_enforced() {
        let ball = free_group_ball(2, 4).unwrap();
        let eng = BicombingEngine::new(ball, 1);
        let rim = eng.graph().vertex("aaaa").unwrap();
        assert!(matches!(eng.fbar(rim, VertexId(0)), Err(Error::OutsideTrust { .. })));
        assert!(eng.qprime(VertexId(0), rim).is_err());
    }

    #[test]
    fn qprime_on_trees_is_the_geodesic() {
        let ball = free_group_ball(2, 6).unwrap();
        let eng = BicombingEngine::new(ball, 1);
        let g = eng.graph();
        let inner = eng.inner_vertices();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let a = inner[rng.gen_range(0..inner.len())];
            let b = inner[rng.gen_range(0..inner.len())];
            let geo = path_chain(g, &eng.p(a, b)).unwrap();
            assert_eq!(*eng.qprime(a, b).unwrap(), geo);
            assert_eq!(eng.q(a, b).unwrap(), geo);
        }
        assert!(eng.qprime(VertexId(0), VertexId(0)).unwrap().is_zero());
    }

    #[test]
    fn tree_areas_vanish() {
        let eng = BicombingEngine::new(free_group_ball(2, 5).unwrap(), 1);
        let inner = eng.inner_vertices();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let [a, b, c] = [0; 3].map(|_: u8| inner[rng.gen_range(0..inner.len())]);
            assert!(eng.area(a, b, c).unwrap().is_zero());
        }
    }

    #[test]
    fn recursion_agrees_with_path_count_average() {
        // f̄ weights are the path-count weights, so the recursion reproduces p'
        for (ball, delta) in [
            (free_product_cyclic_ball(&[3, 3], 6).unwrap(), 1),
            (free_product_cyclic_ball(&[4, 4], 6).unwrap(), 1),
            (free_product_cyclic_ball(&[2, 5], 8).unwrap(), 1),
        ] {
            let eng = BicombingEngine::new(ball, delta);
            let g = eng.graph();
            let inner = eng.inner_vertices();
            for &a in inner.iter().step_by(3) {
                for &b in inner.iter().step_by(5) {
                    let q = eng.qprime(a, b).unwrap();
                    assert_eq!(*q, enumerated_average(g, a, b));
                }
            }
        }
    }

    #[test]
    fn small_cycles_with_long_recursion() {
        // δ = 1 forces recursion once d(a,b) > 10 on a long cycle
        let g = cycle_graph(30);
        let eng = BicombingEngine::new(whole(g), 1);
        let g = eng.graph();
        let a = VertexId(0);
        for b in g.vertices() {
            let q = eng.qprime(a, b).unwrap();
            assert_eq!(*q, enumerated_average(g, a, b));
            assert_eq!(q.boundary(g).unwrap(), ZeroChain::difference(b, a));
        }
        let b = VertexId(15);
        let r = eng.verify_bounds(a, b).unwrap();
        assert!(r.ok);
        assert_eq!(r.support_distance, 7.5);
    }

    #[test]
    fn verify_bounds_on_tree() {
        let eng = BicombingEngine::new(free_group_ball(2, 6).unwrap(), 1);
        let g = eng.graph();
        let (a, b) = (g.vertex("abA").unwrap(), g.vertex("BBa").unwrap());
        let r = eng.verify_bounds(a, b).unwrap();
        assert!(r.ok);
        assert_eq!(r.support_distance, 0.0);
        assert_eq!(r.max_coefficient, "1");
        assert_eq!(r.l1, "6");
    }

    #[test]
    fn scan_counts_every_pair() {
        let eng = BicombingEngine::new(free_product_cyclic_ball(&[3, 3], 6).unwrap(), 1);
        let inner = eng.inner_vertices();
        let r = eng.scan_pairs(&inner, &inner).unwrap();
        assert_eq!(r.pairs, (inner.len() * inner.len()) as u64);
        assert_eq!(r.violations(), 0);
        assert_eq!(r.max_coefficient, integer(1));
    }

    #[test]
    fn support_distance_matches_enumeration() {
        let eng = BicombingEngine::new(free_product_cyclic_ball(&[4, 4], 6).unwrap(), 1);
        let g = eng.graph();
        let inner = eng.inner_vertices();
        let m = eng.metric();
        for &a in inner.iter().step_by(7) {
            for &b in inner.iter().step_by(4) {
                let q = eng.qprime(a, b).unwrap();
                let dag = m.dag(a, b);
                let fast = eng.support_distance_twice(&dag, &q);
                let mut brute = 0;
                for gamma in dag.enumerate(g) {
                    let on_gamma: Vec<EdgeId> = gamma
                        .windows(2)
                        .map(|w| g.canonical(g.edge_between(w[0], w[1]).unwrap()).0)
                        .collect();
                    for (e, _) in q.iter() {
                        let (ru, rv) = (m.row(g.src(e)), m.row(g.dst(e)));
                        let du = gamma.iter().map(|x| ru[x.index()]).min().unwrap();
                        let dv = gamma.iter().map(|x| rv[x.index()]).min().unwrap();
                        let t = if on_gamma.contains(&e) { 0 } else { du + dv + 1 };
                        brute = brute.max(t);
                    }
                }
                assert_eq!(fast, brute);
            }
        }
    }

    #[test]
    fn equivariance_under_left_multiplication() {
        let ball = free_product_cyclic_ball(&[3, 4], 7).unwrap();
        let action = ball.action();
        let eng = BicombingEngine::new(ball, 1);
        let g = eng.graph();
        let inner = eng.inner_vertices();
        let mut checked = 0;
        for h in &action.generators {
            for &a in inner.iter().step_by(11) {
                for &b in inner.iter().step_by(13) {
                    let (Some(ha), Some(hb)) = (h.vertex(a), h.vertex(b)) else { continue };
                    if !eng.is_inner(ha) || !eng.is_inner(hb) {
                        continue;
                    }
                    let f = eng.fbar(b, a).unwrap();
                    assert_eq!(h.map_zero_chain(&f), Some(eng.fbar(hb, ha).unwrap()));
                    let q = eng.qprime(a, b).unwrap();
                    if let Some(img) = h.map_one_chain(g, &q) {
                        assert_eq!(img, *eng.qprime(ha, hb).unwrap());
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 50);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn bicombing_identities(seed in any::<u64>()) {
            let eng = BicombingEngine::new(free_product_cyclic_ball(&[3, 5], 7).unwrap(), 1);
            let g = eng.graph();
            let inner = eng.inner_vertices();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let [a, b, c] = [0; 3].map(|_: u8| inner[rng.gen_range(0..inner.len())]);
            let qab = eng.qprime(a, b).unwrap();
            prop_assert_eq!(qab.boundary(g).unwrap(), ZeroChain::difference(b, a));
            let q = eng.q(a, b).unwrap();
            prop_assert_eq!(q.neg(), eng.q(b, a).unwrap());
            prop_assert_eq!(q.boundary(g).unwrap(), ZeroChain::difference(b, a));
            let f = eng.fbar(b, a).unwrap();
            prop_assert!(f.is_convex_combination());
            if a != b {
                let row = eng.metric().row(a);
                prop_assert!(f.support().all(|x| row[x.index()] < row[b.index()]));
            }
            let s1 = eng.cyclic_sum(a, b, c).unwrap();
            prop_assert_eq!(&s1, &eng.cyclic_sum(b, c, a).unwrap());
            prop_assert_eq!(s1.neg(), eng.cyclic_sum(b, a, c).unwrap());
            prop_assert!(eng.area(a, a, b).unwrap().is_zero());
            prop_assert!(eng.verify_bounds(a, b).unwrap().ok);
        }
    }
}
