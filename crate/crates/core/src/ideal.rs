//! Boundary points at finite scale: geodesic rays to the rim of the ball, the
//! bicombing between them, and the cycle and flux conditions of an ideal
//! bicombing.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bicombing::BicombingEngine;
use crate::chain::{format_rational, integer, OneChain, Rational, ZeroChain};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, GromovProduct, VertexId};
use crate::metric::Metric;

/// A geodesic ray from the basepoint to a rim vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoBoundaryPoint {
    pub rim: VertexId,
    pub ray: Vec<VertexId>,
}

impl PseudoBoundaryPoint {
    /// The ray's vertex at distance `n` from the basepoint.
    pub fn at(&self, n: u32) -> VertexId {
        self.ray[n as usize]
    }
}

/// Edge classes of a Gromov-product cone `{x : (x|ξ)_{x₀} > r}`.
#[derive(Clone, Debug)]
pub struct GraphNeighbourhood {
    pub rim: VertexId,
    /// Twice the cone parameter `r`.
    pub r_twice: u32,
    pub edges: BTreeSet<EdgeId>,
}

impl GraphNeighbourhood {
    pub fn contains(&self, ctx: &IdealContext, e: EdgeId) -> bool {
        self.edges.contains(&ctx.engine.graph().canonical(e).0)
    }
}

/// Pointwise stabilization of `q[aₙ, bₙ]` on the probe edges.
#[derive(Clone, Debug, Serialize)]
pub struct DepthStep {
    pub depth: u32,
    pub changed_probes: usize,
    pub max_difference: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CauchyReport {
    pub probe_edges: usize,
    pub steps: Vec<DepthStep>,
    /// Smallest depth from which every later depth agrees exactly on the probes.
    pub stable_from: u32,
    pub stabilized: bool,
}

#[derive(Clone, Debug)]
pub struct IdealChain {
    pub depth: u32,
    pub a: VertexId,
    pub b: VertexId,
    pub chain: OneChain,
    pub cauchy: CauchyReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct SideReport {
    /// Interior sum of `∂(q|_V)` with the current ray endpoint excluded.
    pub sum: String,
    pub expected: i64,
    pub support: usize,
    pub support_in_cut: bool,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdealConditionsReport {
    pub depth: u32,
    pub interior_nonzero: usize,
    pub cycle_ok: bool,
    pub plus: SideReport,
    pub minus: SideReport,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NonzeroEdge {
    pub edge: String,
    pub coefficient: String,
    /// Largest endpoint distance from `x`.
    pub distance: u32,
}

/// Rays, cones, and `q` between rays over one engine.
pub struct IdealContext<'a> {
    pub engine: &'a BicombingEngine,
    base_row: std::sync::Arc<Vec<u32>>,
}

impl<'a> IdealContext<'a> {
    pub fn new(engine: &'a BicombingEngine) -> Self {
        let base_row = engine.metric().row(engine.ball().basepoint);
        IdealContext { engine, base_row }
    }

    fn metric(&self) -> &Metric {
        self.engine.metric()
    }

    pub fn basepoint(&self) -> VertexId {
        self.engine.ball().basepoint
    }

    pub fn trust(&self) -> u32 {
        self.engine.ball().trust_radius
    }

    fn delta(&self) -> u32 {
        self.engine.ledger().delta
    }

    /// Vertices on the sphere of the full radius, in id order.
    pub fn rim(&self) -> Vec<VertexId> {
        let r = self.engine.ball().radius;
        self.engine.graph().vertices().filter(|v| self.base_row[v.index()] == r).collect()
    }

    pub fn point(&self, rim: VertexId) -> Result<PseudoBoundaryPoint> {
        if self.base_row[rim.index()] < self.trust() {
            return Err(Error::Precondition(format!(
                "`{}` lies inside the trust radius",
                self.engine.graph().vertex_name(rim)
            )));
        }
        Ok(PseudoBoundaryPoint { rim, ray: self.engine.p(self.basepoint(), rim) })
    }

    pub fn point_named(&self, name: &str) -> Result<PseudoBoundaryPoint> {
        self.point(self.engine.graph().vertex(name)?)
    }

    pub fn product(&self, xi: &PseudoBoundaryPoint, eta: &PseudoBoundaryPoint) -> GromovProduct {
        self.metric().gromov(xi.rim, eta.rim, self.basepoint())
    }

    /// Rays whose endpoints have product above `trust − 4δ` count as one point.
    pub fn same_point(&self, xi: &PseudoBoundaryPoint, eta: &PseudoBoundaryPoint) -> bool {
        xi.rim == eta.rim
            || self.product(xi, eta).twice as i64 > 2 * (self.trust() as i64 - 4 * self.delta() as i64)
    }

    /// Distinct points whose product stays below `trust/2`.
    pub fn diverge(&self, xi: &PseudoBoundaryPoint, eta: &PseudoBoundaryPoint) -> bool {
        !self.same_point(xi, eta) && self.product(xi, eta).twice < self.trust()
    }

    fn check_pair(&self, xi: &PseudoBoundaryPoint, eta: &PseudoBoundaryPoint) -> Result<()> {
        if self.product(xi, eta).twice >= self.trust() {
            let g = self.engine.graph();
            return Err(Error::RaysTooClose(g.vertex_name(xi.rim).into(), g.vertex_name(eta.rim).into()));
        }
        Ok(())
    }

    fn check_depth(&self, n: u32) -> Result<()> {
        if n == 0 || n > self.trust() {
            return Err(Error::OutOfRange(format!("depth {n} must lie in 1..={}", self.trust())));
        }
        Ok(())
    }

    /// Edges with both endpoints within `trust/2` of the basepoint.
    pub fn probe_edges(&self) -> Vec<EdgeId> {
        let g = self.engine.graph();
        let h = self.trust() / 2;
        g.edge_classes()
            .filter(|&e| self.base_row[g.src(e).index()] <= h && self.base_row[g.dst(e).index()] <= h)
            .collect()
    }

    /// `q[aₙ, bₙ]` with the per-depth differences on the probe edges. Rays
    /// that represent one point give the zero chain.
    pub fn q_ideal(&self, xi: &PseudoBoundaryPoint, eta: &PseudoBoundaryPoint, n: u32) -> Result<IdealChain> {
        self.check_depth(n)?;
        let probes = self.probe_edges();
        let (a, b) = (xi.at(n), eta.at(n));
        if self.same_point(xi, eta) {
            return Ok(IdealChain {
                depth: n,
                a,
                b,
                chain: OneChain::new(),
                cauchy: CauchyReport { probe_edges: probes.len(), steps: Vec::new(), stable_from: 1, stabilized: true },
            });
        }
        self.check_pair(xi, eta)?;
        let g = self.engine.graph();
        let mut steps = Vec::new();
        let mut prev: Option<OneChain> = None;
        let mut stable_from = 1;
        let mut chain = OneChain::new();
        for k in 1..=n {
            chain = self.engine.q(xi.at(k), eta.at(k))?;
            if let Some(p) = &prev {
                let mut changed = 0;
                let mut max = Rational::zero();
                for &e in &probes {
                    let d = (chain.get(g, e) - p.get(g, e)).abs();
                    if !d.is_zero() {
                        changed += 1;
                        max = max.max(d);
                    }
                }
                if changed > 0 {
                    stable_from = k;
                }
                steps.push(DepthStep { depth: k, changed_probes: changed, max_difference: format_rational(&max) });
            }
            prev = Some(chain.clone());
        }
        let stabilized = stable_from < n;
        Ok(IdealChain {
            depth: n,
            a,
            b,
            chain,
            cauchy: CauchyReport { probe_edges: probes.len(), steps, stable_from, stabilized },
        })
    }

    /// The cone `{x : (x|ξ)_{x₀} > r}` with `r = r_twice / 2`.
    pub fn cone(&self, xi: &PseudoBoundaryPoint, r_twice: u32) -> GraphNeighbourhood {
        let g = self.engine.graph();
        let m = self.metric();
        let x0 = self.basepoint();
        let inside: Vec<bool> = g.vertices().map(|v| m.gromov(v, xi.rim, x0).twice > r_twice).collect();
        let edges = g
            .edge_classes()
            .filter(|&e| inside[g.src(e).index()] && inside[g.dst(e).index()])
            .collect();
        GraphNeighbourhood { rim: xi.rim, r_twice, edges }
    }

    /// The cone with the default parameter `r = trust/2`.
    pub fn default_cone(&self, xi: &PseudoBoundaryPoint) -> GraphNeighbourhood {
        self.cone(xi, self.trust())
    }

    /// The cycle condition away from the ray endpoints, and the flux `∓1` of
    /// `q` through the cones `V₊ ∋ η` and `V₋ ∋ ξ`.
    pub fn check_ideal_conditions(
        &self,
        xi: &PseudoBoundaryPoint,
        eta: &PseudoBoundaryPoint,
        n: u32,
        v_plus: &GraphNeighbourhood,
        v_minus: &GraphNeighbourhood,
    ) -> Result<IdealConditionsReport> {
        if let Some(e) = v_plus.edges.intersection(&v_minus.edges).next() {
            return Err(Error::Precondition(format!(
                "neighbourhoods share edge `{}`",
                self.engine.graph().edge_name(*e)
            )));
        }
        for v in [v_plus, v_minus] {
            if 2 * n <= v.r_twice + 2 {
                return Err(Error::Precondition(format!(
                    "depth {n} does not reach past the cone parameter {}",
                    GromovProduct { twice: v.r_twice }
                )));
            }
        }
        if self.same_point(xi, eta) {
            return Err(Error::Precondition("the rays represent one point".into()));
        }
        let ideal = self.q_ideal(xi, eta, n)?;
        let g = self.engine.graph();
        let (a, b) = (ideal.a, ideal.b);
        let bd = ideal.chain.boundary(g)?;
        let interior_nonzero = bd.iter().filter(|&(v, _)| v != a && v != b).count();
        let cycle_ok = interior_nonzero == 0 && bd == ZeroChain::difference(b, a);
        let plus = self.side(&ideal.chain, v_plus, b, -1)?;
        let minus = self.side(&ideal.chain, v_minus, a, 1)?;
        let ok = cycle_ok && plus.ok && minus.ok;
        Ok(IdealConditionsReport { depth: n, interior_nonzero, cycle_ok, plus, minus, ok })
    }

    fn side(&self, q: &OneChain, v: &GraphNeighbourhood, endpoint: VertexId, expected: i64) -> Result<SideReport> {
        let g = self.engine.graph();
        let restricted = q.restrict(|e| v.edges.contains(&e));
        let bd = restricted.boundary(g)?;
        let cut: BTreeSet<VertexId> = v
            .edges
            .iter()
            .flat_map(|&e| [g.src(e), g.dst(e)])
            .filter(|&x| g.out_edges(x).iter().any(|&f| !v.edges.contains(&g.canonical(f).0)))
            .collect();
        let mut sum = Rational::zero();
        let mut support = 0;
        let mut support_in_cut = true;
        for (x, c) in bd.iter() {
            if x == endpoint {
                continue;
            }
            sum += c;
            support += 1;
            support_in_cut &= cut.contains(&x);
        }
        let ok = sum == integer(expected) && support_in_cut;
        Ok(SideReport { sum: format_rational(&sum), expected, support, support_in_cut, ok })
    }

    /// First edge of `B̄(x, D)` with nonzero coefficient, scanning by
    /// distance from `x` and then by edge id.
    pub fn nonzero_edge_search(&self, ideal: &IdealChain, x: VertexId, d: u32) -> Option<NonzeroEdge> {
        let g = self.engine.graph();
        let row = self.metric().row(x);
        let mut found: Option<(u32, EdgeId, Rational)> = None;
        for (e, c) in ideal.chain.iter() {
            let dist = row[g.src(e).index()].max(row[g.dst(e).index()]);
            if dist > d || c.is_zero() {
                continue;
            }
            if found.as_ref().map_or(true, |(fd, fe, _)| (dist, e) < (*fd, *fe)) {
                found = Some((dist, e, c.clone()));
            }
        }
        found.map(|(distance, e, c)| NonzeroEdge {
            edge: g.edge_name(e).into(),
            coefficient: format_rational(&c),
            distance,
        })
    }

    /// Seeded pairs of diverging rays.
    pub fn sample_diverging_pairs(&self, count: usize, seed: u64) -> Result<Vec<(PseudoBoundaryPoint, PseudoBoundaryPoint)>> {
        let points = self.sample_points(count, seed, 2)?;
        Ok(points.into_iter().map(|mut p| (p.remove(0), p.remove(0))).collect())
    }

    /// Seeded tuples of pairwise diverging rays.
    pub fn sample_points(&self, count: usize, seed: u64, arity: usize) -> Result<Vec<Vec<PseudoBoundaryPoint>>> {
        let rim = self.rim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count {
            attempts += 1;
            if attempts > 10_000 * count.max(1) {
                return Err(Error::Precondition(format!(
                    "no {arity} pairwise diverging rays found on the rim"
                )));
            }
            let pick: Vec<PseudoBoundaryPoint> = rim
                .choose_multiple(&mut rng, arity)
                .map(|&v| self.point(v))
                .collect::<Result<_>>()?;
            let ok = (0..arity).all(|i| (i + 1..arity).all(|j| self.diverge(&pick[i], &pick[j])));
            if ok && pick.len() == arity {
                out.push(pick);
            }
        }
        Ok(out)
    }

    /// `δ'` of two pairs for the visual quasi-metric `σ^{(·|·)_{x₀}}`.
    pub fn cross_ratio_delta_prime(
        &self,
        pair_a: (&PseudoBoundaryPoint, &PseudoBoundaryPoint),
        pair_b: (&PseudoBoundaryPoint, &PseudoBoundaryPoint),
        sigma: f64,
    ) -> Result<f64> {
        for (p, q) in [pair_a, pair_b] {
            if self.same_point(p, q) {
                return Err(Error::Precondition("a pair repeats a boundary point".into()));
            }
        }
        let (x1, x2) = pair_a;
        let (y1, y2) = pair_b;
        let shared = [(x1, y1), (x1, y2), (x2, y1), (x2, y2)].iter().any(|(p, q)| self.same_point(p, q));
        cross_ratio(self.metric(), [x1.rim, x2.rim], [y1.rim, y2.rim], self.basepoint(), sigma, shared)
    }
}

/// `|ln[(ρ(ξ₁,η₁)ρ(ξ₂,η₂)) / (ρ(ξ₁,η₂)ρ(ξ₂,η₁))]|⁻¹` with `ρ = σ^{(·|·)_{x₀}}`;
/// zero when the pairs share a point and infinite when the logarithm vanishes.
pub fn cross_ratio(
    m: &Metric,
    xs: [VertexId; 2],
    ys: [VertexId; 2],
    x0: VertexId,
    sigma: f64,
    shared: bool,
) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::OutOfRange(format!("decay base {sigma} must lie in (0,1)")));
    }
    if shared {
        return Ok(0.0);
    }
    let g = |x, y| m.gromov(x, y, x0).twice as i64;
    let twice = g(xs[0], ys[0]) + g(xs[1], ys[1]) - g(xs[0], ys[1]) - g(xs[1], ys[0]);
    if twice == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (sigma.ln().abs() * twice.abs() as f64 / 2.0))
}

/// Every coefficient is `±1`, as for a geodesic in a tree.
pub fn is_unit_chain(c: &OneChain) -> bool {
    c.iter().all(|(_, v)| v.is_one() || (-v.clone()).is_one())
}
