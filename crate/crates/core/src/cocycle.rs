//! The doubled cocycle `ω(ξ,η,ζ) = α(ξ,η) + α(η,ζ) + α(ζ,ξ)` on ordered edge
//! pairs, where `α(ξ,η)(e,e') = ⟨q[ξ,η],e⟩⟨q[ξ,η],e'⟩` for `d(e,e') ≤ R`.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{format_rational, OneChain, Rational};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::ideal::{IdealContext, PseudoBoundaryPoint};
use crate::metric::Metric;

/// Smallest integers with `D ≥ C + 2 + 3δ`, `L > 2(C + D + δ)`, `R > 2L + 2D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CocycleParams {
    pub delta: u32,
    pub c: u32,
    pub d: u32,
    pub l: u32,
    pub r: u32,
    /// Largest number of geometric edges in a ball of radius `R + 1`.
    pub m: u64,
}

impl CocycleParams {
    pub fn minimal(delta: u32, g: &Graph) -> Self {
        let c = 27 * delta;
        let d = c + 2 + 3 * delta;
        let l = 2 * (c + d + delta) + 1;
        let r = 2 * l + 2 * d + 1;
        CocycleParams { delta, c, d, l, r, m: max_edges_in_balls(g, r + 1) }
    }

    pub fn is_admissible(&self) -> bool {
        self.c == 27 * self.delta
            && self.d >= self.c + 2 + 3 * self.delta
            && self.l > 2 * (self.c + self.d + self.delta)
            && self.r > 2 * self.l + 2 * self.d
    }
}

/// Edges with both endpoints within `radius` of the centre, maximized over centres.
fn max_edges_in_balls(g: &Graph, radius: u32) -> u64 {
    let Some(v0) = g.vertices().next() else { return 0 };
    let ecc = g.distances_from(v0).into_iter().max().unwrap_or(0);
    if radius >= 2 * ecc {
        return g.geometric_edge_count() as u64;
    }
    g.vertices()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&v| {
            let d = g.distances_from(v);
            g.edge_classes()
                .filter(|&e| d[g.src(e).index()] <= radius && d[g.dst(e).index()] <= radius)
                .count() as u64
        })
        .max()
        .unwrap_or(0)
}

/// Sparse function on ordered pairs of edges, stored on orientation classes:
/// reversing either edge negates the value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DoubleChain {
    coeffs: BTreeMap<(EdgeId, EdgeId), Rational>,
}

impl DoubleChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, g: &Graph, e: EdgeId, f: EdgeId, c: &Rational) {
        let ((e, se), (f, sf)) = (g.canonical(e), g.canonical(f));
        let c = if se * sf < 0 { -c } else { c.clone() };
        let slot = self.coeffs.entry((e, f)).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(&(e, f));
        }
    }

    pub fn get(&self, g: &Graph, e: EdgeId, f: EdgeId) -> Rational {
        let ((e, se), (f, sf)) = (g.canonical(e), g.canonical(f));
        let v = self.coeffs.get(&(e, f)).cloned().unwrap_or_else(Rational::zero);
        if se * sf < 0 {
            -v
        } else {
            v
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((EdgeId, EdgeId), &Rational)> {
        self.coeffs.iter().map(|(&k, v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn l1(&self) -> Rational {
        self.coeffs.values().map(|c| c.abs()).sum()
    }

    pub fn add_chain(&mut self, g: &Graph, other: &DoubleChain) {
        for ((e, f), c) in other.iter() {
            self.add(g, e, f, c);
        }
    }

    pub fn neg(&self) -> DoubleChain {
        DoubleChain { coeffs: self.coeffs.iter().map(|(&k, v)| (k, -v)).collect() }
    }

    pub fn is_symmetric(&self) -> bool {
        self.coeffs.iter().all(|(&(e, f), v)| self.coeffs.get(&(f, e)) == Some(v))
    }
}

/// `α` from the chain `q[ξ,η]`.
pub fn alpha_of_chain(m: &Metric, q: &OneChain, r: u32) -> DoubleChain {
    let g = m.graph();
    let support: Vec<(EdgeId, &Rational)> = q.iter().collect();
    let mut out = DoubleChain::new();
    for &(e, ce) in &support {
        for &(f, cf) in &support {
            if m.edge_distance(e, f) <= r {
                out.add(g, e, f, &(ce * cf));
            }
        }
    }
    out
}

/// Rays together with the depth at which `q` between them is evaluated.
pub struct Cocycle<'a> {
    pub ctx: &'a IdealContext<'a>,
    pub params: CocycleParams,
    pub depth: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub e: String,
    pub e2: String,
    pub value: String,
    /// Index on `p[aₙ,bₙ]` of the point nearest both other sides.
    pub center: u32,
    pub anchor_plus: String,
    pub anchor_minus: String,
    /// Anchors `γ(t ± L)` fell outside the truncated geodesic and were moved to its ends.
    pub clamped: bool,
    /// The witness came from a scan of the support of `ω` rather than the anchored search.
    pub from_support_scan: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TripleReport {
    pub rays: [String; 3],
    pub l1_norm: String,
    pub l1_f64: f64,
    pub support: usize,
    pub witness: Option<Witness>,
    /// `ω(η,ξ,ζ) = −ω(ξ,η,ζ)` exactly.
    pub alternating: bool,
    /// `ω(η,ξ,ζ) = ω(ξ,η,ζ)` exactly.
    pub transposition_invariant: bool,
    pub cyclic_invariant: bool,
    pub max_q_coefficient: String,
    pub area: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct L1BoundReport {
    pub triples: usize,
    pub sup_l1: String,
    pub sup_l1_f64: f64,
    pub max_q_coefficient: String,
    pub max_area: String,
    pub m: u64,
    /// `2·M·max|q|·max area`.
    pub area_style_bound: String,
    pub witnesses_found: usize,
    pub alternating: usize,
}

impl<'a> Cocycle<'a> {
    pub fn new(ctx: &'a IdealContext<'a>) -> Self {
        let eng = ctx.engine;
        let params = CocycleParams::minimal(eng.ledger().delta, eng.graph());
        Cocycle { ctx, params, depth: ctx.trust() }
    }

    fn g(&self) -> &Graph {
        self.ctx.engine.graph()
    }

    fn q(&self, x: &PseudoBoundaryPoint, y: &PseudoBoundaryPoint) -> Result<OneChain> {
        Ok(self.ctx.q_ideal(x, y, self.depth)?.chain)
    }

    pub fn alpha(&self, xi: &PseudoBoundaryPoint, eta: &PseudoBoundaryPoint) -> Result<DoubleChain> {
        if xi.rim == eta.rim {
            return Err(Error::Precondition("coincident rays".into()));
        }
        Ok(alpha_of_chain(self.ctx.engine.metric(), &self.q(xi, eta)?, self.params.r))
    }

    /// `α(ξ,η)`, with `α(ξ,ξ) = 0` for degenerate arguments.
    fn alpha_or_zero(&self, xi: &PseudoBoundaryPoint, eta: &PseudoBoundaryPoint) -> Result<DoubleChain> {
        if xi.rim == eta.rim {
            Ok(DoubleChain::new())
        } else {
            self.alpha(xi, eta)
        }
    }

    pub fn omega(
        &self,
        xi: &PseudoBoundaryPoint,
        eta: &PseudoBoundaryPoint,
        zeta: &PseudoBoundaryPoint,
    ) -> Result<DoubleChain> {
        let g = self.g();
        let mut w = self.alpha_or_zero(xi, eta)?;
        w.add_chain(g, &self.alpha_or_zero(eta, zeta)?);
        w.add_chain(g, &self.alpha_or_zero(zeta, xi)?);
        Ok(w)
    }

    /// An edge pair where `ω(ξ,η,ζ)` reduces to the nonzero product
    /// `⟨q[ξ,η],e⟩⟨q[ξ,η],e'⟩`: `e` near `γ(t+L)`, `e'` near `γ(t−L)` on the
    /// geodesic `γ` from `aₙ` to `bₙ`, with `γ(t)` the point nearest both
    /// other sides.
    pub fn nonvanish_check(
        &self,
        xi: &PseudoBoundaryPoint,
        eta: &PseudoBoundaryPoint,
        zeta: &PseudoBoundaryPoint,
    ) -> Result<Option<Witness>> {
        let eng = self.ctx.engine;
        let g = self.g();
        let m = eng.metric();
        let n = self.depth;
        let (a, b, c) = (xi.at(n), eta.at(n), zeta.at(n));
        let gamma = eng.p(a, b);
        let sides = [eng.p(b, c), eng.p(c, a)];
        let to_side = |v: VertexId, side: &[VertexId]| side.iter().map(|&w| m.d(v, w)).min().unwrap();
        let t = (0..gamma.len())
            .min_by_key(|&i| {
                let v = gamma[i];
                (to_side(v, &sides[0]).max(to_side(v, &sides[1])), i)
            })
            .unwrap();
        let (l, last) = (self.params.l as usize, gamma.len() - 1);
        let plus = (t + l).min(last);
        let minus = t.saturating_sub(l);
        let clamped = t + l > last || t < l;

        let q_xe = self.q(xi, eta)?;
        let q_ez = self.q(eta, zeta)?;
        let q_zx = self.q(zeta, xi)?;
        let omega = self.omega(xi, eta, zeta)?;
        let d = self.params.d;
        let near = |anchor: VertexId, other: &OneChain| -> Vec<EdgeId> {
            let row = m.row(anchor);
            let mut es: Vec<(u32, EdgeId)> = q_xe
                .iter()
                .filter(|(e, _)| other.get(g, *e).is_zero())
                .map(|(e, _)| (row[g.src(e).index()].max(row[g.dst(e).index()]), e))
                .filter(|&(dist, _)| dist <= d)
                .collect();
            es.sort();
            es.into_iter().map(|(_, e)| e).collect()
        };
        let es = near(gamma[plus], &q_zx);
        let fs = near(gamma[minus], &q_ez);
        let name = |v: VertexId| g.vertex_name(v).to_string();
        let found = es
            .iter()
            .flat_map(|&e| fs.iter().map(move |&f| (e, f)))
            .find(|&(e, f)| m.edge_distance(e, f) <= self.params.r && !omega.get(g, e, f).is_zero());
        let (pair, from_support_scan) = match found {
            Some(p) => (Some(p), false),
            None => (omega.iter().find(|(_, v)| !v.is_zero()).map(|(k, _)| k), true),
        };
        Ok(pair.map(|(e, f)| Witness {
            e: g.edge_name(e).into(),
            e2: g.edge_name(f).into(),
            value: format_rational(&omega.get(g, e, f)),
            center: t as u32,
            anchor_plus: name(gamma[plus]),
            anchor_minus: name(gamma[minus]),
            clamped,
            from_support_scan,
        }))
    }

    pub fn triple_report(
        &self,
        xi: &PseudoBoundaryPoint,
        eta: &PseudoBoundaryPoint,
        zeta: &PseudoBoundaryPoint,
    ) -> Result<TripleReport> {
        let g = self.g();
        let w = self.omega(xi, eta, zeta)?;
        let swapped = self.omega(eta, xi, zeta)?;
        let rotated = self.omega(eta, zeta, xi)?;
        let n = self.depth;
        let qs = [self.q(xi, eta)?, self.q(eta, zeta)?, self.q(zeta, xi)?];
        let max_q = qs.iter().map(|q| q.linf()).max().unwrap();
        let area = self.ctx.engine.area(xi.at(n), eta.at(n), zeta.at(n))?;
        let l1 = w.l1();
        Ok(TripleReport {
            rays: [xi.rim, eta.rim, zeta.rim].map(|v| g.vertex_name(v).to_string()),
            l1_f64: crate::chain::to_f64(&l1),
            l1_norm: format_rational(&l1),
            support: w.len(),
            witness: self.nonvanish_check(xi, eta, zeta)?,
            alternating: swapped == w.neg(),
            transposition_invariant: swapped == w,
            cyclic_invariant: rotated == w,
            max_q_coefficient: format_rational(&max_q),
            area: format_rational(&area),
        })
    }

    /// Per-triple reports and the supremum of `‖ω‖₁` over the sample.
    pub fn l1_bound_report(&self, triples: &[Vec<PseudoBoundaryPoint>]) -> Result<(L1BoundReport, Vec<TripleReport>)> {
        let reports: Vec<TripleReport> = triples
            .par_iter()
            .map(|t| self.triple_report(&t[0], &t[1], &t[2]))
            .collect::<Result<_>>()?;
        let parse = |s: &str| -> Rational { s.parse().expect("formatted rational") };
        let sup = reports.iter().map(|r| parse(&r.l1_norm)).max().unwrap_or_else(Rational::zero);
        let max_q = reports.iter().map(|r| parse(&r.max_q_coefficient)).max().unwrap_or_else(Rational::zero);
        let max_area = reports.iter().map(|r| parse(&r.area)).max().unwrap_or_else(Rational::zero);
        let bound = Rational::from_integer((2 * self.params.m).into()) * &max_q * &max_area;
        let summary = L1BoundReport {
            triples: reports.len(),
            sup_l1_f64: crate::chain::to_f64(&sup),
            sup_l1: format_rational(&sup),
            max_q_coefficient: format_rational(&max_q),
            max_area: format_rational(&max_area),
            m: self.params.m,
            area_style_bound: format_rational(&bound),
            witnesses_found: reports.iter().filter(|r| r.witness.is_some()).count(),
            alternating: reports.iter().filter(|r| r.alternating).count(),
        };
        Ok((summary, reports))
    }
}
