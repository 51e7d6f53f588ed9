//! Finitely supported exact-rational 0-chains and 1-chains.
//!
//! A [`OneChain`] stores one coefficient per orientation class `{e, ē}` under
//! the convention `⟨f, ē⟩ = −⟨f, e⟩`, so reversing a path negates its chain
//! and the ℓ¹ norm counts every geometric edge once.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};

pub type Rational = BigRational;

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn integer(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `num/den` (or just `num` for integers), the JSON export form.
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Lossy conversion used only for reporting and fitting.
pub fn to_f64(q: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ZeroChain {
    coeffs: BTreeMap<VertexId, Rational>,
}

impl ZeroChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn point(v: VertexId) -> Self {
        let mut c = Self::new();
        c.add(v, &Rational::one());
        c
    }

    pub fn add(&mut self, v: VertexId, c: &Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(v).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(&v);
        }
    }

    pub fn get(&self, v: VertexId) -> Rational {
        self.coeffs.get(&v).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, &Rational)> {
        self.coeffs.iter().map(|(&v, c)| (v, c))
    }

    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn total(&self) -> Rational {
        self.coeffs.values().fold(Rational::zero(), |acc, c| acc + c)
    }

    pub fn l1(&self) -> Rational {
        self.coeffs.values().fold(Rational::zero(), |acc, c| acc + c.abs())
    }

    /// Nonnegative coefficients summing to one.
    pub fn is_convex_combination(&self) -> bool {
        self.coeffs.values().all(|c| c.is_positive()) && self.total().is_one()
    }

    pub fn add_scaled(&mut self, other: &ZeroChain, s: &Rational) {
        for (v, c) in other.iter() {
            self.add(v, &(c * s));
        }
    }

    pub fn sub(&self, other: &ZeroChain) -> ZeroChain {
        let mut out = self.clone();
        out.add_scaled(other, &-Rational::one());
        out
    }

    /// `b − a` as a 0-chain.
    pub fn difference(b: VertexId, a: VertexId) -> ZeroChain {
        let mut c = ZeroChain::point(b);
        c.add(a, &-Rational::one());
        c
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OneChain {
    /// Keyed by the canonical representative of each orientation class.
    coeffs: BTreeMap<EdgeId, Rational>,
}

impl OneChain {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `c` to `⟨f, e⟩` (and hence `−c` to `⟨f, ē⟩`).
    pub fn add(&mut self, g: &Graph, e: EdgeId, c: &Rational) {
        if c.is_zero() {
            return;
        }
        let (rep, sign) = g.canonical(e);
        let slot = self.coeffs.entry(rep).or_insert_with(Rational::zero);
        if sign > 0 {
            *slot += c;
        } else {
            *slot -= c;
        }
        if slot.is_zero() {
            self.coeffs.remove(&rep);
        }
    }

    /// `⟨f, e⟩` for an oriented edge.
    pub fn get(&self, g: &Graph, e: EdgeId) -> Rational {
        let (rep, sign) = g.canonical(e);
        match self.coeffs.get(&rep) {
            Some(c) if sign > 0 => c.clone(),
            Some(c) => -c.clone(),
            None => Rational::zero(),
        }
    }

    /// Canonical representatives with their coefficients.
    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, &Rational)> {
        self.coeffs.iter().map(|(&e, c)| (e, c))
    }

    pub fn support(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn l1(&self) -> Rational {
        self.coeffs.values().fold(Rational::zero(), |acc, c| acc + c.abs())
    }

    pub fn linf(&self) -> Rational {
        self.coeffs
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &OneChain, s: &Rational) {
        if s.is_zero() {
            return;
        }
        let unit = s.is_one();
        for (&e, c) in &other.coeffs {
            let slot = self.coeffs.entry(e).or_insert_with(Rational::zero);
            if unit {
                *slot += c;
            } else {
                *slot += c * s;
            }
            if slot.is_zero() {
                self.coeffs.remove(&e);
            }
        }
    }

    pub fn add_chain(&mut self, other: &OneChain) {
        self.add_scaled(other, &Rational::one());
    }

    pub fn scaled(&self, s: &Rational) -> OneChain {
        let mut out = OneChain::new();
        out.add_scaled(self, s);
        out
    }

    pub fn neg(&self) -> OneChain {
        self.scaled(&-Rational::one())
    }

    pub fn sub(&self, other: &OneChain) -> OneChain {
        let mut out = self.clone();
        out.add_scaled(other, &-Rational::one());
        out
    }

    /// Restriction to the orientation classes accepted by `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(EdgeId) -> bool) -> OneChain {
        OneChain {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(&e, _)| keep(e))
                .map(|(&e, c)| (e, c.clone()))
                .collect(),
        }
    }

    /// `∂f(v) = Σ_{e₊=v} f(e) − Σ_{e₋=v} f(e)`, with each orientation class
    /// summed once through its representative.
    pub fn boundary(&self, g: &Graph) -> Result<ZeroChain> {
        let mut out = ZeroChain::new();
        for (&e, c) in &self.coeffs {
            if !g.contains_edge(e) {
                return Err(Error::Structure(format!("edge index {} not in graph", e.0)));
            }
            out.add(g.dst(e), c);
            out.add(g.src(e), &-c.clone());
        }
        Ok(out)
    }

    /// JSON-friendly export `{edge-id: "num/den"}` keyed by representative names.
    pub fn to_named_map(&self, g: &Graph) -> BTreeMap<String, String> {
        self.coeffs
            .iter()
            .map(|(&e, c)| (g.edge_name(e).to_string(), format_rational(c)))
            .collect()
    }
}

/// 1-chain of a vertex path, `+1` on every traversed oriented edge.
pub fn path_chain(g: &Graph, path: &[VertexId]) -> Result<OneChain> {
    let mut chain = OneChain::new();
    let one = Rational::one();
    for w in path.windows(2) {
        let e = g.edge_between(w[0], w[1]).ok_or_else(|| {
            Error::NotAdjacent(g.vertex_name(w[0]).into(), g.vertex_name(w[1]).into())
        })?;
        chain.add(g, e, &one);
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{cycle_graph, path_graph};
    use proptest::prelude::*;

    #[test]
    fn boundary_of_single_edge() {
        let g = path_graph(2);
        let e = g.edge_between(VertexId(0), VertexId(1)).unwrap();
        let mut f = OneChain::new();
        f.add(&g, e, &integer(1));
        let d = f.boundary(&g).unwrap();
        assert_eq!(d.get(VertexId(1)), integer(1));
        assert_eq!(d.get(VertexId(0)), integer(-1));
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn boundary_of_path_telescopes() {
        let g = path_graph(6);
        let path: Vec<_> = (0..6).map(VertexId).collect();
        let f = path_chain(&g, &path).unwrap();
        assert_eq!(f.boundary(&g).unwrap(), ZeroChain::difference(VertexId(5), VertexId(0)));
    }

    #[test]
    fn boundary_of_cycle_vanishes() {
        let g = cycle_graph(5);
        let path: Vec<_> = (0..5).chain(0..1).map(VertexId).collect();
        let f = path_chain(&g, &path).unwrap();
        assert_eq!(f.len(), 5);
        assert!(f.boundary(&g).unwrap().is_empty());
    }

    #[test]
    fn boundary_rejects_foreign_edges() {
        let g = path_graph(2);
        let big = path_graph(5);
        let f = path_chain(&big, &[VertexId(3), VertexId(4)]).unwrap();
        assert!(matches!(f.boundary(&g), Err(Error::Structure(_))));
    }

    #[test]
    fn path_chain_edge_cases() {
        let g = path_graph(4);
        assert!(path_chain(&g, &[]).unwrap().is_zero());
        assert!(path_chain(&g, &[VertexId(2)]).unwrap().is_zero());
        let single = path_chain(&g, &[VertexId(1), VertexId(2)]).unwrap();
        let e = g.edge_between(VertexId(1), VertexId(2)).unwrap();
        assert_eq!(single.get(&g, e), integer(1));
        assert_eq!(single.get(&g, g.inv(e)), integer(-1));
        let fwd = path_chain(&g, &[VertexId(0), VertexId(1), VertexId(2)]).unwrap();
        let back = path_chain(&g, &[VertexId(2), VertexId(1), VertexId(0)]).unwrap();
        assert_eq!(back, fwd.neg());
        assert!(matches!(
            path_chain(&g, &[VertexId(0), VertexId(2)]),
            Err(Error::NotAdjacent(_, _))
        ));
    }

    #[test]
    fn norms_count_classes_once() {
        let g = cycle_graph(4);
        let mut f = OneChain::new();
        let e = g.edge_between(VertexId(0), VertexId(1)).unwrap();
        f.add(&g, e, &rational(1, 2));
        f.add(&g, g.inv(e), &rational(-1, 2));
        assert_eq!(f.get(&g, e), integer(1));
        assert_eq!(f.l1(), integer(1));
        let h = g.edge_between(VertexId(2), VertexId(3)).unwrap();
        f.add(&g, h, &rational(-3, 2));
        assert_eq!(f.l1(), rational(5, 2));
        assert_eq!(f.linf(), rational(3, 2));
    }

    #[test]
    fn named_export() {
        let g = path_graph(3);
        let mut f = path_chain(&g, &[VertexId(0), VertexId(1)]).unwrap();
        let e = g.edge_between(VertexId(1), VertexId(2)).unwrap();
        f.add(&g, e, &rational(-2, 3));
        let m = f.to_named_map(&g);
        assert_eq!(m.get("e0").map(String::as_str), Some("1"));
        assert_eq!(m.get("e1").map(String::as_str), Some("-2/3"));
    }

    fn random_chain(g: &Graph, coeffs: &[(usize, i64, i64)]) -> OneChain {
        let mut f = OneChain::new();
        for &(e, n, d) in coeffs {
            f.add(g, EdgeId((e % g.edge_count()) as u32), &rational(n, d));
        }
        f
    }

    proptest! {
        #[test]
        fn boundary_sums_to_zero(coeffs in prop::collection::vec((0usize..40, -20i64..20, 1i64..7), 0..25)) {
            let g = cycle_graph(7);
            let f = random_chain(&g, &coeffs);
            prop_assert!(f.boundary(&g).unwrap().total().is_zero());
        }

        #[test]
        fn boundary_is_linear(
            a in prop::collection::vec((0usize..40, -20i64..20, 1i64..7), 0..15),
            b in prop::collection::vec((0usize..40, -20i64..20, 1i64..7), 0..15),
            s in (-5i64..5, 1i64..4),
            t in (-5i64..5, 1i64..4),
        ) {
            let g = cycle_graph(6);
            let f = random_chain(&g, &a);
            let h = random_chain(&g, &b);
            let (s, t) = (rational(s.0, s.1), rational(t.0, t.1));
            let mut comb = f.scaled(&s);
            comb.add_scaled(&h, &t);
            let mut expect = ZeroChain::new();
            expect.add_scaled(&f.boundary(&g).unwrap(), &s);
            expect.add_scaled(&h.boundary(&g).unwrap(), &t);
            prop_assert_eq!(comb.boundary(&g).unwrap(), expect);
        }
    }
}
