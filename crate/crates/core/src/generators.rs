//! Balls in Cayley graphs of free products of cyclic groups, free groups included.
//!
//! Elements are kept in alternating normal form: a list of syllables `(factor, exponent)`
//! with consecutive factors distinct and each exponent a nonzero residue (any nonzero
//! integer for an infinite cyclic factor).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chain::{OneChain, ZeroChain};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, GraphBuilder, VertexId};

/// Largest ball the generators will build.
pub const DEFAULT_VERTEX_CAP: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Free group of the given rank, words over `a, b, …` and inverses `A, B, …`.
    Free { rank: u32 },
    /// `Z/m₁ * Z/m₂ * …`, an order of 0 standing for `Z`.
    CyclicProduct { orders: Vec<u32> },
}

impl Family {
    fn orders(&self) -> Vec<u32> {
        match self {
            Family::Free { rank } => vec![0; *rank as usize],
            Family::CyclicProduct { orders } => orders.clone(),
        }
    }

    /// Margin between radius and trust radius.  Balls around the identity are
    /// geodesically convex up to the detour a geodesic can make around the far
    /// side of one cyclic coset, which is `⌊m/2⌋ − ⌈m/4⌉` levels.
    pub fn trust_margin(&self) -> u32 {
        self.orders()
            .iter()
            .filter(|&&m| m > 0)
            .map(|&m| (m / 2).saturating_sub(m.div_ceil(4)))
            .max()
            .unwrap_or(0)
            .max(2)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Free { rank } => write!(f, "free:{rank}"),
            Family::CyclicProduct { orders } => {
                let parts: Vec<String> = orders.iter().map(u32::to_string).collect();
                write!(f, "cyclic-product:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::OutOfRange(format!("unknown family `{s}`"));
        if s == "f2" {
            return Ok(Family::Free { rank: 2 });
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "free" => {
                let rank: u32 = arg.parse().map_err(|_| bad())?;
                if !(2..=26).contains(&rank) {
                    return Err(Error::OutOfRange(format!("free rank {rank} must be in 2..=26")));
                }
                Ok(Family::Free { rank })
            }
            "cyclic-product" => {
                let orders = arg
                    .split(',')
                    .map(|t| t.trim().parse::<u32>().map_err(|_| bad()))
                    .collect::<Result<Vec<u32>>>()?;
                validate_orders(&orders)?;
                Ok(Family::CyclicProduct { orders })
            }
            _ => Err(bad()),
        }
    }
}

fn validate_orders(orders: &[u32]) -> Result<()> {
    if orders.len() > 26 {
        return Err(Error::OutOfRange("at most 26 factors".into()));
    }
    if orders.contains(&1) {
        return Err(Error::OutOfRange("cyclic factors must have order ≥ 2 (or 0 for Z)".into()));
    }
    let infinite = orders.iter().filter(|&&m| m == 0).count();
    if orders.len() < 2 && infinite == 0 {
        return Err(Error::OutOfRange(
            "need at least two factors, or one factor together with a free factor".into(),
        ));
    }
    Ok(())
}

/// A generator: `(factor, ±1)`.
pub type Generator = (usize, i64);

type Word = Vec<(usize, i64)>;

#[derive(Clone, Debug)]
struct Presentation {
    orders: Vec<u32>,
    free_style: bool,
}

impl Presentation {
    fn reduce(&self, factor: usize, exp: i64) -> i64 {
        match self.orders[factor] {
            0 => exp,
            m => exp.rem_euclid(m as i64),
        }
    }

    fn generators(&self) -> Vec<Generator> {
        let mut out = Vec::new();
        for (i, &m) in self.orders.iter().enumerate() {
            out.push((i, 1));
            if m != 2 {
                out.push((i, -1));
            }
        }
        out
    }

    fn inverse(&self, s: Generator) -> Generator {
        if self.orders[s.0] == 2 {
            s
        } else {
            (s.0, -s.1)
        }
    }

    fn right_mul(&self, w: &Word, s: Generator) -> Word {
        let mut w = w.clone();
        match w.last_mut() {
            Some(last) if last.0 == s.0 => {
                last.1 = self.reduce(s.0, last.1 + s.1);
                if last.1 == 0 {
                    w.pop();
                }
            }
            _ => w.push((s.0, self.reduce(s.0, s.1))),
        }
        w
    }

    fn left_mul(&self, s: Generator, w: &Word) -> Word {
        let mut w = w.clone();
        match w.first_mut() {
            Some(first) if first.0 == s.0 => {
                first.1 = self.reduce(s.0, first.1 + s.1);
                if first.1 == 0 {
                    w.remove(0);
                }
            }
            _ => w.insert(0, (s.0, self.reduce(s.0, s.1))),
        }
        w
    }

    fn letter(factor: usize, upper: bool) -> char {
        let c = (b'a' + factor as u8) as char;
        if upper {
            c.to_ascii_uppercase()
        } else {
            c
        }
    }

    fn gen_label(&self, s: Generator) -> String {
        Self::letter(s.0, s.1 < 0).to_string()
    }

    fn name(&self, w: &Word) -> String {
        if w.is_empty() {
            return "1".into();
        }
        let mut out = String::new();
        for &(f, e) in w {
            if self.free_style {
                let c = Self::letter(f, e < 0);
                out.extend(std::iter::repeat(c).take(e.unsigned_abs() as usize));
            } else {
                out.push(Self::letter(f, false));
                out.push_str(&e.to_string());
            }
        }
        out
    }

    /// Parse a word over the generator letters; the empty word is the identity.
    fn parse_word(&self, word: &str) -> Result<Word> {
        let mut w = Word::new();
        for c in word.chars() {
            let f = (c.to_ascii_lowercase() as u32).wrapping_sub('a' as u32) as usize;
            if !c.is_ascii_alphabetic() || f >= self.orders.len() {
                return Err(Error::OutOfRange(format!("`{c}` is not a generator letter")));
            }
            let s = (f, if c.is_ascii_uppercase() { -1 } else { 1 });
            w = self.right_mul(&w, s);
        }
        Ok(w)
    }
}

/// Group-theoretic data attached to a generated ball.
#[derive(Clone, Debug)]
pub struct CayleyData {
    pres: Presentation,
    elements: Vec<Word>,
    index: HashMap<Word, VertexId>,
}

impl CayleyData {
    pub fn generators(&self) -> Vec<Generator> {
        self.pres.generators()
    }

    pub fn generator_label(&self, s: Generator) -> String {
        self.pres.gen_label(s)
    }

    /// The vertex of the element spelled by `word`, if it lies in the ball.
    pub fn vertex_of_word(&self, word: &str) -> Result<VertexId> {
        let w = self.pres.parse_word(word)?;
        self.index
            .get(&w)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(self.pres.name(&w)))
    }

    /// Left multiplication by `s`, defined on vertices whose image stays in the ball.
    pub fn left_action(&self, g: &Graph, s: Generator) -> Automorphism {
        let vmap: Vec<Option<VertexId>> = self
            .elements
            .iter()
            .map(|w| self.index.get(&self.pres.left_mul(s, w)).copied())
            .collect();
        Automorphism::from_vertex_map(g, format!("left:{}", self.pres.gen_label(s)), vmap)
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedBall {
    pub graph: Arc<Graph>,
    pub basepoint: VertexId,
    pub radius: u32,
    pub trust_radius: u32,
    pub family: Option<Family>,
    pub cayley: Option<Arc<CayleyData>>,
}

impl TruncatedBall {
    /// Vertices within the trust radius of the basepoint, in id order.
    pub fn inner_vertices(&self) -> Vec<VertexId> {
        let d = self.graph.distances_from(self.basepoint);
        self.graph
            .vertices()
            .filter(|v| d[v.index()] <= self.trust_radius)
            .collect()
    }

    pub fn with_trust(mut self, trust: u32) -> Result<Self> {
        if trust > self.radius {
            return Err(Error::OutOfRange(format!(
                "trust radius {trust} exceeds radius {}",
                self.radius
            )));
        }
        self.trust_radius = trust;
        Ok(self)
    }

    /// Automorphisms for equivariance checks: left multiplication by each generator.
    pub fn action(&self) -> GroupAction {
        let generators = match &self.cayley {
            Some(c) => c
                .generators()
                .into_iter()
                .map(|s| c.left_action(&self.graph, s))
                .collect(),
            None => Vec::new(),
        };
        GroupAction { generators }
    }
}

/// A partially defined graph automorphism.
#[derive(Clone, Debug)]
pub struct Automorphism {
    pub label: String,
    vmap: Vec<Option<VertexId>>,
    emap: Vec<Option<EdgeId>>,
}

impl Automorphism {
    pub fn from_vertex_map(g: &Graph, label: String, vmap: Vec<Option<VertexId>>) -> Self {
        let emap = g
            .edges()
            .map(|e| match (vmap[g.src(e).index()], vmap[g.dst(e).index()]) {
                (Some(u), Some(v)) => g.edge_between(u, v),
                _ => None,
            })
            .collect();
        Automorphism { label, vmap, emap }
    }

    pub fn vertex(&self, v: VertexId) -> Option<VertexId> {
        self.vmap[v.index()]
    }

    pub fn edge(&self, e: EdgeId) -> Option<EdgeId> {
        self.emap[e.index()]
    }

    /// Image of a 0-chain, or `None` if some support vertex leaves the ball.
    pub fn map_zero_chain(&self, z: &ZeroChain) -> Option<ZeroChain> {
        let mut out = ZeroChain::new();
        for (v, c) in z.iter() {
            out.add(self.vertex(v)?, c);
        }
        Some(out)
    }

    pub fn map_one_chain(&self, g: &Graph, f: &OneChain) -> Option<OneChain> {
        let mut out = OneChain::new();
        for (e, c) in f.iter() {
            out.add(g, self.edge(e)?, c);
        }
        Some(out)
    }

    /// Adjacency and the involution are preserved wherever the map is defined.
    pub fn is_consistent(&self, g: &Graph) -> bool {
        g.edges().all(|e| match self.edge(e) {
            Some(f) => {
                self.edge(g.inv(e)) == Some(g.inv(f))
                    && self.vertex(g.src(e)) == Some(g.src(f))
                    && self.vertex(g.dst(e)) == Some(g.dst(f))
            }
            None => self.vertex(g.src(e)).is_none() || self.vertex(g.dst(e)).is_none(),
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct GroupAction {
    pub generators: Vec<Automorphism>,
}

pub fn free_group_ball(rank: u32, radius: u32) -> Result<TruncatedBall> {
    cayley_ball(Family::Free { rank }, radius, DEFAULT_VERTEX_CAP)
}

pub fn free_product_cyclic_ball(orders: &[u32], radius: u32) -> Result<TruncatedBall> {
    validate_orders(orders)?;
    cayley_ball(Family::CyclicProduct { orders: orders.to_vec() }, radius, DEFAULT_VERTEX_CAP)
}

/// The ball of the given radius around the identity, as an induced subgraph.
pub fn cayley_ball(family: Family, radius: u32, vertex_cap: usize) -> Result<TruncatedBall> {
    if radius == 0 {
        return Err(Error::OutOfRange("radius must be positive".into()));
    }
    if let Family::Free { rank } = family {
        if rank < 2 {
            return Err(Error::OutOfRange("free rank must be at least 2".into()));
        }
    }
    let pres = Presentation {
        orders: family.orders(),
        free_style: matches!(family, Family::Free { .. }),
    };
    let gens = pres.generators();

    let mut elements: Vec<Word> = vec![Word::new()];
    let mut index: HashMap<Word, VertexId> = HashMap::from([(Word::new(), VertexId(0))]);
    let mut frontier = vec![Word::new()];
    for _ in 0..radius {
        let mut next = Vec::new();
        for w in &frontier {
            for &s in &gens {
                let x = pres.right_mul(w, s);
                if !index.contains_key(&x) {
                    if elements.len() >= vertex_cap {
                        return Err(Error::Budget(format!(
                            "ball of radius {radius} in {family} exceeds {vertex_cap} vertices"
                        )));
                    }
                    index.insert(x.clone(), VertexId(elements.len() as u32));
                    elements.push(x.clone());
                    next.push(x);
                }
            }
        }
        frontier = next;
    }

    let mut b = GraphBuilder::new();
    let names: Vec<String> = elements.iter().map(|w| pres.name(w)).collect();
    for n in &names {
        b.add_vertex(n.clone())?;
    }
    for (i, w) in elements.iter().enumerate() {
        for &s in &gens {
            let x = pres.right_mul(w, s);
            if let Some(&j) = index.get(&x) {
                let t = pres.inverse(s);
                b.add_edge(
                    format!("{}.{}", names[i], pres.gen_label(s)),
                    VertexId(i as u32),
                    j,
                    format!("{}.{}", names[j.index()], pres.gen_label(t)),
                )?;
            }
        }
    }
    let graph = Arc::new(b.build()?);
    let trust_radius = radius.saturating_sub(family.trust_margin()).max(1).min(radius);
    Ok(TruncatedBall {
        graph,
        basepoint: VertexId(0),
        radius,
        trust_radius,
        family: Some(family),
        cayley: Some(Arc::new(CayleyData { pres, elements, index })),
    })
}
