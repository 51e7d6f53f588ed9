//! Exponential decay estimates, measured on seeded samples and certified as
//! envelopes with zero violations on the sample.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bicombing::BicombingEngine;
use crate::chain::{format_rational, to_f64, OneChain, Rational};
use crate::error::Result;
use crate::graph::{EdgeId, VertexId};

/// Relative slack tolerated when checking `lhs ≤ bound` in floating point.
pub const RELATIVE_TOLERANCE: f64 = 1e-12;

/// Fallback grid for the decay base.
const GRID: std::ops::RangeInclusive<u32> = 1..=99;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FitMethod {
    #[serde(rename = "least-squares")]
    LeastSquares,
    #[serde(rename = "grid")]
    Grid,
    #[serde(rename = "degenerate")]
    Degenerate,
}

/// A certified envelope `lhs ≤ scale · Σ_k base^{x_k}`.
#[derive(Clone, Debug, Serialize)]
pub struct Envelope {
    pub base: f64,
    pub scale: f64,
    pub method: FitMethod,
    pub ls_slope: Option<f64>,
    pub samples: usize,
    pub nonzero: usize,
    pub decay_evidence: bool,
    pub violations: usize,
    /// `max(lhs − bound)`; nonpositive on a certified sample.
    pub max_residual: f64,
    pub passed: bool,
    pub note: Option<String>,
}

/// One sample for envelope certification.
#[derive(Clone, Debug)]
pub struct EnvelopePoint {
    /// Abscissa for the log-linear regression.
    pub reg: f64,
    pub lhs: f64,
    /// Exponents of the basis terms `base^{x_k}`.
    pub exps: Vec<f64>,
}

impl EnvelopePoint {
    pub fn single(x: f64, lhs: f64) -> Self {
        EnvelopePoint { reg: x, lhs, exps: vec![x] }
    }

    fn basis(&self, base: f64) -> f64 {
        self.exps.iter().map(|&x| base.powf(x)).sum()
    }
}

/// Least-squares slope of `(x, y)`, if at least two distinct abscissae occur.
pub fn ls_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn scale_for(points: &[EnvelopePoint], base: f64) -> f64 {
    points
        .iter()
        .filter(|p| p.lhs > 0.0)
        .map(|p| p.lhs / p.basis(base))
        .fold(0.0, f64::max)
}

/// Fit the base by least squares on `ln lhs` over the nonzero samples, fall
/// back to the grid base of least envelope area, then inflate the scale to
/// cover every sample.
pub fn certify_envelope(points: &[EnvelopePoint]) -> Envelope {
    let nonzero: Vec<&EnvelopePoint> = points.iter().filter(|p| p.lhs > 0.0).collect();
    if nonzero.is_empty() {
        return Envelope {
            base: 0.0,
            scale: 0.0,
            method: FitMethod::Degenerate,
            ls_slope: None,
            samples: points.len(),
            nonzero: 0,
            decay_evidence: true,
            violations: 0,
            max_residual: 0.0,
            passed: true,
            note: Some("all left-hand sides vanish".into()),
        };
    }
    let logs: Vec<(f64, f64)> = nonzero.iter().map(|p| (p.reg, p.lhs.ln())).collect();
    let slope = ls_slope(&logs);
    let (base, method) = match slope {
        Some(s) if s < 0.0 && s.exp() > 0.0 => (s.exp(), FitMethod::LeastSquares),
        _ => {
            let mut best = (f64::INFINITY, 0.5);
            for k in GRID {
                let b = k as f64 / 100.0;
                let s = scale_for(points, b);
                let area: f64 = points.iter().map(|p| s * p.basis(b)).sum();
                if area < best.0 {
                    best = (area, b);
                }
            }
            (best.1, FitMethod::Grid)
        }
    };
    let scale = scale_for(points, base);
    let last_nonzero = nonzero.iter().map(|p| p.reg).fold(f64::NEG_INFINITY, f64::max);
    let beyond: Vec<&EnvelopePoint> = points.iter().filter(|p| p.reg > last_nonzero).collect();
    let vanishing_tail = !beyond.is_empty() && beyond.iter().all(|p| p.lhs == 0.0);
    let decay_evidence = slope.is_some_and(|s| s < 0.0) || vanishing_tail;
    let mut violations = 0;
    let mut max_residual = f64::NEG_INFINITY;
    for p in points {
        let bound = scale * p.basis(base);
        if p.lhs > bound * (1.0 + RELATIVE_TOLERANCE) {
            violations += 1;
        }
        max_residual = max_residual.max(p.lhs - bound);
    }
    let passed = base < 1.0 && decay_evidence && violations == 0;
    let note = (!decay_evidence).then(|| "no decay observed on the sample".to_string());
    Envelope {
        base,
        scale,
        method,
        ls_slope: slope,
        samples: points.len(),
        nonzero: nonzero.len(),
        decay_evidence,
        violations,
        max_residual,
        passed,
        note,
    }
}

/// One raw evaluated tuple, as written to the CSV export.
#[derive(Clone, Debug, Serialize)]
pub struct RawRow {
    pub fit: &'static str,
    pub a: String,
    pub a2: String,
    pub b: String,
    pub b2: String,
    pub e: String,
    pub x: f64,
    pub y: f64,
    pub lhs: String,
    pub lhs_f64: f64,
}

pub fn raw_csv(rows: &[RawRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

/// Random choices for the samplers, one independent stream per sample index.
struct Sampler<'a> {
    eng: &'a BicombingEngine,
    inner: Vec<VertexId>,
    inner_edges: Vec<EdgeId>,
}

impl<'a> Sampler<'a> {
    fn new(eng: &'a BicombingEngine) -> Self {
        let g = eng.graph();
        let inner = eng.inner_vertices();
        let inner_edges = g
            .edges()
            .filter(|&e| eng.is_inner(g.src(e)) && eng.is_inner(g.dst(e)))
            .collect();
        Sampler { eng, inner, inner_edges }
    }

    fn rng(seed: u64, i: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(i);
        r
    }

    fn vertex(&self, rng: &mut ChaCha8Rng) -> VertexId {
        *self.inner.choose(rng).expect("ball has inner vertices")
    }

    fn neighbor(&self, v: VertexId, rng: &mut ChaCha8Rng) -> VertexId {
        let nbrs: Vec<VertexId> =
            self.eng.graph().neighbors(v).filter(|&w| self.eng.is_inner(w)).collect();
        nbrs.choose(rng).copied().unwrap_or(v)
    }

    fn walk(&self, v: VertexId, max_len: u32, rng: &mut ChaCha8Rng) -> VertexId {
        let len = rng.gen_range(0..=max_len);
        (0..len).fold(v, |x, _| self.neighbor(x, rng))
    }

    /// Half the time an edge from the chains' supports, otherwise a uniform
    /// inner edge; orientation uniform.
    fn edge(&self, chains: &[&OneChain], rng: &mut ChaCha8Rng) -> EdgeId {
        let g = self.eng.graph();
        let support: Vec<EdgeId> = chains
            .iter()
            .flat_map(|c| c.support())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let e = if !support.is_empty() && rng.gen_bool(0.5) {
            *support.choose(rng).unwrap()
        } else {
            *self.inner_edges.choose(rng).expect("ball has inner edges")
        };
        if rng.gen_bool(0.5) {
            g.inv(e)
        } else {
            e
        }
    }

    fn name(&self, v: VertexId) -> String {
        self.eng.graph().vertex_name(v).into()
    }

    fn edge_name(&self, e: EdgeId) -> String {
        self.eng.graph().edge_name(e).into()
    }
}

fn row(
    s: &Sampler,
    fit: &'static str,
    [a, a2, b, b2]: [VertexId; 4],
    e: Option<EdgeId>,
    x: f64,
    y: f64,
    lhs: &Rational,
) -> RawRow {
    RawRow {
        fit,
        a: s.name(a),
        a2: s.name(a2),
        b: s.name(b),
        b2: s.name(b2),
        e: e.map(|e| s.edge_name(e)).unwrap_or_default(),
        x,
        y,
        lhs: format_rational(lhs),
        lhs_f64: to_f64(lhs),
    }
}

fn collect<T: Send>(n: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeFit {
    pub envelope: Envelope,
    #[serde(skip)]
    pub raw: Vec<RawRow>,
}

/// `|⟨q'[a,b] − q'[a,b'], e⟩|`.
pub fn bb_lhs(eng: &BicombingEngine, a: VertexId, b: VertexId, b2: VertexId, e: EdgeId) -> Result<Rational> {
    let g = eng.graph();
    Ok((eng.qprime(a, b)?.get(g, e) - eng.qprime(a, b2)?.get(g, e)).abs())
}

/// `|⟨q'[a,b] − q'[a',b], e⟩|`.
pub fn aa_lhs(eng: &BicombingEngine, a: VertexId, a2: VertexId, b: VertexId, e: EdgeId) -> Result<Rational> {
    let g = eng.graph();
    Ok((eng.qprime(a, b)?.get(g, e) - eng.qprime(a2, b)?.get(g, e)).abs())
}

/// `|⟨q[a,b] − q[a',b'], e⟩|`.
pub fn main_lhs(
    eng: &BicombingEngine,
    a: VertexId,
    a2: VertexId,
    b: VertexId,
    b2: VertexId,
    e: EdgeId,
) -> Result<Rational> {
    let g = eng.graph();
    Ok((eng.q(a, b)?.get(g, e) - eng.q(a2, b2)?.get(g, e)).abs())
}

/// `‖f̄(b,a) − f̄(b,a')‖₁`.
pub fn fbar_lhs(eng: &BicombingEngine, b: VertexId, a: VertexId, a2: VertexId) -> Result<Rational> {
    Ok(eng.fbar(b, a)?.sub(&eng.fbar(b, a2)?).l1())
}

/// Samples `(a, b, b', e)` with `d(b,b') ≤ 1`; envelope in `d(e₋, b)`.
pub fn fit_bb(eng: &BicombingEngine, samples: u64, seed: u64) -> Result<EnvelopeFit> {
    let s = Sampler::new(eng);
    let g = eng.graph();
    let m = eng.metric();
    let rows = collect(samples, |i| {
        let mut rng = Sampler::rng(seed, i);
        let a = s.vertex(&mut rng);
        let b = s.vertex(&mut rng);
        let b2 = if rng.gen_bool(0.5) { s.neighbor(b, &mut rng) } else { b };
        let (c1, c2) = (eng.qprime(a, b)?, eng.qprime(a, b2)?);
        let e = s.edge(&[&c1, &c2], &mut rng);
        let lhs = (c1.get(g, e) - c2.get(g, e)).abs();
        let x = m.d(g.src(e), b) as f64;
        Ok(row(&s, "bb", [a, a, b, b2], Some(e), x, 0.0, &lhs))
    })?;
    let pts: Vec<EnvelopePoint> = rows.iter().map(|r| EnvelopePoint::single(r.x, r.lhs_f64)).collect();
    Ok(EnvelopeFit { envelope: certify_envelope(&pts), raw: rows })
}

/// Samples `(a, a', b, e)` with `d(a,a') ≤ 1`; envelope in `d(a, e₋)`.
pub fn fit_aa(eng: &BicombingEngine, samples: u64, seed: u64) -> Result<EnvelopeFit> {
    let s = Sampler::new(eng);
    let g = eng.graph();
    let m = eng.metric();
    let rows = collect(samples, |i| {
        let mut rng = Sampler::rng(seed, i);
        let a = s.vertex(&mut rng);
        let b = s.vertex(&mut rng);
        let a2 = if rng.gen_bool(0.5) { s.neighbor(a, &mut rng) } else { a };
        let (c1, c2) = (eng.qprime(a, b)?, eng.qprime(a2, b)?);
        let e = s.edge(&[&c1, &c2], &mut rng);
        let lhs = (c1.get(g, e) - c2.get(g, e)).abs();
        let x = m.d(a, g.src(e)) as f64;
        Ok(row(&s, "aa", [a, a2, b, b], Some(e), x, 0.0, &lhs))
    })?;
    let pts: Vec<EnvelopePoint> = rows.iter().map(|r| EnvelopePoint::single(r.x, r.lhs_f64)).collect();
    Ok(EnvelopeFit { envelope: certify_envelope(&pts), raw: rows })
}

/// Samples `(a, a', b, b', e)` with `a', b'` short random walks away; envelope
/// `S(σ^{(a|a')_{e₋}} + σ^{(b|b')_{e₋}})`, regressed on the smaller product.
pub fn fit_main(eng: &BicombingEngine, samples: u64, seed: u64) -> Result<EnvelopeFit> {
    let s = Sampler::new(eng);
    let g = eng.graph();
    let m = eng.metric();
    let rows = collect(samples, |i| {
        let mut rng = Sampler::rng(seed, i);
        let a = s.vertex(&mut rng);
        let b = s.vertex(&mut rng);
        let a2 = s.walk(a, 2, &mut rng);
        let b2 = s.walk(b, 2, &mut rng);
        let (c1, c2) = (eng.q(a, b)?, eng.q(a2, b2)?);
        let e = s.edge(&[&c1, &c2], &mut rng);
        let lhs = (c1.get(g, e) - c2.get(g, e)).abs();
        let x = m.gromov(a, a2, g.src(e)).as_f64();
        let y = m.gromov(b, b2, g.src(e)).as_f64();
        Ok(row(&s, "main", [a, a2, b, b2], Some(e), x, y, &lhs))
    })?;
    let pts: Vec<EnvelopePoint> = rows
        .iter()
        .map(|r| EnvelopePoint { reg: r.x.min(r.y), lhs: r.lhs_f64, exps: vec![r.x, r.y] })
        .collect();
    Ok(EnvelopeFit { envelope: certify_envelope(&pts), raw: rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct FbarFit {
    /// `(L, λ)` envelope in `(a|a')_b`.
    pub envelope: Envelope,
    /// `max ‖f̄(b,a) − f̄(b',a)‖₁ / 2` over adjacent `b, b'` meeting the hypotheses.
    pub lambda_prime: f64,
    pub lambda_prime_samples: usize,
    pub lambda_prime_below_one: bool,
    #[serde(skip)]
    pub raw: Vec<RawRow>,
}

pub fn fit_fbar_contraction(eng: &BicombingEngine, samples: u64, seed: u64) -> Result<FbarFit> {
    let s = Sampler::new(eng);
    let m = eng.metric();
    let cut = eng.ledger().fbar_cut as f64;
    let pairs = collect(samples, |i| {
        let mut rng = Sampler::rng(seed, i);
        let b = s.vertex(&mut rng);
        let a = s.vertex(&mut rng);
        let a2 = if rng.gen_bool(0.5) { s.walk(a, 4, &mut rng) } else { s.vertex(&mut rng) };
        let lhs = fbar_lhs(eng, b, a, a2)?;
        let x = m.gromov(a, a2, b).as_f64();
        let v = row(&s, "fbar", [a, a2, b, b], None, x, 0.0, &lhs);
        let b2 = s.neighbor(b, &mut rng);
        let hyp = m.gromov(a, b2, b).as_f64() <= cut && m.gromov(a, b, b2).as_f64() <= cut;
        let w = if hyp {
            let lhs = eng.fbar(b, a)?.sub(&eng.fbar(b2, a)?).l1();
            Some(row(&s, "fbar-adjacent", [a, a, b, b2], None, 0.0, 0.0, &lhs))
        } else {
            None
        };
        Ok((v, w))
    })?;
    let pts: Vec<EnvelopePoint> =
        pairs.iter().map(|(r, _)| EnvelopePoint::single(r.x, r.lhs_f64)).collect();
    let adjacent: Vec<f64> = pairs.iter().filter_map(|(_, w)| w.as_ref()).map(|r| r.lhs_f64 / 2.0).collect();
    let lambda_prime = adjacent.iter().copied().fold(0.0, f64::max);
    let mut raw: Vec<RawRow> = Vec::new();
    for (v, w) in pairs {
        raw.push(v);
        raw.extend(w);
    }
    Ok(FbarFit {
        envelope: certify_envelope(&pts),
        lambda_prime,
        lambda_prime_samples: adjacent.len(),
        lambda_prime_below_one: lambda_prime < 1.0,
        raw,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzFit {
    pub m: f64,
    pub n: f64,
    pub samples: usize,
    pub violations: usize,
    #[serde(skip)]
    pub raw: Vec<RawRow>,
}

/// `‖q'[a,b] − q'[a,c]‖₁ ≤ M·d(b,c) + N`: `M` is the least-squares slope
/// (clamped at zero) and `N` the smallest intercept covering the sample.
pub fn fit_lipschitz(eng: &BicombingEngine, samples: u64, seed: u64) -> Result<LipschitzFit> {
    let s = Sampler::new(eng);
    let m = eng.metric();
    let rows = collect(samples, |i| {
        let mut rng = Sampler::rng(seed, i);
        let a = s.vertex(&mut rng);
        let b = s.vertex(&mut rng);
        let c = if rng.gen_bool(0.5) { s.walk(b, 6, &mut rng) } else { s.vertex(&mut rng) };
        let lhs = eng.qprime(a, b)?.sub(&*eng.qprime(a, c)?).l1();
        Ok(row(&s, "lipschitz", [a, a, b, c], None, m.d(b, c) as f64, 0.0, &lhs))
    })?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.x, r.lhs_f64)).collect();
    let slope = ls_slope(&pts).unwrap_or(0.0).max(0.0);
    let n = pts.iter().map(|&(x, y)| y - slope * x).fold(0.0, f64::max);
    let violations = pts
        .iter()
        .filter(|&&(x, y)| y > (slope * x + n) * (1.0 + RELATIVE_TOLERANCE) + f64::EPSILON)
        .count();
    Ok(LipschitzFit { m: slope, n, samples: pts.len(), violations, raw: rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct PqFit {
    pub q: f64,
    pub sigma0: f64,
    pub base_fit: Envelope,
    pub samples: usize,
    pub violations: usize,
    #[serde(skip)]
    pub raw: Vec<RawRow>,
}

/// `|⟨q'[a,b] − q'[a,b'], e⟩| ≤ (d(b,b') + Q)·σ₀^{d(e₋,b) + d(e₋,b')}` for
/// `d(b,b') ≤ 56δ`.
pub fn fit_pq(eng: &BicombingEngine, samples: u64, seed: u64) -> Result<PqFit> {
    let s = Sampler::new(eng);
    let g = eng.graph();
    let m = eng.metric();
    let limit = 56 * eng.ledger().delta;
    let rows = collect(samples, |i| {
        let mut rng = Sampler::rng(seed, i);
        let a = s.vertex(&mut rng);
        let b = s.vertex(&mut rng);
        let b2 = loop {
            let c = if rng.gen_bool(0.5) { s.walk(b, 3, &mut rng) } else { s.vertex(&mut rng) };
            if m.d(b, c) <= limit {
                break c;
            }
        };
        let (c1, c2) = (eng.qprime(a, b)?, eng.qprime(a, b2)?);
        let e = s.edge(&[&c1, &c2], &mut rng);
        let lhs = (c1.get(g, e) - c2.get(g, e)).abs();
        let x = (m.d(g.src(e), b) + m.d(g.src(e), b2)) as f64;
        Ok(row(&s, "pq", [a, a, b, b2], Some(e), x, m.d(b, b2) as f64, &lhs))
    })?;
    let pts: Vec<EnvelopePoint> = rows.iter().map(|r| EnvelopePoint::single(r.x, r.lhs_f64)).collect();
    let base_fit = certify_envelope(&pts);
    let sigma0 = base_fit.base;
    let q = if base_fit.nonzero == 0 {
        0.0
    } else {
        rows.iter()
            .filter(|r| r.lhs_f64 > 0.0)
            .map(|r| r.lhs_f64 / sigma0.powf(r.x) - r.y)
            .fold(0.0, f64::max)
    };
    let violations = rows
        .iter()
        .filter(|r| r.lhs_f64 > (r.y + q) * sigma0.powf(r.x) * (1.0 + RELATIVE_TOLERANCE))
        .count();
    Ok(PqFit { q, sigma0, base_fit, samples: rows.len(), violations, raw: rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct KlaFit {
    /// `(K, λ)` envelope `K Σ_{j=d(a,e₋)−60δ}^{d(a,b)} λ^j` over the regime `d(a,b) ≥ d(a,e₋) − 60δ`.
    pub envelope: Envelope,
    /// Samples with `d(a,b) ≤ d(a,e₋) − 30δ`, where the difference must vanish exactly.
    pub vanishing_samples: usize,
    pub vanishing_violations: usize,
    #[serde(skip)]
    pub raw: Vec<RawRow>,
}

pub fn fit_kla(eng: &BicombingEngine, samples: u64, seed: u64) -> Result<KlaFit> {
    let s = Sampler::new(eng);
    let g = eng.graph();
    let m = eng.metric();
    let delta = eng.ledger().delta as i64;
    let rows = collect(samples, |i| {
        let mut rng = Sampler::rng(seed, i);
        let a = s.vertex(&mut rng);
        let a2 = s.neighbor(a, &mut rng);
        let b = s.vertex(&mut rng);
        let (c1, c2) = (eng.qprime(a, b)?, eng.qprime(a2, b)?);
        let e = s.edge(&[&c1, &c2], &mut rng);
        let lhs = (c1.get(g, e) - c2.get(g, e)).abs();
        let x = m.d(a, g.src(e)) as f64;
        Ok((row(&s, "kla", [a, a2, b, b], Some(e), x, m.d(a, b) as f64, &lhs), lhs.is_zero()))
    })?;
    let mut vanishing_samples = 0;
    let mut vanishing_violations = 0;
    let mut pts = Vec::new();
    for (r, zero) in &rows {
        let (dae, dab) = (r.x as i64, r.y as i64);
        if dab <= dae - 30 * delta {
            vanishing_samples += 1;
            vanishing_violations += !zero as usize;
        }
        if dab >= dae - 60 * delta {
            let exps = (dae - 60 * delta..=dab).map(|j| j as f64).collect();
            pts.push(EnvelopePoint { reg: r.x, lhs: r.lhs_f64, exps });
        }
    }
    Ok(KlaFit {
        envelope: certify_envelope(&pts),
        vanishing_samples,
        vanishing_violations,
        raw: rows.into_iter().map(|(r, _)| r).collect(),
    })
}

/// Every fitted constant together.
#[derive(Clone, Debug, Serialize)]
pub struct FittedConstants {
    pub seed: u64,
    pub samples: u64,
    pub fbar: FbarFit,
    pub lipschitz: LipschitzFit,
    pub pq: PqFit,
    pub bb: EnvelopeFit,
    pub kla: KlaFit,
    pub aa: EnvelopeFit,
    pub main: EnvelopeFit,
}

impl FittedConstants {
    pub fn compute(eng: &BicombingEngine, samples: u64, seed: u64) -> Result<Self> {
        Ok(FittedConstants {
            seed,
            samples,
            fbar: fit_fbar_contraction(eng, samples, seed)?,
            lipschitz: fit_lipschitz(eng, samples, seed.wrapping_add(1))?,
            pq: fit_pq(eng, samples, seed.wrapping_add(2))?,
            bb: fit_bb(eng, samples, seed.wrapping_add(3))?,
            kla: fit_kla(eng, samples, seed.wrapping_add(4))?,
            aa: fit_aa(eng, samples, seed.wrapping_add(5))?,
            main: fit_main(eng, samples, seed.wrapping_add(6))?,
        })
    }

    pub fn raw_rows(&self) -> Vec<RawRow> {
        [
            &self.fbar.raw,
            &self.lipschitz.raw,
            &self.pq.raw,
            &self.bb.raw,
            &self.kla.raw,
            &self.aa.raw,
            &self.main.raw,
        ]
        .into_iter()
        .flatten()
        .cloned()
        .collect()
    }

    /// The three envelopes of the main decay estimates all certify.
    pub fn envelopes_pass(&self) -> bool {
        self.bb.envelope.passed && self.aa.envelope.passed && self.main.envelope.passed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{free_group_ball, free_product_cyclic_ball};
    use crate::graph::tests::path_graph;
    use crate::generators::TruncatedBall;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use std::sync::Arc;

    fn line(n: usize) -> TruncatedBall {
        let g = path_graph(n);
        let base = VertexId((n / 2) as u32);
        TruncatedBall {
            graph: Arc::new(g),
            basepoint: base,
            radius: (n / 2) as u32,
            trust_radius: (n / 2 - 1) as u32,
            family: None,
            cayley: None,
        }
    }

    #[test]
    fn exponential_data_is_recovered() {
        let pts: Vec<EnvelopePoint> = (0..20)
            .map(|x| EnvelopePoint::single(x as f64, 3.0 * 0.5f64.powi(x)))
            .collect();
        let env = certify_envelope(&pts);
        assert_eq!(env.method, FitMethod::LeastSquares);
        assert!((env.base - 0.5).abs() < 1e-9);
        assert!((env.scale - 3.0).abs() < 1e-9);
        assert!(env.passed);
    }

    #[test]
    fn degenerate_and_flat_samples() {
        let zeros: Vec<_> = (0..5).map(|x| EnvelopePoint::single(x as f64, 0.0)).collect();
        let env = certify_envelope(&zeros);
        assert_eq!((env.base, env.method.clone()), (0.0, FitMethod::Degenerate));
        assert!(env.passed);

        // nonzero only at the start, vanishing afterwards: grid fallback
        let mut pts: Vec<_> = (0..2).map(|x| EnvelopePoint::single(x as f64, 1.0)).collect();
        pts.extend((2..8).map(|x| EnvelopePoint::single(x as f64, 0.0)));
        let env = certify_envelope(&pts);
        assert_eq!(env.method, FitMethod::Grid);
        assert!(env.decay_evidence && env.passed);

        // a flat nonvanishing tail is not decay
        let flat: Vec<_> = (0..8).map(|x| EnvelopePoint::single(x as f64, 1.0)).collect();
        let env = certify_envelope(&flat);
        assert!(!env.decay_evidence);
        assert!(!env.passed);
        assert_eq!(env.violations, 0);
    }

    #[test]
    fn tree_examples() {
        let eng = BicombingEngine::new(free_group_ball(2, 7).unwrap(), 1);
        let g = eng.graph();
        let v = |s: &str| g.vertex(s).unwrap();
        let e = g.edge("ab.a").unwrap();
        // b' = b
        assert!(bb_lhs(&eng, v("BB"), v("ab"), v("ab"), e).unwrap().is_zero());
        // d(b,b') = 1 with e far behind a on the geodesic
        let far = g.edge("BB.B").unwrap();
        assert!(bb_lhs(&eng, v("B"), v("aab"), v("aa"), g.inv(far)).unwrap().is_zero());
        assert!(aa_lhs(&eng, v("ab"), v("ab"), v("BA"), e).unwrap().is_zero());
        assert!(main_lhs(&eng, v("a"), v("a"), v("bb"), v("bb"), e).unwrap().is_zero());
        // (a|a')_b > 10δ: f̄ sees the same point
        let eng = BicombingEngine::new(line(40), 1);
        let g = eng.graph();
        let (b, a, a2) = (g.vertex("p20").unwrap(), g.vertex("p1").unwrap(), g.vertex("p3").unwrap());
        assert!(eng.metric().gromov(a, a2, b).as_f64() > 10.0);
        assert!(fbar_lhs(&eng, b, a, a2).unwrap().is_zero());
        assert!(fbar_lhs(&eng, b, a, a).unwrap().is_zero());
    }

    #[test]
    fn point_mass_fbar_has_no_adjacent_contraction() {
        // adjacent b, b' on a line move the point mass by one vertex
        let eng = BicombingEngine::new(line(40), 1);
        let fit = fit_fbar_contraction(&eng, 200, 5).unwrap();
        assert!(fit.lambda_prime_samples > 0);
        assert_eq!(fit.lambda_prime, 1.0);
        assert!(!fit.lambda_prime_below_one);
    }

    #[test]
    fn envelopes_on_small_balls() {
        for ball in [free_group_ball(2, 6).unwrap(), free_product_cyclic_ball(&[3, 3], 7).unwrap()] {
            let eng = BicombingEngine::new(ball, 1);
            for fit in [fit_bb(&eng, 300, 1).unwrap(), fit_aa(&eng, 300, 2).unwrap(), fit_main(&eng, 300, 3).unwrap()] {
                assert_eq!(fit.envelope.violations, 0);
                assert!(fit.envelope.passed, "{:?}", fit.envelope);
            }
            let lip = fit_lipschitz(&eng, 200, 4).unwrap();
            assert_eq!(lip.violations, 0);
            let pq = fit_pq(&eng, 200, 5).unwrap();
            assert_eq!(pq.violations, 0);
        }
    }

    #[test]
    fn kla_vanishing_regime_on_a_line() {
        let eng = BicombingEngine::new(line(81), 1);
        let fit = fit_kla(&eng, 2000, 9).unwrap();
        assert!(fit.vanishing_samples > 0);
        assert_eq!(fit.vanishing_violations, 0);
        assert_eq!(fit.envelope.violations, 0);
    }

    #[test]
    fn fits_are_reproducible() {
        let eng = BicombingEngine::new(free_product_cyclic_ball(&[3, 4], 6).unwrap(), 1);
        let a = fit_main(&eng, 150, 42).unwrap();
        let b = fit_main(&eng, 150, 42).unwrap();
        assert_eq!(raw_csv(&a.raw), raw_csv(&b.raw));
        assert!(raw_csv(&a.raw).starts_with("fit,a,a2,b,b2,e,x,y,lhs,lhs_f64\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn restricting_a_sample_never_raises_the_scale(keep in proptest::collection::vec(proptest::bool::ANY, 40)) {
            let pts: Vec<EnvelopePoint> = (0..40)
                .map(|i| EnvelopePoint::single((i % 10) as f64, ((i * 7919) % 13) as f64 * 0.9f64.powi(i % 10)))
                .collect();
            let full = certify_envelope(&pts);
            let sub: Vec<EnvelopePoint> = pts.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p.clone()).collect();
            let s = scale_for(&sub, full.base);
            prop_assert!(s <= full.scale);
            let again = certify_envelope(&pts);
            prop_assert_eq!(again.scale, full.scale);
        }
    }
}
