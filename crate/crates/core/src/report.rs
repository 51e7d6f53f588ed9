//! Whole-ball verification runs and area sweeps, with deterministic output.

use num_traits::One;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bicombing::{BicombingEngine, ConstantsLedger, ScanReport};
use crate::chain::{format_rational, path_chain, to_f64, Rational};
use crate::error::{Error, Result};
use crate::generators::TruncatedBall;
use crate::graph::VertexId;
use crate::hyperbolicity::{fine_delta_with, DeltaMode, DeltaReport, DEFAULT_EXACT_BUDGET};
use crate::metric::Metric;

/// Exact δ when the ball is small enough, otherwise the seeded sampled scan.
pub fn estimate_delta(m: &Metric, ball: &TruncatedBall, samples: u64, seed: u64) -> Result<DeltaReport> {
    match fine_delta_with(m, ball, DeltaMode::Exact, samples, seed, DEFAULT_EXACT_BUDGET) {
        Err(Error::Budget(_)) => fine_delta_with(m, ball, DeltaMode::Sampled, samples, seed, DEFAULT_EXACT_BUDGET),
        other => other,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeCheck {
    /// Pairs where `q'[a,b]` differs from the geodesic chain.
    pub geodesic_mismatches: u64,
    pub max_coefficient_is_one: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyAllReport {
    pub vertices: usize,
    pub inner_vertices: usize,
    pub trust_radius: u32,
    pub ledger: ConstantsLedger,
    pub scan: ScanReport,
    pub tree: Option<TreeCheck>,
    pub violations: u64,
}

/// Every ordered pair of inner vertices: the boundary identity, the ℓ¹ and
/// support bounds, the coefficient bound, and on trees the geodesic oracle.
pub fn verify_all(eng: &BicombingEngine) -> Result<VerifyAllReport> {
    let g = eng.graph();
    let inner = eng.inner_vertices();
    let is_tree = g.geometric_edge_count() + 1 == g.vertex_count();
    let (scan, mismatches) = if is_tree {
        eng.scan_pairs_with(&inner, &inner, |dag, q| path_chain(g, &dag.first_path(g)).is_ok_and(|p| p == *q))?
    } else {
        (eng.scan_pairs(&inner, &inner)?, 0)
    };
    let tree = if is_tree {
        let one = inner.len() < 2 || scan.max_coefficient.is_one();
        Some(TreeCheck { geodesic_mismatches: mismatches, max_coefficient_is_one: one })
    } else {
        None
    };
    let tree_violations = tree
        .as_ref()
        .map_or(0, |t| t.geodesic_mismatches + !t.max_coefficient_is_one as u64);
    Ok(VerifyAllReport {
        vertices: g.vertex_count(),
        inner_vertices: inner.len(),
        trust_radius: eng.ball().trust_radius,
        ledger: *eng.ledger(),
        violations: scan.violations() + tree_violations,
        scan,
        tree,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AreaSweep {
    pub samples: u64,
    pub seed: u64,
    pub trust_radius: u32,
    pub sup_area: String,
    pub sup_area_f64: f64,
    pub mean_area: f64,
    pub worst_triple: [String; 3],
}

/// `area(a,b,c)` over seeded random triples of inner vertices.
pub fn area_sweep(eng: &BicombingEngine, samples: u64, seed: u64) -> Result<AreaSweep> {
    let inner = eng.inner_vertices();
    let areas: Vec<(Rational, [VertexId; 3])> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let t = [0; 3].map(|_| *inner.choose(&mut rng).expect("inner vertices"));
            Ok((eng.area(t[0], t[1], t[2])?, t))
        })
        .collect::<Result<_>>()?;
    let g = eng.graph();
    let mut worst = 0;
    for (i, (a, _)) in areas.iter().enumerate() {
        if *a > areas[worst].0 {
            worst = i;
        }
    }
    let (sup, t) = areas.get(worst).cloned().unwrap_or_else(|| (Rational::from_integer(0.into()), [eng.ball().basepoint; 3]));
    let mean = if areas.is_empty() { 0.0 } else { areas.iter().map(|(a, _)| to_f64(a)).sum::<f64>() / areas.len() as f64 };
    Ok(AreaSweep {
        samples,
        seed,
        trust_radius: eng.ball().trust_radius,
        sup_area_f64: to_f64(&sup),
        sup_area: format_rational(&sup),
        mean_area: mean,
        worst_triple: t.map(|v| g.vertex_name(v).to_string()),
    })
}

/// `|s₂ − s₁| / s₁`, zero when both vanish.
pub fn relative_change(first: &AreaSweep, second: &AreaSweep) -> f64 {
    let (a, b) = (first.sup_area_f64, second.sup_area_f64);
    if a == 0.0 {
        if b == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (b - a).abs() / a
    }
}
