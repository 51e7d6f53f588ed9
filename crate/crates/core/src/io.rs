//! Line-oriented graph files.
//!
//! ```text
//! # comment
//! base <id>
//! radius <n>
//! trust <n>
//! v <id>
//! e <id> <src> <dst> <inv-id>
//! ```

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder};
use crate::generators::TruncatedBall;

pub fn parse_ball(text: &str) -> Result<TruncatedBall> {
    let mut b = GraphBuilder::new();
    let mut base: Option<(usize, String)> = None;
    let mut radius: Option<u32> = None;
    let mut trust: Option<u32> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let perr = |msg: String| Error::Parse { line, msg };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let number = |t: &str| t.parse::<u32>().map_err(|_| perr(format!("expected a nonnegative integer, got `{t}`")));
        match (toks[0], toks.len()) {
            ("base", 2) => base = Some((line, toks[1].to_string())),
            ("radius", 2) => radius = Some(number(toks[1])?),
            ("trust", 2) => trust = Some(number(toks[1])?),
            ("v", 2) => {
                b.add_vertex(toks[1]).map_err(|e| perr(e.to_string()))?;
            }
            ("e", 5) => {
                let s = b.vertex(toks[2]).map_err(|e| perr(e.to_string()))?;
                let d = b.vertex(toks[3]).map_err(|e| perr(e.to_string()))?;
                b.add_edge(toks[1], s, d, toks[4]).map_err(|e| perr(e.to_string()))?;
            }
            (kw @ ("base" | "radius" | "trust" | "v" | "e"), n) => {
                return Err(perr(format!("`{kw}` line has {} arguments", n - 1)));
            }
            (kw, _) => return Err(perr(format!("unknown directive `{kw}`"))),
        }
    }

    let missing = |what: &str| Error::Parse { line: 0, msg: format!("missing `{what}` header") };
    let (base_line, base) = base.ok_or_else(|| missing("base"))?;
    let radius = radius.ok_or_else(|| missing("radius"))?;
    let trust = trust.ok_or_else(|| missing("trust"))?;
    let basepoint = b
        .vertex(&base)
        .map_err(|e| Error::Parse { line: base_line, msg: e.to_string() })?;
    let graph = b.build()?;
    check_metadata(&graph, basepoint, radius, trust)?;
    Ok(TruncatedBall {
        graph: Arc::new(graph),
        basepoint,
        radius,
        trust_radius: trust,
        family: None,
        cayley: None,
    })
}

fn check_metadata(g: &Graph, base: crate::graph::VertexId, radius: u32, trust: u32) -> Result<()> {
    if trust == 0 || trust > radius {
        return Err(Error::Structure(format!(
            "trust radius {trust} must lie in 1..={radius}"
        )));
    }
    let d = g.distances_from(base);
    if let Some(v) = g.vertices().find(|v| d[v.index()] > radius) {
        return Err(Error::Structure(format!(
            "vertex `{}` lies outside radius {radius}",
            g.vertex_name(v)
        )));
    }
    Ok(())
}

pub fn export_ball(ball: &TruncatedBall) -> String {
    let g = &ball.graph;
    let mut out = String::new();
    writeln!(out, "base {}", g.vertex_name(ball.basepoint)).unwrap();
    writeln!(out, "radius {}", ball.radius).unwrap();
    writeln!(out, "trust {}", ball.trust_radius).unwrap();
    for v in g.vertices() {
        writeln!(out, "v {}", g.vertex_name(v)).unwrap();
    }
    for e in g.edges() {
        writeln!(
            out,
            "e {} {} {} {}",
            g.edge_name(e),
            g.vertex_name(g.src(e)),
            g.vertex_name(g.dst(e)),
            g.edge_name(g.inv(e))
        )
        .unwrap();
    }
    out
}

/// Undirected DOT rendering, one line per geometric edge.
pub fn export_dot(ball: &TruncatedBall) -> String {
    let g = &ball.graph;
    let d = g.distances_from(ball.basepoint);
    let mut out = String::from("graph ball {\n");
    for v in g.vertices() {
        let style = if v == ball.basepoint {
            ", shape=doublecircle"
        } else if d[v.index()] > ball.trust_radius {
            ", color=gray"
        } else {
            ""
        };
        writeln!(out, "  \"{}\" [dist={}{style}];", g.vertex_name(v), d[v.index()]).unwrap();
    }
    for e in g.edge_classes() {
        writeln!(
            out,
            "  \"{}\" -- \"{}\" [label=\"{}\"];",
            g.vertex_name(g.src(e)),
            g.vertex_name(g.dst(e)),
            g.edge_name(e)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{free_group_ball, free_product_cyclic_ball};

    const SQUARE: &str = "\
# the 4-cycle
base x0
radius 2
trust 2
v x0
v x1
v x2
v x3
e a x0 x1 A
e A x1 x0 a
e b x1 x2 B
e B x2 x1 b
e c x2 x3 C
e C x3 x2 c
e d x3 x0 D   # closing edge
e D x0 x3 d
";

    #[test]
    fn four_cycle_file() {
        let ball = parse_ball(SQUARE).unwrap();
        assert_eq!(ball.graph.vertex_count(), 4);
        assert_eq!(ball.graph.valency_bound(), 2);
        assert_eq!(ball.trust_radius, 2);
    }

    #[test]
    fn mismatched_inverse_is_structural() {
        let bad = SQUARE.replace("e A x1 x0 a", "e A x2 x0 a");
        assert!(matches!(parse_ball(&bad), Err(Error::Structure(_))));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = SQUARE.replace("e b x1 x2 B", "e b x1 x9 B");
        assert_eq!(
            parse_ball(&bad).unwrap_err(),
            Error::Parse { line: 11, msg: "unknown vertex `x9`".into() }
        );
        let bad = SQUARE.replace("radius 2", "radius two");
        assert!(matches!(parse_ball(&bad), Err(Error::Parse { line: 3, .. })));
        let bad = SQUARE.replace("v x3", "w x3");
        assert!(matches!(parse_ball(&bad), Err(Error::Parse { line: 8, .. })));
        let bad = SQUARE.replace("trust 2\n", "");
        assert!(matches!(parse_ball(&bad), Err(Error::Parse { line: 0, .. })));
        let bad = SQUARE.replace("radius 2", "radius 1");
        assert!(matches!(parse_ball(&bad), Err(Error::Structure(_))));
    }

    #[test]
    fn round_trip_is_identity() {
        let balls = [
            parse_ball(SQUARE).unwrap(),
            free_group_ball(2, 3).unwrap(),
            free_product_cyclic_ball(&[3, 3], 3).unwrap(),
        ];
        for ball in balls {
            let text = export_ball(&ball);
            let again = parse_ball(&text).unwrap();
            assert_eq!(export_ball(&again), text);
            assert_eq!(again.graph.vertex_count(), ball.graph.vertex_count());
            assert_eq!(again.trust_radius, ball.trust_radius);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = export_ball(&free_product_cyclic_ball(&[3, 3], 4).unwrap());
        let b = export_ball(&free_product_cyclic_ball(&[3, 3], 4).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn dot_lists_each_geometric_edge_once() {
        let ball = free_group_ball(2, 2).unwrap();
        let dot = export_dot(&ball);
        assert_eq!(dot.matches(" -- ").count(), ball.graph.geometric_edge_count());
    }
}
