use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bicomb_core::bicombing::{BicombingEngine, ConstantsLedger};
use bicomb_core::cocycle::Cocycle;
use bicomb_core::convergence::{raw_csv, FittedConstants};
use bicomb_core::generators::{cayley_ball, Family, TruncatedBall, DEFAULT_VERTEX_CAP};
use bicomb_core::hyperbolicity::{DeltaReport, DEFAULT_SAMPLES};
use bicomb_core::ideal::IdealContext;
use bicomb_core::io::{export_ball, export_dot, parse_ball};
use bicomb_core::metric::Metric;
use bicomb_core::report::{area_sweep, estimate_delta, verify_all};
use bicomb_core::Error;

const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

/// Homological bicombings on balls of hyperbolic Cayley graphs.
#[derive(Parser, Debug)]
#[command(name = "bicomb", version)]
struct Cli {
    #[command(flatten)]
    input: Input,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Serialize)]
struct Input {
    /// Group family, e.g. `free:2` or `cyclic-product:3,3`.
    #[arg(long, global = true, conflicts_with = "graph")]
    family: Option<String>,
    /// Graph file to load instead of generating a ball.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    radius: Option<u32>,
    /// Override the trust radius.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    trust: Option<u32>,
    /// Use this δ instead of computing it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    delta: Option<u32>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    samples: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
enum Command {
    /// Generate the ball and write it as a graph file.
    Gen,
    /// Compute δ.
    Delta,
    /// Evaluate `q'` and `q` between two vertices with their bounds.
    Bicomb {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Scan every ordered pair of inner vertices.
    VerifyAll,
    /// Supremum of the area over random inner triples.
    AreaSweep,
    /// Fit and certify the exponential decay envelopes.
    Decay,
    /// `q` between two rim points with the ideal-bicombing checks.
    Ideal {
        #[arg(long)]
        xi: String,
        #[arg(long)]
        eta: String,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        depth: Option<u32>,
    },
    /// The doubled cocycle on a triple of rim points.
    Cocycle {
        #[arg(long, num_args = 3, value_names = ["RIM1", "RIM2", "RIM3"])]
        triple: Vec<String>,
    },
    /// Write the ball in DOT format.
    ExportDot,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a Command,
    inputs: &'a Input,
    vertices: usize,
    radius: u32,
    trust_radius: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<&'a DeltaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ledger: Option<ConstantsLedger>,
}

enum Failure {
    Usage(String),
    Budget(String),
    Resource(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Budget(_) | Error::GeodesicCap { .. } => Failure::Budget(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Resource(e.to_string())
    }
}

type Run<T> = std::result::Result<T, Failure>;

fn load_ball(input: &Input) -> Run<TruncatedBall> {
    let ball = match (&input.family, &input.graph) {
        (_, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            parse_ball(&text)?
        }
        (family, None) => {
            let family: Family = family.as_deref().unwrap_or("free:2").parse()?;
            let radius = input.radius.unwrap_or(6);
            cayley_ball(family, radius, DEFAULT_VERTEX_CAP)?
        }
    };
    Ok(match input.trust {
        Some(t) => ball.with_trust(t)?,
        None => ball,
    })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Run<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

struct Context {
    ball: TruncatedBall,
    metric: Arc<Metric>,
    delta: Option<DeltaReport>,
}

impl Context {
    fn delta(&mut self, input: &Input) -> Run<u32> {
        if let Some(d) = input.delta {
            return Ok(d);
        }
        if self.delta.is_none() {
            let samples = input.samples.unwrap_or(DEFAULT_SAMPLES);
            self.delta = Some(estimate_delta(&self.metric, &self.ball, samples, input.seed)?);
        }
        Ok(self.delta.as_ref().unwrap().delta)
    }

    fn engine(&mut self, input: &Input) -> Run<BicombingEngine> {
        let d = self.delta(input)?;
        Ok(BicombingEngine::with_metric(self.ball.clone(), d, Arc::clone(&self.metric)))
    }
}

/// Runs the command, writes its artifacts, and reports whether every checked invariant held.
fn run(cli: &Cli) -> Run<bool> {
    let input = &cli.input;
    let ball = load_ball(input)?;
    let metric = Arc::new(Metric::new(Arc::clone(&ball.graph)));
    let mut ctx = Context { ball, metric, delta: None };
    fs::create_dir_all(&input.out)?;
    let out = input.out.as_path();
    let mut ledger = None;

    let ok = match &cli.command {
        Command::Gen => {
            fs::write(out.join("graph.txt"), export_ball(&ctx.ball))?;
            let g = &ctx.ball.graph;
            let summary = BTreeMap::from([
                ("vertices", g.vertex_count()),
                ("geometric_edges", g.geometric_edge_count()),
                ("inner_vertices", ctx.ball.inner_vertices().len()),
                ("valency_bound", g.valency_bound()),
            ]);
            write_json(out, "report.json", &summary)?;
            true
        }
        Command::ExportDot => {
            fs::write(out.join("graph.dot"), export_dot(&ctx.ball))?;
            true
        }
        Command::Delta => {
            ctx.delta(input)?;
            write_json(out, "report.json", &ctx.delta)?;
            true
        }
        Command::Bicomb { a, b } => {
            let eng = ctx.engine(input)?;
            ledger = Some(*eng.ledger());
            let g = eng.graph();
            let (a, b) = (g.vertex(a)?, g.vertex(b)?);
            let bounds = eng.verify_bounds(a, b)?;
            #[derive(Serialize)]
            struct Out {
                bounds: bicomb_core::bicombing::BoundsReport,
                qprime: BTreeMap<String, String>,
                q: BTreeMap<String, String>,
                geodesic: Vec<String>,
            }
            let report = Out {
                qprime: eng.qprime(a, b)?.to_named_map(g),
                q: eng.q(a, b)?.to_named_map(g),
                geodesic: eng.p(a, b).into_iter().map(|v| g.vertex_name(v).to_string()).collect(),
                bounds,
            };
            let ok = report.bounds.ok;
            write_json(out, "report.json", &report)?;
            ok
        }
        Command::VerifyAll => {
            let eng = ctx.engine(input)?;
            ledger = Some(*eng.ledger());
            let report = verify_all(&eng)?;
            write_json(out, "report.json", &report)?;
            report.violations == 0
        }
        Command::AreaSweep => {
            let eng = ctx.engine(input)?;
            ledger = Some(*eng.ledger());
            let sweep = area_sweep(&eng, input.samples.unwrap_or(DEFAULT_SAMPLES), input.seed)?;
            write_json(out, "report.json", &sweep)?;
            true
        }
        Command::Decay => {
            let eng = ctx.engine(input)?;
            ledger = Some(*eng.ledger());
            let fits = FittedConstants::compute(&eng, input.samples.unwrap_or(1000), input.seed)?;
            fs::write(out.join("raw.csv"), raw_csv(&fits.raw_rows()))?;
            write_json(out, "report.json", &fits)?;
            fits.envelopes_pass()
        }
        Command::Ideal { xi, eta, depth } => {
            let eng = ctx.engine(input)?;
            ledger = Some(*eng.ledger());
            let ictx = IdealContext::new(&eng);
            let (xi, eta) = (ictx.point_named(xi)?, ictx.point_named(eta)?);
            let n = depth.unwrap_or(ictx.trust());
            let ideal = ictx.q_ideal(&xi, &eta, n)?;
            let conditions = ictx
                .check_ideal_conditions(&xi, &eta, n, &ictx.default_cone(&eta), &ictx.default_cone(&xi))
                .ok();
            let g = eng.graph();
            let gamma = eng.p(ideal.a, ideal.b);
            let x = gamma[gamma.len() / 2];
            let d = 30 * eng.ledger().delta + 2;
            let nonzero = ictx.nonzero_edge_search(&ideal, x, d);
            #[derive(Serialize)]
            struct Out {
                depth: u32,
                a: String,
                b: String,
                chain: BTreeMap<String, String>,
                cauchy: bicomb_core::ideal::CauchyReport,
                conditions: Option<bicomb_core::ideal::IdealConditionsReport>,
                nonzero_search_center: String,
                nonzero_search_radius: u32,
                nonzero_edge: Option<bicomb_core::ideal::NonzeroEdge>,
            }
            let zero = ideal.chain.is_zero();
            let ok = zero || (conditions.as_ref().map_or(true, |c| c.ok) && nonzero.is_some());
            let report = Out {
                depth: n,
                a: g.vertex_name(ideal.a).into(),
                b: g.vertex_name(ideal.b).into(),
                chain: ideal.chain.to_named_map(g),
                cauchy: ideal.cauchy,
                conditions,
                nonzero_search_center: g.vertex_name(x).into(),
                nonzero_search_radius: d,
                nonzero_edge: nonzero,
            };
            write_json(out, "report.json", &report)?;
            ok
        }
        Command::Cocycle { triple } => {
            let eng = ctx.engine(input)?;
            ledger = Some(*eng.ledger());
            let ictx = IdealContext::new(&eng);
            let pts = triple.iter().map(|t| ictx.point_named(t)).collect::<bicomb_core::Result<Vec<_>>>()?;
            let co = Cocycle::new(&ictx);
            let rep = co.triple_report(&pts[0], &pts[1], &pts[2])?;
            #[derive(Serialize)]
            struct Out {
                params: bicomb_core::cocycle::CocycleParams,
                depth: u32,
                l1_norm: String,
                witness: Option<bicomb_core::cocycle::Witness>,
                triple: bicomb_core::cocycle::TripleReport,
            }
            let ok = rep.witness.is_some();
            let report = Out { params: co.params, depth: co.depth, l1_norm: rep.l1_norm.clone(), witness: rep.witness.clone(), triple: rep };
            write_json(out, "report.json", &report)?;
            ok
        }
    };

    let manifest = Manifest {
        tool: "bicomb",
        version: env!("CARGO_PKG_VERSION"),
        command: &cli.command,
        inputs: input,
        vertices: ctx.ball.graph.vertex_count(),
        radius: ctx.ball.radius,
        trust_radius: ctx.ball.trust_radius,
        delta: ctx.delta.as_ref(),
        ledger,
    };
    write_json(out, "manifest.json", &manifest)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("invariant violations found; see {}", cli.input.out.join("report.json").display());
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Budget(m) | Failure::Resource(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_BUDGET)
        }
    }
}
