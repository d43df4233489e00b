//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code: 0 on success, 1 on a domain failure,
//! 2 on a usage or configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::canardmap::{CanardMap, MapParams};
use crate::config::RunConfig;
use crate::degree::{degree_w, DegreeRoute, WindingOptions};
use crate::integrate::{fmt17, integrate_full, Direction, EventSpec, Status};
use crate::output::{cell, svg, write_file, write_json, Csv, Panel, Stroke};
use crate::reduced::{compute_geometry, ChartPoint, GeometryError, Parallelogram, ReducedGeometry};
use crate::solver::{find_a0, find_fixed_point, period_sweep, shoot_periodic_orbit, SolverError};
use crate::system::{check_assumptions, SystemSpec};

const BUNDLED: [(&str, &str); 3] = [
    ("example.cfg", include_str!("../configs/example.cfg")),
    ("example_a3.cfg", include_str!("../configs/example_a3.cfg")),
    ("example_a2.cfg", include_str!("../configs/example_a2.cfg")),
];

#[derive(Debug, Parser)]
#[command(name = "canard", version, about = "Periodic canards in piecewise-linear slow-fast systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config file; a bare bundled name such as `example_a3.cfg` also works.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the result, or the error, as JSON on standard output.
    #[arg(long)]
    pub json: bool,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    StatePlane,
    Chart,
}

impl From<RouteArg> for DegreeRoute {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::StatePlane => DegreeRoute::StatePlane,
            RouteArg::Chart => DegreeRoute::ChartDifference,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the box and check the standing assumptions on f and g.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Canonical curves, their crossing and the transversality number.
    Reduced {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the return map on the chart boundary or on a grid.
    Map {
        #[command(flatten)]
        common: Common,
        /// Evaluate on an N x N grid of the chart square instead of its boundary.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        n_per_side: Option<usize>,
    },
    /// Degree of id - W on the chart square.
    Degree {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = RouteArg::StatePlane)]
        route: RouteArg,
        #[arg(long)]
        n_per_side: Option<usize>,
        /// Report a result even when an increment stays at or above pi/2.
        #[arg(long)]
        allow_uncertified: bool,
    },
    /// Fixed point of W and the periodic canard through it.
    Canard {
        #[command(flatten)]
        common: Common,
        /// Certify a nonzero degree before searching.
        #[arg(long)]
        check_degree: bool,
        #[arg(long, value_enum, default_value_t = RouteArg::StatePlane)]
        route: RouteArg,
    },
    /// Canard period for a list of epsilon values.
    SweepEps {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Reduced geometry across a parameter, with a bisection for the onset of the crossing.
    SweepA {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "a")]
        name: String,
        #[arg(long, value_delimiter = ',', default_value = "1.5,1.75,2,2.5,3,3.5,4")]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1.5,2.5")]
        bracket: Vec<f64>,
        /// Bisection tolerance on the parameter.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Integrate the full system from one initial state.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial state `x,y,z`; defaults to the crossing point with z = 0.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        initial: Option<Vec<f64>>,
        /// Start time; defaults to tau.
        #[arg(long, allow_hyphen_values = true)]
        t0: Option<f64>,
        /// End time; defaults to tau + 2 (sigma - tau).
        #[arg(long, allow_hyphen_values = true)]
        t1: Option<f64>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Check { common }
            | Command::Reduced { common }
            | Command::Map { common, .. }
            | Command::Degree { common, .. }
            | Command::Canard { common, .. }
            | Command::SweepEps { common, .. }
            | Command::SweepA { common, .. }
            | Command::Simulate { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Reduced { .. } => "reduced",
            Command::Map { .. } => "map",
            Command::Degree { .. } => "degree",
            Command::Canard { .. } => "canard",
            Command::SweepEps { .. } => "sweep-eps",
            Command::SweepA { .. } => "sweep-a",
            Command::Simulate { .. } => "simulate",
        }
    }
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Domain { kind: &'static str, error: anyhow::Error },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain { .. } => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "Usage",
            Failure::Domain { kind, .. } => kind,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(e) | Failure::Domain { error: e, .. } => format!("{e:#}"),
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn domain(kind: &'static str, e: impl Into<anyhow::Error>) -> Failure {
    Failure::Domain { kind, error: e.into() }
}

fn geometry_failure(e: GeometryError) -> Failure {
    let kind = match e {
        GeometryError::NoIntersection { .. } => "NoIntersection",
        GeometryError::DegenerateTangency { .. } => "DegenerateTangency",
        _ => "Geometry",
    };
    domain(kind, e)
}

fn solver_failure(e: SolverError) -> Failure {
    let kind = match e {
        SolverError::NoConvergence { .. } => "NoConvergence",
        SolverError::DegreeZero { .. } => "DegreeZero",
        SolverError::BadBracket { .. } => "BadBracket",
        _ => "Solver",
    };
    domain(kind, e)
}

/// Outcome of a subcommand: the JSON payload for `--json` and a one-line summary.
struct Done {
    payload: Value,
    summary: String,
}

/// Parses `argv` (program name first) and executes the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let json_out = cli.command.common().json;
    let name = cli.command.name();
    match execute(&cli.command) {
        Ok(done) => {
            if json_out {
                println!("{}", crate::output::to_json_string(&done.payload).unwrap_or_default().trim_end());
            } else {
                println!("{}", done.summary);
            }
            0
        }
        Err(f) => {
            eprintln!("canard {name}: {}: {}", f.kind(), f.message());
            if json_out {
                let v = json!({ "command": name, "error": f.kind(), "message": f.message(), "exit_code": f.exit_code() });
                println!("{}", crate::output::to_json_string(&v).unwrap_or_default().trim_end());
            }
            f.exit_code()
        }
    }
}

/// `CANARD_THREADS` sets the size of the worker pool.
fn configure_threads() {
    if let Some(n) = std::env::var("CANARD_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Loads the config named by `--config` (a path, else a bundled name) and
/// applies the flag overrides.
pub fn effective_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        None => RunConfig::default(),
        Some(path) if path.exists() => RunConfig::load(path).map_err(usage)?,
        Some(path) => {
            let name = path.to_string_lossy();
            let text = BUNDLED
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| *t)
                .ok_or_else(|| usage(anyhow::anyhow!("config file {} not found", path.display())))?;
            serde_json::from_str(text).map_err(|e| usage(anyhow::anyhow!("bundled config {name}: {e}")))?
        }
    };
    if let Some(e) = common.epsilon {
        cfg.numerics.epsilon = e;
    }
    if common.alpha.is_some() {
        cfg.numerics.alpha = common.alpha;
    }
    if common.rho.is_some() {
        cfg.numerics.rho = common.rho;
    }
    for p in &common.params {
        cfg.set_param(p).map_err(usage)?;
    }
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    if common.svg {
        cfg.output.svg = true;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if !(cfg.numerics.epsilon > 0.0) {
        return Err(usage(anyhow::anyhow!("epsilon must be positive, got {}", cfg.numerics.epsilon)));
    }
    Ok(cfg)
}

fn execute(cmd: &Command) -> Result<Done, Failure> {
    let cfg = effective_config(cmd.common())?;
    eprintln!(
        "canard {}: effective config {}",
        cmd.name(),
        serde_json::to_string(&cfg).unwrap_or_default()
    );
    let sys = cfg.build_system().map_err(usage)?;
    let ctx = Ctx { cmd: cmd.name(), cfg: &cfg };
    match cmd {
        Command::Check { .. } => check(&ctx, &sys),
        Command::Reduced { .. } => reduced(&ctx, &sys),
        Command::Map { grid, n_per_side, .. } => map(&ctx, &sys, *grid, n_per_side.unwrap_or(cfg.numerics.n_per_side)),
        Command::Degree {
            route,
            n_per_side,
            allow_uncertified,
            ..
        } => degree(
            &ctx,
            &sys,
            (*route).into(),
            n_per_side.unwrap_or(cfg.numerics.n_per_side),
            *allow_uncertified,
        ),
        Command::Canard { check_degree, route, .. } => canard(&ctx, &sys, *check_degree, (*route).into()),
        Command::SweepEps { eps, .. } => sweep_eps(&ctx, &sys, eps.clone().unwrap_or_else(|| cfg.numerics.eps_list.clone())),
        Command::SweepA {
            name,
            values,
            bracket,
            tol,
            ..
        } => {
            let [lo, hi] = bracket[..] else {
                return Err(usage(anyhow::anyhow!("--bracket takes two values, got {}", bracket.len())));
            };
            sweep_a(&ctx, name, values, (lo, hi), *tol)
        }
        Command::Simulate { initial, t0, t1, .. } => simulate(&ctx, &sys, initial.as_deref(), *t0, *t1),
    }
}

struct Ctx<'a> {
    cmd: &'static str,
    cfg: &'a RunConfig,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_path(name)
    }

    /// Writes `{command, config, ...extra}` to `name`.
    fn json(&self, name: &str, extra: Value) -> Result<PathBuf, Failure> {
        let mut doc = json!({ "command": self.cmd, "config": self.cfg });
        if let (Value::Object(d), Value::Object(e)) = (&mut doc, extra) {
            d.extend(e);
        }
        let path = self.path(name);
        write_json(&path, &doc).map_err(usage)?;
        Ok(path)
    }

    /// Writes a CSV table and its `<stem>.config.json` sidecar.
    fn csv(&self, name: &str, table: &str, extra: Value) -> Result<PathBuf, Failure> {
        let path = self.path(name);
        write_file(&path, table.as_bytes()).map_err(usage)?;
        let stem = Path::new(name).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.json(&format!("{stem}.config.json"), extra)?;
        Ok(path)
    }

    fn svg(&self, name: &str, panels: &[Panel]) -> Result<(), Failure> {
        if self.cfg.output.svg {
            write_file(&self.path(name), svg(panels).as_bytes()).map_err(usage)?;
        }
        Ok(())
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn geometry(ctx: &Ctx<'_>, sys: &SystemSpec) -> Result<ReducedGeometry, Failure> {
    compute_geometry(sys, &ctx.cfg.geometry_options()).map_err(geometry_failure)
}

fn check(ctx: &Ctx<'_>, sys: &SystemSpec) -> Result<Done, Failure> {
    let n = &ctx.cfg.numerics;
    let report = check_assumptions(sys, &n.bounds, n.check_samples, ctx.cfg.seed);
    let path = ctx.json("check.json", json!({ "result": report }))?;
    if !report.pass {
        return Err(domain(
            "AssumptionViolated",
            anyhow::anyhow!("assumption check failed ({}); report in {}", report.failures.join("; "), path.display()),
        ));
    }
    Ok(Done {
        summary: format!(
            "assumptions hold: M_est = {}, lambda_est = {}; report in {}",
            fmt17(report.m_est),
            fmt17(report.lambda_est),
            path.display()
        ),
        payload: to_value(&report),
    })
}

fn curve_csv(points: &[crate::reduced::CurvePoint]) -> Csv {
    let mut csv = Csv::new(&["t", "x", "y"]);
    for c in points {
        csv.row(&[fmt17(c.t), fmt17(c.p[0]), fmt17(c.p[1])]);
    }
    csv
}

fn curves_panel(geom: &ReducedGeometry) -> Panel {
    let pts = |c: &crate::reduced::CanonicalCurve| c.points.iter().map(|q| q.p).collect::<Vec<_>>();
    let mut p = Panel::new("canonical curves", "x", "y");
    p.line(pts(&geom.gamma_a), "black", Stroke::Solid, "attractive")
        .line(pts(&geom.gamma_r), "black", Stroke::Dashed, "repulsive")
        .mark(geom.star(), "red");
    p
}

fn reduced(ctx: &Ctx<'_>, sys: &SystemSpec) -> Result<Done, Failure> {
    let geom = geometry(ctx, sys)?;
    let summary = geom.summary();
    let payload = json!({ "result": summary, "crossings": geom.crossings });
    let path = ctx.json("reduced.json", payload.clone())?;
    let extra = json!({ "geometry": summary });
    ctx.csv("gamma_a.csv", curve_csv(&geom.gamma_a.points).as_str(), extra.clone())?;
    ctx.csv("gamma_r.csv", curve_csv(&geom.gamma_r.points).as_str(), extra)?;
    ctx.svg("reduced.svg", &[curves_panel(&geom)])?;
    Ok(Done {
        summary: format!(
            "tau = {}, sigma = {}, (x*, y*) = ({}, {}), A = {}; results in {}",
            fmt17(geom.tau),
            fmt17(geom.sigma),
            fmt17(geom.x_star),
            fmt17(geom.y_star),
            fmt17(geom.a),
            path.display()
        ),
        payload,
    })
}

fn build_map<'a>(ctx: &Ctx<'_>, sys: &'a SystemSpec, geom: &'a ReducedGeometry) -> Result<CanardMap<'a>, Failure> {
    let params: MapParams = ctx.cfg.map_params(sys, geom);
    CanardMap::new(sys, geom, params).map_err(|e| domain("Map", e))
}

fn map(ctx: &Ctx<'_>, sys: &SystemSpec, grid: Option<usize>, n_per_side: usize) -> Result<Done, Failure> {
    let geom = geometry(ctx, sys)?;
    let map = build_map(ctx, sys, &geom)?;
    let par = Parallelogram::new(map.params.alpha, geom.sign_a());
    let points: Vec<ChartPoint> = match grid {
        Some(n) => {
            let n = n.max(2);
            let h = par.half();
            let at = |k: usize| -h + 2.0 * h * k as f64 / (n - 1) as f64;
            (0..n).flat_map(|j| (0..n).map(move |i| ChartPoint::new(at(i), at(j)))).collect()
        }
        None => par.boundary_params(n_per_side).into_iter().map(|s| par.boundary_point(s)).collect(),
    };
    let rows: Vec<(ChartPoint, Result<(crate::canardmap::MapResult, Option<ChartPoint>), String>)> = points
        .par_iter()
        .map(|&uv| {
            let r = map
                .chart
                .chart_inverse(uv, map.chart.linear_inverse(uv.as_array()))
                .map_err(|e| e.to_string())
                .and_then(|p| map.map_w(p).map_err(|e| e.to_string()))
                .map(|m| {
                    let back = map.chart.chart_uv(m.image).ok();
                    (m, back)
                });
            (uv, r)
        })
        .collect();
    let mut csv = Csv::new(&["u0", "v0", "s_eps", "case", "x_img", "y_img", "u_img", "v_img"]);
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    let mut images = Vec::new();
    for (uv, r) in &rows {
        match r {
            Ok((m, back)) => {
                *counts.entry(m.case_tag.label().to_string()).or_default() += 1;
                images.push(m.image);
                csv.row(&[
                    fmt17(uv.u),
                    fmt17(uv.v),
                    fmt17(m.s_eps),
                    m.case_tag.label().to_string(),
                    fmt17(m.image[0]),
                    fmt17(m.image[1]),
                    cell(back.map(|b| b.u)),
                    cell(back.map(|b| b.v)),
                ]);
            }
            Err(_) => {
                *counts.entry("error".into()).or_default() += 1;
                csv.row(&[fmt17(uv.u), fmt17(uv.v), String::new(), "error".into(), String::new(), String::new(), String::new(), String::new()]);
            }
        }
    }
    let errors: Vec<String> = rows.iter().filter_map(|(_, r)| r.as_ref().err().cloned()).collect();
    let extra = json!({
        "geometry": geom.summary(),
        "alpha": map.params.alpha,
        "rho": map.params.rho,
        "case_counts": counts,
        "errors": errors,
    });
    let path = ctx.csv("map.csv", csv.as_str(), extra.clone())?;
    let mut panel = curves_panel(&geom);
    panel.title = "return map images".into();
    for im in &images {
        panel.mark(*im, "blue");
    }
    ctx.svg("map.svg", &[panel])?;
    Ok(Done {
        summary: format!("{} points evaluated, cases {:?}; table in {}", rows.len(), counts, path.display()),
        payload: extra,
    })
}

fn degree(ctx: &Ctx<'_>, sys: &SystemSpec, route: DegreeRoute, n_per_side: usize, allow_uncertified: bool) -> Result<Done, Failure> {
    let geom = geometry(ctx, sys)?;
    let map = build_map(ctx, sys, &geom)?;
    let wopts = WindingOptions {
        n_samples: 4 * n_per_side,
        max_depth: ctx.cfg.numerics.max_depth,
        zero_tol: ctx.cfg.numerics.zero_tol,
        allow_uncertified,
    };
    let report = degree_w(&map, route, n_per_side, &wopts).map_err(|e| domain("Degree", e))?;
    let payload = json!({ "result": report, "sign_A": geom.sign_a() });
    let path = ctx.json("degree.json", payload.clone())?;
    if report.degree == 0 {
        return Err(solver_failure(SolverError::DegreeZero { degree: 0 }));
    }
    Ok(Done {
        summary: format!(
            "degree = {} (sgn A = {}), certified = {}, {} evaluations; report in {}",
            report.degree,
            geom.sign_a(),
            report.certified,
            report.n_evals,
            path.display()
        ),
        payload,
    })
}

fn orbit_panels(geom: &ReducedGeometry, samples: &[(f64, [f64; 3])]) -> [Panel; 2] {
    let attr: Vec<[f64; 3]> = geom.gamma_a.window(geom.tau, 0.0).iter().map(|c| [c.p[0], c.p[1], c.p[0]]).collect();
    let rep: Vec<[f64; 3]> = geom.gamma_r.window(0.0, geom.sigma).iter().map(|c| [c.p[0], c.p[1], -c.p[0]]).collect();
    let jump = vec![[geom.x_star, geom.y_star, -geom.x_star], [geom.x_star, geom.y_star, geom.x_star]];
    let proj = |pts: &[[f64; 3]], i: usize, j: usize| pts.iter().map(|p| [p[i], p[j]]).collect::<Vec<_>>();
    let orbit: Vec<[f64; 3]> = samples.iter().map(|s| s.1).collect();
    let panel = |title: &str, ylab: &str, j: usize| {
        let mut p = Panel::new(title, "x", ylab);
        p.line(proj(&orbit, 0, j), "blue", Stroke::Solid, "orbit")
            .line(proj(&attr, 0, j), "black", Stroke::Dashed, "attractive limit")
            .line(proj(&rep, 0, j), "black", Stroke::Dotted, "repulsive limit")
            .line(proj(&jump, 0, j), "gray", Stroke::Dashed, "");
        p
    };
    [panel("(x, z) projection", "z", 2), panel("(x, y) projection", "y", 1)]
}

fn orbit_csv(samples: &[(f64, [f64; 3])]) -> Csv {
    let mut csv = Csv::new(&["t", "x", "y", "z"]);
    for (t, s) in samples {
        csv.row(&[fmt17(*t), fmt17(s[0]), fmt17(s[1]), fmt17(s[2])]);
    }
    csv
}

fn canard(ctx: &Ctx<'_>, sys: &SystemSpec, check_degree: bool, route: DegreeRoute) -> Result<Done, Failure> {
    let geom = geometry(ctx, sys)?;
    let map = build_map(ctx, sys, &geom)?;
    let mut opts = ctx.cfg.solver_options();
    opts.check_degree = check_degree;
    opts.degree_route = route;
    let dt = 0.01_f64.min(map.params.eps / 5.0);
    match find_fixed_point(&map, &opts) {
        Ok(r) => {
            let samples = r.orbit.samples(dt);
            let extra = json!({ "geometry": geom.summary(), "period": r.period });
            ctx.csv("canard_orbit.csv", orbit_csv(&samples).as_str(), extra)?;
            ctx.svg("canard.svg", &orbit_panels(&geom, &samples))?;
            let payload = json!({ "result": r, "geometry": geom.summary() });
            let path = ctx.json("canard.json", payload.clone())?;
            Ok(Done {
                summary: format!(
                    "fixed point ({}, {}), period {}, {:?}, closure {:e}; result in {}",
                    fmt17(r.fixed_point[0]),
                    fmt17(r.fixed_point[1]),
                    fmt17(r.period),
                    r.case_tag,
                    r.closure_error,
                    path.display()
                ),
                payload,
            })
        }
        Err(e) => {
            let mut extra = json!({ "error": e.to_string(), "geometry": geom.summary() });
            if let SolverError::NoConvergence { orbit: Some(o), .. } = &e {
                extra["candidate_orbit"] = to_value(o.as_ref());
                // Re-shoot from the recorded point so the rejected orbit can be inspected.
                if let Ok(orbit) = shoot_periodic_orbit(&map, &[o.p], &opts.shooting) {
                    let samples = orbit.samples(dt);
                    ctx.csv("canard_orbit.csv", orbit_csv(&samples).as_str(), extra.clone())?;
                    ctx.svg("canard.svg", &orbit_panels(&geom, &samples))?;
                }
            }
            ctx.json("canard.json", extra)?;
            Err(solver_failure(e))
        }
    }
}

fn sweep_eps(ctx: &Ctx<'_>, sys: &SystemSpec, eps: Vec<f64>) -> Result<Done, Failure> {
    let geom = geometry(ctx, sys)?;
    let base = ctx.cfg.map_params(sys, &geom);
    let rows = period_sweep(sys, &geom, &base, &eps, &ctx.cfg.solver_options());
    let mut csv = Csv::new(&[
        "eps",
        "period",
        "period_defect",
        "uv_norm",
        "closure_error",
        "case",
        "orbit_period",
        "orbit_defect",
        "error",
    ]);
    for r in &rows {
        csv.row(&[
            fmt17(r.eps),
            cell(r.period),
            cell(r.period_defect),
            cell(r.uv_norm),
            cell(r.closure_error),
            r.case_tag.map(|c| c.label().to_string()).unwrap_or_default(),
            cell(r.orbit_period),
            cell(r.orbit_defect),
            r.error.as_deref().map(csv_text).unwrap_or_default(),
        ]);
    }
    let extra = json!({ "geometry": geom.summary(), "limit_period": geom.sigma - geom.tau, "rows": rows });
    let path = ctx.csv("sweep_eps.csv", csv.as_str(), extra.clone())?;
    let mut panel = Panel::new("period defect", "eps", "|T - (sigma - tau)|");
    panel.line(
        rows.iter().filter_map(|r| r.orbit_defect.map(|d| [r.eps, d])).collect(),
        "blue",
        Stroke::Solid,
        "orbit",
    );
    ctx.svg("sweep_eps.svg", &[panel])?;
    Ok(Done {
        summary: format!("{} epsilon values; table in {}", rows.len(), path.display()),
        payload: extra,
    })
}

/// Quotes a free-text CSV cell.
fn csv_text(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn sweep_a(ctx: &Ctx<'_>, name: &str, values: &[f64], bracket: (f64, f64), tol: f64) -> Result<Done, Failure> {
    let cfg = ctx.cfg;
    let gopts = cfg.geometry_options();
    let family = |value: f64| {
        let mut params = cfg.system.params.clone();
        params.insert(name.to_string(), value);
        SystemSpec::new(&cfg.system.f, &cfg.system.g, &params)
    };
    let rows: Vec<(f64, Result<ReducedGeometry, String>)> = values
        .par_iter()
        .map(|&v| {
            let r = family(v)
                .map_err(|e| e.to_string())
                .and_then(|s| compute_geometry(&s, &gopts).map_err(|e| e.to_string()));
            (v, r)
        })
        .collect();
    let mut csv = Csv::new(&[name, "intersection", "tau", "sigma", "x_star", "y_star", "A", "error"]);
    for (v, r) in &rows {
        match r {
            Ok(g) => csv.row(&[
                fmt17(*v),
                "true".into(),
                fmt17(g.tau),
                fmt17(g.sigma),
                fmt17(g.x_star),
                fmt17(g.y_star),
                fmt17(g.a),
                String::new(),
            ]),
            Err(e) => csv.row(&[
                fmt17(*v),
                "false".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                csv_text(e),
            ]),
        }
    }
    let a0 = find_a0(family, bracket, tol, &gopts);
    let a0_value = match &a0 {
        Ok(r) => to_value(r),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let extra = json!({ "parameter": name, "tol": tol, "a0": a0_value });
    let path = ctx.csv("sweep_a.csv", csv.as_str(), extra.clone())?;
    let a0 = a0.map_err(solver_failure)?;
    Ok(Done {
        summary: format!(
            "{name}_0 = {} in [{}, {}] after {} bisections; table in {}",
            fmt17(a0.a0),
            fmt17(a0.bracket[0]),
            fmt17(a0.bracket[1]),
            a0.iterations,
            path.display()
        ),
        payload: extra,
    })
}

fn simulate(ctx: &Ctx<'_>, sys: &SystemSpec, initial: Option<&[f64]>, t0: Option<f64>, t1: Option<f64>) -> Result<Done, Failure> {
    let needs_geometry = initial.is_none() || t0.is_none() || t1.is_none();
    let geom = if needs_geometry { Some(geometry(ctx, sys)?) } else { None };
    let start = match (initial, &geom) {
        (Some(&[x, y, z]), _) => [x, y, z],
        (Some(s), _) => return Err(usage(anyhow::anyhow!("--initial takes three values, got {}", s.len()))),
        (None, Some(g)) => [g.x_star, g.y_star, 0.0],
        (None, None) => unreachable!("geometry computed when the initial state is missing"),
    };
    let t0 = t0.or(geom.as_ref().map(|g| g.tau)).unwrap_or(0.0);
    let t1 = t1.or(geom.as_ref().map(|g| g.tau + 2.0 * (g.sigma - g.tau))).unwrap_or(1.0);
    let m_est = ctx.cfg.m_est(sys);
    let events = [EventSpec::new("z=0", Direction::Any, false, |_, y: &[f64; 3]| y[2])];
    let traj = integrate_full(sys, ctx.cfg.numerics.epsilon, start, t0, t1, &events, &ctx.cfg.full_options(m_est))
        .map_err(|e| domain("Integration", e))?;
    let mut csv_text_buf = Vec::new();
    traj.write_csv(&mut csv_text_buf).map_err(usage)?;
    let status = match traj.status {
        Status::Completed => "Completed",
        Status::Terminal => "Terminal",
        Status::BlowUp => "BlowUp",
    };
    let extra = json!({ "initial": start, "t0": t0, "t1": t1, "status": status, "M_est": m_est });
    let path = ctx.csv("simulate.csv", std::str::from_utf8(&csv_text_buf).unwrap_or_default(), extra.clone())?;
    write_json(&ctx.path("simulate.events.json"), &traj.events_json()).map_err(usage)?;
    let samples: Vec<(f64, [f64; 3])> = traj.times.iter().copied().zip(traj.states.iter().copied()).collect();
    if let Some(g) = &geom {
        ctx.svg("simulate.svg", &orbit_panels(g, &samples))?;
    } else {
        let mut p = Panel::new("(x, z) projection", "x", "z");
        p.line(samples.iter().map(|s| [s.1[0], s.1[2]]).collect(), "blue", Stroke::Solid, "");
        ctx.svg("simulate.svg", &[p])?;
    }
    Ok(Done {
        summary: format!(
            "{} steps, {} z = 0 crossings, status {status}; trajectory in {}",
            traj.times.len().saturating_sub(1),
            traj.events.len(),
            path.display()
        ),
        payload: json!({ "summary": extra, "events": traj.events_json() }),
    })
}
