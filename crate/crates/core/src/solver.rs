//! Periodic canards as fixed points of `W`, period sweeps over `eps`, and the
//! search for the critical parameter `a_0`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::canardmap::{CanardMap, Case, ExitKind, MapError, MapParams};
use crate::degree::{degree_on_rect, ChartRect, DegreeError, DegreeReport, DegreeRoute, WindingOptions};
use crate::integrate::{integrate_full, Direction, EventSpec, FullOptions, IntegrateError, Options, Status, Trajectory};
use crate::reduced::{compute_geometry, tilde_t, ChartError, ChartPoint, CrossingError, GeometryError, GeometryOptions, Parallelogram, ReducedGeometry};
use crate::system::{SystemError, SystemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no fixed point found: {message}")]
    NoConvergence {
        message: String,
        /// Periodic orbit located by shooting, if any, that failed the
        /// fixed-point conditions.
        orbit: Option<Box<OrbitSummary>>,
    },
    #[error("degree of id - W is {degree}: no certificate of existence")]
    DegreeZero { degree: i64 },
    #[error("bad bracket: intersection exists at a_lo = {lo} is {at_lo}, at a_hi = {hi} is {at_hi}")]
    BadBracket { lo: f64, hi: f64, at_lo: bool, at_hi: bool },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Degree(#[from] DegreeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Crossing(#[from] CrossingError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Why a shooting attempt did not produce an orbit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootError {
    #[error("no z = 0 crossing within {span} time units ({direction})")]
    NoCrossing { span: f64, direction: &'static str },
    #[error("first z = 0 crossing ({direction}) at x = {x} is not on the x > 0 side")]
    WrongSide { x: f64, direction: &'static str },
    #[error("Newton stalled at |G| = {residual:e} after {iterations} iterations")]
    Stalled { residual: f64, iterations: usize },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingOptions {
    /// Integrator tolerance for both halves of the orbit.
    pub tol: f64,
    pub max_step: f64,
    pub max_iter: usize,
    /// Finite-difference step for the Newton Jacobian.
    pub fd_step: f64,
    /// Junction mismatch accepted as converged.
    pub residual_tol: f64,
    /// Seed grid points per chart axis tried when the given seeds fail.
    pub seed_grid: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            tol: 1e-12,
            max_step: 0.02,
            max_iter: 40,
            fd_step: 1e-8,
            residual_tol: 1e-11,
            seed_grid: 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub broyden_max_iter: usize,
    /// Finite-difference step for the initial Jacobian, as a multiple of `alpha`.
    pub fd_factor: f64,
    /// Required `|p - W(p)|`.
    pub f_tol: f64,
    /// Required closure of the periodic orbit.
    pub closure_tol: f64,
    /// Compute the degree first and refuse to search when it vanishes.
    pub check_degree: bool,
    pub degree_route: DegreeRoute,
    /// Samples per side for the degree at the root of the subdivision.
    pub n_per_side: usize,
    /// Samples per side for the degree of sub-rectangles.
    pub sub_per_side: usize,
    /// Subdivision stops below this chart diameter.
    pub min_diameter: f64,
    pub winding: WindingOptions,
    pub shooting: ShootingOptions,
    /// Boundary layers excluded from the adherence check are `c eps |ln eps|` wide.
    pub layer_factor: f64,
    /// Adherence bound is `slack M_est eps`.
    pub adherence_slack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            broyden_max_iter: 30,
            fd_factor: 1e-4,
            f_tol: 1e-8,
            closure_tol: 1e-6,
            check_degree: false,
            degree_route: DegreeRoute::StatePlane,
            n_per_side: crate::degree::DEFAULT_PER_SIDE,
            sub_per_side: 8,
            min_diameter: 1e-6,
            winding: WindingOptions::default(),
            shooting: ShootingOptions::default(),
            layer_factor: 5.0,
            adherence_slack: 3.0,
        }
    }
}

/// Periodic orbit through `(p, 0)` at `t = tau`, assembled from a forward
/// half (slow attractive part up to the `z` up-crossing) and a backward half
/// (repulsive part, integrated backwards from `(p, 0)`, where it is stable).
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub p: [f64; 2],
    pub tau: f64,
    pub period: f64,
    /// Time of the `z` up-crossing near the origin.
    pub t_up: f64,
    /// Norm of the mismatch between the two halves at the up-crossing.
    pub closure_error: f64,
    pub iterations: usize,
    pub forward: Trajectory<3>,
    pub backward: Trajectory<3>,
}

impl PeriodicOrbit {
    pub fn t_end(&self) -> f64 {
        self.tau + self.period
    }

    /// State at `t in [tau, tau + period]`.
    pub fn state(&self, t: f64) -> Option<[f64; 3]> {
        if t <= self.t_up {
            self.forward.eval(t)
        } else {
            self.backward.eval(t - self.period)
        }
    }

    /// Samples over one period, ascending in time, at most `dt` apart.
    pub fn samples(&self, dt: f64) -> Vec<(f64, [f64; 3])> {
        let mut out = self.forward.dense_samples(dt);
        let mut back: Vec<_> = self
            .backward
            .dense_samples(dt)
            .into_iter()
            .map(|(t, s)| (t + self.period, s))
            .collect();
        back.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let (Some(last), Some(first)) = (out.last(), back.first()) {
            if first.0 <= last.0 {
                back.remove(0);
            }
        }
        out.extend(back);
        out
    }

    pub fn summary(&self) -> OrbitSummary {
        OrbitSummary {
            p: self.p,
            period: self.period,
            t_up: self.t_up,
            closure_error: self.closure_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSummary {
    pub p: [f64; 2],
    pub period: f64,
    pub t_up: f64,
    pub closure_error: f64,
}

struct Half {
    t: f64,
    state: [f64; 3],
    traj: Trajectory<3>,
}

fn half_orbit(
    sys: &SystemSpec,
    eps: f64,
    tau: f64,
    p: [f64; 2],
    dir: f64,
    span: f64,
    opts: &ShootingOptions,
) -> Result<Half, ShootError> {
    let full = FullOptions {
        base: Options {
            tol: opts.tol,
            max_step: opts.max_step,
            event_dt: 1e-14,
            ..Options::default()
        },
        ..FullOptions::default()
    };
    let direction = if dir > 0.0 { "forward" } else { "backward" };
    let ev = [EventSpec::new("z=0", Direction::Any, true, |_, y: &[f64; 3]| y[2])];
    let traj = integrate_full(sys, eps, [p[0], p[1], 0.0], tau, tau + dir * span, &ev, &full)?;
    if traj.status != Status::Terminal {
        return Err(ShootError::NoCrossing { span, direction });
    }
    let e = &traj.events[0];
    if !(e.state[0] > 0.0) {
        return Err(ShootError::WrongSide {
            x: e.state[0],
            direction,
        });
    }
    Ok(Half {
        t: e.t,
        state: e.state,
        traj,
    })
}

struct Shot {
    g: [f64; 2],
    fwd: Half,
    bwd: Half,
}

fn shoot(sys: &SystemSpec, geom: &ReducedGeometry, eps: f64, p: [f64; 2], opts: &ShootingOptions) -> Result<Shot, ShootError> {
    let span = geom.sigma - geom.tau;
    let fwd = half_orbit(sys, eps, geom.tau, p, 1.0, span, opts)?;
    let bwd = half_orbit(sys, eps, geom.tau, p, -1.0, 2.0 * span, opts)?;
    let g = [fwd.state[0] - bwd.state[0], fwd.state[1] - bwd.state[1]];
    Ok(Shot { g, fwd, bwd })
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.abs() > 1e-300) {
        return None;
    }
    Some([
        (r[0] * m[1][1] - m[0][1] * r[1]) / det,
        (m[0][0] * r[1] - r[0] * m[1][0]) / det,
    ])
}

fn newton_shoot(
    sys: &SystemSpec,
    geom: &ReducedGeometry,
    eps: f64,
    seed: [f64; 2],
    opts: &ShootingOptions,
) -> Result<PeriodicOrbit, ShootError> {
    let mut p = seed;
    let mut shot = shoot(sys, geom, eps, p, opts)?;
    let mut r = norm2(shot.g);
    let mut it = 0;
    while it < opts.max_iter && r > opts.residual_tol {
        it += 1;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut q = p;
            q[k] += opts.fd_step;
            let gk = shoot(sys, geom, eps, q, opts)?.g;
            jac[0][k] = (gk[0] - shot.g[0]) / opts.fd_step;
            jac[1][k] = (gk[1] - shot.g[1]) / opts.fd_step;
        }
        let Some(step) = solve2(jac, [-shot.g[0], -shot.g[1]]) else {
            break;
        };
        let mut lam = 1.0;
        let mut accepted = None;
        while lam > 1e-10 {
            let q = [p[0] + lam * step[0], p[1] + lam * step[1]];
            if let Ok(s) = shoot(sys, geom, eps, q, opts) {
                if norm2(s.g) < r {
                    accepted = Some((q, s));
                    break;
                }
            }
            lam *= 0.5;
        }
        let Some((q, s)) = accepted else { break };
        p = q;
        r = norm2(s.g);
        shot = s;
    }
    if r > opts.residual_tol.max(1e-9) {
        return Err(ShootError::Stalled {
            residual: r,
            iterations: it,
        });
    }
    let period = (shot.fwd.t - geom.tau) + (geom.tau - shot.bwd.t);
    Ok(PeriodicOrbit {
        p,
        tau: geom.tau,
        period,
        t_up: shot.fwd.t,
        closure_error: r,
        iterations: it,
        forward: shot.fwd.traj,
        backward: shot.bwd.traj,
    })
}

/// Periodic orbit through the section `z = 0` near `(x*, y*)`, by Newton on
/// the mismatch of a forward and a backward half orbit.
///
/// Candidates are `seeds` plus a linearized chart grid of half-width
/// `max(alpha/2, 2 eps)`; Newton starts from the three with the smallest
/// mismatch, best first.
pub fn shoot_periodic_orbit(
    map: &CanardMap<'_>,
    seeds: &[[f64; 2]],
    opts: &ShootingOptions,
) -> Result<PeriodicOrbit, ShootError> {
    let (sys, geom, eps) = (map.sys, map.geom, map.params.eps);
    let h = (0.5 * map.params.alpha).max(2.0 * eps);
    let n = opts.seed_grid.max(2);
    let mut candidates: Vec<[f64; 2]> = seeds.to_vec();
    for i in 0..n {
        for j in 0..n {
            let u = -h + 2.0 * h * i as f64 / (n - 1) as f64;
            let v = -h + 2.0 * h * j as f64 / (n - 1) as f64;
            candidates.push(map.chart.linear_inverse([u, v]));
        }
    }
    let mut last = None;
    let mut scored: Vec<(f64, [f64; 2])> = Vec::new();
    for p in candidates {
        match shoot(sys, geom, eps, p, opts) {
            Ok(s) => scored.push((norm2(s.g), p)),
            Err(e) => last = Some(e),
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &(_, p) in scored.iter().take(3) {
        match newton_shoot(sys, geom, eps, p, opts) {
            Ok(o) => return Ok(o),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(ShootError::NoCrossing {
        span: geom.sigma - geom.tau,
        direction: "forward",
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    Broyden,
    Subdivision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BroydenReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub best_point: [f64; 2],
    pub best_residual: f64,
    pub converged: bool,
}

/// Plain forward evaluation of `W` at the fixed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardCheck {
    pub s_eps: f64,
    pub case_tag: Case,
    pub exit: ExitKind,
    pub image: [f64; 2],
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Adherence {
    /// Width `c eps |ln eps|` of the excluded boundary layers.
    pub layer: f64,
    pub bound: f64,
    pub attractive_interval: [f64; 2],
    /// `max |z - x|` on the attractive interval; `None` when it is empty.
    pub attractive_max: Option<f64>,
    pub repulsive_interval: [f64; 2],
    /// `max |z + x|` on the repulsive interval; `None` when it is empty.
    pub repulsive_max: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CanardResult {
    pub eps: f64,
    pub alpha: f64,
    pub rho: f64,
    pub fixed_point: [f64; 2],
    pub uv: ChartPoint,
    pub inside: bool,
    pub period: f64,
    /// `|period - (sigma - tau)|`.
    pub period_defect: f64,
    pub closure_error: f64,
    /// `|p - W(p)|` with `W` evaluated along the assembled orbit.
    pub map_residual: f64,
    pub s_eps: f64,
    pub case_tag: Case,
    pub exit: ExitKind,
    pub t_tilde: f64,
    pub t_up: f64,
    pub stage: Stage,
    pub broyden: BroydenReport,
    pub degree: Option<DegreeReport>,
    pub forward: ForwardCheck,
    pub adherence: Adherence,
    pub shooting_iterations: usize,
    #[serde(skip)]
    pub orbit: PeriodicOrbit,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn residual_of(map: &CanardMap<'_>, p: [f64; 2]) -> Result<[f64; 2], MapError> {
    Ok(sub(p, map.map_w(p)?.image))
}

/// Broyden iteration on `F(p) = p - W(p)` in linearized chart coordinates,
/// seeded at the crossing point, with steps halved to stay inside the square.
fn broyden(map: &CanardMap<'_>, opts: &SolverOptions) -> BroydenReport {
    let chart = &map.chart;
    let par = Parallelogram::new(map.params.alpha, map.geom.sign_a());
    let point = |w: [f64; 2]| chart.linear_inverse(w);
    let inside = |p: [f64; 2]| chart.chart_uv(p).is_ok_and(|c| par.contains(c));
    let mut report = BroydenReport {
        iterations: 0,
        evaluations: 0,
        best_point: point([0.0, 0.0]),
        best_residual: f64::INFINITY,
        converged: false,
    };
    let mut w = [0.0, 0.0];
    let Ok(mut f) = residual_of(map, point(w)) else {
        return report;
    };
    report.evaluations += 1;
    report.best_residual = norm2(f);
    let h = opts.fd_factor * map.params.alpha;
    let mut jac = [[0.0; 2]; 2];
    for k in 0..2 {
        let mut wk = w;
        wk[k] += h;
        let Ok(fk) = residual_of(map, point(wk)) else {
            return report;
        };
        report.evaluations += 1;
        jac[0][k] = (fk[0] - f[0]) / h;
        jac[1][k] = (fk[1] - f[1]) / h;
    }
    for _ in 0..opts.broyden_max_iter {
        if norm2(f) <= opts.f_tol {
            report.converged = true;
            break;
        }
        report.iterations += 1;
        let Some(mut step) = solve2(jac, [-f[0], -f[1]]) else { break };
        let mut halvings = 0;
        while !inside(point([w[0] + step[0], w[1] + step[1]])) && halvings < 30 {
            step = [0.5 * step[0], 0.5 * step[1]];
            halvings += 1;
        }
        if norm2(step) < 1e-15 {
            break;
        }
        let w_new = [w[0] + step[0], w[1] + step[1]];
        let Ok(f_new) = residual_of(map, point(w_new)) else { break };
        report.evaluations += 1;
        let df = sub(f_new, f);
        let jd = [jac[0][0] * step[0] + jac[0][1] * step[1], jac[1][0] * step[0] + jac[1][1] * step[1]];
        let ss = step[0] * step[0] + step[1] * step[1];
        for i in 0..2 {
            for j in 0..2 {
                jac[i][j] += (df[i] - jd[i]) * step[j] / ss;
            }
        }
        w = w_new;
        f = f_new;
        if norm2(f) < report.best_residual {
            report.best_residual = norm2(f);
            report.best_point = point(w);
        }
    }
    report.converged = report.best_residual <= opts.f_tol;
    report
}

/// Exit time `s` along the assembled orbit, following the same rule as
/// [`CanardMap::s_time`]: the first `t >= t~ + rho` with `z <= 0`, capped at `T_r`.
fn exit_on_orbit(orbit: &PeriodicOrbit, activation: f64, t_r: f64) -> (f64, ExitKind) {
    if activation <= orbit.t_up {
        (activation.min(t_r), ExitKind::Activation)
    } else if activation < orbit.t_end() {
        if orbit.t_end() <= t_r {
            (orbit.t_end(), ExitKind::DownCrossing)
        } else {
            (t_r, ExitKind::Cap)
        }
    } else {
        (activation.min(t_r), ExitKind::Activation)
    }
}

fn adherence(orbit: &PeriodicOrbit, t_tilde: f64, s: f64, eps: f64, m_est: f64, opts: &SolverOptions) -> Adherence {
    let layer = opts.layer_factor * eps * eps.ln().abs();
    let bound = opts.adherence_slack * m_est * eps;
    let att = [orbit.tau + layer, t_tilde - layer];
    let rep = [orbit.t_up + layer, s - layer];
    let samples = orbit.samples(1e-3);
    let max_over = |iv: [f64; 2], f: &dyn Fn(&[f64; 3]) -> f64| -> Option<f64> {
        if iv[1] <= iv[0] {
            return None;
        }
        samples
            .iter()
            .filter(|(t, _)| *t >= iv[0] && *t <= iv[1])
            .map(|(_, st)| f(st))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    let attractive_max = max_over(att, &|st| (st[2] - st[0]).abs());
    let repulsive_max = max_over(rep, &|st| (st[2] + st[0]).abs());
    let ok = attractive_max.is_none_or(|m| m <= bound) && repulsive_max.is_none_or(|m| m <= bound);
    Adherence {
        layer,
        bound,
        attractive_interval: att,
        attractive_max,
        repulsive_interval: rep,
        repulsive_max,
        ok,
    }
}

fn assemble(
    map: &CanardMap<'_>,
    orbit: PeriodicOrbit,
    stage: Stage,
    broyden: BroydenReport,
    degree: Option<DegreeReport>,
    opts: &SolverOptions,
) -> Result<CanardResult, SolverError> {
    let (geom, params) = (map.geom, &map.params);
    let p = orbit.p;
    let uv = map.chart.chart_uv(p)?;
    let par = Parallelogram::new(params.alpha, geom.sign_a());
    let t_tilde = tilde_t(map.sys, geom, p)?.t;
    let (s, exit) = exit_on_orbit(&orbit, t_tilde + params.rho, geom.t_r);
    let case_tag = Case::from_s(s, geom.sigma, params.alpha);
    let curve = |t: f64| geom.gamma_r.at(t).unwrap_or([f64::NAN; 2]);
    let on_orbit = |t: f64| orbit.state(t).map_or([f64::NAN; 2], |st| [st[0], st[1]]);
    let map_residual = match case_tag {
        // The orbit returns to `p` exactly at `tau + period` up to the
        // mismatch of its two halves.
        Case::Case1 if exit == ExitKind::DownCrossing => orbit.closure_error,
        Case::Case1 => norm2(sub(p, on_orbit(s))),
        Case::Case2 => {
            let d = (s - geom.sigma).abs();
            let (w1, w2) = ((2.0 * params.alpha - d) / params.alpha, (d - params.alpha) / params.alpha);
            let (a, b) = (on_orbit(s), curve(s));
            norm2(sub(p, [w1 * a[0] + w2 * b[0], w1 * a[1] + w2 * b[1]]))
        }
        Case::Case3 => norm2(sub(p, curve(geom.sigma + 2.0 * params.alpha))),
        Case::Case4 => norm2(sub(p, curve(geom.sigma - 2.0 * params.alpha))),
    };
    let fwd = map.map_w(p)?;
    let forward = ForwardCheck {
        s_eps: fwd.s_eps,
        case_tag: fwd.case_tag,
        exit: fwd.exit,
        image: fwd.image,
        residual: norm2(sub(p, fwd.image)),
    };
    let adherence = adherence(&orbit, t_tilde, s, params.eps, params.full.m_est, opts);
    Ok(CanardResult {
        eps: params.eps,
        alpha: params.alpha,
        rho: params.rho,
        fixed_point: p,
        uv,
        inside: par.contains(uv),
        period: orbit.period,
        period_defect: (orbit.period - (geom.sigma - geom.tau)).abs(),
        closure_error: orbit.closure_error,
        map_residual,
        s_eps: s,
        case_tag,
        exit,
        t_tilde,
        t_up: orbit.t_up,
        stage,
        broyden,
        degree,
        forward,
        adherence,
        shooting_iterations: orbit.iterations,
        orbit,
    })
}

fn accept(result: CanardResult, opts: &SolverOptions) -> Result<CanardResult, SolverError> {
    let mut why = Vec::new();
    if result.case_tag != Case::Case1 {
        why.push(format!(
            "the orbit exits as {} (s = {}, t~ + rho = {}, z up-crossing at {})",
            result.case_tag.label(),
            result.s_eps,
            result.t_tilde + result.rho,
            result.t_up
        ));
    }
    if !result.inside {
        why.push(format!("chart point ({}, {}) is outside the square", result.uv.u, result.uv.v));
    }
    if !(result.closure_error <= opts.closure_tol) {
        why.push(format!("closure error {:e} above {:e}", result.closure_error, opts.closure_tol));
    }
    if !(result.map_residual <= opts.f_tol.max(opts.closure_tol)) {
        why.push(format!("|p - W(p)| = {:e}", result.map_residual));
    }
    if why.is_empty() {
        Ok(result)
    } else {
        Err(SolverError::NoConvergence {
            message: format!("periodic orbit found, but it is not a fixed point of W: {}", why.join("; ")),
            orbit: Some(Box::new(result.orbit.summary())),
        })
    }
}

/// Smallest sub-rectangle with nonzero degree, by repeated quartering.
fn subdivide(map: &CanardMap<'_>, root: ChartRect, opts: &SolverOptions) -> Option<ChartRect> {
    let mut rect = root;
    let winding = WindingOptions {
        allow_uncertified: true,
        ..opts.winding
    };
    while rect.diameter() >= opts.min_diameter {
        let quarters = rect.quarters();
        let degrees: Vec<Option<i64>> = quarters
            .par_iter()
            .map(|q| {
                degree_on_rect(map, opts.degree_route, *q, opts.sub_per_side, &winding)
                    .ok()
                    .map(|d| d.degree)
            })
            .collect();
        let next = quarters.iter().zip(&degrees).find(|(_, d)| d.is_some_and(|d| d != 0));
        match next {
            Some((q, _)) => rect = *q,
            None => return None,
        }
    }
    Some(rect)
}

/// Fixed point of `W` in the chart square and the periodic canard through it.
///
/// Broyden on `p - W(p)` supplies a seed; the orbit is then polished by
/// two-sided shooting, since forward integration alone cannot follow the
/// repulsive sheet for long. When that fails, the degree of `id - W` is
/// used to subdivide the square down to a seed.
pub fn find_fixed_point(map: &CanardMap<'_>, opts: &SolverOptions) -> Result<CanardResult, SolverError> {
    let geom = map.geom;
    let par = Parallelogram::new(map.params.alpha, geom.sign_a());
    let mut degree = None;
    if opts.check_degree {
        let d = crate::degree::degree_w(map, opts.degree_route, opts.n_per_side, &opts.winding)?;
        if d.degree == 0 {
            return Err(SolverError::DegreeZero { degree: 0 });
        }
        degree = Some(d);
    }
    let br = broyden(map, opts);
    let star = geom.star();
    let seeds = [star, br.best_point];
    if let Ok(orbit) = shoot_periodic_orbit(map, &seeds, &opts.shooting) {
        let result = assemble(map, orbit, Stage::Broyden, br, degree, opts)?;
        return accept(result, opts);
    }
    let root = ChartRect::square(&par);
    let d = match degree {
        Some(d) => d,
        None => crate::degree::degree_w(
            map,
            opts.degree_route,
            opts.n_per_side,
            &WindingOptions {
                allow_uncertified: true,
                ..opts.winding
            },
        )?,
    };
    if d.degree == 0 {
        return Err(SolverError::DegreeZero { degree: 0 });
    }
    let Some(rect) = subdivide(map, root, opts) else {
        return Err(SolverError::NoConvergence {
            message: "no sub-rectangle with nonzero degree".into(),
            orbit: None,
        });
    };
    let seed = map.chart.chart_inverse(
        ChartPoint::new(rect.center[0], rect.center[1]),
        map.chart.linear_inverse(rect.center),
    )?;
    match shoot_periodic_orbit(map, &[seed], &opts.shooting) {
        Ok(orbit) => accept(assemble(map, orbit, Stage::Subdivision, br, Some(d), opts)?, opts),
        Err(e) => Err(SolverError::NoConvergence {
            message: format!("shooting from the subdivision seed failed: {e}"),
            orbit: None,
        }),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    /// Period of the fixed point of `W`, when one was found.
    pub period: Option<f64>,
    pub period_defect: Option<f64>,
    pub uv_norm: Option<f64>,
    pub closure_error: Option<f64>,
    pub case_tag: Option<Case>,
    /// Period of the shooting orbit, also when it failed the fixed-point
    /// conditions.
    pub orbit_period: Option<f64>,
    pub orbit_defect: Option<f64>,
    pub error: Option<String>,
}

/// One independent solve per `eps`; failures are recorded per row.
pub fn period_sweep(
    sys: &SystemSpec,
    geom: &ReducedGeometry,
    base: &MapParams,
    eps_list: &[f64],
    opts: &SolverOptions,
) -> Vec<SweepRow> {
    let target = geom.sigma - geom.tau;
    eps_list
        .par_iter()
        .map(|&eps| {
            let mut row = SweepRow {
                eps,
                period: None,
                period_defect: None,
                uv_norm: None,
                closure_error: None,
                case_tag: None,
                orbit_period: None,
                orbit_defect: None,
                error: None,
            };
            let params = MapParams { eps, ..*base };
            let map = match CanardMap::new(sys, geom, params) {
                Ok(m) => m,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            };
            match find_fixed_point(&map, opts) {
                Ok(r) => {
                    row.period = Some(r.period);
                    row.period_defect = Some(r.period_defect);
                    row.uv_norm = Some(r.uv.u.hypot(r.uv.v));
                    row.closure_error = Some(r.closure_error);
                    row.case_tag = Some(r.case_tag);
                    row.orbit_period = Some(r.period);
                    row.orbit_defect = Some(r.period_defect);
                }
                Err(e) => {
                    if let SolverError::NoConvergence { orbit: Some(o), .. } = &e {
                        row.orbit_period = Some(o.period);
                        row.orbit_defect = Some((o.period - target).abs());
                        row.closure_error = Some(o.closure_error);
                    }
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A0Result {
    pub a0: f64,
    pub bracket: [f64; 2],
    pub iterations: usize,
}

/// Whether the canonical curves have a transversal crossing for this system.
fn has_crossing(sys: &SystemSpec, gopts: &GeometryOptions) -> Result<bool, SolverError> {
    match compute_geometry(sys, gopts) {
        Ok(_) => Ok(true),
        Err(GeometryError::NoIntersection { .. }) | Err(GeometryError::DegenerateTangency { .. }) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// Bisection for the smallest parameter value with a transversal crossing.
pub fn find_a0<F>(family: F, bracket: (f64, f64), tol_a: f64, gopts: &GeometryOptions) -> Result<A0Result, SolverError>
where
    F: Fn(f64) -> Result<SystemSpec, SystemError>,
{
    let (mut lo, mut hi) = bracket;
    let at_lo = has_crossing(&family(lo)?, gopts)?;
    let at_hi = has_crossing(&family(hi)?, gopts)?;
    if at_lo || !at_hi {
        return Err(SolverError::BadBracket { lo, hi, at_lo, at_hi });
    }
    let mut iterations = 0;
    while hi - lo > tol_a {
        let mid = 0.5 * (lo + hi);
        if has_crossing(&family(mid)?, gopts)? {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(A0Result {
        a0: 0.5 * (lo + hi),
        bracket: [lo, hi],
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve2_inverts() {
        let x = solve2([[2.0, 1.0], [1.0, 3.0]], [3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        assert!(solve2([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0]).is_none());
    }
}
