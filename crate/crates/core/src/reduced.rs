//! Canonical reduced curves through the origin, their crossing, the flow-time
//! chart around it, and the stabilizing/destabilizing classification.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::integrate::{
    integrate_reduced, Direction, EventSpec, IntegrateError, Options, Status, Trajectory,
};
use crate::system::{ReducedKind, SystemError, SystemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no intersection of the canonical curves within horizon {horizon}")]
    NoIntersection { horizon: f64 },
    #[error("degenerate tangency: |A| = {a:e} below threshold (tau = {tau}, sigma = {sigma})")]
    DegenerateTangency { a: f64, tau: f64, sigma: f64 },
    #[error("intersection index {index} requested but only {count} found")]
    BadIndex { index: usize, count: usize },
    #[error("ordering T_a < tau < 0 < sigma < T_r violated: {0}")]
    Ordering(String),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("chart out of range at {point:?}: no hit of the {target} curve within |t| <= {window}")]
    OutOfRange {
        point: [f64; 2],
        target: &'static str,
        window: f64,
    },
    #[error("chart inverse did not converge for (u, v) = {uv:?}; residual {residual:e}")]
    NoConvergence { uv: [f64; 2], residual: f64 },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrossingError {
    #[error("no crossing of R in the search window from {p0:?}")]
    NoCrossing { p0: [f64; 2] },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryOptions {
    pub horizon: f64,
    pub tol: f64,
    /// Threshold below which `|A|` counts as tangency.
    pub tol_a: f64,
    /// Maximum distance between consecutive polyline points.
    pub spacing: f64,
    /// Which crossing to use, ordered by increasing `sigma`.
    pub intersection_index: usize,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions {
            horizon: 10.0,
            tol: 1e-12,
            tol_a: 1e-8,
            spacing: 1e-3,
            intersection_index: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub p: [f64; 2],
}

/// A reduced trajectory through the origin at `t = 0`.
#[derive(Debug, Clone)]
pub struct CanonicalCurve {
    pub kind: ReducedKind,
    pub traj: Trajectory<2>,
    /// Ordered from the origin outwards.
    pub points: Vec<CurvePoint>,
    /// `T_a` or `T_r`.
    pub t_limit: f64,
}

impl CanonicalCurve {
    fn build(
        sys: &SystemSpec,
        kind: ReducedKind,
        opts: &GeometryOptions,
    ) -> Result<CanonicalCurve, GeometryError> {
        let t1 = match kind {
            ReducedKind::Attractive => -opts.horizon,
            ReducedKind::Repulsive => opts.horizon,
        };
        let ev = [EventSpec::new("x=0", Direction::Any, true, |_, p: &[f64; 2]| p[0])];
        let iopts = Options {
            tol: opts.tol,
            event_dt: 1e-13,
            event_value_tol: 1e-8,
            max_step: 0.05,
            ..Options::default()
        };
        let traj = integrate_reduced(sys, kind, [0.0, 0.0], 0.0, t1, &ev, &iopts)?;
        let t_limit = match traj.status {
            Status::Terminal => traj.t_end(),
            _ => t1,
        };
        let mut points = Vec::new();
        for (i, seg) in traj.segments.iter().enumerate() {
            let a = traj.states[i];
            let b = traj.states[i + 1];
            let speed_a = norm(sys.reduced_rhs(kind, a)?);
            let speed_b = norm(sys.reduced_rhs(kind, b)?);
            let arc = (seg.h * seg.theta_end).abs() * speed_a.max(speed_b);
            let k = ((arc.max(norm(sub(b, a))) / opts.spacing * 1.25).ceil() as usize).max(1);
            if i == 0 {
                points.push(CurvePoint { t: traj.times[0], p: a });
            }
            for j in 1..k {
                let theta = seg.theta_end * j as f64 / k as f64;
                points.push(CurvePoint {
                    t: seg.t0 + theta * seg.h,
                    p: seg.eval_theta(theta),
                });
            }
            points.push(CurvePoint { t: traj.times[i + 1], p: b });
        }
        if points.is_empty() {
            points.push(CurvePoint { t: 0.0, p: [0.0, 0.0] });
        }
        Ok(CanonicalCurve {
            kind,
            traj,
            points,
            t_limit,
        })
    }

    /// Dense-output point at time `t`.
    pub fn at(&self, t: f64) -> Option<[f64; 2]> {
        self.traj.eval(t)
    }

    /// Polyline points with `t` in `[t_lo, t_hi]`.
    pub fn window(&self, t_lo: f64, t_hi: f64) -> Vec<CurvePoint> {
        self.points
            .iter()
            .filter(|c| c.t >= t_lo && c.t <= t_hi)
            .copied()
            .collect()
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Solves `[c0 c1] x = rhs` for 2x2 column matrix.
pub(crate) fn solve2(c0: [f64; 2], c1: [f64; 2], rhs: [f64; 2]) -> Option<[f64; 2]> {
    let det = cross(c0, c1);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([cross(rhs, c1) / det, cross(c0, rhs) / det])
}

#[derive(Debug, Clone)]
pub struct ReducedGeometry {
    pub gamma_a: CanonicalCurve,
    pub gamma_r: CanonicalCurve,
    pub t_a: f64,
    pub t_r: f64,
    pub tau: f64,
    pub sigma: f64,
    pub x_star: f64,
    pub y_star: f64,
    /// Transversality number `f_a g_r - f_r g_a` at the crossing.
    pub a: f64,
    /// All refined crossings `(tau, sigma)` in order of increasing `sigma`.
    pub crossings: Vec<(f64, f64)>,
    pub options: GeometryOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySummary {
    #[serde(rename = "T_a")]
    pub t_a: f64,
    #[serde(rename = "T_r")]
    pub t_r: f64,
    pub tau: f64,
    pub sigma: f64,
    pub x_star: f64,
    pub y_star: f64,
    #[serde(rename = "A")]
    pub a: f64,
}

impl ReducedGeometry {
    pub fn star(&self) -> [f64; 2] {
        [self.x_star, self.y_star]
    }

    pub fn sign_a(&self) -> f64 {
        self.a.signum()
    }

    pub fn summary(&self) -> GeometrySummary {
        GeometrySummary {
            t_a: self.t_a,
            t_r: self.t_r,
            tau: self.tau,
            sigma: self.sigma,
            x_star: self.x_star,
            y_star: self.y_star,
            a: self.a,
        }
    }
}

fn segment_intersection(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> Option<(f64, f64)> {
    let r = sub(p1, p0);
    let s = sub(q1, q0);
    let denom = cross(r, s);
    if denom == 0.0 {
        return None;
    }
    let qp = sub(q0, p0);
    let lam = cross(qp, s) / denom;
    let mu = cross(qp, r) / denom;
    if (0.0..=1.0).contains(&lam) && (0.0..=1.0).contains(&mu) {
        Some((lam, mu))
    } else {
        None
    }
}

/// Segment indices bucketed by grid cell.
struct SegmentGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SegmentGrid {
    fn new(pts: &[[f64; 2]], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for i in 0..pts.len().saturating_sub(1) {
            let (a, b) = (pts[i], pts[i + 1]);
            let (i0, j0) = cell_of(a[0].min(b[0]), a[1].min(b[1]), cell);
            let (i1, j1) = cell_of(a[0].max(b[0]), a[1].max(b[1]), cell);
            for ci in i0..=i1 {
                for cj in j0..=j1 {
                    buckets.entry((ci, cj)).or_default().push(i);
                }
            }
        }
        SegmentGrid { cell, buckets }
    }

    fn candidates(&self, a: [f64; 2], b: [f64; 2], out: &mut Vec<usize>) {
        out.clear();
        let (i0, j0) = cell_of(a[0].min(b[0]), a[1].min(b[1]), self.cell);
        let (i1, j1) = cell_of(a[0].max(b[0]), a[1].max(b[1]), self.cell);
        for ci in i0..=i1 {
            for cj in j0..=j1 {
                if let Some(v) = self.buckets.get(&(ci, cj)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

fn cell_of(x: f64, y: f64, cell: f64) -> (i64, i64) {
    ((x / cell).floor() as i64, (y / cell).floor() as i64)
}

/// Builds both canonical curves and their selected transversal crossing.
pub fn compute_geometry(
    sys: &SystemSpec,
    opts: &GeometryOptions,
) -> Result<ReducedGeometry, GeometryError> {
    let [f0, g0] = sys.fg([0.0; 3])?;
    if f0.abs() > 1e-12 || !(g0 > 0.0) {
        return Err(GeometryError::Precondition(format!(
            "need f(0,0,0) = 0 and g(0,0,0) > 0, got f = {f0}, g = {g0}"
        )));
    }
    let gamma_a = CanonicalCurve::build(sys, ReducedKind::Attractive, opts)?;
    let gamma_r = CanonicalCurve::build(sys, ReducedKind::Repulsive, opts)?;

    let pa: Vec<[f64; 2]> = gamma_a.points.iter().map(|c| c.p).collect();
    let pr: Vec<[f64; 2]> = gamma_r.points.iter().map(|c| c.p).collect();
    let grid = SegmentGrid::new(&pa, 0.05);
    let mut raw = Vec::new();
    let mut cand = Vec::new();
    for j in 0..pr.len().saturating_sub(1) {
        grid.candidates(pr[j], pr[j + 1], &mut cand);
        for &i in &cand {
            if let Some((lam, mu)) = segment_intersection(pa[i], pa[i + 1], pr[j], pr[j + 1]) {
                let hit = [
                    pa[i][0] + lam * (pa[i + 1][0] - pa[i][0]),
                    pa[i][1] + lam * (pa[i + 1][1] - pa[i][1]),
                ];
                if norm(hit) <= 1e-9 {
                    continue;
                }
                let ta = gamma_a.points[i].t + lam * (gamma_a.points[i + 1].t - gamma_a.points[i].t);
                let tr = gamma_r.points[j].t + mu * (gamma_r.points[j + 1].t - gamma_r.points[j].t);
                raw.push((ta, tr));
            }
        }
    }

    let mut refined: Vec<(f64, f64)> = Vec::new();
    for (ta, tr) in raw {
        let Some((ta, tr)) = refine_crossing(sys, &gamma_a, &gamma_r, ta, tr) else {
            continue;
        };
        if !(ta > gamma_a.t_limit && ta < 0.0 && tr > 0.0 && tr < gamma_r.t_limit) {
            continue;
        }
        if refined
            .iter()
            .all(|&(a, r)| (a - ta).abs() > 1e-7 || (r - tr).abs() > 1e-7)
        {
            refined.push((ta, tr));
        }
    }
    refined.sort_by(|a, b| a.1.total_cmp(&b.1));
    if refined.is_empty() {
        return Err(GeometryError::NoIntersection {
            horizon: opts.horizon,
        });
    }
    let Some(&(tau, sigma)) = refined.get(opts.intersection_index) else {
        return Err(GeometryError::BadIndex {
            index: opts.intersection_index,
            count: refined.len(),
        });
    };
    let pa_star = gamma_a.at(tau).expect("tau within curve");
    let pr_star = gamma_r.at(sigma).expect("sigma within curve");
    let star = [0.5 * (pa_star[0] + pr_star[0]), 0.5 * (pa_star[1] + pr_star[1])];
    let a = sys.transversality(star)?;
    if a.abs() < opts.tol_a {
        return Err(GeometryError::DegenerateTangency { a, tau, sigma });
    }
    let (t_a, t_r) = (gamma_a.t_limit, gamma_r.t_limit);
    if !(t_a < tau && tau < 0.0 && 0.0 < sigma && sigma < t_r) {
        return Err(GeometryError::Ordering(format!(
            "T_a = {t_a}, tau = {tau}, sigma = {sigma}, T_r = {t_r}"
        )));
    }
    Ok(ReducedGeometry {
        gamma_a,
        gamma_r,
        t_a,
        t_r,
        tau,
        sigma,
        x_star: star[0],
        y_star: star[1],
        a,
        crossings: refined,
        options: *opts,
    })
}

/// Newton on `(t_a, t_r) -> w_a(t_a) - w_r(t_r)` using dense output.
fn refine_crossing(
    sys: &SystemSpec,
    ga: &CanonicalCurve,
    gr: &CanonicalCurve,
    mut ta: f64,
    mut tr: f64,
) -> Option<(f64, f64)> {
    for _ in 0..30 {
        let pa = ga.at(ta)?;
        let pr = gr.at(tr)?;
        let resid = sub(pa, pr);
        let fa = sys.reduced_rhs(ReducedKind::Attractive, pa).ok()?;
        let fr = sys.reduced_rhs(ReducedKind::Repulsive, pr).ok()?;
        let [da, dr] = solve2(fa, [-fr[0], -fr[1]], [-resid[0], -resid[1]])?;
        ta += da;
        tr += dr;
        if da.abs().max(dr.abs()) < 1e-15 * (1.0 + ta.abs().max(tr.abs())) || norm(resid) < 1e-15 {
            break;
        }
    }
    let resid = norm(sub(ga.at(ta)?, gr.at(tr)?));
    (resid < 1e-10).then_some((ta, tr))
}

/// Polyline with a grid accelerated nearest-segment query and a signed
/// distance whose sign comes from the curve normal at the closest point.
#[derive(Debug, Clone)]
pub struct LocalPolyline {
    pts: Vec<[f64; 2]>,
    ts: Vec<f64>,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

#[derive(Debug, Clone, Copy)]
pub struct Nearest {
    pub distance: f64,
    pub signed: f64,
    /// Curve time interpolated at the closest point.
    pub t: f64,
}

impl LocalPolyline {
    pub fn new(points: &[CurvePoint]) -> Self {
        let pts: Vec<[f64; 2]> = points.iter().map(|c| c.p).collect();
        let ts: Vec<f64> = points.iter().map(|c| c.t).collect();
        let cell = 0.01;
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for i in 0..pts.len().saturating_sub(1) {
            let (a, b) = (pts[i], pts[i + 1]);
            let (i0, j0) = cell_of(a[0].min(b[0]), a[1].min(b[1]), cell);
            let (i1, j1) = cell_of(a[0].max(b[0]), a[1].max(b[1]), cell);
            for ci in i0..=i1 {
                for cj in j0..=j1 {
                    buckets.entry((ci, cj)).or_default().push(i as u32);
                }
            }
        }
        LocalPolyline {
            pts,
            ts,
            cell,
            buckets,
        }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    fn seg_dist2(&self, i: usize, p: [f64; 2]) -> (f64, f64) {
        let a = self.pts[i];
        let d = sub(self.pts[i + 1], a);
        let len2 = dot(d, d);
        let lam = if len2 > 0.0 {
            (dot(sub(p, a), d) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = [a[0] + lam * d[0], a[1] + lam * d[1]];
        let e = sub(p, c);
        (dot(e, e), lam)
    }

    fn nearest_segment(&self, p: [f64; 2]) -> Option<(usize, f64)> {
        if self.pts.len() < 2 {
            return None;
        }
        let (ci, cj) = cell_of(p[0], p[1], self.cell);
        let mut best: Option<(f64, usize, f64)> = None;
        const RINGS: i64 = 12;
        for r in 0..=RINGS {
            for di in -r..=r {
                for dj in -r..=r {
                    if di.abs() != r && dj.abs() != r {
                        continue;
                    }
                    if let Some(list) = self.buckets.get(&(ci + di, cj + dj)) {
                        for &i in list {
                            let (d2, lam) = self.seg_dist2(i as usize, p);
                            if best.is_none_or(|b| d2 < b.0 || (d2 == b.0 && (i as usize) < b.1)) {
                                best = Some((d2, i as usize, lam));
                            }
                        }
                    }
                }
            }
            if let Some((d2, _, _)) = best {
                if d2.sqrt() <= r as f64 * self.cell {
                    return Some((best.unwrap().1, best.unwrap().2));
                }
            }
        }
        for i in 0..self.pts.len() - 1 {
            let (d2, lam) = self.seg_dist2(i, p);
            if best.is_none_or(|b| d2 < b.0) {
                best = Some((d2, i, lam));
            }
        }
        best.map(|b| (b.1, b.2))
    }

    pub fn nearest(&self, p: [f64; 2]) -> Option<Nearest> {
        let (i, lam) = self.nearest_segment(p)?;
        let a = self.pts[i];
        let b = self.pts[i + 1];
        let c = [a[0] + lam * (b[0] - a[0]), a[1] + lam * (b[1] - a[1])];
        let n = self.pts.len();
        let tangent = if lam <= 0.0 && i > 0 {
            sub(b, self.pts[i - 1])
        } else if lam >= 1.0 && i + 2 < n {
            sub(self.pts[i + 2], a)
        } else {
            sub(b, a)
        };
        let e = sub(p, c);
        let distance = norm(e);
        let side = cross(tangent, e);
        let signed = if side >= 0.0 { distance } else { -distance };
        Some(Nearest {
            distance,
            signed,
            t: self.ts[i] + lam * (self.ts[i + 1] - self.ts[i]),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartPoint {
    pub u: f64,
    pub v: f64,
}

impl ChartPoint {
    pub fn new(u: f64, v: f64) -> Self {
        ChartPoint { u, v }
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.u, self.v]
    }
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    t: f64,
    q: [f64; 2],
    offset: f64,
}

/// Flow-time chart `(u, v)` around the crossing point.
#[derive(Debug, Clone)]
pub struct Chart<'a> {
    sys: &'a SystemSpec,
    geom: &'a ReducedGeometry,
    /// Flow-time search window for both coordinates.
    pub window: f64,
    target_r: LocalPolyline,
    target_a: LocalPolyline,
    /// `d(x, y) / d(u, v)` at the crossing point: columns `-F_a`, `-F_r`.
    lin_inverse: [[f64; 2]; 2],
    tol: f64,
}

impl<'a> Chart<'a> {
    /// Chart able to resolve points whose flow times stay within `window`.
    pub fn new(sys: &'a SystemSpec, geom: &'a ReducedGeometry, window: f64) -> Result<Self, ChartError> {
        let reach = 2.0 * window + 0.25;
        let r_lo = (geom.sigma - reach).max(0.0);
        let r_hi = (geom.sigma + reach).min(geom.t_r);
        let a_lo = (geom.tau - reach).max(geom.t_a);
        let a_hi = (geom.tau + reach).min(0.0);
        let target_r = LocalPolyline::new(&geom.gamma_r.window(r_lo, r_hi));
        let target_a = LocalPolyline::new(&geom.gamma_a.window(a_lo, a_hi));
        let star = geom.star();
        let fa = sys.reduced_rhs(ReducedKind::Attractive, star)?;
        let fr = sys.reduced_rhs(ReducedKind::Repulsive, star)?;
        Ok(Chart {
            sys,
            geom,
            window,
            target_r,
            target_a,
            lin_inverse: [[-fa[0], -fr[0]], [-fa[1], -fr[1]]],
            tol: 1e-12,
        })
    }

    /// Chart with the default window `2.5 alpha`, enough to reach the Case 3
    /// and Case 4 images at `v = -+2 alpha`.
    pub fn for_alpha(sys: &'a SystemSpec, geom: &'a ReducedGeometry, alpha: f64) -> Result<Self, ChartError> {
        Chart::new(sys, geom, 2.5 * alpha)
    }

    pub fn geometry(&self) -> &ReducedGeometry {
        self.geom
    }

    pub fn system(&self) -> &SystemSpec {
        self.sys
    }

    /// First-order state-space point for chart coordinates `uv`.
    pub fn linear_inverse(&self, uv: [f64; 2]) -> [f64; 2] {
        let m = &self.lin_inverse;
        [
            self.geom.x_star + m[0][0] * uv[0] + m[0][1] * uv[1],
            self.geom.y_star + m[1][0] * uv[0] + m[1][1] * uv[1],
        ]
    }

    fn target(&self, flow: ReducedKind) -> (&LocalPolyline, &CanonicalCurve, &'static str, f64) {
        match flow {
            ReducedKind::Attractive => (&self.target_r, &self.geom.gamma_r, "repulsive", self.geom.sigma),
            ReducedKind::Repulsive => (&self.target_a, &self.geom.gamma_a, "attractive", self.geom.tau),
        }
    }

    fn flow_options(&self) -> Options {
        Options {
            tol: self.tol,
            event_dt: 1e-12,
            event_value_tol: 1e-13,
            max_step: 0.05,
            ..Options::default()
        }
    }

    /// All hits of the target arc by `flow` from `p` within the window, as
    /// `(flow time, hit state, target time - center)`.
    fn hits(&self, flow: ReducedKind, p: [f64; 2]) -> Result<Vec<Hit>, ChartError> {
        let (target, _, _, center) = self.target(flow);
        // Only the arc of the target within `window` of the crossing counts;
        // other turns of a spiralling curve are ignored.
        let on_arc = |n: &Nearest| n.distance < 1e-6 && (n.t - center).abs() <= self.window;
        let opts = self.flow_options();
        let mut out = Vec::new();
        if let Some(near) = target.nearest(p) {
            if near.distance <= 1e-9 && on_arc(&near) {
                out.push(Hit {
                    t: 0.0,
                    q: p,
                    offset: near.t - center,
                });
            }
        }
        for dir in [1.0, -1.0] {
            // Sign flips of the signed distance away from the curve
            // (between two nearby turns) are not hits.
            let ev = [EventSpec::new("hit", Direction::Any, false, |_, q: &[f64; 2]| {
                target.nearest(*q).map_or(f64::NAN, |n| n.signed)
            })
            .with_filter(|_, q: &[f64; 2]| target.nearest(*q).is_some_and(|n| on_arc(&n)))];
            let tr = integrate_reduced(self.sys, flow, p, 0.0, dir * self.window, &ev, &opts)?;
            for e in &tr.events {
                if out.iter().any(|h: &Hit| (h.t - e.t).abs() < 1e-9) {
                    continue;
                }
                if let Some(n) = target.nearest(e.state) {
                    out.push(Hit {
                        t: e.t,
                        q: e.state,
                        offset: n.t - center,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Newton polish of a hit on the exact curve.
    fn polish(&self, flow: ReducedKind, hit: Hit) -> Result<f64, ChartError> {
        let (target, curve, _, _) = self.target(flow);
        let opts = self.flow_options();
        let (mut t, mut q) = (hit.t, hit.q);
        let mut s = target.nearest(q).map_or(0.0, |n| n.t);
        for _ in 0..8 {
            let Some(gs) = curve.at(s) else { break };
            let resid = sub(q, gs);
            if norm(resid) < 1e-14 {
                break;
            }
            let fq = self.sys.reduced_rhs(flow, q)?;
            let fg = self.sys.reduced_rhs(curve.kind, gs)?;
            let Some([dt, ds]) = solve2(fq, [-fg[0], -fg[1]], [-resid[0], -resid[1]]) else {
                break;
            };
            if dt.abs() > 0.1 {
                break;
            }
            let step = integrate_reduced(self.sys, flow, q, t, t + dt, &[], &opts)?;
            q = step.last();
            t += dt;
            s += ds;
            if dt.abs() < 1e-15 && ds.abs() < 1e-15 {
                break;
            }
        }
        Ok(t)
    }

    /// Chart coordinates of `p`.
    ///
    /// Each coordinate may have several hits on a spiralling target. To first
    /// order the `u` hit lands at target time `sigma - v` and the `v` hit at
    /// `tau - u`; the pair most consistent with that is the local branch.
    pub fn chart_uv(&self, p: [f64; 2]) -> Result<ChartPoint, ChartError> {
        let hu = self.hits(ReducedKind::Attractive, p)?;
        let hv = self.hits(ReducedKind::Repulsive, p)?;
        let mut best: Option<(f64, Hit, Hit)> = None;
        for a in &hu {
            for b in &hv {
                let c = (a.offset + b.t).abs() + (b.offset + a.t).abs() + 1e-3 * (a.t.abs() + b.t.abs());
                if best.as_ref().is_none_or(|x| c < x.0) {
                    best = Some((c, *a, *b));
                }
            }
        }
        let Some((_, a, b)) = best else {
            let target = if hu.is_empty() { "repulsive" } else { "attractive" };
            return Err(ChartError::OutOfRange {
                point: p,
                target,
                window: self.window,
            });
        };
        Ok(ChartPoint {
            u: self.polish(ReducedKind::Attractive, a)?,
            v: self.polish(ReducedKind::Repulsive, b)?,
        })
    }

    /// Newton from `seed`; on failure, continuation along the straight uv
    /// path from the crossing point with 4, 8, then 16 stages.
    pub fn chart_inverse(&self, uv: ChartPoint, seed: [f64; 2]) -> Result<[f64; 2], ChartError> {
        let direct = self.chart_inverse_with(uv, seed, 1e-8, 50);
        if direct.is_ok() {
            return direct;
        }
        for stages in [4usize, 8, 16] {
            let mut p = self.geom.star();
            let mut ok = true;
            for k in 1..=stages {
                let w = k as f64 / stages as f64;
                let mid = ChartPoint {
                    u: w * uv.u,
                    v: w * uv.v,
                };
                let tol = if k == stages { 1e-8 } else { 1e-6 };
                match self.chart_inverse_with(mid, p, tol, 30) {
                    Ok(q) => p = q,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Ok(p);
            }
        }
        direct
    }

    /// Newton iteration with a finite-difference Jacobian of `chart_uv`.
    pub fn chart_inverse_with(
        &self,
        uv: ChartPoint,
        seed: [f64; 2],
        tol: f64,
        max_iter: usize,
    ) -> Result<[f64; 2], ChartError> {
        let target = uv.as_array();
        let mut p = seed;
        let mut c = self.chart_uv(p);
        if c.is_err() {
            p = self.linear_inverse(target);
            c = self.chart_uv(p);
        }
        let mut c = c?.as_array();
        let mut r = sub(c, target);
        let mut rn = r[0].abs().max(r[1].abs());
        let mut jac: Option<[[f64; 2]; 2]> = None;
        for _ in 0..max_iter {
            if rn <= tol {
                return Ok(p);
            }
            let j = match jac {
                Some(j) => j,
                None => {
                    let h = 1e-6;
                    let cx = self.chart_uv([p[0] + h, p[1]])?.as_array();
                    let cy = self.chart_uv([p[0], p[1] + h])?.as_array();
                    let j = [
                        [(cx[0] - c[0]) / h, (cy[0] - c[0]) / h],
                        [(cx[1] - c[1]) / h, (cy[1] - c[1]) / h],
                    ];
                    jac = Some(j);
                    j
                }
            };
            let Some(delta) = solve2([j[0][0], j[1][0]], [j[0][1], j[1][1]], [-r[0], -r[1]]) else {
                break;
            };
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..8 {
                let q = [p[0] + lambda * delta[0], p[1] + lambda * delta[1]];
                if let Ok(cq) = self.chart_uv(q) {
                    let cq = cq.as_array();
                    let rq = sub(cq, target);
                    let rqn = rq[0].abs().max(rq[1].abs());
                    if rqn < rn {
                        jac = None;
                        p = q;
                        c = cq;
                        r = rq;
                        rn = rqn;
                        improved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !improved {
                if jac.is_some() {
                    jac = None;
                    continue;
                }
                break;
            }
        }
        if rn <= tol {
            return Ok(p);
        }
        Err(ChartError::NoConvergence { uv: target, residual: rn })
    }
}

/// Chart square `|u|, |v| <= alpha / 2` and its sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Parallelogram {
    pub alpha: f64,
    pub sign_a: f64,
}

impl Parallelogram {
    pub fn new(alpha: f64, sign_a: f64) -> Self {
        Parallelogram { alpha, sign_a }
    }

    pub fn half(&self) -> f64 {
        0.5 * self.alpha
    }

    pub fn contains(&self, uv: ChartPoint) -> bool {
        uv.u.abs() < self.half() && uv.v.abs() < self.half()
    }

    /// Point at loop parameter `s` in `[0, 4]`, counterclockwise from
    /// `(-h, -h)`: bottom, right, top, left side.
    pub fn boundary_point(&self, s: f64) -> ChartPoint {
        let h = self.half();
        let s = s.rem_euclid(4.0);
        let side = (s.floor() as usize).min(3);
        let l = s - side as f64;
        let (u, v) = match side {
            0 => (-h + 2.0 * h * l, -h),
            1 => (h, -h + 2.0 * h * l),
            2 => (h - 2.0 * h * l, h),
            _ => (-h, h - 2.0 * h * l),
        };
        ChartPoint { u, v }
    }

    /// `4 n` loop parameters, `n` per side, starting at a corner.
    pub fn boundary_params(&self, n_per_side: usize) -> Vec<f64> {
        let n = n_per_side.max(1);
        (0..4 * n).map(|k| k as f64 / n as f64).collect()
    }

    fn side(&self, v_sign: f64, n: usize) -> Vec<ChartPoint> {
        let h = self.half();
        let n = n.max(2);
        (0..n)
            .map(|k| ChartPoint {
                u: -h + 2.0 * h * k as f64 / (n - 1) as f64,
                v: v_sign * h,
            })
            .collect()
    }

    /// Side on `v = (alpha/2) sgn A`.
    pub fn q_minus(&self, n: usize) -> Vec<ChartPoint> {
        self.side(self.sign_a, n)
    }

    /// Side on `v = -(alpha/2) sgn A`.
    pub fn q_plus(&self, n: usize) -> Vec<ChartPoint> {
        self.side(-self.sign_a, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    /// Crossing of `{x = 0, y <= 0}`.
    X,
    /// Crossing of `{y = 0, x <= 0}`.
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RCrossing {
    pub t: f64,
    pub point: [f64; 2],
    pub axis: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Class {
    Stabilizing,
    Destabilizing,
}

const T_MARGIN: f64 = 1e-3;

/// Crossings this close to the origin count as passing through the corner
/// of `R`. A trajectory grazing the origin can cross `x = 0` twice inside one
/// step, so only its `y = 0` crossing is seen, with a tiny positive `x`.
const CORNER_TOL: f64 = 1e-6;

fn r_events<'a>() -> [EventSpec<'a, 2>; 2] {
    [
        EventSpec::new("x=0", Direction::Any, false, |_, p: &[f64; 2]| p[0])
            .with_filter(|_, p: &[f64; 2]| p[1] <= CORNER_TOL),
        EventSpec::new("y=0", Direction::Any, false, |_, p: &[f64; 2]| p[1])
            .with_filter(|_, p: &[f64; 2]| p[0] <= CORNER_TOL),
    ]
}

fn to_crossings(tr: &Trajectory<2>) -> Vec<RCrossing> {
    tr.events
        .iter()
        .map(|e| RCrossing {
            t: e.t,
            point: e.state,
            axis: if e.index == 0 { Axis::X } else { Axis::Y },
        })
        .collect()
}

/// Crossing of `R` by the attractive flow from `p0` at time `tau` whose time
/// is closest to zero.
pub fn tilde_t(sys: &SystemSpec, geom: &ReducedGeometry, p0: [f64; 2]) -> Result<RCrossing, CrossingError> {
    let opts = Options {
        tol: 1e-12,
        event_dt: 1e-12,
        event_value_tol: 1e-12,
        max_step: 0.05,
        ..Options::default()
    };
    let tau = geom.tau;
    let t_hi = geom.t_r - T_MARGIN;
    let t_lo = geom.t_a + T_MARGIN;
    let ev = r_events();
    let mut best: Option<RCrossing> = None;
    let consider = |c: RCrossing, best: &mut Option<RCrossing>| {
        if best.is_none_or(|b| c.t.abs() < b.t.abs()) {
            *best = Some(c);
        }
    };
    let first = integrate_reduced(sys, ReducedKind::Attractive, p0, tau, 0.0_f64.min(t_hi), &ev, &opts)?;
    for c in to_crossings(&first) {
        consider(c, &mut best);
    }
    let reach = best.map_or(t_hi, |b| b.t.abs().min(t_hi));
    if reach > 0.0 {
        let ev = r_events().map(|mut e| {
            e.terminal = true;
            e
        });
        let second = integrate_reduced(sys, ReducedKind::Attractive, first.last(), 0.0, reach, &ev, &opts)?;
        for c in to_crossings(&second) {
            consider(c, &mut best);
        }
    }
    let back_to = match best {
        Some(b) => (-b.t.abs()).max(t_lo),
        None => t_lo,
    };
    if back_to < tau {
        let ev = r_events().map(|mut e| {
            e.terminal = true;
            e
        });
        let third = integrate_reduced(sys, ReducedKind::Attractive, p0, tau, back_to, &ev, &opts)?;
        for c in to_crossings(&third) {
            consider(c, &mut best);
        }
    }
    best.ok_or(CrossingError::NoCrossing { p0 })
}

/// Destabilizing iff the crossing at `t~` is on `x = 0, y < 0`; a crossing
/// through the origin itself is decided by the sign of `A v`.
pub fn classify(chart: &Chart<'_>, p0: [f64; 2]) -> Result<(Class, RCrossing), CrossingError> {
    let geom = chart.geometry();
    let c = tilde_t(chart.system(), geom, p0)?;
    let corner = c.point[0].abs() <= CORNER_TOL && c.point[1].abs() <= CORNER_TOL;
    let class = if corner {
        let v = chart.chart_uv(p0)?.v;
        if geom.a * v > 0.0 {
            Class::Destabilizing
        } else {
            Class::Stabilizing
        }
    } else {
        match c.axis {
            Axis::X => Class::Destabilizing,
            Axis::Y => Class::Stabilizing,
        }
    };
    Ok((class, c))
}

/// `0.1 min(|tau|, sigma)`, halved until `chart_inverse` converges on every
/// boundary sample (at most five halvings).
pub fn default_alpha(sys: &SystemSpec, geom: &ReducedGeometry, n_check: usize) -> f64 {
    let mut alpha = 0.1 * geom.tau.abs().min(geom.sigma);
    for _ in 0..5 {
        if alpha_is_invertible(sys, geom, alpha, n_check) {
            return alpha;
        }
        alpha *= 0.5;
    }
    alpha
}

pub fn alpha_is_invertible(sys: &SystemSpec, geom: &ReducedGeometry, alpha: f64, n_check: usize) -> bool {
    let Ok(chart) = Chart::for_alpha(sys, geom, alpha) else {
        return false;
    };
    let par = Parallelogram::new(alpha, geom.sign_a());
    par.boundary_params(n_check).iter().all(|&s| {
        let uv = par.boundary_point(s);
        chart
            .chart_inverse(uv, chart.linear_inverse(uv.as_array()))
            .is_ok()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_intersection_basic() {
        let hit = segment_intersection([0.0, 0.0], [2.0, 2.0], [0.0, 2.0], [2.0, 0.0]).unwrap();
        assert!((hit.0 - 0.5).abs() < 1e-15 && (hit.1 - 0.5).abs() < 1e-15);
        assert!(segment_intersection([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]).is_none());
    }

    #[test]
    fn polyline_signed_distance() {
        let pts: Vec<CurvePoint> = (0..=100)
            .map(|i| CurvePoint {
                t: i as f64,
                p: [i as f64 * 0.01, 0.0],
            })
            .collect();
        let pl = LocalPolyline::new(&pts);
        let above = pl.nearest([0.505, 0.2]).unwrap();
        let below = pl.nearest([0.505, -0.2]).unwrap();
        assert!((above.signed - 0.2).abs() < 1e-12);
        assert!((below.signed + 0.2).abs() < 1e-12);
        assert!((above.t - 50.5).abs() < 1e-9);
        let far = pl.nearest([5.0, 1.0]).unwrap();
        assert!(far.distance > 4.0);
    }

    #[test]
    fn parallelogram_sides() {
        let par = Parallelogram::new(0.4, -1.0);
        assert_eq!(par.boundary_point(0.0), ChartPoint::new(-0.2, -0.2));
        assert_eq!(par.boundary_point(1.0), ChartPoint::new(0.2, -0.2));
        assert_eq!(par.boundary_point(2.0), ChartPoint::new(0.2, 0.2));
        assert_eq!(par.boundary_point(3.5), ChartPoint::new(-0.2, 0.0));
        assert!(par.q_minus(5).iter().all(|p| p.v == -0.2));
        assert!(par.q_plus(5).iter().all(|p| p.v == 0.2));
        assert!(par.contains(ChartPoint::new(0.1, -0.19)));
        assert!(!par.contains(ChartPoint::new(0.2, 0.0)));
    }
}
