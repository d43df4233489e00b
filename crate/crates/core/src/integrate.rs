//! Adaptive Dormand–Prince 5(4) integration with dense output and events.
//!
//! The full system is integrated with the sign of `z` frozen inside every
//! step. A step whose end state has `z` on the other side is cut back to the
//! localized crossing, the mode flips, and integration restarts there.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::system::{ReducedKind, SystemError, SystemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t} (h = {h:e}), last state {state:?}")]
    StepUnderflow { t: f64, h: f64, state: Vec<f64> },
    #[error("non-finite state at t = {t}: {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },
    #[error("step limit {max_steps} reached at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Up,
    Down,
    Any,
}

pub type EventFn<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>;
pub type AcceptFn<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> bool + 'a>;

pub struct EventSpec<'a, const N: usize> {
    pub id: String,
    pub func: EventFn<'a, N>,
    pub direction: Direction,
    pub terminal: bool,
    /// Located crossings failing this filter are neither logged nor terminal.
    pub accept: Option<AcceptFn<'a, N>>,
}

impl<'a, const N: usize> EventSpec<'a, N> {
    pub fn new(
        id: impl Into<String>,
        direction: Direction,
        terminal: bool,
        func: impl Fn(f64, &[f64; N]) -> f64 + 'a,
    ) -> Self {
        EventSpec {
            id: id.into(),
            func: Box::new(func),
            direction,
            terminal,
            accept: None,
        }
    }

    pub fn with_filter(mut self, accept: impl Fn(f64, &[f64; N]) -> bool + 'a) -> Self {
        self.accept = Some(Box::new(accept));
        self
    }

    fn crossed(&self, prev: f64, cur: f64) -> bool {
        let up = prev < 0.0 && cur >= 0.0;
        let down = prev > 0.0 && cur <= 0.0;
        match self.direction {
            Direction::Up => up,
            Direction::Down => down,
            Direction::Any => up || down,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord<const N: usize> {
    pub t: f64,
    pub id: String,
    pub index: usize,
    pub state: [f64; N],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Completed,
    Terminal,
    BlowUp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    /// Signed time step; negative for backward runs.
    pub h: f64,
    /// Fraction of the step actually used (below 1 when cut at a crossing).
    pub theta_end: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    pub fn eval_theta(&self, theta: f64) -> [f64; N] {
        let t1 = 1.0 - theta;
        let c = &self.coeffs;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c[0][i] + theta * (c[1][i] + t1 * (c[2][i] + theta * (c[3][i] + t1 * c[4][i])));
        }
        out
    }

    pub fn t_end(&self) -> f64 {
        if self.theta_end == 1.0 {
            self.t0 + self.h
        } else {
            self.t0 + self.theta_end * self.h
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub segments: Vec<Segment<N>>,
    pub events: Vec<EventRecord<N>>,
    pub status: Status,
    /// Number of rejected steps (diagnostic).
    pub rejected: usize,
}

impl<const N: usize> Trajectory<N> {
    fn single(t0: f64, y0: [f64; N]) -> Self {
        Trajectory {
            times: vec![t0],
            states: vec![y0],
            segments: Vec::new(),
            events: Vec::new(),
            status: Status::Completed,
            rejected: 0,
        }
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has a point")
    }

    pub fn last(&self) -> [f64; N] {
        *self.states.last().expect("trajectory has a point")
    }

    pub fn is_backward(&self) -> bool {
        self.t_end() < self.t_start()
    }

    pub fn contains_time(&self, t: f64) -> bool {
        let (a, b) = (self.t_start(), self.t_end());
        a.min(b) <= t && t <= a.max(b)
    }

    /// Dense-output state at `t`; `None` outside the covered interval.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if !self.contains_time(t) {
            return None;
        }
        if self.segments.is_empty() {
            return Some(self.states[0]);
        }
        let backward = self.is_backward();
        let idx = self.times[..self.segments.len()]
            .partition_point(|&s| if backward { s > t } else { s <= t })
            .saturating_sub(1)
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let theta = ((t - seg.t0) / seg.h).clamp(0.0, seg.theta_end);
        Some(seg.eval_theta(theta))
    }

    /// Node points plus dense samples so consecutive stored times are at most
    /// `max_dt` apart.
    pub fn dense_samples(&self, max_dt: f64) -> Vec<(f64, [f64; N])> {
        let mut out = vec![(self.times[0], self.states[0])];
        for (i, seg) in self.segments.iter().enumerate() {
            let span = (seg.h * seg.theta_end).abs();
            let k = ((span / max_dt).ceil() as usize).max(1);
            for j in 1..k {
                let theta = seg.theta_end * j as f64 / k as f64;
                out.push((seg.t0 + theta * seg.h, seg.eval_theta(theta)));
            }
            out.push((self.times[i + 1], self.states[i + 1]));
        }
        out
    }

    /// CSV with header `t,x,y[,z]`, 17 significant digits, one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let names = ["x", "y", "z"];
        write!(w, "t")?;
        for name in names.iter().take(N) {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{}", fmt17(*t))?;
            for v in s {
                write!(w, ",{}", fmt17(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn events_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.events
                .iter()
                .map(|e| serde_json::json!({ "t": e.t, "id": e.id, "state": e.state.to_vec() }))
                .collect(),
        )
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub tol: f64,
    /// Event localization tolerance in time.
    pub event_dt: f64,
    /// Dwell guard: events whose value at the start is at most this in
    /// magnitude stay disarmed until the value leaves this band.
    pub event_value_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol: 1e-10,
            event_dt: 1e-10,
            event_value_tol: 1e-8,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl Options {
    pub fn with_tol(tol: f64) -> Self {
        Options {
            tol,
            ..Options::default()
        }
    }
}

/// Right-hand side with an optional switching surface.
pub trait Problem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], mode: i8) -> Result<[f64; N], IntegrateError>;

    fn switch_value(&self, _y: &[f64; N]) -> Option<f64> {
        None
    }

    /// Mode for a start at `y` moving in time direction `dir`.
    fn initial_mode(&self, _y: &[f64; N], _dir: f64) -> i8 {
        0
    }

    /// Puts a localized crossing state exactly on the switching surface.
    fn snap_to_switch(&self, _y: &mut [f64; N]) {}

    fn max_step(&self, _y: &[f64; N]) -> f64 {
        f64::INFINITY
    }

    fn diverged(&self, _y: &[f64; N]) -> bool {
        false
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Stepper<'p, P, const N: usize> {
    problem: &'p P,
    t0: f64,
    dir: f64,
}

impl<P: Problem<N>, const N: usize> Stepper<'_, P, N> {
    /// Field in the internal forward parameter `s = dir * (t - t0)`.
    fn g(&self, s: f64, y: &[f64; N], mode: i8) -> Result<[f64; N], IntegrateError> {
        let mut k = self.problem.rhs(self.t0 + self.dir * s, y, mode)?;
        if self.dir < 0.0 {
            for v in &mut k {
                *v = -*v;
            }
        }
        Ok(k)
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn err_norm<const N: usize>(y0: &[f64; N], y1: &[f64; N], e: &[f64; N], tol: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..N {
        let sc = tol + tol * y0[i].abs().max(y1[i].abs());
        sum += (e[i] / sc).powi(2);
    }
    (sum / N as f64).sqrt()
}

struct StepOut<const N: usize> {
    y1: [f64; N],
    k7: [f64; N],
    err: f64,
    coeffs: [[f64; N]; 5],
}

fn dopri_step<P: Problem<N>, const N: usize>(
    st: &Stepper<'_, P, N>,
    s: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    mode: i8,
    tol: f64,
) -> Result<StepOut<N>, IntegrateError> {
    let k2 = st.g(s + C[1] * h, &axpy(y, h, &[(A21, k1)]), mode)?;
    let k3 = st.g(s + C[2] * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]), mode)?;
    let k4 = st.g(s + C[3] * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]), mode)?;
    let k5 = st.g(
        s + C[4] * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        mode,
    )?;
    let k6 = st.g(
        s + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        mode,
    )?;
    let y1 = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = st.g(s + h, &y1, mode)?;
    let mut e = [0.0; N];
    let mut coeffs = [[0.0; N]; 5];
    for i in 0..N {
        e[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let ydiff = y1[i] - y[i];
        let bspl = h * k1[i] - ydiff;
        coeffs[0][i] = y[i];
        coeffs[1][i] = ydiff;
        coeffs[2][i] = bspl;
        coeffs[3][i] = ydiff - h * k7[i] - bspl;
        coeffs[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    let err = if y1.iter().all(|v| v.is_finite()) {
        err_norm(y, &y1, &e, tol)
    } else {
        f64::INFINITY
    };
    Ok(StepOut { y1, k7, err, coeffs })
}

fn initial_step<P: Problem<N>, const N: usize>(
    st: &Stepper<'_, P, N>,
    y0: &[f64; N],
    f0: &[f64; N],
    mode: i8,
    tol: f64,
    h_max: f64,
) -> Result<f64, IntegrateError> {
    let norm = |v: &[f64; N]| {
        let mut sum = 0.0;
        for i in 0..N {
            let sc = tol + tol * y0[i].abs();
            sum += (v[i] / sc).powi(2);
        }
        (sum / N as f64).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(h_max);
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let f1 = st.g(h0, &y1, mode)?;
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = norm(&diff) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(h_max))
}

/// Bisection for the first crossing in `(lo, hi]` of a predicate that is
/// false at `lo` and true at `hi`.
fn bisect(mut lo: f64, mut hi: f64, width: f64, mut crossed: impl FnMut(f64) -> bool) -> f64 {
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if crossed(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Integrates `problem` from `(t0, y0)` to `t1` (either direction).
pub fn integrate<P: Problem<N>, const N: usize>(
    problem: &P,
    y0: [f64; N],
    t0: f64,
    t1: f64,
    events: &[EventSpec<'_, N>],
    opts: &Options,
) -> Result<Trajectory<N>, IntegrateError> {
    if !(opts.tol > 0.0) {
        return Err(IntegrateError::BadTolerance(opts.tol));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFinite { t: t0, state: y0.to_vec() });
    }
    let mut traj = Trajectory::single(t0, y0);
    if t1 == t0 {
        return Ok(traj);
    }
    let dir = if t1 > t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let st = Stepper { problem, t0, dir };

    let mut mode = problem.initial_mode(&y0, dir);
    let mut y = y0;
    let mut s = 0.0;
    let mut k1 = st.g(s, &y, mode)?;
    let mut prev_vals: Vec<f64> = events
        .iter()
        .map(|ev| {
            let v = (ev.func)(t0, &y0);
            if v.abs() <= opts.event_value_tol {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut h = initial_step(&st, &y, &k1, mode, opts.tol, opts.max_step.min(span))?;
    let mut last_rejected = false;
    let mut steps = 0usize;

    while s < span {
        steps += 1;
        if steps > opts.max_steps {
            return Err(IntegrateError::TooManySteps {
                t: t0 + dir * s,
                max_steps: opts.max_steps,
            });
        }
        let cap = problem.max_step(&y).min(opts.max_step);
        h = h.min(cap);
        let mut last_step = false;
        if s + h >= span || span - (s + h) < 1e-12 * span.max(1.0) {
            h = span - s;
            last_step = true;
        }
        let h_min = 1e-14 * (t0 + dir * s).abs().max(1.0);
        if h < h_min && !last_step {
            return Err(IntegrateError::StepUnderflow {
                t: t0 + dir * s,
                h,
                state: y.to_vec(),
            });
        }
        let out = dopri_step(&st, s, &y, &k1, h, mode, opts.tol)?;
        if !(out.err <= 1.0) {
            traj.rejected += 1;
            let factor = if out.err.is_finite() {
                (0.9 * out.err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.25
            };
            h *= factor;
            last_rejected = true;
            continue;
        }

        let t_seg = t0 + dir * s;
        let mut seg = Segment {
            t0: t_seg,
            h: dir * h,
            theta_end: 1.0,
            coeffs: out.coeffs,
        };
        let mut y_end = out.y1;
        let mut cut = false;
        let mut flip = false;

        if let Some(zv) = problem.switch_value(&out.y1) {
            if mode != 0 && zv * f64::from(mode) < 0.0 {
                let m = f64::from(mode);
                let theta = bisect(0.0, 1.0, 1e-15, |th| {
                    problem.switch_value(&seg.eval_theta(th)).unwrap_or(0.0) * m < 0.0
                });
                seg.theta_end = theta;
                y_end = seg.eval_theta(theta);
                problem.snap_to_switch(&mut y_end);
                cut = true;
                flip = true;
            }
        }

        let mut terminal_hit = None;
        let mut fired: Vec<(f64, usize, [f64; N])> = Vec::new();
        let t_end_seg = seg.t_end();
        for (i, ev) in events.iter().enumerate() {
            let cur = (ev.func)(t_end_seg, &y_end);
            let prev = prev_vals[i];
            if ev.crossed(prev, cur) {
                let width = opts.event_dt / h;
                let theta = bisect(0.0, seg.theta_end, width, |th| {
                    let yt = seg.eval_theta(th);
                    ev.crossed(prev, (ev.func)(seg.t0 + th * seg.h, &yt))
                });
                let te = if theta == seg.theta_end { t_end_seg } else { seg.t0 + theta * seg.h };
                let ye = if theta == seg.theta_end { y_end } else { seg.eval_theta(theta) };
                let accepted = ev.accept.as_ref().is_none_or(|acc| acc(te, &ye));
                if accepted {
                    fired.push((theta, i, ye));
                }
            }
            prev_vals[i] = if prev == 0.0 && cur.abs() <= opts.event_value_tol { 0.0 } else { cur };
        }
        fired.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(theta, i, ye) in &fired {
            if terminal_hit.is_some() {
                break;
            }
            traj.events.push(EventRecord {
                t: seg.t0 + theta * seg.h,
                id: events[i].id.clone(),
                index: i,
                state: ye,
            });
            if events[i].terminal {
                terminal_hit = Some((theta, ye));
            }
        }
        if let Some((theta, ye)) = terminal_hit {
            if theta < seg.theta_end {
                seg.theta_end = theta;
                y_end = ye;
                cut = true;
                flip = false;
            }
        }

        let advanced = if seg.theta_end == 1.0 { h } else { h * seg.theta_end };
        s = if last_step && !cut { span } else { s + advanced };
        traj.segments.push(seg);
        traj.times.push(if last_step && !cut { t1 } else { seg.t_end() });
        traj.states.push(y_end);
        y = y_end;

        if terminal_hit.is_some() {
            traj.status = Status::Terminal;
            return Ok(traj);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite {
                t: t0 + dir * s,
                state: y.to_vec(),
            });
        }
        if problem.diverged(&y) {
            traj.status = Status::BlowUp;
            return Ok(traj);
        }
        if flip {
            mode = -mode;
        }
        k1 = if cut { st.g(s, &y, mode)? } else { out.k7 };
        let grow = if out.err == 0.0 { 5.0 } else { (0.9 * out.err.powf(-0.2)).clamp(0.2, 5.0) };
        let grow = if last_rejected { grow.min(1.0) } else { grow };
        h *= grow;
        last_rejected = false;
    }
    traj.status = Status::Completed;
    Ok(traj)
}

struct Reduced<'a> {
    sys: &'a SystemSpec,
    kind: ReducedKind,
}

impl Problem<2> for Reduced<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 2], _mode: i8) -> Result<[f64; 2], IntegrateError> {
        Ok(self.sys.reduced_rhs(self.kind, *y)?)
    }
}

pub fn integrate_reduced(
    sys: &SystemSpec,
    kind: ReducedKind,
    p0: [f64; 2],
    t0: f64,
    t1: f64,
    events: &[EventSpec<'_, 2>],
    opts: &Options,
) -> Result<Trajectory<2>, IntegrateError> {
    integrate(&Reduced { sys, kind }, p0, t0, t1, events, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullOptions {
    pub base: Options,
    /// Step cap factor `c` (step at most `c * eps`) inside the fast layer.
    pub layer_step_factor: f64,
    /// Bound on `|f|, |g|` used for the fast-layer threshold `10 eps M`.
    pub m_est: f64,
    /// Integration stops with `Status::BlowUp` once `|z|` exceeds this.
    pub z_ceiling: f64,
}

impl Default for FullOptions {
    fn default() -> Self {
        FullOptions {
            base: Options::default(),
            layer_step_factor: 0.5,
            m_est: 10.0,
            z_ceiling: 40.0,
        }
    }
}

struct Full<'a> {
    sys: &'a SystemSpec,
    eps: f64,
    layer: f64,
    cap: f64,
    ceiling: f64,
}

impl Problem<3> for Full<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 3], mode: i8) -> Result<[f64; 3], IntegrateError> {
        let [f, g] = self.sys.fg(*y)?;
        let absz = if mode == 0 { y[2].abs() } else { f64::from(mode) * y[2] };
        Ok([f, g, (y[0] + absz) / self.eps])
    }

    fn switch_value(&self, y: &[f64; 3]) -> Option<f64> {
        Some(y[2])
    }

    fn initial_mode(&self, y: &[f64; 3], dir: f64) -> i8 {
        if y[2] > 0.0 || (y[2] == 0.0 && dir * y[0] > 0.0) {
            1
        } else {
            -1
        }
    }

    fn snap_to_switch(&self, y: &mut [f64; 3]) {
        y[2] = 0.0;
    }

    fn max_step(&self, y: &[f64; 3]) -> f64 {
        if (y[0] + y[2].abs()).abs() > self.layer {
            self.cap
        } else {
            f64::INFINITY
        }
    }

    fn diverged(&self, y: &[f64; 3]) -> bool {
        y[2].abs() > self.ceiling
    }
}

pub fn integrate_full(
    sys: &SystemSpec,
    eps: f64,
    s0: [f64; 3],
    t0: f64,
    t1: f64,
    events: &[EventSpec<'_, 3>],
    opts: &FullOptions,
) -> Result<Trajectory<3>, IntegrateError> {
    if !(eps > 0.0) {
        return Err(SystemError::BadEpsilon(eps).into());
    }
    let problem = Full {
        sys,
        eps,
        layer: 10.0 * eps * opts.m_est,
        cap: opts.layer_step_factor * eps,
        ceiling: opts.z_ceiling,
    };
    integrate(&problem, s0, t0, t1, events, &opts.base)
}
