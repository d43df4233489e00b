//! Winding numbers of planar fields along closed loops, and the degree of
//! `id - W` on the chart square.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::canardmap::{CanardMap, MapError};
use crate::reduced::{ChartError, ChartPoint, Parallelogram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegreeError {
    #[error("field vanishes on the loop at parameter {s} (|F| = {magnitude:e})")]
    ZeroOnBoundary { s: f64, magnitude: f64 },
    #[error("refinement exhausted at parameter {s}: increment {increment} rad after depth {depth}")]
    RefinementExhausted { s: f64, increment: f64, depth: usize },
    #[error("winding sum {0} is not within 0.05 of an integer")]
    NonInteger(f64),
    #[error("field evaluation failed at parameter {s}: {message}")]
    Field { s: f64, message: String },
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingOptions {
    /// Initial samples around the loop.
    pub n_samples: usize,
    pub max_depth: usize,
    /// Magnitudes at or below this count as a zero on the loop.
    pub zero_tol: f64,
    /// When set, an increment that stays at or above `pi/2` after full
    /// refinement is accepted and the result marked uncertified.
    pub allow_uncertified: bool,
}

impl Default for WindingOptions {
    fn default() -> Self {
        WindingOptions {
            n_samples: 64,
            max_depth: 12,
            zero_tol: 1e-12,
            allow_uncertified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Winding {
    pub winding: i64,
    pub raw_sum: f64,
    pub certified: bool,
    pub n_evals: usize,
    pub min_magnitude: f64,
    pub max_increment: f64,
}

fn angle_diff(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.atan2(dot)
}

/// Winding number of `field` along the loop `s in [0, period)`.
///
/// Adjacent samples whose angle differs by `pi/2` or more are bisected in the
/// loop parameter up to `max_depth` times.
pub fn winding<F>(field: F, period: f64, opts: &WindingOptions) -> Result<Winding, DegreeError>
where
    F: Fn(f64) -> Result<[f64; 2], String> + Sync,
{
    let n = opts.n_samples.max(4);
    let params: Vec<f64> = (0..n).map(|k| period * k as f64 / n as f64).collect();
    let eval = |s: f64| -> Result<[f64; 2], DegreeError> {
        let v = field(s).map_err(|message| DegreeError::Field { s, message })?;
        let m = v[0].hypot(v[1]);
        if !(m > opts.zero_tol) {
            return Err(DegreeError::ZeroOnBoundary { s, magnitude: m });
        }
        Ok(v)
    };
    let values: Vec<[f64; 2]> = params.par_iter().map(|&s| eval(s)).collect::<Result<_, _>>()?;
    let mut n_evals = n;
    let mut total = 0.0;
    let mut certified = true;
    let mut max_increment: f64 = 0.0;
    let mut min_magnitude = f64::INFINITY;
    for v in &values {
        min_magnitude = min_magnitude.min(v[0].hypot(v[1]));
    }
    for k in 0..n {
        let (s0, s1) = (params[k], if k + 1 < n { params[k + 1] } else { period });
        let (v0, v1) = (values[k], values[(k + 1) % n]);
        // Explicit stack of (s0, v0, s1, v1, depth).
        let mut stack = vec![(s0, v0, s1, v1, 0usize)];
        while let Some((a, va, b, vb, depth)) = stack.pop() {
            let d = angle_diff(va, vb);
            if d.abs() < FRAC_PI_2 {
                total += d;
                max_increment = max_increment.max(d.abs());
                continue;
            }
            if depth >= opts.max_depth {
                if !opts.allow_uncertified {
                    return Err(DegreeError::RefinementExhausted {
                        s: a,
                        increment: d,
                        depth,
                    });
                }
                certified = false;
                total += d;
                max_increment = max_increment.max(d.abs());
                continue;
            }
            let m = 0.5 * (a + b);
            let vm = eval(m)?;
            n_evals += 1;
            min_magnitude = min_magnitude.min(vm[0].hypot(vm[1]));
            // Second half pushed first so the first half is summed first.
            stack.push((m, vm, b, vb, depth + 1));
            stack.push((a, va, m, vm, depth + 1));
        }
    }
    let raw = total / (2.0 * PI);
    let rounded = raw.round();
    if (raw - rounded).abs() > 0.05 {
        return Err(DegreeError::NonInteger(raw));
    }
    Ok(Winding {
        winding: rounded as i64,
        raw_sum: raw,
        certified,
        n_evals,
        min_magnitude,
        max_increment,
    })
}

/// Twice the signed area of a closed polygon.
pub fn shoelace(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|k| {
            let (p, q) = (points[k], points[(k + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DegreeRoute {
    /// `p - W(p)` in the state plane, loop orientation taken from the chart.
    StatePlane,
    /// `uv(p) - uv(W(p))` in chart coordinates.
    ChartDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeReport {
    pub degree: i64,
    pub raw_winding: i64,
    pub raw_sum: f64,
    /// `+1` when the image of the counterclockwise chart loop is
    /// counterclockwise in the plane, `-1` otherwise.
    pub chart_orientation: i64,
    pub n_evals: usize,
    pub min_field_magnitude: f64,
    pub max_increment: f64,
    pub certified: bool,
    pub route: DegreeRoute,
}

/// Axis-aligned rectangle in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartRect {
    pub center: [f64; 2],
    pub half: [f64; 2],
}

impl ChartRect {
    /// The chart square `|u|, |v| <= alpha/2`.
    pub fn square(par: &Parallelogram) -> Self {
        ChartRect {
            center: [0.0, 0.0],
            half: [par.half(), par.half()],
        }
    }

    /// Point at loop parameter `s in [0, 1)`, counterclockwise from the
    /// lower-left corner.
    pub fn boundary_point(&self, s: f64) -> ChartPoint {
        let [cu, cv] = self.center;
        let [hu, hv] = self.half;
        let s = 4.0 * s.rem_euclid(1.0);
        let side = (s.floor() as usize).min(3);
        let l = s - side as f64;
        let (u, v) = match side {
            0 => (-hu + 2.0 * hu * l, -hv),
            1 => (hu, -hv + 2.0 * hv * l),
            2 => (hu - 2.0 * hu * l, hv),
            _ => (-hu, hv - 2.0 * hv * l),
        };
        ChartPoint { u: cu + u, v: cv + v }
    }

    /// The four congruent quarters.
    pub fn quarters(&self) -> [ChartRect; 4] {
        let [hu, hv] = [0.5 * self.half[0], 0.5 * self.half[1]];
        let [cu, cv] = self.center;
        [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].map(|(a, b)| ChartRect {
            center: [cu + a * hu, cv + b * hv],
            half: [hu, hv],
        })
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.half[0].hypot(self.half[1])
    }
}

/// Chart-inverse states along the square's boundary, seeded from the nearest
/// already solved loop parameter.
struct LoopStates<'c, 'a> {
    map: &'c CanardMap<'a>,
    rect: ChartRect,
    solved: Mutex<Vec<(f64, [f64; 2])>>,
}

/// Below this loop-parameter gap, new boundary points are linear
/// interpolations of their solved neighbours instead of chart inverses.
const INTERPOLATION_GAP: f64 = 1e-5;

impl LoopStates<'_, '_> {
    fn state(&self, s: f64) -> Result<[f64; 2], ChartError> {
        let uv = self.rect.boundary_point(s);
        let chart = &self.map.chart;
        let (below, above) = {
            let solved = self.solved.lock().expect("seed cache");
            let below = solved
                .iter()
                .filter(|e| e.0 <= s)
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .copied();
            let above = solved
                .iter()
                .filter(|e| e.0 >= s)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .copied();
            (below, above)
        };
        match (below, above) {
            (Some((t, p)), _) | (_, Some((t, p))) if t == s => return Ok(p),
            (Some((a, pa)), Some((b, pb))) if b - a <= INTERPOLATION_GAP => {
                let w = (s - a) / (b - a);
                return Ok([pa[0] + w * (pb[0] - pa[0]), pa[1] + w * (pb[1] - pa[1])]);
            }
            _ => {}
        }
        let seed = match (below, above) {
            (Some((a, pa)), Some((b, pb))) => Some(if s - a <= b - s { pa } else { pb }),
            (Some((_, p)), None) | (None, Some((_, p))) => Some(p),
            (None, None) => None,
        };
        let p = chart.chart_inverse(uv, seed.unwrap_or_else(|| chart.linear_inverse(uv.as_array())))?;
        self.solved.lock().expect("seed cache").push((s, p));
        Ok(p)
    }
}

/// Default samples per side of the chart square.
pub const DEFAULT_PER_SIDE: usize = 64;

/// Degree of `id - W` on the chart square of `map`, sampled with
/// `n_per_side` points per side before refinement.
pub fn degree_w(
    map: &CanardMap<'_>,
    route: DegreeRoute,
    n_per_side: usize,
    opts: &WindingOptions,
) -> Result<DegreeReport, DegreeError> {
    let par = Parallelogram::new(map.params.alpha, map.geom.sign_a());
    degree_on_rect(map, route, ChartRect::square(&par), n_per_side, opts)
}

/// Degree of `id - W` on a chart rectangle.
pub fn degree_on_rect(
    map: &CanardMap<'_>,
    route: DegreeRoute,
    rect: ChartRect,
    n_per_side: usize,
    opts: &WindingOptions,
) -> Result<DegreeReport, DegreeError> {
    let chart = &map.chart;
    let states = LoopStates {
        map,
        rect,
        solved: Mutex::new(Vec::new()),
    };
    // Sequential pass so that each point is seeded from its neighbour.
    let n = 4 * n_per_side.max(1);
    let opts = WindingOptions { n_samples: n, ..*opts };
    let mut outline = Vec::with_capacity(n);
    for k in 0..n {
        outline.push(states.state(k as f64 / n as f64)?);
    }
    states.solved.lock().expect("seed cache").push((1.0, outline[0]));
    let chart_orientation = if shoelace(&outline) > 0.0 { 1 } else { -1 };
    let field = |s: f64| -> Result<[f64; 2], String> {
        let p = states.state(s).map_err(|e| e.to_string())?;
        let img = map.map_w(p).map_err(|e| e.to_string())?.image;
        match route {
            DegreeRoute::StatePlane => Ok([p[0] - img[0], p[1] - img[1]]),
            DegreeRoute::ChartDifference => {
                let uv = rect.boundary_point(s);
                let w = chart.chart_uv(img).map_err(|e| e.to_string())?;
                Ok([uv.u - w.u, uv.v - w.v])
            }
        }
    };
    let w = winding(field, 1.0, &opts)?;
    let degree = match route {
        DegreeRoute::StatePlane => w.winding * chart_orientation,
        DegreeRoute::ChartDifference => w.winding,
    };
    Ok(DegreeReport {
        degree,
        raw_winding: w.winding,
        raw_sum: w.raw_sum,
        chart_orientation,
        n_evals: w.n_evals,
        min_field_magnitude: w.min_magnitude,
        max_increment: w.max_increment,
        certified: w.certified,
        route,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(s: f64) -> [f64; 2] {
        let t = 2.0 * PI * s;
        [t.cos(), t.sin()]
    }

    #[test]
    fn linear_fields() {
        let o = WindingOptions::default();
        let w = |f: fn([f64; 2]) -> [f64; 2]| winding(|s| Ok(f(circle(s))), 1.0, &o).unwrap().winding;
        assert_eq!(w(|p| [p[0], 5.0 * p[1]]), 1);
        assert_eq!(w(|p| [-p[0], 5.0 * p[1]]), -1);
        assert_eq!(w(|_| [2.0, -1.0]), 0);
        assert_eq!(w(|p| [p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]]), 2);
    }

    #[test]
    fn zero_on_loop_is_reported() {
        let r = winding(|s| Ok([circle(s)[0] - 1.0, circle(s)[1]]), 1.0, &WindingOptions::default());
        assert!(matches!(r, Err(DegreeError::ZeroOnBoundary { .. })));
    }

    #[test]
    fn refinement_resolves_fast_turns() {
        // Field turning a full circle within three sample spacings.
        let f = |s: f64| {
            let t = 2.0 * PI * ((s - 0.3) / 0.05).clamp(0.0, 1.0);
            Ok([t.cos(), t.sin()])
        };
        let o = WindingOptions::default();
        let w = winding(f, 1.0, &o).unwrap();
        assert_eq!(w.winding, 1);
        assert!(w.certified);
        assert!(w.n_evals > o.n_samples);
    }

    #[test]
    fn unresolvable_jump_is_exhausted_or_uncertified() {
        let f = |s: f64| Ok(if s < 0.5 { [1.0, 0.0] } else { [-1.0, 1e-3] });
        let o = WindingOptions::default();
        assert!(matches!(winding(f, 1.0, &o), Err(DegreeError::RefinementExhausted { .. })));
    }

    #[test]
    fn shoelace_sign() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(shoelace(&sq), 2.0);
        let rev: Vec<_> = sq.iter().rev().copied().collect();
        assert_eq!(shoelace(&rev), -2.0);
    }
}
