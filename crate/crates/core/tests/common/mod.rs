//! Independent reference computations for the example family
//! `f = -a y + z / a`, `g = x + 1`, written without the library.

#![allow(dead_code)]

use std::collections::HashMap;

/// Reduced field on `z = k x` for the example family.
pub fn reduced_field(a: f64, k: f64) -> impl Fn([f64; 2]) -> [f64; 2] {
    move |p| [-a * p[1] + k * p[0] / a, p[0] + 1.0]
}

/// Fixed-step RK4 from the origin, keeping every `keep`-th point.
pub fn rk4_curve(field: &dyn Fn([f64; 2]) -> [f64; 2], dt: f64, t_end: f64, keep: usize) -> Vec<(f64, [f64; 2])> {
    let n = (t_end / dt).abs().round() as usize;
    let mut p = [0.0, 0.0];
    let mut out = vec![(0.0, p)];
    let add = |p: [f64; 2], k: [f64; 2], c: f64| [p[0] + c * k[0], p[1] + c * k[1]];
    for i in 1..=n {
        let k1 = field(p);
        let k2 = field(add(p, k1, dt / 2.0));
        let k3 = field(add(p, k2, dt / 2.0));
        let k4 = field(add(p, k3, dt));
        p = [
            p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if i % keep == 0 || i == n {
            out.push((i as f64 * dt, p));
        }
    }
    out
}

/// Parameters `(s, r)` in `[0, 1]^2` where segments `p0 p1` and `q0 q1` meet.
pub fn segment_hit(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> Option<(f64, f64)> {
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    let e = [q1[0] - q0[0], q1[1] - q0[1]];
    let den = d[0] * e[1] - d[1] * e[0];
    if den.abs() < 1e-300 {
        return None;
    }
    let w = [q0[0] - p0[0], q0[1] - p0[1]];
    let s = (w[0] * e[1] - w[1] * e[0]) / den;
    let r = (w[0] * d[1] - w[1] * d[0]) / den;
    ((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&r)).then_some((s, r))
}

#[derive(Debug, Clone, Copy)]
pub struct OracleGeometry {
    pub tau: f64,
    pub sigma: f64,
    pub x_star: f64,
    pub y_star: f64,
    pub a_number: f64,
}

/// Crossings of the polylines away from their common start, ordered by `sigma`.
pub fn polyline_crossings(ga: &[(f64, [f64; 2])], gr: &[(f64, [f64; 2])], skip: f64) -> Vec<(f64, f64, [f64; 2])> {
    let cell = 0.05;
    let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..ga.len() - 1 {
        let (a, b) = (key(ga[i].1), key(ga[i + 1].1));
        for cx in a.0.min(b.0)..=a.0.max(b.0) {
            for cy in a.1.min(b.1)..=a.1.max(b.1) {
                grid.entry((cx, cy)).or_default().push(i);
            }
        }
    }
    let mut found = Vec::new();
    for j in 0..gr.len() - 1 {
        if gr[j + 1].0.abs() < skip {
            continue;
        }
        let (a, b) = (key(gr[j].1), key(gr[j + 1].1));
        let mut cands = Vec::new();
        for cx in a.0.min(b.0)..=a.0.max(b.0) {
            for cy in a.1.min(b.1)..=a.1.max(b.1) {
                if let Some(v) = grid.get(&(cx, cy)) {
                    cands.extend_from_slice(v);
                }
            }
        }
        cands.sort_unstable();
        cands.dedup();
        for i in cands {
            if ga[i + 1].0.abs() < skip {
                continue;
            }
            if let Some((s, r)) = segment_hit(ga[i].1, ga[i + 1].1, gr[j].1, gr[j + 1].1) {
                let tau = ga[i].0 + s * (ga[i + 1].0 - ga[i].0);
                let sigma = gr[j].0 + r * (gr[j + 1].0 - gr[j].0);
                let p = [
                    gr[j].1[0] + r * (gr[j + 1].1[0] - gr[j].1[0]),
                    gr[j].1[1] + r * (gr[j + 1].1[1] - gr[j].1[1]),
                ];
                found.push((tau, sigma, p));
            }
        }
    }
    found.sort_by(|x, y| x.1.total_cmp(&y.1));
    found
}

/// RK4 with `dt` to `|t| <= horizon`, polylines every `keep` steps, and the
/// crossing with the smallest `sigma`.
pub fn oracle_geometry(a: f64, dt: f64, horizon: f64, keep: usize) -> Option<OracleGeometry> {
    let fa = reduced_field(a, 1.0);
    let fr = reduced_field(a, -1.0);
    let ga = rk4_curve(&fa, -dt, -horizon, keep);
    let gr = rk4_curve(&fr, dt, horizon, keep);
    let (tau, sigma, p) = *polyline_crossings(&ga, &gr, 1e-2).first()?;
    let (va, vr) = (fa(p), fr(p));
    Some(OracleGeometry {
        tau,
        sigma,
        x_star: p[0],
        y_star: p[1],
        a_number: va[0] * vr[1] - vr[0] * va[1],
    })
}

/// The reference at full resolution: `dt = 1e-6`, a polyline point every
/// `1e-4` time units.
pub fn reference_geometry(a: f64) -> Option<OracleGeometry> {
    oracle_geometry(a, 1e-6, 6.0, 100)
}
