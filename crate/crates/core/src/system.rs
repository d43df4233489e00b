//! Slow-fast system `x' = f, y' = g, eps z' = x + |z|` and its reduced flows.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, EvalError, Expression, ParseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("cannot parse `{which}`: {source}")]
    Parse {
        which: &'static str,
        #[source]
        source: ParseError,
    },
    #[error("evaluation of `{which}` failed at {point:?}: {source}")]
    Eval {
        which: &'static str,
        point: [f64; 3],
        #[source]
        source: EvalError,
    },
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReducedKind {
    Attractive,
    Repulsive,
}

impl ReducedKind {
    /// Sign `k` of the slow half-plane `z = k x`.
    pub fn z_sign(self) -> f64 {
        match self {
            ReducedKind::Attractive => 1.0,
            ReducedKind::Repulsive => -1.0,
        }
    }
}

/// Axis-aligned box in `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Bounds3 {
    pub fn cube(lo: f64, hi: f64) -> Self {
        Bounds3 {
            lo: [lo; 3],
            hi: [hi; 3],
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| self.lo[k] <= p[k] && p[k] <= self.hi[k])
    }

    pub fn height(&self) -> f64 {
        self.hi[2] - self.lo[2]
    }
}

#[derive(Debug, Clone)]
pub struct SystemSpec {
    f: Expression,
    g: Expression,
    f_text: String,
    g_text: String,
    names: Vec<String>,
    values: Vec<f64>,
}

impl SystemSpec {
    pub fn new(f: &str, g: &str, params: &BTreeMap<String, f64>) -> Result<Self, SystemError> {
        let names: Vec<String> = params.keys().cloned().collect();
        let values: Vec<f64> = params.values().copied().collect();
        let fe = expr::parse(f, &names).map_err(|source| SystemError::Parse { which: "f", source })?;
        let ge = expr::parse(g, &names).map_err(|source| SystemError::Parse { which: "g", source })?;
        Ok(SystemSpec {
            f: fe,
            g: ge,
            f_text: f.to_string(),
            g_text: g.to_string(),
            names,
            values,
        })
    }

    /// `x' = -a y + z/a`, `y' = x + 1`.
    pub fn example_family(a: f64) -> Self {
        let params = BTreeMap::from([("a".to_string(), a)]);
        SystemSpec::new("-a*y + z/a", "x + 1", &params).expect("built-in system parses")
    }

    pub fn f_text(&self) -> &str {
        &self.f_text
    }

    pub fn g_text(&self) -> &str {
        &self.g_text
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(self.values.iter().copied()).collect()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// `(f, g)` at a point of 3-space.
    pub fn fg(&self, p: [f64; 3]) -> Result<[f64; 2], SystemError> {
        let f = self
            .f
            .eval(p, &self.values)
            .map_err(|source| SystemError::Eval { which: "f", point: p, source })?;
        let g = self
            .g
            .eval(p, &self.values)
            .map_err(|source| SystemError::Eval { which: "g", point: p, source })?;
        Ok([f, g])
    }

    pub fn full_rhs(&self, eps: f64, state: [f64; 3]) -> Result<[f64; 3], SystemError> {
        if !(eps > 0.0) {
            return Err(SystemError::BadEpsilon(eps));
        }
        let [f, g] = self.fg(state)?;
        Ok([f, g, (state[0] + state[2].abs()) / eps])
    }

    pub fn reduced_rhs(&self, kind: ReducedKind, point: [f64; 2]) -> Result<[f64; 2], SystemError> {
        let [x, y] = point;
        self.fg([x, y, kind.z_sign() * x])
    }

    /// `f_a g_r - f_r g_a` at `point`.
    pub fn transversality(&self, point: [f64; 2]) -> Result<f64, SystemError> {
        let [fa, ga] = self.reduced_rhs(ReducedKind::Attractive, point)?;
        let [fr, gr] = self.reduced_rhs(ReducedKind::Repulsive, point)?;
        Ok(fa * gr - fr * ga)
    }

    pub fn check_assumptions(&self, bounds: &Bounds3, n_samples: usize) -> AssumptionReport {
        check_assumptions(self, bounds, n_samples, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub f_origin: f64,
    pub g_origin: f64,
    pub sign_condition_ok: bool,
    #[serde(rename = "M_est")]
    pub m_est: f64,
    pub lambda_est: f64,
    #[serde(rename = "box")]
    pub bounds: Bounds3,
    pub box_contains_origin: bool,
    /// Messages for every evaluation failure met while sampling.
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Samples `bounds` on an `n`-per-axis grid for `M` and the sign condition,
/// and on `n^3` random point pairs (seeded) for the Lipschitz quotient in the
/// 1-norm.
pub fn check_assumptions(
    sys: &SystemSpec,
    bounds: &Bounds3,
    n_samples: usize,
    seed: u64,
) -> AssumptionReport {
    let n = n_samples.max(2);
    let mut failures = Vec::new();
    let origin = record(sys.fg([0.0; 3]), &mut failures);
    let (f_origin, g_origin) = origin.map_or((f64::NAN, f64::NAN), |[f, g]| (f, g));

    let axis = |k: usize, i: usize| bounds.lo[k] + (bounds.hi[k] - bounds.lo[k]) * i as f64 / (n - 1) as f64;
    let mut m_est = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = [axis(0, i), axis(1, j), axis(2, k)];
                if let Some([f, g]) = record(sys.fg(p), &mut failures) {
                    m_est = m_est.max(f.abs()).max(g.abs());
                }
            }
        }
    }

    let mut sign_condition_ok = true;
    let n_y = n.max(64);
    for j in 0..n_y {
        let y = bounds.lo[1] + (bounds.hi[1] - bounds.lo[1]) * j as f64 / (n_y - 1) as f64;
        if y == 0.0 {
            continue;
        }
        match record(sys.fg([0.0, y, 0.0]), &mut failures) {
            Some([f, _]) if y * f < 0.0 => {}
            _ => sign_condition_ok = false,
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| {
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = rng.gen_range(bounds.lo[k]..=bounds.hi[k]);
        }
        p
    };
    let mut lambda_est = 0.0_f64;
    for _ in 0..n * n * n {
        let p = sample(&mut rng);
        let q = sample(&mut rng);
        let d: f64 = (0..3).map(|k| (p[k] - q[k]).abs()).sum();
        if d == 0.0 {
            continue;
        }
        if let (Some(a), Some(b)) = (
            record(sys.fg(p), &mut failures),
            record(sys.fg(q), &mut failures),
        ) {
            let quotient = (a[0] - b[0]).abs().max((a[1] - b[1]).abs()) / d;
            lambda_est = lambda_est.max(quotient);
        }
    }

    let box_contains_origin = bounds.contains([0.0; 3]);
    let pass = box_contains_origin
        && failures.is_empty()
        && f_origin.abs() <= 1e-12
        && g_origin > 0.0
        && sign_condition_ok;
    AssumptionReport {
        f_origin,
        g_origin,
        sign_condition_ok,
        m_est,
        lambda_est,
        bounds: *bounds,
        box_contains_origin,
        failures,
        pass,
    }
}

fn record(r: Result<[f64; 2], SystemError>, failures: &mut Vec<String>) -> Option<[f64; 2]> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            failures.push(e.to_string());
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rhs_examples() {
        let sys = SystemSpec::example_family(3.0);
        assert_eq!(sys.full_rhs(0.1, [0.0, 0.0, 0.0]).unwrap(), [0.0, 1.0, 0.0]);
        assert_eq!(sys.full_rhs(0.1, [-1.0, 0.0, 0.0]).unwrap(), [0.0, 0.0, -10.0]);
        let r = sys.full_rhs(0.1, [0.0, 0.0, -1.0]).unwrap();
        assert!((r[0] + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r[1], 1.0);
        assert!((r[2] - 10.0).abs() < 1e-12);
        assert!(sys.full_rhs(0.0, [0.0; 3]).is_err());
    }

    #[test]
    fn reduced_rhs_examples() {
        let sys = SystemSpec::example_family(3.0);
        let a = sys.reduced_rhs(ReducedKind::Attractive, [-1.0, 0.0]).unwrap();
        let r = sys.reduced_rhs(ReducedKind::Repulsive, [-1.0, 0.0]).unwrap();
        assert!((a[0] + 1.0 / 3.0).abs() < 1e-15 && a[1] == 0.0);
        assert!((r[0] - 1.0 / 3.0).abs() < 1e-15 && r[1] == 0.0);
        for y in [-2.0, -0.3, 0.0, 1.7] {
            assert_eq!(
                sys.reduced_rhs(ReducedKind::Attractive, [0.0, y]).unwrap(),
                sys.reduced_rhs(ReducedKind::Repulsive, [0.0, y]).unwrap()
            );
        }
    }

    #[test]
    fn transversality_vanishes_on_turning_line_and_for_equal_rows() {
        let sys = SystemSpec::example_family(3.0);
        for y in [-1.0, 0.0, 2.0] {
            assert_eq!(sys.transversality([0.0, y]).unwrap(), 0.0);
        }
        let same = SystemSpec::new("x*y + z", "x*y + z", &BTreeMap::new()).unwrap();
        for p in [[-1.0, 0.5], [0.3, -2.0]] {
            assert_eq!(same.transversality(p).unwrap(), 0.0);
        }
    }

    #[test]
    fn assumptions_example_family_pass() {
        let sys = SystemSpec::example_family(3.0);
        let rep = sys.check_assumptions(&Bounds3::cube(-3.0, 1.0), 9);
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.f_origin, 0.0);
        assert_eq!(rep.g_origin, 1.0);
        assert!(rep.sign_condition_ok);
        assert!(rep.lambda_est > 0.0);
    }

    #[test]
    fn assumptions_constant_system_fails() {
        let sys = SystemSpec::new("1", "1", &BTreeMap::new()).unwrap();
        let rep = sys.check_assumptions(&Bounds3::cube(-1.0, 1.0), 4);
        assert!(!rep.pass);
        assert_eq!(rep.f_origin, 1.0);
    }

    #[test]
    fn slow_surface_membership() {
        let sys = SystemSpec::example_family(2.0);
        for x in [-2.0, -0.5, -1e-3] {
            let r = sys.full_rhs(0.05, [x, 0.4, x]).unwrap();
            assert_eq!(r[2], 0.0);
            let red = sys.reduced_rhs(ReducedKind::Attractive, [x, 0.4]).unwrap();
            assert_eq!([r[0], r[1]], red);
        }
    }
}
