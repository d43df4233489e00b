//! Exit time `s` of the full system and the four-case return map `W`.

use serde::Serialize;
use thiserror::Error;

use crate::integrate::{integrate_full, Direction, EventSpec, FullOptions, IntegrateError, Status, Trajectory};
use crate::reduced::{tilde_t, Chart, ChartError, CrossingError, ReducedGeometry};
use crate::system::SystemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid map parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Crossing(#[from] CrossingError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("full integration failed from {p0:?} before activation: {source}")]
    Integration {
        p0: [f64; 2],
        #[source]
        source: IntegrateError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapParams {
    pub eps: f64,
    pub alpha: f64,
    pub rho: f64,
    /// Radius of the origin neighbourhood used for the bound `rho < delta / (2 M)`.
    pub origin_radius: f64,
    #[serde(skip)]
    pub full: FullOptions,
    pub retain_trajectory: bool,
}

impl MapParams {
    pub fn new(eps: f64, alpha: f64, rho: f64) -> Self {
        MapParams {
            eps,
            alpha,
            rho,
            origin_radius: 1.0,
            full: FullOptions {
                base: crate::integrate::Options {
                    tol: 1e-11,
                    max_step: 0.05,
                    ..Default::default()
                },
                ..FullOptions::default()
            },
            retain_trajectory: false,
        }
    }

    pub fn with_m_est(mut self, m_est: f64) -> Self {
        self.full.m_est = m_est;
        self
    }

    /// Whether `rho < delta / (2 M)` holds with the configured `M` bound.
    pub fn rho_bound_ok(&self) -> bool {
        self.rho < self.origin_radius / (2.0 * self.full.m_est)
    }

    pub fn validate(&self, geom: &ReducedGeometry) -> Result<(), MapError> {
        if !(self.eps > 0.0 && self.alpha > 0.0 && self.rho > 0.0) {
            return Err(MapError::InvalidParams(format!(
                "eps, alpha, rho must be positive (eps = {}, alpha = {}, rho = {})",
                self.eps, self.alpha, self.rho
            )));
        }
        if !(self.rho < self.alpha / 4.0) {
            return Err(MapError::InvalidParams(format!(
                "rho = {} must be below alpha / 4 = {}",
                self.rho,
                self.alpha / 4.0
            )));
        }
        if !(geom.sigma - 2.0 * self.alpha >= 0.0 && geom.sigma + 2.0 * self.alpha <= geom.t_r) {
            return Err(MapError::InvalidParams(format!(
                "[sigma - 2 alpha, sigma + 2 alpha] = [{}, {}] must lie in [0, T_r = {}]",
                geom.sigma - 2.0 * self.alpha,
                geom.sigma + 2.0 * self.alpha,
                geom.t_r
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    Case1,
    Case2,
    Case3,
    Case4,
}

impl Case {
    pub fn from_s(s: f64, sigma: f64, alpha: f64) -> Case {
        let d = s - sigma;
        if d.abs() < alpha {
            Case::Case1
        } else if d.abs() < 2.0 * alpha {
            Case::Case2
        } else if d > 0.0 {
            Case::Case3
        } else {
            Case::Case4
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Case::Case1 => "Case1",
            Case::Case2 => "Case2",
            Case::Case3 => "Case3",
            Case::Case4 => "Case4",
        }
    }
}

/// How `s` was determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitKind {
    /// `z <= 0` already at the activation time `t~ + rho`.
    Activation,
    /// `z` came back down through zero after activation.
    DownCrossing,
    /// Capped at `T_r` without a down-crossing.
    Cap,
    /// `z` exceeded the blow-up ceiling.
    BlowUp,
}

#[derive(Debug, Clone)]
pub struct ExitTime {
    pub s: f64,
    pub t_tilde: f64,
    pub activation: f64,
    pub kind: ExitKind,
    /// Full state at `s` when the integration reached it.
    pub state: Option<[f64; 3]>,
    pub trajectory: Vec<Trajectory<3>>,
}

#[derive(Debug, Clone)]
pub struct MapResult {
    pub image: [f64; 2],
    pub s_eps: f64,
    pub case_tag: Case,
    pub t_tilde: f64,
    pub exit: ExitKind,
    pub trajectory: Vec<Trajectory<3>>,
}

/// The return map on the chart square for fixed `eps`, `alpha`, `rho`.
#[derive(Debug, Clone)]
pub struct CanardMap<'a> {
    pub sys: &'a SystemSpec,
    pub geom: &'a ReducedGeometry,
    pub chart: Chart<'a>,
    pub params: MapParams,
}

impl<'a> CanardMap<'a> {
    pub fn new(sys: &'a SystemSpec, geom: &'a ReducedGeometry, params: MapParams) -> Result<Self, MapError> {
        params.validate(geom)?;
        let chart = Chart::for_alpha(sys, geom, params.alpha)?;
        Ok(CanardMap {
            sys,
            geom,
            chart,
            params,
        })
    }

    pub fn s_time(&self, p0: [f64; 2]) -> Result<ExitTime, MapError> {
        let geom = self.geom;
        let t_r = geom.t_r;
        let crossing = tilde_t(self.sys, geom, p0)?;
        let activation = crossing.t + self.params.rho;
        let start = [p0[0], p0[1], 0.0];
        let fail = |source| MapError::Integration { p0, source };
        let first = integrate_full(
            self.sys,
            self.params.eps,
            start,
            geom.tau,
            activation.min(t_r),
            &[],
            &self.params.full,
        )
        .map_err(fail)?;
        let keep = |mut v: Vec<Trajectory<3>>, t: Trajectory<3>| {
            if self.params.retain_trajectory {
                v.push(t);
            }
            v
        };
        let done = |s, kind, state, trajectory| ExitTime {
            s,
            t_tilde: crossing.t,
            activation,
            kind,
            state,
            trajectory,
        };
        if first.status == Status::BlowUp {
            return Ok(done(t_r, ExitKind::BlowUp, None, keep(Vec::new(), first)));
        }
        let at_act = first.last();
        if activation >= t_r {
            let kind = if at_act[2] <= 0.0 { ExitKind::Activation } else { ExitKind::Cap };
            return Ok(done(t_r, kind, Some(at_act), keep(Vec::new(), first)));
        }
        if at_act[2] <= 0.0 {
            return Ok(done(activation, ExitKind::Activation, Some(at_act), keep(Vec::new(), first)));
        }
        let ev = [EventSpec::new("z=0", Direction::Down, true, |_, y: &[f64; 3]| y[2])];
        let second = integrate_full(self.sys, self.params.eps, at_act, activation, t_r, &ev, &self.params.full)
            .map_err(fail)?;
        let trajs = keep(Vec::new(), first);
        Ok(match second.status {
            Status::Terminal => {
                let e = &second.events[0];
                let (t, state) = (e.t, e.state);
                done(t, ExitKind::DownCrossing, Some(state), keep(trajs, second))
            }
            Status::BlowUp => done(t_r, ExitKind::BlowUp, None, keep(trajs, second)),
            Status::Completed => {
                let last = second.last();
                done(t_r, ExitKind::Cap, Some(last), keep(trajs, second))
            }
        })
    }

    pub fn map_w(&self, p0: [f64; 2]) -> Result<MapResult, MapError> {
        let exit = self.s_time(p0)?;
        let (sigma, alpha) = (self.geom.sigma, self.params.alpha);
        let s = exit.s;
        let case_tag = Case::from_s(s, sigma, alpha);
        let curve = |t: f64| self.geom.gamma_r.at(t).expect("time inside the repulsive curve");
        let image = match case_tag {
            Case::Case1 => {
                let st = exit.state.expect("state available below sigma + alpha");
                [st[0], st[1]]
            }
            Case::Case2 => {
                let st = exit.state.ok_or_else(|| {
                    MapError::InvalidParams(format!("no state at s = {s} for the Case 2 combination"))
                })?;
                let d = (s - sigma).abs();
                let w1 = (2.0 * alpha - d) / alpha;
                let w2 = (d - alpha) / alpha;
                let c = curve(s);
                [w1 * st[0] + w2 * c[0], w1 * st[1] + w2 * c[1]]
            }
            Case::Case3 => curve(sigma + 2.0 * alpha),
            Case::Case4 => curve(sigma - 2.0 * alpha),
        };
        Ok(MapResult {
            image,
            s_eps: s,
            case_tag,
            t_tilde: exit.t_tilde,
            exit: exit.kind,
            trajectory: exit.trajectory,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_boundaries() {
        let (sigma, alpha) = (2.0, 0.2);
        assert_eq!(Case::from_s(2.1, sigma, alpha), Case::Case1);
        assert_eq!(Case::from_s(2.2, sigma, alpha), Case::Case2);
        assert_eq!(Case::from_s(1.7, sigma, alpha), Case::Case2);
        assert_eq!(Case::from_s(2.5, sigma, alpha), Case::Case3);
        assert_eq!(Case::from_s(1.5, sigma, alpha), Case::Case4);
        assert_eq!(Case::from_s(9.0, sigma, alpha), Case::Case3);
    }

    #[test]
    fn case_two_weight_matches_case_one_at_alpha() {
        let alpha = 0.3;
        let d = alpha;
        assert_eq!((2.0 * alpha - d) / alpha, 1.0);
        assert_eq!((d - alpha) / alpha, 0.0);
    }
}
