//! Run configuration: JSON file, defaults for every omitted field, and
//! command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canardmap::MapParams;
use crate::integrate::{FullOptions, Options};
use crate::reduced::{default_alpha, GeometryOptions, ReducedGeometry};
use crate::solver::SolverOptions;
use crate::system::{Bounds3, SystemError, SystemSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad override {0:?}: expected name=value")]
    Override(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub f: String,
    pub g: String,
    pub params: BTreeMap<String, f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            f: "-a*y + z/a".into(),
            g: "x + 1".into(),
            params: BTreeMap::from([("a".to_string(), 3.0)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub epsilon: f64,
    /// Chart square size; `None` picks `0.1 min(|tau|, sigma)`, halved until
    /// the chart inverts on the boundary.
    pub alpha: Option<f64>,
    /// Activation delay; `None` picks `0.99 alpha / 4`.
    pub rho: Option<f64>,
    /// Tolerance of the reduced integrations.
    pub reduced_tol: f64,
    /// Tolerance of the full-system integrations.
    pub full_tol: f64,
    pub full_max_step: f64,
    /// Step cap `c eps` inside the fast layer.
    pub layer_step_factor: f64,
    /// Blow-up ceiling on `|z|`; `None` is ten times the box height.
    pub z_ceiling: Option<f64>,
    /// Bound on `|f|, |g|`; `None` takes the sampled box maximum.
    pub m_est: Option<f64>,
    /// Radius `delta` of the origin neighbourhood in `rho < delta / (2 M)`.
    pub origin_radius: f64,
    pub horizon: f64,
    pub tol_a: f64,
    pub polyline_spacing: f64,
    pub intersection_index: usize,
    #[serde(rename = "box")]
    pub bounds: Bounds3,
    /// Samples per axis for the assumption check.
    pub check_samples: usize,
    pub n_per_side: usize,
    pub max_depth: usize,
    pub zero_tol: f64,
    pub eps_list: Vec<f64>,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            epsilon: 0.1,
            alpha: None,
            rho: None,
            reduced_tol: 1e-12,
            full_tol: 1e-11,
            full_max_step: 0.05,
            layer_step_factor: 0.5,
            z_ceiling: None,
            m_est: None,
            origin_radius: 1.0,
            horizon: 10.0,
            tol_a: 1e-8,
            polyline_spacing: 1e-3,
            intersection_index: 0,
            bounds: Bounds3::cube(-3.0, 1.0),
            check_samples: 21,
            n_per_side: 64,
            max_depth: 12,
            zero_tol: 1e-12,
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Stem prepended to every file name.
    pub prefix: String,
    pub svg: bool,
    /// Retain and write full trajectories where a command can.
    pub trajectories: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            prefix: String::new(),
            svg: false,
            trajectories: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub numerics: NumericsSection,
    pub output: OutputSection,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemSection::default(),
            numerics: NumericsSection::default(),
            output: OutputSection::default(),
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Applies a `name=value` parameter override.
    pub fn set_param(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (name, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| ConfigError::Override(assignment.to_string()))?;
        self.system.params.insert(name.trim().to_string(), value);
        Ok(())
    }

    pub fn build_system(&self) -> Result<SystemSpec, ConfigError> {
        Ok(SystemSpec::new(&self.system.f, &self.system.g, &self.system.params)?)
    }

    pub fn geometry_options(&self) -> GeometryOptions {
        let n = &self.numerics;
        GeometryOptions {
            horizon: n.horizon,
            tol: n.reduced_tol,
            tol_a: n.tol_a,
            spacing: n.polyline_spacing,
            intersection_index: n.intersection_index,
        }
    }

    /// `M_est`: configured, or the sampled maximum of `|f|, |g|` over the box.
    pub fn m_est(&self, sys: &SystemSpec) -> f64 {
        self.numerics.m_est.unwrap_or_else(|| {
            sys.check_assumptions(&self.numerics.bounds, self.numerics.check_samples)
                .m_est
        })
    }

    pub fn full_options(&self, m_est: f64) -> FullOptions {
        let n = &self.numerics;
        FullOptions {
            base: Options {
                tol: n.full_tol,
                max_step: n.full_max_step,
                ..Options::default()
            },
            layer_step_factor: n.layer_step_factor,
            m_est,
            z_ceiling: n.z_ceiling.unwrap_or(10.0 * n.bounds.height()),
        }
    }

    pub fn alpha(&self, sys: &SystemSpec, geom: &ReducedGeometry) -> f64 {
        self.numerics.alpha.unwrap_or_else(|| default_alpha(sys, geom, 8))
    }

    pub fn map_params(&self, sys: &SystemSpec, geom: &ReducedGeometry) -> MapParams {
        let alpha = self.alpha(sys, geom);
        let rho = self.numerics.rho.unwrap_or(0.99 * alpha / 4.0);
        let m_est = self.m_est(sys);
        MapParams {
            origin_radius: self.numerics.origin_radius,
            full: self.full_options(m_est),
            retain_trajectory: false,
            ..MapParams::new(self.numerics.epsilon, alpha, rho)
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        o.n_per_side = self.numerics.n_per_side;
        o.winding.max_depth = self.numerics.max_depth;
        o.winding.zero_tol = self.numerics.zero_tol;
        o
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.output.dir.join(format!("{}{}", self.output.prefix, name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omitted_fields_take_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"numerics": {"epsilon": 0.05}}"#).unwrap();
        assert_eq!(c.numerics.epsilon, 0.05);
        assert_eq!(c.numerics.n_per_side, 64);
        assert_eq!(c.system, SystemSection::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"numerics": {"epsilion": 0.05}}"#).is_err());
    }

    #[test]
    fn param_override() {
        let mut c = RunConfig::default();
        c.set_param("a=1.5").unwrap();
        assert_eq!(c.system.params["a"], 1.5);
        assert!(c.set_param("a").is_err());
        assert!(c.set_param("a=x").is_err());
    }
}
