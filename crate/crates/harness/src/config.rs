//! Experiment configuration: one TOML file, unknown keys rejected.

use std::path::{Path, PathBuf};

use fbm_pv::functional::Route;
use fbm_pv::ladder::{EpsLadder, DEFAULT_PV_TOL};
use fbm_pv::occupation::FieldKind;
use fbm_pv::sampler::{Method, CHOLESKY_CAP};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Route names as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteName {
    TimeIntegral,
    HilbertOfLocalTime,
    QuadraticCovariation,
}

impl From<RouteName> for Route {
    fn from(r: RouteName) -> Self {
        match r {
            RouteName::TimeIntegral => Route::TimeIntegral,
            RouteName::HilbertOfLocalTime => Route::HilbertOfLocalTime,
            RouteName::QuadraticCovariation => Route::QuadraticCovariation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    /// Cholesky up to 256 steps, circulant embedding above.
    #[default]
    Auto,
    Cholesky,
    Circulant,
}

impl MethodName {
    pub fn resolve(self, steps: usize) -> Method {
        match self {
            MethodName::Cholesky => Method::Cholesky,
            MethodName::Circulant => Method::Circulant,
            MethodName::Auto if steps <= 256 => Method::Cholesky,
            MethodName::Auto => Method::Circulant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    /// Explicit cut-offs; the default ladder is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rungs: Option<Vec<f64>>,
    pub floor_c: f64,
    pub tol: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            rungs: None,
            floor_c: 1.0,
            tol: DEFAULT_PV_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialConfig {
    /// Bin width; `2 T^H n^{-1/3}` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Half-width of the grid around 0, in units of `T^H`.
    pub coverage: f64,
    pub kind: FieldKind,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self {
            bandwidth: None,
            coverage: 5.0,
            kind: FieldKind::Weighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QcovConfig {
    /// Lag of the covariation, in time steps.
    pub lag_steps: usize,
}

impl Default for QcovConfig {
    fn default() -> Self {
        Self { lag_steps: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Wall-clock budget for a suite, in seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_secs: Option<f64>,
    /// Half-width of the test bump `g(x) = (1 - (x/w)^2)^3`.
    pub bump_half_width: f64,
    /// Threshold on the median per-path relative residual of the
    /// local-time/Hilbert identity.
    pub identity_tol: f64,
    /// Monte Carlo z threshold for ensemble identities.
    pub z: f64,
    /// Paths for the ensemble identities (qcov, Yamada).
    pub ensemble_paths: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            budget_secs: None,
            bump_half_width: 1.0,
            identity_tol: 0.1,
            z: 3.0,
            ensemble_paths: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "H")]
    pub hurst: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(rename = "n")]
    pub steps: usize,
    pub paths: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default = "default_routes")]
    pub routes: Vec<RouteName>,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub eps_ladder: LadderConfig,
    #[serde(default)]
    pub spatial_grid: SpatialConfig,
    #[serde(default)]
    pub qcov: QcovConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_routes() -> Vec<RouteName> {
    vec![RouteName::TimeIntegral, RouteName::HilbertOfLocalTime]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hurst: 0.7,
            horizon: 1.0,
            steps: 4096,
            paths: 200,
            master_seed: 0,
            levels: vec![0.0, 0.25],
            routes: default_routes(),
            method: MethodName::Auto,
            output_dir: default_output(),
            eps_ladder: LadderConfig::default(),
            spatial_grid: SpatialConfig::default(),
            qcov: QcovConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

/// What a command needs from the configuration beyond the basics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Paths,
    Levels,
    SubRegime,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        toml::from_str(s).map_err(|e| HarnessError::Validation(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Field-level validation; every problem is reported, one per line.
    pub fn validate(&self, needs: &[Needs]) -> Result<(), HarnessError> {
        let mut errs: Vec<String> = Vec::new();
        let h = self.hurst;
        if !(h > 0.0 && h < 1.0) {
            errs.push(format!("H: must lie in (0, 1), got {h}"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            errs.push(format!("T: must be positive, got {}", self.horizon));
        }
        if self.steps < 2 {
            errs.push(format!("n: need at least 2 steps, got {}", self.steps));
        }
        if self.method == MethodName::Cholesky && self.steps > CHOLESKY_CAP {
            errs.push(format!(
                "method: cholesky is limited to n <= {CHOLESKY_CAP}, got n = {}",
                self.steps
            ));
        }
        if needs.contains(&Needs::Paths) && self.paths == 0 {
            errs.push("paths: must be at least 1".into());
        }
        if needs.contains(&Needs::Levels) {
            if self.levels.is_empty() {
                errs.push("levels: at least one level is required".into());
            }
            if self.levels.iter().any(|a| !a.is_finite()) {
                errs.push("levels: must be finite".into());
            }
            if self.routes.is_empty() {
                errs.push("routes: at least one route is required".into());
            }
        }
        let sub_required = needs.contains(&Needs::SubRegime)
            || (needs.contains(&Needs::Levels) && self.routes.contains(&RouteName::QuadraticCovariation));
        if sub_required && !(h < 0.5) {
            errs.push(format!("routes: quadratic_covariation requires H < 1/2, got H = {h}"));
        }
        let l = &self.eps_ladder;
        if !(l.floor_c > 0.0 && l.floor_c.is_finite()) {
            errs.push(format!("eps_ladder.floor_c: must be positive, got {}", l.floor_c));
        }
        if !(l.tol > 0.0) {
            errs.push(format!("eps_ladder.tol: must be positive, got {}", l.tol));
        }
        if let Some(r) = &l.rungs {
            if let Err(e) = EpsLadder::new(r.clone()) {
                errs.push(format!("eps_ladder.rungs: {e}"));
            }
        }
        let g = &self.spatial_grid;
        if let Some(bw) = g.bandwidth {
            if !(bw > 0.0 && bw.is_finite()) {
                errs.push(format!("spatial_grid.bandwidth: must be positive, got {bw}"));
            }
        }
        if !(g.coverage > 0.0 && g.coverage.is_finite()) {
            errs.push(format!("spatial_grid.coverage: must be positive, got {}", g.coverage));
        }
        if self.qcov.lag_steps == 0 || self.qcov.lag_steps > self.steps {
            errs.push(format!(
                "qcov.lag_steps: must lie in [1, n], got {}",
                self.qcov.lag_steps
            ));
        }
        let v = &self.verify;
        if let Some(b) = v.budget_secs {
            if !(b > 0.0) {
                errs.push(format!("verify.budget_secs: must be positive, got {b}"));
            }
        }
        if !(v.bump_half_width > 0.0) {
            errs.push(format!("verify.bump_half_width: must be positive, got {}", v.bump_half_width));
        }
        if !(v.identity_tol > 0.0) || !(v.z > 0.0) {
            errs.push("verify: identity_tol and z must be positive".into());
        }
        if v.ensemble_paths < 2 {
            errs.push("verify.ensemble_paths: need at least 2".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(errs.join("\n")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let cfg = ExperimentConfig::from_toml_str("H = 0.3\nn = 64\npaths = 2\n").unwrap();
        assert_eq!(cfg.horizon, 1.0);
        assert_eq!(cfg.routes, default_routes());
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        let mut full = ExperimentConfig::default();
        full.eps_ladder.rungs = Some(vec![0.2, 0.1, 0.05]);
        full.spatial_grid.bandwidth = Some(0.05);
        full.verify.budget_secs = Some(12.5);
        let back = ExperimentConfig::from_toml_str(&full.to_toml_string()).unwrap();
        assert_eq!(back, full);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::from_toml_str("H = 0.3\nn = 64\npaths = 2\nhurts = 1\n").unwrap_err();
        assert!(e.to_string().contains("hurts"), "{e}");
        let e = ExperimentConfig::from_toml_str("H = 0.3\nn = 64\npaths = 2\n[eps_ladder]\nflor_c = 1\n")
            .unwrap_err();
        assert!(e.to_string().contains("flor_c"));
    }

    #[test]
    fn validation_names_fields() {
        let mut cfg = ExperimentConfig {
            hurst: 1.2,
            ..Default::default()
        };
        let e = cfg.validate(&[]).unwrap_err().to_string();
        assert!(e.contains("H:"), "{e}");
        cfg.hurst = 0.7;
        cfg.levels.clear();
        assert!(cfg.validate(&[Needs::Levels]).unwrap_err().to_string().contains("levels"));
        cfg.levels = vec![0.0];
        cfg.routes = vec![RouteName::QuadraticCovariation];
        assert!(cfg.validate(&[Needs::Levels]).unwrap_err().to_string().contains("H < 1/2"));
        cfg.hurst = 0.3;
        cfg.validate(&[Needs::Levels]).unwrap();
        cfg.method = MethodName::Cholesky;
        cfg.steps = 2 * CHOLESKY_CAP;
        assert!(cfg.validate(&[]).is_err());
    }
}
