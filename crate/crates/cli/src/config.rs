//! Experiment configuration files (TOML, or JSON by `.json` extension).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stackseek_core::scenarios::{EnergyConfig, IllustrativeConfig, TestbedConfig};
use stackseek_core::{EstimatorSign, ScheduleParams, SeekOptions, StepRule, ViSolveParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Illustrative,
    Testbed,
    Energy,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Illustrative => "illustrative",
            ScenarioKind::Testbed => "testbed",
            ScenarioKind::Energy => "energy",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Oscillating,
    Inexact,
    Exact,
}

/// Leader step schedule; the leader dimension comes from the scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub eta_bar: f64,
    pub delta_bar: f64,
    pub beta_bar: f64,
    pub alpha: f64,
}

impl ScheduleConfig {
    pub fn params(&self, m: usize) -> stackseek_core::Result<ScheduleParams> {
        ScheduleParams::new(self.eta_bar, self.delta_bar, self.beta_bar, self.alpha, m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerConfig {
    pub tol: f64,
    pub max_iterations: usize,
    /// Fixed step; the default is the automatic `0.9 / L̂`.
    pub step: Option<f64>,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 200_000,
            step: None,
        }
    }
}

impl InnerConfig {
    pub fn params(&self) -> ViSolveParams {
        let mut p = ViSolveParams::default()
            .with_tol(self.tol)
            .with_max_iterations(self.max_iterations);
        if let Some(s) = self.step {
            p.step = StepRule::Fixed(s);
        }
        p
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub sign: EstimatorSign,
    pub parallel_inner: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Stride over trace records for the stationarity metric; 0 disables it.
    #[serde(default = "one")]
    pub stationarity_stride: usize,

    /// Illustrative regime and its constant step.
    #[serde(default)]
    pub regime: Option<RegimeKind>,
    #[serde(default)]
    pub eta: Option<f64>,
    /// First-follower actions cycled by the oscillating regime.
    #[serde(default)]
    pub sequence: Option<Vec<f64>>,

    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub inner: InnerConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,

    #[serde(default)]
    pub illustrative: Option<IllustrativeConfig>,
    #[serde(default)]
    pub testbed: Option<TestbedConfig>,
    #[serde(default)]
    pub energy: Option<EnergyConfig>,
}

fn one() -> usize {
    1
}

/// Field-level problems found in a config file.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config:")?;
        for e in &self.errors {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    fn single(msg: impl Into<String>) -> Self {
        Self {
            errors: vec![msg.into()],
        }
    }
}

pub const DEFAULT_SEQUENCE: [f64; 2] = [0.5, 1.5];
pub const DEFAULT_REGIME_ETA: f64 = 0.1;

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::single(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::single(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::single(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        if self.iterations == 0 {
            errors.push("iterations: must be at least 1".to_string());
        }
        if self.replicates == 0 {
            errors.push("replicates: must be at least 1".to_string());
        }
        if !(self.inner.tol > 0.0 && self.inner.tol.is_finite()) {
            errors.push("inner.tol: must be positive".to_string());
        }
        if self.inner.max_iterations == 0 {
            errors.push("inner.max_iterations: must be at least 1".to_string());
        }
        if let Some(s) = self.inner.step {
            if !(s > 0.0 && s.is_finite()) {
                errors.push("inner.step: must be positive".to_string());
            }
        }

        match self.scenario {
            ScenarioKind::Illustrative => {
                if self.regime.is_none() {
                    errors.push("regime: required for the illustrative scenario".to_string());
                }
                if let Some(eta) = self.eta {
                    if !(eta >= 0.0 && eta.is_finite()) {
                        errors.push("eta: must be finite and nonnegative".to_string());
                    }
                }
                if let Some(seq) = &self.sequence {
                    if seq.is_empty() || seq.iter().any(|v| !v.is_finite()) {
                        errors.push("sequence: must be a nonempty list of finite values".to_string());
                    }
                }
                if let Err(e) = self.illustrative_config().validate() {
                    errors.push(format!("illustrative: {}", strip_prefix(&e.to_string())));
                }
                for (key, set) in [
                    ("schedule", self.schedule.is_some()),
                    ("testbed", self.testbed.is_some()),
                    ("energy", self.energy.is_some()),
                ] {
                    if set {
                        errors.push(format!("{key}: not used by the illustrative scenario"));
                    }
                }
            }
            ScenarioKind::Testbed | ScenarioKind::Energy => {
                for (key, set) in [
                    ("regime", self.regime.is_some()),
                    ("eta", self.eta.is_some()),
                    ("sequence", self.sequence.is_some()),
                    ("illustrative", self.illustrative.is_some()),
                ] {
                    if set {
                        errors.push(format!("{key}: only used by the illustrative scenario"));
                    }
                }
                let m = match self.scenario {
                    ScenarioKind::Testbed => {
                        if self.energy.is_some() {
                            errors.push("energy: not used by the testbed scenario".to_string());
                        }
                        let t = self.testbed_config();
                        if let Err(e) = t.validate() {
                            errors.push(format!("testbed: {}", strip_prefix(&e.to_string())));
                        }
                        t.pairs
                    }
                    _ => {
                        if self.testbed.is_some() {
                            errors.push("testbed: not used by the energy scenario".to_string());
                        }
                        let e = self.energy_config();
                        if let Err(err) = e.validate() {
                            errors.push(format!("energy: {}", strip_prefix(&err.to_string())));
                        }
                        e.horizon
                    }
                };
                match &self.schedule {
                    None => errors.push(format!("schedule: required for the {} scenario", self.scenario)),
                    Some(s) => {
                        if let Err(e) = s.params(m.max(1)) {
                            errors.push(format!("schedule: {}", strip_prefix(&e.to_string())));
                        }
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { errors })
        }
    }

    pub fn illustrative_config(&self) -> IllustrativeConfig {
        self.illustrative.clone().unwrap_or_default()
    }

    pub fn testbed_config(&self) -> TestbedConfig {
        self.testbed.clone().unwrap_or_default()
    }

    pub fn energy_config(&self) -> EnergyConfig {
        self.energy.clone().unwrap_or_default()
    }

    pub fn regime_eta(&self) -> f64 {
        self.eta.unwrap_or(DEFAULT_REGIME_ETA)
    }

    pub fn regime_sequence(&self) -> Vec<f64> {
        self.sequence.clone().unwrap_or_else(|| DEFAULT_SEQUENCE.to_vec())
    }

    pub fn seek_options(&self) -> SeekOptions {
        SeekOptions {
            inner: self.inner.params(),
            sign: self.estimator.sign,
            parallel_inner: self.estimator.parallel_inner,
        }
    }
}

fn strip_prefix(msg: &str) -> &str {
    msg.strip_prefix("invalid parameter: ").unwrap_or(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TESTBED: &str = r#"
scenario = "testbed"
iterations = 50
seed = 7

[schedule]
eta_bar = 0.1666
delta_bar = 0.5
beta_bar = 1.0
alpha = 1.0
"#;

    #[test]
    fn minimal_illustrative_fills_defaults() {
        let cfg =
            ExperimentConfig::from_toml("scenario = \"illustrative\"\niterations = 10\nregime = \"exact\"\n").unwrap();
        assert_eq!(cfg.replicates, 1);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.regime_eta(), DEFAULT_REGIME_ETA);
        assert_eq!(cfg.regime_sequence(), vec![0.5, 1.5]);
        assert_eq!(cfg.illustrative_config(), IllustrativeConfig::default());
        assert_eq!(cfg.inner, InnerConfig::default());
    }

    #[test]
    fn testbed_parses() {
        let cfg = ExperimentConfig::from_toml(TESTBED).unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::Testbed);
        assert_eq!(cfg.schedule.unwrap().params(1).unwrap().m, 1);
    }

    #[test]
    fn small_alpha_is_rejected() {
        let err = ExperimentConfig::from_toml(&TESTBED.replace("alpha = 1.0", "alpha = 0.4")).unwrap_err();
        assert!(err.to_string().contains("alpha must exceed 0.5"), "{err}");
    }

    #[test]
    fn all_field_errors_are_reported() {
        let text = TESTBED
            .replace("iterations = 50", "iterations = 0\nreplicates = 0")
            .replace("alpha = 1.0", "alpha = 0.4");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.errors.len(), 3, "{err}");
        assert!(err.errors[0].starts_with("iterations"));
        assert!(err.errors[1].starts_with("replicates"));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml(&format!("{TESTBED}\n[inner]\ntolerance = 1e-6\n")).unwrap_err();
        assert!(err.to_string().contains("tolerance"), "{err}");
    }

    #[test]
    fn missing_schedule_is_reported() {
        let err = ExperimentConfig::from_toml("scenario = \"energy\"\niterations = 5\n").unwrap_err();
        assert!(err.to_string().contains("schedule: required"), "{err}");
    }

    #[test]
    fn missing_required_key() {
        let err = ExperimentConfig::from_toml("scenario = \"testbed\"\n").unwrap_err();
        assert!(err.to_string().contains("iterations"), "{err}");
    }

    #[test]
    fn json_is_accepted() {
        let cfg = ExperimentConfig::from_json(
            r#"{"scenario": "testbed", "iterations": 3,
                "schedule": {"eta_bar": 0.1, "delta_bar": 0.5, "beta_bar": 1.0, "alpha": 0.75},
                "testbed": {"pairs": 2}}"#,
        )
        .unwrap();
        assert_eq!(cfg.testbed_config().pairs, 2);
    }

    #[test]
    fn regime_requires_illustrative() {
        let err = ExperimentConfig::from_toml(&format!("regime = \"exact\"\n{TESTBED}")).unwrap_err();
        assert!(err.to_string().contains("regime: only used"), "{err}");
    }
}
