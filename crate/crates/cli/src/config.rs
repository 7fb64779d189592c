//! Run configuration: strict JSON parsing with documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tumorstrip_core::evolution::{Stepper, TimeStep, DEFAULT_BURN_IN};
use tumorstrip_core::ModelParameters;

use crate::exit::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub mu: f64,
    pub sigma_tilde: f64,
    pub sigma_bar_1: f64,
    pub sigma_bar_2: f64,
    pub gamma: f64,
}

impl From<ParamsConfig> for ModelParameters {
    fn from(p: ParamsConfig) -> Self {
        ModelParameters::new(p.mu, p.sigma_tilde, p.sigma_bar_1, p.sigma_bar_2, p.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub stretch: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            stretch: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryConfig {
    pub samples: usize,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self { samples: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub k_max: usize,
    pub oracle: bool,
    pub k_oracle: usize,
    pub ny_oracle: usize,
    /// Largest accepted relative deviation of an oracle row.
    pub oracle_tol: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            k_max: 100,
            oracle: true,
            k_oracle: 8,
            ny_oracle: 2048,
            oracle_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    pub k_scan: usize,
    pub tol: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            k_scan: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub k: usize,
    pub eps: f64,
}

/// `"auto"` or a positive step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSetting {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub t_end: f64,
    pub dt: DtSetting,
    pub stepper: String,
    pub perturbation: Perturbation,
    pub tracked_modes: Vec<usize>,
    pub record_every: usize,
    pub burn_in: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            t_end: 5.0,
            dt: DtSetting::Named("auto".into()),
            stepper: "imex".into(),
            perturbation: Perturbation { k: 1, eps: 1e-3 },
            tracked_modes: vec![1, 2, 3, 4],
            record_every: 10,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

impl EvolveConfig {
    pub fn time_step(&self) -> TimeStep {
        match &self.dt {
            DtSetting::Fixed(dt) => TimeStep::Fixed(*dt),
            DtSetting::Named(_) => TimeStep::Auto,
        }
    }

    pub fn stepper(&self) -> Stepper {
        self.stepper.parse().expect("validated on load")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub stationary: StationaryConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub threshold: ThresholdConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
}

impl RunConfig {
    pub fn model(&self) -> ModelParameters {
        self.params.into()
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Failure::config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    /// Structural checks; positivity of the model parameters is a model
    /// question and is left to the model layer.
    fn check(&self) -> Result<(), Failure> {
        let p = &self.params;
        let e = &self.evolve;
        let numbers = [
            ("params.mu", p.mu),
            ("params.sigma_tilde", p.sigma_tilde),
            ("params.sigma_bar_1", p.sigma_bar_1),
            ("params.sigma_bar_2", p.sigma_bar_2),
            ("params.gamma", p.gamma),
            ("grid.stretch", self.grid.stretch),
            ("spectrum.oracle_tol", self.spectrum.oracle_tol),
            ("threshold.tol", self.threshold.tol),
            ("evolve.t_end", e.t_end),
            ("evolve.perturbation.eps", e.perturbation.eps),
            ("evolve.burn_in", e.burn_in),
        ];
        for (name, value) in numbers {
            if !value.is_finite() {
                return Err(Failure::config(format!("{name} must be finite, got {value}")));
            }
        }
        let positive = [
            ("threshold.tol", self.threshold.tol),
            ("spectrum.oracle_tol", self.spectrum.oracle_tol),
            ("evolve.t_end", e.t_end),
        ];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(Failure::config(format!("{name} must be positive, got {value}")));
            }
        }
        match &e.dt {
            DtSetting::Fixed(dt) if !(dt.is_finite() && *dt > 0.0) => {
                return Err(Failure::config(format!("evolve.dt must be positive and finite, got {dt}")));
            }
            DtSetting::Named(name) if name != "auto" => {
                return Err(Failure::config(format!("evolve.dt must be a number or \"auto\", got \"{name}\"")));
            }
            _ => {}
        }
        if let Err(err) = e.stepper.parse::<Stepper>() {
            return Err(Failure::config(format!("evolve.stepper: {err}")));
        }
        if e.record_every == 0 {
            return Err(Failure::config("evolve.record_every must be at least 1"));
        }
        if self.stationary.samples == 0 {
            return Err(Failure::config("stationary.samples must be at least 1"));
        }
        let k_rep = (self.grid.nx / 2).saturating_sub(1);
        if self.grid.nx % 2 != 0 || self.grid.nx < 8 {
            return Err(Failure::config(format!("grid.nx must be even and at least 8, got {}", self.grid.nx)));
        }
        if e.perturbation.k > k_rep {
            return Err(Failure::config(format!(
                "evolve.perturbation.k = {} exceeds the resolved range 0..={k_rep}",
                e.perturbation.k
            )));
        }
        if let Some(k) = e.tracked_modes.iter().find(|&&k| k == 0 || k > k_rep) {
            return Err(Failure::config(format!("evolve.tracked_modes: mode {k} outside 1..={k_rep}")));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|f| f.context(&path.display().to_string()))
}
