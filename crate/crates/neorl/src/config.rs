//! Experiment configuration: a sectioned TOML file (`[environment]`,
//! `[agent]`, `[experiment]`) with defaults for every key, plus validation.
//! CLI flags override individual keys after loading.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::bank::LearnerParams;
use crate::composer::WeightingMode;
use crate::env::WorldConfig;
use crate::error::{Error, Result};
use crate::nres::NresStack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: WorldConfig,
    pub agent: AgentSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    /// Strategy name looked up in the agent registry.
    pub mode: String,
    /// Tiling resolutions, e.g. `layers = [3, 7, 23]`.
    pub layers: Vec<u32>,
    pub alpha: f64,
    pub gamma: f64,
    pub q_init: f64,
    /// Behavior-policy exploration rate.
    pub epsilon: f64,
    pub weighting: WeightingMode,
}

impl Default for AgentSection {
    fn default() -> Self {
        let learner = LearnerParams::default();
        AgentSection {
            mode: "neorl".into(),
            layers: vec![3, 7, 23],
            alpha: learner.alpha,
            gamma: learner.gamma,
            q_init: learner.q_init,
            epsilon: 0.05,
            weighting: WeightingMode::InverseArea,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub steps: usize,
    pub runs: usize,
    pub base_seed: u64,
    /// Centered moving-average window for the additional plotting CSVs; 1
    /// disables smoothing. Raw curves are always emitted.
    pub smoothing_window: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            steps: 150_000,
            runs: 100,
            base_seed: 0,
            smoothing_window: 1001,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.learner_params()?;
        NresStack::new(&self.agent.layers)?;
        if !(0.0..=1.0).contains(&self.agent.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be in [0, 1], got {}",
                self.agent.epsilon
            )));
        }
        if self.experiment.steps < 1 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if self.experiment.runs < 1 {
            return Err(Error::InvalidConfig("runs must be >= 1".into()));
        }
        if self.experiment.smoothing_window < 1 || self.experiment.smoothing_window % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "smoothing_window must be odd and >= 1, got {}",
                self.experiment.smoothing_window
            )));
        }
        Ok(())
    }

    pub fn learner_params(&self) -> Result<LearnerParams> {
        LearnerParams::new(self.agent.alpha, self.agent.gamma, self.agent.q_init)
    }

    /// The factory bundle for the configured agent.
    pub fn agent_config(&self) -> Result<AgentConfig> {
        Ok(AgentConfig {
            layers: self.agent.layers.clone(),
            learner: self.learner_params()?,
            epsilon: self.agent.epsilon,
            weighting: self.agent.weighting,
        })
    }
}
