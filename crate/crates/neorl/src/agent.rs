//! Behavior strategies.
//!
//! Every agent variant sits behind the [`Agent`] trait and is registered by
//! name in an [`AgentRegistry`]; the experiment config's `mode` key (or the
//! CLI override) picks one at runtime. Ships with:
//!
//! * `neorl` — the learner-bank agent: compose a Q-field over the cells that
//!   currently hold elements of interest, act epsilon-greedily, update every
//!   learner off-policy from the resulting transition.
//! * `brownian` — the control: uniformly random actions (epsilon-greedy with
//!   epsilon 1.0), no learning.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::action::ActionId;
use crate::bank::{LearnerParams, OvfBank};
use crate::composer::{q_field, rewarded_cells, select_action, ElementOfInterest, QField, WeightingMode};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::nres::NresStack;
use crate::rng::{stream_rng, STREAM_POLICY};

/// Everything a factory needs to build an agent.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub layers: Vec<u32>,
    pub learner: LearnerParams,
    pub epsilon: f64,
    pub weighting: WeightingMode,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            layers: vec![3, 7, 23],
            learner: LearnerParams::default(),
            epsilon: 0.05,
            weighting: WeightingMode::InverseArea,
        }
    }
}

/// A behavior strategy driving one run.
pub trait Agent: Send {
    /// Chooses the next action from the current observation.
    fn act(&mut self, position: Vec2, eois: &[ElementOfInterest]) -> Result<ActionId>;

    /// Feeds back the transition the environment produced. Non-learning
    /// agents ignore it.
    fn learn(&mut self, prev: Vec2, action: ActionId, next: Vec2) -> Result<()>;

    /// The learner bank, for strategies that keep one.
    fn bank(&self) -> Option<&OvfBank> {
        None
    }

    fn into_bank(self: Box<Self>) -> Option<OvfBank> {
        None
    }
}

pub type AgentFactory = fn(&AgentConfig, u64) -> Result<Box<dyn Agent>>;

/// Name-keyed factories for agent strategies.
pub struct AgentRegistry {
    factories: BTreeMap<String, AgentFactory>,
}

impl AgentRegistry {
    /// Registry with the built-in `neorl` and `brownian` strategies.
    pub fn with_builtins() -> AgentRegistry {
        let mut registry = AgentRegistry {
            factories: BTreeMap::new(),
        };
        registry.register("neorl", |cfg, seed| {
            Ok(Box::new(NeoRlAgent::new(cfg, seed)?))
        });
        registry.register("brownian", |_cfg, seed| {
            Ok(Box::new(BrownianAgent::new(seed)))
        });
        registry
    }

    pub fn register(&mut self, name: &str, factory: AgentFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    /// Builds the strategy registered under `mode`, seeded for one run.
    pub fn build(&self, mode: &str, cfg: &AgentConfig, seed: u64) -> Result<Box<dyn Agent>> {
        let factory = self
            .factories
            .get(mode)
            .ok_or_else(|| Error::UnknownMode(mode.to_string()))?;
        factory(cfg, seed)
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }
}

impl Default for AgentRegistry {
    fn default() -> Self {
        AgentRegistry::with_builtins()
    }
}

/// The learner-bank strategy.
pub struct NeoRlAgent {
    bank: OvfBank,
    epsilon: f64,
    weighting: WeightingMode,
    rng: ChaCha8Rng,
    frozen: bool,
}

impl NeoRlAgent {
    pub fn new(cfg: &AgentConfig, seed: u64) -> Result<NeoRlAgent> {
        let stack = NresStack::new(&cfg.layers)?;
        let bank = OvfBank::new(stack, cfg.learner)?;
        Ok(Self::from_bank(bank, cfg.epsilon, cfg.weighting, seed, false))
    }

    /// Wraps an existing bank, e.g. one restored from a snapshot. A frozen
    /// agent skips learning and only exploits the stored values.
    pub fn from_bank(
        bank: OvfBank,
        epsilon: f64,
        weighting: WeightingMode,
        seed: u64,
        frozen: bool,
    ) -> NeoRlAgent {
        NeoRlAgent {
            bank,
            epsilon,
            weighting,
            rng: stream_rng(seed, STREAM_POLICY),
            frozen,
        }
    }
}

impl Agent for NeoRlAgent {
    fn act(&mut self, position: Vec2, eois: &[ElementOfInterest]) -> Result<ActionId> {
        let stack = self.bank.stack();
        let agent_cells = stack.activation_vector(position)?;
        let rewarded = rewarded_cells(eois, stack)?;
        let field = q_field(&self.bank, &agent_cells, &rewarded, self.weighting)?;
        Ok(select_action(&field, self.epsilon, &mut self.rng))
    }

    fn learn(&mut self, prev: Vec2, action: ActionId, next: Vec2) -> Result<()> {
        if self.frozen {
            return Ok(());
        }
        let prev_cells = self.bank.stack().activation_vector(prev)?;
        let next_cells = self.bank.stack().activation_vector(next)?;
        self.bank.step_update(&prev_cells, action, &next_cells)
    }

    fn bank(&self) -> Option<&OvfBank> {
        Some(&self.bank)
    }

    fn into_bank(self: Box<Self>) -> Option<OvfBank> {
        Some(self.bank)
    }
}

/// The random-walk control strategy.
pub struct BrownianAgent {
    rng: ChaCha8Rng,
}

impl BrownianAgent {
    pub fn new(seed: u64) -> BrownianAgent {
        BrownianAgent {
            rng: stream_rng(seed, STREAM_POLICY),
        }
    }
}

impl Agent for BrownianAgent {
    fn act(&mut self, _position: Vec2, _eois: &[ElementOfInterest]) -> Result<ActionId> {
        Ok(select_action(&QField::ZERO, 1.0, &mut self.rng))
    }

    fn learn(&mut self, _prev: Vec2, _action: ActionId, _next: Vec2) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_builtins() {
        let registry = AgentRegistry::with_builtins();
        assert_eq!(registry.names(), vec!["brownian", "neorl"]);
        let cfg = AgentConfig::default();
        assert!(registry.build("neorl", &cfg, 0).is_ok());
        assert!(registry.build("brownian", &cfg, 0).is_ok());
        assert!(matches!(
            registry.build("dqn", &cfg, 0),
            Err(Error::UnknownMode(_))
        ));
    }

    #[test]
    fn custom_strategies_can_be_registered() {
        fn always_north(_cfg: &AgentConfig, _seed: u64) -> Result<Box<dyn Agent>> {
            struct North;
            impl Agent for North {
                fn act(&mut self, _p: Vec2, _e: &[ElementOfInterest]) -> Result<ActionId> {
                    Ok(ActionId::North)
                }
                fn learn(&mut self, _p: Vec2, _a: ActionId, _n: Vec2) -> Result<()> {
                    Ok(())
                }
            }
            Ok(Box::new(North))
        }
        let mut registry = AgentRegistry::with_builtins();
        registry.register("north", always_north);
        let mut agent = registry.build("north", &AgentConfig::default(), 0).unwrap();
        assert_eq!(
            agent.act(Vec2::new(0.5, 0.5), &[]).unwrap(),
            ActionId::North
        );
    }

    #[test]
    fn neorl_agent_learns_and_exposes_its_bank() {
        let cfg = AgentConfig {
            layers: vec![3],
            ..AgentConfig::default()
        };
        let mut agent = NeoRlAgent::new(&cfg, 1).unwrap();
        agent
            .learn(Vec2::new(0.1, 0.1), ActionId::East, Vec2::new(0.5, 0.1))
            .unwrap();
        let bank = agent.bank().unwrap();
        let goal = crate::nres::CellId {
            layer_index: 0,
            ix: 1,
            iy: 0,
        };
        let from = crate::nres::CellId {
            layer_index: 0,
            ix: 0,
            iy: 0,
        };
        assert!(bank.max_q(goal, from).unwrap() > 0.0);
    }

    #[test]
    fn frozen_agent_does_not_learn() {
        let cfg = AgentConfig {
            layers: vec![3],
            ..AgentConfig::default()
        };
        let fresh = NeoRlAgent::new(&cfg, 1).unwrap();
        let snapshot = fresh.bank().unwrap().snapshot();
        let mut frozen = NeoRlAgent::from_bank(
            OvfBank::restore(&snapshot).unwrap(),
            0.0,
            WeightingMode::InverseArea,
            1,
            true,
        );
        frozen
            .learn(Vec2::new(0.1, 0.1), ActionId::East, Vec2::new(0.5, 0.1))
            .unwrap();
        assert_eq!(frozen.bank().unwrap(), fresh.bank().unwrap());
    }

    #[test]
    fn brownian_ignores_observations_deterministically() {
        let mut a = BrownianAgent::new(7);
        let mut b = BrownianAgent::new(7);
        for _ in 0..100 {
            let pa = a.act(Vec2::new(0.5, 0.5), &[]).unwrap();
            let pb = b.act(Vec2::new(0.9, 0.1), &[]).unwrap();
            assert_eq!(pa, pb);
        }
        assert!(a.bank().is_none());
    }
}
