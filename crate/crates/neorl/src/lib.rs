//! Distributed-representation navigation agents.
//!
//! The agent keeps one tabular Q-learner per receptive field of one or more
//! place-cell tilings of the unit square. Every learner is rewarded only by
//! activation of its own cell and is updated off-policy from the shared
//! behavior stream, so the bank forms a basis of value functions over each
//! tiling. Behavior is synthesized at decision time by weighted superposition
//! of the learners whose cells currently hold an element of interest.
//!
//! The crate also ships a WaterWorld reimplementation (inertial agent, eight
//! bouncing creeps, capture rewards and board resets) and an experiment
//! harness that produces learning-curve CSVs over many seeded runs.

pub mod action;
pub mod agent;
pub mod bank;
pub mod composer;
pub mod config;
pub mod env;
pub mod error;
pub mod geom;
pub mod harness;
pub mod nres;
pub mod rng;

pub use action::ActionId;
pub use agent::{Agent, AgentConfig, AgentRegistry};
pub use bank::{LearnerParams, OvfBank};
pub use composer::{ElementOfInterest, QField, RewardedCellSet, WeightingMode};
pub use config::ExperimentConfig;
pub use env::{World, WorldConfig};
pub use error::{Error, Result};
pub use geom::Vec2;
pub use nres::{CellId, LayerSpec, NresStack};
