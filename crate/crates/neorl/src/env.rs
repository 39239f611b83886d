//! WaterWorld on the unit square.
//!
//! An inertial agent is accelerated along the cardinal directions while a
//! constant number of creeps drift at constant speed, reflecting off the
//! walls. Touching a creep captures it: green creeps pay +1, red ones -1,
//! and the captured creep respawns with random speed, position and demeanor.
//! When no green creep is left the board restarts for a +5 bonus. Everything
//! is driven by one seeded generator, so a (config, seed, action) triple
//! determines the trajectory bit-for-bit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::composer::ElementOfInterest;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::rng::{stream_rng, STREAM_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demeanor {
    Green,
    Red,
}

/// Physics and reward constants. Distances are arena fractions, one step is
/// `dt` time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub creep_count: usize,
    pub agent_radius: f64,
    pub creep_radius: f64,
    /// Acceleration added along the chosen cardinal direction each step.
    pub accel: f64,
    /// Velocity decay factor per step, in (0, 1].
    pub drag: f64,
    pub creep_speed: f64,
    pub dt: f64,
    /// Minimum distance from the agent at which creeps (re)spawn.
    pub respawn_min_dist: f64,
    /// Probability that a spawned creep is green.
    pub green_fraction: f64,
    pub reward_green: f64,
    pub reward_red: f64,
    pub reward_board_reset: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            creep_count: 8,
            agent_radius: 0.03,
            creep_radius: 0.02,
            accel: 0.002,
            drag: 0.95,
            creep_speed: 0.005,
            dt: 1.0,
            respawn_min_dist: 0.2,
            green_fraction: 0.5,
            reward_green: 1.0,
            reward_red: -1.0,
            reward_board_reset: 5.0,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.creep_count < 1 {
            return bad(format!("creep_count must be >= 1, got {}", self.creep_count));
        }
        if !(self.agent_radius > 0.0 && self.agent_radius < 0.5) {
            return bad(format!("agent_radius out of range: {}", self.agent_radius));
        }
        if !(self.creep_radius > 0.0 && self.creep_radius < 0.5) {
            return bad(format!("creep_radius out of range: {}", self.creep_radius));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.drag > 0.0 && self.drag <= 1.0) {
            return bad(format!("drag must be in (0, 1], got {}", self.drag));
        }
        if !(self.accel >= 0.0 && self.accel.is_finite()) {
            return bad(format!("accel must be non-negative, got {}", self.accel));
        }
        if !(self.creep_speed >= 0.0 && self.creep_speed * self.dt < 1.0) {
            return bad(format!(
                "creep_speed * dt must stay under the arena size, got {}",
                self.creep_speed * self.dt
            ));
        }
        if !(self.green_fraction > 0.0 && self.green_fraction < 1.0) {
            return bad(format!(
                "green_fraction must be strictly inside (0, 1), got {}",
                self.green_fraction
            ));
        }
        // a spawn must be able to clear the agent anywhere in the arena, and
        // must not start inside the capture distance
        if !(self.respawn_min_dist >= 0.0 && self.respawn_min_dist <= 0.5) {
            return bad(format!(
                "respawn_min_dist must be in [0, 0.5], got {}",
                self.respawn_min_dist
            ));
        }
        if self.agent_radius + self.creep_radius >= self.respawn_min_dist {
            return bad(format!(
                "capture distance {} reaches the respawn distance {}; creeps cannot be placed",
                self.agent_radius + self.creep_radius,
                self.respawn_min_dist
            ));
        }
        Ok(())
    }

    fn capture_distance(&self) -> f64 {
        self.agent_radius + self.creep_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Creep {
    pub position: Vec2,
    pub velocity: Vec2,
    pub demeanor: Demeanor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentBody {
    pub position: Vec2,
    pub velocity: Vec2,
}

/// What one step paid out.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    /// Demeanor and pre-removal index of every captured creep.
    pub captures: Vec<(Demeanor, usize)>,
    pub board_reset: bool,
}

/// Full simulation state: agent body, creeps and the generator they draw
/// respawns from.
#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    agent: AgentBody,
    creeps: Vec<Creep>,
    rng: ChaCha8Rng,
}

impl World {
    /// Agent at the arena center with zero velocity, creeps placed uniformly
    /// at random outside `respawn_min_dist`, at least one of them green.
    pub fn reset(config: WorldConfig) -> Result<World> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, STREAM_ENV);
        let agent = AgentBody {
            position: Vec2::new(0.5, 0.5),
            velocity: Vec2::ZERO,
        };
        let creeps = spawn_board(&config, agent.position, &mut rng);
        Ok(World {
            config,
            agent,
            creeps,
            rng,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn agent(&self) -> &AgentBody {
        &self.agent
    }

    pub fn creeps(&self) -> &[Creep] {
        &self.creeps
    }

    pub fn agent_position(&self) -> Vec2 {
        self.agent.position
    }

    /// Advances the world one step under the given acceleration command.
    pub fn step(&mut self, action: ActionId) -> StepOutcome {
        let cfg = self.config;

        // agent: drag, accelerate, integrate; walls clamp and kill the
        // normal velocity component
        self.agent.velocity = self.agent.velocity * cfg.drag + action.unit() * (cfg.accel * cfg.dt);
        self.agent.position = self.agent.position + self.agent.velocity * cfg.dt;
        let (p, v) = (&mut self.agent.position, &mut self.agent.velocity);
        clamp_axis(&mut p.x, &mut v.x);
        clamp_axis(&mut p.y, &mut v.y);

        // creeps: constant-speed drift with specular wall reflection
        for creep in &mut self.creeps {
            creep.position = creep.position + creep.velocity * cfg.dt;
            reflect_axis(&mut creep.position.x, &mut creep.velocity.x);
            reflect_axis(&mut creep.position.y, &mut creep.velocity.y);
        }

        // captures against the post-move agent position
        let capture_distance = cfg.capture_distance();
        let mut captures = Vec::new();
        let mut reward = 0.0;
        for (i, creep) in self.creeps.iter().enumerate() {
            if creep.position.distance(self.agent.position) < capture_distance {
                captures.push((creep.demeanor, i));
                reward += match creep.demeanor {
                    Demeanor::Green => cfg.reward_green,
                    Demeanor::Red => cfg.reward_red,
                };
            }
        }

        // the reset condition looks at the board after removals, before any
        // respawn could smuggle a green back in
        let greens_left = self
            .creeps
            .iter()
            .enumerate()
            .filter(|(i, c)| {
                c.demeanor == Demeanor::Green && !captures.iter().any(|&(_, j)| j == *i)
            })
            .count();

        let board_reset = greens_left == 0;
        if board_reset {
            reward += cfg.reward_board_reset;
            self.creeps = spawn_board(&cfg, self.agent.position, &mut self.rng);
        } else {
            for &(_, i) in &captures {
                self.creeps[i] = spawn_creep(&cfg, self.agent.position, &mut self.rng);
            }
        }

        StepOutcome {
            reward,
            captures,
            board_reset,
        }
    }

    /// The agent position and one element of interest per creep, weighted by
    /// the creep's capture reward.
    pub fn observe(&self) -> (Vec2, Vec<ElementOfInterest>) {
        let eois = self
            .creeps
            .iter()
            .map(|c| ElementOfInterest {
                position: c.position,
                weight: match c.demeanor {
                    Demeanor::Green => self.config.reward_green,
                    Demeanor::Red => self.config.reward_red,
                },
            })
            .collect();
        (self.agent.position, eois)
    }
}

fn clamp_axis(p: &mut f64, v: &mut f64) {
    if *p < 0.0 {
        *p = 0.0;
        *v = 0.0;
    } else if *p > 1.0 {
        *p = 1.0;
        *v = 0.0;
    }
}

fn reflect_axis(p: &mut f64, v: &mut f64) {
    while *p < 0.0 || *p > 1.0 {
        if *p < 0.0 {
            *p = -*p;
        } else {
            *p = 2.0 - *p;
        }
        *v = -*v;
    }
}

fn spawn_creep(cfg: &WorldConfig, agent: Vec2, rng: &mut ChaCha8Rng) -> Creep {
    let position = loop {
        let p = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
        if p.distance(agent) >= cfg.respawn_min_dist {
            break p;
        }
    };
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let demeanor = if rng.random::<f64>() < cfg.green_fraction {
        Demeanor::Green
    } else {
        Demeanor::Red
    };
    Creep {
        position,
        velocity: Vec2::new(heading.cos(), heading.sin()) * cfg.creep_speed,
        demeanor,
    }
}

/// A full board of creeps with at least one green among them, so a reset is
/// always well defined.
fn spawn_board(cfg: &WorldConfig, agent: Vec2, rng: &mut ChaCha8Rng) -> Vec<Creep> {
    let mut creeps: Vec<Creep> = (0..cfg.creep_count)
        .map(|_| spawn_creep(cfg, agent, rng))
        .collect();
    if creeps.iter().all(|c| c.demeanor == Demeanor::Red) {
        let i = rng.random_range(0..creeps.len());
        creeps[i].demeanor = Demeanor::Green;
    }
    creeps
}
