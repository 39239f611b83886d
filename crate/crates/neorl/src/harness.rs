//! Experiment execution: seeded runs, multi-run aggregation, CSV emission.
//!
//! Run `i` of an experiment uses seed `base_seed + i`; the seed derives
//! decorrelated environment and policy streams, so a (config, base_seed)
//! pair fully determines every emitted byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::agent::{Agent, AgentRegistry};
use crate::config::ExperimentConfig;
use crate::env::World;
use crate::error::{Error, Result};

/// Reward and accumulated-score series of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: u64,
    pub rewards: Vec<f64>,
    /// `accumulated[t]` is the sum of `rewards[..=t]`.
    pub accumulated: Vec<f64>,
}

/// Per-timestep mean and standard error across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Which series of a record to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Reward,
    Accumulated,
}

pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    /// Bank of the first run (seed `base_seed`), when the strategy keeps one.
    pub bank: Option<crate::bank::OvfBank>,
}

/// Drives one agent through `steps` timesteps of a fresh world:
/// observe, act, step the environment, feed the transition back.
pub fn run_with_agent(
    world: &mut World,
    agent: &mut dyn Agent,
    steps: usize,
    run_id: u64,
) -> Result<RunRecord> {
    let mut rewards = Vec::with_capacity(steps);
    let mut accumulated = Vec::with_capacity(steps);
    let mut total = 0.0;
    for _ in 0..steps {
        let (position, eois) = world.observe();
        let action = agent.act(position, &eois)?;
        let outcome = world.step(action);
        agent.learn(position, action, world.agent_position())?;
        total += outcome.reward;
        rewards.push(outcome.reward);
        accumulated.push(total);
    }
    Ok(RunRecord {
        run_id,
        rewards,
        accumulated,
    })
}

/// One seeded run from a fresh agent with no prior experience.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    Ok(run_single_with_bank(cfg, seed)?.0)
}

fn run_single_with_bank(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(RunRecord, Option<crate::bank::OvfBank>)> {
    let mut env_cfg = cfg.environment;
    env_cfg.seed = seed;
    let mut world = World::reset(env_cfg)?;
    let registry = AgentRegistry::with_builtins();
    let mut agent = registry.build(&cfg.agent.mode, &cfg.agent_config()?, seed)?;
    let record = run_with_agent(&mut world, agent.as_mut(), cfg.experiment.steps, seed)?;
    Ok((record, agent.into_bank()))
}

/// Runs the configured number of seeded repetitions (in parallel) and keeps
/// the first run's bank for persistence.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let base = cfg.experiment.base_seed;
    let outputs: Vec<(RunRecord, Option<crate::bank::OvfBank>)> = (0..cfg.experiment.runs as u64)
        .into_par_iter()
        .map(|i| {
            let (record, bank) = run_single_with_bank(cfg, base + i)?;
            Ok((record, if i == 0 { bank } else { None }))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(outputs.len());
    let mut bank = None;
    for (record, b) in outputs {
        if bank.is_none() {
            bank = b;
        }
        records.push(record);
    }
    Ok(ExperimentOutput { records, bank })
}

/// Per-timestep mean and standard error of the chosen series. Records are
/// summed in run-id order, so the aggregate does not depend on the order
/// they arrive in.
pub fn aggregate(records: &[RunRecord], series: Series) -> Result<AggregateCurve> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to aggregate".into()));
    }
    let mut by_id: Vec<&RunRecord> = records.iter().collect();
    by_id.sort_by_key(|r| r.run_id);
    let len = series_of(by_id[0], series).len();
    for r in &by_id {
        let l = series_of(r, series).len();
        if l != len {
            return Err(Error::LengthMismatch { left: len, right: l });
        }
    }
    let n = by_id.len() as f64;
    let mut mean = vec![0.0; len];
    for r in &by_id {
        for (m, v) in mean.iter_mut().zip(series_of(r, series)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut stderr = vec![0.0; len];
    if by_id.len() > 1 {
        for r in &by_id {
            for (s, (v, m)) in stderr.iter_mut().zip(series_of(r, series).iter().zip(&mean)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stderr {
            *s = (*s / (n - 1.0)).sqrt() / n.sqrt();
        }
    }
    Ok(AggregateCurve { mean, stderr })
}

fn series_of(record: &RunRecord, series: Series) -> &[f64] {
    match series {
        Series::Reward => &record.rewards,
        Series::Accumulated => &record.accumulated,
    }
}

/// Component-wise sum of mono-resolution curves; errors combine as
/// independent (root sum of squares).
pub fn sum_of_parts(curves: &[AggregateCurve]) -> Result<AggregateCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidConfig("no curves to sum".into()))?;
    let len = first.mean.len();
    for c in curves {
        if c.mean.len() != len {
            return Err(Error::LengthMismatch {
                left: len,
                right: c.mean.len(),
            });
        }
    }
    let mut mean = vec![0.0; len];
    let mut var = vec![0.0; len];
    for c in curves {
        for ((m, v), (cm, cs)) in mean.iter_mut().zip(&mut var).zip(c.mean.iter().zip(&c.stderr)) {
            *m += cm;
            *v += cs * cs;
        }
    }
    let stderr = var.into_iter().map(f64::sqrt).collect();
    Ok(AggregateCurve { mean, stderr })
}

/// Centered moving average with a shrinking window at the edges. Window 1 is
/// the identity.
pub fn smooth(curve: &AggregateCurve, window: usize) -> AggregateCurve {
    let half = window / 2;
    let n = curve.mean.len();
    let smooth_series = |xs: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|t| {
                let lo = t.saturating_sub(half);
                let hi = (t + half + 1).min(n);
                xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect()
    };
    AggregateCurve {
        mean: smooth_series(&curve.mean),
        stderr: smooth_series(&curve.stderr),
    }
}

/// Writes records as `timestep,run_id,reward,accumulated` rows, one per
/// timestep per run, LF line endings.
pub fn emit_records_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "timestep,run_id,reward,accumulated").map_err(io_err)?;
    for r in records {
        for (t, (reward, acc)) in r.rewards.iter().zip(&r.accumulated).enumerate() {
            writeln!(w, "{t},{},{reward},{acc}", r.run_id).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Writes a curve as `timestep,mean,stderr` rows, LF line endings.
pub fn emit_curve_csv(curve: &AggregateCurve, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "timestep,mean,stderr").map_err(io_err)?;
    for (t, (m, s)) in curve.mean.iter().zip(&curve.stderr).enumerate() {
        writeln!(w, "{t},{m},{s}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
