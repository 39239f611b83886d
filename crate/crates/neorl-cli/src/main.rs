use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use neorl::composer::WeightingMode;
use neorl::harness::{
    aggregate, emit_curve_csv, emit_records_csv, run_experiment, run_with_agent, smooth,
    AggregateCurve, Series,
};
use neorl::{agent::NeoRlAgent, Agent, ExperimentConfig, OvfBank, World};

#[derive(Parser)]
#[command(name = "neorl", version, about = "Multi-resolution place-cell Q-learning on WaterWorld")]
struct Cli {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Config keys that may be overridden from the command line.
#[derive(Args, Clone)]
struct Overrides {
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent runs to average over.
    #[arg(long)]
    runs: Option<usize>,
    /// Timesteps per run.
    #[arg(long)]
    steps: Option<usize>,
    /// Tiling resolutions, comma separated, e.g. --layers 3,7,23
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<u32>>,
    /// Output directory for CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and emit record and curve CSVs.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Agent strategy registered under this name (neorl, brownian).
        #[arg(long)]
        mode: Option<String>,
        /// Behavior-policy exploration rate.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Write the first run's learner bank here.
        #[arg(long)]
        snapshot_out: Option<PathBuf>,
    },
    /// Run a mono-resolution experiment per listed resolution.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Resolutions to sweep, e.g. --resolutions 10,30,50,70,90
        #[arg(long, value_delimiter = ',', required = true)]
        resolutions: Vec<u32>,
    },
    /// Multi-resolution agent vs. its mono-resolution parts and their sum.
    Compare {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Load a snapshot and run its bank without training (greedy by default).
    Replay {
        #[command(flatten)]
        overrides: Overrides,
        /// Snapshot file produced by `run --snapshot-out`.
        #[arg(long)]
        snapshot: PathBuf,
        /// Exploration rate during replay.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Keep learning during replay instead of freezing the bank.
        #[arg(long)]
        learn: bool,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    match cli.command {
        Command::Run {
            overrides,
            mode,
            epsilon,
            snapshot_out,
        } => {
            apply_overrides(&mut cfg, &overrides);
            if let Some(mode) = mode {
                cfg.agent.mode = mode;
            }
            if let Some(epsilon) = epsilon {
                cfg.agent.epsilon = epsilon;
            }
            run_cmd(&cfg, &overrides.out, snapshot_out.as_deref())
        }
        Command::Sweep {
            overrides,
            resolutions,
        } => {
            apply_overrides(&mut cfg, &overrides);
            sweep_cmd(&cfg, &overrides.out, &resolutions)
        }
        Command::Compare { overrides } => {
            apply_overrides(&mut cfg, &overrides);
            compare_cmd(&cfg, &overrides.out)
        }
        Command::Replay {
            overrides,
            snapshot,
            epsilon,
            learn,
        } => {
            apply_overrides(&mut cfg, &overrides);
            replay_cmd(&cfg, &overrides.out, &snapshot, epsilon, learn)
        }
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, o: &Overrides) {
    if let Some(seed) = o.seed {
        cfg.experiment.base_seed = seed;
    }
    if let Some(runs) = o.runs {
        cfg.experiment.runs = runs;
    }
    if let Some(steps) = o.steps {
        cfg.experiment.steps = steps;
    }
    if let Some(layers) = &o.layers {
        cfg.agent.layers = layers.clone();
    }
}

fn run_cmd(cfg: &ExperimentConfig, out: &Path, snapshot_out: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let output = run_experiment(cfg)?;
    emit_records_csv(&output.records, &out.join("records.csv"))?;
    let reward = aggregate(&output.records, Series::Reward)?;
    let accumulated = aggregate(&output.records, Series::Accumulated)?;
    emit_curves(&reward, out, "reward", cfg.experiment.smoothing_window)?;
    emit_curves(&accumulated, out, "accumulated", cfg.experiment.smoothing_window)?;

    if let Some(path) = snapshot_out {
        match output.bank {
            Some(bank) => fs::write(path, bank.snapshot())
                .with_context(|| format!("writing {}", path.display()))?,
            None => bail!("mode `{}` keeps no learner bank to snapshot", cfg.agent.mode),
        }
    }

    let final_mean = *accumulated.mean.last().unwrap();
    let final_sem = *accumulated.stderr.last().unwrap();
    println!(
        "{} | layers {:?} | {} runs x {} steps | final accumulated {:.2} +/- {:.2}",
        cfg.agent.mode,
        cfg.agent.layers,
        cfg.experiment.runs,
        cfg.experiment.steps,
        final_mean,
        final_sem
    );
    Ok(())
}

fn sweep_cmd(cfg: &ExperimentConfig, out: &Path, resolutions: &[u32]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    println!("resolution,final_accumulated_mean,final_accumulated_stderr");
    for &n in resolutions {
        let mut mono = cfg.clone();
        mono.agent.layers = vec![n];
        mono.validate()?;
        let output = run_experiment(&mono)?;
        let accumulated = aggregate(&output.records, Series::Accumulated)?;
        emit_curves(
            &accumulated,
            out,
            &format!("accumulated_n{n}"),
            cfg.experiment.smoothing_window,
        )?;
        println!(
            "{n},{},{}",
            accumulated.mean.last().unwrap(),
            accumulated.stderr.last().unwrap()
        );
    }
    Ok(())
}

fn compare_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    if cfg.agent.layers.len() < 2 {
        bail!("compare needs a multi-layer stack, got {:?}", cfg.agent.layers);
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let window = cfg.experiment.smoothing_window;

    let multi_out = run_experiment(cfg)?;
    let multi_reward = aggregate(&multi_out.records, Series::Reward)?;
    emit_curves(&multi_reward, out, "reward_multi", window)?;
    emit_curves(
        &aggregate(&multi_out.records, Series::Accumulated)?,
        out,
        "accumulated_multi",
        window,
    )?;

    let mut mono_rewards = Vec::new();
    for &n in &cfg.agent.layers {
        let mut mono = cfg.clone();
        mono.agent.layers = vec![n];
        let output = run_experiment(&mono)?;
        let reward = aggregate(&output.records, Series::Reward)?;
        emit_curves(&reward, out, &format!("reward_mono_n{n}"), window)?;
        emit_curves(
            &aggregate(&output.records, Series::Accumulated)?,
            out,
            &format!("accumulated_mono_n{n}"),
            window,
        )?;
        mono_rewards.push((n, reward));
    }

    let parts: Vec<AggregateCurve> = mono_rewards.iter().map(|(_, c)| c.clone()).collect();
    let sum = neorl::harness::sum_of_parts(&parts)?;
    emit_curves(&sum, out, "reward_sum_of_parts", window)?;

    // tail window comparison: mean reward per step over the final stretch
    let tail = cfg.experiment.steps.min(10_000);
    let tail_mean = |c: &AggregateCurve| -> f64 {
        let xs = &c.mean[c.mean.len() - tail..];
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let multi_tail = tail_mean(&multi_reward);
    println!("agent,final_{tail}_steps_mean_reward");
    println!("multi{:?},{multi_tail}", cfg.agent.layers);
    for (n, c) in &mono_rewards {
        let mono_tail = tail_mean(c);
        let ratio = if mono_tail != 0.0 { multi_tail / mono_tail } else { f64::INFINITY };
        println!("n{n},{mono_tail} (multi/mono ratio {ratio:.2})");
    }
    println!("sum_of_parts,{}", tail_mean(&sum));
    Ok(())
}

fn replay_cmd(
    cfg: &ExperimentConfig,
    out: &Path,
    snapshot: &Path,
    epsilon: f64,
    learn: bool,
) -> Result<()> {
    let bytes = fs::read(snapshot).with_context(|| format!("reading {}", snapshot.display()))?;
    let bank = OvfBank::restore(&bytes)?;
    let seed = cfg.experiment.base_seed;
    let mut agent: Box<dyn Agent> = Box::new(NeoRlAgent::from_bank(
        bank,
        epsilon,
        WeightingMode::InverseArea,
        seed,
        !learn,
    ));
    let mut env_cfg = cfg.environment;
    env_cfg.seed = seed;
    let mut world = World::reset(env_cfg)?;
    let record = run_with_agent(&mut world, agent.as_mut(), cfg.experiment.steps, seed)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    emit_records_csv(&[record.clone()], &out.join("replay_records.csv"))?;
    println!(
        "replayed {} steps from {} | final accumulated {:.2}",
        cfg.experiment.steps,
        snapshot.display(),
        record.accumulated.last().unwrap()
    );
    Ok(())
}

fn emit_curves(curve: &AggregateCurve, out: &Path, name: &str, window: usize) -> Result<()> {
    emit_curve_csv(curve, &out.join(format!("{name}.csv")))?;
    if window > 1 {
        emit_curve_csv(&smooth(curve, window), &out.join(format!("{name}_smooth.csv")))?;
    }
    Ok(())
}
