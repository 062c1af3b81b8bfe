//! Experiment driver: configuration, training with checkpointing,
//! evaluation of trained policies and baselines, parameter sweeps, and the
//! small-instance oracle trace.

mod checkpoint;
mod config;
mod eval;
mod sweep;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{EvalConfig, ExperimentConfig};
pub use eval::{append_rows, evaluate, read_rows, run_episode, EpisodeStats, PolicySource, ResultRow, RESULT_SCHEMA_VERSION};
pub use sweep::{run_sweep, PolicyChoice, SweepParameter, SweepSpec};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{SatelliteEnv, Variant};
use crate::reinforcepp::{train, CurvePoint, TrainOutcome};
use crate::rng::{derive_seed, tag};
use crate::{Error, Result};

/// Largest instance the oracle trace accepts.
pub const ORACLE_MAX_SATELLITES: usize = 4;
pub const ORACLE_MAX_USERS: usize = 2;

/// Trains `config.variant` and returns the network with its learning curve.
pub fn train_config(config: &ExperimentConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let env = SatelliteEnv::new(config.sim(), config.variant)?;
    train(&env, &config.train, config.seed)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub checkpoint_path: PathBuf,
    pub curve_path: PathBuf,
    pub checkpoint_hash: String,
    pub curve: Vec<CurvePoint>,
}

/// Trains, then persists the checkpoint and the learning-curve CSV under `config.out_dir`.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainReport> {
    let outcome = train_config(config)?;
    let ckpt = Checkpoint {
        fingerprint: config.fingerprint(),
        network: outcome.network,
    };
    let checkpoint_path = config.checkpoint_path();
    ckpt.save(&checkpoint_path)?;
    let curve_path = config.out_dir.join("curves").join(format!("{}.csv", ckpt.fingerprint));
    std::fs::create_dir_all(curve_path.parent().expect("curve path has a parent"))?;
    let mut w = csv::Writer::from_path(&curve_path)?;
    for p in &outcome.curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(TrainReport {
        checkpoint_path,
        curve_path,
        checkpoint_hash: ckpt.hash(),
        curve: outcome.curve,
    })
}

/// Turns a policy choice into something evaluable.
///
/// Trained choices reuse the checkpoint written for the matching configuration and train
/// one when absent. `Checkpoint` uses `explicit` when given, otherwise the checkpoint of
/// `config` itself, and never trains.
pub fn resolve_policy(config: &ExperimentConfig, choice: PolicyChoice, explicit: Option<&Path>) -> Result<PolicySource> {
    match choice {
        PolicyChoice::Random => Ok(PolicySource::Random),
        PolicyChoice::GreedyOracle => Ok(PolicySource::GreedyOracle),
        PolicyChoice::Checkpoint => {
            let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| config.checkpoint_path());
            let ckpt = Checkpoint::load(&path)?;
            let variant = config.variant;
            check_dims(config, &ckpt, variant)?;
            Ok(PolicySource::Network { network: ckpt.network, variant })
        }
        trained => {
            let variant = trained.trained_variant().expect("trained choice");
            let mut cfg = config.clone();
            cfg.variant = variant;
            let path = cfg.checkpoint_path();
            if path.exists() {
                let ckpt = Checkpoint::load(&path)?;
                check_dims(&cfg, &ckpt, variant)?;
                return Ok(PolicySource::Network { network: ckpt.network, variant });
            }
            let report = cmd_train(&cfg)?;
            let ckpt = Checkpoint::load(&report.checkpoint_path)?;
            Ok(PolicySource::Network { network: ckpt.network, variant })
        }
    }
}

fn check_dims(config: &ExperimentConfig, ckpt: &Checkpoint, variant: Variant) -> Result<()> {
    use crate::env::Environment;
    let env = SatelliteEnv::new(config.sim(), variant)?;
    let outputs: usize = env.head_sizes().iter().sum();
    if ckpt.network.input_dim() != env.observation_dim() || ckpt.network.output_dim() != outputs {
        return Err(Error::Checkpoint(format!(
            "checkpoint maps {} -> {} but the configuration needs {} -> {}",
            ckpt.network.input_dim(),
            ckpt.network.output_dim(),
            env.observation_dim(),
            outputs
        )));
    }
    Ok(())
}

/// Evaluates one policy for the configured number of episodes at `config.seed`.
pub fn cmd_eval(config: &ExperimentConfig, choice: PolicyChoice, checkpoint: Option<&Path>) -> Result<ResultRow> {
    config.validate()?;
    let started = std::time::Instant::now();
    let source = resolve_policy(config, choice, checkpoint)?;
    let stats = evaluate(config, &source, config.seed)?;
    Ok(ResultRow::from_stats(config, choice.name(), source.variant(), config.seed, &stats, started))
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "the configuration has no [sweep] section"))?;
    run_sweep(config, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTraceRow {
    pub episode: usize,
    pub slot: usize,
    pub tasks: usize,
    pub reward: f64,
    /// Whether full enumeration ran and agreed with the decomposed search.
    pub enumerated: bool,
}

/// Per-slot optimum over the first evaluation episode(s), cross-checked by full
/// enumeration whenever the slot's joint action space fits in `enumeration_limit`.
pub fn cmd_oracle(config: &ExperimentConfig, enumeration_limit: u64) -> Result<Vec<OracleTraceRow>> {
    config.validate()?;
    let m = config.constellation.num_satellites;
    let n = config.users.num_users;
    if m > ORACLE_MAX_SATELLITES || n > ORACLE_MAX_USERS {
        return Err(Error::InstanceTooLarge(format!(
            "oracle trace needs M <= {ORACLE_MAX_SATELLITES} and N <= {ORACLE_MAX_USERS}, got M = {m}, N = {n}"
        )));
    }
    let mut env = SatelliteEnv::new(config.sim(), Variant::DecisionAssisted)?;
    let mut rows = Vec::new();
    for e in 0..config.eval.episodes {
        env.reset_episode(derive_seed(config.seed, &[tag::EVAL_EPISODE, e as u64]))?;
        while !env.is_done() {
            let fast = env.slot_optimum()?;
            let enumerated = match env.exhaustive_slot_optimum(enumeration_limit) {
                Ok(full) => {
                    if (full.reward - fast.reward).abs() > 1e-9 {
                        return Err(Error::InvalidArgument(format!(
                            "oracle disagreement at slot {}: enumeration {} vs decomposition {}",
                            env.slot(),
                            full.reward,
                            fast.reward
                        )));
                    }
                    true
                }
                Err(Error::InstanceTooLarge(_)) => false,
                Err(e) => return Err(e),
            };
            rows.push(OracleTraceRow {
                episode: e,
                slot: env.slot(),
                tasks: env.tasks().len(),
                reward: fast.reward,
                enumerated,
            });
            env.step_detailed(&fast.decisions)?;
        }
    }
    Ok(rows)
}

pub fn write_oracle_trace(path: &Path, rows: &[OracleTraceRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
