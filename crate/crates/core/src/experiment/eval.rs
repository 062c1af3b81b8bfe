use std::fs::OpenOptions;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sweep::SweepParameter;
use crate::env::{decide_slot, SatelliteEnv, Selection, StepOutcome, UniformPolicy, Variant, ViolationCounts};
use crate::reinforcepp::PolicyNetwork;
use crate::rng::{derive_seed, stream, tag};
use crate::semantics::Mode;
use crate::Result;

/// Bumped whenever [`ResultRow`] gains, loses or reorders a column.
pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// Who picks the joint action during evaluation.
#[derive(Debug, Clone)]
pub enum PolicySource {
    /// Uniform over every head's feasibility mask.
    Random,
    /// Exact per-slot optimum on the realised slot randomness.
    GreedyOracle,
    /// Greedy (argmax) decoding of a trained network under `variant`.
    Network { network: PolicyNetwork, variant: Variant },
}

impl PolicySource {
    /// Variant the environment runs under; baselines always see the masks.
    pub fn variant(&self) -> Variant {
        match self {
            PolicySource::Network { variant, .. } => *variant,
            _ => Variant::DecisionAssisted,
        }
    }
}

/// Aggregates over the slots of one or more episodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeStats {
    pub slots: usize,
    pub tasks: usize,
    pub successes: usize,
    pub slot_reward_sum: f64,
    pub contribution_sum: f64,
    pub success_efficiency_sum: f64,
    pub violations: ViolationCounts,
    pub dropped_arrivals: usize,
    /// Tasks served in each mode, indexed by [`Mode::index`].
    pub mode_counts: [usize; 5],
    /// `slots * users` accumulated per episode, the normaliser of the long-run objective.
    pub user_slots: usize,
    /// Satellite count of the evaluated constellation.
    pub num_satellites: usize,
}

impl EpisodeStats {
    fn record(&mut self, out: &StepOutcome) {
        self.slots += 1;
        self.slot_reward_sum += out.reward;
        self.dropped_arrivals += out.dropped_arrivals;
        self.violations.add(&out.violations);
        for t in &out.tasks {
            self.tasks += 1;
            self.contribution_sum += t.contribution;
            if let Some(mu) = t.efficiency {
                self.successes += 1;
                self.success_efficiency_sum += mu;
            }
            if let Some(a) = t.action {
                if t.failure.is_none() {
                    self.mode_counts[a.mode.index()] += 1;
                }
            }
        }
    }

    pub fn merge(&mut self, o: &EpisodeStats) {
        self.slots += o.slots;
        self.tasks += o.tasks;
        self.successes += o.successes;
        self.slot_reward_sum += o.slot_reward_sum;
        self.contribution_sum += o.contribution_sum;
        self.success_efficiency_sum += o.success_efficiency_sum;
        self.violations.add(&o.violations);
        self.dropped_arrivals += o.dropped_arrivals;
        for i in 0..5 {
            self.mode_counts[i] += o.mode_counts[i];
        }
        self.user_slots += o.user_slots;
        self.num_satellites = o.num_satellites;
    }

    pub fn mean_slot_reward(&self) -> f64 {
        ratio(self.slot_reward_sum, self.slots)
    }

    /// Sum of task contributions over `T * N`.
    pub fn objective(&self) -> f64 {
        ratio(self.contribution_sum, self.user_slots)
    }

    /// Mean contribution per arrived task; failures count as the failure reward.
    pub fn mean_task_efficiency(&self) -> f64 {
        ratio(self.contribution_sum, self.tasks)
    }

    pub fn mean_success_efficiency(&self) -> f64 {
        ratio(self.success_efficiency_sum, self.successes)
    }

    pub fn success_rate(&self) -> f64 {
        ratio(self.successes as f64, self.tasks)
    }

    /// Fraction of successfully served tasks sent in bit mode.
    pub fn bit_mode_share(&self) -> f64 {
        ratio(self.mode_counts[Mode::Bit.index()] as f64, self.mode_counts.iter().sum())
    }
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

/// Runs one full episode from `episode_seed` and returns its statistics and per-slot outcomes.
pub fn run_episode(
    env: &mut SatelliteEnv,
    source: &PolicySource,
    episode_seed: u64,
    policy_seed: u64,
) -> Result<(EpisodeStats, Vec<StepOutcome>)> {
    env.reset_episode(episode_seed)?;
    let mut rng = stream(policy_seed, &[tag::POLICY]);
    let uniform = UniformPolicy { outputs: crate::env::Environment::head_sizes(env).iter().sum() };
    let mut stats = EpisodeStats {
        num_satellites: env.num_satellites(),
        ..Default::default()
    };
    let mut outcomes = Vec::new();
    while !env.is_done() {
        let decisions = match source {
            PolicySource::Random => decide_slot(env, &uniform, &mut Selection::Sample(&mut rng))?.1,
            PolicySource::GreedyOracle => env.slot_optimum()?.decisions,
            PolicySource::Network { network, .. } => decide_slot(env, network, &mut Selection::<rand_chacha::ChaCha8Rng>::Greedy)?.1,
        };
        let out = env.step_detailed(&decisions)?;
        stats.record(&out);
        outcomes.push(out);
    }
    stats.user_slots = stats.slots * env.num_users();
    Ok((stats, outcomes))
}

/// Evaluates `source` for `config.eval.episodes` episodes of evaluation seed `seed`.
///
/// Episode seeds depend only on `seed` and the episode index, so every policy
/// evaluated with the same seed sees identical channels and tasks.
pub fn evaluate(config: &ExperimentConfig, source: &PolicySource, seed: u64) -> Result<EpisodeStats> {
    let mut env = SatelliteEnv::new(config.sim(), source.variant())?;
    let mut total = EpisodeStats::default();
    for e in 0..config.eval.episodes as u64 {
        let episode_seed = derive_seed(seed, &[tag::EVAL_EPISODE, e]);
        let policy_seed = derive_seed(seed, &[tag::EVAL_EPISODE, tag::POLICY, e]);
        let (stats, _) = run_episode(&mut env, source, episode_seed, policy_seed)?;
        total.merge(&stats);
    }
    Ok(total)
}

/// One line of the long-format results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub fingerprint: String,
    pub parameter: Option<SweepParameter>,
    pub value: Option<f64>,
    pub seed: u64,
    pub policy: String,
    pub variant: Variant,
    pub episodes: usize,
    pub slots: usize,
    pub tasks: usize,
    pub dropped_arrivals: usize,
    /// Mean over slots of the per-slot reward.
    pub mean_slot_reward: f64,
    /// Sum of contributions over slots times users.
    pub objective: f64,
    pub mean_task_efficiency: f64,
    pub mean_success_efficiency: f64,
    pub success_rate: f64,
    pub latency_violations: usize,
    pub quality_violations: usize,
    pub compute_violations: usize,
    pub unservable: usize,
    pub infeasible_actions: usize,
    pub bit_mode_share: f64,
    pub wall_clock_s: f64,
    /// Set when the row's job failed; metric columns are then zero.
    pub error: Option<String>,
}

impl ResultRow {
    pub fn from_stats(
        config: &ExperimentConfig,
        policy: &str,
        variant: Variant,
        seed: u64,
        stats: &EpisodeStats,
        started: Instant,
    ) -> Self {
        Self {
            schema_version: RESULT_SCHEMA_VERSION,
            fingerprint: config.fingerprint(),
            parameter: None,
            value: None,
            seed,
            policy: policy.to_string(),
            variant,
            episodes: config.eval.episodes,
            slots: stats.slots,
            tasks: stats.tasks,
            dropped_arrivals: stats.dropped_arrivals,
            mean_slot_reward: stats.mean_slot_reward(),
            objective: stats.objective(),
            mean_task_efficiency: stats.mean_task_efficiency(),
            mean_success_efficiency: stats.mean_success_efficiency(),
            success_rate: stats.success_rate(),
            latency_violations: stats.violations.latency,
            quality_violations: stats.violations.quality,
            compute_violations: stats.violations.compute,
            unservable: stats.violations.unservable,
            infeasible_actions: stats.violations.infeasible_action,
            bit_mode_share: stats.bit_mode_share(),
            wall_clock_s: started.elapsed().as_secs_f64(),
            error: None,
        }
    }

    pub fn failed(config: &ExperimentConfig, policy: &str, variant: Variant, seed: u64, error: String, started: Instant) -> Self {
        let mut row = Self::from_stats(config, policy, variant, seed, &EpisodeStats::default(), started);
        row.error = Some(error);
        row
    }
}

/// Appends rows to a CSV file, writing the header only when the file is new or empty.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
