use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::eval::{evaluate, ResultRow};
use super::resolve_policy;
use crate::env::Variant;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    /// Satellite downlink transmit power, W.
    TransmitPower,
    SatelliteCount,
    /// Poisson arrivals per user per slot.
    ArrivalRate,
    /// Upper end of the latency threshold range, s.
    LatencyMax,
    /// Lower end of the quality threshold range, dB.
    QualityMin,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::TransmitPower => "transmit-power",
            SweepParameter::SatelliteCount => "satellite-count",
            SweepParameter::ArrivalRate => "arrival-rate",
            SweepParameter::LatencyMax => "latency-max",
            SweepParameter::QualityMin => "quality-min",
        }
    }

    /// Copy of `base` with this parameter set to `value`, validated.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParameter::TransmitPower => cfg.channel.tx_power_w = value,
            SweepParameter::SatelliteCount => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::config("sweep.values", format!("satellite count {value} is not a positive integer")));
                }
                cfg.constellation.num_satellites = value as usize;
            }
            SweepParameter::ArrivalRate => cfg.scenario.arrival_rate = value,
            SweepParameter::LatencyMax => cfg.scenario.latency_range_s[1] = value,
            SweepParameter::QualityMin => cfg.scenario.quality_range_db[0] = value,
        }
        cfg.sweep = None;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Which policy a sweep or evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyChoice {
    Random,
    GreedyOracle,
    /// Trained with masks and adaptive weights.
    DecisionAssisted,
    FixedWeight,
    NoMask,
    /// A checkpoint previously written for the point's configuration.
    Checkpoint,
}

impl PolicyChoice {
    pub fn name(self) -> &'static str {
        match self {
            PolicyChoice::Random => "random",
            PolicyChoice::GreedyOracle => "greedy-oracle",
            PolicyChoice::DecisionAssisted => "decision-assisted",
            PolicyChoice::FixedWeight => "fixed-weight",
            PolicyChoice::NoMask => "no-mask",
            PolicyChoice::Checkpoint => "checkpoint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let all = [
            PolicyChoice::Random,
            PolicyChoice::GreedyOracle,
            PolicyChoice::DecisionAssisted,
            PolicyChoice::FixedWeight,
            PolicyChoice::NoMask,
            PolicyChoice::Checkpoint,
        ];
        all.into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy {s:?}")))
    }

    /// Variant a trained choice is trained and evaluated under.
    pub fn trained_variant(self) -> Option<Variant> {
        match self {
            PolicyChoice::DecisionAssisted => Some(Variant::DecisionAssisted),
            PolicyChoice::FixedWeight => Some(Variant::FixedWeight),
            PolicyChoice::NoMask => Some(Variant::NoMask),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Seeds per point: the experiment seed and its successors.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_policy")]
    pub policy: PolicyChoice,
    /// Upper bound on concurrently running jobs; all cores when unset.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

fn default_seeds() -> usize {
    1
}

fn default_policy() -> PolicyChoice {
    PolicyChoice::GreedyOracle
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep.values", "must list at least one value"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep.values", "must be finite"));
        }
        if self.seeds == 0 {
            return Err(Error::config("sweep.seeds", "must be at least 1"));
        }
        if self.parallelism == Some(0) {
            return Err(Error::config("sweep.parallelism", "must be at least 1"));
        }
        Ok(())
    }
}

fn run_point(base: &ExperimentConfig, spec: &SweepSpec, value: f64, seed: u64) -> ResultRow {
    let started = Instant::now();
    let variant = spec.policy.trained_variant().unwrap_or(base.variant);
    let attempt = || -> Result<ResultRow> {
        let mut cfg = spec.parameter.apply(base, value)?;
        cfg.seed = seed;
        let source = resolve_policy(&cfg, spec.policy, None)?;
        let stats = evaluate(&cfg, &source, seed)?;
        Ok(ResultRow::from_stats(&cfg, spec.policy.name(), source.variant(), seed, &stats, started))
    };
    let mut row = attempt().unwrap_or_else(|e| {
        let mut fallback = base.clone();
        fallback.seed = seed;
        ResultRow::failed(&fallback, spec.policy.name(), variant, seed, e.to_string(), started)
    });
    row.parameter = Some(spec.parameter);
    row.value = Some(value);
    row
}

/// Runs every (value, seed) job; failures are recorded in the row's `error` column.
///
/// Rows come back in (value, seed) order regardless of scheduling.
pub fn run_sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let jobs: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.seeds as u64).map(move |j| (v, base.seed.wrapping_add(j))))
        .collect();
    let run = || jobs.par_iter().map(|&(v, s)| run_point(base, spec, v, s)).collect::<Vec<_>>();
    let rows = match spec.parallelism {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(rows)
}
