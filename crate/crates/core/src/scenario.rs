//! Task arrivals, the adaptive weight grid, realised latency and the
//! weighted semantic efficiency metric.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::orbits::GroundUser;
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Poisson intensity of task arrivals per user per slot.
    pub arrival_rate: f64,
    pub task_size_bits: f64,
    pub latency_range_s: [f64; 2],
    pub quality_range_db: [f64; 2],
    /// Add decode time (compute / budget) to the realised latency.
    pub include_decode_time: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            arrival_rate: 0.5,
            task_size_bits: 3.5e6 * 8.0,
            latency_range_s: [0.5, 2.0],
            quality_range_db: [13.0, 21.0],
            include_decode_time: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::config("scenario.arrival_rate", "must be nonnegative and finite"));
        }
        if !(self.task_size_bits > 0.0) {
            return Err(Error::config("scenario.task_size_bits", "must be positive"));
        }
        let [lo, hi] = self.latency_range_s;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::config("scenario.latency_range_s", "need 0 < low <= high"));
        }
        let [lo, hi] = self.quality_range_db;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::config("scenario.quality_range_db", "need 0 < low <= high"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub user: usize,
    pub slot: usize,
    pub size_bits: f64,
    pub latency_threshold_s: f64,
    pub quality_threshold_db: f64,
    pub user_compute_gflops: f64,
    /// Satellite holding the content; a different serving satellite needs an ISL hop.
    pub source_satellite: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskArrivals {
    /// At most one per user, ordered by user index.
    pub tasks: Vec<Task>,
    /// Arrivals beyond the first for a user in the same slot.
    pub dropped: usize,
}

fn uniform<R: Rng + ?Sized>(range: [f64; 2], rng: &mut R) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..=range[1])
    } else {
        range[0]
    }
}

pub fn generate_tasks<R: Rng + ?Sized>(
    slot: usize,
    users: &[GroundUser],
    num_satellites: usize,
    config: &ScenarioConfig,
    rng: &mut R,
) -> TaskArrivals {
    let mut out = TaskArrivals::default();
    if config.arrival_rate <= 0.0 {
        return out;
    }
    let poisson = Poisson::new(config.arrival_rate).expect("validated arrival rate");
    for user in users {
        let count = poisson.sample(rng) as usize;
        if count == 0 {
            continue;
        }
        out.dropped += count - 1;
        out.tasks.push(Task {
            user: user.id,
            slot,
            size_bits: config.task_size_bits,
            latency_threshold_s: uniform(config.latency_range_s, rng),
            quality_threshold_db: uniform(config.quality_range_db, rng),
            user_compute_gflops: user.compute_gflops,
            source_satellite: rng.random_range(0..num_satellites),
        });
    }
    out
}

/// Metric weights on the 0.1 grid, stored in tenths so sums are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightTriple {
    tenths: [u8; 3],
}

impl WeightTriple {
    pub fn from_tenths(latency: u8, quality: u8, compute: u8) -> Result<Self> {
        let t = [latency, quality, compute];
        if t.iter().any(|&x| !(1..=9).contains(&x)) || t.iter().map(|&x| x as u32).sum::<u32>() != 10 {
            return Err(Error::InvalidArgument(format!(
                "weights {t:?} (tenths) must each lie in 1..=9 and sum to 10"
            )));
        }
        Ok(Self { tenths: t })
    }

    pub fn tenths(&self) -> [u8; 3] {
        self.tenths
    }

    pub fn latency(&self) -> f64 {
        self.tenths[0] as f64 / 10.0
    }

    pub fn quality(&self) -> f64 {
        self.tenths[1] as f64 / 10.0
    }

    pub fn compute(&self) -> f64 {
        self.tenths[2] as f64 / 10.0
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.latency(), self.quality(), self.compute()]
    }
}

/// The fixed-weight ablation's triple.
pub const FIXED_WEIGHTS: WeightTriple = WeightTriple { tenths: [4, 3, 3] };

/// All weight triples with entries in {0.1, ..., 0.9} summing to 1, ordered
/// lexicographically by (latency, quality).
pub fn weight_grid() -> Vec<WeightTriple> {
    let mut out = Vec::with_capacity(36);
    for d in 1..=8u8 {
        for q in 1..=(9 - d) {
            out.push(WeightTriple { tenths: [d, q, 10 - d - q] });
        }
    }
    out
}

pub fn weight_index(w: &WeightTriple) -> usize {
    weight_grid()
        .iter()
        .position(|x| x == w)
        .expect("every WeightTriple lies on the grid")
}

/// Transport path of a payload: optional ISL hop then the downlink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Route {
    pub downlink_rate_bps: f64,
    pub downlink_distance_m: f64,
    pub isl: Option<IslLeg>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IslLeg {
    pub rate_bps: f64,
    pub distance_m: f64,
}

fn leg_latency(payload_bits: f64, rate: f64, distance_m: f64) -> f64 {
    if !(rate > 0.0) || !rate.is_finite() {
        return f64::INFINITY;
    }
    payload_bits / rate + distance_m / SPEED_OF_LIGHT
}

/// Transmission plus propagation latency along the route; infinite on a dead leg.
pub fn realized_latency(payload_bits: f64, route: &Route) -> f64 {
    let isl = route
        .isl
        .map_or(0.0, |leg| leg_latency(payload_bits, leg.rate_bps, leg.distance_m));
    isl + leg_latency(payload_bits, route.downlink_rate_bps, route.downlink_distance_m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricInputs {
    pub latency_s: f64,
    pub quality_db: f64,
    pub compute_gflops: f64,
    pub latency_threshold_s: f64,
    pub quality_threshold_db: f64,
    pub compute_budget_gflops: f64,
    /// Upper end of the quality scale (bit-mode fidelity).
    pub quality_cap_db: f64,
}

impl MetricInputs {
    /// Latency slack, quality surplus and compute slack, each min-max scaled
    /// over its task-specific span and clamped to [0, 1].
    pub fn normalized_terms(&self) -> [f64; 3] {
        let unit = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        let d = unit((self.latency_threshold_s - self.latency_s) / self.latency_threshold_s);
        let span = self.quality_cap_db - self.quality_threshold_db;
        let q = if span > 0.0 {
            unit((self.quality_db - self.quality_threshold_db) / span)
        } else if self.quality_db >= self.quality_threshold_db {
            1.0
        } else {
            0.0
        };
        let f = unit((self.compute_budget_gflops - self.compute_gflops) / self.compute_budget_gflops);
        [d, q, f]
    }
}

pub fn efficiency_from_terms(terms: [f64; 3], weights: &WeightTriple) -> f64 {
    let w = weights.as_array();
    w[0] * terms[0] + w[1] * terms[1] + w[2] * terms[2]
}

/// Weighted semantic efficiency in [0, 1].
pub fn semantic_efficiency(inputs: &MetricInputs, weights: &WeightTriple) -> f64 {
    efficiency_from_terms(inputs.normalized_terms(), weights)
}
