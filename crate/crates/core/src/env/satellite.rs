use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Decision, Environment, HeadRequest, Transition};
use crate::channel::{sample_channels, ChannelSample, IslParams, LinkParams};
use crate::orbits::{coverage_centre, geometry, sample_users, ConstellationConfig, GeometrySnapshot, GroundUser, UserConfig};
use crate::rng::{stream, tag};
use crate::scenario::{
    generate_tasks, realized_latency, semantic_efficiency, weight_grid, weight_index, IslLeg, MetricInputs, Route,
    ScenarioConfig, Task, WeightTriple, FIXED_WEIGHTS,
};
use crate::semantics::{payload_bits, Mode, SemanticsConfig};
use crate::{Error, Result};

/// Bumped whenever the feature layout of [`EnvState`] changes.
///
/// Layout for M satellites and N users, all entries in [0, 1]:
/// 1. `M*N` channel gains `|h_{m,n}|^2` in dB, clipped to [-180, -60] and scaled (m-major),
/// 2. `M*N` visibility flags (m-major),
/// 3. `3*N` per-user latency threshold, quality threshold, compute budget, scaled by their ranges
///    (thresholds are 0 when the user has no task),
/// 4. `N` task-present flags,
/// 5. `N*M` source-satellite one-hot per user (all zero without a task).
pub const STATE_LAYOUT_VERSION: u32 = 1;

pub const HEADS_PER_USER: usize = 5;

const GAIN_FLOOR_DB: f64 = -180.0;
const GAIN_CEIL_DB: f64 = -60.0;

/// Decision factors of a user, in sampling order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Satellite = 0,
    Isl = 1,
    Mode = 2,
    Steps = 3,
    Weights = 4,
}

impl Factor {
    pub fn head(self, user: usize) -> usize {
        user * HEADS_PER_USER + self as usize
    }
}

/// Training/evaluation variant of the decision assistant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Feasibility masks on, weights chosen by the policy.
    #[default]
    DecisionAssisted,
    /// Masks on, weights pinned to the fixed triple.
    FixedWeight,
    /// Masks off; infeasible selections score the failure reward.
    NoMask,
}

impl Variant {
    pub fn masking(self) -> bool {
        self != Variant::NoMask
    }

    pub fn fixed_weights(self) -> Option<WeightTriple> {
        (self == Variant::FixedWeight).then_some(FIXED_WEIGHTS)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::DecisionAssisted => "decision-assisted",
            Variant::FixedWeight => "fixed-weight",
            Variant::NoMask => "no-mask",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Contribution of a task that fails a constraint or cannot be served.
    pub failure_reward: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { failure_reward: -1.0 }
    }
}

/// Everything the simulator needs to run episodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimConfig {
    pub constellation: ConstellationConfig,
    pub users: UserConfig,
    pub channel: LinkParams,
    pub isl: IslParams,
    pub semantics: SemanticsConfig,
    pub scenario: ScenarioConfig,
    pub env: EnvConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.constellation.validate()?;
        self.users.validate()?;
        self.channel.validate()?;
        self.isl.validate()?;
        self.semantics.validate()?;
        self.scenario.validate()?;
        if !self.env.failure_reward.is_finite() {
            return Err(Error::config("env.failure_reward", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub slot: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAction {
    pub user: usize,
    pub satellite: usize,
    pub isl_active: bool,
    /// Forwarding satellite when the ISL leg is active.
    pub relay: Option<usize>,
    pub mode: Mode,
    pub steps: usize,
    pub weights: WeightTriple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// No visible satellite left for the user.
    Unservable,
    /// A selection outside the feasible set (only reachable without masks).
    InfeasibleAction,
    Latency,
    Quality,
    Compute,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ViolationCounts {
    pub latency: usize,
    pub quality: usize,
    pub compute: usize,
    pub unservable: usize,
    pub infeasible_action: usize,
}

impl ViolationCounts {
    pub fn add(&mut self, other: &ViolationCounts) {
        self.latency += other.latency;
        self.quality += other.quality;
        self.compute += other.compute;
        self.unservable += other.unservable;
        self.infeasible_action += other.infeasible_action;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub task: Task,
    pub action: Option<JointAction>,
    pub latency_s: f64,
    pub quality_db: f64,
    pub compute_gflops: f64,
    /// Semantic efficiency when every constraint holds.
    pub efficiency: Option<f64>,
    pub failure: Option<FailureKind>,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub slot: usize,
    pub reward: f64,
    pub tasks: Vec<TaskOutcome>,
    pub violations: ViolationCounts,
    pub dropped_arrivals: usize,
    pub next_state: Option<EnvState>,
}

/// One CSV row per (slot, task).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogRow {
    pub slot: usize,
    pub user: usize,
    pub source_satellite: usize,
    pub satellite: Option<usize>,
    pub isl_active: Option<bool>,
    pub relay: Option<usize>,
    pub mode: Option<Mode>,
    pub steps: Option<usize>,
    pub w_latency: Option<f64>,
    pub w_quality: Option<f64>,
    pub w_compute: Option<f64>,
    pub latency_s: f64,
    pub quality_db: f64,
    pub compute_gflops: f64,
    pub efficiency: Option<f64>,
    pub failure: Option<FailureKind>,
    pub contribution: f64,
    pub reward: f64,
}

impl EpisodeLogRow {
    pub fn rows(outcome: &StepOutcome) -> Vec<EpisodeLogRow> {
        outcome
            .tasks
            .iter()
            .map(|t| EpisodeLogRow {
                slot: outcome.slot,
                user: t.task.user,
                source_satellite: t.task.source_satellite,
                satellite: t.action.map(|a| a.satellite),
                isl_active: t.action.map(|a| a.isl_active),
                relay: t.action.and_then(|a| a.relay),
                mode: t.action.map(|a| a.mode),
                steps: t.action.map(|a| a.steps),
                w_latency: t.action.map(|a| a.weights.latency()),
                w_quality: t.action.map(|a| a.weights.quality()),
                w_compute: t.action.map(|a| a.weights.compute()),
                latency_s: t.latency_s,
                quality_db: t.quality_db,
                compute_gflops: t.compute_gflops,
                efficiency: t.efficiency,
                failure: t.failure,
                contribution: t.contribution,
                reward: outcome.reward,
            })
            .collect()
    }

    pub fn write_csv(path: &Path, rows: &[EpisodeLogRow]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exogenous state of one slot: geometry, realised channels, arrived tasks.
#[derive(Debug, Clone)]
pub(crate) struct SlotContext {
    pub geometry: GeometrySnapshot,
    pub channel: ChannelSample,
    pub tasks: Vec<Task>,
    pub dropped: usize,
}

/// Per-user parse of a (possibly partial) decision list.
#[derive(Debug, Clone)]
pub(crate) struct UserPlan {
    pub task: usize,
    pub action: Option<JointAction>,
    pub infeasible: bool,
}

pub(crate) enum Walk {
    Need(HeadRequest),
    Complete(Vec<UserPlan>),
}

/// Feasibility of the heads of one user given the choices made so far.
pub(crate) struct UserMasks<'a> {
    env: &'a SatelliteEnv,
    task: &'a Task,
}

impl UserMasks<'_> {
    pub fn satellite(&self, taken: &[bool]) -> Vec<bool> {
        let ctx = self.env.ctx();
        (0..self.env.num_satellites())
            .map(|m| ctx.geometry.visible[[m, self.task.user]] && !taken[m])
            .collect()
    }

    pub fn isl(&self, satellite: usize) -> Vec<bool> {
        let active = self.task.source_satellite != satellite;
        vec![!active, active]
    }

    pub fn steps(&self, mode: Mode) -> Vec<bool> {
        let sem = &self.env.config.semantics;
        (1..=sem.max_steps)
            .map(|l| !mode.is_semantic() || sem.step_cost_gflops * l as f64 <= self.task.user_compute_gflops)
            .collect()
    }

    pub fn mode(&self) -> Vec<bool> {
        let any_steps = self.steps(Mode::TextOnly).iter().any(|&b| b);
        Mode::ALL.iter().map(|m| !m.is_semantic() || any_steps).collect()
    }

    pub fn weights(&self) -> Vec<bool> {
        match self.env.variant.fixed_weights() {
            Some(w) => {
                let idx = weight_index(&w);
                (0..self.env.weights.len()).map(|i| i == idx).collect()
            }
            None => vec![true; self.env.weights.len()],
        }
    }
}

/// The satellite semantic-transmission MDP.
#[derive(Debug, Clone)]
pub struct SatelliteEnv {
    pub(crate) config: SimConfig,
    pub(crate) variant: Variant,
    pub(crate) weights: Vec<WeightTriple>,
    seed: u64,
    users: Vec<GroundUser>,
    phases: Array2<f64>,
    slot: usize,
    done: bool,
    ctx: Option<SlotContext>,
}

impl SatelliteEnv {
    pub fn new(config: SimConfig, variant: Variant) -> Result<Self> {
        config.validate()?;
        let m = config.constellation.num_satellites;
        let n = config.users.num_users;
        let mut env = Self {
            config,
            variant,
            weights: weight_grid(),
            seed: 0,
            users: Vec::new(),
            phases: Array2::zeros((m, n)),
            slot: 0,
            done: false,
            ctx: None,
        };
        env.reset_episode(0)?;
        Ok(env)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn num_satellites(&self) -> usize {
        self.config.constellation.num_satellites
    }

    pub fn num_users(&self) -> usize {
        self.config.users.num_users
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn users(&self) -> &[GroundUser] {
        &self.users
    }

    pub fn tasks(&self) -> &[Task] {
        &self.ctx().tasks
    }

    pub fn geometry(&self) -> &GeometrySnapshot {
        &self.ctx().geometry
    }

    pub fn channel(&self) -> &ChannelSample {
        &self.ctx().channel
    }

    pub(crate) fn ctx(&self) -> &SlotContext {
        self.ctx.as_ref().expect("environment has a slot context after reset")
    }

    /// Overrides the tasks of the current slot (sorted by user); for tests and oracles.
    pub fn set_tasks(&mut self, mut tasks: Vec<Task>) {
        tasks.sort_by_key(|t| t.user);
        if let Some(ctx) = self.ctx.as_mut() {
            ctx.tasks = tasks;
        }
    }

    pub fn reset_episode(&mut self, seed: u64) -> Result<()> {
        self.seed = seed;
        let centre = coverage_centre(&self.config.constellation);
        self.users = sample_users(&self.config.users, centre, &mut stream(seed, &[tag::USERS]));
        let mut rng = stream(seed, &[tag::PHASES]);
        let (m, n) = (self.num_satellites(), self.num_users());
        self.phases = Array2::from_shape_fn((m, n), |_| rng.random_range(0.0..std::f64::consts::TAU));
        self.slot = 0;
        self.done = self.config.constellation.num_slots == 0;
        self.ctx = if self.done { None } else { Some(self.build_context(0)?) };
        if self.ctx.is_none() {
            // Zero-slot horizon: keep an empty context so observation() stays total.
            self.ctx = Some(self.empty_context()?);
        }
        Ok(())
    }

    fn empty_context(&self) -> Result<SlotContext> {
        let mut cc = self.config.constellation.clone();
        cc.num_slots = 1;
        let geometry = geometry(&cc, &self.users, 0)?;
        let channel = sample_channels(&geometry, &self.config.channel, &self.config.isl, &self.phases, &mut stream(self.seed, &[tag::CHANNEL, 0]))?;
        Ok(SlotContext { geometry, channel, tasks: Vec::new(), dropped: 0 })
    }

    fn build_context(&self, t: usize) -> Result<SlotContext> {
        let geometry = geometry(&self.config.constellation, &self.users, t)?;
        let channel = sample_channels(
            &geometry,
            &self.config.channel,
            &self.config.isl,
            &self.phases,
            &mut stream(self.seed, &[tag::CHANNEL, t as u64]),
        )?;
        let arrivals = generate_tasks(
            t,
            &self.users,
            self.num_satellites(),
            &self.config.scenario,
            &mut stream(self.seed, &[tag::TASKS, t as u64]),
        );
        Ok(SlotContext {
            geometry,
            channel,
            tasks: arrivals.tasks,
            dropped: arrivals.dropped,
        })
    }

    pub fn state(&self) -> EnvState {
        encode_state(
            &self.config,
            &self.ctx().geometry,
            &self.ctx().channel,
            &self.ctx().tasks,
            &self.users,
        )
    }

    pub(crate) fn masks_for<'a>(&'a self, task: &'a Task) -> UserMasks<'a> {
        UserMasks { env: self, task }
    }

    fn head_size(&self, factor: Factor) -> usize {
        match factor {
            Factor::Satellite => self.num_satellites(),
            Factor::Isl => 2,
            Factor::Mode => Mode::ALL.len(),
            Factor::Steps => self.config.semantics.max_steps,
            Factor::Weights => self.weights.len(),
        }
    }

    /// Replays `decided` against the slot's sequential masks.
    pub(crate) fn walk(&self, decided: &[Decision]) -> Result<Walk> {
        let masking = self.variant.masking();
        let ctx = self.ctx();
        let mut taken = vec![false; self.num_satellites()];
        let mut idx = 0;
        let mut plans = Vec::with_capacity(ctx.tasks.len());

        // Returns the next decision's choice for `factor` or asks for it.
        macro_rules! take {
            ($user:expr, $factor:expr, $mask:expr, $infeasible:ident) => {{
                let mask: Vec<bool> = $mask;
                let head = $factor.head($user);
                if idx == decided.len() {
                    let exposed = if masking { mask } else { vec![true; self.head_size($factor)] };
                    return Ok(Walk::Need(HeadRequest { head, mask: exposed }));
                }
                let d = &decided[idx];
                if d.head != head {
                    return Err(Error::MalformedAction(format!(
                        "expected head {head}, got head {} at position {idx}",
                        d.head
                    )));
                }
                if d.choice >= mask.len() {
                    return Err(Error::MalformedAction(format!(
                        "choice {} out of range for head {head} of size {}",
                        d.choice,
                        mask.len()
                    )));
                }
                if !mask[d.choice] {
                    if masking {
                        return Err(Error::MaskViolation { head, choice: d.choice });
                    }
                    $infeasible = true;
                }
                idx += 1;
                d.choice
            }};
        }

        for (ti, task) in ctx.tasks.iter().enumerate() {
            let n = task.user;
            let masks = self.masks_for(task);
            let sat_mask = masks.satellite(&taken);
            if masking && !sat_mask.iter().any(|&b| b) {
                plans.push(UserPlan { task: ti, action: None, infeasible: false });
                continue;
            }
            let mut infeasible = false;
            let satellite = take!(n, Factor::Satellite, sat_mask, infeasible);
            taken[satellite] = true;
            let isl = take!(n, Factor::Isl, masks.isl(satellite), infeasible) == 1;
            let mode_idx = take!(n, Factor::Mode, masks.mode(), infeasible);
            let mode = Mode::ALL[mode_idx];
            let steps = take!(n, Factor::Steps, masks.steps(mode), infeasible) + 1;
            let weight_idx = take!(n, Factor::Weights, masks.weights(), infeasible);
            plans.push(UserPlan {
                task: ti,
                action: Some(JointAction {
                    user: n,
                    satellite,
                    isl_active: isl,
                    relay: isl.then_some(task.source_satellite),
                    mode,
                    steps,
                    weights: self.weights[weight_idx],
                }),
                infeasible,
            });
        }
        if idx != decided.len() {
            return Err(Error::MalformedAction(format!(
                "{} trailing decisions after a complete joint action",
                decided.len() - idx
            )));
        }
        Ok(Walk::Complete(plans))
    }

    /// Outcome of serving `task` with `action`, ignoring satellite contention.
    pub fn evaluate_action(&self, task: &Task, action: &JointAction) -> TaskOutcome {
        let ctx = self.ctx();
        let cfg = &self.config;
        let spec = cfg.semantics.mode_spec(action.mode);
        let payload = payload_bits(&spec, task.size_bits);
        let quality = cfg.semantics.quality.quality(action.mode, action.steps);
        let compute = if action.mode.is_semantic() {
            cfg.semantics.step_cost_gflops * action.steps as f64
        } else {
            0.0
        };
        let m2 = action.satellite;
        let n = task.user;
        let isl = match (action.isl_active, action.relay) {
            (true, Some(m1)) if m1 != m2 => Some(IslLeg {
                rate_bps: ctx.channel.isl_rate[[m1, m2]],
                distance_m: ctx.geometry.isl_distances[[m1, m2]] * 1e3,
            }),
            _ => None,
        };
        let route = Route {
            downlink_rate_bps: ctx.channel.downlink_rate[[m2, n]],
            downlink_distance_m: ctx.geometry.distances[[m2, n]] * 1e3,
            isl,
        };
        let mut latency = realized_latency(payload, &route);
        if cfg.scenario.include_decode_time {
            latency += compute / task.user_compute_gflops;
        }
        let latency_ok = latency <= task.latency_threshold_s;
        let quality_ok = quality >= task.quality_threshold_db;
        let compute_ok = compute <= task.user_compute_gflops;
        let failure = if !latency_ok {
            Some(FailureKind::Latency)
        } else if !quality_ok {
            Some(FailureKind::Quality)
        } else if !compute_ok {
            Some(FailureKind::Compute)
        } else {
            None
        };
        let efficiency = failure.is_none().then(|| {
            semantic_efficiency(
                &MetricInputs {
                    latency_s: latency,
                    quality_db: quality,
                    compute_gflops: compute,
                    latency_threshold_s: task.latency_threshold_s,
                    quality_threshold_db: task.quality_threshold_db,
                    compute_budget_gflops: task.user_compute_gflops,
                    quality_cap_db: cfg.semantics.quality.bit_mode_db,
                },
                &action.weights,
            )
        });
        TaskOutcome {
            task: task.clone(),
            action: Some(*action),
            latency_s: latency,
            quality_db: quality,
            compute_gflops: compute,
            efficiency,
            failure,
            contribution: efficiency.unwrap_or(cfg.env.failure_reward),
        }
    }

    fn violations_of(outcome: &TaskOutcome) -> ViolationCounts {
        let mut v = ViolationCounts::default();
        match outcome.failure {
            Some(FailureKind::Unservable) => v.unservable = 1,
            Some(FailureKind::InfeasibleAction) => v.infeasible_action = 1,
            Some(_) => {
                v.latency = usize::from(outcome.latency_s > outcome.task.latency_threshold_s);
                v.quality = usize::from(outcome.quality_db < outcome.task.quality_threshold_db);
                v.compute = usize::from(outcome.compute_gflops > outcome.task.user_compute_gflops);
            }
            None => {}
        }
        v
    }

    fn failed(&self, task: &Task, action: Option<JointAction>, kind: FailureKind) -> TaskOutcome {
        TaskOutcome {
            task: task.clone(),
            action,
            latency_s: f64::INFINITY,
            quality_db: 0.0,
            compute_gflops: 0.0,
            efficiency: None,
            failure: Some(kind),
            contribution: self.config.env.failure_reward,
        }
    }

    /// Scores a complete joint action on the current slot without advancing.
    pub fn evaluate(&self, decided: &[Decision]) -> Result<(f64, Vec<TaskOutcome>, ViolationCounts)> {
        let plans = match self.walk(decided)? {
            Walk::Complete(p) => p,
            Walk::Need(req) => {
                return Err(Error::MalformedAction(format!(
                    "joint action incomplete: head {} still undecided",
                    req.head
                )))
            }
        };
        let ctx = self.ctx();
        let mut outcomes = Vec::with_capacity(plans.len());
        let mut violations = ViolationCounts::default();
        for plan in plans {
            let task = &ctx.tasks[plan.task];
            let outcome = match plan.action {
                None => self.failed(task, None, FailureKind::Unservable),
                Some(a) if plan.infeasible => self.failed(task, Some(a), FailureKind::InfeasibleAction),
                Some(a) => self.evaluate_action(task, &a),
            };
            violations.add(&Self::violations_of(&outcome));
            outcomes.push(outcome);
        }
        let reward = if outcomes.is_empty() {
            0.0
        } else {
            outcomes.iter().map(|o| o.contribution).sum::<f64>() / outcomes.len() as f64
        };
        Ok((reward, outcomes, violations))
    }

    /// Applies a joint action and advances to the next slot.
    pub fn step_detailed(&mut self, decided: &[Decision]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidArgument("episode already finished".into()));
        }
        let (reward, tasks, violations) = self.evaluate(decided)?;
        let slot = self.slot;
        let dropped_arrivals = self.ctx().dropped;
        self.slot += 1;
        let next_state = if self.slot >= self.config.constellation.num_slots {
            self.done = true;
            None
        } else {
            self.ctx = Some(self.build_context(self.slot)?);
            Some(self.state())
        };
        Ok(StepOutcome {
            slot,
            reward,
            tasks,
            violations,
            dropped_arrivals,
            next_state,
        })
    }
}

impl Environment for SatelliteEnv {
    fn observation_dim(&self) -> usize {
        let (m, n) = (self.num_satellites(), self.num_users());
        3 * m * n + 4 * n
    }

    fn head_sizes(&self) -> Vec<usize> {
        let per_user = [Factor::Satellite, Factor::Isl, Factor::Mode, Factor::Steps, Factor::Weights]
            .map(|f| self.head_size(f));
        (0..self.num_users()).flat_map(|_| per_user).collect()
    }

    fn horizon(&self) -> usize {
        self.config.constellation.num_slots
    }

    fn reset(&mut self, episode_seed: u64) -> Result<()> {
        self.reset_episode(episode_seed)
    }

    fn observation(&self) -> Vec<f64> {
        self.state().features
    }

    fn next_head(&self, decided: &[Decision]) -> Result<Option<HeadRequest>> {
        Ok(match self.walk(decided)? {
            Walk::Need(req) => Some(req),
            Walk::Complete(_) => None,
        })
    }

    fn step(&mut self, decided: &[Decision]) -> Result<Transition> {
        let out = self.step_detailed(decided)?;
        Ok(Transition {
            reward: out.reward,
            done: self.done,
        })
    }
}

fn scaled(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Fixed-layout feature vector of a slot; see [`STATE_LAYOUT_VERSION`].
pub fn encode_state(
    config: &SimConfig,
    geometry: &GeometrySnapshot,
    channel: &ChannelSample,
    tasks: &[Task],
    users: &[GroundUser],
) -> EnvState {
    let (m_count, n_count) = geometry.distances.dim();
    let mut f = Vec::with_capacity(3 * m_count * n_count + 4 * n_count);
    for m in 0..m_count {
        for n in 0..n_count {
            let g = channel.aged[[m, n]].norm_sqr();
            let db = if g > 0.0 { 10.0 * g.log10() } else { f64::NEG_INFINITY };
            f.push(scaled(db.clamp(GAIN_FLOOR_DB, GAIN_CEIL_DB), GAIN_FLOOR_DB, GAIN_CEIL_DB));
        }
    }
    for m in 0..m_count {
        for n in 0..n_count {
            f.push(if geometry.visible[[m, n]] { 1.0 } else { 0.0 });
        }
    }
    let mut by_user: Vec<Option<&Task>> = vec![None; n_count];
    for t in tasks {
        by_user[t.user] = Some(t);
    }
    let sc = &config.scenario;
    let uc = &config.users;
    for n in 0..n_count {
        let compute = users.get(n).map_or(0.0, |u| u.compute_gflops);
        match by_user[n] {
            Some(t) => {
                f.push(scaled(t.latency_threshold_s, sc.latency_range_s[0], sc.latency_range_s[1]));
                f.push(scaled(t.quality_threshold_db, sc.quality_range_db[0], sc.quality_range_db[1]));
            }
            None => {
                f.push(0.0);
                f.push(0.0);
            }
        }
        f.push(scaled(compute, uc.compute_min_gflops, uc.compute_max_gflops));
    }
    for n in 0..n_count {
        f.push(if by_user[n].is_some() { 1.0 } else { 0.0 });
    }
    for n in 0..n_count {
        for m in 0..m_count {
            f.push(match by_user[n] {
                Some(t) if t.source_satellite == m => 1.0,
                _ => 0.0,
            });
        }
    }
    EnvState { slot: geometry.slot, features: f }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{rollout, Selection, UniformPolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> SimConfig {
        let mut c = SimConfig::default();
        c.constellation.num_satellites = 3;
        c.users.num_users = 2;
        c.constellation.num_slots = 5;
        c
    }

    fn task(user: usize, source: usize, compute: f64) -> Task {
        Task {
            user,
            slot: 0,
            size_bits: 2.8e7,
            latency_threshold_s: 1.0,
            quality_threshold_db: 15.0,
            user_compute_gflops: compute,
            source_satellite: source,
        }
    }

    /// Environment whose users all see every satellite.
    fn all_visible_env(variant: Variant) -> SatelliteEnv {
        let mut c = small_config();
        c.constellation.min_elevation_deg = 0.0;
        c.users.cap_radius_deg = 1.0;
        let env = SatelliteEnv::new(c, variant).unwrap();
        assert!(env.geometry().visible.iter().all(|&v| v));
        env
    }

    fn choose_prefix(env: &SatelliteEnv, choices: &[usize]) -> Vec<Decision> {
        let mut decided = Vec::new();
        for &c in choices {
            let req = env.next_head(&decided).unwrap().expect("head expected");
            decided.push(Decision { head: req.head, mask: req.mask, choice: c });
        }
        decided
    }

    fn choose(env: &SatelliteEnv, choices: &[usize]) -> Vec<Decision> {
        let decided = choose_prefix(env, choices);
        assert!(env.next_head(&decided).unwrap().is_none());
        decided
    }

    #[test]
    fn empty_slot_encodes_no_tasks_and_rewards_zero() {
        let mut env = SatelliteEnv::new(small_config(), Variant::DecisionAssisted).unwrap();
        env.set_tasks(vec![]);
        let s = env.state();
        let (m, n) = (3, 2);
        let flags = &s.features[2 * m * n + 3 * n..2 * m * n + 4 * n];
        assert!(flags.iter().all(|&x| x == 0.0));
        assert!(env.next_head(&[]).unwrap().is_none());
        let out = env.step_detailed(&[]).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(env.slot(), 1);
    }

    #[test]
    fn features_are_unit_interval_and_fixed_size() {
        let mut env = SatelliteEnv::new(SimConfig::default(), Variant::DecisionAssisted).unwrap();
        for seed in 0..5 {
            env.reset_episode(seed).unwrap();
            let s = env.state();
            assert_eq!(s.features.len(), env.observation_dim());
            assert!(s.features.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn channel_gain_below_floor_encodes_zero() {
        let mut env = SatelliteEnv::new(small_config(), Variant::DecisionAssisted).unwrap();
        let mut ctx = env.ctx().clone();
        ctx.channel.aged[[0, 0]] = num_complex::Complex64::new(1e-12, 0.0);
        ctx.channel.aged[[1, 0]] = num_complex::Complex64::new(0.0, 0.0);
        env.ctx = Some(ctx);
        let s = env.state();
        assert_eq!(s.features[0], 0.0);
        assert_eq!(s.features[2], 0.0);
    }

    #[test]
    fn swapping_users_swaps_feature_blocks() {
        let env = SatelliteEnv::new(small_config(), Variant::DecisionAssisted).unwrap();
        let ctx = env.ctx();
        let tasks = vec![task(0, 2, 1500.0), task(1, 0, 3000.0)];
        let users = env.users().to_vec();
        let a = encode_state(&env.config, &ctx.geometry, &ctx.channel, &tasks, &users);

        let swap_cols = |x: &Array2<bool>| {
            let mut y = x.clone();
            for m in 0..3 {
                y[[m, 0]] = x[[m, 1]];
                y[[m, 1]] = x[[m, 0]];
            }
            y
        };
        let mut geo = ctx.geometry.clone();
        geo.visible = swap_cols(&ctx.geometry.visible);
        let mut ch = ctx.channel.clone();
        for m in 0..3 {
            ch.aged[[m, 0]] = ctx.channel.aged[[m, 1]];
            ch.aged[[m, 1]] = ctx.channel.aged[[m, 0]];
        }
        let mut swapped_users = users.clone();
        swapped_users.swap(0, 1);
        let swapped_tasks = vec![
            Task { user: 1, ..tasks[0].clone() },
            Task { user: 0, ..tasks[1].clone() },
        ];
        let b = encode_state(&env.config, &geo, &ch, &swapped_tasks, &swapped_users);

        let (m, n) = (3usize, 2usize);
        let perm = |u: usize| 1 - u;
        for block in 0..2 {
            for mm in 0..m {
                for u in 0..n {
                    let i = block * m * n + mm * n + u;
                    let j = block * m * n + mm * n + perm(u);
                    assert_eq!(a.features[i], b.features[j]);
                }
            }
        }
        let base = 2 * m * n;
        for u in 0..n {
            assert_eq!(a.features[base + 3 * u..base + 3 * u + 3], b.features[base + 3 * perm(u)..base + 3 * perm(u) + 3]);
            assert_eq!(a.features[base + 3 * n + u], b.features[base + 3 * n + perm(u)]);
            let oh = base + 4 * n;
            assert_eq!(a.features[oh + u * m..oh + u * m + m], b.features[oh + perm(u) * m..oh + perm(u) * m + m]);
        }
    }

    #[test]
    fn assigned_satellite_masked_for_later_user() {
        let mut env = all_visible_env(Variant::DecisionAssisted);
        env.set_tasks(vec![task(0, 1, 3000.0), task(1, 1, 3000.0)]);
        // user 0: satellite 1, ISL inactive (source 1), mode 0, steps 0, weights 0
        let first = choose_prefix(&env, &[1, 0, 0, 0, 0]);
        let req = env.next_head(&first).unwrap().unwrap();
        assert_eq!(req.head, Factor::Satellite.head(1));
        assert_eq!(req.mask, vec![true, false, true]);
    }

    #[test]
    fn low_compute_user_has_single_step() {
        let mut env = all_visible_env(Variant::DecisionAssisted);
        let t = task(0, 0, 700.0);
        env.set_tasks(vec![t.clone()]);
        let masks = env.masks_for(&t);
        let m = masks.steps(Mode::HybridSmall);
        assert_eq!(m.iter().filter(|&&b| b).count(), 1);
        assert!(m[0]);
        assert!(masks.steps(Mode::Bit).iter().all(|&b| b));
    }

    #[test]
    fn isl_forced_by_source_satellite() {
        let mut env = all_visible_env(Variant::DecisionAssisted);
        let t = task(0, 2, 3000.0);
        env.set_tasks(vec![t.clone()]);
        let masks = env.masks_for(&t);
        assert_eq!(masks.isl(2), vec![true, false]);
        assert_eq!(masks.isl(0), vec![false, true]);
        let d = choose(&env, &[0, 1, 3, 2, 5]);
        let (_, outcomes, _) = env.evaluate(&d).unwrap();
        let a = outcomes[0].action.unwrap();
        assert!(a.isl_active);
        assert_eq!(a.relay, Some(2));
        assert_ne!(a.relay.unwrap(), a.satellite);
    }

    #[test]
    fn mask_violation_is_a_hard_error() {
        let mut env = all_visible_env(Variant::DecisionAssisted);
        env.set_tasks(vec![task(0, 2, 3000.0)]);
        let req = env.next_head(&[]).unwrap().unwrap();
        let sat = Decision { head: req.head, mask: req.mask, choice: 2 };
        let bad_isl = Decision { head: Factor::Isl.head(0), mask: vec![true; 2], choice: 1 };
        assert!(matches!(env.next_head(&[sat, bad_isl]), Err(Error::MaskViolation { .. })));
    }

    #[test]
    fn no_mask_variant_scores_infeasible_choices_as_failures() {
        let mut env = all_visible_env(Variant::NoMask);
        env.set_tasks(vec![task(0, 2, 3000.0)]);
        let req = env.next_head(&[]).unwrap().unwrap();
        assert!(req.mask.iter().all(|&b| b));
        // ISL inactive although source != serving satellite.
        let d = choose(&env, &[0, 0, 4, 2, 0]);
        let (reward, outcomes, v) = env.evaluate(&d).unwrap();
        assert_eq!(reward, -1.0);
        assert_eq!(outcomes[0].failure, Some(FailureKind::InfeasibleAction));
        assert_eq!(v.infeasible_action, 1);
    }

    #[test]
    fn latency_violation_scores_failure_reward() {
        let mut env = all_visible_env(Variant::DecisionAssisted);
        // Bit mode with a tiny latency budget cannot make it.
        let mut t = task(0, 0, 3000.0);
        t.latency_threshold_s = 1e-3;
        env.set_tasks(vec![t]);
        let d = choose(&env, &[0, 0, 0, 0, 0]);
        let out = env.step_detailed(&d).unwrap();
        assert_eq!(out.reward, -1.0);
        assert_eq!(out.tasks[0].failure, Some(FailureKind::Latency));
        assert_eq!(out.violations.latency, 1);
    }

    #[test]
    fn single_successful_task_reward_equals_its_efficiency() {
        let mut env = all_visible_env(Variant::DecisionAssisted);
        env.set_tasks(vec![task(0, 1, 3000.0)]);
        // Hybrid large, 4 steps, weights index 0.
        let d = choose(&env, &[1, 0, 4, 3, 0]);
        let (reward, outcomes, _) = env.evaluate(&d).unwrap();
        let mu = outcomes[0].efficiency.expect("task succeeds");
        assert_eq!(reward, mu);
        assert!((0.0..=1.0).contains(&mu));
    }

    #[test]
    fn unservable_user_emits_no_heads() {
        let mut c = small_config();
        c.constellation.min_elevation_deg = 89.9;
        let mut env = SatelliteEnv::new(c, Variant::DecisionAssisted).unwrap();
        env.set_tasks(vec![task(0, 0, 3000.0)]);
        assert!(env.next_head(&[]).unwrap().is_none());
        let out = env.step_detailed(&[]).unwrap();
        assert_eq!(out.tasks[0].failure, Some(FailureKind::Unservable));
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn fixed_weight_variant_pins_the_weight_head() {
        let mut env = all_visible_env(Variant::FixedWeight);
        let t = task(0, 0, 3000.0);
        env.set_tasks(vec![t.clone()]);
        let w = env.masks_for(&t).weights();
        assert_eq!(w.iter().filter(|&&b| b).count(), 1);
        assert!(w[weight_index(&FIXED_WEIGHTS)]);
    }

    #[test]
    fn rollouts_are_deterministic_and_bounded() {
        let mut env = SatelliteEnv::new(SimConfig::default(), Variant::DecisionAssisted).unwrap();
        let policy = UniformPolicy { outputs: env.head_sizes().iter().sum() };
        let a = rollout(&mut env, &policy, 11, 20, Selection::Sample(&mut ChaCha8Rng::seed_from_u64(1))).unwrap();
        let b = rollout(&mut env, &policy, 11, 20, Selection::Sample(&mut ChaCha8Rng::seed_from_u64(1))).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps.len(), 20);
        assert!(a.steps.iter().all(|s| (-1.0..=1.0).contains(&s.reward)));
        let g1 = rollout(&mut env, &policy, 11, 20, Selection::<ChaCha8Rng>::Greedy).unwrap();
        let g2 = rollout(&mut env, &policy, 11, 20, Selection::<ChaCha8Rng>::Greedy).unwrap();
        assert_eq!(g1, g2);
        let empty = rollout(&mut env, &policy, 11, 0, Selection::<ChaCha8Rng>::Greedy).unwrap();
        assert!(empty.steps.is_empty());
        assert_eq!(empty.total_reward(), 0.0);
    }

    #[test]
    fn episode_log_round_trips_through_csv() {
        let mut env = SatelliteEnv::new(SimConfig::default(), Variant::DecisionAssisted).unwrap();
        let policy = UniformPolicy { outputs: env.head_sizes().iter().sum() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        env.reset_episode(3).unwrap();
        while !env.is_done() {
            let (_, d, _) = crate::env::decide_slot(&env, &policy, &mut Selection::Sample(&mut rng)).unwrap();
            rows.extend(EpisodeLogRow::rows(&env.step_detailed(&d).unwrap()));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episode.csv");
        EpisodeLogRow::write_csv(&path, &rows).unwrap();
        let back: Vec<EpisodeLogRow> = csv::Reader::from_path(&path)
            .unwrap()
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .unwrap();
        assert_eq!(back.len(), rows.len());
        assert_eq!(back.iter().map(|r| r.slot).collect::<Vec<_>>(), rows.iter().map(|r| r.slot).collect::<Vec<_>>());
    }
}
