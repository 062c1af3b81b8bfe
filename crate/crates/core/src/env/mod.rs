//! The decision process: a generic sequential-head environment interface,
//! masked rollouts, and the satellite semantic-transmission MDP.
//!
//! A slot's joint action is assembled head by head. The environment names the
//! next head to decide together with its feasibility mask, which may depend on
//! the choices already made within the slot (satellite assignment of earlier
//! users, the serving satellite of the current user). The policy scores all
//! heads from the slot state once; masks carry the intra-slot dependence.

mod oracle;
mod satellite;

pub use oracle::{OracleSolution, UserBest};
pub use satellite::{
    EnvConfig, EnvState, EpisodeLogRow, Factor, FailureKind, JointAction, SatelliteEnv, SimConfig,
    StepOutcome, TaskOutcome, Variant, ViolationCounts, HEADS_PER_USER, STATE_LAYOUT_VERSION,
};

use rand::Rng;

use crate::reinforcepp::MaskedCategorical;
use crate::Result;

/// The next head to decide and the entries allowed for it.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadRequest {
    pub head: usize,
    pub mask: Vec<bool>,
}

/// One sampled head entry together with the mask it was sampled under.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub head: usize,
    pub mask: Vec<bool>,
    pub choice: usize,
}

impl Decision {
    pub fn masked_entries(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub done: bool,
}

pub trait Environment {
    fn observation_dim(&self) -> usize;
    /// Sizes of every policy head, in output order.
    fn head_sizes(&self) -> Vec<usize>;
    fn horizon(&self) -> usize;
    fn reset(&mut self, episode_seed: u64) -> Result<()>;
    fn observation(&self) -> Vec<f64>;
    /// `None` once `decided` forms a complete joint action for the slot.
    fn next_head(&self, decided: &[Decision]) -> Result<Option<HeadRequest>>;
    fn step(&mut self, decided: &[Decision]) -> Result<Transition>;
}

/// Anything that maps an observation to the concatenated logits of all heads.
pub trait Policy {
    fn logits(&self, observation: &[f64]) -> Vec<f64>;
}

/// Scores every entry equally: uniform sampling over each head's mask.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    pub outputs: usize,
}

impl Policy for UniformPolicy {
    fn logits(&self, _observation: &[f64]) -> Vec<f64> {
        vec![0.0; self.outputs]
    }
}

/// Start offset of every head in the concatenated logit vector.
pub fn head_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    for &s in sizes {
        offsets.push(acc);
        acc += s;
    }
    offsets
}

pub enum Selection<'a, R: Rng + ?Sized> {
    Sample(&'a mut R),
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub observation: Vec<f64>,
    pub decisions: Vec<Decision>,
    /// Joint log-probability of the decisions under the acting policy.
    pub log_prob: f64,
    pub reward: f64,
    /// Head entries excluded by masks across the slot's decisions.
    pub masked_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

/// Samples (or greedily picks) every head of the current slot under `policy`.
pub fn decide_slot<E, P, R>(env: &E, policy: &P, selection: &mut Selection<'_, R>) -> Result<(Vec<f64>, Vec<Decision>, f64)>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    let sizes = env.head_sizes();
    let offsets = head_offsets(&sizes);
    let observation = env.observation();
    let logits = policy.logits(&observation);
    let mut decided: Vec<Decision> = Vec::new();
    let mut log_prob = 0.0;
    while let Some(req) = env.next_head(&decided)? {
        let start = offsets[req.head];
        let dist = MaskedCategorical::new(&logits[start..start + sizes[req.head]], &req.mask, req.head)?;
        let choice = match selection {
            Selection::Sample(rng) => dist.sample(&mut **rng),
            Selection::Greedy => dist.argmax(),
        };
        log_prob += dist.log_prob(choice);
        decided.push(Decision {
            head: req.head,
            mask: req.mask,
            choice,
        });
    }
    Ok((observation, decided, log_prob))
}

/// Runs one episode of at most `steps` slots from `episode_seed`.
pub fn rollout<E, P, R>(
    env: &mut E,
    policy: &P,
    episode_seed: u64,
    steps: usize,
    mut selection: Selection<'_, R>,
) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    let mut traj = Trajectory::default();
    if steps == 0 {
        return Ok(traj);
    }
    env.reset(episode_seed)?;
    for _ in 0..steps.min(env.horizon()) {
        let (observation, decisions, log_prob) = decide_slot(env, policy, &mut selection)?;
        let transition = env.step(&decisions)?;
        let masked_entries = decisions.iter().map(Decision::masked_entries).sum();
        traj.steps.push(TrajectoryStep {
            observation,
            decisions,
            log_prob,
            reward: transition.reward,
            masked_entries,
        });
        if transition.done {
            break;
        }
    }
    Ok(traj)
}
