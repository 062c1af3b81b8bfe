//! Exact per-slot optimum of the masked joint action.
//!
//! Given the satellite assignment, a slot's reward is a sum of per-user terms,
//! so each user's (ISL, mode, steps, weights) choice is optimised per candidate
//! satellite and only the assignment is searched jointly.

use super::satellite::{JointAction, SatelliteEnv};
use super::{Decision, Environment};
use crate::scenario::{efficiency_from_terms, MetricInputs};
use crate::semantics::Mode;
use crate::{Error, Result};

/// Best per-user completion for a fixed serving satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserBest {
    pub satellite: usize,
    pub isl_choice: usize,
    pub mode: Mode,
    pub steps: usize,
    pub weight_index: usize,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Slot reward of the optimal joint action.
    pub reward: f64,
    pub decisions: Vec<Decision>,
}

impl SatelliteEnv {
    /// Best completion for user task `ti` served by satellite `m2`.
    fn user_best(&self, ti: usize, m2: usize) -> UserBest {
        let task = &self.ctx().tasks[ti];
        let masks = self.masks_for(task);
        let isl_mask = masks.isl(m2);
        let isl_choice = usize::from(isl_mask[1]);
        let mode_mask = masks.mode();
        let weight_mask = masks.weights();
        let allowed: Vec<usize> = (0..weight_mask.len()).filter(|&i| weight_mask[i]).collect();
        let failure = self.config.env.failure_reward;

        let mut best: Option<UserBest> = None;
        for (mi, &mode) in Mode::ALL.iter().enumerate() {
            if !mode_mask[mi] {
                continue;
            }
            let step_mask = masks.steps(mode);
            for (si, &ok) in step_mask.iter().enumerate() {
                if !ok {
                    continue;
                }
                let action = JointAction {
                    user: task.user,
                    satellite: m2,
                    isl_active: isl_choice == 1,
                    relay: (isl_choice == 1).then_some(task.source_satellite),
                    mode,
                    steps: si + 1,
                    weights: self.weights[allowed[0]],
                };
                let out = self.evaluate_action(task, &action);
                let (weight_index, contribution) = if out.failure.is_some() {
                    (allowed[0], failure)
                } else {
                    let terms = MetricInputs {
                        latency_s: out.latency_s,
                        quality_db: out.quality_db,
                        compute_gflops: out.compute_gflops,
                        latency_threshold_s: task.latency_threshold_s,
                        quality_threshold_db: task.quality_threshold_db,
                        compute_budget_gflops: task.user_compute_gflops,
                        quality_cap_db: self.config.semantics.quality.bit_mode_db,
                    }
                    .normalized_terms();
                    allowed
                        .iter()
                        .map(|&w| (w, efficiency_from_terms(terms, &self.weights[w])))
                        .fold((allowed[0], f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
                };
                if best.is_none_or(|b| contribution > b.contribution) {
                    best = Some(UserBest {
                        satellite: m2,
                        isl_choice,
                        mode,
                        steps: si + 1,
                        weight_index,
                        contribution,
                    });
                }
            }
        }
        // Bit mode is never masked, so at least one candidate exists.
        best.expect("bit mode is always feasible")
    }

    /// Exact optimum of the current slot under the feasibility masks.
    pub fn slot_optimum(&self) -> Result<OracleSolution> {
        let tasks = &self.ctx().tasks;
        if tasks.is_empty() {
            return Ok(OracleSolution { reward: 0.0, decisions: Vec::new() });
        }
        let m_count = self.num_satellites();
        let table: Vec<Vec<Option<UserBest>>> = (0..tasks.len())
            .map(|ti| {
                (0..m_count)
                    .map(|m| self.geometry().visible[[m, tasks[ti].user]].then(|| self.user_best(ti, m)))
                    .collect()
            })
            .collect();

        struct Search<'a> {
            table: &'a [Vec<Option<UserBest>>],
            failure: f64,
            best_total: f64,
            best_path: Vec<Option<usize>>,
            path: Vec<Option<usize>>,
        }

        fn dfs(s: &mut Search<'_>, ti: usize, taken: &mut Vec<bool>, total: f64) {
            if ti == s.table.len() {
                if total > s.best_total {
                    s.best_total = total;
                    s.best_path = s.path.clone();
                }
                return;
            }
            let mut any = false;
            for m in 0..taken.len() {
                if taken[m] {
                    continue;
                }
                let Some(ub) = s.table[ti][m] else { continue };
                any = true;
                taken[m] = true;
                s.path.push(Some(m));
                dfs(s, ti + 1, taken, total + ub.contribution);
                s.path.pop();
                taken[m] = false;
            }
            if !any {
                s.path.push(None);
                dfs(s, ti + 1, taken, total + s.failure);
                s.path.pop();
            }
        }

        let mut search = Search {
            table: &table,
            failure: self.config.env.failure_reward,
            best_total: f64::NEG_INFINITY,
            best_path: Vec::new(),
            path: Vec::new(),
        };
        dfs(&mut search, 0, &mut vec![false; m_count], 0.0);

        let mut choices = Vec::new();
        for (ti, m) in search.best_path.iter().enumerate() {
            if let Some(m) = *m {
                let ub = table[ti][m].expect("path only uses visible satellites");
                choices.extend([m, ub.isl_choice, ub.mode.index(), ub.steps - 1, ub.weight_index]);
            }
        }
        let decisions = self.replay(&choices)?;
        let (reward, _, _) = self.evaluate(&decisions)?;
        Ok(OracleSolution { reward, decisions })
    }

    /// Turns a flat list of head choices into decisions carrying their masks.
    pub fn replay(&self, choices: &[usize]) -> Result<Vec<Decision>> {
        let mut decided = Vec::with_capacity(choices.len());
        for &choice in choices {
            let req = self
                .next_head(&decided)?
                .ok_or_else(|| Error::MalformedAction("more choices than heads".into()))?;
            decided.push(Decision { head: req.head, mask: req.mask, choice });
        }
        if self.next_head(&decided)?.is_some() {
            return Err(Error::MalformedAction("fewer choices than heads".into()));
        }
        Ok(decided)
    }

    /// Brute-force optimum over every feasible joint action; small instances only.
    pub fn exhaustive_slot_optimum(&self, limit: u64) -> Result<OracleSolution> {
        let n_tasks = self.ctx().tasks.len() as u32;
        let per_user = self.num_satellites() as u64
            * 2
            * Mode::ALL.len() as u64
            * self.config.semantics.max_steps as u64
            * self.weights.len() as u64;
        let bound = per_user.checked_pow(n_tasks).unwrap_or(u64::MAX);
        if bound > limit {
            return Err(Error::InstanceTooLarge(format!(
                "up to {bound} joint actions exceeds the limit of {limit}"
            )));
        }
        let mut best = OracleSolution { reward: f64::NEG_INFINITY, decisions: Vec::new() };
        let mut decided = Vec::new();
        self.enumerate(&mut decided, &mut best)?;
        Ok(best)
    }

    fn enumerate(&self, decided: &mut Vec<Decision>, best: &mut OracleSolution) -> Result<()> {
        match self.next_head(decided)? {
            None => {
                let (reward, _, _) = self.evaluate(decided)?;
                if reward > best.reward {
                    best.reward = reward;
                    best.decisions = decided.clone();
                }
            }
            Some(req) => {
                let allowed: Vec<usize> = (0..req.mask.len()).filter(|&i| req.mask[i]).collect();
                for choice in allowed {
                    decided.push(Decision { head: req.head, mask: req.mask.clone(), choice });
                    self.enumerate(decided, best)?;
                    decided.pop();
                }
            }
        }
        Ok(())
    }
}
