//! Selective imitation: filter demonstration data, fit a tabular policy,
//! and evaluate it in the consumption environment.
//!
//! Three filters matter downstream: none (plain cloning), whole-episode
//! filtering by observation score (keep episodes above a percentile), and
//! per-agent filtering by estimated credit (clone only agents whose credit
//! clears a threshold). Policies are per-state action distributions with a
//! global fallback for states never seen in the admitted data.

use std::collections::BTreeMap;

use rand::Rng;

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::estimate::{EvReport, ObservationSet};
use crate::seeding;
use crate::toc::{score, state_actions, step, Discretizer, Dvf, TocConfig, TocTrajectory};

/// A per-state categorical policy over discretized actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    states: BTreeMap<u32, Vec<f64>>,
    fallback: Vec<f64>,
    /// Demand emitted when an action bin is sampled.
    action_values: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(
        states: BTreeMap<u32, Vec<f64>>,
        fallback: Vec<f64>,
        action_values: Vec<f64>,
    ) -> Result<Self> {
        let n = action_values.len();
        if n == 0 {
            return Err(Error::InvalidParam("policy needs at least one action".into()));
        }
        for &v in &action_values {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidAction(v));
            }
        }
        let check = |dist: &[f64], what: &str| -> Result<()> {
            if dist.len() != n {
                return Err(Error::InvalidParam(format!(
                    "{what} has {} probabilities, expected {n}",
                    dist.len()
                )));
            }
            let mut sum = 0.0;
            for &p in dist {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidParam(format!(
                        "{what} has an invalid probability {p}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParam(format!(
                    "{what} probabilities sum to {sum}, expected 1"
                )));
            }
            Ok(())
        };
        check(&fallback, "fallback distribution")?;
        for (s, dist) in &states {
            check(dist, &format!("state {s} distribution"))?;
        }
        Ok(TabularPolicy {
            states,
            fallback,
            action_values,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.action_values.len()
    }

    pub fn action_values(&self) -> &[f64] {
        &self.action_values
    }

    pub fn states(&self) -> &BTreeMap<u32, Vec<f64>> {
        &self.states
    }

    pub fn fallback(&self) -> &[f64] {
        &self.fallback
    }

    pub fn distribution(&self, state: u32) -> &[f64] {
        self.states.get(&state).map_or(&self.fallback, Vec::as_slice)
    }

    pub fn sample<R: Rng>(&self, state: u32, rng: &mut R) -> usize {
        let dist = self.distribution(state);
        let mut target = rng.random::<f64>();
        for (i, &p) in dist.iter().enumerate() {
            target -= p;
            if target <= 0.0 {
                return i;
            }
        }
        dist.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdKind {
    /// The cutoff is the nearest-rank percentile of the estimated credits.
    Percentile,
    /// The cutoff is the given absolute credit.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRule {
    pub kind: ThresholdKind,
    pub value: f64,
}

/// Nearest-rank percentile cutoff: rank = ceil(p/100 * n), cutoff = the
/// rank-th smallest value. Percentile 0 has rank 0 and means no cutoff;
/// selection everywhere in this module is strictly above the cutoff.
pub fn nearest_rank_cutoff(values: &[f64], percentile: f64) -> Result<Option<f64>> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::InvalidParam(format!(
            "percentile {percentile} outside [0, 100]"
        )));
    }
    if values.is_empty() {
        return Err(Error::NoData("no values to rank".into()));
    }
    let rank = (percentile / 100.0 * values.len() as f64).ceil() as usize;
    if rank == 0 {
        return Ok(None);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Some(sorted[rank - 1]))
}

/// Agents whose estimated credit is strictly above the rule's cutoff, in
/// report order. Inestimable agents are never selected; a report with no
/// estimable agent is an error. The result can legitimately be empty (for
/// example, when every credit ties at the cutoff).
pub fn select_agents(report: &EvReport, rule: &SelectionRule) -> Result<Vec<AgentId>> {
    let estimable: Vec<(&AgentId, f64)> = report
        .iter()
        .filter_map(|(a, e)| e.map(|e| (a, e.estimate)))
        .collect();
    if estimable.is_empty() {
        return Err(Error::EmptyReport);
    }
    let cutoff = match rule.kind {
        ThresholdKind::Absolute => {
            if !rule.value.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "absolute cutoff {} is not finite",
                    rule.value
                )));
            }
            Some(rule.value)
        }
        ThresholdKind::Percentile => {
            let values: Vec<f64> = estimable.iter().map(|(_, e)| *e).collect();
            nearest_rank_cutoff(&values, rule.value)?
        }
    };
    Ok(estimable
        .into_iter()
        .filter(|(_, e)| cutoff.map_or(true, |c| *e > c))
        .map(|(a, _)| a.clone())
        .collect())
}

fn accumulate(
    counts: &mut BTreeMap<u32, Vec<u64>>,
    global: &mut [u64],
    traj: &TocTrajectory,
    seat: usize,
    disc: &Discretizer,
) {
    for (s, a) in state_actions(traj, seat, disc) {
        counts.entry(s).or_insert_with(|| vec![0; global.len()])[a as usize] += 1;
        global[a as usize] += 1;
    }
}

fn policy_from_counts(
    counts: BTreeMap<u32, Vec<u64>>,
    global: Vec<u64>,
    disc: &Discretizer,
) -> Result<TabularPolicy> {
    let total: u64 = global.iter().sum();
    if total == 0 {
        return Err(Error::NoData(
            "no state-action pairs in the admitted episodes".into(),
        ));
    }
    let normalize = |c: Vec<u64>| -> Vec<f64> {
        let t: u64 = c.iter().sum();
        c.into_iter().map(|x| x as f64 / t as f64).collect()
    };
    let states: BTreeMap<u32, Vec<f64>> = counts
        .into_iter()
        .map(|(s, c)| (s, normalize(c)))
        .collect();
    TabularPolicy::new(states, normalize(global), disc.action_values().to_vec())
}

/// Fits a policy by counting (state, action) pairs in the episodes the
/// observations reference.
///
/// With `admitted` set, only those agents' seats contribute; `None` admits
/// everyone. Counting follows the observation list, so an episode
/// referenced twice counts twice.
pub fn fit_bc(
    obs: &ObservationSet,
    trajectories: &[TocTrajectory],
    disc: &Discretizer,
    admitted: Option<&[AgentId]>,
) -> Result<TabularPolicy> {
    if let Some(sel) = admitted {
        if sel.is_empty() {
            return Err(Error::EmptySelection);
        }
    }
    let admitted: Option<std::collections::HashSet<&AgentId>> =
        admitted.map(|sel| sel.iter().collect());
    let mut counts = BTreeMap::new();
    let mut global = vec![0u64; disc.n_actions()];
    let mut saw_episode = false;
    let mut saw_admitted = false;
    for o in obs.observations() {
        let Some(ti) = o.trajectory else { continue };
        let traj = trajectories.get(ti).ok_or_else(|| {
            Error::NoData(format!("episode index {ti} out of range"))
        })?;
        saw_episode = true;
        for (seat, agent) in traj.participants.iter().enumerate() {
            if admitted.as_ref().map_or(true, |set| set.contains(agent)) {
                saw_admitted = true;
                accumulate(&mut counts, &mut global, traj, seat, disc);
            }
        }
    }
    if !saw_episode {
        return Err(Error::NoData(
            "no observation references an episode".into(),
        ));
    }
    if !saw_admitted {
        return Err(Error::NoData(
            "admitted agents never appear in the episodes".into(),
        ));
    }
    policy_from_counts(counts, global, disc)
}

/// Fits a policy on whole episodes whose observation score is strictly
/// above the nearest-rank percentile cutoff; every seat of a kept episode
/// contributes. Percentile 0 keeps everything.
pub fn fit_group_bc(
    obs: &ObservationSet,
    trajectories: &[TocTrajectory],
    disc: &Discretizer,
    percentile: f64,
) -> Result<TabularPolicy> {
    if obs.is_empty() {
        return Err(Error::NoData("no observations to filter".into()));
    }
    let scores: Vec<f64> = obs.observations().iter().map(|o| o.score()).collect();
    let cutoff = nearest_rank_cutoff(&scores, percentile)?;
    let mut counts = BTreeMap::new();
    let mut global = vec![0u64; disc.n_actions()];
    let mut kept = 0usize;
    for o in obs.observations() {
        if !cutoff.map_or(true, |c| o.score() > c) {
            continue;
        }
        let Some(ti) = o.trajectory else { continue };
        let traj = trajectories.get(ti).ok_or_else(|| {
            Error::NoData(format!("episode index {ti} out of range"))
        })?;
        kept += 1;
        for seat in 0..traj.participants.len() {
            accumulate(&mut counts, &mut global, traj, seat, disc);
        }
    }
    if kept == 0 {
        return Err(Error::EmptySelection);
    }
    policy_from_counts(counts, global, disc)
}

/// Rolls out the policy controlling every seat of a fresh group and scores
/// episodes with the value function. Returns the mean score and sample
/// standard deviation (0 for a single episode). Each episode derives its
/// own stream from the seed.
pub fn evaluate_policy(
    policy: &TabularPolicy,
    disc: &Discretizer,
    cfg: &TocConfig,
    dvf: Dvf,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    if episodes == 0 {
        return Err(Error::InvalidParam("episodes must be at least 1".into()));
    }
    let m = cfg.group_size;
    let participants: Vec<AgentId> = (0..m)
        .map(|i| AgentId::new(format!("seat_{i}")).unwrap())
        .collect();
    let mut scores = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let mut rng = seeding::rng(seeding::derive_indexed(seed, "eval-episode", e as u64));
        let mut pool = cfg.initial_pool;
        let mut pool_series = Vec::with_capacity(cfg.horizon + 1);
        let mut consumption = Vec::with_capacity(cfg.horizon);
        for _ in 0..cfg.horizon {
            pool_series.push(pool);
            let state = disc.pool_bin(pool);
            let demands: Vec<f64> = (0..m)
                .map(|_| policy.action_values[policy.sample(state, &mut rng)])
                .collect();
            let (next, actual) = step(pool, &demands, cfg)?;
            consumption.push(actual);
            pool = next;
        }
        pool_series.push(pool);
        let traj = TocTrajectory {
            participants: participants.clone(),
            pool: pool_series,
            consumption,
        };
        scores.push(score(&traj, dvf));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let sd = if scores.len() < 2 {
        0.0
    } else {
        (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok((mean, sd))
}
