//! A shared-resource consumption environment and dataset generator.
//!
//! A pool of resource grows by a fixed rate each step, then the group
//! consumes. Demands beyond the grown pool are rationed proportionally and
//! an exhausted pool stays at zero. Scripted consumer archetypes produce
//! deterministic episodes, so a dataset of scored group outcomes is fully
//! reproducible from its group list.

use rand::seq::SliceRandom;
use std::str::FromStr;

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::estimate::ObservationSet;
use crate::seeding;

#[derive(Debug, Clone)]
pub struct TocConfig {
    /// Pool growth rate per step, applied before consumption.
    pub growth: f64,
    pub initial_pool: f64,
    /// Number of consumption steps per episode.
    pub horizon: usize,
    /// Agents per sampled group.
    pub group_size: usize,
}

impl Default for TocConfig {
    fn default() -> Self {
        TocConfig {
            growth: 0.25,
            initial_pool: 200.0,
            horizon: 50,
            group_size: 3,
        }
    }
}

impl TocConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.growth.is_finite() || self.growth <= -1.0 {
            return Err(Error::InvalidParam(format!(
                "growth rate {} must be finite and above -1",
                self.growth
            )));
        }
        if !self.initial_pool.is_finite() || self.initial_pool < 0.0 {
            return Err(Error::InvalidParam(format!(
                "initial pool {} must be finite and non-negative",
                self.initial_pool
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParam("horizon must be at least 1".into()));
        }
        if self.group_size == 0 {
            return Err(Error::InvalidParam("group size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scripted consumption policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Archetype {
    /// Demands a fixed amount every step.
    TakeX(f64),
    /// Demands the fixed amount only when the grown pool would stay
    /// positive afterwards.
    TakeXNoDeplete(f64),
    /// Demands a percentage of the current (pre-growth) pool.
    TakePercent(f64),
    /// Demands the mean of the other agents' previous consumption; nothing
    /// on the first step.
    TakeAvg,
}

/// The demand an archetype emits given the pre-growth pool.
pub fn archetype_action(
    arch: Archetype,
    pool: f64,
    others_prev_mean: f64,
    t: usize,
    cfg: &TocConfig,
) -> f64 {
    match arch {
        Archetype::TakeX(x) => x,
        Archetype::TakeXNoDeplete(x) => {
            if (1.0 + cfg.growth) * pool - x > 0.0 {
                x
            } else {
                0.0
            }
        }
        Archetype::TakePercent(p) => p / 100.0 * pool,
        Archetype::TakeAvg => {
            if t == 0 {
                0.0
            } else {
                others_prev_mean
            }
        }
    }
}

/// Advances the pool one step: grow, then serve demands.
///
/// Over-demand is rationed proportionally; the post-step pool never goes
/// negative. Returns the new pool and each agent's actual consumption.
pub fn step(pool: f64, demands: &[f64], cfg: &TocConfig) -> Result<(f64, Vec<f64>)> {
    for &d in demands {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::InvalidAction(d));
        }
    }
    let grown = (1.0 + cfg.growth) * pool;
    let total: f64 = demands.iter().sum();
    if total <= grown {
        return Ok(((grown - total).max(0.0), demands.to_vec()));
    }
    if grown <= 0.0 {
        return Ok((0.0, vec![0.0; demands.len()]));
    }
    let scale = grown / total;
    Ok((0.0, demands.iter().map(|d| d * scale).collect()))
}

/// One recorded episode: the pool series and per-step consumption matrix.
#[derive(Debug, Clone)]
pub struct TocTrajectory {
    pub participants: Vec<AgentId>,
    /// Pool before each step plus the final pool; length horizon + 1.
    pub pool: Vec<f64>,
    /// `consumption[t][i]` is participant i's actual consumption at step t.
    pub consumption: Vec<Vec<f64>>,
}

impl TocTrajectory {
    pub fn horizon(&self) -> usize {
        self.consumption.len()
    }

    pub fn final_pool(&self) -> f64 {
        *self.pool.last().expect("pool series is never empty")
    }

    pub fn per_agent_totals(&self) -> Vec<f64> {
        let m = self.participants.len();
        let mut totals = vec![0.0; m];
        for row in &self.consumption {
            for (i, &c) in row.iter().enumerate() {
                totals[i] += c;
            }
        }
        totals
    }
}

/// Downstream value functions scoring an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dvf {
    /// Pool remaining at the horizon.
    Final,
    /// Total consumption across agents and steps.
    Total,
    /// Smallest per-agent total consumption.
    Min,
}

impl Dvf {
    pub const ALL: [Dvf; 3] = [Dvf::Final, Dvf::Total, Dvf::Min];
}

impl std::fmt::Display for Dvf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Dvf::Final => "v_final",
            Dvf::Total => "v_total",
            Dvf::Min => "v_min",
        };
        f.write_str(s)
    }
}

impl FromStr for Dvf {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "v_final" | "final" => Ok(Dvf::Final),
            "v_total" | "total" => Ok(Dvf::Total),
            "v_min" | "min" => Ok(Dvf::Min),
            _ => Err(Error::InvalidParam(format!(
                "unknown value function {s:?}; expected v_final, v_total, or v_min"
            ))),
        }
    }
}

pub fn score(traj: &TocTrajectory, dvf: Dvf) -> f64 {
    match dvf {
        Dvf::Final => traj.final_pool(),
        Dvf::Total => traj.consumption.iter().flatten().sum(),
        Dvf::Min => traj
            .per_agent_totals()
            .into_iter()
            .fold(f64::INFINITY, f64::min),
    }
}

/// Runs one deterministic episode for a group of archetypes.
pub fn rollout(group: &[(AgentId, Archetype)], cfg: &TocConfig) -> Result<TocTrajectory> {
    cfg.validate()?;
    let m = group.len();
    if m == 0 {
        return Err(Error::GroupSize {
            expected: "1..".into(),
            got: 0,
        });
    }
    let mut pool = cfg.initial_pool;
    let mut pool_series = Vec::with_capacity(cfg.horizon + 1);
    let mut consumption = Vec::with_capacity(cfg.horizon);
    let mut prev: Vec<f64> = vec![0.0; m];
    let mut prev_total = 0.0;
    for t in 0..cfg.horizon {
        pool_series.push(pool);
        let demands: Vec<f64> = group
            .iter()
            .enumerate()
            .map(|(i, &(_, arch))| {
                let others_mean = if m > 1 {
                    (prev_total - prev[i]) / (m - 1) as f64
                } else {
                    0.0
                };
                archetype_action(arch, pool, others_mean, t, cfg)
            })
            .collect();
        let (next, actual) = step(pool, &demands, cfg)?;
        prev_total = actual.iter().sum();
        prev = actual.clone();
        consumption.push(actual);
        pool = next;
    }
    pool_series.push(pool);
    Ok(TocTrajectory {
        participants: group.iter().map(|(a, _)| a.clone()).collect(),
        pool: pool_series,
        consumption,
    })
}

/// The reference roster: fixed takers at 1, 3, and 10 units, their
/// no-deplete variants, percentage takers at 1, 3, and 10 percent, and
/// three mean-matching consumers. Replicas append a `_r<i>` suffix.
pub fn standard_pool(replicas: usize) -> Vec<(AgentId, Archetype)> {
    let bases: Vec<(&str, Archetype)> = vec![
        ("take_1", Archetype::TakeX(1.0)),
        ("take_3", Archetype::TakeX(3.0)),
        ("take_10", Archetype::TakeX(10.0)),
        ("nodep_1", Archetype::TakeXNoDeplete(1.0)),
        ("nodep_3", Archetype::TakeXNoDeplete(3.0)),
        ("nodep_10", Archetype::TakeXNoDeplete(10.0)),
        ("pct_1", Archetype::TakePercent(1.0)),
        ("pct_3", Archetype::TakePercent(3.0)),
        ("pct_10", Archetype::TakePercent(10.0)),
        ("avg_1", Archetype::TakeAvg),
        ("avg_2", Archetype::TakeAvg),
        ("avg_3", Archetype::TakeAvg),
    ];
    let mut pool = Vec::with_capacity(bases.len() * replicas.max(1));
    for r in 0..replicas.max(1) {
        for (name, arch) in &bases {
            let id = if replicas > 1 {
                format!("{name}_r{r}")
            } else {
                (*name).to_string()
            };
            pool.push((AgentId::new(id).unwrap(), *arch));
        }
    }
    pool
}

/// How groups are drawn from the roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMode {
    /// Every group of the configured size, in lexicographic roster order.
    Complete,
    /// Uniformly random distinct groups, with replacement across draws.
    Sample { num_groups: usize },
}

/// A generated dataset: scored observations, the episodes behind them, and
/// the identity map when the roster was anonymized.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub observations: ObservationSet,
    pub trajectories: Vec<TocTrajectory>,
    /// One (one-time id, true id) pair per appearance; `None` for plain
    /// datasets.
    pub truth: Option<Vec<(AgentId, AgentId)>>,
}

/// Rolls out groups from the roster and scores them with one value
/// function. Anonymization hands every appearance of an agent a fresh
/// one-time id, so no two observations share a name and per-agent credit is
/// underdetermined from scores alone; the truth pairs invert the renaming.
pub fn generate_dataset(
    pool: &[(AgentId, Archetype)],
    mode: GenMode,
    cfg: &TocConfig,
    dvf: Dvf,
    anonymize: bool,
    seed: u64,
) -> Result<Dataset> {
    cfg.validate()?;
    let n = pool.len();
    {
        let mut seen = std::collections::HashSet::with_capacity(n);
        for (a, _) in pool {
            if !seen.insert(a) {
                return Err(Error::DuplicateAgent(a.clone()));
            }
        }
    }
    if cfg.group_size > n {
        return Err(Error::Infeasible {
            pool: n,
            group: cfg.group_size,
        });
    }

    let mut groups: Vec<Vec<usize>> = match mode {
        GenMode::Complete => {
            use itertools::Itertools;
            (0..n).combinations(cfg.group_size).collect()
        }
        GenMode::Sample { num_groups } => {
            let mut rng = seeding::rng(seeding::derive(seed, "sample-groups"));
            (0..num_groups)
                .map(|_| {
                    let mut g = rand::seq::index::sample(&mut rng, n, cfg.group_size).into_vec();
                    g.sort_unstable();
                    g
                })
                .collect()
        }
    };

    // Anonymization deals a fresh one-time id to every seat of every group,
    // so no name links two observations. Group order, seat order, and the
    // name pool are all shuffled: neither position nor id text encodes the
    // original identity, only the withheld truth pairs do.
    let (public_ids, truth) = if anonymize {
        let mut rng = seeding::rng(seeding::derive(seed, "anonymize"));
        groups.shuffle(&mut rng);
        for group in &mut groups {
            group.shuffle(&mut rng);
        }
        let appearances = groups.len() * cfg.group_size;
        let mut names: Vec<AgentId> = (0..appearances)
            .map(|i| AgentId::new(format!("anon{i:04}")).unwrap())
            .collect();
        names.shuffle(&mut rng);
        let truth = names
            .iter()
            .zip(groups.iter().flatten())
            .map(|(name, &original)| (name.clone(), pool[original].0.clone()))
            .collect();
        (names, Some(truth))
    } else {
        (pool.iter().map(|(a, _)| a.clone()).collect(), None)
    };

    let mut observations = ObservationSet::with_sizes(
        public_ids.clone(),
        [cfg.group_size].into_iter().collect(),
    )?;
    let mut trajectories = Vec::with_capacity(groups.len());
    for (g, group) in groups.iter().enumerate() {
        // seat s of group g is roster entry g*size+s when anonymized
        let public_members: Vec<usize> = if anonymize {
            (0..group.len()).map(|s| g * cfg.group_size + s).collect()
        } else {
            group.clone()
        };
        let members: Vec<(AgentId, Archetype)> = group
            .iter()
            .zip(&public_members)
            .map(|(&i, &p)| (public_ids[p].clone(), pool[i].1))
            .collect();
        let traj = rollout(&members, cfg)?;
        let value = score(&traj, dvf);
        observations.push_indices(public_members, value, Some(trajectories.len()))?;
        trajectories.push(traj);
    }

    Ok(Dataset {
        observations,
        trajectories,
        truth,
    })
}

/// Rebuilds the observation scores from the stored episodes under another
/// value function. Every observation must reference an episode.
pub fn rescore(dataset: &Dataset, dvf: Dvf) -> Result<ObservationSet> {
    let src = &dataset.observations;
    let mut out = match src.declared_sizes() {
        Some(sizes) => ObservationSet::with_sizes(src.agents().to_vec(), sizes.clone())?,
        None => ObservationSet::new(src.agents().to_vec())?,
    };
    for o in src.observations() {
        let ti = o.trajectory.ok_or_else(|| {
            Error::NoData("observation has no episode to rescore from".into())
        })?;
        let traj = dataset
            .trajectories
            .get(ti)
            .ok_or_else(|| Error::NoData(format!("episode index {ti} out of range")))?;
        out.push_indices(o.members().to_vec(), score(traj, dvf), Some(ti))?;
    }
    Ok(out)
}

/// Bins pool levels and consumption amounts for tabular policies.
///
/// Pool bins are equal-width over [0, pool_max] with the top bin open;
/// action bins have hand-placed edges whose representative values cover the
/// roster's demand magnitudes, so imitated policies can reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    pool_bins: usize,
    pool_max: f64,
    action_edges: Vec<f64>,
    action_values: Vec<f64>,
}

impl Discretizer {
    pub fn standard(cfg: &TocConfig) -> Self {
        Discretizer {
            pool_bins: 20,
            pool_max: 2.0 * cfg.initial_pool,
            action_edges: vec![0.5, 1.5, 2.5, 4.0, 5.0, 8.0, 12.0, 16.0, 24.0, 48.0, 96.0],
            action_values: vec![
                0.0, 1.0, 2.0, 3.0, 4.5, 6.0, 10.0, 14.0, 20.0, 32.0, 64.0, 128.0,
            ],
        }
    }

    pub fn n_states(&self) -> usize {
        self.pool_bins
    }

    pub fn n_actions(&self) -> usize {
        self.action_values.len()
    }

    pub fn action_values(&self) -> &[f64] {
        &self.action_values
    }

    pub fn pool_bin(&self, pool: f64) -> u32 {
        if self.pool_max <= 0.0 || pool <= 0.0 {
            return 0;
        }
        let width = self.pool_max / self.pool_bins as f64;
        ((pool / width) as usize).min(self.pool_bins - 1) as u32
    }

    pub fn action_bin(&self, consumption: f64) -> u32 {
        self.action_edges.partition_point(|&e| consumption >= e) as u32
    }
}

/// The per-step (pool bin, action bin) pairs of one participant.
pub fn state_actions(traj: &TocTrajectory, seat: usize, disc: &Discretizer) -> Vec<(u32, u32)> {
    (0..traj.horizon())
        .map(|t| {
            (
                disc.pool_bin(traj.pool[t]),
                disc.action_bin(traj.consumption[t][seat]),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::estimate_all;
    use crate::TOLERANCE;

    fn agent(name: &str) -> AgentId {
        AgentId::new(name).unwrap()
    }

    #[test]
    fn gentle_takers_leave_a_growing_pool() {
        let cfg = TocConfig::default();
        let group: Vec<(AgentId, Archetype)> = (0..3)
            .map(|i| (agent(&format!("t{i}")), Archetype::TakeX(1.0)))
            .collect();
        let traj = rollout(&group, &cfg).unwrap();
        for w in traj.pool.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!((score(&traj, Dvf::Min) - 50.0).abs() < TOLERANCE);
        assert!((score(&traj, Dvf::Total) - 150.0).abs() < TOLERANCE);
    }

    #[test]
    fn full_percent_takers_split_the_grown_pool_once() {
        let cfg = TocConfig::default();
        let group: Vec<(AgentId, Archetype)> = (0..3)
            .map(|i| (agent(&format!("p{i}")), Archetype::TakePercent(100.0)))
            .collect();
        let traj = rollout(&group, &cfg).unwrap();
        // 600 demanded of 250 grown: rationed equally, pool exhausted
        assert!((traj.consumption[0][0] - 250.0 / 3.0).abs() < TOLERANCE);
        assert_eq!(traj.final_pool(), 0.0);
        assert!((score(&traj, Dvf::Total) - 250.0).abs() < TOLERANCE);
        for row in &traj.consumption[1..] {
            assert!(row.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn mean_matchers_alone_never_consume() {
        let cfg = TocConfig::default();
        let group: Vec<(AgentId, Archetype)> = (0..3)
            .map(|i| (agent(&format!("m{i}")), Archetype::TakeAvg))
            .collect();
        let traj = rollout(&group, &cfg).unwrap();
        assert_eq!(score(&traj, Dvf::Total), 0.0);
        let expect = 200.0 * 1.25f64.powi(50);
        assert!((traj.final_pool() - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn cautious_taker_stops_before_depleting() {
        let cfg = TocConfig {
            growth: 0.0,
            initial_pool: 25.0,
            horizon: 5,
            group_size: 1,
        };
        let group = vec![(agent("careful"), Archetype::TakeXNoDeplete(10.0))];
        let traj = rollout(&group, &cfg).unwrap();
        // takes 10 twice (25 -> 15 -> 5), then refuses
        let totals: Vec<f64> = traj.consumption.iter().map(|r| r[0]).collect();
        assert_eq!(totals, vec![10.0, 10.0, 0.0, 0.0, 0.0]);
        assert_eq!(traj.final_pool(), 5.0);
    }

    #[test]
    fn step_conserves_resource_under_rationing() {
        let cfg = TocConfig::default();
        let (next, actual) = step(16.0, &[30.0, 10.0], &cfg).unwrap();
        assert_eq!(next, 0.0);
        assert!((actual[0] - 15.0).abs() < TOLERANCE);
        assert!((actual[1] - 5.0).abs() < TOLERANCE);
        let (next, actual) = step(100.0, &[20.0, 5.0], &cfg).unwrap();
        assert!((next + actual.iter().sum::<f64>() - 125.0).abs() < TOLERANCE);
    }

    #[test]
    fn an_exhausted_pool_stays_empty() {
        let cfg = TocConfig::default();
        let (next, actual) = step(0.0, &[5.0, 5.0], &cfg).unwrap();
        assert_eq!(next, 0.0);
        assert!(actual.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn negative_demands_are_rejected() {
        let cfg = TocConfig::default();
        assert!(matches!(
            step(10.0, &[1.0, -2.0], &cfg),
            Err(Error::InvalidAction(_))
        ));
    }

    #[test]
    fn complete_generation_covers_every_group_once() {
        let cfg = TocConfig::default();
        let pool = standard_pool(1);
        let ds = generate_dataset(&pool, GenMode::Complete, &cfg, Dvf::Final, false, 0).unwrap();
        assert_eq!(ds.observations.len(), 220);
        assert_eq!(ds.trajectories.len(), 220);
        assert!(ds.truth.is_none());
        // scores agree with rescoring under the same value function
        let again = rescore(&ds, Dvf::Final).unwrap();
        for (a, b) in ds.observations.observations().iter().zip(again.observations()) {
            assert_eq!(a.score(), b.score());
        }
    }

    #[test]
    fn sampled_generation_is_seeded() {
        let cfg = TocConfig::default();
        let pool = standard_pool(1);
        let mode = GenMode::Sample { num_groups: 30 };
        let a = generate_dataset(&pool, mode, &cfg, Dvf::Total, false, 9).unwrap();
        let b = generate_dataset(&pool, mode, &cfg, Dvf::Total, false, 9).unwrap();
        let c = generate_dataset(&pool, mode, &cfg, Dvf::Total, false, 10).unwrap();
        let scores = |d: &Dataset| -> Vec<f64> {
            d.observations.observations().iter().map(|o| o.score()).collect()
        };
        assert_eq!(scores(&a), scores(&b));
        assert_ne!(scores(&a), scores(&c));
    }

    #[test]
    fn anonymized_datasets_issue_one_time_ids() {
        let cfg = TocConfig::default();
        let pool = standard_pool(1);
        let ds = generate_dataset(&pool, GenMode::Complete, &cfg, Dvf::Final, true, 4).unwrap();
        let truth = ds.truth.as_ref().unwrap();
        // 220 groups of 3, one fresh id per seat
        assert_eq!(truth.len(), 660);
        assert_eq!(ds.observations.n_agents(), 660);
        let mut seen = std::collections::HashMap::new();
        for obs in ds.observations.observations() {
            for &m in obs.members() {
                *seen.entry(m).or_insert(0usize) += 1;
            }
        }
        assert_eq!(seen.len(), 660);
        assert!(seen.values().all(|&c| c == 1), "an id recurs across observations");
        for a in ds.observations.agents() {
            assert!(a.as_str().starts_with("anon"));
        }
        // each original sits in C(11, 2) = 55 groups
        let mut appearances = std::collections::HashMap::new();
        for (_, original) in truth {
            *appearances.entry(original.clone()).or_insert(0usize) += 1;
        }
        assert_eq!(appearances.len(), 12);
        assert!(appearances.values().all(|&c| c == 55));
        // renaming only relabels: same score multiset up to the seat-order
        // rounding that the shuffles introduce
        let plain = generate_dataset(&pool, GenMode::Complete, &cfg, Dvf::Final, false, 4).unwrap();
        let sorted = |obs: &ObservationSet| -> Vec<f64> {
            let mut s: Vec<f64> = obs.observations().iter().map(|o| o.score()).collect();
            s.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            s
        };
        for (a, b) in sorted(&ds.observations).iter().zip(sorted(&plain.observations).iter()) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
        // with every id observed once, all seats of a group share one estimate
        let report = estimate_all(&ds.observations);
        let agents = ds.observations.agents();
        for obs in ds.observations.observations() {
            let ests: Vec<f64> = obs
                .members()
                .iter()
                .map(|&m| report.get(&agents[m]).unwrap().estimate)
                .collect();
            for e in &ests[1..] {
                assert!((e - ests[0]).abs() < TOLERANCE);
            }
        }
    }

    #[test]
    fn oversized_groups_are_infeasible() {
        let cfg = TocConfig {
            group_size: 13,
            ..TocConfig::default()
        };
        let pool = standard_pool(1);
        assert!(matches!(
            generate_dataset(&pool, GenMode::Complete, &cfg, Dvf::Final, false, 0),
            Err(Error::Infeasible { pool: 12, group: 13 })
        ));
    }

    #[test]
    fn fixed_takers_rank_by_restraint_under_final_pool() {
        let cfg = TocConfig::default();
        let pool = standard_pool(1);
        let ds = generate_dataset(&pool, GenMode::Complete, &cfg, Dvf::Final, false, 0).unwrap();
        let report = estimate_all(&ds.observations);
        let ev = |name: &str| report.get(&agent(name)).unwrap().estimate;
        assert!(ev("take_1") > ev("take_3"));
        assert!(ev("take_3") > ev("take_10"));
        // Imitators sit strictly inside the extremes set by the greediest
        // consumers: the percent takers dominate the damage, so "greediest
        // cohort" means the X = 10 trio, not the unconditional taker alone.
        let greediest = ["take_10", "nodep_10", "pct_10"]
            .iter()
            .map(|n| ev(n).abs())
            .fold(0.0_f64, f64::max);
        for name in ["avg_1", "avg_2", "avg_3"] {
            assert!(ev(name).abs() < greediest, "{name} more extreme than the X=10 cohort");
        }
    }

    #[test]
    fn discretizer_representatives_round_trip() {
        let disc = Discretizer::standard(&TocConfig::default());
        for (i, &v) in disc.action_values().iter().enumerate() {
            assert_eq!(disc.action_bin(v), i as u32, "value {v}");
        }
        assert_eq!(disc.action_bin(0.49), 0);
        assert_eq!(disc.action_bin(1000.0), (disc.n_actions() - 1) as u32);
        assert_eq!(disc.pool_bin(-1.0), 0);
        assert_eq!(disc.pool_bin(0.0), 0);
        assert_eq!(disc.pool_bin(199.9), 9);
        assert_eq!(disc.pool_bin(200.0), 10);
        assert_eq!(disc.pool_bin(1e9), 19);
    }

    #[test]
    fn state_action_pairs_line_up_with_steps() {
        let cfg = TocConfig {
            horizon: 3,
            ..TocConfig::default()
        };
        let group = vec![
            (agent("a"), Archetype::TakeX(10.0)),
            (agent("b"), Archetype::TakeX(1.0)),
        ];
        let traj = rollout(&group, &cfg).unwrap();
        let disc = Discretizer::standard(&cfg);
        let pairs = state_actions(&traj, 0, &disc);
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|&(_, a)| a == disc.action_bin(10.0)));
        let pairs_b = state_actions(&traj, 1, &disc);
        assert!(pairs_b.iter().all(|&(_, a)| a == disc.action_bin(1.0)));
    }
}
