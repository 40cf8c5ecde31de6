//! Credit estimation from group observations.
//!
//! An observation is one scored group outcome. Credits are estimated per
//! size stratum as the mean score of groups including an agent minus the
//! mean score of groups excluding it, averaged over the strata where both
//! sides are populated. Every observation counts as one sample; repeated
//! groups are deliberately not collapsed here.
//!
//! Cluster-level credits collapse observations to their cluster images
//! first (duplicate images merge, scores averaged) and estimate over those
//! rows, so each realized image counts once regardless of how many
//! observations produced it. [`ev_cluster_search`] climbs the variance of
//! those credits over surjective k-partitions with an incrementally
//! maintained evaluator; [`crate::oracle`] recomputes the same objective
//! from scratch for cross-checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::game::CharacteristicGame;
use crate::seeding;

/// One scored group outcome, members stored as sorted agent indices.
#[derive(Debug, Clone)]
pub struct GroupObservation {
    members: Vec<usize>,
    score: f64,
    /// Index into an external trajectory list, when the score came from a
    /// recorded episode.
    pub trajectory: Option<usize>,
}

impl GroupObservation {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

/// A collection of group observations over a fixed agent roster.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    agents: Vec<AgentId>,
    index: HashMap<AgentId, usize>,
    declared_sizes: Option<BTreeSet<usize>>,
    observations: Vec<GroupObservation>,
}

impl ObservationSet {
    pub fn new(agents: Vec<AgentId>) -> Result<Self> {
        Self::build(agents, None)
    }

    /// Declared sizes are enforced on every push; without them any
    /// non-empty group size is accepted.
    pub fn with_sizes(agents: Vec<AgentId>, sizes: BTreeSet<usize>) -> Result<Self> {
        let n = agents.len();
        for &s in &sizes {
            if s == 0 || s > n {
                return Err(Error::GroupSize {
                    expected: format!("1..={n}"),
                    got: s,
                });
            }
        }
        Self::build(agents, Some(sizes))
    }

    fn build(agents: Vec<AgentId>, sizes: Option<BTreeSet<usize>>) -> Result<Self> {
        let mut index = HashMap::with_capacity(agents.len());
        for (i, a) in agents.iter().enumerate() {
            if index.insert(a.clone(), i).is_some() {
                return Err(Error::DuplicateAgent(a.clone()));
            }
        }
        Ok(ObservationSet {
            agents,
            index,
            declared_sizes: sizes,
            observations: Vec::new(),
        })
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent_index(&self, agent: &AgentId) -> Option<usize> {
        self.index.get(agent).copied()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[GroupObservation] {
        &self.observations
    }

    pub fn declared_sizes(&self) -> Option<&BTreeSet<usize>> {
        self.declared_sizes.as_ref()
    }

    pub fn observed_sizes(&self) -> BTreeSet<usize> {
        self.observations.iter().map(|o| o.members.len()).collect()
    }

    pub fn push(&mut self, group: &[AgentId], score: f64) -> Result<()> {
        let members = self.resolve(group)?;
        self.push_indices(members, score, None)
    }

    pub fn push_with_trajectory(
        &mut self,
        group: &[AgentId],
        score: f64,
        trajectory: usize,
    ) -> Result<()> {
        let members = self.resolve(group)?;
        self.push_indices(members, score, Some(trajectory))
    }

    fn resolve(&self, group: &[AgentId]) -> Result<Vec<usize>> {
        group
            .iter()
            .map(|a| {
                self.index
                    .get(a)
                    .copied()
                    .ok_or_else(|| Error::UnknownAgent(a.clone()))
            })
            .collect()
    }

    /// Members may arrive unsorted; they are stored sorted and must be
    /// distinct valid indices.
    pub fn push_indices(
        &mut self,
        mut members: Vec<usize>,
        score: f64,
        trajectory: Option<usize>,
    ) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::NonFiniteValue(score));
        }
        members.sort_unstable();
        for w in members.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateMember(self.agents[w[0]].clone()));
            }
        }
        if let Some(&last) = members.last() {
            if last >= self.agents.len() {
                return Err(Error::InvalidParam(format!(
                    "member index {last} out of range for {} agents",
                    self.agents.len()
                )));
            }
        }
        let size = members.len();
        let permitted = match &self.declared_sizes {
            None => size >= 1,
            Some(sizes) => sizes.contains(&size),
        };
        if !permitted {
            return Err(Error::GroupSize {
                expected: self
                    .declared_sizes
                    .as_ref()
                    .map_or_else(|| "1..".into(), |s| format!("{s:?}")),
                got: size,
            });
        }
        self.observations.push(GroupObservation {
            members,
            score,
            trajectory,
        });
        Ok(())
    }

    /// Collapses observations to a constrained game: duplicate groups merge
    /// with scores averaged. Feeds the exact credit paths when the roster is
    /// small enough to enumerate.
    pub fn to_game(&self) -> Result<CharacteristicGame> {
        let n = self.n_agents();
        if n > 128 {
            return Err(Error::ExactLimit { n, limit: 128 });
        }
        let sizes = match &self.declared_sizes {
            Some(s) => s.clone(),
            None => self.observed_sizes(),
        };
        let mut game = CharacteristicGame::constrained(self.agents.clone(), sizes)?;
        let mut acc: BTreeMap<u128, (f64, f64)> = BTreeMap::new();
        for o in &self.observations {
            let mask = o.members.iter().fold(0u128, |m, &i| m | (1u128 << i));
            let e = acc.entry(mask).or_insert((0.0, 0.0));
            e.0 += o.score;
            e.1 += 1.0;
        }
        for (mask, (sum, cnt)) in acc {
            let group: Vec<AgentId> = self
                .agents
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1u128 << i) != 0)
                .map(|(_, a)| a.clone())
                .collect();
            game.set_value(&group, sum / cnt)?;
        }
        Ok(game)
    }
}

/// One agent's estimated credit with its evidence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EvEntry {
    pub estimate: f64,
    /// Observations on the include side of used strata.
    pub included: usize,
    /// Observations on the exclude side of used strata.
    pub excluded: usize,
    /// Plug-in standard error; `None` when any used side has fewer than two
    /// samples.
    pub stderr: Option<f64>,
}

/// Per-agent estimates; `None` marks agents with no estimable stratum.
#[derive(Debug, Clone)]
pub struct EvReport {
    agents: Vec<AgentId>,
    entries: Vec<Option<EvEntry>>,
}

impl EvReport {
    pub fn new(agents: Vec<AgentId>, entries: Vec<Option<EvEntry>>) -> Self {
        assert_eq!(agents.len(), entries.len());
        EvReport { agents, entries }
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn entries(&self) -> &[Option<EvEntry>] {
        &self.entries
    }

    pub fn get(&self, agent: &AgentId) -> Option<&EvEntry> {
        self.agents
            .iter()
            .position(|a| a == agent)
            .and_then(|i| self.entries[i].as_ref())
    }

    pub fn estimable_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AgentId, Option<&EvEntry>)> {
        self.agents.iter().zip(self.entries.iter().map(|e| e.as_ref()))
    }
}

#[derive(Default, Clone, Copy)]
struct Acc {
    cnt: usize,
    sum: f64,
    sumsq: f64,
}

impl Acc {
    fn add(&mut self, x: f64) {
        self.cnt += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.cnt as f64
    }

    /// Unbiased sample variance; `None` below two samples.
    fn variance(&self) -> Option<f64> {
        if self.cnt < 2 {
            return None;
        }
        let v = (self.sumsq - self.sum * self.sum / self.cnt as f64) / (self.cnt - 1) as f64;
        Some(v.max(0.0))
    }
}

/// Estimates credits for every agent on the roster.
///
/// Never fails: agents with no stratum populated on both sides come back as
/// `None` in the report.
pub fn estimate_all(obs: &ObservationSet) -> EvReport {
    let n = obs.n_agents();
    let mut totals: BTreeMap<usize, Acc> = BTreeMap::new();
    let mut with: Vec<BTreeMap<usize, Acc>> = vec![BTreeMap::new(); n];
    for o in obs.observations() {
        let m = o.members().len();
        totals.entry(m).or_default().add(o.score());
        for &a in o.members() {
            with[a].entry(m).or_default().add(o.score());
        }
    }

    let entries: Vec<Option<EvEntry>> = (0..n)
        .map(|a| {
            let mut terms = 0usize;
            let mut term_sum = 0.0;
            let mut included = 0usize;
            let mut excluded = 0usize;
            let mut var_sum = 0.0;
            let mut var_ok = true;
            for (&m, total) in &totals {
                let incl = with[a].get(&m).copied().unwrap_or_default();
                let excl_cnt = total.cnt - incl.cnt;
                if incl.cnt == 0 || excl_cnt == 0 {
                    continue;
                }
                let excl_sum = total.sum - incl.sum;
                let excl_sumsq = total.sumsq - incl.sumsq;
                term_sum += incl.mean() - excl_sum / excl_cnt as f64;
                terms += 1;
                included += incl.cnt;
                excluded += excl_cnt;
                let excl = Acc {
                    cnt: excl_cnt,
                    sum: excl_sum,
                    sumsq: excl_sumsq,
                };
                match (incl.variance(), excl.variance()) {
                    (Some(vi), Some(ve)) => {
                        var_sum += vi / incl.cnt as f64 + ve / excl_cnt as f64;
                    }
                    _ => var_ok = false,
                }
            }
            if terms == 0 {
                return None;
            }
            let s = terms as f64;
            Some(EvEntry {
                estimate: term_sum / s,
                included,
                excluded,
                stderr: var_ok.then(|| (var_sum / (s * s)).sqrt()),
            })
        })
        .collect();

    EvReport::new(obs.agents().to_vec(), entries)
}

/// Single-agent variant; errors when the agent cannot be estimated.
pub fn estimate_ev(obs: &ObservationSet, agent: &AgentId) -> Result<EvEntry> {
    let report = estimate_all(obs);
    match report.get(agent) {
        Some(e) => Ok(e.clone()),
        None => {
            if obs.agent_index(agent).is_none() {
                Err(Error::UnknownAgent(agent.clone()))
            } else {
                Err(Error::Inestimable(agent.clone()))
            }
        }
    }
}

/// A partition of a roster into k labeled clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    agents: Vec<AgentId>,
    clusters: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(agents: Vec<AgentId>, clusters: Vec<usize>, k: usize) -> Result<Self> {
        if agents.len() != clusters.len() {
            return Err(Error::InvalidParam(format!(
                "{} agents but {} cluster labels",
                agents.len(),
                clusters.len()
            )));
        }
        if k == 0 {
            return Err(Error::InvalidK { k, n: agents.len() });
        }
        {
            let mut seen = std::collections::HashSet::with_capacity(agents.len());
            for a in &agents {
                if !seen.insert(a) {
                    return Err(Error::DuplicateAgent(a.clone()));
                }
            }
        }
        for &c in &clusters {
            if c >= k {
                return Err(Error::InvalidParam(format!(
                    "cluster label {c} out of range for k={k}"
                )));
            }
        }
        Ok(ClusterAssignment { agents, clusters, k })
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn clusters(&self) -> &[usize] {
        &self.clusters
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cluster_of(&self, agent: &AgentId) -> Option<usize> {
        self.agents
            .iter()
            .position(|a| a == agent)
            .map(|i| self.clusters[i])
    }

    pub fn is_surjective(&self) -> bool {
        let mut seen = vec![false; self.k];
        for &c in &self.clusters {
            seen[c] = true;
        }
        seen.iter().all(|&s| s)
    }

    /// Cluster labels reordered to match another roster; every agent there
    /// must be covered.
    pub fn aligned_to(&self, agents: &[AgentId]) -> Result<Vec<usize>> {
        let pos: HashMap<&AgentId, usize> =
            self.agents.iter().enumerate().map(|(i, a)| (a, i)).collect();
        agents
            .iter()
            .map(|a| {
                pos.get(a)
                    .map(|&i| self.clusters[i])
                    .ok_or_else(|| Error::UnknownAgent(a.clone()))
            })
            .collect()
    }
}

fn cluster_agent_ids(k: usize) -> Vec<AgentId> {
    let width = (k.max(2) - 1).to_string().len();
    (0..k)
        .map(|c| AgentId::new(format!("c{c:0width$}")).unwrap())
        .collect()
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n || k > 128 {
        return Err(Error::InvalidK { k, n });
    }
    Ok(())
}

/// Collapses observations through a cluster assignment into a constrained
/// game over cluster identities. Each observation maps to the set of
/// clusters its members touch; duplicate images merge with scores averaged,
/// and the permitted sizes are exactly the realized image sizes.
pub fn clustered_value(
    obs: &ObservationSet,
    assignment: &ClusterAssignment,
) -> Result<CharacteristicGame> {
    let k = assignment.k();
    check_k(k, obs.n_agents())?;
    let clusters = assignment.aligned_to(obs.agents())?;
    let mut rows: BTreeMap<u128, (f64, f64)> = BTreeMap::new();
    for o in obs.observations() {
        let mask = o
            .members()
            .iter()
            .fold(0u128, |m, &a| m | (1u128 << clusters[a]));
        let e = rows.entry(mask).or_insert((0.0, 0.0));
        e.0 += o.score();
        e.1 += 1.0;
    }
    let sizes: BTreeSet<usize> = rows.keys().map(|m| m.count_ones() as usize).collect();
    let ids = cluster_agent_ids(k);
    let mut game = CharacteristicGame::constrained(ids.clone(), sizes)?;
    for (mask, (sum, cnt)) in rows {
        let group: Vec<AgentId> = (0..k)
            .filter(|&c| mask & (1u128 << c) != 0)
            .map(|c| ids[c].clone())
            .collect();
        game.set_value(&group, sum / cnt)?;
    }
    Ok(game)
}

/// Estimates cluster-level credits and broadcasts them back to the agents.
///
/// Estimation runs over the collapsed image rows (one sample per realized
/// image), so the entry counts describe rows, not raw observations. A lone
/// cluster has nothing to be exchanged with; k = 1 yields zero credits by
/// convention. Agents in clusters with no estimable stratum come back
/// `None`.
pub fn clustered_ev(obs: &ObservationSet, assignment: &ClusterAssignment) -> Result<EvReport> {
    let k = assignment.k();
    check_k(k, obs.n_agents())?;
    let clusters = assignment.aligned_to(obs.agents())?;
    if k == 1 {
        let entries = vec![
            Some(EvEntry {
                estimate: 0.0,
                included: 0,
                excluded: 0,
                stderr: None,
            });
            obs.n_agents()
        ];
        return Ok(EvReport::new(obs.agents().to_vec(), entries));
    }
    let game = clustered_value(obs, assignment)?;
    let mut cluster_obs = ObservationSet::new(game.agents().to_vec())?;
    for (mask, v) in game.entries().collect::<BTreeMap<_, _>>() {
        let members: Vec<usize> = (0..k).filter(|&c| mask & (1u128 << c) != 0).collect();
        cluster_obs.push_indices(members, v, None)?;
    }
    let cluster_report = estimate_all(&cluster_obs);
    let entries: Vec<Option<EvEntry>> = clusters
        .iter()
        .map(|&c| cluster_report.entries()[c].clone())
        .collect();
    Ok(EvReport::new(obs.agents().to_vec(), entries))
}

/// Variance over agents of cluster credits for a fixed assignment; `None`
/// when some non-empty cluster is inestimable.
pub fn clustered_variance(
    obs: &ObservationSet,
    assignment: &ClusterAssignment,
) -> Result<Option<f64>> {
    let k = assignment.k();
    check_k(k, obs.n_agents())?;
    if k == 1 {
        return Ok(Some(0.0));
    }
    let clusters = assignment.aligned_to(obs.agents())?;
    let eval = Evaluator::new(obs, k, clusters, 0.0, None);
    Ok(eval.objective())
}

/// Search parameters for [`ev_cluster_search`].
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Total starts; the first uses the initial assignment verbatim when one
    /// is given.
    pub restarts: usize,
    /// Weight on the fraction of agents moved away from the initial
    /// assignment; inert without one.
    pub penalty_weight: f64,
    pub seed: u64,
    /// Probability that a restart reassigns each agent before climbing.
    pub perturb_prob: f64,
    /// Safety cap on improvement sweeps per restart.
    pub max_passes: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 16,
            penalty_weight: 0.0,
            seed: 0,
            perturb_prob: 0.2,
            max_passes: 200,
        }
    }
}

/// Search result: the winning assignment, its exactly recomputed objective,
/// and which restart produced it.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub assignment: ClusterAssignment,
    pub objective: f64,
    pub best_restart: usize,
}

/// Incrementally maintained objective state.
///
/// Rows live in a BTreeMap so aggregate construction order is deterministic;
/// moves detach and reattach each affected observation's score, updating the
/// per-size and per-(cluster, size) aggregates of row means in O(k) per
/// observation. Small float drift can accumulate over a climb, so final
/// objectives are recomputed from a fresh build.
struct Evaluator<'a> {
    obs: &'a ObservationSet,
    k: usize,
    assign: Vec<usize>,
    cluster_sizes: Vec<usize>,
    agent_obs: Vec<Vec<usize>>,
    obs_counts: Vec<Vec<u32>>,
    rows: BTreeMap<u128, (f64, u32)>,
    strat_cnt: Vec<u32>,
    strat_sum: Vec<f64>,
    incl_cnt: Vec<u32>,
    incl_sum: Vec<f64>,
    penalty_weight: f64,
    init: Option<Vec<usize>>,
    diff_count: usize,
}

impl<'a> Evaluator<'a> {
    fn new(
        obs: &'a ObservationSet,
        k: usize,
        assign: Vec<usize>,
        penalty_weight: f64,
        init: Option<Vec<usize>>,
    ) -> Self {
        let n = obs.n_agents();
        let mut agent_obs = vec![Vec::new(); n];
        for (oi, o) in obs.observations().iter().enumerate() {
            for &a in o.members() {
                agent_obs[a].push(oi);
            }
        }
        let mut ev = Evaluator {
            obs,
            k,
            assign,
            cluster_sizes: vec![0; k],
            agent_obs,
            obs_counts: Vec::new(),
            rows: BTreeMap::new(),
            strat_cnt: vec![0; k + 1],
            strat_sum: vec![0.0; k + 1],
            incl_cnt: vec![0; k * (k + 1)],
            incl_sum: vec![0.0; k * (k + 1)],
            penalty_weight,
            init,
            diff_count: 0,
        };
        ev.rebuild();
        ev
    }

    fn rebuild(&mut self) {
        let k = self.k;
        self.cluster_sizes = vec![0; k];
        for &c in &self.assign {
            self.cluster_sizes[c] += 1;
        }
        self.diff_count = match &self.init {
            None => 0,
            Some(init) => self
                .assign
                .iter()
                .zip(init)
                .filter(|(a, b)| a != b)
                .count(),
        };
        self.obs_counts = self
            .obs
            .observations()
            .iter()
            .map(|o| {
                let mut counts = vec![0u32; k];
                for &a in o.members() {
                    counts[self.assign[a]] += 1;
                }
                counts
            })
            .collect();
        self.rows = BTreeMap::new();
        for (oi, o) in self.obs.observations().iter().enumerate() {
            let mask = Self::mask_of(&self.obs_counts[oi]);
            let e = self.rows.entry(mask).or_insert((0.0, 0));
            e.0 += o.score();
            e.1 += 1;
        }
        self.strat_cnt = vec![0; k + 1];
        self.strat_sum = vec![0.0; k + 1];
        self.incl_cnt = vec![0; k * (k + 1)];
        self.incl_sum = vec![0.0; k * (k + 1)];
        let rows: Vec<(u128, f64)> = self
            .rows
            .iter()
            .map(|(&m, &(sum, cnt))| (m, sum / cnt as f64))
            .collect();
        for (mask, mean) in rows {
            self.strata_add(mask, mean);
        }
    }

    fn mask_of(counts: &[u32]) -> u128 {
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .fold(0u128, |m, (c, _)| m | (1u128 << c))
    }

    fn strata_add(&mut self, mask: u128, mean: f64) {
        let s = mask.count_ones() as usize;
        self.strat_cnt[s] += 1;
        self.strat_sum[s] += mean;
        let mut bits = mask;
        while bits != 0 {
            let c = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            self.incl_cnt[c * (self.k + 1) + s] += 1;
            self.incl_sum[c * (self.k + 1) + s] += mean;
        }
    }

    fn strata_remove(&mut self, mask: u128, mean: f64) {
        let s = mask.count_ones() as usize;
        self.strat_cnt[s] -= 1;
        self.strat_sum[s] -= mean;
        let mut bits = mask;
        while bits != 0 {
            let c = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            self.incl_cnt[c * (self.k + 1) + s] -= 1;
            self.incl_sum[c * (self.k + 1) + s] -= mean;
        }
    }

    fn detach(&mut self, mask: u128, score: f64) {
        let (sum, cnt) = *self.rows.get(&mask).expect("row must exist");
        self.strata_remove(mask, sum / cnt as f64);
        if cnt == 1 {
            self.rows.remove(&mask);
        } else {
            let e = self.rows.get_mut(&mask).unwrap();
            e.0 -= score;
            e.1 -= 1;
            let mean = e.0 / e.1 as f64;
            self.strata_add(mask, mean);
        }
    }

    fn attach(&mut self, mask: u128, score: f64) {
        if let Some(e) = self.rows.get_mut(&mask) {
            let old_mean = e.0 / e.1 as f64;
            e.0 += score;
            e.1 += 1;
            let mean = e.0 / e.1 as f64;
            self.strata_remove(mask, old_mean);
            self.strata_add(mask, mean);
        } else {
            self.rows.insert(mask, (score, 1));
            self.strata_add(mask, score);
        }
    }

    /// Reassigns one agent, updating every observation it appears in.
    fn apply_move(&mut self, agent: usize, to: usize) {
        let from = self.assign[agent];
        if from == to {
            return;
        }
        let obs_indices = std::mem::take(&mut self.agent_obs[agent]);
        for &oi in &obs_indices {
            let score = self.obs.observations()[oi].score();
            let old_mask = Self::mask_of(&self.obs_counts[oi]);
            self.detach(old_mask, score);
            self.obs_counts[oi][from] -= 1;
            self.obs_counts[oi][to] += 1;
            let new_mask = Self::mask_of(&self.obs_counts[oi]);
            self.attach(new_mask, score);
        }
        self.agent_obs[agent] = obs_indices;
        self.cluster_sizes[from] -= 1;
        self.cluster_sizes[to] += 1;
        if let Some(init) = &self.init {
            let was_diff = self.assign[agent] != init[agent];
            let is_diff = to != init[agent];
            match (was_diff, is_diff) {
                (false, true) => self.diff_count += 1,
                (true, false) => self.diff_count -= 1,
                _ => {}
            }
        }
        self.assign[agent] = to;
    }

    /// `None` when any non-empty cluster lacks an estimable stratum.
    fn objective(&self) -> Option<f64> {
        let k = self.k;
        let n = self.assign.len() as f64;
        let mut mean = 0.0;
        let mut sq = 0.0;
        for c in 0..k {
            if self.cluster_sizes[c] == 0 {
                continue;
            }
            let mut terms = 0usize;
            let mut total = 0.0;
            for s in 1..=k {
                let ic = self.incl_cnt[c * (k + 1) + s];
                let tc = self.strat_cnt[s];
                if ic == 0 || tc == ic {
                    continue;
                }
                let is = self.incl_sum[c * (k + 1) + s];
                let ts = self.strat_sum[s];
                total += is / ic as f64 - (ts - is) / (tc - ic) as f64;
                terms += 1;
            }
            if terms == 0 {
                return None;
            }
            let credit = total / terms as f64;
            let w = self.cluster_sizes[c] as f64 / n;
            mean += w * credit;
            sq += w * credit * credit;
        }
        let var = (sq - mean * mean).max(0.0);
        let penalty = if self.init.is_some() && self.penalty_weight != 0.0 {
            self.penalty_weight * self.diff_count as f64 / n
        } else {
            0.0
        };
        Some(var - penalty)
    }

    fn objective_or_neg_inf(&self) -> f64 {
        self.objective().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Moves agents out of over-full clusters until every cluster is non-empty.
/// Deterministic: lowest empty cluster takes the lowest-index agent from the
/// largest cluster (ties by lowest cluster label).
fn make_surjective(assign: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &c in assign.iter() {
            sizes[c] += 1;
        }
        let empty = match sizes.iter().position(|&s| s == 0) {
            None => return,
            Some(e) => e,
        };
        let donor = (0..k).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap();
        let agent = assign.iter().position(|&c| c == donor).unwrap();
        assign[agent] = empty;
    }
}

/// Greedy sweeps to a local optimum: each agent in turn is moved to the
/// cluster with the best objective (strict improvement over staying put,
/// ties to the lowest label), skipping moves that would empty a cluster.
fn climb(eval: &mut Evaluator, max_passes: usize) {
    let n = eval.assign.len();
    for _ in 0..max_passes {
        let mut moved = false;
        for a in 0..n {
            let cur = eval.assign[a];
            if eval.cluster_sizes[cur] == 1 {
                continue;
            }
            let mut best_obj = eval.objective_or_neg_inf();
            let mut best_c = cur;
            for c in 0..eval.k {
                if c == cur {
                    continue;
                }
                eval.apply_move(a, c);
                let obj = eval.objective_or_neg_inf();
                eval.apply_move(a, cur);
                if obj > best_obj {
                    best_obj = obj;
                    best_c = c;
                }
            }
            if best_c != cur {
                eval.apply_move(a, best_c);
                moved = true;
            }
        }
        if !moved {
            return;
        }
    }
}

/// Restarted local search maximizing the variance of cluster credits over
/// surjective k-partitions, minus an optional stay-close penalty.
///
/// Deterministic for a fixed seed: restarts derive independent streams and
/// run sequentially; the best restart wins with ties to the earliest. The
/// reported objective is recomputed from scratch on the winning assignment.
pub fn ev_cluster_search(
    obs: &ObservationSet,
    k: usize,
    init: Option<&ClusterAssignment>,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    let n = obs.n_agents();
    check_k(k, n)?;
    if cfg.restarts == 0 {
        return Err(Error::InvalidParam("restarts must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.perturb_prob) {
        return Err(Error::InvalidParam(format!(
            "perturbation probability {} outside [0, 1]",
            cfg.perturb_prob
        )));
    }
    let init_aligned: Option<Vec<usize>> = match init {
        None => None,
        Some(a) => {
            if a.k() != k {
                return Err(Error::InvalidParam(format!(
                    "initial assignment has k={}, search asked for k={k}",
                    a.k()
                )));
            }
            Some(a.aligned_to(obs.agents())?)
        }
    };

    // k = 1 has a single feasible assignment and zero EV variance by convention.
    if k == 1 {
        let assignment = ClusterAssignment::new(obs.agents().to_vec(), vec![0; n], 1)?;
        return Ok(SearchOutcome {
            assignment,
            objective: 0.0,
            best_restart: 0,
        });
    }

    let mut best: Option<(Vec<usize>, f64, usize)> = None;
    for r in 0..cfg.restarts {
        let mut rng = seeding::rng(seeding::derive_indexed(cfg.seed, "cluster-search-restart", r as u64));
        let mut start: Vec<usize> = match (&init_aligned, r) {
            (Some(init), 0) => init.clone(),
            (Some(init), _) => init
                .iter()
                .map(|&c| {
                    if rng.random::<f64>() < cfg.perturb_prob {
                        rng.random_range(0..k)
                    } else {
                        c
                    }
                })
                .collect(),
            (None, _) => (0..n).map(|_| rng.random_range(0..k)).collect(),
        };
        make_surjective(&mut start, k);
        let mut eval = Evaluator::new(obs, k, start, cfg.penalty_weight, init_aligned.clone());
        if k > 1 {
            climb(&mut eval, cfg.max_passes);
        }
        // fresh build clears any incremental drift before comparing restarts
        let final_assign = eval.assign.clone();
        let exact = Evaluator::new(
            obs,
            k,
            final_assign.clone(),
            cfg.penalty_weight,
            init_aligned.clone(),
        );
        if let Some(obj) = exact.objective() {
            if best.as_ref().map_or(true, |(_, b, _)| obj > *b) {
                best = Some((final_assign, obj, r));
            }
        }
    }

    let (assign, objective, best_restart) = best.ok_or(Error::NoValidCandidate)?;
    Ok(SearchOutcome {
        assignment: ClusterAssignment::new(obs.agents().to_vec(), assign, k)?,
        objective,
        best_restart,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::exchange_constrained_exact;
    use crate::oracle;
    use crate::TOLERANCE;

    fn ids(names: &[&str]) -> Vec<AgentId> {
        names.iter().map(|s| AgentId::new(*s).unwrap()).collect()
    }

    /// Complete duplicate-free dataset from an additive quality model.
    fn quality_obs(qualities: &[f64], sizes: &[usize]) -> ObservationSet {
        use itertools::Itertools;
        let n = qualities.len();
        let agents: Vec<AgentId> = (0..n)
            .map(|i| AgentId::new(format!("a{i}")).unwrap())
            .collect();
        let mut obs =
            ObservationSet::with_sizes(agents, sizes.iter().copied().collect()).unwrap();
        for &m in sizes {
            for combo in (0..n).combinations(m) {
                let score: f64 = combo.iter().map(|&i| qualities[i]).sum();
                obs.push_indices(combo, score, None).unwrap();
            }
        }
        obs
    }

    #[test]
    fn pairwise_estimates_match_constrained_exact_on_duplicate_free_data() {
        let obs = quality_obs(&[1.0, 2.0, 4.0, 8.0], &[1, 2]);
        let report = estimate_all(&obs);
        let exact = exchange_constrained_exact(&obs.to_game().unwrap()).unwrap();
        for (agent, entry) in report.iter() {
            let entry = entry.expect("complete data estimates everyone");
            let want = exact.get(agent).unwrap();
            assert!((entry.estimate - want).abs() < TOLERANCE);
        }
    }

    #[test]
    fn pair_only_dataset_reproduces_known_credits() {
        let agents = ids(&["1", "2", "3"]);
        let mut obs =
            ObservationSet::with_sizes(agents.clone(), [2usize].into_iter().collect()).unwrap();
        obs.push(&[agents[0].clone(), agents[1].clone()], 10.0).unwrap();
        obs.push(&[agents[0].clone(), agents[2].clone()], 6.0).unwrap();
        obs.push(&[agents[1].clone(), agents[2].clone()], 4.0).unwrap();
        let report = estimate_all(&obs);
        let expect = [4.0, 1.0, -5.0];
        for (i, (_, entry)) in report.iter().enumerate() {
            let entry = entry.unwrap();
            assert!((entry.estimate - expect[i]).abs() < TOLERANCE);
            assert_eq!(entry.included, 2);
            assert_eq!(entry.excluded, 1);
            // the exclude side has a single sample in every stratum
            assert!(entry.stderr.is_none());
        }
    }

    #[test]
    fn every_observation_counts_as_a_sample() {
        let agents = ids(&["x", "y"]);
        let mut obs = ObservationSet::new(agents.clone()).unwrap();
        // repeated groups shift the mean instead of collapsing
        obs.push(&[agents[0].clone()], 0.0).unwrap();
        obs.push(&[agents[0].clone()], 4.0).unwrap();
        obs.push(&[agents[1].clone()], 10.0).unwrap();
        let report = estimate_all(&obs);
        let x = report.get(&agents[0]).unwrap();
        assert!((x.estimate - (2.0 - 10.0)).abs() < TOLERANCE);
        assert_eq!(x.included + x.excluded, 3);
        let y = report.get(&agents[1]).unwrap();
        assert!((y.estimate - 8.0).abs() < TOLERANCE);
    }

    #[test]
    fn stderr_defined_only_with_two_samples_per_side() {
        let agents = ids(&["x", "y"]);
        let mut obs = ObservationSet::new(agents.clone()).unwrap();
        obs.push(&[agents[0].clone()], 1.0).unwrap();
        obs.push(&[agents[0].clone()], 3.0).unwrap();
        obs.push(&[agents[1].clone()], 5.0).unwrap();
        let report = estimate_all(&obs);
        assert!(report.get(&agents[0]).unwrap().stderr.is_none());
        obs.push(&[agents[1].clone()], 9.0).unwrap();
        let report = estimate_all(&obs);
        let x = report.get(&agents[0]).unwrap();
        // var_incl = 2, var_excl = 8, one stratum
        let want = (2.0f64 / 2.0 + 8.0 / 2.0).sqrt();
        assert!((x.stderr.unwrap() - want).abs() < TOLERANCE);
    }

    #[test]
    fn empty_set_flags_everyone() {
        let obs = ObservationSet::new(ids(&["a", "b"])).unwrap();
        let report = estimate_all(&obs);
        assert_eq!(report.estimable_count(), 0);
        assert!(matches!(
            estimate_ev(&obs, &AgentId::new("a").unwrap()),
            Err(Error::Inestimable(_))
        ));
    }

    #[test]
    fn full_roster_groups_are_inestimable() {
        // no stratum has an exclude side when every group contains everyone
        let agents = ids(&["a", "b", "c"]);
        let mut obs = ObservationSet::new(agents.clone()).unwrap();
        obs.push(&agents, 5.0).unwrap();
        obs.push(&agents, 7.0).unwrap();
        let report = estimate_all(&obs);
        assert_eq!(report.estimable_count(), 0);
    }

    #[test]
    fn unknown_agent_is_distinguished_from_inestimable() {
        let obs = ObservationSet::new(ids(&["a"])).unwrap();
        assert!(matches!(
            estimate_ev(&obs, &AgentId::new("ghost").unwrap()),
            Err(Error::UnknownAgent(_))
        ));
    }

    #[test]
    fn declared_sizes_are_enforced() {
        let agents = ids(&["a", "b", "c"]);
        let mut obs =
            ObservationSet::with_sizes(agents.clone(), [2usize].into_iter().collect()).unwrap();
        assert!(matches!(
            obs.push(&agents[..1], 1.0),
            Err(Error::GroupSize { got: 1, .. })
        ));
        obs.push(&agents[..2], 1.0).unwrap();
    }

    #[test]
    fn clustered_value_merges_duplicate_images() {
        let qualities = [1.0, 1.0, 5.0, 5.0];
        let obs = quality_obs(&qualities, &[2]);
        let assign = ClusterAssignment::new(obs.agents().to_vec(), vec![0, 0, 1, 1], 2).unwrap();
        let game = clustered_value(&obs, &assign).unwrap();
        let c = game.agents().to_vec();
        assert_eq!(c.len(), 2);
        // within-cluster pairs collapse to singleton images
        assert_eq!(game.value(&c[..1]).unwrap(), Some(2.0));
        assert_eq!(game.value(&c[1..]).unwrap(), Some(10.0));
        // four cross pairs average to 6
        assert_eq!(game.value(&c).unwrap(), Some(6.0));
        assert_eq!(
            game.permitted_sizes().unwrap().iter().copied().collect::<Vec<_>>(),
            vec![1, 2]
        );
    }

    #[test]
    fn clustered_ev_broadcasts_cluster_credits() {
        let obs = quality_obs(&[1.0, 1.0, 5.0, 5.0], &[2]);
        let assign = ClusterAssignment::new(obs.agents().to_vec(), vec![0, 0, 1, 1], 2).unwrap();
        let report = clustered_ev(&obs, &assign).unwrap();
        let values: Vec<f64> = report
            .entries()
            .iter()
            .map(|e| e.as_ref().unwrap().estimate)
            .collect();
        // size-1 rows give 2 vs 10; the size-2 row has no exclude side
        assert!((values[0] - -8.0).abs() < TOLERANCE);
        assert!((values[1] - -8.0).abs() < TOLERANCE);
        assert!((values[2] - 8.0).abs() < TOLERANCE);
        assert!((values[3] - 8.0).abs() < TOLERANCE);
    }

    #[test]
    fn lone_cluster_means_zero_credit() {
        let obs = quality_obs(&[1.0, 2.0], &[1]);
        let assign = ClusterAssignment::new(obs.agents().to_vec(), vec![0, 0], 1).unwrap();
        let report = clustered_ev(&obs, &assign).unwrap();
        for (_, e) in report.iter() {
            assert_eq!(e.unwrap().estimate, 0.0);
        }
        let var = clustered_variance(&obs, &assign).unwrap();
        assert_eq!(var, Some(0.0));
    }

    #[test]
    fn singleton_clusters_reduce_to_raw_estimates_on_duplicate_free_data() {
        let obs = quality_obs(&[1.0, 3.0, 9.0], &[1, 2]);
        let n = obs.n_agents();
        let assign =
            ClusterAssignment::new(obs.agents().to_vec(), (0..n).collect(), n).unwrap();
        let clustered = clustered_ev(&obs, &assign).unwrap();
        let raw = estimate_all(&obs);
        for (c, r) in clustered.entries().iter().zip(raw.entries()) {
            let (c, r) = (c.as_ref().unwrap(), r.as_ref().unwrap());
            assert!((c.estimate - r.estimate).abs() < TOLERANCE);
        }
    }

    #[test]
    fn inestimable_cluster_is_flagged() {
        // both observations span both clusters, so no stratum has an
        // exclude side for either cluster
        let agents = ids(&["a", "b"]);
        let mut obs = ObservationSet::new(agents.clone()).unwrap();
        obs.push(&agents, 3.0).unwrap();
        let assign = ClusterAssignment::new(agents.clone(), vec![0, 1], 2).unwrap();
        let report = clustered_ev(&obs, &assign).unwrap();
        assert_eq!(report.estimable_count(), 0);
        assert_eq!(clustered_variance(&obs, &assign).unwrap(), None);
    }

    #[test]
    fn invalid_k_is_rejected() {
        let obs = quality_obs(&[1.0, 2.0], &[1]);
        let too_many = ClusterAssignment::new(obs.agents().to_vec(), vec![0, 1], 3).unwrap();
        assert!(matches!(
            clustered_ev(&obs, &too_many),
            Err(Error::InvalidK { k: 3, n: 2 })
        ));
        assert!(matches!(
            ev_cluster_search(&obs, 0, None, &SearchConfig::default()),
            Err(Error::InvalidK { k: 0, .. })
        ));
    }

    #[test]
    fn evaluator_matches_naive_recompute_under_random_moves() {
        use rand::Rng;
        let obs = quality_obs(&[1.0, 2.0, 3.0, 5.0, 8.0], &[1, 2, 3]);
        let n = obs.n_agents();
        let k = 3;
        let mut assign = vec![0, 1, 2, 0, 1];
        let mut eval = Evaluator::new(&obs, k, assign.clone(), 0.0, None);
        let mut rng = crate::seeding::rng(42);
        for _ in 0..200 {
            let a = rng.random_range(0..n);
            let c = rng.random_range(0..k);
            eval.apply_move(a, c);
            assign[a] = c;
            let naive = oracle::clustered_variance_naive(&obs, &assign, k);
            match (eval.objective(), naive) {
                (Some(fast), Some(slow)) => {
                    assert!((fast - slow).abs() < 1e-9, "fast={fast} slow={slow}")
                }
                (None, None) => {}
                other => panic!("objective mismatch: {other:?}"),
            }
        }
    }

    #[test]
    fn search_finds_the_exhaustive_optimum_on_a_separable_instance() {
        let obs = quality_obs(&[1.0, 1.0, 5.0, 5.0], &[2]);
        let cfg = SearchConfig {
            restarts: 20,
            seed: 7,
            ..SearchConfig::default()
        };
        let out = ev_cluster_search(&obs, 2, None, &cfg).unwrap();
        let (_, best_obj, ties) =
            oracle::exhaustive_partition_search(&obs, 2, 1e-9).unwrap();
        assert!((out.objective - best_obj).abs() < 1e-9);
        let canon = oracle::canonical_partition(out.assignment.clusters());
        assert!(ties.contains(&canon));
        // quality split: the two low agents together, the two high together
        assert_eq!(canon, vec![0, 0, 1, 1]);
        assert!(out.assignment.is_surjective());
    }

    #[test]
    fn search_is_deterministic_for_a_fixed_seed() {
        let obs = quality_obs(&[2.0, 4.0, 1.0, 9.0, 5.0, 5.0], &[1, 2]);
        let cfg = SearchConfig {
            restarts: 6,
            seed: 123,
            ..SearchConfig::default()
        };
        let a = ev_cluster_search(&obs, 3, None, &cfg).unwrap();
        let b = ev_cluster_search(&obs, 3, None, &cfg).unwrap();
        assert_eq!(a.assignment.clusters(), b.assignment.clusters());
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.best_restart, b.best_restart);
    }

    #[test]
    fn heavy_stay_close_penalty_pins_the_initial_assignment() {
        let obs = quality_obs(&[1.0, 1.0, 5.0, 5.0], &[1, 2]);
        let init =
            ClusterAssignment::new(obs.agents().to_vec(), vec![0, 1, 0, 1], 2).unwrap();
        let cfg = SearchConfig {
            restarts: 1,
            penalty_weight: 1e9,
            seed: 3,
            ..SearchConfig::default()
        };
        let out = ev_cluster_search(&obs, 2, Some(&init), &cfg).unwrap();
        assert_eq!(out.assignment.clusters(), init.clusters());
    }

    #[test]
    fn search_result_is_always_surjective() {
        let obs = quality_obs(&[3.0, 1.0, 4.0, 1.0, 5.0], &[1, 2]);
        for k in 1..=4usize {
            let cfg = SearchConfig {
                restarts: 4,
                seed: k as u64,
                ..SearchConfig::default()
            };
            let out = ev_cluster_search(&obs, k, None, &cfg).unwrap();
            assert!(out.assignment.is_surjective(), "k={k}");
        }
    }

    #[test]
    fn search_with_no_estimable_partition_reports_no_candidate() {
        // a single observation covering everyone leaves nothing to compare
        let agents = ids(&["a", "b", "c"]);
        let mut obs = ObservationSet::new(agents.clone()).unwrap();
        obs.push(&agents, 1.0).unwrap();
        assert!(matches!(
            ev_cluster_search(&obs, 2, None, &SearchConfig::default()),
            Err(Error::NoValidCandidate)
        ));
    }

    #[test]
    fn to_game_collapses_duplicates_by_mean() {
        let agents = ids(&["a", "b"]);
        let mut obs = ObservationSet::new(agents.clone()).unwrap();
        obs.push(&agents[..1], 1.0).unwrap();
        obs.push(&agents[..1], 3.0).unwrap();
        obs.push(&agents[1..], 7.0).unwrap();
        let game = obs.to_game().unwrap();
        assert_eq!(game.value(&agents[..1]).unwrap(), Some(2.0));
        assert_eq!(game.value(&agents[1..]).unwrap(), Some(7.0));
    }

    #[test]
    fn make_surjective_is_deterministic_and_minimal() {
        let mut assign = vec![0, 0, 0, 0];
        make_surjective(&mut assign, 2);
        assert_eq!(assign, vec![1, 0, 0, 0]);
        let mut assign = vec![1, 1, 3, 3, 3];
        make_surjective(&mut assign, 4);
        // cluster 3 donates its first agent to 0, then 1/3 tie resolves low
        assert_eq!(assign.iter().filter(|&&c| c == 0).count(), 1);
        assert_eq!(assign.iter().filter(|&&c| c == 2).count(), 1);
        let mut seen = vec![false; 4];
        for &c in &assign {
            seen[c] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
