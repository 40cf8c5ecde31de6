//! Characteristic games and exact credit computation.
//!
//! A game maps groups of agents to real values. Unconstrained games define a
//! value for every subset of the agent set (empty group fixed at 0);
//! constrained games define values only for groups whose size lies in a
//! permitted-size set, modeling settings where the grand coalition is never
//! observable.
//!
//! Exact computations use coalition-sum closed forms, O(2^n * n), and refuse
//! games larger than an explicit limit. The permutation definitions live in
//! [`crate::oracle`] and are used to cross-check these paths in tests.

use std::collections::{BTreeSet, HashMap};

use itertools::Itertools;

use crate::agent::AgentId;
use crate::error::{Error, Result};

/// Largest agent count accepted by exact computations unless overridden.
pub const DEFAULT_EXACT_LIMIT: usize = 12;

/// Hard ceiling for exact-limit overrides; 2^n table entries beyond this are
/// not worth supporting.
pub const MAX_EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CreditKind {
    Shapley,
    Exchange,
    ConstrainedExchange,
}

/// Per-agent credits, aligned with the owning game's agent order.
#[derive(Debug, Clone)]
pub struct CreditVector {
    pub kind: CreditKind,
    agents: Vec<AgentId>,
    values: Vec<f64>,
}

impl CreditVector {
    pub fn new(kind: CreditKind, agents: Vec<AgentId>, values: Vec<f64>) -> Self {
        assert_eq!(agents.len(), values.len());
        CreditVector { kind, agents, values }
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, agent: &AgentId) -> Option<f64> {
        self.agents.iter().position(|a| a == agent).map(|i| self.values[i])
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AgentId, f64)> {
        self.agents.iter().zip(self.values.iter().copied())
    }

    /// Agent indices ordered by descending credit; ties keep agent order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        idx
    }
}

/// A characteristic game over an explicit, ordered agent set.
///
/// Groups are stored as bitmasks over agent indices, so games hold at most
/// 128 agents. The values table is partial while a game is being built;
/// exact operations demand completeness over their domain and report what is
/// missing otherwise.
#[derive(Debug, Clone)]
pub struct CharacteristicGame {
    agents: Vec<AgentId>,
    index: HashMap<AgentId, usize>,
    /// `None` marks an unconstrained game (all sizes 0..=n permitted).
    permitted_sizes: Option<BTreeSet<usize>>,
    values: HashMap<u128, f64>,
}

impl CharacteristicGame {
    pub fn unconstrained(agents: Vec<AgentId>) -> Result<Self> {
        let mut g = Self::build(agents, None)?;
        g.values.insert(0, 0.0);
        Ok(g)
    }

    pub fn constrained(agents: Vec<AgentId>, sizes: BTreeSet<usize>) -> Result<Self> {
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
        if agents.len() > 128 {
            return Err(Error::ExactLimit { n: agents.len(), limit: 128 });
        }
        let mut index = HashMap::with_capacity(agents.len());
        for (i, a) in agents.iter().enumerate() {
            if index.insert(a.clone(), i).is_some() {
                return Err(Error::DuplicateAgent(a.clone()));
            }
        }
        Ok(CharacteristicGame {
            agents,
            index,
            permitted_sizes: sizes,
            values: HashMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn agent_index(&self, agent: &AgentId) -> Option<usize> {
        self.index.get(agent).copied()
    }

    pub fn is_constrained(&self) -> bool {
        self.permitted_sizes.is_some()
    }

    pub fn permitted_sizes(&self) -> Option<&BTreeSet<usize>> {
        self.permitted_sizes.as_ref()
    }

    /// Feasible sizes for constrained exchange credits: the permitted sizes
    /// clipped to 1..=n-1, or all of 1..=n-1 when unconstrained.
    pub fn feasible_sizes(&self) -> BTreeSet<usize> {
        let n = self.n();
        match &self.permitted_sizes {
            None => (1..n).collect(),
            Some(m) => m.iter().copied().filter(|&s| s >= 1 && s < n).collect(),
        }
    }

    fn mask_of(&self, group: &[AgentId]) -> Result<u128> {
        let mut mask: u128 = 0;
        for a in group {
            let i = *self
                .index
                .get(a)
                .ok_or_else(|| Error::UnknownAgent(a.clone()))?;
            let bit = 1u128 << i;
            if mask & bit != 0 {
                return Err(Error::DuplicateMember(a.clone()));
            }
            mask |= bit;
        }
        Ok(mask)
    }

    fn size_permitted(&self, size: usize) -> bool {
        match &self.permitted_sizes {
            None => true,
            Some(m) => m.contains(&size),
        }
    }

    pub fn set_value(&mut self, group: &[AgentId], value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFiniteValue(value));
        }
        let mask = self.mask_of(group)?;
        if mask == 0 {
            if self.is_constrained() {
                return Err(Error::GroupSize {
                    expected: format!("{:?}", self.permitted_sizes.as_ref().unwrap()),
                    got: 0,
                });
            }
            if value != 0.0 {
                return Err(Error::NonzeroEmptyValue(value));
            }
            return Ok(());
        }
        let size = mask.count_ones() as usize;
        if !self.size_permitted(size) {
            return Err(Error::GroupSize {
                expected: format!("{:?}", self.permitted_sizes.as_ref().unwrap()),
                got: size,
            });
        }
        self.values.insert(mask, value);
        Ok(())
    }

    pub fn value(&self, group: &[AgentId]) -> Result<Option<f64>> {
        Ok(self.values.get(&self.mask_of(group)?).copied())
    }

    pub fn value_by_mask(&self, mask: u128) -> Option<f64> {
        self.values.get(&mask).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (u128, f64)> + '_ {
        self.values.iter().map(|(&m, &v)| (m, v))
    }

    pub fn group_of_mask(&self, mask: u128) -> Vec<AgentId> {
        (0..self.n())
            .filter(|&i| mask & (1u128 << i) != 0)
            .map(|i| self.agents[i].clone())
            .collect()
    }

    /// Count of missing values over the exact-computation domain, with a
    /// per-size breakdown for diagnostics.
    pub fn missing_values(&self) -> (usize, String) {
        let n = self.n();
        let mut per_size: Vec<usize> = vec![0; n + 1];
        let mut missing = 0usize;
        match &self.permitted_sizes {
            None => {
                // Only feasible for small n; exact ops check the limit first.
                for mask in 0u128..(1u128 << n) {
                    if !self.values.contains_key(&mask) {
                        missing += 1;
                        per_size[mask.count_ones() as usize] += 1;
                    }
                }
            }
            Some(sizes) => {
                for &m in sizes {
                    if m > n {
                        continue;
                    }
                    for combo in (0..n).combinations(m) {
                        let mask = combo.iter().fold(0u128, |acc, &i| acc | (1u128 << i));
                        if !self.values.contains_key(&mask) {
                            missing += 1;
                            per_size[m] += 1;
                        }
                    }
                }
            }
        }
        let detail = if missing == 0 {
            String::new()
        } else {
            let parts: Vec<String> = per_size
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(s, c)| format!("size {s}: {c}"))
                .collect();
            format!(" ({})", parts.join(", "))
        };
        (missing, detail)
    }

    fn ensure_complete(&self) -> Result<()> {
        let (missing, detail) = self.missing_values();
        if missing > 0 {
            return Err(Error::IncompleteGame { missing, detail });
        }
        Ok(())
    }

    pub fn grand_value(&self) -> Result<f64> {
        let n = self.n();
        let mask = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
        self.values
            .get(&mask)
            .copied()
            .ok_or_else(|| Error::IncompleteGame {
                missing: 1,
                detail: format!(" (size {n}: 1)"),
            })
    }

    /// Member-wise sum game; both games must share agents and constraints.
    pub fn sum(&self, other: &CharacteristicGame) -> Result<CharacteristicGame> {
        if self.agents != other.agents || self.permitted_sizes != other.permitted_sizes {
            return Err(Error::NoData(
                "sum game requires identical agents and permitted sizes".into(),
            ));
        }
        let mut out = self.clone();
        for (mask, v) in &mut out.values {
            let o = other.values.get(mask).ok_or(Error::IncompleteGame {
                missing: 1,
                detail: format!(" (size {}: 1)", mask.count_ones()),
            })?;
            *v += o;
        }
        Ok(out)
    }
}

fn check_limit(n: usize, limit: usize) -> Result<()> {
    if limit > MAX_EXACT_LIMIT {
        return Err(Error::InvalidParam(format!(
            "exact limit {limit} exceeds the supported maximum {MAX_EXACT_LIMIT}"
        )));
    }
    if n > limit {
        return Err(Error::ExactLimit { n, limit });
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Dense value table for mask-indexed sweeps. Requires completeness.
fn dense_values(game: &CharacteristicGame) -> Result<Vec<f64>> {
    game.ensure_complete()?;
    let n = game.n();
    let mut v = vec![0.0; 1 << n];
    for (mask, val) in game.entries() {
        v[mask as usize] = val;
    }
    Ok(v)
}

fn require_unconstrained(game: &CharacteristicGame) -> Result<()> {
    if game.is_constrained() {
        return Err(Error::NoData(
            "operation requires an unconstrained game; use the constrained variant".into(),
        ));
    }
    Ok(())
}

/// Shapley credits: each agent's marginal contribution averaged over all
/// insertion positions. Sum equals the grand value.
pub fn shapley_exact(game: &CharacteristicGame) -> Result<CreditVector> {
    shapley_exact_limited(game, DEFAULT_EXACT_LIMIT)
}

pub fn shapley_exact_limited(game: &CharacteristicGame, limit: usize) -> Result<CreditVector> {
    require_unconstrained(game)?;
    let n = game.n();
    if n == 0 {
        return Err(Error::UndefinedTransform(0));
    }
    check_limit(n, limit)?;
    let v = dense_values(game)?;
    let nf = factorial(n);
    // weight[s] applies to a coalition of size s not containing the agent
    let w: Vec<f64> = (0..n)
        .map(|s| factorial(s) * factorial(n - 1 - s) / nf)
        .collect();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for mask in 0..v.len() {
            if mask & bit == 0 {
                acc += w[(mask as u32).count_ones() as usize] * (v[mask | bit] - v[mask]);
            }
        }
        out[i] = acc;
    }
    Ok(CreditVector::new(CreditKind::Shapley, game.agents().to_vec(), out))
}

/// Exchange credits: the expected score change when the agent replaces a
/// uniformly random member of a uniformly random non-empty proper coalition
/// drawn without the agent. Sums to zero across agents.
pub fn exchange_exact(game: &CharacteristicGame) -> Result<CreditVector> {
    exchange_exact_limited(game, DEFAULT_EXACT_LIMIT)
}

pub fn exchange_exact_limited(game: &CharacteristicGame, limit: usize) -> Result<CreditVector> {
    require_unconstrained(game)?;
    let n = game.n();
    if n < 2 {
        return Err(Error::UndefinedTransform(n));
    }
    check_limit(n, limit)?;
    let v = dense_values(game)?;
    let norm = factorial(n - 1) * (n - 1) as f64;
    // weight[s] for coalitions C of size s drawn from the other n-1 agents
    let w: Vec<f64> = (0..n)
        .map(|s| factorial(s) * factorial(n - 1 - s) / norm)
        .collect();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for mask in 0..v.len() {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            // entering coalitions of size s+1 <= n-1; v(N) never contributes
            if s <= n - 2 {
                acc += w[s] * v[mask | bit];
            }
            // displaced coalitions are the non-empty ones
            if s >= 1 {
                acc -= w[s] * v[mask];
            }
        }
        out[i] = acc;
    }
    Ok(CreditVector::new(CreditKind::Exchange, game.agents().to_vec(), out))
}

/// Affine bridge from Shapley to exchange credits:
/// ev_i = n/(n-1) * (sv_i - grand/n).
pub fn sv_to_ev(sv: &CreditVector, grand_value: f64, n: usize) -> Result<CreditVector> {
    if n < 2 {
        return Err(Error::UndefinedTransform(n));
    }
    if sv.values().len() != n {
        return Err(Error::InvalidParam(format!(
            "credit vector has {} entries, expected {n}",
            sv.values().len()
        )));
    }
    let scale = n as f64 / (n - 1) as f64;
    let shift = grand_value / n as f64;
    let values = sv.values().iter().map(|&s| scale * (s - shift)).collect();
    Ok(CreditVector::new(CreditKind::Exchange, sv.agents().to_vec(), values))
}

/// Constrained exchange credits over the feasible sizes of the game.
///
/// For each feasible size m the credit contribution is the mean value of
/// size-m groups containing the agent minus the mean value of size-m groups
/// excluding it; contributions average uniformly over feasible sizes. With
/// all sizes 1..=n-1 feasible this equals [`exchange_exact`].
pub fn exchange_constrained_exact(game: &CharacteristicGame) -> Result<CreditVector> {
    exchange_constrained_exact_limited(game, DEFAULT_EXACT_LIMIT)
}

pub fn exchange_constrained_exact_limited(
    game: &CharacteristicGame,
    limit: usize,
) -> Result<CreditVector> {
    let n = game.n();
    if n < 2 {
        return Err(Error::UndefinedTransform(n));
    }
    check_limit(n, limit)?;
    let sizes = game.feasible_sizes();
    if sizes.is_empty() {
        return Err(Error::NoFeasibleSize);
    }
    let mut missing = 0usize;
    let mut per_size: Vec<(usize, usize)> = Vec::new();
    let mut terms = vec![vec![]; n];
    for &m in &sizes {
        let mut total = 0.0;
        let mut with_agent = vec![0.0; n];
        let mut size_missing = 0usize;
        for combo in (0..n).combinations(m) {
            let mask = combo.iter().fold(0u128, |acc, &i| acc | (1u128 << i));
            match game.value_by_mask(mask) {
                Some(v) => {
                    total += v;
                    for &i in &combo {
                        with_agent[i] += v;
                    }
                }
                None => size_missing += 1,
            }
        }
        if size_missing > 0 {
            missing += size_missing;
            per_size.push((m, size_missing));
            continue;
        }
        let n_with = binomial(n - 1, m - 1);
        let n_without = binomial(n - 1, m);
        for i in 0..n {
            let mean_with = with_agent[i] / n_with;
            // all size-m groups exclude agent i when m = n is infeasible here
            let mean_without = (total - with_agent[i]) / n_without;
            terms[i].push(mean_with - mean_without);
        }
    }
    if missing > 0 {
        let detail = per_size
            .iter()
            .map(|(s, c)| format!("size {s}: {c}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::IncompleteGame {
            missing,
            detail: format!(" ({detail})"),
        });
    }
    let count = sizes.len() as f64;
    let values: Vec<f64> = terms
        .into_iter()
        .map(|t| t.into_iter().sum::<f64>() / count)
        .collect();
    Ok(CreditVector::new(
        CreditKind::ConstrainedExchange,
        game.agents().to_vec(),
        values,
    ))
}

/// Diagnostic produced by [`check_axioms`].
#[derive(Debug, Clone)]
pub struct AxiomReport {
    /// |sum of exchange credits|; zero in exact arithmetic.
    pub zero_sum_residual: f64,
    /// |sum of Shapley credits - grand value|.
    pub efficiency_residual: f64,
    /// Agent pairs whose columns in the value table coincide.
    pub symmetric_pairs: Vec<(AgentId, AgentId)>,
    /// Largest |ev_i - ev_j| over the detected symmetric pairs.
    pub max_symmetry_residual: f64,
    /// Agents whose marginal contribution is identically zero.
    pub dummies: Vec<AgentId>,
    /// Largest |ev_i + grand/(n-1)| over detected dummies.
    pub max_dummy_residual: f64,
    /// Largest per-agent |ev(a+b) - ev(a) - ev(b)|; `None` without a partner.
    pub linearity_residual: Option<f64>,
}

impl AxiomReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.zero_sum_residual <= tol
            && self.efficiency_residual <= tol
            && self.max_symmetry_residual <= tol
            && self.max_dummy_residual <= tol
            && self.linearity_residual.map_or(true, |r| r <= tol)
    }
}

/// Checks the exchange-credit axioms on a complete unconstrained game.
///
/// Symmetry and dummy detection compare table values bitwise, so they find
/// agents constructed to be interchangeable or inert rather than agents that
/// merely come close. Linearity needs a second game over the same agents.
pub fn check_axioms(
    game: &CharacteristicGame,
    linearity_partner: Option<&CharacteristicGame>,
) -> Result<AxiomReport> {
    require_unconstrained(game)?;
    let n = game.n();
    if n < 2 {
        return Err(Error::UndefinedTransform(n));
    }
    check_limit(n, DEFAULT_EXACT_LIMIT)?;
    let v = dense_values(game)?;
    let ev = exchange_exact(game)?;
    let sv = shapley_exact(game)?;
    let grand = game.grand_value()?;

    let mut symmetric_pairs = Vec::new();
    let mut max_symmetry_residual = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let bi = 1usize << i;
            let bj = 1usize << j;
            let symmetric = (0..v.len())
                .filter(|m| m & bi == 0 && m & bj == 0)
                .all(|m| v[m | bi] == v[m | bj]);
            if symmetric {
                max_symmetry_residual =
                    max_symmetry_residual.max((ev.values()[i] - ev.values()[j]).abs());
                symmetric_pairs.push((game.agents()[i].clone(), game.agents()[j].clone()));
            }
        }
    }

    let mut dummies = Vec::new();
    let mut max_dummy_residual = 0.0f64;
    let dummy_ev = -grand / (n - 1) as f64;
    for i in 0..n {
        let bi = 1usize << i;
        let inert = (0..v.len())
            .filter(|m| m & bi == 0)
            .all(|m| v[m | bi] == v[m]);
        if inert {
            max_dummy_residual = max_dummy_residual.max((ev.values()[i] - dummy_ev).abs());
            dummies.push(game.agents()[i].clone());
        }
    }

    let linearity_residual = match linearity_partner {
        None => None,
        Some(other) => {
            let sum = game.sum(other)?;
            let ev_sum = exchange_exact(&sum)?;
            let ev_other = exchange_exact(other)?;
            Some(
                (0..n)
                    .map(|i| {
                        (ev_sum.values()[i] - ev.values()[i] - ev_other.values()[i]).abs()
                    })
                    .fold(0.0f64, f64::max),
            )
        }
    };

    Ok(AxiomReport {
        zero_sum_residual: ev.sum().abs(),
        efficiency_residual: (sv.sum() - grand).abs(),
        symmetric_pairs,
        max_symmetry_residual,
        dummies,
        max_dummy_residual,
        linearity_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::TOLERANCE;
    use rand::Rng;

    pub(crate) fn ids(names: &[&str]) -> Vec<AgentId> {
        names.iter().map(|s| AgentId::new(*s).unwrap()).collect()
    }

    /// Complete random unconstrained game with values in [-range, range].
    pub(crate) fn random_game(n: usize, seed: u64, range: f64) -> CharacteristicGame {
        let agents: Vec<AgentId> = (0..n)
            .map(|i| AgentId::new(format!("a{i}")).unwrap())
            .collect();
        let mut g = CharacteristicGame::unconstrained(agents.clone()).unwrap();
        let mut rng = crate::seeding::rng(seed);
        for mask in 1u128..(1u128 << n) {
            let group = g.group_of_mask(mask);
            g.set_value(&group, rng.random_range(-range..range)).unwrap();
        }
        g
    }

    fn two_agent_example() -> CharacteristicGame {
        let a = ids(&["1", "2"]);
        let mut g = CharacteristicGame::unconstrained(a.clone()).unwrap();
        g.set_value(&a[..1], 2.0).unwrap();
        g.set_value(&a[1..], 4.0).unwrap();
        g.set_value(&a, 10.0).unwrap();
        g
    }

    #[test]
    fn worked_two_agent_example() {
        let g = two_agent_example();
        let sv = shapley_exact(&g).unwrap();
        assert!((sv.values()[0] - 4.0).abs() < TOLERANCE);
        assert!((sv.values()[1] - 6.0).abs() < TOLERANCE);
        let ev = exchange_exact(&g).unwrap();
        assert!((ev.values()[0] - -2.0).abs() < TOLERANCE);
        assert!((ev.values()[1] - 2.0).abs() < TOLERANCE);
    }

    #[test]
    fn single_agent_shapley_takes_grand_value() {
        let a = ids(&["solo"]);
        let mut g = CharacteristicGame::unconstrained(a.clone()).unwrap();
        g.set_value(&a, 7.0).unwrap();
        let sv = shapley_exact(&g).unwrap();
        assert_eq!(sv.values(), &[7.0]);
        assert!(matches!(
            exchange_exact(&g),
            Err(Error::UndefinedTransform(1))
        ));
    }

    #[test]
    fn shapley_matches_permutation_enumeration() {
        for seed in 0..5 {
            let g = random_game(4, seed, 10.0);
            let fast = shapley_exact(&g).unwrap();
            let slow = oracle::shapley_by_permutations(&g).unwrap();
            for (f, s) in fast.values().iter().zip(&slow) {
                assert!((f - s).abs() < TOLERANCE);
            }
        }
    }

    #[test]
    fn exchange_matches_permutation_enumeration() {
        for seed in 0..5 {
            let g = random_game(5, seed + 100, 10.0);
            let fast = exchange_exact(&g).unwrap();
            let slow = oracle::exchange_by_permutations(&g).unwrap();
            for (f, s) in fast.values().iter().zip(&slow) {
                assert!((f - s).abs() < TOLERANCE);
            }
        }
    }

    #[test]
    fn exchange_is_affine_in_shapley() {
        for seed in 0..10 {
            let g = random_game(5, seed + 200, 50.0);
            let ev = exchange_exact(&g).unwrap();
            let sv = shapley_exact(&g).unwrap();
            let bridged = sv_to_ev(&sv, g.grand_value().unwrap(), g.n()).unwrap();
            for (a, b) in ev.values().iter().zip(bridged.values()) {
                assert!((a - b).abs() < TOLERANCE);
            }
        }
    }

    #[test]
    fn interchangeable_agents_share_credit() {
        // v(C) = |C|: every agent symmetric, exchange credits all zero.
        let n = 5;
        let g = {
            let agents: Vec<AgentId> =
                (0..n).map(|i| AgentId::new(format!("a{i}")).unwrap()).collect();
            let mut g = CharacteristicGame::unconstrained(agents).unwrap();
            for mask in 1u128..(1u128 << n) {
                let group = g.group_of_mask(mask);
                let len = group.len() as f64;
                g.set_value(&group, len).unwrap();
            }
            g
        };
        let ev = exchange_exact(&g).unwrap();
        for v in ev.values() {
            assert!(v.abs() < TOLERANCE);
        }
    }

    #[test]
    fn constrained_pair_example() {
        let a = ids(&["1", "2", "3"]);
        let mut g =
            CharacteristicGame::constrained(a.clone(), [2usize].into_iter().collect()).unwrap();
        g.set_value(&[a[0].clone(), a[1].clone()], 10.0).unwrap();
        g.set_value(&[a[0].clone(), a[2].clone()], 6.0).unwrap();
        g.set_value(&[a[1].clone(), a[2].clone()], 4.0).unwrap();
        let ev = exchange_constrained_exact(&g).unwrap();
        let expect = [4.0, 1.0, -5.0];
        for (v, e) in ev.values().iter().zip(expect) {
            assert!((v - e).abs() < TOLERANCE);
        }
        assert!(ev.sum().abs() < TOLERANCE);
    }

    #[test]
    fn constrained_matches_permutation_definition_for_all_size_sets() {
        for n in 2..=5usize {
            let full = random_game(n, 31 + n as u64, 10.0);
            // every non-empty subset of feasible sizes
            let all_sizes: Vec<usize> = (1..n).collect();
            for bits in 1u32..(1 << all_sizes.len()) {
                let sizes: BTreeSet<usize> = all_sizes
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| bits & (1 << i) != 0)
                    .map(|(_, &s)| s)
                    .collect();
                let mut g =
                    CharacteristicGame::constrained(full.agents().to_vec(), sizes.clone())
                        .unwrap();
                for (mask, v) in full.entries() {
                    if sizes.contains(&(mask.count_ones() as usize)) {
                        let group = full.group_of_mask(mask);
                        g.set_value(&group, v).unwrap();
                    }
                }
                let fast = exchange_constrained_exact(&g).unwrap();
                let slow = oracle::constrained_exchange_by_permutations(&g).unwrap();
                for (f, s) in fast.values().iter().zip(&slow) {
                    assert!((f - s).abs() < TOLERANCE, "n={n} sizes={sizes:?}");
                }
                assert!(fast.sum().abs() < TOLERANCE);
            }
        }
    }

    #[test]
    fn constrained_with_all_sizes_equals_unconstrained_exchange() {
        let g = random_game(6, 77, 20.0);
        let ev = exchange_exact(&g).unwrap();
        let con = exchange_constrained_exact(&g).unwrap();
        for (a, b) in ev.values().iter().zip(con.values()) {
            assert!((a - b).abs() < TOLERANCE);
        }
    }

    #[test]
    fn axiom_report_on_engineered_game() {
        // agents: two interchangeable contributors, one inert agent
        let a = ids(&["x", "y", "zero"]);
        let mut g = CharacteristicGame::unconstrained(a.clone()).unwrap();
        let worth = |mask: u128| -> f64 {
            let mut w = 0.0;
            if mask & 1 != 0 {
                w += 3.0;
            }
            if mask & 2 != 0 {
                w += 3.0;
            }
            if mask == 3 || mask == 7 {
                w += 2.0; // x and y together unlock a bonus; zero adds nothing
            }
            w
        };
        for mask in 1u128..8 {
            let group = g.group_of_mask(mask);
            g.set_value(&group, worth(mask)).unwrap();
        }
        // linearity partner must share the agent set
        let mut partner = CharacteristicGame::unconstrained(a.clone()).unwrap();
        let mut rng = crate::seeding::rng(9);
        for mask in 1u128..8 {
            let group = partner.group_of_mask(mask);
            let v: f64 = rng.random_range(-5.0..5.0);
            partner.set_value(&group, v).unwrap();
        }
        let report = check_axioms(&g, Some(&partner)).unwrap();
        assert!(report.passes(TOLERANCE));
        assert_eq!(report.symmetric_pairs.len(), 1);
        assert_eq!(report.dummies, vec![a[2].clone()]);
        let ev = exchange_exact(&g).unwrap();
        let grand = g.grand_value().unwrap();
        assert!((ev.get(&a[2]).unwrap() - (-grand / 2.0)).abs() < TOLERANCE);
    }

    #[test]
    fn incomplete_game_is_refused_with_counts() {
        let a = ids(&["1", "2"]);
        let mut g = CharacteristicGame::unconstrained(a.clone()).unwrap();
        g.set_value(&a[..1], 2.0).unwrap();
        match shapley_exact(&g) {
            Err(Error::IncompleteGame { missing, .. }) => assert_eq!(missing, 2),
            other => panic!("expected incomplete-game error, got {other:?}"),
        }
    }

    #[test]
    fn oversized_game_is_refused() {
        let agents: Vec<AgentId> =
            (0..13).map(|i| AgentId::new(format!("a{i}")).unwrap()).collect();
        let g = CharacteristicGame::unconstrained(agents).unwrap();
        assert!(matches!(
            shapley_exact(&g),
            Err(Error::ExactLimit { n: 13, limit: 12 })
        ));
    }

    #[test]
    fn empty_group_value_must_be_zero() {
        let a = ids(&["1", "2"]);
        let mut g = CharacteristicGame::unconstrained(a).unwrap();
        assert!(matches!(
            g.set_value(&[], 1.0),
            Err(Error::NonzeroEmptyValue(_))
        ));
        g.set_value(&[], 0.0).unwrap();
    }

    #[test]
    fn no_feasible_size_is_reported() {
        let a = ids(&["1", "2", "3"]);
        let mut g =
            CharacteristicGame::constrained(a.clone(), [3usize].into_iter().collect()).unwrap();
        g.set_value(&a, 5.0).unwrap();
        assert!(matches!(
            exchange_constrained_exact(&g),
            Err(Error::NoFeasibleSize)
        ));
    }

    #[test]
    fn ranking_is_preserved_across_the_bridge() {
        for seed in 0..10 {
            let g = random_game(6, seed + 400, 30.0);
            let sv = shapley_exact(&g).unwrap();
            let ev = exchange_exact(&g).unwrap();
            assert_eq!(sv.ranking(), ev.ranking());
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn exchange_credits_sum_to_zero(n in 2usize..7, seed in 0u64..1000) {
            let g = random_game(n, seed, 100.0);
            let ev = exchange_exact(&g).unwrap();
            proptest::prop_assert!(ev.sum().abs() < 1e-8);
        }

        #[test]
        fn shapley_credits_are_efficient(n in 1usize..7, seed in 0u64..1000) {
            let g = random_game(n, seed, 100.0);
            let sv = shapley_exact(&g).unwrap();
            proptest::prop_assert!((sv.sum() - g.grand_value().unwrap()).abs() < 1e-8);
        }

        #[test]
        fn bridge_matches_direct_computation(n in 2usize..7, seed in 0u64..1000) {
            let g = random_game(n, seed, 100.0);
            let ev = exchange_exact(&g).unwrap();
            let sv = shapley_exact(&g).unwrap();
            let bridged = sv_to_ev(&sv, g.grand_value().unwrap(), n).unwrap();
            for (a, b) in ev.values().iter().zip(bridged.values()) {
                proptest::prop_assert!((a - b).abs() < 1e-8);
            }
        }
    }
}
