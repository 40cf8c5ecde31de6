//! Slow reference implementations by direct enumeration.
//!
//! Everything here exists to cross-check the production paths in tests:
//! credits are computed straight from their permutation definitions, and the
//! partition objective is evaluated by exhaustive search over labeled
//! assignments. Costs are factorial or exponential; keep n small.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::estimate::ObservationSet;
use crate::game::CharacteristicGame;

fn mask_of(indices: &[usize]) -> u128 {
    indices.iter().fold(0u128, |acc, &i| acc | (1u128 << i))
}

fn value(game: &CharacteristicGame, mask: u128) -> Result<f64> {
    if mask == 0 {
        return Ok(0.0);
    }
    game.value_by_mask(mask).ok_or(Error::IncompleteGame {
        missing: 1,
        detail: format!(" (size {}: 1)", mask.count_ones()),
    })
}

/// Shapley credits averaged over every ordering of the full agent set.
pub fn shapley_by_permutations(game: &CharacteristicGame) -> Result<Vec<f64>> {
    let n = game.n();
    let mut sums = vec![0.0; n];
    let mut count = 0u64;
    for perm in (0..n).permutations(n) {
        let mut mask = 0u128;
        for &i in &perm {
            let before = value(game, mask)?;
            mask |= 1u128 << i;
            sums[i] += value(game, mask)? - before;
        }
        count += 1;
    }
    Ok(sums.into_iter().map(|s| s / count as f64).collect())
}

/// Exchange credits from the replacement definition: for every ordering of
/// the other agents and every slice length m in 1..=n-1, the agent's credit
/// is v(first m-1 others plus the agent) - v(first m others).
pub fn exchange_by_permutations(game: &CharacteristicGame) -> Result<Vec<f64>> {
    let n = game.n();
    if n < 2 {
        return Err(Error::UndefinedTransform(n));
    }
    let sizes: Vec<usize> = (1..n).collect();
    exchange_over_slices(game, &sizes)
}

/// Constrained exchange credits: identical to [`exchange_by_permutations`]
/// but with slice lengths restricted to the game's feasible sizes.
pub fn constrained_exchange_by_permutations(game: &CharacteristicGame) -> Result<Vec<f64>> {
    let n = game.n();
    if n < 2 {
        return Err(Error::UndefinedTransform(n));
    }
    let sizes: Vec<usize> = game.feasible_sizes().into_iter().collect();
    if sizes.is_empty() {
        return Err(Error::NoFeasibleSize);
    }
    exchange_over_slices(game, &sizes)
}

fn exchange_over_slices(game: &CharacteristicGame, sizes: &[usize]) -> Result<Vec<f64>> {
    let n = game.n();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let mut total = 0.0;
        let mut count = 0u64;
        for perm in others.iter().copied().permutations(others.len()) {
            for &m in sizes {
                let with_agent = mask_of(&perm[..m - 1]) | (1u128 << i);
                let without = mask_of(&perm[..m]);
                total += value(game, with_agent)? - value(game, without)?;
                count += 1;
            }
        }
        out[i] = total / count as f64;
    }
    Ok(out)
}

/// Relabels clusters by order of first appearance so that partitions equal
/// up to renaming compare equal.
pub fn canonical_partition(assignment: &[usize]) -> Vec<usize> {
    let mut relabel: Vec<Option<usize>> = vec![None; assignment.len() + 1];
    let mut next = 0usize;
    assignment
        .iter()
        .map(|&c| {
            *relabel[c].get_or_insert_with(|| {
                let l = next;
                next += 1;
                l
            })
        })
        .collect()
}

/// Grouped-observation objective recomputed from scratch.
///
/// Observations are collapsed to their cluster images (duplicate images
/// merge, scores averaged), credits are estimated per cluster by stratified
/// include/exclude means over the collapsed rows, and the result is the
/// population variance of per-agent cluster credits. `None` when any
/// non-empty cluster has no estimable stratum.
pub fn clustered_variance_naive(
    obs: &ObservationSet,
    assignment: &[usize],
    k: usize,
) -> Option<f64> {
    use std::collections::BTreeMap;
    let n = obs.n_agents();
    assert_eq!(assignment.len(), n);
    if k == 1 {
        return Some(0.0);
    }
    let mut rows: BTreeMap<Vec<usize>, (f64, f64)> = BTreeMap::new();
    for o in obs.observations() {
        let mut image: Vec<usize> = o.members().iter().map(|&a| assignment[a]).collect();
        image.sort_unstable();
        image.dedup();
        let e = rows.entry(image).or_insert((0.0, 0.0));
        e.0 += o.score();
        e.1 += 1.0;
    }
    let rows: Vec<(Vec<usize>, f64)> = rows
        .into_iter()
        .map(|(img, (sum, cnt))| (img, sum / cnt))
        .collect();

    let mut cluster_sizes = vec![0usize; k];
    for &c in assignment {
        cluster_sizes[c] += 1;
    }

    let mut credits = vec![0.0; k];
    for c in 0..k {
        if cluster_sizes[c] == 0 {
            continue;
        }
        let mut terms = Vec::new();
        let strata: std::collections::BTreeSet<usize> =
            rows.iter().map(|(img, _)| img.len()).collect();
        for m in strata {
            let with: Vec<f64> = rows
                .iter()
                .filter(|(img, _)| img.len() == m && img.contains(&c))
                .map(|(_, v)| *v)
                .collect();
            let without: Vec<f64> = rows
                .iter()
                .filter(|(img, _)| img.len() == m && !img.contains(&c))
                .map(|(_, v)| *v)
                .collect();
            if !with.is_empty() && !without.is_empty() {
                let mw = with.iter().sum::<f64>() / with.len() as f64;
                let mo = without.iter().sum::<f64>() / without.len() as f64;
                terms.push(mw - mo);
            }
        }
        if terms.is_empty() {
            return None;
        }
        credits[c] = terms.iter().sum::<f64>() / terms.len() as f64;
    }

    let nf = n as f64;
    let mean: f64 = (0..k).map(|c| cluster_sizes[c] as f64 * credits[c]).sum::<f64>() / nf;
    let sq: f64 = (0..k)
        .map(|c| cluster_sizes[c] as f64 * credits[c] * credits[c])
        .sum::<f64>()
        / nf;
    Some((sq - mean * mean).max(0.0))
}

/// Population variance of per-agent cluster centroids for one-dimensional
/// behavior points.
pub fn centroid_variance(points: &[f64], assignment: &[usize], k: usize) -> f64 {
    let n = points.len();
    assert_eq!(assignment.len(), n);
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        sums[c] += points[i];
        counts[c] += 1;
    }
    let nf = n as f64;
    let mut mean = 0.0;
    let mut sq = 0.0;
    for c in 0..k {
        if counts[c] == 0 {
            continue;
        }
        let centroid = sums[c] / counts[c] as f64;
        mean += counts[c] as f64 * centroid / nf;
        sq += counts[c] as f64 * centroid * centroid / nf;
    }
    (sq - mean * mean).max(0.0)
}

/// Visits every assignment of n agents to k labeled clusters with all
/// clusters non-empty.
pub fn for_each_surjective<F: FnMut(&[usize])>(n: usize, k: usize, mut f: F) {
    let mut assignment = vec![0usize; n];
    loop {
        let mut seen = vec![false; k];
        for &c in &assignment {
            seen[c] = true;
        }
        if seen.iter().all(|&s| s) {
            f(&assignment);
        }
        // odometer increment in base k
        let mut pos = 0;
        loop {
            if pos == n {
                return;
            }
            assignment[pos] += 1;
            if assignment[pos] < k {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

/// Exhaustive search over surjective k-partitions for the grouped-credit
/// variance objective. Returns the best assignment, its objective, and the
/// canonical forms of every assignment within `tie_tol` of the best.
pub fn exhaustive_partition_search(
    obs: &ObservationSet,
    k: usize,
    tie_tol: f64,
) -> Result<(Vec<usize>, f64, Vec<Vec<usize>>)> {
    let n = obs.n_agents();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut scored: Vec<(Vec<usize>, f64)> = Vec::new();
    for_each_surjective(n, k, |assignment| {
        if let Some(obj) = clustered_variance_naive(obs, assignment, k) {
            if best.as_ref().map_or(true, |(_, b)| obj > *b) {
                best = Some((assignment.to_vec(), obj));
            }
            scored.push((assignment.to_vec(), obj));
        }
    });
    let (best_assign, best_obj) = best.ok_or(Error::NoValidCandidate)?;
    let mut ties: Vec<Vec<usize>> = scored
        .into_iter()
        .filter(|(_, o)| (best_obj - o).abs() <= tie_tol)
        .map(|(a, _)| canonical_partition(&a))
        .collect();
    ties.sort();
    ties.dedup();
    Ok((best_assign, best_obj, ties))
}

/// Exhaustive search maximizing centroid variance over surjective
/// k-partitions of one-dimensional points.
pub fn exhaustive_centroid_search(
    points: &[f64],
    k: usize,
    tie_tol: f64,
) -> Result<(Vec<usize>, f64, Vec<Vec<usize>>)> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut scored: Vec<(Vec<usize>, f64)> = Vec::new();
    for_each_surjective(n, k, |assignment| {
        let obj = centroid_variance(points, assignment, k);
        if best.as_ref().map_or(true, |(_, b)| obj > *b) {
            best = Some((assignment.to_vec(), obj));
        }
        scored.push((assignment.to_vec(), obj));
    });
    let (best_assign, best_obj) = best.ok_or(Error::NoValidCandidate)?;
    let mut ties: Vec<Vec<usize>> = scored
        .into_iter()
        .filter(|(_, o)| (best_obj - o).abs() <= tie_tol)
        .map(|(a, _)| canonical_partition(&a))
        .collect();
    ties.sort();
    ties.dedup();
    Ok((best_assign, best_obj, ties))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_relabeling_is_first_appearance_order() {
        assert_eq!(canonical_partition(&[2, 2, 0, 1, 0]), vec![0, 0, 1, 2, 1]);
        assert_eq!(canonical_partition(&[0, 1, 2]), vec![0, 1, 2]);
    }

    #[test]
    fn surjective_enumeration_counts_match_stirling() {
        // k! * S(n, k) labeled surjections
        let mut count = 0usize;
        for_each_surjective(4, 2, |_| count += 1);
        assert_eq!(count, 14); // 2! * S(4,2) = 2 * 7
        count = 0;
        for_each_surjective(5, 3, |_| count += 1);
        assert_eq!(count, 150); // 3! * S(5,3) = 6 * 25
    }

    #[test]
    fn centroid_variance_of_separated_points() {
        let points = [0.0, 0.0, 10.0, 10.0];
        let split = [0, 0, 1, 1];
        let mixed = [0, 1, 0, 1];
        assert!(centroid_variance(&points, &split, 2) > centroid_variance(&points, &mixed, 2));
        assert!((centroid_variance(&points, &split, 2) - 25.0).abs() < 1e-12);
        assert!(centroid_variance(&points, &mixed, 2) < 1e-12);
    }
}
