//! Behavior embeddings and behavior-based clustering.
//!
//! Two embedding families: state-visit action profiles (per-state action
//! distributions over the most visited states, optionally projected to a
//! few principal components) and TF-IDF over action n-grams. Both produce
//! an [`EmbeddingBatch`] that k-means can cluster; such clusterings seed
//! the credit-variance partition search or stand alone as baselines.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::estimate::{clustered_variance, ClusterAssignment, ObservationSet};
use crate::seeding;

#[derive(Debug, Clone)]
pub struct EmbeddingConfig {
    /// Most-visited states kept in state-visit embeddings.
    pub top_states: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// Document-frequency bounds as fractions of the corpus.
    pub min_doc_freq: f64,
    pub max_doc_freq: f64,
    pub max_features: usize,
    /// Principal components for state-visit embeddings; `None` keeps the
    /// raw dimensions. N-gram embeddings are never reduced.
    pub reduce_to: Option<usize>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            top_states: 200,
            ngram_min: 1,
            ngram_max: 3,
            min_doc_freq: 0.05,
            max_doc_freq: 0.9,
            max_features: 100_000,
            reduce_to: Some(3),
        }
    }
}

impl EmbeddingConfig {
    fn validate(&self) -> Result<()> {
        if self.top_states == 0 {
            return Err(Error::InvalidParam("top_states must be at least 1".into()));
        }
        if self.ngram_min == 0 || self.ngram_max < self.ngram_min {
            return Err(Error::InvalidParam(format!(
                "n-gram range {}..={} is invalid",
                self.ngram_min, self.ngram_max
            )));
        }
        if !(0.0..=1.0).contains(&self.min_doc_freq)
            || !(0.0..=1.0).contains(&self.max_doc_freq)
            || self.min_doc_freq > self.max_doc_freq
        {
            return Err(Error::InvalidParam(format!(
                "document-frequency bounds [{}, {}] are invalid",
                self.min_doc_freq, self.max_doc_freq
            )));
        }
        if self.max_features == 0 {
            return Err(Error::InvalidParam("max_features must be at least 1".into()));
        }
        if self.reduce_to == Some(0) {
            return Err(Error::InvalidParam("reduce_to must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BehaviorEmbedding {
    pub agent: AgentId,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingBatch {
    pub feature_names: Vec<String>,
    pub embeddings: Vec<BehaviorEmbedding>,
}

impl EmbeddingBatch {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn get(&self, agent: &AgentId) -> Option<&[f64]> {
        self.embeddings
            .iter()
            .find(|e| &e.agent == agent)
            .map(|e| e.vector.as_slice())
    }
}

/// Embeds agents by their action distributions over the most visited
/// states.
///
/// Records are (state, action) pairs; entries sharing an agent id merge.
/// States rank by total visit count (ties to the lower state id) and the
/// top `top_states` survive. Each kept state contributes a block of
/// `n_actions` features holding the agent's action distribution there, or
/// zeros where the agent never visited. With `reduce_to` set the rows are
/// projected onto that many principal components.
pub fn embed_state_action(
    records: &[(AgentId, Vec<(u32, u32)>)],
    n_actions: usize,
    cfg: &EmbeddingConfig,
    seed: u64,
) -> Result<EmbeddingBatch> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::NoData("no behavior records to embed".into()));
    }
    if n_actions == 0 {
        return Err(Error::InvalidParam("n_actions must be at least 1".into()));
    }

    let mut agents: Vec<AgentId> = Vec::new();
    let mut agent_idx: HashMap<AgentId, usize> = HashMap::new();
    // per agent, per state, per action: visit counts
    let mut counts: Vec<BTreeMap<u32, Vec<u64>>> = Vec::new();
    let mut state_totals: BTreeMap<u32, u64> = BTreeMap::new();
    for (agent, pairs) in records {
        let ai = *agent_idx.entry(agent.clone()).or_insert_with(|| {
            agents.push(agent.clone());
            counts.push(BTreeMap::new());
            agents.len() - 1
        });
        for &(s, a) in pairs {
            if a as usize >= n_actions {
                return Err(Error::InvalidParam(format!(
                    "action bin {a} out of range for {n_actions} actions"
                )));
            }
            counts[ai].entry(s).or_insert_with(|| vec![0; n_actions])[a as usize] += 1;
            *state_totals.entry(s).or_default() += 1;
        }
    }

    let mut ranked: Vec<(u32, u64)> = state_totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(cfg.top_states);
    let kept: Vec<u32> = ranked.into_iter().map(|(s, _)| s).collect();

    let mut feature_names = Vec::with_capacity(kept.len() * n_actions);
    for &s in &kept {
        for a in 0..n_actions {
            feature_names.push(format!("s{s}_a{a}"));
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(agents.len());
    for ai in 0..agents.len() {
        let mut row = Vec::with_capacity(kept.len() * n_actions);
        for &s in &kept {
            match counts[ai].get(&s) {
                None => row.extend(std::iter::repeat(0.0).take(n_actions)),
                Some(c) => {
                    let total: u64 = c.iter().sum();
                    row.extend(c.iter().map(|&x| x as f64 / total as f64));
                }
            }
        }
        rows.push(row);
    }

    if let Some(d) = cfg.reduce_to {
        let (projected, d_eff) = pca_project(&rows, d, seed);
        let feature_names = (0..d_eff).map(|c| format!("pc{c}")).collect();
        let embeddings = agents
            .into_iter()
            .zip(projected)
            .map(|(agent, vector)| BehaviorEmbedding { agent, vector })
            .collect();
        return Ok(EmbeddingBatch {
            feature_names,
            embeddings,
        });
    }

    let embeddings = agents
        .into_iter()
        .zip(rows)
        .map(|(agent, vector)| BehaviorEmbedding { agent, vector })
        .collect();
    Ok(EmbeddingBatch {
        feature_names,
        embeddings,
    })
}

/// TF-IDF embedding over action-token n-grams.
///
/// One document per agent, built from that agent's episodes; n-grams never
/// span episode boundaries. Grams outside the document-frequency bounds are
/// dropped, the rest are capped at `max_features` by total count (ties
/// lexicographic), and rows are L2-normalized tf * idf with
/// idf = ln((1 + D) / (1 + df)) + 1.
pub fn embed_ngram(
    docs: &[(AgentId, Vec<Vec<String>>)],
    cfg: &EmbeddingConfig,
) -> Result<EmbeddingBatch> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::NoData("no documents to embed".into()));
    }
    {
        let mut seen = std::collections::HashSet::with_capacity(docs.len());
        for (a, _) in docs {
            if !seen.insert(a) {
                return Err(Error::DuplicateAgent(a.clone()));
            }
        }
    }
    for (_, episodes) in docs {
        for episode in episodes {
            for token in episode {
                if token.is_empty() || token.chars().any(char::is_whitespace) {
                    return Err(Error::InvalidParam(format!(
                        "token {token:?} is empty or contains whitespace"
                    )));
                }
            }
        }
    }

    let d_docs = docs.len();
    let mut per_doc: Vec<BTreeMap<String, u64>> = Vec::with_capacity(d_docs);
    for (_, episodes) in docs {
        let mut grams: BTreeMap<String, u64> = BTreeMap::new();
        for episode in episodes {
            for len in cfg.ngram_min..=cfg.ngram_max {
                if episode.len() < len {
                    continue;
                }
                for window in episode.windows(len) {
                    *grams.entry(window.join(" ")).or_default() += 1;
                }
            }
        }
        per_doc.push(grams);
    }

    let mut df: BTreeMap<&str, (u64, u64)> = BTreeMap::new(); // gram -> (doc freq, total count)
    for grams in &per_doc {
        for (g, &c) in grams {
            let e = df.entry(g).or_default();
            e.0 += 1;
            e.1 += c;
        }
    }
    let d = d_docs as f64;
    let mut surviving: Vec<(&str, u64, u64)> = df
        .into_iter()
        .filter(|(_, (docf, _))| {
            let frac = *docf as f64 / d;
            frac >= cfg.min_doc_freq && frac <= cfg.max_doc_freq
        })
        .map(|(g, (docf, total))| (g, docf, total))
        .collect();
    if surviving.len() > cfg.max_features {
        surviving.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(b.0)));
        surviving.truncate(cfg.max_features);
    }
    surviving.sort_by(|a, b| a.0.cmp(b.0));
    if surviving.is_empty() {
        return Err(Error::NoData(
            "no n-gram features survive the document-frequency bounds".into(),
        ));
    }

    let feature_names: Vec<String> = surviving.iter().map(|(g, _, _)| (*g).to_string()).collect();
    let idf: Vec<f64> = surviving
        .iter()
        .map(|(_, docf, _)| ((1.0 + d) / (1.0 + *docf as f64)).ln() + 1.0)
        .collect();
    let positions: HashMap<&str, usize> = surviving
        .iter()
        .enumerate()
        .map(|(i, (g, _, _))| (*g, i))
        .collect();

    let embeddings = docs
        .iter()
        .zip(&per_doc)
        .map(|((agent, _), grams)| {
            let mut vector = vec![0.0; feature_names.len()];
            for (g, &c) in grams {
                if let Some(&i) = positions.get(g.as_str()) {
                    vector[i] = c as f64 * idf[i];
                }
            }
            let norm: f64 = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in &mut vector {
                    *x /= norm;
                }
            }
            BehaviorEmbedding {
                agent: agent.clone(),
                vector,
            }
        })
        .collect();

    Ok(EmbeddingBatch {
        feature_names,
        embeddings,
    })
}

/// Power-iteration PCA: centers the rows and projects onto up to `d`
/// leading components. Returns the projected rows and the component count
/// actually extracted (rank can run out first).
fn pca_project(rows: &[Vec<f64>], d: usize, seed: u64) -> (Vec<Vec<f64>>, usize) {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    let d_eff = d.min(p).min(n);
    if d_eff == 0 {
        return (vec![Vec::new(); n], 0);
    }
    let mut x: Vec<Vec<f64>> = rows.to_vec();
    for j in 0..p {
        let mean: f64 = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        for r in &mut x {
            r[j] -= mean;
        }
    }

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(d_eff);
    for c in 0..d_eff {
        let mut rng = seeding::rng(seeding::derive_indexed(seed, "pca-component", c as u64));
        let mut v: Vec<f64> = (0..p).map(|_| rng.random::<f64>() - 0.5).collect();
        normalize(&mut v);
        let mut converged = false;
        for _ in 0..1000 {
            // w = X^T (X v), the covariance product without forming X^T X
            let u: Vec<f64> = x.iter().map(|r| dot(r, &v)).collect();
            let mut w = vec![0.0; p];
            for (r, &ui) in x.iter().zip(&u) {
                for (wj, &rj) in w.iter_mut().zip(r) {
                    *wj += ui * rj;
                }
            }
            for prev in &components {
                let proj = dot(&w, prev);
                for (wj, &pj) in w.iter_mut().zip(prev) {
                    *wj -= proj * pj;
                }
            }
            let norm = dot(&w, &w).sqrt();
            if norm < 1e-12 {
                break; // rank exhausted
            }
            for wj in &mut w {
                *wj /= norm;
            }
            let align = dot(&w, &v).abs();
            v = w;
            if (1.0 - align).abs() < 1e-8 {
                converged = true;
                break;
            }
        }
        if !converged && dot(&v, &v) < 0.5 {
            break;
        }
        components.push(v);
    }

    let extracted = components.len();
    let projected: Vec<Vec<f64>> = x
        .iter()
        .map(|r| components.iter().map(|comp| dot(r, comp)).collect())
        .collect();
    (projected, extracted)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    } else if let Some(first) = v.first_mut() {
        *first = 1.0;
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means over an embedding batch: greedy spread initialization,
/// then standard refinement. Ties assign to the lowest centroid index and
/// a cluster that empties keeps its previous centroid. Stops when the
/// assignment stabilizes or after 300 rounds.
pub fn kmeans_cluster(batch: &EmbeddingBatch, k: usize, seed: u64) -> Result<ClusterAssignment> {
    let n = batch.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let rows: Vec<&[f64]> = batch.embeddings.iter().map(|e| e.vector.as_slice()).collect();
    let mut rng = seeding::rng(seeding::derive(seed, "kmeans-init"));

    // spread initialization: next center drawn with probability proportional
    // to squared distance from the nearest chosen center
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(rows[rng.random_range(0..n)].to_vec());
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[idx].to_vec());
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centers.last().unwrap()));
        }
    }

    let mut assign = vec![0usize; n];
    for _ in 0..300 {
        let mut next = vec![0usize; n];
        for (i, r) in rows.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(r, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            next[i] = best;
        }
        let stable = next == assign;
        assign = next;
        if stable {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            for x in center.iter_mut() {
                *x = 0.0;
            }
            for &i in &members {
                for (xj, &rj) in center.iter_mut().zip(rows[i]) {
                    *xj += rj;
                }
            }
            for x in center.iter_mut() {
                *x /= members.len() as f64;
            }
        }
    }

    let agents: Vec<AgentId> = batch.embeddings.iter().map(|e| e.agent.clone()).collect();
    ClusterAssignment::new(agents, assign, k)
}

/// Picks the candidate assignment with the highest credit variance on the
/// observations. Candidates whose clusters cannot all be estimated are
/// skipped; ties keep the earliest candidate.
pub fn select_by_ev_variance(
    candidates: &[ClusterAssignment],
    obs: &ObservationSet,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        if let Some(var) = clustered_variance(obs, cand)? {
            if best.map_or(true, |(_, b)| var > b) {
                best = Some((i, var));
            }
        }
    }
    best.ok_or(Error::NoValidCandidate)
}
