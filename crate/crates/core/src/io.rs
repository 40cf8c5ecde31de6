//! Plain-text file formats.
//!
//! Every writer emits bytes deterministically: fixed field order, sorted or
//! insertion-ordered rows, and shortest round-trip float formatting. Game
//! tables and observation files are whitespace-separated key=value records;
//! reports, assignments, results, and identity maps are small CSVs; episode
//! files are one line per step.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::estimate::{ClusterAssignment, EvEntry, EvReport, ObservationSet};
use crate::game::CharacteristicGame;
use crate::imitate::TabularPolicy;
use crate::toc::{Dataset, Dvf, TocTrajectory};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(fs::File::create(path)?)
}

/// Content lines with their 1-based numbers; blanks and '#' comments skipped.
fn content_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((i + 1, trimmed.to_string()));
    }
    Ok(out)
}

/// Splits a record line into key=value fields at the first '=' per token.
fn fields(path: &Path, line_no: usize, line: &str) -> Result<Vec<(String, String)>> {
    line.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| {
                    parse_err(path, line_no, format!("expected key=value, got {tok:?}"))
                })
        })
        .collect()
}

fn lookup<'a>(
    fields: &'a [(String, String)],
    key: &str,
    path: &Path,
    line_no: usize,
) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| parse_err(path, line_no, format!("missing field {key}=")))
}

fn parse_f64(s: &str, path: &Path, line_no: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| parse_err(path, line_no, format!("invalid number {s:?}")))
}

fn parse_usize(s: &str, path: &Path, line_no: usize) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| parse_err(path, line_no, format!("invalid count {s:?}")))
}

fn parse_ids(s: &str, path: &Path, line_no: usize) -> Result<Vec<AgentId>> {
    s.split(',')
        .map(|t| AgentId::new(t).map_err(|e| parse_err(path, line_no, e.to_string())))
        .collect()
}

fn join_ids(ids: &[AgentId]) -> String {
    ids.iter()
        .map(AgentId::as_str)
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

// ---- game tables ----

pub fn save_game(path: impl AsRef<Path>, game: &CharacteristicGame) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    write!(out, "agents={}", join_ids(game.agents())).unwrap();
    if let Some(sizes) = game.permitted_sizes() {
        let s: Vec<String> = sizes.iter().map(usize::to_string).collect();
        write!(out, " sizes={}", s.join(",")).unwrap();
    }
    out.push('\n');
    let mut entries: Vec<(u128, f64)> = game.entries().collect();
    entries.sort_by_key(|&(mask, _)| (mask.count_ones(), mask));
    for (mask, value) in entries {
        if mask == 0 {
            continue;
        }
        let group = game.group_of_mask(mask);
        writeln!(out, "group={} value={}", join_ids(&group), value).unwrap();
    }
    create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_game(path: impl AsRef<Path>) -> Result<CharacteristicGame> {
    let path = path.as_ref();
    let lines = content_lines(path)?;
    let Some((head_no, head)) = lines.first() else {
        return Err(parse_err(path, 1, "empty game file"));
    };
    let head_fields = fields(path, *head_no, head)?;
    let agents = parse_ids(lookup(&head_fields, "agents", path, *head_no)?, path, *head_no)?;
    let sizes = head_fields.iter().find(|(k, _)| k == "sizes");
    let mut game = match sizes {
        None => CharacteristicGame::unconstrained(agents)?,
        Some((_, s)) => {
            let sizes = s
                .split(',')
                .map(|t| parse_usize(t, path, *head_no))
                .collect::<Result<_>>()?;
            CharacteristicGame::constrained(agents, sizes)?
        }
    };
    for (line_no, line) in &lines[1..] {
        let f = fields(path, *line_no, line)?;
        let group = parse_ids(lookup(&f, "group", path, *line_no)?, path, *line_no)?;
        let value = parse_f64(lookup(&f, "value", path, *line_no)?, path, *line_no)?;
        game.set_value(&group, value)
            .map_err(|e| parse_err(path, *line_no, e.to_string()))?;
    }
    Ok(game)
}

// ---- observations and episodes ----

/// Writes observation records; `traj_paths` supplies an optional episode
/// path per observation, stored relative to the observation file.
pub fn save_observations(
    path: impl AsRef<Path>,
    obs: &ObservationSet,
    traj_paths: &[Option<String>],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    write!(out, "agents={}", join_ids(obs.agents())).unwrap();
    if let Some(sizes) = obs.declared_sizes() {
        let s: Vec<String> = sizes.iter().map(usize::to_string).collect();
        write!(out, " sizes={}", s.join(",")).unwrap();
    }
    out.push('\n');
    for (i, o) in obs.observations().iter().enumerate() {
        let ids: Vec<AgentId> = o
            .members()
            .iter()
            .map(|&a| obs.agents()[a].clone())
            .collect();
        write!(out, "group={} score={}", join_ids(&ids), o.score()).unwrap();
        if let Some(Some(t)) = traj_paths.get(i) {
            write!(out, " traj={t}").unwrap();
        }
        out.push('\n');
    }
    create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

fn parse_observations(
    path: &Path,
) -> Result<(ObservationSet, Vec<Option<String>>)> {
    let lines = content_lines(path)?;
    let Some((head_no, head)) = lines.first() else {
        return Err(parse_err(path, 1, "empty observation file"));
    };
    let head_fields = fields(path, *head_no, head)?;
    let agents = parse_ids(lookup(&head_fields, "agents", path, *head_no)?, path, *head_no)?;
    let sizes = head_fields.iter().find(|(k, _)| k == "sizes");
    let mut obs = match sizes {
        None => ObservationSet::new(agents)?,
        Some((_, s)) => {
            let sizes = s
                .split(',')
                .map(|t| parse_usize(t, path, *head_no))
                .collect::<Result<_>>()?;
            ObservationSet::with_sizes(agents, sizes)?
        }
    };
    let mut traj = Vec::new();
    for (line_no, line) in &lines[1..] {
        let f = fields(path, *line_no, line)?;
        let group = parse_ids(lookup(&f, "group", path, *line_no)?, path, *line_no)?;
        let score = parse_f64(lookup(&f, "score", path, *line_no)?, path, *line_no)?;
        obs.push(&group, score)
            .map_err(|e| parse_err(path, *line_no, e.to_string()))?;
        traj.push(f.iter().find(|(k, _)| k == "traj").map(|(_, v)| v.clone()));
    }
    Ok((obs, traj))
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<ObservationSet> {
    Ok(parse_observations(path.as_ref())?.0)
}

pub fn save_trajectory(path: impl AsRef<Path>, traj: &TocTrajectory) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    writeln!(out, "participants={}", join_ids(&traj.participants)).unwrap();
    for (t, row) in traj.consumption.iter().enumerate() {
        write!(out, "{t} {}", traj.pool[t]).unwrap();
        for c in row {
            write!(out, " {c}").unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "{} {}", traj.horizon(), traj.pool[traj.horizon()]).unwrap();
    create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<TocTrajectory> {
    let path = path.as_ref();
    let lines = content_lines(path)?;
    let Some((head_no, head)) = lines.first() else {
        return Err(parse_err(path, 1, "empty episode file"));
    };
    let head_fields = fields(path, *head_no, head)?;
    let participants = parse_ids(
        lookup(&head_fields, "participants", path, *head_no)?,
        path,
        *head_no,
    )?;
    let m = participants.len();
    let mut pool = Vec::new();
    let mut consumption = Vec::new();
    let body = &lines[1..];
    for (row, (line_no, line)) in body.iter().enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let last = row + 1 == body.len();
        let expect = if last { 2 } else { 2 + m };
        if parts.len() != expect {
            return Err(parse_err(
                path,
                *line_no,
                format!("expected {expect} columns, got {}", parts.len()),
            ));
        }
        let t = parse_usize(parts[0], path, *line_no)?;
        if t != row {
            return Err(parse_err(path, *line_no, format!("expected step {row}, got {t}")));
        }
        pool.push(parse_f64(parts[1], path, *line_no)?);
        if !last {
            let row: Vec<f64> = parts[2..]
                .iter()
                .map(|p| parse_f64(p, path, *line_no))
                .collect::<Result<_>>()?;
            consumption.push(row);
        }
    }
    if pool.is_empty() {
        return Err(parse_err(path, *head_no, "episode has no steps"));
    }
    Ok(TocTrajectory {
        participants,
        pool,
        consumption,
    })
}

/// Writes a dataset under `dir`: the observation file, one episode file per
/// trajectory in `traj/`, and the identity map when present.
pub fn save_dataset(dir: impl AsRef<Path>, dataset: &Dataset, obs_name: &str) -> Result<()> {
    let dir = dir.as_ref();
    let mut rel_paths: Vec<Option<String>> = vec![None; dataset.observations.len()];
    for (i, o) in dataset.observations.observations().iter().enumerate() {
        if let Some(ti) = o.trajectory {
            rel_paths[i] = Some(format!("traj/ep{ti:06}.txt"));
        }
    }
    for (ti, traj) in dataset.trajectories.iter().enumerate() {
        save_trajectory(dir.join(format!("traj/ep{ti:06}.txt")), traj)?;
    }
    save_observations(dir.join(obs_name), &dataset.observations, &rel_paths)?;
    if let Some(truth) = &dataset.truth {
        save_truth(dir.join("truth.csv"), truth)?;
    }
    Ok(())
}

/// Loads an observation file and the episode files it references. Episode
/// paths resolve relative to the observation file; identical paths share
/// one loaded episode.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let (raw, traj_paths) = parse_observations(path)?;
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let mut loaded: BTreeMap<String, usize> = BTreeMap::new();
    let mut trajectories = Vec::new();
    let mut obs = match raw.declared_sizes() {
        Some(sizes) => ObservationSet::with_sizes(raw.agents().to_vec(), sizes.clone())?,
        None => ObservationSet::new(raw.agents().to_vec())?,
    };
    for (o, rel) in raw.observations().iter().zip(&traj_paths) {
        let ti = match rel {
            None => None,
            Some(rel) => Some(match loaded.get(rel) {
                Some(&ti) => ti,
                None => {
                    let traj = load_trajectory(base.join(rel))?;
                    trajectories.push(traj);
                    loaded.insert(rel.clone(), trajectories.len() - 1);
                    trajectories.len() - 1
                }
            }),
        };
        obs.push_indices(o.members().to_vec(), o.score(), ti)?;
    }
    Ok(Dataset {
        observations: obs,
        trajectories,
        truth: None,
    })
}

// ---- reports, assignments, results ----

pub fn save_ev_report(path: impl AsRef<Path>, report: &EvReport) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("agent,ev,n_incl,n_excl,stderr\n");
    for (agent, entry) in report.iter() {
        match entry {
            None => writeln!(out, "{agent},,0,0,").unwrap(),
            Some(e) => {
                let stderr = e.stderr.map(|s| s.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{agent},{},{},{},{stderr}",
                    e.estimate, e.included, e.excluded
                )
                .unwrap()
            }
        }
    }
    create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_ev_report(path: impl AsRef<Path>) -> Result<EvReport> {
    let path = path.as_ref();
    let lines = content_lines(path)?;
    let mut agents = Vec::new();
    let mut entries = Vec::new();
    for (line_no, line) in &lines {
        if line == "agent,ev,n_incl,n_excl,stderr" {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(parse_err(
                path,
                *line_no,
                format!("expected 5 columns, got {}", parts.len()),
            ));
        }
        agents.push(
            AgentId::new(parts[0]).map_err(|e| parse_err(path, *line_no, e.to_string()))?,
        );
        if parts[1].is_empty() {
            entries.push(None);
            continue;
        }
        let stderr = if parts[4].is_empty() {
            None
        } else {
            Some(parse_f64(parts[4], path, *line_no)?)
        };
        entries.push(Some(EvEntry {
            estimate: parse_f64(parts[1], path, *line_no)?,
            included: parse_usize(parts[2], path, *line_no)?,
            excluded: parse_usize(parts[3], path, *line_no)?,
            stderr,
        }));
    }
    Ok(EvReport::new(agents, entries))
}

pub fn save_assignment(path: impl AsRef<Path>, assignment: &ClusterAssignment) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("agent,cluster\n");
    for (agent, &cluster) in assignment.agents().iter().zip(assignment.clusters()) {
        writeln!(out, "{agent},{cluster}").unwrap();
    }
    create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Loads an assignment; k is the highest label plus one, so files written
/// by [`save_assignment`] round-trip whenever every cluster is populated.
pub fn load_assignment(path: impl AsRef<Path>) -> Result<ClusterAssignment> {
    let path = path.as_ref();
    let lines = content_lines(path)?;
    let mut agents = Vec::new();
    let mut clusters = Vec::new();
    for (line_no, line) in &lines {
        if line == "agent,cluster" {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(parse_err(
                path,
                *line_no,
                format!("expected 2 columns, got {}", parts.len()),
            ));
        }
        agents.push(
            AgentId::new(parts[0]).map_err(|e| parse_err(path, *line_no, e.to_string()))?,
        );
        clusters.push(parse_usize(parts[1], path, *line_no)?);
    }
    let k = clusters.iter().max().map_or(1, |&m| m + 1);
    ClusterAssignment::new(agents, clusters, k)
}

pub fn save_policy(path: impl AsRef<Path>, policy: &TabularPolicy) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    writeln!(out, "actions={}", join_f64(policy.action_values())).unwrap();
    for (state, dist) in policy.states() {
        writeln!(out, "state={state} probs={}", join_f64(dist)).unwrap();
    }
    writeln!(out, "fallback={}", join_f64(policy.fallback())).unwrap();
    create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<TabularPolicy> {
    let path = path.as_ref();
    let lines = content_lines(path)?;
    let mut actions: Option<Vec<f64>> = None;
    let mut fallback: Option<Vec<f64>> = None;
    let mut states: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let parse_vec = |s: &str, line_no: usize| -> Result<Vec<f64>> {
        s.split(',').map(|t| parse_f64(t, path, line_no)).collect()
    };
    for (line_no, line) in &lines {
        let f = fields(path, *line_no, line)?;
        if let Some((_, v)) = f.iter().find(|(k, _)| k == "actions") {
            actions = Some(parse_vec(v, *line_no)?);
        } else if let Some((_, v)) = f.iter().find(|(k, _)| k == "fallback") {
            fallback = Some(parse_vec(v, *line_no)?);
        } else {
            let state = parse_usize(lookup(&f, "state", path, *line_no)?, path, *line_no)?;
            let probs = parse_vec(lookup(&f, "probs", path, *line_no)?, *line_no)?;
            states.insert(state as u32, probs);
        }
    }
    let actions = actions.ok_or_else(|| parse_err(path, 1, "missing actions= line"))?;
    let fallback = fallback.ok_or_else(|| parse_err(path, 1, "missing fallback= line"))?;
    TabularPolicy::new(states, fallback, actions).map_err(|e| parse_err(path, 1, e.to_string()))
}

/// One evaluation result row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub method: String,
    pub dvf: Dvf,
    pub mean: f64,
    pub sd: f64,
    pub episodes: usize,
    pub seed: u64,
}

pub fn save_results(path: impl AsRef<Path>, rows: &[EvalRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("method,dvf,mean,sd,episodes,seed\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method, r.dvf, r.mean, r.sd, r.episodes, r.seed
        )
        .unwrap();
    }
    create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

pub fn save_truth(path: impl AsRef<Path>, pairs: &[(AgentId, AgentId)]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("anon,agent\n");
    for (public, original) in pairs {
        writeln!(out, "{public},{original}").unwrap();
    }
    create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<Vec<(AgentId, AgentId)>> {
    let path = path.as_ref();
    let lines = content_lines(path)?;
    let mut pairs = Vec::new();
    for (line_no, line) in &lines {
        if line == "anon,agent" {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(parse_err(
                path,
                *line_no,
                format!("expected 2 columns, got {}", parts.len()),
            ));
        }
        let a = AgentId::new(parts[0]).map_err(|e| parse_err(path, *line_no, e.to_string()))?;
        let b = AgentId::new(parts[1]).map_err(|e| parse_err(path, *line_no, e.to_string()))?;
        pairs.push((a, b));
    }
    Ok(pairs)
}

/// One sweep row of an estimation error study.
///
/// `fraction` is a regime label: a percentage such as "25%" for subsampled
/// runs, or "deg" / "deg-clustered" for the anonymized regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStudyRow {
    pub fraction: String,
    pub groups: usize,
    pub seeds: usize,
    pub mean_abs_error: f64,
}

pub fn save_error_study(path: impl AsRef<Path>, rows: &[ErrorStudyRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("fraction,groups,seeds,mean_abs_error\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.fraction, r.groups, r.seeds, r.mean_abs_error).unwrap();
    }
    create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Flat key=value configuration; later lines overwrite earlier ones.
pub fn load_config(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let mut map = BTreeMap::new();
    for (line_no, line) in content_lines(path)? {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, line_no, "expected key=value"))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::estimate_all;
    use crate::toc::{generate_dataset, standard_pool, GenMode, TocConfig};

    fn agent(name: &str) -> AgentId {
        AgentId::new(name).unwrap()
    }

    fn tempdir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "evkit-io-{}-{}",
            std::process::id(),
            name
        ));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn game_tables_round_trip() {
        let dir = tempdir("game");
        let agents = vec![agent("a"), agent("b"), agent("c")];
        let mut game =
            CharacteristicGame::constrained(agents.clone(), [1usize, 2].into_iter().collect())
                .unwrap();
        game.set_value(&agents[..1], 1.5).unwrap();
        game.set_value(&agents[1..2], -2.0).unwrap();
        game.set_value(&agents[..2], 0.1 + 0.2).unwrap();
        let path = dir.join("game.txt");
        save_game(&path, &game).unwrap();
        let loaded = load_game(&path).unwrap();
        assert_eq!(loaded.agents(), game.agents());
        assert_eq!(loaded.permitted_sizes(), game.permitted_sizes());
        assert_eq!(loaded.value(&agents[..2]).unwrap(), Some(0.1 + 0.2));
        // identical bytes on rewrite
        let first = fs::read(&path).unwrap();
        save_game(&path, &loaded).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn datasets_round_trip_through_files() {
        let dir = tempdir("dataset");
        let cfg = TocConfig {
            horizon: 4,
            ..TocConfig::default()
        };
        let ds = generate_dataset(
            &standard_pool(1),
            GenMode::Sample { num_groups: 10 },
            &cfg,
            crate::toc::Dvf::Total,
            false,
            3,
        )
        .unwrap();
        save_dataset(&dir, &ds, "observations.txt").unwrap();
        let loaded = load_dataset(dir.join("observations.txt")).unwrap();
        assert_eq!(loaded.observations.len(), 10);
        assert_eq!(loaded.trajectories.len(), 10);
        for (a, b) in ds
            .observations
            .observations()
            .iter()
            .zip(loaded.observations.observations())
        {
            assert_eq!(a.members(), b.members());
            assert_eq!(a.score(), b.score());
        }
        for (a, b) in ds.trajectories.iter().zip(&loaded.trajectories) {
            assert_eq!(a.participants, b.participants);
            assert_eq!(a.pool, b.pool);
            assert_eq!(a.consumption, b.consumption);
        }
        // estimates agree before and after the round trip
        let before = estimate_all(&ds.observations);
        let after = estimate_all(&loaded.observations);
        for (x, y) in before.entries().iter().zip(after.entries()) {
            assert_eq!(x, y);
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn reports_round_trip_including_undefined_fields() {
        let dir = tempdir("report");
        let report = EvReport::new(
            vec![agent("a"), agent("b")],
            vec![
                Some(EvEntry {
                    estimate: -1.25,
                    included: 3,
                    excluded: 7,
                    stderr: Some(0.5),
                }),
                None,
            ],
        );
        let path = dir.join("ev.csv");
        save_ev_report(&path, &report).unwrap();
        let loaded = load_ev_report(&path).unwrap();
        assert_eq!(loaded.agents(), report.agents());
        assert_eq!(loaded.entries(), report.entries());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn assignments_round_trip_when_surjective() {
        let dir = tempdir("assign");
        let assignment = ClusterAssignment::new(
            vec![agent("a"), agent("b"), agent("c")],
            vec![1, 0, 1],
            2,
        )
        .unwrap();
        let path = dir.join("clusters.csv");
        save_assignment(&path, &assignment).unwrap();
        let loaded = load_assignment(&path).unwrap();
        assert_eq!(loaded, assignment);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn policies_round_trip() {
        let dir = tempdir("policy");
        let mut states = BTreeMap::new();
        states.insert(0u32, vec![0.25, 0.75]);
        states.insert(9u32, vec![1.0, 0.0]);
        let policy = TabularPolicy::new(states, vec![0.5, 0.5], vec![0.0, 1.0]).unwrap();
        let path = dir.join("policy.txt");
        save_policy(&path, &policy).unwrap();
        assert_eq!(load_policy(&path).unwrap(), policy);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn parse_errors_carry_location() {
        let dir = tempdir("bad");
        let path = dir.join("game.txt");
        fs::write(&path, "agents=a,b\ngroup=a value=ok\n").unwrap();
        match load_game(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&path, "agents=a,b\ngroup=a,ghost value=1\n").unwrap();
        assert!(matches!(load_game(&path), Err(Error::Parse { .. })));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn config_files_are_flat_maps() {
        let dir = tempdir("config");
        let path = dir.join("run.conf");
        fs::write(&path, "# run settings\nseed=7\n\ngen.groups=40\nseed=8\n").unwrap();
        let map = load_config(&path).unwrap();
        assert_eq!(map.get("seed").map(String::as_str), Some("8"));
        assert_eq!(map.get("gen.groups").map(String::as_str), Some("40"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn results_and_truth_write_fixed_headers() {
        let dir = tempdir("results");
        let rows = vec![EvalRow {
            method: "bc".into(),
            dvf: Dvf::Final,
            mean: 10.5,
            sd: 0.25,
            episodes: 5,
            seed: 3,
        }];
        let path = dir.join("results.csv");
        save_results(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "method,dvf,mean,sd,episodes,seed\nbc,v_final,10.5,0.25,5,3\n");
        let truth = vec![(agent("anon0000"), agent("take_1"))];
        save_truth(dir.join("truth.csv"), &truth).unwrap();
        assert_eq!(load_truth(dir.join("truth.csv")).unwrap(), truth);
        fs::remove_dir_all(&dir).unwrap();
    }
}
