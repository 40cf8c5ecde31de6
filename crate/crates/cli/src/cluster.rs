//! `cluster`: group agents so that clustered exchange values spread as much
//! as possible. Candidate starts come from behavior embeddings (k-means on
//! state-action statistics) and the best candidate seeds a restart
//! hill-climb over single-agent moves.

use clap::Args;
use evkit_core::embed::{embed_state_action, kmeans_cluster, select_by_ev_variance, EmbeddingConfig};
use evkit_core::estimate::{ev_cluster_search, ClusterAssignment, SearchConfig};
use evkit_core::toc::{state_actions, Discretizer};
use evkit_core::{io, seeding, AgentId, Error, Result};
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::{Ctx, SimArgs};

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Observation file to read (episodes referenced by it are loaded too).
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// Number of clusters.
    #[arg(long)]
    pub k: Option<usize>,

    /// Hill-climb restarts.
    #[arg(long)]
    pub restarts: Option<usize>,

    /// Weight of the disagreement penalty against the initial assignment.
    #[arg(long)]
    pub penalty_weight: Option<f64>,

    /// Start from "behavior" embeddings or a "random" assignment.
    #[arg(long, value_name = "MODE")]
    pub init: Option<String>,

    /// Number of seeded k-means candidates when starting from behavior.
    #[arg(long)]
    pub candidates: Option<usize>,

    #[command(flatten)]
    pub sim: SimArgs,
}

/// Builds one state-action record per (episode, seat); the embedder merges
/// records that share an agent.
fn behavior_records(
    dataset: &evkit_core::toc::Dataset,
    disc: &Discretizer,
) -> Result<Vec<(AgentId, Vec<(u32, u32)>)>> {
    if dataset.trajectories.is_empty() {
        return Err(Error::NoData(
            "dataset has no episodes; behavior initialization needs them".into(),
        ));
    }
    let mut records = Vec::new();
    for traj in &dataset.trajectories {
        for (seat, agent) in traj.participants.iter().enumerate() {
            records.push((agent.clone(), state_actions(traj, seat, disc)));
        }
    }
    Ok(records)
}

pub fn run(ctx: &Ctx, args: ClusterArgs) -> Result<()> {
    let cfg = ctx.settings.toc_config(&args.sim)?;
    let k = ctx
        .settings
        .resolve(args.k, "k", 0)?;
    if k == 0 {
        return Err(Error::InvalidParam("cluster needs --k <K>".into()));
    }
    let restarts = ctx.settings.resolve(args.restarts, "restarts", 500)?;
    let penalty_weight = ctx
        .settings
        .resolve(args.penalty_weight, "penalty-weight", 0.1)?;
    let init_mode = ctx
        .settings
        .resolve(args.init, "init", "behavior".to_string())?;
    let candidates = ctx.settings.resolve(args.candidates, "candidates", 8)?;

    let dataset = io::load_dataset(&args.data)?;
    let obs = &dataset.observations;

    let init: Option<(ClusterAssignment, f64)> = match init_mode.as_str() {
        "random" => None,
        "behavior" => {
            let disc = Discretizer::standard(&cfg);
            let records = behavior_records(&dataset, &disc)?;
            let batch = embed_state_action(
                &records,
                disc.n_actions(),
                &EmbeddingConfig::default(),
                seeding::derive(ctx.seed, "cluster-embed"),
            )?;
            if candidates == 0 {
                return Err(Error::InvalidParam("candidates must be at least 1".into()));
            }
            let cands: Vec<ClusterAssignment> = (0..candidates)
                .map(|c| {
                    kmeans_cluster(&batch, k, seeding::derive_indexed(ctx.seed, "cluster-kmeans", c as u64))
                })
                .collect::<Result<_>>()?;
            let (best, variance) = select_by_ev_variance(&cands, obs)?;
            Some((cands[best].clone(), variance))
        }
        other => {
            return Err(Error::InvalidParam(format!(
                "unknown init mode {other:?} (expected behavior or random)"
            )))
        }
    };

    let search_cfg = SearchConfig {
        restarts,
        penalty_weight,
        seed: seeding::derive(ctx.seed, "cluster-search"),
        ..SearchConfig::default()
    };
    let outcome = ev_cluster_search(obs, k, init.as_ref().map(|(a, _)| a), &search_cfg)?;

    let assign_path = ctx.out.join("assignment.csv");
    io::save_assignment(&assign_path, &outcome.assignment)?;

    let mut summary = String::new();
    writeln!(summary, "k={k}").unwrap();
    writeln!(summary, "restarts={restarts}").unwrap();
    writeln!(summary, "penalty-weight={penalty_weight}").unwrap();
    writeln!(summary, "init={init_mode}").unwrap();
    if let Some((_, var)) = &init {
        writeln!(summary, "init-ev-variance={var}").unwrap();
    }
    writeln!(summary, "objective={}", outcome.objective).unwrap();
    writeln!(summary, "best-restart={}", outcome.best_restart).unwrap();
    std::fs::write(ctx.out.join("cluster_summary.txt"), &summary)?;

    println!(
        "wrote {} (objective {}, restart {})",
        assign_path.display(),
        outcome.objective,
        outcome.best_restart
    );
    Ok(())
}
