//! `gen`: roll out commons groups from the archetype roster and write the
//! dataset (observations, per-episode trajectories, and the identity map
//! when anonymizing).

use clap::Args;
use evkit_core::toc::{generate_dataset, standard_pool, Dvf, GenMode};
use evkit_core::{io, seeding, Error, Result};

use crate::{Ctx, SimArgs};

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Roster size; a multiple of 12 (the archetype grid replicated).
    #[arg(long)]
    pub agents: Option<usize>,

    /// Value function used to score each group.
    #[arg(long, value_name = "DVF")]
    pub dvf: Option<Dvf>,

    /// Enumerate every group of the configured size once.
    #[arg(long, conflicts_with = "groups")]
    pub complete: bool,

    /// Sample this many distinct groups instead of enumerating all.
    #[arg(long, value_name = "N")]
    pub groups: Option<usize>,

    /// Replace agent ids with one-time identifiers; the true mapping is
    /// written separately for evaluation only.
    #[arg(long)]
    pub anonymize: bool,

    #[command(flatten)]
    pub sim: SimArgs,
}

pub fn run(ctx: &Ctx, args: GenArgs) -> Result<()> {
    let cfg = ctx.settings.toc_config(&args.sim)?;
    let agents = ctx.settings.resolve(args.agents, "agents", 12)?;
    if agents == 0 || agents % 12 != 0 {
        return Err(Error::InvalidParam(format!(
            "roster size {agents} is not a multiple of the 12-agent archetype grid"
        )));
    }
    let dvf = ctx.settings.resolve(args.dvf, "dvf", Dvf::Final)?;
    let complete = args.complete || ctx.settings.get("complete")?.unwrap_or(false);
    let groups = match args.groups {
        Some(g) => Some(g),
        None => ctx.settings.get("groups")?,
    };
    let mode = match (complete, groups) {
        (true, _) => GenMode::Complete,
        (false, Some(n)) => GenMode::Sample { num_groups: n },
        (false, None) => {
            return Err(Error::InvalidParam(
                "gen needs either --complete or --groups <N>".into(),
            ))
        }
    };
    let anonymize = args.anonymize || ctx.settings.get("anonymize")?.unwrap_or(false);

    let pool = standard_pool(agents / 12);
    let dataset = generate_dataset(
        &pool,
        mode,
        &cfg,
        dvf,
        anonymize,
        seeding::derive(ctx.seed, "gen"),
    )?;
    io::save_dataset(&ctx.out, &dataset, "observations.txt")?;

    let scores: Vec<f64> = dataset
        .observations
        .observations()
        .iter()
        .map(|o| o.score())
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "wrote {} observations over {} agents to {} ({dvf}: min {min:.3} mean {mean:.3} max {max:.3})",
        dataset.observations.len(),
        dataset.observations.n_agents(),
        ctx.out.join("observations.txt").display(),
    );
    Ok(())
}
