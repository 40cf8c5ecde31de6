//! `ev`: exchange values for a dataset, either exact from complete data,
//! estimated from raw observations, or shared across clusters.

use clap::Args;
use evkit_core::estimate::{clustered_ev, estimate_all, EvEntry, EvReport};
use evkit_core::game::exchange_constrained_exact;
use evkit_core::{io, Error, Result};
use std::path::PathBuf;

use crate::Ctx;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvMode {
    Exact,
    Estimate,
    Clustered,
}

impl std::str::FromStr for EvMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EvMode::Exact),
            "estimate" => Ok(EvMode::Estimate),
            "clustered" => Ok(EvMode::Clustered),
            other => Err(Error::InvalidParam(format!(
                "unknown ev mode {other:?} (expected exact, estimate, or clustered)"
            ))),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvArgs {
    /// Observation file to read.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// exact, estimate, or clustered.
    #[arg(long, value_name = "MODE")]
    pub mode: Option<EvMode>,

    /// Cluster assignment CSV (clustered mode).
    #[arg(long, value_name = "FILE")]
    pub assignment: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, args: EvArgs) -> Result<()> {
    let obs = io::load_observations(&args.data)?;
    let mode = ctx.settings.resolve(args.mode, "mode", EvMode::Estimate)?;

    let report = match mode {
        EvMode::Exact => {
            let game = obs.to_game()?;
            let credit = exchange_constrained_exact(&game)?;
            // side counts over distinct feasible groups, for the CSV columns
            let feasible = game.feasible_sizes();
            let entries: Vec<Option<EvEntry>> = (0..game.agents().len())
                .map(|i| {
                    let mut incl = 0usize;
                    let mut excl = 0usize;
                    for (mask, _) in game.entries() {
                        if !feasible.contains(&(mask.count_ones() as usize)) {
                            continue;
                        }
                        if mask & (1u128 << i) != 0 {
                            incl += 1;
                        } else {
                            excl += 1;
                        }
                    }
                    Some(EvEntry {
                        estimate: credit.values()[i],
                        included: incl,
                        excluded: excl,
                        stderr: None,
                    })
                })
                .collect();
            EvReport::new(game.agents().to_vec(), entries)
        }
        EvMode::Estimate => estimate_all(&obs),
        EvMode::Clustered => {
            let path = args
                .assignment
                .or(ctx.settings.get::<PathBuf>("assignment")?)
                .ok_or_else(|| {
                    Error::InvalidParam("clustered mode needs --assignment <FILE>".into())
                })?;
            let assignment = io::load_assignment(path)?;
            clustered_ev(&obs, &assignment)?
        }
    };

    let out_path = ctx.out.join("ev_report.csv");
    io::save_ev_report(&out_path, &report)?;
    let sum: f64 = report
        .iter()
        .filter_map(|(_, e)| e.map(|v| v.estimate))
        .sum();
    println!(
        "wrote {} ({} of {} agents estimable, ev sum {sum:.6})",
        out_path.display(),
        report.estimable_count(),
        report.agents().len(),
    );
    Ok(())
}
