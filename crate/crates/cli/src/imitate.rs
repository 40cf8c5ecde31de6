//! `imitate`: fit a tabular policy from dataset episodes. Admission is
//! either everyone (bc), episodes above a score percentile (group-bc), or
//! seats of agents whose exchange value clears a threshold (ev2bc).

use clap::Args;
use evkit_core::imitate::{fit_bc, fit_group_bc, select_agents, SelectionRule, ThresholdKind};
use evkit_core::toc::Discretizer;
use evkit_core::{io, Error, Result};
use std::path::PathBuf;

use crate::{Ctx, SimArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bc,
    GroupBc,
    Ev2bc,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bc" => Ok(Method::Bc),
            "group-bc" => Ok(Method::GroupBc),
            "ev2bc" => Ok(Method::Ev2bc),
            other => Err(Error::InvalidParam(format!(
                "unknown method {other:?} (expected bc, group-bc, or ev2bc)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Bc => "bc",
            Method::GroupBc => "group-bc",
            Method::Ev2bc => "ev2bc",
        })
    }
}

#[derive(Debug, Args)]
pub struct ImitateArgs {
    /// Observation file to read (episodes referenced by it are loaded too).
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// bc, group-bc, or ev2bc.
    #[arg(long)]
    pub method: Option<Method>,

    /// Exchange value report required by ev2bc.
    #[arg(long, value_name = "FILE")]
    pub ev_report: Option<PathBuf>,

    /// Admission percentile for group-bc and ev2bc.
    #[arg(long, conflicts_with = "absolute")]
    pub percentile: Option<f64>,

    /// Absolute exchange value cutoff for ev2bc (instead of a percentile).
    #[arg(long)]
    pub absolute: Option<f64>,

    #[command(flatten)]
    pub sim: SimArgs,
}

pub fn run(ctx: &Ctx, args: ImitateArgs) -> Result<()> {
    let cfg = ctx.settings.toc_config(&args.sim)?;
    let method = ctx.settings.resolve(args.method, "method", Method::Bc)?;
    let percentile = ctx.settings.resolve(args.percentile, "percentile", 90.0)?;

    let dataset = io::load_dataset(&args.data)?;
    let obs = &dataset.observations;
    let disc = Discretizer::standard(&cfg);

    let (policy, admitted) = match method {
        Method::Bc => (fit_bc(obs, &dataset.trajectories, &disc, None)?, None),
        Method::GroupBc => (
            fit_group_bc(obs, &dataset.trajectories, &disc, percentile)?,
            None,
        ),
        Method::Ev2bc => {
            let path = args
                .ev_report
                .or(ctx.settings.get::<PathBuf>("ev-report")?)
                .ok_or_else(|| Error::InvalidParam("ev2bc needs --ev-report <FILE>".into()))?;
            let report = io::load_ev_report(path)?;
            let rule = match args.absolute.or(ctx.settings.get("absolute")?) {
                Some(c) => SelectionRule {
                    kind: ThresholdKind::Absolute,
                    value: c,
                },
                None => SelectionRule {
                    kind: ThresholdKind::Percentile,
                    value: percentile,
                },
            };
            let chosen = select_agents(&report, &rule)?;
            let policy = fit_bc(obs, &dataset.trajectories, &disc, Some(&chosen))?;
            (policy, Some(chosen.len()))
        }
    };

    let out_path = ctx.out.join("policy.txt");
    io::save_policy(&out_path, &policy)?;
    match admitted {
        Some(n) => println!(
            "wrote {} ({} states, {n} agents admitted)",
            out_path.display(),
            policy.states().len()
        ),
        None => println!("wrote {} ({} states)", out_path.display(), policy.states().len()),
    }
    Ok(())
}
