//! `eval`: run imitation policies in the environment and report per-method,
//! per-value-function episode scores. Policies are fitted fresh from the
//! dataset (rescored per value function) unless a saved policy is given.

use clap::Args;
use evkit_core::estimate::estimate_all;
use evkit_core::imitate::{
    evaluate_policy, fit_bc, fit_group_bc, select_agents, SelectionRule, ThresholdKind,
};
use evkit_core::io::{self, EvalRow};
use evkit_core::toc::{rescore, Discretizer, Dvf};
use evkit_core::{seeding, Error, Result};
use std::path::PathBuf;

use crate::imitate::Method;
use crate::{parse_list, Ctx, SimArgs};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Observation file to read (episodes referenced by it are loaded too).
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// Comma-separated methods to fit and evaluate.
    #[arg(long, value_name = "LIST")]
    pub methods: Option<String>,

    /// Comma-separated value functions, or "all".
    #[arg(long, value_name = "LIST")]
    pub dvfs: Option<String>,

    /// Episodes per (method, value function) cell.
    #[arg(long)]
    pub episodes: Option<usize>,

    /// Admission percentile for group-bc and ev2bc.
    #[arg(long)]
    pub percentile: Option<f64>,

    /// Evaluate one saved policy instead of fitting methods.
    #[arg(long, value_name = "FILE", conflicts_with = "methods")]
    pub policy: Option<PathBuf>,

    /// Method column label for --policy rows.
    #[arg(long, requires = "policy")]
    pub label: Option<String>,

    #[command(flatten)]
    pub sim: SimArgs,
}

fn parse_dvfs(raw: &str) -> Result<Vec<Dvf>> {
    if raw == "all" {
        return Ok(Dvf::ALL.to_vec());
    }
    parse_list(raw, "--dvfs")
}

pub fn run(ctx: &Ctx, args: EvalArgs) -> Result<()> {
    let cfg = ctx.settings.toc_config(&args.sim)?;
    let episodes = ctx.settings.resolve(args.episodes, "episodes", 30)?;
    let percentile = ctx.settings.resolve(args.percentile, "percentile", 90.0)?;
    let dvfs = parse_dvfs(&ctx.settings.resolve(args.dvfs, "dvfs", "all".into())?)?;
    if dvfs.is_empty() {
        return Err(Error::InvalidParam("--dvfs named no value function".into()));
    }

    let dataset = io::load_dataset(&args.data)?;
    let disc = Discretizer::standard(&cfg);
    let eval_seed = seeding::derive(ctx.seed, "eval");

    let mut rows: Vec<EvalRow> = Vec::new();
    if let Some(path) = &args.policy {
        let policy = io::load_policy(path)?;
        let label = args.label.clone().unwrap_or_else(|| "policy".into());
        for &dvf in &dvfs {
            let (mean, sd) = evaluate_policy(&policy, &disc, &cfg, dvf, episodes, eval_seed)?;
            rows.push(EvalRow {
                method: label.clone(),
                dvf,
                mean,
                sd,
                episodes,
                seed: ctx.seed,
            });
        }
    } else {
        let raw = ctx
            .settings
            .resolve(args.methods, "methods", "bc,group-bc,ev2bc".into())?;
        let methods: Vec<Method> = parse_list(&raw, "--methods")?;
        if methods.is_empty() {
            return Err(Error::InvalidParam("--methods named no method".into()));
        }
        for &dvf in &dvfs {
            let obs = rescore(&dataset, dvf)?;
            for &method in &methods {
                let policy = match method {
                    Method::Bc => fit_bc(&obs, &dataset.trajectories, &disc, None)?,
                    Method::GroupBc => {
                        fit_group_bc(&obs, &dataset.trajectories, &disc, percentile)?
                    }
                    Method::Ev2bc => {
                        let report = estimate_all(&obs);
                        let rule = SelectionRule {
                            kind: ThresholdKind::Percentile,
                            value: percentile,
                        };
                        let chosen = select_agents(&report, &rule)?;
                        fit_bc(&obs, &dataset.trajectories, &disc, Some(&chosen))?
                    }
                };
                let (mean, sd) = evaluate_policy(&policy, &disc, &cfg, dvf, episodes, eval_seed)?;
                rows.push(EvalRow {
                    method: method.to_string(),
                    dvf,
                    mean,
                    sd,
                    episodes,
                    seed: ctx.seed,
                });
            }
        }
    }

    let out_path = ctx.out.join("results.csv");
    io::save_results(&out_path, &rows)?;
    println!("wrote {} ({} rows)", out_path.display(), rows.len());
    for r in &rows {
        println!("  {} {} mean {:.3} sd {:.3}", r.method, r.dvf, r.mean, r.sd);
    }
    Ok(())
}
