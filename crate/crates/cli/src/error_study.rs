//! `error-study`: how estimation error grows as data thins out. Builds the
//! complete commons game, freezes its exact exchange values, then estimates
//! from subsampled fractions and from fully anonymized (degenerate) copies.
//! The clustered degenerate row shares credit within behavior clusters,
//! choosing among seeded clusterings the one with the highest credit
//! variance. Scores are rescaled so the largest magnitude is 1000, making
//! errors comparable across value functions.

use clap::Args;
use evkit_core::embed::{embed_state_action, kmeans_cluster, select_by_ev_variance, EmbeddingConfig};
use evkit_core::estimate::{clustered_ev, estimate_all, EvReport, ObservationSet};
use evkit_core::game::exchange_constrained_exact;
use evkit_core::io::{self, ErrorStudyRow};
use evkit_core::toc::{generate_dataset, standard_pool, state_actions, Discretizer, Dvf, GenMode};
use evkit_core::{seeding, AgentId, Error, Result};
use std::collections::HashMap;

use crate::{parse_list, Ctx, SimArgs};

#[derive(Debug, Args)]
pub struct ErrorStudyArgs {
    /// Roster size; a multiple of 12.
    #[arg(long)]
    pub agents: Option<usize>,

    /// Value function used to score groups.
    #[arg(long, value_name = "DVF")]
    pub dvf: Option<Dvf>,

    /// Seeds averaged per regime.
    #[arg(long, value_name = "N")]
    pub study_seeds: Option<usize>,

    /// Comma-separated observed fractions in (0, 1].
    #[arg(long, value_name = "LIST")]
    pub fractions: Option<String>,

    /// Clusters for the degenerate regime.
    #[arg(long)]
    pub k: Option<usize>,

    /// Seeded behavior clusterings tried per degenerate seed.
    #[arg(long)]
    pub candidates: Option<usize>,

    #[command(flatten)]
    pub sim: SimArgs,
}

/// Copy of `obs` with every score multiplied by `scale`.
fn scaled(obs: &ObservationSet, scale: f64) -> Result<ObservationSet> {
    let mut out = match obs.declared_sizes() {
        Some(sizes) => ObservationSet::with_sizes(obs.agents().to_vec(), sizes.clone())?,
        None => ObservationSet::new(obs.agents().to_vec())?,
    };
    for o in obs.observations() {
        out.push_indices(o.members().to_vec(), o.score() * scale, o.trajectory)?;
    }
    Ok(out)
}

/// Mean |estimate − truth| over estimable agents; `truth` is keyed by the
/// agent the estimate stands for (the original agent in degenerate runs).
fn mean_abs_error(
    report: &EvReport,
    truth: &HashMap<AgentId, f64>,
    alias: Option<&HashMap<AgentId, AgentId>>,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (agent, entry) in report.iter() {
        let Some(entry) = entry else { continue };
        let target = match alias {
            Some(map) => map
                .get(agent)
                .ok_or_else(|| Error::UnknownAgent(agent.clone()))?,
            None => agent,
        };
        let exact = truth
            .get(target)
            .ok_or_else(|| Error::UnknownAgent(target.clone()))?;
        total += (entry.estimate - exact).abs();
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyReport);
    }
    Ok(total / count as f64)
}

pub fn run(ctx: &Ctx, args: ErrorStudyArgs) -> Result<()> {
    let cfg = ctx.settings.toc_config(&args.sim)?;
    let agents = ctx.settings.resolve(args.agents, "agents", 12)?;
    if agents == 0 || agents % 12 != 0 {
        return Err(Error::InvalidParam(format!(
            "roster size {agents} is not a multiple of the 12-agent archetype grid"
        )));
    }
    let dvf = ctx.settings.resolve(args.dvf, "dvf", Dvf::Final)?;
    let seeds = ctx.settings.resolve(args.study_seeds, "study-seeds", 20)?;
    if seeds == 0 {
        return Err(Error::InvalidParam("study-seeds must be at least 1".into()));
    }
    let fractions: Vec<f64> = parse_list(
        &ctx.settings
            .resolve(args.fractions, "fractions", "0.1,0.25,0.5,1.0".into())?,
        "--fractions",
    )?;
    if fractions.is_empty() {
        return Err(Error::InvalidParam("--fractions named no fraction".into()));
    }
    for &f in &fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "fraction {f} outside (0, 1]"
            )));
        }
    }
    let k = ctx.settings.resolve(args.k, "k", 12)?;
    let candidates = ctx.settings.resolve(args.candidates, "candidates", 8)?;
    if candidates == 0 {
        return Err(Error::InvalidParam("candidates must be at least 1".into()));
    }

    let pool = standard_pool(agents / 12);
    let complete = generate_dataset(
        &pool,
        GenMode::Complete,
        &cfg,
        dvf,
        false,
        seeding::derive(ctx.seed, "study-gen"),
    )?;
    let max_mag = complete
        .observations
        .observations()
        .iter()
        .map(|o| o.score().abs())
        .fold(0.0_f64, f64::max);
    let scale = if max_mag > 0.0 { 1000.0 / max_mag } else { 1.0 };
    let obs = scaled(&complete.observations, scale)?;

    let game = obs.to_game()?;
    let credit = exchange_constrained_exact(&game)?;
    let truth: HashMap<AgentId, f64> = game
        .agents()
        .iter()
        .cloned()
        .zip(credit.values().iter().copied())
        .collect();

    let total = obs.len();
    let disc = Discretizer::standard(&cfg);
    let mut rows: Vec<ErrorStudyRow> = Vec::new();

    for (fi, &fraction) in fractions.iter().enumerate() {
        let take = ((fraction * total as f64).round() as usize).clamp(1, total);
        let mut errs = Vec::with_capacity(seeds);
        for si in 0..seeds {
            let stream = seeding::derive_indexed(
                seeding::derive_indexed(ctx.seed, "study-fraction", fi as u64),
                "seed",
                si as u64,
            );
            let mut rng = seeding::rng(stream);
            let mut picked = rand::seq::index::sample(&mut rng, total, take).into_vec();
            picked.sort_unstable();
            let mut subset = match obs.declared_sizes() {
                Some(sizes) => ObservationSet::with_sizes(obs.agents().to_vec(), sizes.clone())?,
                None => ObservationSet::new(obs.agents().to_vec())?,
            };
            for &oi in &picked {
                let o = &obs.observations()[oi];
                subset.push_indices(o.members().to_vec(), o.score(), None)?;
            }
            errs.push(mean_abs_error(&estimate_all(&subset), &truth, None)?);
        }
        let fraction_pct = fraction * 100.0;
        let label = if (fraction_pct.round() - fraction_pct).abs() < 1e-9 {
            format!("{fraction_pct:.0}%")
        } else {
            format!("{fraction_pct}%")
        };
        rows.push(ErrorStudyRow {
            fraction: label,
            groups: take,
            seeds,
            mean_abs_error: errs.iter().sum::<f64>() / seeds as f64,
        });
    }

    // degenerate regime: every appearance gets a one-time id, so the plain
    // estimator spreads each group score equally over its members
    let mut deg_errs = Vec::with_capacity(seeds);
    let mut deg_cluster_errs = Vec::with_capacity(seeds);
    for si in 0..seeds {
        let deg = generate_dataset(
            &pool,
            GenMode::Complete,
            &cfg,
            dvf,
            true,
            seeding::derive_indexed(ctx.seed, "study-deg", si as u64),
        )?;
        let alias: HashMap<AgentId, AgentId> = deg
            .truth
            .clone()
            .expect("anonymized dataset carries its identity map")
            .into_iter()
            .collect();
        let deg_obs = scaled(&deg.observations, scale)?;

        deg_errs.push(mean_abs_error(&estimate_all(&deg_obs), &truth, Some(&alias))?);

        let records: Vec<(AgentId, Vec<(u32, u32)>)> = deg
            .trajectories
            .iter()
            .flat_map(|traj| {
                traj.participants
                    .iter()
                    .enumerate()
                    .map(|(seat, agent)| (agent.clone(), state_actions(traj, seat, &disc)))
                    .collect::<Vec<_>>()
            })
            .collect();
        let batch = embed_state_action(
            &records,
            disc.n_actions(),
            &EmbeddingConfig::default(),
            seeding::derive_indexed(ctx.seed, "study-embed", si as u64),
        )?;
        let cands: Vec<_> = (0..candidates)
            .map(|c| {
                kmeans_cluster(
                    &batch,
                    k,
                    seeding::derive_indexed(
                        seeding::derive_indexed(ctx.seed, "study-kmeans", si as u64),
                        "candidate",
                        c as u64,
                    ),
                )
            })
            .collect::<Result<_>>()?;
        // Fully anonymized scores cannot anchor the credit-variance search,
        // so the clustered row stays behavior-driven: many seeded
        // clusterings, keep the one whose shared credits vary most.
        let (best, _) = select_by_ev_variance(&cands, &deg_obs)?;
        let clustered = clustered_ev(&deg_obs, &cands[best])?;
        deg_cluster_errs.push(mean_abs_error(&clustered, &truth, Some(&alias))?);
    }
    rows.push(ErrorStudyRow {
        fraction: "deg".into(),
        groups: total,
        seeds,
        mean_abs_error: deg_errs.iter().sum::<f64>() / seeds as f64,
    });
    rows.push(ErrorStudyRow {
        fraction: "deg-clustered".into(),
        groups: total,
        seeds,
        mean_abs_error: deg_cluster_errs.iter().sum::<f64>() / seeds as f64,
    });

    let out_path = ctx.out.join("error_study.csv");
    io::save_error_study(&out_path, &rows)?;
    println!("wrote {}", out_path.display());
    for r in &rows {
        println!(
            "  {:>13}: groups {:>4}, mean abs error {:.6}",
            r.fraction, r.groups, r.mean_abs_error
        );
    }
    Ok(())
}
