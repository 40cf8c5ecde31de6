//! Command-line pipeline around `evkit-core`: dataset generation, exchange
//! value computation, clustering, imitation policies, evaluation, and
//! error-vs-data studies. Every stage writes plain files so runs can be
//! inspected and chained, and every stage derives its randomness from the
//! global seed hashed with the stage name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use evkit_core::{io, Error, Result};

mod cluster;
mod error_study;
mod eval;
mod ev_cmd;
mod gen;
mod imitate;

/// Deterministic pipeline for exchange value experiments.
#[derive(Debug, Parser)]
#[command(name = "evkit", version, about, max_term_width = 100)]
pub struct Cli {
    /// Base seed; stages derive their own streams from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory artifacts are written into (must exist).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out commons groups and write an observation dataset.
    Gen(gen::GenArgs),
    /// Compute or estimate exchange values for a dataset.
    Ev(ev_cmd::EvArgs),
    /// Cluster agents by maximizing the variance of clustered exchange values.
    Cluster(cluster::ClusterArgs),
    /// Fit an imitation policy from a dataset.
    Imitate(imitate::ImitateArgs),
    /// Fit and evaluate imitation policies in the environment.
    Eval(eval::EvalArgs),
    /// Sweep estimation error against observed data fraction.
    ErrorStudy(error_study::ErrorStudyArgs),
}

/// Shared simulation knobs; every field mirrors a config key of the same
/// name (kebab-case).
#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Regrowth rate applied to the pool each step.
    #[arg(long)]
    pub growth: Option<f64>,
    /// Starting pool level.
    #[arg(long, value_name = "X0")]
    pub initial_pool: Option<f64>,
    /// Steps per episode.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Agents per group.
    #[arg(long)]
    pub group_size: Option<usize>,
}

/// Resolved option sources: flag values win over config file entries, which
/// win over built-in defaults.
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(config: Option<&Path>) -> Result<Self> {
        let map = match config {
            Some(path) => io::load_config(path)?,
            None => BTreeMap::new(),
        };
        Ok(Settings { map })
    }

    /// Typed lookup of a config key; a malformed value is a config error
    /// naming the key.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidParam(format!("config key {key} has unusable value {raw:?}"))
            }),
        }
    }

    /// `flag` if given, else the config entry, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn toc_config(&self, sim: &SimArgs) -> Result<evkit_core::toc::TocConfig> {
        let base = evkit_core::toc::TocConfig::default();
        let cfg = evkit_core::toc::TocConfig {
            growth: self.resolve(sim.growth, "growth", base.growth)?,
            initial_pool: self.resolve(sim.initial_pool, "initial-pool", base.initial_pool)?,
            horizon: self.resolve(sim.horizon, "horizon", base.horizon)?,
            group_size: self.resolve(sim.group_size, "group-size", base.group_size)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Global context every command receives.
pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub settings: Settings,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let settings = Settings::load(cli.config.as_deref())?;
        let seed = settings.resolve(cli.seed, "seed", 0)?;
        let out = match &cli.out {
            Some(dir) => dir.clone(),
            None => PathBuf::from(settings.get::<String>("out")?.unwrap_or_else(|| ".".into())),
        };
        if !out.is_dir() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("output directory {} does not exist", out.display()),
            )));
        }
        Ok(Ctx {
            seed,
            out,
            settings,
        })
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Gen(args) => gen::run(&ctx, args),
        Command::Ev(args) => ev_cmd::run(&ctx, args),
        Command::Cluster(args) => cluster::run(&ctx, args),
        Command::Imitate(args) => imitate::run(&ctx, args),
        Command::Eval(args) => eval::run(&ctx, args),
        Command::ErrorStudy(args) => error_study::run(&ctx, args),
    }
}

/// Exit code contract: 0 ok, 1 config, 2 I/O, 3 data insufficiency,
/// 4 empty selection.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParam(_)
        | Error::InvalidK { .. }
        | Error::ExactLimit { .. }
        | Error::GroupSize { .. }
        | Error::Infeasible { .. }
        | Error::InvalidAgentId(_)
        | Error::UndefinedTransform(_)
        | Error::NonzeroEmptyValue(_)
        | Error::NonFiniteValue(_)
        | Error::DuplicateAgent(_)
        | Error::DuplicateMember(_)
        | Error::InvalidAction(_)
        | Error::NoFeasibleSize => 1,
        Error::Io(_) | Error::Parse { .. } => 2,
        Error::IncompleteGame { .. }
        | Error::NoData(_)
        | Error::Inestimable(_)
        | Error::EmptyReport
        | Error::NoValidCandidate
        | Error::UnknownAgent(_) => 3,
        Error::EmptySelection => 4,
    }
}

/// Parses a comma-separated list with a typed error naming the flag.
pub(crate) fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::InvalidParam(format!("{what} has unusable entry {s:?}")))
        })
        .collect()
}
