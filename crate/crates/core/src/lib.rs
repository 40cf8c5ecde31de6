//! Credit assignment for groups of agents evaluated only through shared
//! outcome scores.
//!
//! The centerpiece is the exchange value: the expected change in a group's
//! score when an agent replaces a random member of a random group, normalized
//! so that credits sum to zero across agents. It is an affine transform of the
//! Shapley value on unconstrained games and stays well defined on constrained
//! games where only some group sizes ever occur.
//!
//! Modules:
//! - [`game`]: characteristic games over explicit agent sets, exact Shapley
//!   and exchange credits, the affine bridge between them, axiom checks.
//! - [`estimate`]: plug-in estimation from observed (group, score) samples,
//!   clustered value functions, and variance-maximizing cluster search.
//! - [`embed`]: behavior embeddings (state-action frequencies, n-gram tf-idf)
//!   and seeded k-means for initializing cluster search.
//! - [`toc`]: a tragedy-of-the-commons simulator with scripted archetypes,
//!   used as the benchmark environment.
//! - [`imitate`]: credit-filtered behavior cloning and policy evaluation.
//! - [`io`]: line-oriented text and CSV formats for every artifact the
//!   pipeline reads or writes.
//! - [`oracle`]: brute-force reference implementations kept deliberately
//!   independent of the fast paths; exponential cost, test support only.

pub mod agent;
pub mod embed;
pub mod error;
pub mod estimate;
pub mod game;
pub mod imitate;
pub mod io;
pub mod oracle;
pub mod seeding;
pub mod toc;

pub use agent::AgentId;
pub use error::{Error, Result};

/// Absolute tolerance used by tests and internal consistency checks.
pub const TOLERANCE: f64 = 1e-9;
