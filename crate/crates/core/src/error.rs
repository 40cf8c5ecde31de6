use crate::agent::AgentId;

/// Unified error type for the crate.
///
/// Variants map onto the failure modes of the pipeline: malformed or
/// inconsistent inputs, tables missing required groups, data too thin to
/// estimate from, and selections that come back empty.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown agent id {0:?}")]
    UnknownAgent(AgentId),

    #[error("duplicate agent id {0:?}")]
    DuplicateAgent(AgentId),

    #[error("invalid agent id {0:?}: ids must be non-empty and free of whitespace and commas")]
    InvalidAgentId(String),

    #[error("group members must be distinct: {0:?} repeats")]
    DuplicateMember(AgentId),

    #[error("group size {got} is not permitted here (expected {expected})")]
    GroupSize { expected: String, got: usize },

    #[error("a {group}-member group cannot be drawn from a pool of {pool}")]
    Infeasible { pool: usize, group: usize },

    #[error("the empty group must have value 0, got {0}")]
    NonzeroEmptyValue(f64),

    #[error("values and scores must be finite, got {0}")]
    NonFiniteValue(f64),

    #[error("game table is incomplete: {missing} required group value(s) missing{detail}")]
    IncompleteGame { missing: usize, detail: String },

    #[error("{n} agents exceed the exact-computation limit of {limit}")]
    ExactLimit { n: usize, limit: usize },

    #[error("transform undefined for {0} agent(s); at least 2 required")]
    UndefinedTransform(usize),

    #[error("no feasible group size: the permitted-size set is empty below n")]
    NoFeasibleSize,

    #[error("agent {0:?} is inestimable: no group size has observations both including and excluding it")]
    Inestimable(AgentId),

    #[error("invalid cluster count k={k} for {n} agent(s)")]
    InvalidK { k: usize, n: usize },

    #[error("no data: {0}")]
    NoData(String),

    #[error("credit report contains no estimable agent")]
    EmptyReport,

    #[error("selection is empty: no agent passed the threshold")]
    EmptySelection,

    #[error("no candidate assignment is estimable")]
    NoValidCandidate,

    #[error("invalid demand {0}: actions must be finite and non-negative")]
    InvalidAction(f64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
