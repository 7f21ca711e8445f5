use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weights sum to {0}, expected 1")]
    NonNormalized(f64),
    #[error("negative weight {weight} for count {count}")]
    NegativeWeight { count: usize, weight: f64 },
    #[error("count {0} listed twice")]
    DuplicateCount(usize),
    #[error("empty offspring distribution")]
    EmptyDistribution,
    #[error("argument {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("offspring law is not supercritical (mean {0})")]
    NotSupercritical(f64),
    #[error("extinction probability is degenerate for this law")]
    DegenerateQ,
    #[error("materialization exceeded {0} vertices")]
    SizeLimit(usize),
    #[error("tree does not survive to the depth cap")]
    NoBackbone,
    #[error("law gives positive weight to zero children")]
    Mu0Positive,
    #[error("unknown vertex {0}")]
    UnknownVertex(u32),
    #[error("vertices are not connected")]
    Disconnected,
    #[error("the three paths do not form a closed loop")]
    NotClosed,
    #[error("map is not a slice")]
    NotASlice,
    #[error("slice is too shallow for the request")]
    TooShallow,
    #[error("no plateau in the distance table")]
    NoPlateau,
    #[error("vertex {0} has no neighbours")]
    IsolatedVertex(u32),
    #[error("trace tail dips to height {0}, not above the marker height")]
    TailNotAboveH(i32),
    #[error("vertex {0} is not materialized far enough for this query")]
    InsufficientMaterialization(u32),
    #[error("walk step {0} has not been reached")]
    NotYetReached(usize),
    #[error("exploration step {0} is not k-free on either side")]
    NotKFree(usize),
    #[error("terminal sets are not connected")]
    DisconnectedTerminals,
    #[error("linear solver failed: {0}")]
    SolverFailure(String),
    #[error("network too large for enumeration ({0} edges)")]
    TooLarge(usize),
    #[error("terminal {0} is not on the outer face")]
    TerminalsNotOuter(u32),
    #[error("trace has no regeneration times")]
    NoRegenerations,
    #[error("spine has fewer than {0} cutsets")]
    TooFewCutsets(usize),
    #[error("bounded subtree dies before the cap")]
    TruncationDies,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}
