use thiserror::Error;

/// Errors raised by tree, group, boundary and sampler operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arity {0}: must be between 2 and 10")]
    InvalidArity(usize),

    #[error("arity {0} is too small for alternating constructions (A_2 is trivial), need d >= 3")]
    AlternatingArityTooSmall(usize),

    #[error("digit {digit} out of range for arity {d}")]
    DigitOutOfRange { digit: u8, d: usize },

    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),

    #[error("level {requested} is shallower than the vertex level {vertex_level}")]
    LevelTooShallow { requested: usize, vertex_level: usize },

    #[error("distance undefined: the two truncated rays are equal")]
    EqualPrefixes,

    #[error("distance undefined: the two automorphisms are equal")]
    EqualElements,

    #[error("enumeration exceeded the order cap {cap} (saw at least {seen} elements)")]
    OrderCapExceeded { cap: usize, seen: usize },

    #[error("depth {requested} exceeds the working depth {depth}")]
    DepthExceeded { requested: usize, depth: usize },

    #[error("rigid stabilizer at {0} is trivial at this truncation depth")]
    RigidTrivial(String),

    #[error("depth {depth} cannot host {requested} blue witnesses (found {found})")]
    BudgetExceeded {
        depth: usize,
        requested: usize,
        found: usize,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
