use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("a topology needs at least two clients, got {0}")]
    TooFewClients(usize),

    #[error("byzantine count {byzantine} must be smaller than client count {clients}")]
    TooManyByzantine { byzantine: usize, clients: usize },

    #[error("the subgraph induced by honest clients is disconnected")]
    HonestSubgraphDisconnected,

    #[error("unknown client id {0}")]
    UnknownClient(usize),

    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),

    #[error("client {0} is byzantine and does not run the protocol")]
    ByzantineObserver(usize),

    #[error("edge ({0}, {1}) has a byzantine endpoint")]
    ByzantineEdge(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("horizon mismatch: expected {expected} rounds, got {got}")]
    HorizonMismatch { expected: usize, got: usize },

    #[error(
        "comparator did not converge within {iterations} iterations \
         (constraint residual {residual:e}, objective change {objective_change:e})"
    )]
    ComparatorNotConverged {
        iterations: usize,
        residual: f64,
        objective_change: f64,
    },

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
