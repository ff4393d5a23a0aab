use alloc::string::String;

use crate::graph::NodeId;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A graph operation found a directed cycle through the named edge.
    #[error("cycle detected through edge {from} -> {to}")]
    Cycle { from: NodeId, to: NodeId },

    /// An edge violates the level typing rules of a hierarchical DAG.
    #[error("invalid edge {from} -> {to}: {reason}")]
    InvalidEdge {
        from: NodeId,
        to: NodeId,
        reason: &'static str,
    },

    /// Caller supplied inconsistent or out-of-range arguments.
    #[error("usage error: {0}")]
    Usage(String),

    /// The additive regression could not be fitted.
    #[error("fit error in term {term}: {reason}")]
    Fit { term: String, reason: String },

    /// A hierarchical estimation stage failed.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A simulation configuration is invalid.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
