use thiserror::Error;

pub type Result<T, E = NrmabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NrmabError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("edgelist contains no nodes")]
    EmptyInput,

    #[error("invalid instance: {0}")]
    Validation(String),

    #[error("node {node}: {message}")]
    NodeValidation { node: String, message: String },

    #[error("missing required attribute keys: {}", .0.join(", "))]
    MissingFields(Vec<String>),

    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),

    #[error(
        "exact enumeration supports at most {max_nodes} nodes and {max_edges} edges \
         (instance has {nodes} nodes, {edges} edges); use the sampling API instead"
    )]
    EnumerationCap {
        nodes: usize,
        edges: usize,
        max_nodes: usize,
        max_edges: usize,
    },

    /// `count` saturates at `u128::MAX`.
    #[error("{what}: {} items exceeds the cap of {cap}", show_count(*.count))]
    CombinatorialCap {
        what: &'static str,
        count: u128,
        cap: u128,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("no convergence after {iterations} iterations (last sup-norm delta {delta:e})")]
    NonConvergence { iterations: usize, delta: f64 },

    #[error("Whittle index for arm {arm}: {message}")]
    Whittle { arm: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

fn show_count(count: u128) -> String {
    if count == u128::MAX {
        "at least 2^128".into()
    } else {
        count.to_string()
    }
}
