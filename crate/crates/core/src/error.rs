use thiserror::Error;

/// Errors surfaced by scenario construction, routing, simulation and planning.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty network: {0}")]
    EmptyNetwork(&'static str),

    #[error("unknown {kind} node id {id}")]
    UnknownNode { kind: &'static str, id: u32 },

    #[error("duplicate {kind} node id {id}")]
    DuplicateNode { kind: &'static str, id: u32 },

    #[error("no route from road node {from} to road node {to}")]
    NoRoute { from: u32, to: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("incentive matrix shape {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    ShapeMismatch {
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },

    #[error("genome length {got} does not match layout length {want}")]
    GenomeLength { got: usize, want: usize },

    #[error("episode is done; call reset before stepping again")]
    EpisodeDone,

    #[error("scenario validation failed:\n{}", format_violations(.0))]
    InvalidScenario(Vec<crate::net::Violation>),

    #[error("instance too large for exact planner: {0}")]
    InstanceTooLarge(String),

    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn format_violations(violations: &[crate::net::Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
