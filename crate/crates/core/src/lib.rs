//! Hybrid worker recruitment for mobile crowd sensing and computing.
//!
//! The platform signs risk-aware long-term contracts ahead of time
//! (offline mode) and tops up with temporary workers whenever delivered
//! quality falls short during a trading (online mode). This crate holds
//! the probability kernel, the domain model, contract pricing, risk
//! evaluators, the three offline solvers, online backup recruitment, the
//! campaign simulator, and the scenario/report I/O behind the `mcsc` CLI.

pub mod gp;
pub mod io;
pub mod model;
pub mod offline;
pub mod online;
pub mod quotes;
pub mod risk;
pub mod sim;
pub mod stats;

#[cfg(test)]
pub(crate) mod testutil;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scenario failed validation: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("assignment index {index} out of range for a {bits}-bit space")]
    IndexOutOfRange { index: u64, bits: u32 },

    #[error("assignment index space needs {0} bits, beyond the supported search size")]
    IndexSpaceTooLarge(u32),

    #[error("a worker holds more than one assignment")]
    AtMostOneViolated,

    #[error("exact risk enumeration over {0} assigned workers is too large")]
    ExactEnumerationTooLarge(usize),

    #[error("expansion point lies on the boundary of the positive domain")]
    BoundaryExpansionPoint,

    #[error("convex subproblem infeasible (residual {residual:.3e})")]
    SubproblemInfeasible { residual: f64 },

    #[error("no feasible initial point found after {restarts} restarts")]
    NoFeasibleInit { restarts: usize },

    #[error("offline problem infeasible: no contract book can be signed")]
    InfeasibleOffline,

    #[error("ingestion failed: {0}")]
    Ingest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
