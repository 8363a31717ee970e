//! Carbon-aware serverless keep-alive scheduling over multi-generation hardware.
//!
//! The crate is a trace-driven simulator plus the scheduling policies it
//! evaluates. Functions invoked from a trace are executed on one of two
//! hardware generations; after execution they may be kept alive in a warm
//! pool to avoid cold starts. Keeping a function alive costs embodied and
//! operational carbon; letting it go cold costs service time and cold-start
//! carbon on the next invocation. The main policy searches the
//! (keep-alive location, keep-alive duration) space per function with a
//! dynamic particle swarm optimizer and adjusts warm pools by priority
//! eviction when memory runs out. Baseline and clairvoyant upper-bound
//! policies share the same simulation engine for comparison.
//!
//! Modules map onto the moving parts:
//!
//! - [`carbon`]: embodied/operational carbon formulas and aggregates
//! - [`workload`]: traces, function profiles, carbon-intensity ingestion
//! - [`dpso`]: per-function dynamic PSO over the 2-D decision space
//! - [`pool`]: warm pools with priority eviction and cross-generation transfer
//! - [`scheduler`]: objective function, placement rule, per-function state
//! - [`policy`]: the full policy zoo behind one interface
//! - [`sim`]: deterministic event loop and metrics
//! - [`scenario`], [`config`], [`report`]: CLI plumbing

pub mod carbon;
pub mod config;
pub mod dpso;
pub mod policy;
pub mod pool;
pub mod report;
pub mod scenario;
pub mod scheduler;
pub mod sim;
pub mod workload;

#[cfg(test)]
pub(crate) mod testutil;

pub use carbon::{CarbonBreakdown, CarbonIntensitySeries, Generation, HardwareProfile};
pub use config::RunConfig;
pub use policy::PolicyKind;
pub use scheduler::{Decision, ObjectiveWeights};
pub use sim::{MetricsRecord, RunSummary};
pub use workload::{FunctionProfile, InvocationTrace};

/// Errors surfaced by loaders, validators, and the simulation itself.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("profile error: {0}")]
    Profile(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trace ordering violation at line {line}: {msg}")]
    Ordering { line: usize, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("guard refused: {0}")]
    Guard(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
