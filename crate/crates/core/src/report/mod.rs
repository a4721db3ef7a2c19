//! Human-readable output: step-by-step counterexample traces and Graphviz
//! DOT renderings of the state space or of single components.

mod dot;
mod trace;

use thiserror::Error;

pub use dot::{render_dot, render_path_dot, DotOptions, DotView};
pub use trace::{
    build_trace, parse_trace_actions, render_trace, TraceDocument, TraceEvent, TraceStep,
};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("the graph has {nodes} nodes, above the cap of {cap}; raise the cap or render a server or agent projection")]
    TooLarge { nodes: usize, cap: usize },
    #[error("unknown server `{0}`")]
    UnknownServer(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("step {step}: action {action} is not enabled")]
    NotEnabled { step: usize, action: usize },
    #[error("trace line {line}: {message}")]
    BadTrace { line: usize, message: String },
}
