use thiserror::Error;

use crate::linsolve::Solution;
use crate::network::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input. `context` is a line/column or a field path.
    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    /// Structural invariants of the feeder are violated.
    #[error("invalid feeder: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("singular system: {0}")]
    Singular(String),

    /// A load saw a (phase or line) voltage too small to evaluate its
    /// constant-power term.
    #[error("voltage collapse at node {node} ({phase}): |V| = {magnitude:e}")]
    VoltageCollapse {
        node: String,
        phase: String,
        magnitude: f64,
    },

    /// The sweep did not reach the tolerance. Carries the last iterate.
    #[error("no convergence after {iterations} iterations (last max |dV| = {last_delta:e})")]
    Convergence {
        iterations: usize,
        last_delta: f64,
        last: Box<Solution>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// True for the failures a solver can raise on a structurally valid feeder.
    pub fn is_solver_error(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::VoltageCollapse { .. } | Error::Convergence { .. }
        )
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
