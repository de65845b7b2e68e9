use thiserror::Error;

use crate::qp::QpResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("unsupported element type code {code} at line {line}")]
    UnsupportedElement { code: u32, line: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("degenerate element {element}: jacobian determinant {det_j:e}")]
    DegenerateElement { element: usize, det_j: f64 },

    #[error("diffusivity is not elliptic at ({x}, {y}): smallest eigenvalue {min_eig:e}")]
    NotElliptic { x: f64, y: f64, min_eig: f64 },

    #[error("conflicting Dirichlet values at node {node}: {first} vs {second}")]
    Conflict { node: usize, first: f64, second: f64 },

    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    NotSpd { pivot: usize, value: f64 },

    #[error("box QP did not converge within {iterations} iterations (kkt residual {kkt_residual:e})")]
    NoConvergence {
        iterations: usize,
        kkt_residual: f64,
        best: Box<QpResult>,
    },

    #[error("solver failure at step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular matrix")]
    SingularMatrix,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors produced by numerical solves, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NotSpd { .. }
            | Error::NoConvergence { .. }
            | Error::SingularMatrix
            | Error::DegenerateElement { .. } => true,
            Error::Step { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
