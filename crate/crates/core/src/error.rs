//! Error types shared across the solver stack.

use thiserror::Error;

use crate::lp::LpStatus;

/// Failure while invoking one of the problem callbacks.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("callback `{what}` returned a non-finite value")]
    NonFinite { what: &'static str },
    #[error("callback `{what}` returned {got} entries, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("query point has {got} entries, expected {expected}")]
    PointDimension { got: usize, expected: usize },
}

/// Hard failure inside the LP solver (as opposed to a regular
/// `Infeasible`/`Unbounded` verdict, which is part of [`LpStatus`]).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("simplex iteration limit of {0} exceeded")]
    IterationLimit(usize),
    #[error("malformed LP: {0}")]
    BadProblem(String),
    #[error("numerical breakdown in simplex: {0}")]
    Numerical(String),
}

/// Hard failure of an outer solver run. Regular terminations (converged,
/// iteration limit, shrunken radius, infeasible-stationary, evaluation
/// error) are reported through `SolverResult::status` instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("starting point violates the feasibility tolerance: v(w0) = {v:.3e} > {tau:.3e}")]
    InfeasibleStart { v: f64, tau: f64 },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error("LP subproblem solver failed: {0}")]
    Lp(#[from] LpError),
    #[error("LP subproblem reported {status:?} where {expected} was guaranteed ({context})")]
    UnexpectedLp {
        context: &'static str,
        status: LpStatus,
        expected: &'static str,
    },
}
