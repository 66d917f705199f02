//! Trust-region sequential linear programming at desk scale.
//!
//! The crate provides two outer solvers over a shared toolkit:
//!
//! * [`fslp`]: feasible SLP — every accepted iterate is projected back to
//!   the feasible set by iterated parametric LP solves, so the objective
//!   acts as the merit function.
//! * [`afslp`]: almost-feasible SLP — a two-phase generalization that only
//!   keeps iterates inside a tolerance-tube around the feasible set,
//!   accepts infeasible starting points, guards steps with a filter-style
//!   switching condition, and falls back to an l1 restoration phase when a
//!   subproblem is infeasible.
//!
//! Supporting modules: [`problem`] (NLP callbacks, infeasibility measures,
//! counted evaluation), [`lp`] (dense two-phase simplex and the three
//! subproblem builders), [`trust_region`] (ratios, radius update,
//! acceptance), [`feasibility`] (the inner projection loop),
//! [`restoration`] (the elastic violation minimization), [`library`]
//! (benchmark problems with known solutions), and [`report`] (traces and
//! results).

pub mod afslp;
pub mod error;
pub mod feasibility;
pub mod fslp;
pub mod library;
pub mod lp;
pub mod problem;
pub mod report;
pub mod restoration;
pub mod trust_region;

pub use afslp::{solve_afslp, solve_afslp_observed, AfslpConfig};
pub use error::{EvalError, LpError, SolverError};
pub use fslp::{solve_fslp, solve_fslp_observed, FslpConfig};
pub use library::{problem_by_name, NamedProblem};
pub use problem::{
    infeasibility, restoration_infeasibility, EvalCounters, Evaluator, Iterate, Linearization,
    NlpProblem,
};
pub use report::{IterationEvent, IterationRecord, Phase, SolverResult, SolverStatus};
