//! Solver outcome types: per-iteration records, run results, and the
//! richer observer events used by tests and diagnostics.

use nalgebra::DVector;
use serde::Serialize;

use crate::feasibility::FeasFailure;
use crate::problem::EvalCounters;
use crate::trust_region::RatioKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    PhaseI,
    PhaseII,
    Restoration,
    #[serde(rename = "FSLP")]
    Fslp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolverStatus {
    Converged,
    MaxIterations,
    RadiusTooSmall,
    InfeasibleStationary,
    EvaluationError,
}

/// One log row per outer iteration. `delta`, `v`, `f`, and `tau` describe
/// the state at the start of the iteration; `rho`, `inner_count`,
/// `accepted`, and `lp_status` describe what the iteration did. Serialized
/// as one JSON object per line; non-finite `rho` values appear as null.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub phase: Phase,
    pub delta: f64,
    pub v: f64,
    pub f: f64,
    pub rho: f64,
    pub tau: f64,
    pub inner_count: usize,
    pub accepted: bool,
    pub lp_status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub w_final: DVector<f64>,
    pub f_final: f64,
    pub v_final: f64,
    pub status: SolverStatus,
    pub outer_iterations: usize,
    pub counters: EvalCounters,
    pub trace: Vec<IterationRecord>,
}

/// Everything a single outer iteration knew, for observers. The plain
/// trace keeps only the `IterationRecord` subset.
#[derive(Clone, Debug)]
pub struct IterationEvent {
    pub k: usize,
    pub phase: Phase,
    pub lp_status: String,
    /// Iterate at the start of the iteration.
    pub w: DVector<f64>,
    /// Subproblem solution in original coordinates, when the LP was solved.
    pub w_bar: Option<DVector<f64>>,
    /// LP model value m_f(w_bar) (trust-region LP objective).
    pub model_value: Option<f64>,
    pub rho: f64,
    pub ratio_kind: Option<RatioKind>,
    pub v: f64,
    pub f: f64,
    pub delta_before: f64,
    pub delta_after: f64,
    pub tau_before: f64,
    pub tau_after: f64,
    pub accepted: bool,
    pub inner_count: usize,
    pub feas_failure: Option<FeasFailure>,
    /// Phase-II switching condition rejected the step.
    pub switching_vetoed: bool,
    /// This iteration shrank the tolerance-tube.
    pub tube_shrunk: bool,
    /// Iterate after the iteration (equals `w` unless accepted).
    pub w_next: DVector<f64>,
    /// Counter snapshot after the iteration.
    pub counters: EvalCounters,
}

impl IterationEvent {
    /// The record logs the state the iteration ran with (pre-update delta
    /// and tau), so every row can be re-classified offline.
    pub(crate) fn to_record(&self) -> IterationRecord {
        IterationRecord {
            k: self.k,
            phase: self.phase,
            delta: self.delta_before,
            v: self.v,
            f: self.f,
            rho: self.rho,
            tau: self.tau_before,
            inner_count: self.inner_count,
            accepted: self.accepted,
            lp_status: self.lp_status.clone(),
            w: Some(self.w.iter().copied().collect()),
        }
    }
}
