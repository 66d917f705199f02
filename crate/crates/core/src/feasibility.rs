//! Feasibility iterations: a loop of parametric LPs that projects an outer
//! trial point toward the feasible set (or a tolerance-tube around it)
//! while the Jacobians stay frozen at the outer base point. Only constraint
//! evaluations are spent here, no derivatives.

use nalgebra::DVector;

use crate::error::{EvalError, SolverError};
use crate::lp::{build_plp, solve_lp, LpStatus};
use crate::problem::{infeasibility, weighted_inf_norm, Evaluator, Linearization};

#[derive(Clone, Copy, Debug)]
pub struct FeasIterParams {
    /// Inner-iteration cap.
    pub max_inner: usize,
    /// Number of consecutive contraction failures the watchdog tolerates.
    pub n_watch: usize,
    /// Contraction factor: a ratio v_next / v_prev above this counts as a
    /// failure.
    pub kappa_watch: f64,
    /// Absolute stagnation floor: when v changes by less than this, the
    /// step counts as a contraction failure regardless of the ratio.
    pub sigma_inner: f64,
}

impl Default for FeasIterParams {
    fn default() -> Self {
        Self {
            max_inner: 100,
            n_watch: 5,
            kappa_watch: 0.9,
            sigma_inner: 1e-9,
        }
    }
}

impl FeasIterParams {
    pub fn validated(self) -> Result<Self, SolverError> {
        let bad = |msg: &str| Err(SolverError::BadConfig(msg.to_string()));
        if self.max_inner == 0 {
            return bad("max_inner must be at least 1");
        }
        if self.n_watch == 0 {
            return bad("n_watch must be at least 1");
        }
        if !(self.kappa_watch > 0.0 && self.kappa_watch < 1.0) {
            return bad("kappa_watch must lie in (0, 1)");
        }
        if !(self.sigma_inner > 0.0 && self.sigma_inner < 1e-5) {
            return bad("sigma_inner must lie in (0, 1e-5)");
        }
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeasFailure {
    None,
    PlpInfeasible,
    Watchdog,
    MaxInner,
    /// Hit the iteration cap with the infeasibility target met but the
    /// projection-ratio condition still violated.
    RatioCondition,
}

/// Result of one run of the feasibility iterations. `g`, `h`, and `v` are
/// the constraint values at `w_hat`; they are meaningful whenever the run
/// evaluated `w_hat` (always on success).
#[derive(Clone, Debug)]
pub struct FeasIterOutcome {
    pub w_hat: DVector<f64>,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
    pub v: f64,
    pub success: bool,
    pub inner_count: usize,
    pub failure_reason: FeasFailure,
}

/// Divergence watchdog over the inner infeasibility history: true iff the
/// latest value is non-finite, or the last `n_watch` consecutive ratios
/// `v_(l+1) / v_l` all exceed `kappa_watch`. Steps whose absolute change is
/// below `sigma_inner` count as stagnant (ratio one).
pub fn divergence_check(history: &[f64], params: &FeasIterParams) -> bool {
    let Some(&last) = history.last() else {
        return false;
    };
    if !last.is_finite() {
        return true;
    }
    if history.len() < params.n_watch + 1 {
        return false;
    }
    history
        .windows(2)
        .rev()
        .take(params.n_watch)
        .all(|pair| contraction_failed(pair[0], pair[1], params))
}

fn contraction_failed(prev: f64, next: f64, params: &FeasIterParams) -> bool {
    if (prev - next).abs() < params.sigma_inner {
        return true;
    }
    if prev <= 0.0 {
        return next > 0.0;
    }
    next / prev > params.kappa_watch
}

/// Project `w_bar` toward the set `{v <= tau}` with iterated parametric LP
/// solves. Success requires both `v(w_hat) <= tau` and the projection-ratio
/// condition `||w_bar - w_hat|| / ||w_bar - w_outer|| < 1/2` in the
/// P-weighted max norm (a zero denominator counts as ratio zero).
///
/// `inner_count` equals the number of PLP solves, which is also the number
/// of constraint-pair evaluations beyond the initial one at `w_bar`.
/// Non-finite constraint values at an inner iterate are treated as
/// divergence rather than as an evaluation error.
pub fn feas_iterations(
    ev: &mut Evaluator<'_>,
    lin: &Linearization,
    w_outer: &DVector<f64>,
    w_bar: &DVector<f64>,
    delta: f64,
    tau: f64,
    params: &FeasIterParams,
) -> Result<FeasIterOutcome, SolverError> {
    let scaling = ev.problem().scaling();
    let denom = weighted_inf_norm(scaling, &(w_bar - w_outer));

    let mut w_cur = w_bar.clone();
    let mut inner = 0usize;
    let (mut g, mut h) = match ev.constraint_pair(&w_cur) {
        Ok(pair) => pair,
        Err(EvalError::NonFinite { .. }) => {
            return Ok(diverged(w_cur, ev.problem().n_g(), ev.problem().n_h(), 0))
        }
        Err(e) => return Err(e.into()),
    };
    let mut v = infeasibility(&g, &h);
    let mut history = vec![v];

    loop {
        let ratio = if denom > 0.0 {
            weighted_inf_norm(scaling, &(w_bar - &w_cur)) / denom
        } else {
            0.0
        };
        if v <= tau && ratio < 0.5 {
            return Ok(FeasIterOutcome {
                w_hat: w_cur,
                g,
                h,
                v,
                success: true,
                inner_count: inner,
                failure_reason: FeasFailure::None,
            });
        }
        if divergence_check(&history, params) {
            return Ok(FeasIterOutcome {
                w_hat: w_cur,
                g,
                h,
                v,
                success: false,
                inner_count: inner,
                failure_reason: FeasFailure::Watchdog,
            });
        }
        if inner >= params.max_inner {
            let reason = if v <= tau {
                FeasFailure::RatioCondition
            } else {
                FeasFailure::MaxInner
            };
            return Ok(FeasIterOutcome {
                w_hat: w_cur,
                g,
                h,
                v,
                success: false,
                inner_count: inner,
                failure_reason: reason,
            });
        }

        let plp = build_plp(lin, &g, &h, &w_cur, delta, scaling);
        let sol = solve_lp(&plp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Ok(FeasIterOutcome {
                    w_hat: w_cur,
                    g,
                    h,
                    v,
                    success: false,
                    inner_count: inner,
                    failure_reason: FeasFailure::PlpInfeasible,
                })
            }
            LpStatus::Unbounded => {
                return Err(SolverError::UnexpectedLp {
                    context: "parametric LP of the feasibility iterations",
                    status: LpStatus::Unbounded,
                    expected: "a bounded feasible set",
                })
            }
        }

        let w_next = &w_cur + &sol.x;
        debug_assert!(
            weighted_inf_norm(scaling, &(&w_next - &lin.base)) <= delta * (1.0 + 1e-9),
            "inner iterate left the outer trust region"
        );
        inner += 1;
        w_cur = w_next;
        match ev.constraint_pair(&w_cur) {
            Ok(pair) => {
                g = pair.0;
                h = pair.1;
            }
            Err(EvalError::NonFinite { .. }) => {
                return Ok(diverged(
                    w_cur,
                    ev.problem().n_g(),
                    ev.problem().n_h(),
                    inner,
                ))
            }
            Err(e) => return Err(e.into()),
        }
        v = infeasibility(&g, &h);
        history.push(v);
    }
}

fn diverged(w: DVector<f64>, n_g: usize, n_h: usize, inner: usize) -> FeasIterOutcome {
    FeasIterOutcome {
        w_hat: w,
        g: DVector::from_element(n_g, f64::NAN),
        h: DVector::from_element(n_h, f64::NAN),
        v: f64::NAN,
        success: false,
        inner_count: inner,
        failure_reason: FeasFailure::Watchdog,
    }
}
