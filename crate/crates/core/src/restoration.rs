//! l1 feasibility restoration: entered when the trust-region LP is
//! infeasible. Minimizes the elastic reformulation of the one-norm
//! violation with its own reduction ratio, and shrinks the tolerance-tube
//! when invoked from inside it (the anti-cycling safeguard).

use nalgebra::DVector;

use crate::error::SolverError;
use crate::lp::{build_restoration_lp, solve_lp, LpStatus};
use crate::problem::{
    restoration_infeasibility, weighted_inf_norm, Evaluator, Iterate, Linearization,
};
use crate::trust_region::{acceptance, delta_update, reduction_ratio, TrustRegionParams};
use crate::trust_region::EPS_PREDICTED;

/// Relative step size below which a restoration step counts as "small";
/// two consecutive small steps terminate the outer solver.
pub const SMALL_STEP_REL: f64 = 1e-10;

/// Diagnostics of one restoration step: the linearized l1 model value at
/// the trial point, the measured and predicted reductions, and their ratio.
#[derive(Clone, Copy, Debug)]
pub struct RestorationModel {
    pub v_r_base: f64,
    pub v_r_trial: f64,
    pub m_r_trial: f64,
    pub actual_reduction: f64,
    pub predicted_reduction: f64,
    pub rho: f64,
}

/// What one restoration step did to the solver state.
#[derive(Clone, Debug)]
pub struct RestorationOutcome {
    pub next: Iterate,
    pub accepted: bool,
    pub delta_after: f64,
    pub tau_after: f64,
    pub tube_shrunk: bool,
    /// The base point is (numerically) stationary for the violation model
    /// while still infeasible: the problem looks locally infeasible.
    pub stationary: bool,
    pub small_step: bool,
    pub trial_w: DVector<f64>,
    pub model: RestorationModel,
}

/// Linearized l1 violation model
/// `m_R(w) = ||g + J_g (w - base)||_1 + ||[h + J_h (w - base)]^+||_1`.
pub fn restoration_model_value(lin: &Linearization, w: &DVector<f64>) -> f64 {
    let step = w - &lin.base;
    let g_lin = &lin.g + &lin.jac_g * &step;
    let h_lin = &lin.h + &lin.jac_h * &step;
    restoration_infeasibility(&g_lin, &h_lin)
}

/// One restoration step from `cur`: solve the elastic LP, compute the
/// restoration ratio, update radius and iterate, and apply the tube
/// safeguard. `legacy` disables the tube interplay entirely.
#[allow(clippy::too_many_arguments)]
pub fn restoration_step(
    ev: &mut Evaluator<'_>,
    lin: &Linearization,
    cur: &Iterate,
    delta: f64,
    tau: f64,
    beta: f64,
    eps_feas: f64,
    tr: &TrustRegionParams,
    legacy: bool,
) -> Result<RestorationOutcome, SolverError> {
    let scaling = ev.problem().scaling();
    let n_w = ev.problem().n_w();
    let lp = build_restoration_lp(lin, delta, scaling);
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        // Feasible by construction and bounded below by zero.
        return Err(SolverError::UnexpectedLp {
            context: "elastic restoration LP",
            status: sol.status,
            expected: "Optimal",
        });
    }
    let d = DVector::from_fn(n_w, |i, _| sol.x[i]);
    let w_r = &cur.w + &d;

    let v_r_base = restoration_infeasibility(&cur.g, &cur.h);
    let m_r_trial = restoration_model_value(lin, &w_r);
    let predicted = v_r_base - m_r_trial;
    debug_assert!(
        predicted >= -crate::lp::EPS_LP * (1.0 + v_r_base),
        "restoration model reduction must be nonnegative at an LP optimum"
    );

    let small_step =
        weighted_inf_norm(scaling, &d) <= SMALL_STEP_REL * cur.w.amax().max(1.0);

    if predicted <= EPS_PREDICTED {
        // No linearized progress possible. With real violation left this is
        // the infeasible-stationary exit; otherwise the infeasibility of
        // the main LP came from the linearization geometry and the radius
        // logic elsewhere must resolve it.
        let stationary = v_r_base > eps_feas;
        return Ok(RestorationOutcome {
            next: cur.clone(),
            accepted: false,
            delta_after: delta,
            tau_after: tau,
            tube_shrunk: false,
            stationary,
            small_step,
            trial_w: w_r,
            model: RestorationModel {
                v_r_base,
                v_r_trial: v_r_base,
                m_r_trial,
                actual_reduction: 0.0,
                predicted_reduction: predicted,
                rho: f64::NAN,
            },
        });
    }

    let trial = ev.iterate(&w_r)?;
    let v_r_trial = restoration_infeasibility(&trial.g, &trial.h);
    let actual = v_r_base - v_r_trial;
    let rho = reduction_ratio(actual, predicted);

    let mut delta_after = delta_update(rho, &cur.w, &w_r, delta, scaling, tr);
    let was_in_tube = !legacy && cur.v <= beta * tau;
    let (mut next, mut accepted) = acceptance(rho, cur.clone(), trial, tr.sigma_accept);

    let mut tau_after = tau;
    let mut tube_shrunk = false;
    if was_in_tube && accepted {
        if next.v <= beta * tau {
            tau_after = beta * tau;
            tube_shrunk = true;
        } else {
            // Entered from inside the tube: the trial must stay inside,
            // otherwise it is rejected like any failed step.
            next = cur.clone();
            accepted = false;
            let step = weighted_inf_norm(scaling, &d);
            delta_after = if step > 0.0 {
                tr.alpha_shrink * step
            } else {
                tr.alpha_shrink * delta
            };
        }
    }

    Ok(RestorationOutcome {
        next,
        accepted,
        delta_after,
        tau_after,
        tube_shrunk,
        stationary: false,
        small_step,
        trial_w: w_r,
        model: RestorationModel {
            v_r_base,
            v_r_trial,
            m_r_trial,
            actual_reduction: actual,
            predicted_reduction: predicted,
            rho,
        },
    })
}
