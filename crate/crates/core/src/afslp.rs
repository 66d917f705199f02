//! Almost-feasible SLP: a two-phase driver that first reduces
//! infeasibility until the iterates enter a tolerance-tube around the
//! feasible set, then optimizes while keeping every accepted iterate
//! inside the (shrinking) tube. Infeasible subproblems divert to the l1
//! restoration phase.

use nalgebra::DVector;

use crate::error::SolverError;
use crate::feasibility::{feas_iterations, FeasIterParams};
use crate::lp::{build_trust_region_lp, solve_lp, LpStatus};
use crate::problem::{weighted_inf_norm, Evaluator, Iterate, NlpProblem};
use crate::report::{IterationEvent, Phase, SolverResult, SolverStatus};
use crate::restoration::restoration_step;
use crate::trust_region::{
    acceptance, delta_update, reduction_ratio, RatioKind, TrustRegionParams, EPS_PREDICTED,
};

/// Tolerance-tube state: current width and the shrink factor.
#[derive(Clone, Copy, Debug)]
pub struct ToleranceTube {
    pub tau: f64,
    pub beta: f64,
}

impl ToleranceTube {
    /// Membership bound for phase classification and trial acceptance.
    pub fn bound(&self) -> f64 {
        self.beta * self.tau
    }

    pub fn shrink(&mut self) {
        self.tau *= self.beta;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AfslpConfig {
    pub delta0: f64,
    /// Initial tube width. The worked problems use values up to 1.2, so
    /// only positivity is required.
    pub tau0: f64,
    pub beta: f64,
    /// Switching-condition factor, in (0, 1).
    pub sigma_switch: f64,
    /// Feasibility tolerance of the termination test.
    pub eps_feas: f64,
    /// Stationarity tolerance of the termination test.
    pub eps_opt: f64,
    pub max_outer: usize,
    pub trust_region: TrustRegionParams,
    pub feas: FeasIterParams,
    /// Reproduce the original tolerance-tube method: membership tested
    /// against tau itself, no switching condition, raw reduction
    /// quotients, a single second-order correction, and no tube shrink.
    /// Exists for the cycling regression; not useful as a solver.
    pub legacy: bool,
}

impl Default for AfslpConfig {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            tau0: 1e-3,
            beta: 0.9,
            sigma_switch: 0.1,
            eps_feas: 1e-7,
            eps_opt: 1e-7,
            max_outer: 1000,
            trust_region: TrustRegionParams::default(),
            feas: FeasIterParams::default(),
            legacy: false,
        }
    }
}

impl AfslpConfig {
    pub fn validated(self) -> Result<Self, SolverError> {
        let tr = self.trust_region.validated()?;
        let feas = self.feas.validated()?;
        let bad = |msg: &str| Err(SolverError::BadConfig(msg.to_string()));
        if !(self.delta0 > 0.0 && self.delta0 <= tr.delta_max) {
            return bad("delta0 must lie in (0, delta_max]");
        }
        if !(self.tau0 > 0.0) {
            return bad("tau0 must be positive");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.sigma_switch > 0.0 && self.sigma_switch < 1.0) {
            return bad("sigma_switch must lie in (0, 1)");
        }
        if !(self.eps_feas > 0.0 && self.eps_feas < 1.0) {
            return bad("eps_feas must lie in (0, 1)");
        }
        if !(self.eps_opt > 0.0 && self.eps_opt < 1.0) {
            return bad("eps_opt must lie in (0, 1)");
        }
        Ok(Self {
            trust_region: tr,
            feas,
            ..self
        })
    }
}

/// Dual termination test: feasible to `eps_feas` and stationary to
/// `eps_opt` in the LP model value at the subproblem solution.
pub fn check_termination(v: f64, m_f_bar: f64, eps_feas: f64, eps_opt: f64) -> bool {
    v <= eps_feas && m_f_bar.abs() <= eps_opt
}

/// Raw reduction quotient of the original tolerance-tube method: no sign
/// handling, degenerate predictions count as a perfect step. This is the
/// hazard the switching condition was introduced to remove.
fn legacy_ratio(actual: f64, predicted: f64) -> f64 {
    if predicted.abs() > EPS_PREDICTED {
        actual / predicted
    } else {
        1.0
    }
}

pub fn solve_afslp(
    problem: &NlpProblem,
    w0: &DVector<f64>,
    config: &AfslpConfig,
) -> Result<SolverResult, SolverError> {
    solve_afslp_observed(problem, w0, config, |_| {})
}

/// Like [`solve_afslp`], invoking `observer` once per outer iteration.
/// The starting point may be arbitrarily infeasible; phase I takes care
/// of reaching the tube.
pub fn solve_afslp_observed(
    problem: &NlpProblem,
    w0: &DVector<f64>,
    config: &AfslpConfig,
    mut observer: impl FnMut(&IterationEvent),
) -> Result<SolverResult, SolverError> {
    let config = config.validated()?;
    let tr = &config.trust_region;
    let scaling = problem.scaling();
    let mut ev = Evaluator::new(problem);

    let mut cur = match ev.iterate(w0) {
        Ok(it) => it,
        Err(_) => {
            return Ok(SolverResult {
                w_final: w0.clone(),
                f_final: f64::NAN,
                v_final: f64::NAN,
                status: SolverStatus::EvaluationError,
                outer_iterations: 0,
                counters: ev.counters(),
                trace: Vec::new(),
            })
        }
    };

    let mut delta = config.delta0;
    let mut tube = ToleranceTube {
        tau: config.tau0,
        beta: config.beta,
    };
    let feas_params = if config.legacy {
        FeasIterParams {
            max_inner: 1,
            ..config.feas
        }
    } else {
        config.feas
    };
    let mut consecutive_small_restoration_steps = 0usize;
    let mut trace = Vec::new();
    let mut status = SolverStatus::MaxIterations;

    for k in 0..config.max_outer {
        if delta < tr.delta_min {
            status = SolverStatus::RadiusTooSmall;
            break;
        }
        let lin = match ev.linearize_at(&cur) {
            Ok(lin) => lin,
            Err(_) => {
                status = SolverStatus::EvaluationError;
                break;
            }
        };
        let lp = build_trust_region_lp(&lin, delta, scaling);
        let sol = solve_lp(&lp)?;
        let tube_bound = if config.legacy {
            tube.tau
        } else {
            tube.bound()
        };

        let mut event = IterationEvent {
            k,
            phase: Phase::PhaseII,
            lp_status: String::new(),
            w: cur.w.clone(),
            w_bar: None,
            model_value: None,
            rho: f64::NAN,
            ratio_kind: None,
            v: cur.v,
            f: cur.f,
            delta_before: delta,
            delta_after: delta,
            tau_before: tube.tau,
            tau_after: tube.tau,
            accepted: false,
            inner_count: 0,
            feas_failure: None,
            switching_vetoed: false,
            tube_shrunk: false,
            w_next: cur.w.clone(),
            counters: ev.counters(),
        };

        match sol.status {
            LpStatus::Unbounded => {
                return Err(SolverError::UnexpectedLp {
                    context: "trust-region LP",
                    status: LpStatus::Unbounded,
                    expected: "Optimal or Infeasible",
                })
            }
            LpStatus::Infeasible => {
                event.phase = Phase::Restoration;
                event.lp_status = "infeasible".into();
                let out = match restoration_step(
                    &mut ev,
                    &lin,
                    &cur,
                    delta,
                    tube.tau,
                    tube.beta,
                    config.eps_feas,
                    tr,
                    config.legacy,
                ) {
                    Ok(out) => out,
                    Err(SolverError::Evaluation(_)) => {
                        status = SolverStatus::EvaluationError;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                event.w_bar = Some(out.trial_w.clone());
                event.rho = out.model.rho;
                event.ratio_kind = Some(RatioKind::Restoration);
                event.accepted = out.accepted;
                event.delta_after = out.delta_after;
                event.tau_after = out.tau_after;
                event.tube_shrunk = out.tube_shrunk;

                delta = out.delta_after;
                tube.tau = out.tau_after;
                cur = out.next;

                if out.small_step {
                    consecutive_small_restoration_steps += 1;
                } else {
                    consecutive_small_restoration_steps = 0;
                }

                let stop_small = consecutive_small_restoration_steps >= 2;
                if out.stationary || stop_small {
                    let infeasible = crate::problem::restoration_infeasibility(&cur.g, &cur.h)
                        > config.eps_feas;
                    status = if infeasible {
                        SolverStatus::InfeasibleStationary
                    } else {
                        SolverStatus::RadiusTooSmall
                    };
                    event.w_next = cur.w.clone();
                    event.counters = ev.counters();
                    trace.push(event.to_record());
                    observer(&event);
                    break;
                }
            }
            LpStatus::Optimal => {
                consecutive_small_restoration_steps = 0;
                event.lp_status = "optimal".into();
                let w_bar = &cur.w + &sol.x;
                let m_f_bar = sol.objective;
                event.w_bar = Some(w_bar.clone());
                event.model_value = Some(m_f_bar);

                if cur.v > tube_bound {
                    // Phase I: pure infeasibility reduction, trial taken
                    // directly at the LP solution.
                    event.phase = Phase::PhaseI;
                    let trial = match ev.iterate(&w_bar) {
                        Ok(it) => it,
                        Err(_) => {
                            status = SolverStatus::EvaluationError;
                            break;
                        }
                    };
                    let actual = cur.v - trial.v;
                    let predicted = cur.v;
                    let rho = if config.legacy {
                        legacy_ratio(actual, predicted)
                    } else {
                        reduction_ratio(actual, predicted)
                    };
                    let delta_after = delta_update(rho, &cur.w, &w_bar, delta, scaling, tr);
                    let (next, accepted) = acceptance(rho, cur, trial, tr.sigma_accept);
                    cur = next;
                    event.rho = rho;
                    event.ratio_kind = Some(RatioKind::PhaseI);
                    event.accepted = accepted;
                    event.delta_after = delta_after;
                    delta = delta_after;
                } else {
                    // Phase II.
                    event.phase = Phase::PhaseII;
                    if check_termination(cur.v, m_f_bar, config.eps_feas, config.eps_opt) {
                        status = SolverStatus::Converged;
                        event.counters = ev.counters();
                        trace.push(event.to_record());
                        observer(&event);
                        break;
                    }
                    // The l = 0 check of the feasibility iterations is
                    // exactly the direct-acceptance test v(w_bar) <= bound,
                    // so both trial paths go through one call.
                    let feas = match feas_iterations(
                        &mut ev,
                        &lin,
                        &cur.w,
                        &w_bar,
                        delta,
                        tube_bound,
                        &feas_params,
                    ) {
                        Ok(out) => out,
                        Err(SolverError::Evaluation(_)) => {
                            status = SolverStatus::EvaluationError;
                            break;
                        }
                        Err(e) => return Err(e),
                    };
                    event.inner_count = feas.inner_count;

                    let predicted = -m_f_bar;
                    let switching_ok =
                        config.legacy || predicted >= config.sigma_switch * cur.v;
                    if feas.success && switching_ok {
                        let f_hat = match ev.objective(&feas.w_hat) {
                            Ok(f) => f,
                            Err(_) => {
                                status = SolverStatus::EvaluationError;
                                break;
                            }
                        };
                        let trial = Iterate::new(feas.w_hat.clone(), f_hat, feas.g, feas.h);
                        let actual = cur.f - trial.f;
                        let rho = if config.legacy {
                            legacy_ratio(actual, predicted)
                        } else {
                            reduction_ratio(actual, predicted)
                        };
                        let delta_after = delta_update(rho, &cur.w, &w_bar, delta, scaling, tr);
                        let (next, accepted) = acceptance(rho, cur, trial, tr.sigma_accept);
                        cur = next;
                        event.rho = rho;
                        event.ratio_kind = Some(RatioKind::PhaseII);
                        event.accepted = accepted;
                        event.delta_after = delta_after;
                        delta = delta_after;
                    } else {
                        if !feas.success {
                            event.feas_failure = Some(feas.failure_reason);
                        }
                        event.switching_vetoed = feas.success && !switching_ok;
                        let step = weighted_inf_norm(scaling, &(&w_bar - &cur.w));
                        delta = tr.alpha_shrink * step;
                        event.delta_after = delta;
                    }
                }
            }
        }

        event.w_next = cur.w.clone();
        event.counters = ev.counters();
        trace.push(event.to_record());
        observer(&event);
    }

    Ok(SolverResult {
        w_final: cur.w.clone(),
        f_final: cur.f,
        v_final: cur.v,
        status,
        outer_iterations: trace.len(),
        counters: ev.counters(),
        trace,
    })
}
