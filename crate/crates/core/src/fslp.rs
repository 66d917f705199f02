//! Feasible SLP: every accepted iterate is projected back to the feasible
//! set (to tolerance `tau`) by the feasibility iterations, so the objective
//! itself serves as the merit function.

use nalgebra::DVector;

use crate::error::SolverError;
use crate::feasibility::{feas_iterations, FeasIterParams};
use crate::lp::{build_trust_region_lp, solve_lp, LpStatus};
use crate::problem::{weighted_inf_norm, Evaluator, NlpProblem};
use crate::report::{IterationEvent, Phase, SolverResult, SolverStatus};
use crate::trust_region::{acceptance, delta_update, reduction_ratio, RatioKind, TrustRegionParams};

#[derive(Clone, Copy, Debug)]
pub struct FslpConfig {
    /// Initial trust-region radius, in (0, delta_max].
    pub delta0: f64,
    /// Feasibility tolerance kept by every accepted iterate.
    pub tau: f64,
    /// Termination tolerance on |m_f(w_bar)|.
    pub sigma_outer: f64,
    pub max_outer: usize,
    pub trust_region: TrustRegionParams,
    pub feas: FeasIterParams,
}

impl Default for FslpConfig {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            tau: 1e-8,
            sigma_outer: 1e-7,
            max_outer: 1000,
            trust_region: TrustRegionParams::default(),
            feas: FeasIterParams::default(),
        }
    }
}

impl FslpConfig {
    pub fn validated(self) -> Result<Self, SolverError> {
        let tr = self.trust_region.validated()?;
        let feas = self.feas.validated()?;
        if !(self.delta0 > 0.0 && self.delta0 <= tr.delta_max) {
            return Err(SolverError::BadConfig(
                "delta0 must lie in (0, delta_max]".into(),
            ));
        }
        if !(self.tau > 0.0) {
            return Err(SolverError::BadConfig("tau must be positive".into()));
        }
        if !(self.sigma_outer > 0.0) {
            return Err(SolverError::BadConfig(
                "sigma_outer must be positive".into(),
            ));
        }
        Ok(Self {
            trust_region: tr,
            feas,
            ..self
        })
    }
}

pub fn solve_fslp(
    problem: &NlpProblem,
    w0: &DVector<f64>,
    config: &FslpConfig,
) -> Result<SolverResult, SolverError> {
    solve_fslp_observed(problem, w0, config, |_| {})
}

/// Like [`solve_fslp`], invoking `observer` once per outer iteration.
pub fn solve_fslp_observed(
    problem: &NlpProblem,
    w0: &DVector<f64>,
    config: &FslpConfig,
    mut observer: impl FnMut(&IterationEvent),
) -> Result<SolverResult, SolverError> {
    let config = config.validated()?;
    let tr = &config.trust_region;
    let scaling = problem.scaling();
    let mut ev = Evaluator::new(problem);

    let mut cur = ev.iterate(w0)?;
    if cur.v > config.tau {
        return Err(SolverError::InfeasibleStart {
            v: cur.v,
            tau: config.tau,
        });
    }

    let mut delta = config.delta0;
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
        if sol.status != LpStatus::Optimal {
            // At a feasible base the zero step is LP-feasible up to tau, so
            // this indicates a genuine subproblem solver failure.
            return Err(SolverError::UnexpectedLp {
                context: "trust-region LP at a feasible base point",
                status: sol.status,
                expected: "Optimal",
            });
        }
        let w_bar = &cur.w + &sol.x;
        let m_f_bar = sol.objective;

        let mut event = IterationEvent {
            k,
            phase: Phase::Fslp,
            lp_status: "optimal".into(),
            w: cur.w.clone(),
            w_bar: Some(w_bar.clone()),
            model_value: Some(m_f_bar),
            rho: f64::NAN,
            ratio_kind: None,
            v: cur.v,
            f: cur.f,
            delta_before: delta,
            delta_after: delta,
            tau_before: config.tau,
            tau_after: config.tau,
            accepted: false,
            inner_count: 0,
            feas_failure: None,
            switching_vetoed: false,
            tube_shrunk: false,
            w_next: cur.w.clone(),
            counters: ev.counters(),
        };

        if m_f_bar.abs() <= config.sigma_outer {
            status = SolverStatus::Converged;
            event.counters = ev.counters();
            trace.push(event.to_record());
            observer(&event);
            break;
        }

        let feas = match feas_iterations(&mut ev, &lin, &cur.w, &w_bar, delta, config.tau, &config.feas) {
            Ok(out) => out,
            Err(SolverError::Evaluation(_)) => {
                status = SolverStatus::EvaluationError;
                break;
            }
            Err(e) => return Err(e),
        };
        event.inner_count = feas.inner_count;

        if feas.success {
            let f_hat = match ev.objective(&feas.w_hat) {
                Ok(f) => f,
                Err(_) => {
                    status = SolverStatus::EvaluationError;
                    break;
                }
            };
            let trial = crate::problem::Iterate::new(feas.w_hat.clone(), f_hat, feas.g, feas.h);
            let actual = cur.f - trial.f;
            let predicted = -m_f_bar;
            let rho = reduction_ratio(actual, predicted);
            let delta_after = delta_update(rho, &cur.w, &w_bar, delta, scaling, tr);
            let (next, accepted) = acceptance(rho, cur, trial, tr.sigma_accept);
            cur = next;
            event.rho = rho;
            event.ratio_kind = Some(RatioKind::PhaseII);
            event.accepted = accepted;
            event.delta_after = delta_after;
            delta = delta_after;
        } else {
            event.feas_failure = Some(feas.failure_reason);
            let step = weighted_inf_norm(scaling, &(&w_bar - &cur.w));
            delta = tr.alpha_shrink * step;
            event.delta_after = delta;
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
