//! Reduction ratios, the trust-region radius update, and the acceptance
//! test shared by all solver phases.

use nalgebra::{DMatrix, DVector};

use crate::error::SolverError;
use crate::problem::{weighted_inf_norm, Iterate};

/// Predicted reductions at or below this threshold are treated as
/// degenerate and mapped to the `+-inf` ratio sentinels.
pub const EPS_PREDICTED: f64 = 1e-14;

/// Relative tolerance for the "step hit the trust-region boundary" test in
/// [`delta_update`]; the paper's exact equality is not meaningful in
/// floating point.
const BOUNDARY_REL_TOL: f64 = 1e-12;

/// Which reduction pair produced a ratio: objective (phase II),
/// infeasibility (phase I), or the l1 restoration measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioKind {
    PhaseI,
    PhaseII,
    Restoration,
}

/// Parameters of the radius update and acceptance test.
#[derive(Clone, Copy, Debug)]
pub struct TrustRegionParams {
    /// Maximum radius (the paper's capital delta tilde).
    pub delta_max: f64,
    /// Shrink factor applied to the step length on poor steps.
    pub alpha_shrink: f64,
    /// Growth factor applied at the boundary on very good steps.
    pub alpha_grow: f64,
    /// Ratio below which the radius shrinks.
    pub eta_low: f64,
    /// Ratio above which the radius may grow.
    pub eta_high: f64,
    /// Acceptance threshold: trial accepted iff rho > sigma_accept.
    pub sigma_accept: f64,
    /// Radii below this terminate the outer solver.
    pub delta_min: f64,
}

impl Default for TrustRegionParams {
    fn default() -> Self {
        Self {
            delta_max: 10.0,
            alpha_shrink: 0.5,
            alpha_grow: 2.0,
            eta_low: 0.25,
            eta_high: 0.75,
            sigma_accept: 0.1,
            delta_min: 1e-12,
        }
    }
}

impl TrustRegionParams {
    pub fn validated(self) -> Result<Self, SolverError> {
        let bad = |msg: &str| Err(SolverError::BadConfig(msg.to_string()));
        if !(self.delta_max >= 1.0) {
            return bad("delta_max must be >= 1");
        }
        if !(self.alpha_shrink > 0.0 && self.alpha_shrink < 1.0) {
            return bad("alpha_shrink must lie in (0, 1)");
        }
        if !(self.alpha_grow > 1.0) {
            return bad("alpha_grow must be > 1");
        }
        if !(0.0 < self.eta_low && self.eta_low < self.eta_high && self.eta_high < 1.0) {
            return bad("thresholds must satisfy 0 < eta_low < eta_high < 1");
        }
        if !(self.sigma_accept > 0.0 && self.sigma_accept < 0.25) {
            return bad("sigma_accept must lie in (0, 1/4)");
        }
        if !(self.delta_min > 0.0) {
            return bad("delta_min must be positive");
        }
        Ok(self)
    }
}

/// Quotient of actual and predicted reduction. Degenerate predictions
/// (`predicted <= EPS_PREDICTED`) yield `-inf` when the actual reduction is
/// nonpositive and `+inf` otherwise; the sentinels keep the ratio total and
/// leave the veto to the caller's switching logic.
pub fn reduction_ratio(actual: f64, predicted: f64) -> f64 {
    if predicted > EPS_PREDICTED {
        actual / predicted
    } else if actual > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Radius update: shrink to `alpha_shrink * ||P (w_bar - w)||_inf` on poor
/// ratios, grow (capped at `delta_max`) on strong ratios with the step at
/// the trust-region boundary, keep otherwise. A zero-length step shrinks to
/// `alpha_shrink * delta` so the radius never collapses to exactly zero.
pub fn delta_update(
    rho: f64,
    w: &DVector<f64>,
    w_bar: &DVector<f64>,
    delta: f64,
    scaling: Option<&DMatrix<f64>>,
    params: &TrustRegionParams,
) -> f64 {
    let step = weighted_inf_norm(scaling, &(w_bar - w));
    if rho < params.eta_low {
        if step > 0.0 {
            params.alpha_shrink * step
        } else {
            params.alpha_shrink * delta
        }
    } else if rho > params.eta_high && (step - delta).abs() <= BOUNDARY_REL_TOL * delta {
        (params.alpha_grow * delta).min(params.delta_max)
    } else {
        delta
    }
}

/// Acceptance test: the trial replaces the current iterate iff
/// `rho > sigma_accept` (strict).
pub fn acceptance(
    rho: f64,
    current: Iterate,
    trial: Iterate,
    sigma_accept: f64,
) -> (Iterate, bool) {
    if rho > sigma_accept {
        (trial, true)
    } else {
        (current, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;

    fn iterate_at(w: DVector<f64>, f: f64) -> Iterate {
        Iterate::new(w, f, DVector::zeros(0), DVector::zeros(0))
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(reduction_ratio(0.5, 0.5), 1.0);
        assert_eq!(reduction_ratio(-0.1, 0.2), -0.5);
        // Degenerate predicted reduction with positive actual: +inf, which
        // the switching condition (not the ratio) has to veto.
        assert_eq!(reduction_ratio(0.3, -0.5), f64::INFINITY);
        assert_eq!(reduction_ratio(-0.5, -0.5), f64::NEG_INFINITY);
        assert_eq!(reduction_ratio(0.0, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn delta_update_shrinks_to_half_step() {
        let p = TrustRegionParams::default();
        let w = dvector![1.0, 3.0];
        let w_bar = dvector![-3.0, -0.3];
        // step length 4, alpha_shrink 0.5
        assert_eq!(delta_update(0.0, &w, &w_bar, 4.0, None, &p), 2.0);
    }

    #[test]
    fn delta_update_grows_at_boundary() {
        let p = TrustRegionParams::default();
        let w = dvector![0.0];
        let w_bar = dvector![1.0];
        assert_eq!(delta_update(0.9, &w, &w_bar, 1.0, None, &p), 2.0);
        // Interior step with the same ratio keeps the radius.
        assert_eq!(delta_update(0.9, &w, &w_bar, 2.0, None, &p), 2.0);
    }

    #[test]
    fn delta_update_keeps_radius_in_between() {
        let p = TrustRegionParams::default();
        let w = dvector![0.0];
        let w_bar = dvector![0.5];
        assert_eq!(delta_update(0.5, &w, &w_bar, 1.0, None, &p), 1.0);
    }

    #[test]
    fn delta_update_zero_step_guard() {
        let p = TrustRegionParams::default();
        let w = dvector![1.0];
        assert_eq!(delta_update(-1.0, &w, &w.clone(), 1.0, None, &p), 0.5);
    }

    #[test]
    fn growth_capped_at_delta_max() {
        let p = TrustRegionParams::default();
        let w = dvector![0.0];
        let w_bar = dvector![8.0];
        assert_eq!(delta_update(1.0, &w, &w_bar, 8.0, None, &p), 10.0);
    }

    #[test]
    fn acceptance_examples() {
        let cur = iterate_at(dvector![0.0], 1.0);
        let trial = iterate_at(dvector![1.0], 0.0);

        let (kept, ok) = acceptance(1.0, cur.clone(), trial.clone(), 0.1);
        assert!(ok);
        assert_eq!(kept.w, trial.w);

        let (kept, ok) = acceptance(f64::NEG_INFINITY, cur.clone(), trial.clone(), 0.1);
        assert!(!ok);
        assert_eq!(kept.w, cur.w);

        // Strict inequality: rho == sigma rejects.
        let (kept, ok) = acceptance(0.1, cur.clone(), trial.clone(), 0.1);
        assert!(!ok);
        assert_eq!(kept.w, cur.w);
    }

    #[test]
    fn params_validation() {
        assert!(TrustRegionParams::default().validated().is_ok());
        let bad = TrustRegionParams {
            eta_low: 0.9,
            ..TrustRegionParams::default()
        };
        assert!(bad.validated().is_err());
        let bad = TrustRegionParams {
            sigma_accept: 0.3,
            ..TrustRegionParams::default()
        };
        assert!(bad.validated().is_err());
    }

    proptest! {
        #[test]
        fn update_stays_in_range(
            rho in -2.0f64..2.0,
            step in 0.0f64..1.0,
            delta in 1e-6f64..10.0,
        ) {
            let p = TrustRegionParams::default();
            let w = dvector![0.0];
            let w_bar = dvector![step * delta];
            let next = delta_update(rho, &w, &w_bar, delta, None, &p);
            prop_assert!(next > 0.0);
            prop_assert!(next <= p.delta_max);
            if rho < p.eta_low && step > 0.0 {
                prop_assert!(next < step * delta + 1e-15);
            }
        }

        #[test]
        fn acceptance_monotone_in_rho(
            rho_lo in -1.0f64..1.0,
            bump in 0.0f64..1.0,
        ) {
            let cur = iterate_at(dvector![0.0], 1.0);
            let trial = iterate_at(dvector![1.0], 0.0);
            let (_, lo) = acceptance(rho_lo, cur.clone(), trial.clone(), 0.1);
            let (_, hi) = acceptance(rho_lo + bump, cur, trial, 0.1);
            // Increasing rho never turns an accept into a reject.
            prop_assert!(!(lo && !hi));
        }
    }
}
