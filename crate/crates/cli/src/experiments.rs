//! The benchmark experiments: the sphere radius probe, the cycling
//! comparison, and the tau sweep.

use std::time::Instant;

use afslp_core::afslp::{solve_afslp, AfslpConfig};
use afslp_core::error::SolverError;
use afslp_core::feasibility::{feas_iterations, FeasIterParams};
use afslp_core::fslp::{solve_fslp, FslpConfig};
use afslp_core::library::{make_cycling_example, make_sphere, problem_by_name};
use afslp_core::lp::{build_trust_region_lp, solve_lp, LpStatus};
use afslp_core::problem::Evaluator;
use afslp_core::report::{SolverResult, SolverStatus};
use nalgebra::DVector;

use crate::output::{summarize, RunSummary};

/// Single-outer-iteration probe: linearize the sphere problem at its
/// canonical start, solve the trust-region LP, and run the feasibility
/// iterations at the given radius.
pub fn sphere_probe(n: usize, delta: f64, tau: f64, params: &FeasIterParams) -> Result<bool, SolverError> {
    let lib = make_sphere(n);
    let mut ev = Evaluator::new(&lib.problem);
    let lin = ev.linearize(&lib.default_start)?;
    let lp = build_trust_region_lp(&lin, delta, lib.problem.scaling());
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(false);
    }
    let w_bar = &lib.default_start + &sol.x;
    let out = feas_iterations(
        &mut ev,
        &lin,
        &lib.default_start,
        &w_bar,
        delta,
        tau,
        params,
    )?;
    Ok(out.success)
}

/// Largest radius on the halving grid from `delta_start` at which the
/// feasibility iterations still converge. Returns zero when even the
/// smallest probed radius fails.
pub fn sphere_max_radius(
    n: usize,
    delta_start: f64,
    tau: f64,
    params: &FeasIterParams,
) -> Result<f64, SolverError> {
    let mut delta = delta_start;
    for _ in 0..60 {
        if sphere_probe(n, delta, tau, params)? {
            return Ok(delta);
        }
        delta /= 2.0;
    }
    Ok(0.0)
}

pub struct CyclingOutcome {
    pub afslp_from_a: SolverResult,
    pub afslp_from_b: SolverResult,
    pub legacy: SolverResult,
    pub afslp_converged_both: bool,
    pub legacy_periods: usize,
}

/// The two cycling points of the worked example.
pub fn cycling_points() -> (DVector<f64>, DVector<f64>) {
    (
        DVector::from_vec(vec![-0.25, -0.9]),
        DVector::from_vec(vec![0.75, -0.4]),
    )
}

/// Count full a -> b -> a revisit periods in the iterate sequence of a
/// trace (consecutive duplicates compressed), matching points to `tol`.
pub fn count_cycle_periods(
    trace: &[afslp_core::report::IterationRecord],
    a: &DVector<f64>,
    b: &DVector<f64>,
    tol: f64,
) -> usize {
    let mut compressed: Vec<DVector<f64>> = Vec::new();
    for row in trace {
        let Some(w) = &row.w else { continue };
        let w = DVector::from_vec(w.clone());
        if compressed
            .last()
            .map_or(true, |last| (&w - last).amax() > 1e-12)
        {
            compressed.push(w);
        }
    }
    let near = |w: &DVector<f64>, p: &DVector<f64>| (w - p).amax() <= tol;
    let mut periods = 0;
    let mut idx = 0;
    while idx + 2 < compressed.len() {
        if near(&compressed[idx], a) && near(&compressed[idx + 1], b) && near(&compressed[idx + 2], a)
        {
            periods += 1;
            idx += 2;
        } else {
            idx += 1;
        }
    }
    periods
}

/// Run afSLP from both cycling starts plus the legacy tolerance-tube
/// method from the first one.
pub fn run_cycling_experiment(
    delta0: f64,
    tau0: f64,
    beta: f64,
) -> Result<CyclingOutcome, SolverError> {
    let lib = make_cycling_example();
    let (a, b) = cycling_points();
    let config = AfslpConfig {
        delta0,
        tau0,
        beta,
        ..AfslpConfig::default()
    };
    let afslp_from_a = solve_afslp(&lib.problem, &a, &config)?;
    let afslp_from_b = solve_afslp(&lib.problem, &b, &config)?;
    let legacy_config = AfslpConfig {
        delta0,
        tau0: 1.0,
        max_outer: 40,
        legacy: true,
        ..AfslpConfig::default()
    };
    let legacy = solve_afslp(&lib.problem, &a, &legacy_config)?;

    let afslp_converged_both = afslp_from_a.status == SolverStatus::Converged
        && afslp_from_b.status == SolverStatus::Converged;
    let legacy_periods = count_cycle_periods(&legacy.trace, &a, &b, 1e-9);
    Ok(CyclingOutcome {
        afslp_from_a,
        afslp_from_b,
        legacy,
        afslp_converged_both,
        legacy_periods,
    })
}

/// Table-style sweep: FSLP once at tau = 1e-8, then afSLP at every initial
/// tube width in `tau_list`. `repeat` controls how many timed repetitions
/// feed the average wall time; the solves are deterministic, so counters
/// come from a single run.
pub fn run_tau_sweep(
    problem_name: &str,
    tau_list: &[f64],
    delta0: f64,
    repeat: usize,
) -> Result<Vec<RunSummary>, SolverError> {
    let lib = problem_by_name(problem_name)
        .ok_or_else(|| SolverError::BadConfig(format!("unknown problem `{problem_name}`")))?;
    let repeat = repeat.max(1);
    let mut rows = Vec::new();

    let fslp_tau = 1e-8;
    let config = FslpConfig {
        delta0,
        tau: fslp_tau,
        ..FslpConfig::default()
    };
    let mut result = solve_fslp(&lib.problem, &lib.default_start, &config)?;
    let start = Instant::now();
    for _ in 1..repeat {
        result = solve_fslp(&lib.problem, &lib.default_start, &config)?;
    }
    let wall = average_wall(start.elapsed().as_secs_f64(), repeat, || {
        solve_fslp(&lib.problem, &lib.default_start, &config).map(|_| ())
    })?;
    rows.push(summarize(
        problem_name,
        "fslp",
        &result,
        wall,
        fslp_tau,
        delta0,
    ));

    for &tau0 in tau_list {
        let config = AfslpConfig {
            delta0,
            tau0,
            ..AfslpConfig::default()
        };
        let mut result = solve_afslp(&lib.problem, &lib.default_start, &config)?;
        let start = Instant::now();
        for _ in 1..repeat {
            result = solve_afslp(&lib.problem, &lib.default_start, &config)?;
        }
        let wall = average_wall(start.elapsed().as_secs_f64(), repeat, || {
            solve_afslp(&lib.problem, &lib.default_start, &config).map(|_| ())
        })?;
        rows.push(summarize(problem_name, "afslp", &result, wall, tau0, delta0));
    }
    Ok(rows)
}

fn average_wall(
    elapsed_repeats: f64,
    repeat: usize,
    one_more: impl FnOnce() -> Result<(), SolverError>,
) -> Result<f64, SolverError> {
    if repeat > 1 {
        Ok(elapsed_repeats / (repeat - 1) as f64)
    } else {
        let start = Instant::now();
        one_more()?;
        Ok(start.elapsed().as_secs_f64())
    }
}
