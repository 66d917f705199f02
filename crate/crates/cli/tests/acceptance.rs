//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured numbers (run with `--nocapture` to see them).

use std::time::Instant;

use afslp_cli::experiments::{run_cycling_experiment, sphere_max_radius};
use afslp_core::afslp::{solve_afslp, solve_afslp_observed, AfslpConfig};
use afslp_core::feasibility::{FeasFailure, FeasIterParams};
use afslp_core::fslp::{solve_fslp, solve_fslp_observed, FslpConfig};
use afslp_core::library::{
    make_cycling_example, make_double_integrator_tocp, make_l1_relaxed, make_parabola_example,
    make_sphere,
};
use afslp_core::lp::{build_restoration_lp, solve_lp, LpProblem, LpStatus};
use afslp_core::problem::{Evaluator, Linearization};
use afslp_core::report::{IterationEvent, Phase, SolverStatus};
use nalgebra::{DMatrix, DVector, dvector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use test_oracles::{best_vertex, central_diff_jacobian, VertexVerdict};

/// Criterion 1: the worked first iteration of the parabola example. The
/// trust-region LP solution is the exact vertex (-3, -0.3), the first
/// feasibility-iteration PLP is infeasible, and the failure branch shrinks
/// the radius to 2.
#[test]
fn criterion_1_worked_example_first_iteration() {
    let start = Instant::now();
    let lib = make_parabola_example();
    let config = FslpConfig {
        delta0: 4.0,
        max_outer: 1,
        ..FslpConfig::default()
    };
    let mut events: Vec<IterationEvent> = Vec::new();
    let res = solve_fslp_observed(&lib.problem, &dvector![1.0, 3.0], &config, |e| {
        events.push(e.clone())
    })
    .unwrap();
    let e = &events[0];
    let w_bar = e.w_bar.as_ref().unwrap();
    assert!((w_bar[0] - (-3.0)).abs() <= 1e-9, "w_bar = {w_bar}");
    assert!((w_bar[1] - (-0.3)).abs() <= 1e-9, "w_bar = {w_bar}");
    assert_eq!(e.feas_failure, Some(FeasFailure::PlpInfeasible));
    assert!((e.delta_after - 2.0).abs() <= 1e-12);
    assert_eq!(res.w_final, dvector![1.0, 3.0]);
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "took {dt:?}");
    println!(
        "ACCEPTANCE criterion 1: PASS (LP vertex ({:.10}, {:.10}), PLP infeasible, delta -> {}) in {dt:?}",
        w_bar[0], w_bar[1], e.delta_after
    );
}

/// Criterion 2: FSLP converges on the parabola example to the origin with
/// every accepted iterate feasible to 1e-8.
#[test]
fn criterion_2_fslp_parabola_convergence() {
    let start = Instant::now();
    let lib = make_parabola_example();
    let config = FslpConfig {
        delta0: 4.0,
        ..FslpConfig::default()
    };
    let mut ev = Evaluator::new(&lib.problem);
    let mut feasible = true;
    let res = solve_fslp_observed(&lib.problem, &dvector![1.0, 3.0], &config, |e| {
        if e.accepted {
            let it = Evaluator::new(&lib.problem).iterate(&e.w_next).unwrap();
            if it.v > 1e-8 {
                feasible = false;
            }
        }
    })
    .unwrap();
    assert_eq!(res.status, SolverStatus::Converged);
    assert!(res.f_final.abs() <= 1e-6, "f_final = {}", res.f_final);
    assert!(feasible, "an accepted iterate violated v <= 1e-8");
    let check = ev.iterate(&res.w_final).unwrap();
    assert!(check.v <= 1e-8);
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "took {dt:?}");
    println!(
        "ACCEPTANCE criterion 2: PASS (f_final = {:.3e}, v_final = {:.3e}) in {dt:?}",
        res.f_final, res.v_final
    );
}

/// Criterion 3: cycling regression. Legacy mode alternates between the
/// two cycling points at least three times (to 1e-9); afSLP with
/// tau0 = 1.2, beta = 0.9 converges from both starts to within 1e-4 of
/// the analytic active-set root.
#[test]
fn criterion_3_cycling_regression() {
    let start = Instant::now();
    let outcome = run_cycling_experiment(1.0, 1.2, 0.9).unwrap();
    assert!(
        outcome.legacy_periods >= 3,
        "legacy revisit periods = {}",
        outcome.legacy_periods
    );
    let root = (1.0 - 0.85f64.sqrt()) / 2.0;
    for res in [&outcome.afslp_from_a, &outcome.afslp_from_b] {
        assert_eq!(res.status, SolverStatus::Converged);
        assert!((res.w_final[0] - root).abs() <= 1e-4, "w = {}", res.w_final);
        assert!((res.w_final[1] - root).abs() <= 1e-4);
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "took {dt:?}");
    println!(
        "ACCEPTANCE criterion 3: PASS (legacy periods = {}, afSLP reached ({:.5}, {:.5})) in {dt:?}",
        outcome.legacy_periods, outcome.afslp_from_a.w_final[0], outcome.afslp_from_a.w_final[1]
    );
}

/// Criterion 4: maximum converging radius of the feasibility iterations on
/// the sphere problem decreases with dimension (nonincreasing over the
/// probe list within one halving step, strictly smaller at n = 200 than at
/// n = 2).
#[test]
fn criterion_4_sphere_radius_trend() {
    let start = Instant::now();
    let ns = [2usize, 10, 50, 100, 200];
    let params = FeasIterParams::default();
    let radii: Vec<f64> = ns
        .iter()
        .map(|&n| sphere_max_radius(n, 10.0, 1e-8, &params).unwrap())
        .collect();
    for w in radii.windows(2) {
        assert!(
            w[1] <= w[0] * 2.0 * (1.0 + 1e-12),
            "radius sequence increased by more than one halving step: {radii:?}"
        );
    }
    assert!(radii[0] > 0.0);
    assert!(
        radii[4] < radii[0],
        "expected a strict decrease from n=2 to n=200: {radii:?}"
    );
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "took {dt:?}");
    println!("ACCEPTANCE criterion 4: PASS (radii {radii:?}) in {dt:?}");
}

/// Criterion 5: on the distance-1 double-integrator problem with 40
/// intervals, afSLP at tau0 = 1e-4 uses strictly fewer constraint-pair
/// evaluations than FSLP at tau = 1e-8; both converge with v <= 1e-7 and a
/// final time within 2% of the continuous optimum 2.
#[test]
fn criterion_5_tocp_evaluation_trend() {
    let start = Instant::now();
    let (fslp_res, afslp_res) = std::thread::scope(|scope| {
        let fslp_handle = scope.spawn(|| {
            let lib = make_double_integrator_tocp(40, 1.0);
            let config = FslpConfig {
                delta0: 1.0,
                tau: 1e-8,
                ..FslpConfig::default()
            };
            solve_fslp(&lib.problem, &lib.default_start, &config).unwrap()
        });
        let afslp_handle = scope.spawn(|| {
            let lib = make_double_integrator_tocp(40, 1.0);
            let config = AfslpConfig {
                delta0: 1.0,
                tau0: 1e-4,
                ..AfslpConfig::default()
            };
            solve_afslp(&lib.problem, &lib.default_start, &config).unwrap()
        });
        (fslp_handle.join().unwrap(), afslp_handle.join().unwrap())
    });

    assert_eq!(fslp_res.status, SolverStatus::Converged);
    assert_eq!(afslp_res.status, SolverStatus::Converged);
    assert!(fslp_res.v_final <= 1e-7);
    assert!(afslp_res.v_final <= 1e-7);
    let pairs_fslp = fslp_res.counters.n_constraint_pairs;
    let pairs_afslp = afslp_res.counters.n_constraint_pairs;
    assert!(
        pairs_afslp < pairs_fslp,
        "afSLP used {pairs_afslp} pairs vs FSLP {pairs_fslp}"
    );
    for res in [&fslp_res, &afslp_res] {
        let t_final = res.w_final[res.w_final.len() - 1];
        assert!(
            (t_final - 2.0).abs() / 2.0 <= 0.02,
            "final time {t_final} departs from the continuous optimum"
        );
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "took {dt:?}");
    println!(
        "ACCEPTANCE criterion 5: PASS (afSLP {pairs_afslp} vs FSLP {pairs_fslp} constraint-pair evals, T = {:.4}) in {dt:?}",
        afslp_res.w_final[afslp_res.w_final.len() - 1]
    );
}

/// Criterion 6a: the simplex matches exhaustive vertex enumeration on 500
/// random bounded LPs with up to 4 variables and 6 rows.
#[test]
fn criterion_6a_lp_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = |rng: &mut ChaCha8Rng| (rng.random_range(-8i32..=8) as f64) * 0.25;
    let mut optimal = 0usize;
    let mut infeasible = 0usize;
    for case in 0..500 {
        let n = rng.random_range(1..=4usize);
        let me = rng.random_range(0..=n.min(2));
        let mi = rng.random_range(0..=(6 - me));
        let a_eq = DMatrix::from_fn(me, n, |_, _| grid(&mut rng));
        let b_eq = DVector::from_fn(me, |_, _| grid(&mut rng));
        let a_in = DMatrix::from_fn(mi, n, |_, _| grid(&mut rng));
        let b_in = DVector::from_fn(mi, |_, _| grid(&mut rng));
        let lb = DVector::from_fn(n, |_, _| -2.0 + grid(&mut rng) * 0.5);
        let ub = DVector::from_fn(n, |i, _| lb[i] + 0.5 + rng.random_range(0.0..2.5));
        let c = DVector::from_fn(n, |_, _| grid(&mut rng));
        let lp = LpProblem {
            c: c.clone(),
            a_eq: a_eq.clone(),
            b_eq: b_eq.clone(),
            a_in: a_in.clone(),
            b_in: b_in.clone(),
            lb: lb.clone(),
            ub: ub.clone(),
        };
        let sol = solve_lp(&lp).unwrap_or_else(|e| panic!("case {case}: {e}"));
        let verdict = best_vertex(&c, &a_eq, &b_eq, &a_in, &b_in, &lb, &ub, 1e-9);
        match (sol.status, verdict) {
            (LpStatus::Optimal, VertexVerdict::Optimal { objective, .. }) => {
                assert!(
                    (sol.objective - objective).abs() <= 1e-8,
                    "case {case}: simplex {} vs oracle {objective}",
                    sol.objective
                );
                optimal += 1;
            }
            (LpStatus::Infeasible, VertexVerdict::Infeasible) => infeasible += 1,
            (s, v) => panic!("case {case}: simplex {s:?} but oracle {v:?}"),
        }
    }
    let dt = start.elapsed();
    println!(
        "ACCEPTANCE criterion 6a: PASS ({optimal} optimal + {infeasible} infeasible over 500 random LPs) in {dt:?}"
    );
}

/// Criterion 6b: the restoration LP is never infeasible or unbounded.
#[test]
fn criterion_6b_restoration_lp_always_solvable() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..200 {
        let n = rng.random_range(1..=5usize);
        let n_g = rng.random_range(0..=3usize);
        let n_h = rng.random_range(0..=4usize);
        let lin = Linearization {
            base: DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0)),
            f: 0.0,
            grad_f: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            g: DVector::from_fn(n_g, |_, _| rng.random_range(-3.0..3.0)),
            h: DVector::from_fn(n_h, |_, _| rng.random_range(-3.0..3.0)),
            jac_g: DMatrix::from_fn(n_g, n, |_, _| rng.random_range(-2.0..2.0)),
            jac_h: DMatrix::from_fn(n_h, n, |_, _| rng.random_range(-2.0..2.0)),
        };
        let delta = rng.random_range(1e-3..10.0);
        let lp = build_restoration_lp(&lin, delta, None);
        let sol = solve_lp(&lp).unwrap_or_else(|e| panic!("case {case}: {e}"));
        assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
        assert!(sol.objective >= -1e-9);
    }
    let dt = start.elapsed();
    println!("ACCEPTANCE criterion 6b: PASS (200 random restoration LPs all Optimal) in {dt:?}");
}

/// Criterion 6c: every library Jacobian and gradient matches central
/// finite differences to a relative 1e-5.
#[test]
fn criterion_6c_library_jacobians_match_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let problems = vec![
        make_parabola_example(),
        make_sphere(2),
        make_sphere(7),
        make_cycling_example(),
        make_l1_relaxed(make_parabola_example(), 100.0),
        make_l1_relaxed(make_sphere(3), 10.0),
        make_double_integrator_tocp(8, 1.0),
        make_double_integrator_tocp(40, 1.0),
    ];
    for p in &problems {
        let n = p.problem.n_w();
        for _ in 0..3 {
            let w = DVector::from_fn(n, |i, _| p.default_start[i] + rng.random_range(-0.2..0.2));
            let mut ev = Evaluator::new(&p.problem);
            let (jg, jh) = ev.jacobian_pair(&w).unwrap();
            let grad = ev.gradient(&w).unwrap();
            let fd_g = central_diff_jacobian(
                &|x| Evaluator::new(&p.problem).constraint_pair(x).unwrap().0,
                &w,
                1e-6,
            );
            let fd_h = central_diff_jacobian(
                &|x| Evaluator::new(&p.problem).constraint_pair(x).unwrap().1,
                &w,
                1e-6,
            );
            let fd_f = central_diff_jacobian(
                &|x| dvector![Evaluator::new(&p.problem).objective(x).unwrap()],
                &w,
                1e-6,
            );
            assert!(rel_err(&jg, &fd_g) <= 1e-5, "{}: jac_g mismatch", p.name);
            assert!(rel_err(&jh, &fd_h) <= 1e-5, "{}: jac_h mismatch", p.name);
            assert!(
                rel_err(&DMatrix::from_rows(&[grad.transpose()]), &fd_f) <= 1e-5,
                "{}: gradient mismatch",
                p.name
            );
        }
    }
    let dt = start.elapsed();
    println!(
        "ACCEPTANCE criterion 6c: PASS ({} library problems, 3 random points each) in {dt:?}",
        problems.len()
    );
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / (1.0 + x.abs().max(y.abs())))
        .fold(0.0, f64::max)
}

/// Criteria 6d-6f: switching soundness, tube-width bookkeeping, and tube
/// membership of accepted phase-II iterates, over afSLP runs on three
/// problems.
#[test]
fn criterion_6def_afslp_trace_properties() {
    let start = Instant::now();
    let runs: Vec<(afslp_core::library::NamedProblem, DVector<f64>, AfslpConfig)> = vec![
        (
            make_cycling_example(),
            dvector![-0.25, -0.9],
            AfslpConfig {
                tau0: 1.2,
                ..AfslpConfig::default()
            },
        ),
        (
            make_cycling_example(),
            dvector![0.75, -0.4],
            AfslpConfig {
                tau0: 1.2,
                ..AfslpConfig::default()
            },
        ),
        (
            make_sphere(3),
            dvector![2.0, 1.0, -0.5],
            AfslpConfig::default(),
        ),
        (
            make_sphere(4),
            make_sphere(4).default_start,
            AfslpConfig::default(),
        ),
        (
            make_double_integrator_tocp(8, 1.0),
            make_double_integrator_tocp(8, 1.0).default_start,
            AfslpConfig {
                tau0: 1e-4,
                ..AfslpConfig::default()
            },
        ),
    ];
    let mut checked_accepts = 0usize;
    for (lib, start_point, config) in &runs {
        let mut shrinks = 0usize;
        let mut events = Vec::new();
        let res = solve_afslp_observed(&lib.problem, start_point, config, |e| {
            events.push(e.clone())
        })
        .unwrap();
        assert_eq!(res.status, SolverStatus::Converged, "{}", lib.name);
        for e in &events {
            // (e) tube width equals tau0 * beta^(in-tube restoration accepts).
            let expected_tau = config.tau0 * config.beta.powi(shrinks as i32);
            assert!(
                (e.tau_before - expected_tau).abs() <= 1e-12 * expected_tau,
                "{}: tau deviates",
                lib.name
            );
            if e.tube_shrunk {
                shrinks += 1;
                // An in-tube restoration acceptance leaves the new iterate
                // inside the shrunken tube.
                let it = Evaluator::new(&lib.problem).iterate(&e.w_next).unwrap();
                assert!(
                    it.v <= e.tau_after + 1e-12,
                    "{}: iterate escaped the shrunken tube",
                    lib.name
                );
            }
            if e.phase == Phase::PhaseII && e.accepted {
                // (d) switching condition on accepted phase-II steps.
                let dm = -e.model_value.unwrap();
                assert!(
                    dm >= config.sigma_switch * e.v - 1e-12,
                    "{}: switching condition violated",
                    lib.name
                );
                // (f) accepted iterate inside the tube, re-evaluated.
                let it = Evaluator::new(&lib.problem).iterate(&e.w_next).unwrap();
                assert!(
                    it.v <= config.beta * e.tau_before + 1e-12,
                    "{}: accepted phase-II iterate outside the tube",
                    lib.name
                );
                checked_accepts += 1;
            }
        }
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 120.0);
    println!(
        "ACCEPTANCE criterion 6d-6f: PASS ({checked_accepts} accepted phase-II steps checked) in {dt:?}"
    );
}
