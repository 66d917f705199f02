//! Test-problem library: the worked desk-scale problems with known
//! solutions, an l1 elastic relaxation transformer, and a free-final-time
//! double-integrator optimal control problem discretized with RK4.

use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::problem::{Evaluator, NlpProblem};

/// A problem plus the metadata the harness and the golden tests need.
pub struct NamedProblem {
    pub name: String,
    pub problem: NlpProblem,
    pub default_start: DVector<f64>,
    pub known_solution: Option<DVector<f64>>,
    pub known_objective: Option<f64>,
}

/// `min w2  s.t.  w2 >= w1^2,  w2 >= 0.1 w1`; solution at the origin.
pub fn make_parabola_example() -> NamedProblem {
    let problem = NlpProblem::builder(2)
        .objective(|w| w[1], |_| dvector![0.0, 1.0])
        .inequalities(
            2,
            |w| dvector![w[0] * w[0] - w[1], 0.1 * w[0] - w[1]],
            |w| dmatrix![2.0 * w[0], -1.0; 0.1, -1.0],
        )
        .known_solution(dvector![0.0, 0.0])
        .build();
    NamedProblem {
        name: "parabola".into(),
        problem,
        default_start: dvector![1.0, 3.0],
        known_solution: Some(dvector![0.0, 0.0]),
        known_objective: Some(0.0),
    }
}

/// Largest first coordinate on the n-dimensional unit sphere:
/// `min -w1  s.t.  sum w_i^2 - 1 = 0`. The canonical start lies on the
/// two-dimensional unit sphere for every n.
pub fn make_sphere(n: usize) -> NamedProblem {
    assert!(n >= 2, "sphere problem needs n >= 2");
    let problem = NlpProblem::builder(n)
        .objective(
            |w| -w[0],
            move |w| {
                let mut grad = DVector::zeros(w.len());
                grad[0] = -1.0;
                grad
            },
        )
        .equalities(
            1,
            |w| dvector![w.iter().map(|x| x * x).sum::<f64>() - 1.0],
            |w| DMatrix::from_fn(1, w.len(), |_, j| 2.0 * w[j]),
        )
        .known_solution(unit_vector(n, 0))
        .build();
    let mut start = DVector::zeros(n);
    start[0] = 0.5;
    start[1] = 0.75f64.sqrt();
    NamedProblem {
        name: format!("sphere-{n}"),
        problem,
        default_start: start,
        known_solution: Some(unit_vector(n, 0)),
        known_objective: Some(-1.0),
    }
}

/// `min w2  s.t.  w2 >= w1^2 + 0.0375,  w1 >= w2`: the problem on which the
/// original tolerance-tube method cycles between (-0.25, -0.9) and
/// (0.75, -0.4). The solution has both constraints active at the lower root
/// of w^2 - w + 0.0375.
pub fn make_cycling_example() -> NamedProblem {
    let root = (1.0 - 0.85f64.sqrt()) / 2.0;
    let problem = NlpProblem::builder(2)
        .objective(|w| w[1], |_| dvector![0.0, 1.0])
        .inequalities(
            2,
            |w| dvector![w[0] * w[0] + 0.0375 - w[1], w[1] - w[0]],
            |w| dmatrix![2.0 * w[0], -1.0; -1.0, 1.0],
        )
        .known_solution(dvector![root, root])
        .build();
    NamedProblem {
        name: "cycling".into(),
        problem,
        default_start: dvector![-0.25, -0.9],
        known_solution: Some(dvector![root, root]),
        known_objective: Some(root),
    }
}

/// Elastic l1 relaxation with penalty `mu`: variables grow to
/// `(w, s, t+, t-)`, the objective becomes `f + mu * sum(elastics)`,
/// equalities turn into `g - t+ + t- = 0`, and inequalities into
/// `h - s <= 0` with all elastics nonnegative. Any `w` is feasible once
/// the elastics are large enough.
pub fn make_l1_relaxed(p: NamedProblem, mu: f64) -> NamedProblem {
    assert!(mu > 0.0, "penalty parameter must be positive");
    let inner = Arc::new(p.problem);
    let n_w = inner.n_w();
    let n_g = inner.n_g();
    let n_h = inner.n_h();
    let total = n_w + n_h + 2 * n_g;
    let n_elastic = n_h + 2 * n_g;
    let s_at = n_w;
    let tp_at = n_w + n_h;
    let tm_at = n_w + n_h + n_g;

    let head = move |z: &DVector<f64>| DVector::from_fn(n_w, |i, _| z[i]);

    let problem = {
        let fi = inner.clone();
        let gi = inner.clone();
        let ggi = inner.clone();
        let hi = inner.clone();
        let jgi = inner.clone();
        let jhi = inner.clone();
        NlpProblem::builder(total)
            .objective(
                move |z| {
                    let w = head(z);
                    let elastic: f64 = (n_w..total).map(|i| z[i]).sum();
                    Evaluator::new(&fi).objective(&w).expect("inner objective") + mu * elastic
                },
                move |z| {
                    let w = head(z);
                    let inner_grad = Evaluator::new(&gi).gradient(&w).expect("inner gradient");
                    let mut grad = DVector::from_element(total, mu);
                    grad.rows_mut(0, n_w).copy_from(&inner_grad);
                    grad
                },
            )
            .equalities(
                n_g,
                move |z| {
                    let w = head(z);
                    let (g, _) = Evaluator::new(&ggi)
                        .constraint_pair(&w)
                        .expect("inner constraints");
                    DVector::from_fn(n_g, |i, _| g[i] - z[tp_at + i] + z[tm_at + i])
                },
                move |z| {
                    let w = head(z);
                    let (jg, _) = Evaluator::new(&jgi)
                        .jacobian_pair(&w)
                        .expect("inner jacobians");
                    let mut jac = DMatrix::zeros(n_g, total);
                    jac.view_mut((0, 0), (n_g, n_w)).copy_from(&jg);
                    for i in 0..n_g {
                        jac[(i, tp_at + i)] = -1.0;
                        jac[(i, tm_at + i)] = 1.0;
                    }
                    jac
                },
            )
            .inequalities(
                n_h + n_elastic,
                move |z| {
                    let w = head(z);
                    let (_, h) = Evaluator::new(&hi)
                        .constraint_pair(&w)
                        .expect("inner constraints");
                    let mut out = DVector::zeros(n_h + n_elastic);
                    for i in 0..n_h {
                        out[i] = h[i] - z[s_at + i];
                    }
                    for i in 0..n_elastic {
                        out[n_h + i] = -z[n_w + i];
                    }
                    out
                },
                move |z| {
                    let w = head(z);
                    let (_, jh) = Evaluator::new(&jhi)
                        .jacobian_pair(&w)
                        .expect("inner jacobians");
                    let mut jac = DMatrix::zeros(n_h + n_elastic, total);
                    jac.view_mut((0, 0), (n_h, n_w)).copy_from(&jh);
                    for i in 0..n_h {
                        jac[(i, s_at + i)] = -1.0;
                    }
                    for i in 0..n_elastic {
                        jac[(n_h + i, n_w + i)] = -1.0;
                    }
                    jac
                },
            )
            .build()
    };

    let lift = |w: &DVector<f64>| -> DVector<f64> {
        let (g, h) = Evaluator::new(&inner)
            .constraint_pair(w)
            .expect("inner constraints");
        let mut z = DVector::zeros(total);
        z.rows_mut(0, n_w).copy_from(w);
        for i in 0..n_h {
            z[s_at + i] = h[i].max(0.0);
        }
        for i in 0..n_g {
            z[tp_at + i] = g[i].max(0.0);
            z[tm_at + i] = (-g[i]).max(0.0);
        }
        z
    };

    let default_start = lift(&p.default_start);
    let known_solution = p.known_solution.as_ref().map(|w| lift(w));
    NamedProblem {
        name: format!("{}-l1-mu{}", p.name, mu),
        problem,
        default_start,
        known_solution,
        known_objective: p.known_objective,
    }
}

/// Velocity bound of the double-integrator problem.
pub const TOCP_V_MAX: f64 = 1.5;
/// Lower bound on the free final time.
pub const TOCP_T_FLOOR: f64 = 1e-3;

/// One RK4 step of the double integrator `pdot = v, vdot = u`. For this
/// vector field the stage sums collapse to the exact discrete map
/// `p + h v + h^2 u / 2`, `v + h u`.
fn rk4_step(x: [f64; 2], u: f64, h: f64) -> [f64; 2] {
    let f = |x: [f64; 2]| [x[1], u];
    let k1 = f(x);
    let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
    let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
    let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]]);
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
    ]
}

/// Free-final-time rest-to-rest transfer of a double integrator over
/// distance `d`:
///
/// ```text
/// min T  s.t.  x_{k+1} = rk4(x_k, u_k, T/N),  x_0 = (0,0),  x_N = (d, 0),
///              |u_k| <= 1,  |vel_k| <= TOCP_V_MAX,  T >= TOCP_T_FLOOR
/// ```
///
/// Decision vector `(x_0, ..., x_N, u_0, ..., u_{N-1}, T)` with
/// `x_k = (pos, vel)`. The dynamics are nonlinear in `T` through the step
/// size. The continuous-time optimum is `2 sqrt(d)` while the velocity
/// bound is inactive.
pub fn make_double_integrator_tocp(n: usize, d: f64) -> NamedProblem {
    assert!(n >= 5, "horizon must have at least 5 intervals");
    assert!(d > 0.0, "transfer distance must be positive");
    let n_w = 3 * n + 3;
    let n_g = 2 * n + 4;
    let n_h = 4 * n + 3;
    let u_at = 2 * (n + 1);
    let t_at = u_at + n;

    let eval_g = move |w: &DVector<f64>| -> DVector<f64> {
        let h_t = w[t_at] / n as f64;
        let mut g = DVector::zeros(n_g);
        for k in 0..n {
            let xk = [w[2 * k], w[2 * k + 1]];
            let next = rk4_step(xk, w[u_at + k], h_t);
            g[2 * k] = w[2 * (k + 1)] - next[0];
            g[2 * k + 1] = w[2 * (k + 1) + 1] - next[1];
        }
        g[2 * n] = w[0];
        g[2 * n + 1] = w[1];
        g[2 * n + 2] = w[2 * n] - d;
        g[2 * n + 3] = w[2 * n + 1];
        g
    };

    let jac_g = move |w: &DVector<f64>| -> DMatrix<f64> {
        let nf = n as f64;
        let h_t = w[t_at] / nf;
        let mut jac = DMatrix::zeros(n_g, n_w);
        for k in 0..n {
            let vel = w[2 * k + 1];
            let u = w[u_at + k];
            let (rp, rv) = (2 * k, 2 * k + 1);
            jac[(rp, 2 * (k + 1))] = 1.0;
            jac[(rv, 2 * (k + 1) + 1)] = 1.0;
            // Derivatives of the RK4 map: position row depends on the
            // previous state, the control (h^2/2), and T through h = T/N.
            jac[(rp, 2 * k)] = -1.0;
            jac[(rp, 2 * k + 1)] = -h_t;
            jac[(rp, u_at + k)] = -h_t * h_t / 2.0;
            jac[(rp, t_at)] = -(vel + h_t * u) / nf;
            jac[(rv, 2 * k + 1)] = -1.0;
            jac[(rv, u_at + k)] = -h_t;
            jac[(rv, t_at)] = -u / nf;
        }
        jac[(2 * n, 0)] = 1.0;
        jac[(2 * n + 1, 1)] = 1.0;
        jac[(2 * n + 2, 2 * n)] = 1.0;
        jac[(2 * n + 3, 2 * n + 1)] = 1.0;
        jac
    };

    let eval_h = move |w: &DVector<f64>| -> DVector<f64> {
        let mut h = DVector::zeros(n_h);
        for k in 0..n {
            h[2 * k] = w[u_at + k] - 1.0;
            h[2 * k + 1] = -w[u_at + k] - 1.0;
        }
        for k in 0..=n {
            h[2 * n + 2 * k] = w[2 * k + 1] - TOCP_V_MAX;
            h[2 * n + 2 * k + 1] = -w[2 * k + 1] - TOCP_V_MAX;
        }
        h[4 * n + 2] = TOCP_T_FLOOR - w[t_at];
        h
    };

    let jac_h = move |_: &DVector<f64>| -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(n_h, n_w);
        for k in 0..n {
            jac[(2 * k, u_at + k)] = 1.0;
            jac[(2 * k + 1, u_at + k)] = -1.0;
        }
        for k in 0..=n {
            jac[(2 * n + 2 * k, 2 * k + 1)] = 1.0;
            jac[(2 * n + 2 * k + 1, 2 * k + 1)] = -1.0;
        }
        jac[(4 * n + 2, t_at)] = -1.0;
        jac
    };

    let problem = NlpProblem::builder(n_w)
        .objective(
            move |w| w[t_at],
            move |_| {
                let mut grad = DVector::zeros(n_w);
                grad[t_at] = 1.0;
                grad
            },
        )
        .equalities(n_g, eval_g, jac_g)
        .inequalities(n_h, eval_h, jac_h)
        .build();

    let known_solution = Some(rest_to_rest_point(n, d, 1.0));
    let known_objective = Some(if d.sqrt() <= TOCP_V_MAX {
        2.0 * d.sqrt()
    } else {
        d / TOCP_V_MAX + TOCP_V_MAX
    });

    NamedProblem {
        name: format!("di-tocp-{n}-{d}"),
        problem,
        default_start: rest_to_rest_point(n, d, 0.25),
        known_solution,
        known_objective,
    }
}

/// Exactly feasible decision vector from a symmetric effort-`a` profile:
/// accelerate at `+a`, coast for one step on odd horizons, decelerate at
/// `-a`. The step size is chosen so the profile lands exactly on `(d, 0)`
/// under the same RK4 recursion the constraints evaluate. The effort is
/// reduced automatically if the peak velocity would exceed the bound.
fn rest_to_rest_point(n: usize, d: f64, a: f64) -> DVector<f64> {
    let build = |a: f64| -> (f64, Vec<f64>, Vec<[f64; 2]>, f64) {
        let m = n / 2;
        let mut us = vec![0.0; n];
        for u in us.iter_mut().take(m) {
            *u = a;
        }
        for u in us.iter_mut().skip(n - m) {
            *u = -a;
        }
        // Positions scale as h^2 for a fixed control shape, so one unit-h
        // simulation fixes the step size.
        let mut x = [0.0, 0.0];
        for &u in &us {
            x = rk4_step(x, u, 1.0);
        }
        let h = (d / x[0]).sqrt();
        let mut xs = vec![[0.0, 0.0]];
        let mut x = [0.0, 0.0];
        let mut peak: f64 = 0.0;
        for &u in &us {
            x = rk4_step(x, u, h);
            peak = peak.max(x[1].abs());
            xs.push(x);
        }
        (h * n as f64, us, xs, peak)
    };

    let (_, _, _, peak) = build(a);
    let margin = 0.999 * TOCP_V_MAX;
    let a = if peak > margin {
        a * (margin / peak) * (margin / peak)
    } else {
        a
    };
    let (t, us, xs, _) = build(a);

    let n_w = 3 * n + 3;
    let mut w = DVector::zeros(n_w);
    for (k, x) in xs.iter().enumerate() {
        w[2 * k] = x[0];
        w[2 * k + 1] = x[1];
    }
    for (k, &u) in us.iter().enumerate() {
        w[2 * (n + 1) + k] = u;
    }
    w[3 * n + 2] = t;
    w
}

fn unit_vector(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

/// CLI problem registry: `parabola`, `sphere-<n>`, `cycling`,
/// `di-tocp-<N>-<d>`.
pub fn problem_by_name(name: &str) -> Option<NamedProblem> {
    match name {
        "parabola" => return Some(make_parabola_example()),
        "cycling" => return Some(make_cycling_example()),
        _ => {}
    }
    if let Some(rest) = name.strip_prefix("sphere-") {
        let n: usize = rest.parse().ok()?;
        return (n >= 2).then(|| make_sphere(n));
    }
    if let Some(rest) = name.strip_prefix("di-tocp-") {
        let (n_str, d_str) = rest.split_once('-')?;
        let n: usize = n_str.parse().ok()?;
        let d: f64 = d_str.parse().ok()?;
        return (n >= 5 && d > 0.0).then(|| make_double_integrator_tocp(n, d));
    }
    None
}
