//! Brute-force reference computations for test suites. Nothing here is
//! used by the solvers themselves; the point is an independent route to
//! the same answers.

use nalgebra::{DMatrix, DVector};

/// Verdict of exhaustive vertex enumeration over a polytope
/// `A_eq x = b_eq, A_in x <= b_in, lb <= x <= ub`.
#[derive(Clone, Debug)]
pub enum VertexVerdict {
    /// No feasible vertex. With all-finite bounds this certifies an empty
    /// feasible set.
    Infeasible,
    /// Minimum objective over all feasible vertices, which equals the LP
    /// optimum whenever the feasible set is a bounded polytope.
    Optimal { objective: f64, x: DVector<f64> },
}

/// Enumerate every nonsingular active set (all equality rows, plus enough
/// inequality rows and bound hyperplanes to pin down `n` variables), solve
/// the square system, keep the feasible solutions, and return the best
/// objective. Exponential in `n`; intended for n <= 4 and a handful of
/// rows.
#[allow(clippy::too_many_arguments)]
pub fn best_vertex(
    c: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    a_in: &DMatrix<f64>,
    b_in: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
    feas_tol: f64,
) -> VertexVerdict {
    let n = c.len();
    let me = b_eq.len();
    assert!(me <= n, "more equality rows than variables");

    // Candidate hyperplanes: inequality rows and finite bounds.
    let mut planes: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..b_in.len() {
        planes.push((a_in.row(i).transpose(), b_in[i]));
    }
    for j in 0..n {
        if lb[j].is_finite() {
            let mut row = DVector::zeros(n);
            row[j] = 1.0;
            planes.push((row, lb[j]));
        }
        if ub[j].is_finite() {
            let mut row = DVector::zeros(n);
            row[j] = 1.0;
            planes.push((row, ub[j]));
        }
    }

    let pick = n - me;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut subset = vec![0usize; pick];
    enumerate_subsets(planes.len(), pick, &mut subset, 0, 0, &mut |chosen| {
        let mut m = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (r, i) in (0..me).enumerate() {
            m.row_mut(r).copy_from(&a_eq.row(i));
            rhs[r] = b_eq[i];
        }
        for (offset, &pi) in chosen.iter().enumerate() {
            let r = me + offset;
            m.row_mut(r).copy_from(&planes[pi].0.transpose());
            rhs[r] = planes[pi].1;
        }
        let lu = m.full_piv_lu();
        let Some(x) = lu.solve(&rhs) else {
            return;
        };
        if x.iter().any(|v| !v.is_finite()) {
            return;
        }
        if !is_feasible(&x, a_eq, b_eq, a_in, b_in, lb, ub, feas_tol) {
            return;
        }
        let obj = c.dot(&x);
        match &best {
            Some((b, _)) if *b <= obj => {}
            _ => best = Some((obj, x)),
        }
    });

    match best {
        Some((objective, x)) => VertexVerdict::Optimal { objective, x },
        None => VertexVerdict::Infeasible,
    }
}

#[allow(clippy::too_many_arguments)]
fn is_feasible(
    x: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    a_in: &DMatrix<f64>,
    b_in: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
    tol: f64,
) -> bool {
    for i in 0..b_eq.len() {
        if (a_eq.row(i).transpose().dot(x) - b_eq[i]).abs() > tol {
            return false;
        }
    }
    for i in 0..b_in.len() {
        if a_in.row(i).transpose().dot(x) - b_in[i] > tol {
            return false;
        }
    }
    for j in 0..x.len() {
        if x[j] < lb[j] - tol || x[j] > ub[j] + tol {
            return false;
        }
    }
    true
}

fn enumerate_subsets(
    total: usize,
    pick: usize,
    subset: &mut Vec<usize>,
    depth: usize,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == pick {
        visit(subset);
        return;
    }
    for i in start..total {
        subset[depth] = i;
        enumerate_subsets(total, pick, subset, depth + 1, i + 1, visit);
    }
}

/// Central finite-difference Jacobian of a vector-valued map.
pub fn central_diff_jacobian(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    w: &DVector<f64>,
    step: f64,
) -> DMatrix<f64> {
    let n = w.len();
    let base = f(w);
    let m = base.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut plus = w.clone();
        plus[j] += step;
        let mut minus = w.clone();
        minus[j] -= step;
        let diff = (f(&plus) - f(&minus)) / (2.0 * step);
        jac.set_column(j, &diff);
    }
    jac
}

/// Minimum rest-to-rest transfer time of a double integrator over distance
/// `d` with |u| <= 1 and |velocity| <= v_max, found by bisection on the
/// horizon with a fine-grid simulation of the symmetric bang-bang (or
/// bang-coast-bang) profile. Independent of any analytic formula.
pub fn min_transfer_time_by_bisection(d: f64, v_max: f64, grid: usize) -> f64 {
    assert!(d > 0.0);
    let reaches = |t: f64| -> bool {
        // Saturated symmetric profile: accelerate at +1 while |v| < v_max
        // and t < T/2, mirror afterwards; integrate on a fine grid and
        // compare the distance covered.
        let dt = t / grid as f64;
        let mut x = 0.0;
        let mut v: f64 = 0.0;
        for k in 0..grid {
            let time = (k as f64 + 0.5) * dt;
            let u = if time < t / 2.0 {
                if v < v_max {
                    1.0
                } else {
                    0.0
                }
            } else if v > 0.0 {
                -1.0
            } else {
                0.0
            };
            x += v * dt + 0.5 * u * dt * dt;
            v = (v + u * dt).clamp(-v_max, v_max);
        }
        x >= d
    };
    let mut lo = 0.0;
    let mut hi = 2.0 * (d / v_max + v_max + d.sqrt());
    assert!(reaches(hi), "bisection bracket too small");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reaches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
