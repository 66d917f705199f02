//! Dense linear programs, the subproblem builders used by the outer
//! solvers, and a two-phase bounded-variable simplex.
//!
//! The three LP shapes built here are the trust-region LP (step variables
//! `d = w - w_base`), the parametric LP of the feasibility iterations
//! (re-anchored at an inner iterate), and the elastic l1 restoration LP.

mod simplex;

use nalgebra::{DMatrix, DVector};

use crate::error::LpError;
use crate::problem::Linearization;

/// Feasibility/optimality tolerance of the LP solver. Phase one declares a
/// problem infeasible when its artificial objective exceeds this.
pub const EPS_LP: f64 = 1e-9;

/// `min c.x  s.t.  A_eq x = b_eq,  A_in x <= b_in,  lb <= x <= ub`,
/// with `+-inf` allowed in the bounds.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b_eq.len() + self.b_in.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let bad = |msg: &str| Err(LpError::BadProblem(msg.to_string()));
        if self.a_eq.ncols() != n && self.a_eq.nrows() > 0 {
            return bad("a_eq column count does not match the cost vector");
        }
        if self.a_in.ncols() != n && self.a_in.nrows() > 0 {
            return bad("a_in column count does not match the cost vector");
        }
        if self.a_eq.nrows() != self.b_eq.len() || self.a_in.nrows() != self.b_in.len() {
            return bad("row counts and right-hand sides disagree");
        }
        if self.lb.len() != n || self.ub.len() != n {
            return bad("bound vectors must have one entry per variable");
        }
        if self
            .c
            .iter()
            .chain(self.a_eq.iter())
            .chain(self.b_eq.iter())
            .chain(self.a_in.iter())
            .chain(self.b_in.iter())
            .any(|x| !x.is_finite())
        {
            return bad("matrix, cost, and right-hand-side entries must be finite");
        }
        if self
            .lb
            .iter()
            .zip(self.ub.iter())
            .any(|(&l, &u)| l.is_nan() || u.is_nan() || l > u)
        {
            return bad("bounds must satisfy lb <= ub");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `x` and `objective` are meaningful only when `status == Optimal`.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: DVector<f64>,
    pub objective: f64,
}

/// Two-phase primal simplex on the bounded-variable form, with Bland's
/// rule as an anti-cycling fallback. Deterministic: lowest-index entering
/// variable among equal reduced costs.
pub fn solve_lp(lp: &LpProblem) -> Result<LpSolution, LpError> {
    lp.validate()?;
    simplex::solve(lp)
}

/// Trust-region LP in step coordinates `d = w - base`:
/// `min grad_f.d  s.t.  g + J_g d = 0,  h + J_h d <= 0,  ||P d||_inf <= delta`.
///
/// With the identity scaling the trust region becomes variable bounds
/// `-delta <= d_i <= delta`; a general `P` adds `2 n_y` inequality rows and
/// leaves the variables unbounded.
pub fn build_trust_region_lp(
    lin: &Linearization,
    delta: f64,
    scaling: Option<&DMatrix<f64>>,
) -> LpProblem {
    let n = lin.base.len();
    let c = lin.grad_f.clone();
    let a_eq = lin.jac_g.clone();
    let b_eq = -&lin.g;
    match scaling {
        None => LpProblem {
            c,
            a_eq,
            b_eq,
            a_in: lin.jac_h.clone(),
            b_in: -&lin.h,
            lb: DVector::from_element(n, -delta),
            ub: DVector::from_element(n, delta),
        },
        Some(p) => {
            let (a_in, b_in) = stack_with_scaling_rows(&lin.jac_h, &(-&lin.h), p, delta, None);
            LpProblem {
                c,
                a_eq,
                b_eq,
                a_in,
                b_in,
                lb: DVector::from_element(n, f64::NEG_INFINITY),
                ub: DVector::from_element(n, f64::INFINITY),
            }
        }
    }
}

/// Parametric LP of the feasibility iterations, in step coordinates
/// `e = w - w_inner`: constraints are re-anchored at the inner iterate
/// (values `g_l`, `h_l` evaluated there) while the Jacobians and the cost
/// stay frozen at the outer base point, and the trust region
/// `||P (w - base)||_inf <= delta` remains anchored at the outer base.
pub fn build_plp(
    lin: &Linearization,
    g_inner: &DVector<f64>,
    h_inner: &DVector<f64>,
    w_inner: &DVector<f64>,
    delta: f64,
    scaling: Option<&DMatrix<f64>>,
) -> LpProblem {
    let n = lin.base.len();
    let offset = w_inner - &lin.base;
    let c = lin.grad_f.clone();
    let a_eq = lin.jac_g.clone();
    let b_eq = -g_inner;
    match scaling {
        None => LpProblem {
            c,
            a_eq,
            b_eq,
            a_in: lin.jac_h.clone(),
            b_in: -h_inner,
            lb: DVector::from_fn(n, |i, _| -delta - offset[i]),
            ub: DVector::from_fn(n, |i, _| delta - offset[i]),
        },
        Some(p) => {
            let (a_in, b_in) =
                stack_with_scaling_rows(&lin.jac_h, &(-h_inner), p, delta, Some(&offset));
            LpProblem {
                c,
                a_eq,
                b_eq,
                a_in,
                b_in,
                lb: DVector::from_element(n, f64::NEG_INFINITY),
                ub: DVector::from_element(n, f64::INFINITY),
            }
        }
    }
}

/// Elastic l1 restoration LP with decision vector `(d, s, t+, t-)`:
///
/// ```text
/// min sum(s) + sum(t+) + sum(t-)
/// s.t. g + J_g d - t+ + t- = 0
///      h + J_h d - s      <= 0
///      s, t+, t- >= 0,  ||P d||_inf <= delta
/// ```
///
/// The elastics are excluded from the trust region, so the LP is feasible
/// by construction (`d = 0` with elastics set to the positive parts).
pub fn build_restoration_lp(
    lin: &Linearization,
    delta: f64,
    scaling: Option<&DMatrix<f64>>,
) -> LpProblem {
    let n = lin.base.len();
    let n_g = lin.g.len();
    let n_h = lin.h.len();
    let total = n + n_h + 2 * n_g;
    let s_at = n;
    let tp_at = n + n_h;
    let tm_at = n + n_h + n_g;

    let mut c = DVector::zeros(total);
    for i in n..total {
        c[i] = 1.0;
    }

    let mut a_eq = DMatrix::zeros(n_g, total);
    a_eq.view_mut((0, 0), (n_g, n)).copy_from(&lin.jac_g);
    for i in 0..n_g {
        a_eq[(i, tp_at + i)] = -1.0;
        a_eq[(i, tm_at + i)] = 1.0;
    }
    let b_eq = -&lin.g;

    let mut lb = DVector::from_element(total, 0.0);
    let mut ub = DVector::from_element(total, f64::INFINITY);

    let (a_in, b_in) = match scaling {
        None => {
            for i in 0..n {
                lb[i] = -delta;
                ub[i] = delta;
            }
            let mut a_in = DMatrix::zeros(n_h, total);
            a_in.view_mut((0, 0), (n_h, n)).copy_from(&lin.jac_h);
            for i in 0..n_h {
                a_in[(i, s_at + i)] = -1.0;
            }
            (a_in, -&lin.h)
        }
        Some(p) => {
            for i in 0..n {
                lb[i] = f64::NEG_INFINITY;
            }
            let n_y = p.nrows();
            let mut a_in = DMatrix::zeros(n_h + 2 * n_y, total);
            a_in.view_mut((0, 0), (n_h, n)).copy_from(&lin.jac_h);
            for i in 0..n_h {
                a_in[(i, s_at + i)] = -1.0;
            }
            a_in.view_mut((n_h, 0), (n_y, n)).copy_from(p);
            a_in.view_mut((n_h + n_y, 0), (n_y, n)).copy_from(&(-p));
            let mut b_in = DVector::from_element(n_h + 2 * n_y, delta);
            for i in 0..n_h {
                b_in[i] = -lin.h[i];
            }
            (a_in, b_in)
        }
    };

    LpProblem {
        c,
        a_eq,
        b_eq,
        a_in,
        b_in,
        lb,
        ub,
    }
}

/// Stack `[jac; P; -P]` rows with right-hand sides
/// `[rhs; delta - P off; delta + P off]` (offset defaults to zero).
fn stack_with_scaling_rows(
    jac: &DMatrix<f64>,
    rhs: &DVector<f64>,
    p: &DMatrix<f64>,
    delta: f64,
    offset: Option<&DVector<f64>>,
) -> (DMatrix<f64>, DVector<f64>) {
    let n_h = jac.nrows();
    let n_y = p.nrows();
    let n = p.ncols();
    let mut a = DMatrix::zeros(n_h + 2 * n_y, n);
    a.view_mut((0, 0), (n_h, n)).copy_from(jac);
    a.view_mut((n_h, 0), (n_y, n)).copy_from(p);
    a.view_mut((n_h + n_y, 0), (n_y, n)).copy_from(&(-p));
    let shift = offset.map(|o| p * o);
    let mut b = DVector::zeros(n_h + 2 * n_y);
    for i in 0..n_h {
        b[i] = rhs[i];
    }
    for i in 0..n_y {
        let s = shift.as_ref().map_or(0.0, |v| v[i]);
        b[n_h + i] = delta - s;
        b[n_h + n_y + i] = delta + s;
    }
    (a, b)
}
