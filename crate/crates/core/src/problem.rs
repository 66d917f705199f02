//! Nonlinear-program definition, infeasibility measures, and counted
//! evaluation.
//!
//! A problem is
//!
//! ```text
//!     min f(w)   s.t.   g(w) = 0,   h(w) <= 0,
//! ```
//!
//! given through dense evaluation callbacks. Inequalities written with `>=`
//! must be negated by the caller so that a single `h(w) <= 0` code path
//! exists. Empty equality or inequality blocks are allowed.

use nalgebra::{DMatrix, DVector};

use crate::error::EvalError;

pub type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
pub type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
pub type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// Infeasibility measure `v(w) = ||g||_inf + ||[h]^+||_inf` where `[h]^+`
/// clamps each component at zero. Empty blocks contribute zero. Any NaN in
/// the inputs makes the measure NaN.
pub fn infeasibility(g: &DVector<f64>, h: &DVector<f64>) -> f64 {
    if g.iter().chain(h.iter()).any(|x| x.is_nan()) {
        return f64::NAN;
    }
    let eq = g.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let ineq = h.iter().fold(0.0f64, |m, &x| m.max(x));
    eq + ineq.max(0.0)
}

/// One-norm violation `||g||_1 + ||[h]^+||_1` used by the restoration phase.
pub fn restoration_infeasibility(g: &DVector<f64>, h: &DVector<f64>) -> f64 {
    if g.iter().chain(h.iter()).any(|x| x.is_nan()) {
        return f64::NAN;
    }
    let eq: f64 = g.iter().map(|x| x.abs()).sum();
    let ineq: f64 = h.iter().map(|x| x.max(0.0)).sum();
    eq + ineq
}

/// `||P x||_inf` for the optional trust-region projection matrix; `None`
/// stands for the identity.
pub fn weighted_inf_norm(scaling: Option<&DMatrix<f64>>, x: &DVector<f64>) -> f64 {
    match scaling {
        None => x.iter().fold(0.0f64, |m, &v| m.max(v.abs())),
        Some(p) => (p * x).iter().fold(0.0f64, |m, &v| m.max(v.abs())),
    }
}

/// Dense NLP with evaluation callbacks. Immutable after construction;
/// evaluation counting is owned per solve by [`Evaluator`], so distinct
/// solves on one problem can run in parallel as long as the callbacks are
/// pure.
pub struct NlpProblem {
    n_w: usize,
    n_g: usize,
    n_h: usize,
    objective: Box<ScalarFn>,
    gradient: Box<VectorFn>,
    equalities: Box<VectorFn>,
    inequalities: Box<VectorFn>,
    jac_equalities: Box<MatrixFn>,
    jac_inequalities: Box<MatrixFn>,
    scaling: Option<DMatrix<f64>>,
    known_solution: Option<DVector<f64>>,
}

impl NlpProblem {
    pub fn builder(n_w: usize) -> NlpProblemBuilder {
        NlpProblemBuilder::new(n_w)
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn n_g(&self) -> usize {
        self.n_g
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    /// Trust-region projection matrix `P`; `None` means the identity.
    pub fn scaling(&self) -> Option<&DMatrix<f64>> {
        self.scaling.as_ref()
    }

    pub fn known_solution(&self) -> Option<&DVector<f64>> {
        self.known_solution.as_ref()
    }
}

pub struct NlpProblemBuilder {
    n_w: usize,
    n_g: usize,
    n_h: usize,
    objective: Option<Box<ScalarFn>>,
    gradient: Option<Box<VectorFn>>,
    equalities: Option<Box<VectorFn>>,
    inequalities: Option<Box<VectorFn>>,
    jac_equalities: Option<Box<MatrixFn>>,
    jac_inequalities: Option<Box<MatrixFn>>,
    scaling: Option<DMatrix<f64>>,
    known_solution: Option<DVector<f64>>,
}

impl NlpProblemBuilder {
    fn new(n_w: usize) -> Self {
        Self {
            n_w,
            n_g: 0,
            n_h: 0,
            objective: None,
            gradient: None,
            equalities: None,
            inequalities: None,
            jac_equalities: None,
            jac_inequalities: None,
            scaling: None,
            known_solution: None,
        }
    }

    pub fn objective(
        mut self,
        f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.objective = Some(Box::new(f));
        self.gradient = Some(Box::new(grad));
        self
    }

    /// Equality block `g(w) = 0` with its Jacobian.
    pub fn equalities(
        mut self,
        n_g: usize,
        g: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jac: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.n_g = n_g;
        self.equalities = Some(Box::new(g));
        self.jac_equalities = Some(Box::new(jac));
        self
    }

    /// Inequality block `h(w) <= 0` with its Jacobian.
    pub fn inequalities(
        mut self,
        n_h: usize,
        h: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jac: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.n_h = n_h;
        self.inequalities = Some(Box::new(h));
        self.jac_inequalities = Some(Box::new(jac));
        self
    }

    pub fn trust_region_scaling(mut self, p: DMatrix<f64>) -> Self {
        self.scaling = Some(p);
        self
    }

    pub fn known_solution(mut self, w: DVector<f64>) -> Self {
        self.known_solution = Some(w);
        self
    }

    /// Panics if no objective was set or the scaling matrix has the wrong
    /// number of columns; those are construction-time programming errors.
    pub fn build(self) -> NlpProblem {
        let n_w = self.n_w;
        let n_g = self.n_g;
        let n_h = self.n_h;
        if let Some(p) = &self.scaling {
            assert_eq!(p.ncols(), n_w, "scaling matrix must have n_w columns");
        }
        NlpProblem {
            n_w,
            n_g,
            n_h,
            objective: self.objective.expect("objective callback is required"),
            gradient: self.gradient.expect("gradient callback is required"),
            equalities: self
                .equalities
                .unwrap_or_else(|| Box::new(|_| DVector::zeros(0))),
            inequalities: self
                .inequalities
                .unwrap_or_else(|| Box::new(|_| DVector::zeros(0))),
            jac_equalities: self
                .jac_equalities
                .unwrap_or_else(move || Box::new(move |_| DMatrix::zeros(0, n_w))),
            jac_inequalities: self
                .jac_inequalities
                .unwrap_or_else(move || Box::new(move |_| DMatrix::zeros(0, n_w))),
            scaling: self.scaling,
            known_solution: self.known_solution,
        }
    }
}

/// All problem quantities evaluated at one base point; the data the
/// trust-region LP and the parametric inner LPs are built from.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub base: DVector<f64>,
    pub f: f64,
    pub grad_f: DVector<f64>,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
    pub jac_g: DMatrix<f64>,
    pub jac_h: DMatrix<f64>,
}

/// A point with cached evaluations and its infeasibility.
#[derive(Clone, Debug)]
pub struct Iterate {
    pub w: DVector<f64>,
    pub f: f64,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
    pub v: f64,
}

impl Iterate {
    /// `v` is always recomputed from the stored constraint values.
    pub fn new(w: DVector<f64>, f: f64, g: DVector<f64>, h: DVector<f64>) -> Self {
        let v = infeasibility(&g, &h);
        Self { w, f, g, h, v }
    }
}

/// Evaluation tallies over one solve. A "pair" is one joint evaluation of
/// `(g, h)` or of their Jacobians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounters {
    pub n_f: u64,
    pub n_grad_f: u64,
    pub n_constraint_pairs: u64,
    pub n_jacobian_pairs: u64,
}

/// Counted, dimension- and finiteness-checked access to the problem
/// callbacks. One instance per solve.
pub struct Evaluator<'a> {
    problem: &'a NlpProblem,
    counters: EvalCounters,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a NlpProblem) -> Self {
        Self {
            problem,
            counters: EvalCounters::default(),
        }
    }

    pub fn problem(&self) -> &'a NlpProblem {
        self.problem
    }

    pub fn counters(&self) -> EvalCounters {
        self.counters
    }

    fn check_point(&self, w: &DVector<f64>) -> Result<(), EvalError> {
        if w.len() != self.problem.n_w {
            return Err(EvalError::PointDimension {
                got: w.len(),
                expected: self.problem.n_w,
            });
        }
        Ok(())
    }

    fn check_vector(
        what: &'static str,
        v: &DVector<f64>,
        expected: usize,
    ) -> Result<(), EvalError> {
        if v.len() != expected {
            return Err(EvalError::Dimension {
                what,
                got: v.len(),
                expected,
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EvalError::NonFinite { what });
        }
        Ok(())
    }

    fn check_matrix(
        what: &'static str,
        m: &DMatrix<f64>,
        rows: usize,
        cols: usize,
    ) -> Result<(), EvalError> {
        if m.nrows() != rows || m.ncols() != cols {
            return Err(EvalError::Dimension {
                what,
                got: m.nrows() * m.ncols(),
                expected: rows * cols,
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(EvalError::NonFinite { what });
        }
        Ok(())
    }

    pub fn objective(&mut self, w: &DVector<f64>) -> Result<f64, EvalError> {
        self.check_point(w)?;
        self.counters.n_f += 1;
        let f = (self.problem.objective)(w);
        if !f.is_finite() {
            return Err(EvalError::NonFinite { what: "f" });
        }
        Ok(f)
    }

    pub fn gradient(&mut self, w: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
        self.check_point(w)?;
        self.counters.n_grad_f += 1;
        let grad = (self.problem.gradient)(w);
        Self::check_vector("grad_f", &grad, self.problem.n_w)?;
        Ok(grad)
    }

    /// One joint `(g, h)` evaluation; increments the constraint-pair tally
    /// by exactly one.
    pub fn constraint_pair(
        &mut self,
        w: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), EvalError> {
        self.check_point(w)?;
        self.counters.n_constraint_pairs += 1;
        let g = (self.problem.equalities)(w);
        Self::check_vector("g", &g, self.problem.n_g)?;
        let h = (self.problem.inequalities)(w);
        Self::check_vector("h", &h, self.problem.n_h)?;
        Ok((g, h))
    }

    pub fn jacobian_pair(
        &mut self,
        w: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError> {
        self.check_point(w)?;
        self.counters.n_jacobian_pairs += 1;
        let jg = (self.problem.jac_equalities)(w);
        Self::check_matrix("jac_g", &jg, self.problem.n_g, self.problem.n_w)?;
        let jh = (self.problem.jac_inequalities)(w);
        Self::check_matrix("jac_h", &jh, self.problem.n_h, self.problem.n_w)?;
        Ok((jg, jh))
    }

    /// Evaluate `f` and `(g, h)` at `w` and bundle them as an [`Iterate`].
    pub fn iterate(&mut self, w: &DVector<f64>) -> Result<Iterate, EvalError> {
        let f = self.objective(w)?;
        let (g, h) = self.constraint_pair(w)?;
        Ok(Iterate::new(w.clone(), f, g, h))
    }

    /// Full snapshot at `w`: objective, gradient, constraints, Jacobians.
    pub fn linearize(&mut self, w: &DVector<f64>) -> Result<Linearization, EvalError> {
        let f = self.objective(w)?;
        let grad_f = self.gradient(w)?;
        let (g, h) = self.constraint_pair(w)?;
        let (jac_g, jac_h) = self.jacobian_pair(w)?;
        Ok(Linearization {
            base: w.clone(),
            f,
            grad_f,
            g,
            h,
            jac_g,
            jac_h,
        })
    }

    /// Snapshot at an already-evaluated iterate; only the gradient and the
    /// Jacobians are (re)computed.
    pub fn linearize_at(&mut self, at: &Iterate) -> Result<Linearization, EvalError> {
        let grad_f = self.gradient(&at.w)?;
        let (jac_g, jac_h) = self.jacobian_pair(&at.w)?;
        Ok(Linearization {
            base: at.w.clone(),
            f: at.f,
            grad_f,
            g: at.g.clone(),
            h: at.h.clone(),
            jac_g,
            jac_h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn parabola_like() -> NlpProblem {
        // min w2 s.t. w2 >= w1^2, w2 >= 0.1 w1, stored as h(w) <= 0.
        NlpProblem::builder(2)
            .objective(|w| w[1], |_| dvector![0.0, 1.0])
            .inequalities(
                2,
                |w| dvector![w[0] * w[0] - w[1], 0.1 * w[0] - w[1]],
                |w| dmatrix![2.0 * w[0], -1.0; 0.1, -1.0],
            )
            .build()
    }

    #[test]
    fn infeasibility_examples() {
        assert_eq!(
            infeasibility(&dvector![0.0], &dvector![-2.0, -2.9]),
            0.0
        );
        assert_eq!(
            infeasibility(&DVector::zeros(0), &dvector![1.0, -0.65]),
            1.0
        );
        assert_relative_eq!(
            infeasibility(&dvector![0.3, -0.7], &dvector![0.2]),
            0.9,
            max_relative = 1e-15
        );
    }

    #[test]
    fn restoration_infeasibility_examples() {
        assert_eq!(
            restoration_infeasibility(&dvector![0.0], &dvector![-2.0, -2.9]),
            0.0
        );
        assert_relative_eq!(
            restoration_infeasibility(&dvector![0.3, -0.7], &dvector![0.2]),
            1.2,
            max_relative = 1e-15
        );
        assert_eq!(
            restoration_infeasibility(&DVector::zeros(0), &dvector![1.0, -0.65]),
            1.0
        );
    }

    #[test]
    fn nan_inputs_poison_both_measures() {
        let g = dvector![f64::NAN];
        let h = dvector![0.0];
        assert!(infeasibility(&g, &h).is_nan());
        assert!(restoration_infeasibility(&g, &h).is_nan());
    }

    #[test]
    fn linearize_parabola_at_start() {
        let p = parabola_like();
        let mut ev = Evaluator::new(&p);
        let lin = ev.linearize(&dvector![1.0, 3.0]).unwrap();
        assert_eq!(lin.h, dvector![-2.0, -2.9]);
        assert_eq!(lin.jac_h, dmatrix![2.0, -1.0; 0.1, -1.0]);
        // Linearized first constraint reads w2 >= 2 w1 - 1 at this point:
        // h1 + jac_h1 . (w - base) = (w1^2 - w2)|base + 2 (w1 - 1) - (w2 - 3).
        let row = lin.jac_h.row(0);
        let at = |w1: f64, w2: f64| lin.h[0] + row[0] * (w1 - 1.0) + row[1] * (w2 - 3.0);
        assert_relative_eq!(at(0.0, -1.0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(at(2.0, 3.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn linearize_sphere_at_start() {
        let lib = crate::library::make_sphere(2);
        let mut ev = Evaluator::new(&lib.problem);
        let lin = ev.linearize(&lib.default_start).unwrap();
        assert_relative_eq!(lin.g[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(lin.jac_g[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(lin.jac_g[(0, 1)], 3.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn linearize_is_deterministic() {
        let p = parabola_like();
        let mut ev = Evaluator::new(&p);
        let w = dvector![0.3, -0.7];
        let a = ev.linearize(&w).unwrap();
        let b = ev.linearize(&w).unwrap();
        assert_eq!(a.f, b.f);
        assert_eq!(a.g, b.g);
        assert_eq!(a.h, b.h);
        assert_eq!(a.jac_h, b.jac_h);
    }

    #[test]
    fn counters_track_single_calls() {
        let p = parabola_like();
        let mut ev = Evaluator::new(&p);
        let w = dvector![1.0, 3.0];
        ev.constraint_pair(&w).unwrap();
        assert_eq!(ev.counters().n_constraint_pairs, 1);
        ev.linearize(&w).unwrap();
        let c = ev.counters();
        assert_eq!(c.n_jacobian_pairs, 1);
        assert_eq!(c.n_constraint_pairs, 2);
        assert_eq!(c.n_f, 1);
        assert_eq!(c.n_grad_f, 1);
        let it = ev.iterate(&w).unwrap();
        let c = ev.counters();
        assert_eq!(c.n_constraint_pairs, 3);
        ev.linearize_at(&it).unwrap();
        let c2 = ev.counters();
        assert_eq!(c2.n_constraint_pairs, 3);
        assert_eq!(c2.n_jacobian_pairs, 2);
    }

    #[test]
    fn non_finite_outputs_error() {
        let p = NlpProblem::builder(1)
            .objective(|w| 1.0 / w[0], |w| dvector![-1.0 / (w[0] * w[0])])
            .build();
        let mut ev = Evaluator::new(&p);
        assert!(matches!(
            ev.objective(&dvector![0.0]),
            Err(EvalError::NonFinite { .. })
        ));
        assert!(ev.objective(&dvector![2.0]).is_ok());
    }

    #[test]
    fn dimension_mismatch_errors() {
        let p = NlpProblem::builder(2)
            .objective(|w| w[0], |_| dvector![1.0]) // wrong length
            .build();
        let mut ev = Evaluator::new(&p);
        assert!(matches!(
            ev.gradient(&dvector![0.0, 0.0]),
            Err(EvalError::Dimension { .. })
        ));
        assert!(matches!(
            ev.objective(&dvector![0.0]),
            Err(EvalError::PointDimension { .. })
        ));
    }

    #[test]
    fn iterate_invariant_v_matches_measure() {
        let p = parabola_like();
        let mut ev = Evaluator::new(&p);
        let it = ev.iterate(&dvector![2.0, 0.5]).unwrap();
        assert_eq!(it.v, infeasibility(&it.g, &it.h));
        assert!(it.v > 0.0);
    }

    proptest! {
        #[test]
        fn measures_vanish_together(
            g in proptest::collection::vec(-2.0f64..2.0, 0..4),
            h in proptest::collection::vec(-2.0f64..2.0, 0..4),
        ) {
            let g = DVector::from_vec(g);
            let h = DVector::from_vec(h);
            let a = infeasibility(&g, &h);
            let b = restoration_infeasibility(&g, &h);
            prop_assert_eq!(a == 0.0, b == 0.0);
            prop_assert!(a >= 0.0 && b >= 0.0);
        }

        #[test]
        fn measures_positively_homogeneous(
            g in proptest::collection::vec(-2.0f64..2.0, 0..4),
            h in proptest::collection::vec(-2.0f64..2.0, 0..4),
            c in 1e-3f64..1e3,
        ) {
            let g = DVector::from_vec(g);
            let h = DVector::from_vec(h);
            let gs = &g * c;
            let hs = &h * c;
            prop_assert!((infeasibility(&gs, &hs) - c * infeasibility(&g, &h)).abs()
                <= 1e-12 * (1.0 + c * infeasibility(&g, &h)));
            prop_assert!((restoration_infeasibility(&gs, &hs)
                - c * restoration_infeasibility(&g, &h)).abs()
                <= 1e-12 * (1.0 + c * restoration_infeasibility(&g, &h)));
        }
    }
}
