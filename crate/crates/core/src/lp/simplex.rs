//! Two-phase primal simplex on the bounded-variable computational form.
//!
//! Inequalities get a slack column; rows whose initial residual cannot be
//! covered by a slack get an artificial column. Phase one minimizes the sum
//! of artificials; a positive optimum certifies infeasibility. The basis
//! inverse is kept explicitly and rebuilt periodically.

use nalgebra::{DMatrix, DVector};

use super::{LpProblem, LpSolution, LpStatus, EPS_LP};
use crate::error::LpError;

const PIVOT_TOL: f64 = 1e-10;
const RATIO_TIE: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-11;
const BLAND_TRIGGER: usize = 50;
const REFACTOR_EVERY: usize = 256;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Location {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable, resting at zero.
    FreeAtZero,
}

#[derive(Clone, Copy, Debug)]
enum Leaving {
    /// Entering variable reaches its opposite bound; no basis change.
    Flip,
    /// Basic variable in this row reaches a bound.
    Row { r: usize, to_upper: bool },
    /// No blocking constraint.
    None,
}

enum RunOutcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    n_total: usize,
    n_struct: usize,
    first_artificial: usize,
    cols: DMatrix<f64>,
    /// Row indices of the nonzero entries per column; the constraint
    /// matrix never changes, so pricing and FTRAN can skip the zeros.
    col_nnz: Vec<Vec<u32>>,
    lb: DVector<f64>,
    ub: DVector<f64>,
    rhs: DVector<f64>,
    cost: DVector<f64>,
    loc: Vec<Location>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    x: DVector<f64>,
    iterations: usize,
    limit: usize,
    pivots_since_refactor: usize,
    degenerate_streak: usize,
    bland: bool,
}

pub(super) fn solve(lp: &LpProblem) -> Result<LpSolution, LpError> {
    let n = lp.num_vars();
    let mut t = Tableau::build(lp);

    if t.first_artificial < t.n_total {
        t.set_phase1_cost();
        match t.optimize()? {
            RunOutcome::Optimal => {}
            RunOutcome::Unbounded => {
                return Err(LpError::Numerical(
                    "phase-one objective reported unbounded".into(),
                ))
            }
        }
        let artificial_sum: f64 = (t.first_artificial..t.n_total).map(|j| t.x[j]).sum();
        if artificial_sum > EPS_LP {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: DVector::zeros(n),
                objective: f64::NAN,
            });
        }
        t.drive_out_artificials();
    }

    t.set_phase2_cost(lp);
    let outcome = t.optimize()?;
    match outcome {
        RunOutcome::Unbounded => Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: DVector::zeros(n),
            objective: f64::NAN,
        }),
        RunOutcome::Optimal => {
            t.finalize()?;
            let x = DVector::from_fn(n, |i, _| t.x[i]);
            let objective = lp.c.dot(&x);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                x,
                objective,
            })
        }
    }
}

impl Tableau {
    fn build(lp: &LpProblem) -> Self {
        let n = lp.num_vars();
        let me = lp.b_eq.len();
        let mi = lp.b_in.len();
        let m = me + mi;

        // Nonbasic starting point: finite lower bound, else finite upper
        // bound, else zero (free).
        let mut x0 = DVector::zeros(n);
        let mut loc0 = Vec::with_capacity(n);
        for j in 0..n {
            if lp.lb[j].is_finite() {
                x0[j] = lp.lb[j];
                loc0.push(Location::AtLower);
            } else if lp.ub[j].is_finite() {
                x0[j] = lp.ub[j];
                loc0.push(Location::AtUpper);
            } else {
                loc0.push(Location::FreeAtZero);
            }
        }

        let mut residual = DVector::zeros(m);
        for i in 0..me {
            residual[i] = lp.b_eq[i] - lp.a_eq.row(i).transpose().dot(&x0);
        }
        for i in 0..mi {
            residual[me + i] = lp.b_in[i] - lp.a_in.row(i).transpose().dot(&x0);
        }

        // Rows needing an artificial: every equality, plus inequalities
        // whose slack would start negative.
        let needs_artificial: Vec<bool> = (0..m)
            .map(|i| i < me || residual[i] < 0.0)
            .collect();
        let n_art = needs_artificial.iter().filter(|&&b| b).count();
        let n_total = n + mi + n_art;
        let first_artificial = n + mi;

        let mut cols = DMatrix::zeros(m, n_total);
        cols.view_mut((0, 0), (me, n)).copy_from(&lp.a_eq);
        cols.view_mut((me, 0), (mi, n)).copy_from(&lp.a_in);
        for i in 0..mi {
            cols[(me + i, n + i)] = 1.0;
        }

        let mut lb = DVector::zeros(n_total);
        let mut ub = DVector::from_element(n_total, f64::INFINITY);
        lb.rows_mut(0, n).copy_from(&lp.lb);
        ub.rows_mut(0, n).copy_from(&lp.ub);

        let mut x = DVector::zeros(n_total);
        x.rows_mut(0, n).copy_from(&x0);

        let mut loc = loc0;
        loc.resize(n_total, Location::AtLower);

        let mut basis = Vec::with_capacity(m);
        let mut binv = DMatrix::zeros(m, m);
        let mut art = first_artificial;
        for i in 0..m {
            if needs_artificial[i] {
                let sign = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
                cols[(i, art)] = sign;
                x[art] = residual[i].abs();
                loc[art] = Location::Basic(i);
                basis.push(art);
                binv[(i, i)] = sign;
                art += 1;
            } else {
                let slack = n + (i - me);
                x[slack] = residual[i];
                loc[slack] = Location::Basic(i);
                basis.push(slack);
                binv[(i, i)] = 1.0;
            }
        }

        let mut rhs = DVector::zeros(m);
        rhs.rows_mut(0, me).copy_from(&lp.b_eq);
        rhs.rows_mut(me, mi).copy_from(&lp.b_in);

        let col_nnz = (0..n_total)
            .map(|j| {
                (0..m)
                    .filter(|&i| cols[(i, j)] != 0.0)
                    .map(|i| i as u32)
                    .collect()
            })
            .collect();

        let limit = 50 * (n_total + m);
        Tableau {
            m,
            n_total,
            n_struct: n,
            first_artificial,
            cols,
            col_nnz,
            lb,
            ub,
            rhs,
            cost: DVector::zeros(n_total),
            loc,
            basis,
            binv,
            x,
            iterations: 0,
            limit,
            pivots_since_refactor: 0,
            degenerate_streak: 0,
            bland: false,
        }
    }

    fn set_phase1_cost(&mut self) {
        self.cost.fill(0.0);
        for j in self.first_artificial..self.n_total {
            self.cost[j] = 1.0;
        }
    }

    fn set_phase2_cost(&mut self, lp: &LpProblem) {
        self.cost.fill(0.0);
        self.cost.rows_mut(0, self.n_struct).copy_from(&lp.c);
        // Artificials stay fixed at zero from here on.
        for j in self.first_artificial..self.n_total {
            self.lb[j] = 0.0;
            self.ub[j] = 0.0;
            if !matches!(self.loc[j], Location::Basic(_)) {
                self.x[j] = 0.0;
                self.loc[j] = Location::AtLower;
            }
        }
    }

    fn optimize(&mut self) -> Result<RunOutcome, LpError> {
        loop {
            if self.iterations > self.limit {
                return Err(LpError::IterationLimit(self.limit));
            }
            self.iterations += 1;

            let y = self.dual_prices();
            let Some((enter, dir)) = self.price(&y) else {
                return Ok(RunOutcome::Optimal);
            };
            let d = self.ftran(enter);
            let (t, leaving) = self.ratio_test(enter, dir, &d);
            match leaving {
                Leaving::None => return Ok(RunOutcome::Unbounded),
                Leaving::Flip => self.apply_flip(enter, dir, t, &d),
                Leaving::Row { r, to_upper } => self.apply_pivot(enter, dir, t, r, to_upper, &d)?,
            }

            if t <= DEGENERATE_STEP {
                self.degenerate_streak += 1;
                if self.degenerate_streak >= BLAND_TRIGGER {
                    self.bland = true;
                }
            } else {
                self.degenerate_streak = 0;
            }
        }
    }

    /// y = B^-T c_B. The basic cost vector is usually very sparse (a
    /// single-variable objective in phase two, surviving artificials in
    /// phase one), so gather the few rows of the inverse directly.
    fn dual_prices(&self) -> DVector<f64> {
        let m = self.m;
        let nonzero: Vec<(usize, f64)> = self
            .basis
            .iter()
            .enumerate()
            .filter_map(|(r, &j)| {
                let c = self.cost[j];
                (c != 0.0).then_some((r, c))
            })
            .collect();
        let binv = self.binv.as_slice();
        let mut y = DVector::zeros(m);
        if nonzero.len() * 4 > m {
            let mut cb = DVector::zeros(m);
            for &(r, c) in &nonzero {
                cb[r] = c;
            }
            self.binv.tr_mul_to(&cb, &mut y);
        } else {
            let ys = y.as_mut_slice();
            for &(r, c) in &nonzero {
                for col in 0..m {
                    ys[col] += c * binv[col * m + r];
                }
            }
        }
        y
    }

    /// Most negative reduced-cost pricing with lowest-index tie-breaking;
    /// Bland's rule (first eligible index) once the degeneracy counter has
    /// tripped. Returns the entering column and its movement direction.
    fn price(&self, y: &DVector<f64>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n_total {
            match self.loc[j] {
                Location::Basic(_) => continue,
                _ => {}
            }
            if self.lb[j] == self.ub[j] {
                continue;
            }
            let z = self.cost[j] - self.sparse_dot(j, y.as_slice());
            let cand = match self.loc[j] {
                Location::AtLower if z < -EPS_LP => Some((1.0, -z)),
                Location::AtUpper if z > EPS_LP => Some((-1.0, z)),
                Location::FreeAtZero if z.abs() > EPS_LP => Some((-z.signum(), z.abs())),
                _ => None,
            };
            if let Some((dir, viol)) = cand {
                if self.bland {
                    return Some((j, dir));
                }
                match best {
                    Some((_, _, best_viol)) if viol <= best_viol => {}
                    _ => best = Some((j, dir, viol)),
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// v . A_j over the nonzero entries of column j.
    fn sparse_dot(&self, j: usize, v: &[f64]) -> f64 {
        let col = &self.cols.as_slice()[j * self.m..(j + 1) * self.m];
        self.col_nnz[j]
            .iter()
            .map(|&i| {
                let i = i as usize;
                v[i] * col[i]
            })
            .sum()
    }

    /// d = B^-1 A_enter, accumulated column-wise over the nonzeros of the
    /// entering column.
    fn ftran(&self, enter: usize) -> DVector<f64> {
        let m = self.m;
        let col = &self.cols.as_slice()[enter * m..(enter + 1) * m];
        let binv = self.binv.as_slice();
        let mut d = DVector::zeros(m);
        let ds = d.as_mut_slice();
        for &i in &self.col_nnz[enter] {
            let i = i as usize;
            let a = col[i];
            let bcol = &binv[i * m..(i + 1) * m];
            for (dv, &bv) in ds.iter_mut().zip(bcol) {
                *dv += a * bv;
            }
        }
        d
    }

    fn ratio_test(&self, enter: usize, dir: f64, d: &DVector<f64>) -> (f64, Leaving) {
        // Pass 1: candidate limit per row and the global minimum ratio.
        let mut limits: Vec<(usize, bool, f64, f64)> = Vec::new(); // (row, to_upper, t, |pivot|)
        let mut t_row = f64::INFINITY;
        for r in 0..self.m {
            let k = self.basis[r];
            let rate = dir * d[r]; // basic value moves as x_k - t * rate
            let (t, to_upper, mag) = if rate > PIVOT_TOL {
                if !self.lb[k].is_finite() {
                    continue;
                }
                (((self.x[k] - self.lb[k]) / rate).max(0.0), false, rate)
            } else if rate < -PIVOT_TOL {
                if !self.ub[k].is_finite() {
                    continue;
                }
                (((self.ub[k] - self.x[k]) / -rate).max(0.0), true, -rate)
            } else {
                continue;
            };
            t_row = t_row.min(t);
            limits.push((r, to_upper, t, mag));
        }

        // Pass 2: among rows within a tolerance of the minimum, prefer the
        // largest pivot magnitude (Bland mode: the lowest variable index).
        let tie = RATIO_TIE * (1.0 + t_row.max(0.0));
        let mut chosen: Option<(usize, bool, f64, f64)> = None;
        for &(r, to_upper, t, mag) in &limits {
            if t > t_row + tie {
                continue;
            }
            let replace = match chosen {
                None => true,
                Some((cr, _, _, cmag)) => {
                    if self.bland {
                        self.basis[r] < self.basis[cr]
                    } else {
                        mag > cmag * (1.0 + f64::EPSILON)
                    }
                }
            };
            if replace {
                chosen = Some((r, to_upper, t, mag));
            }
        }

        let range = self.ub[enter] - self.lb[enter];
        let t_flip = if range.is_finite() {
            range
        } else {
            f64::INFINITY
        };

        match chosen {
            Some((r, to_upper, t, _)) if t < t_flip => (t, Leaving::Row { r, to_upper }),
            _ => {
                if t_flip.is_finite() {
                    (t_flip, Leaving::Flip)
                } else {
                    (f64::INFINITY, Leaving::None)
                }
            }
        }
    }

    fn apply_flip(&mut self, enter: usize, dir: f64, t: f64, d: &DVector<f64>) {
        for r in 0..self.m {
            let k = self.basis[r];
            self.x[k] -= dir * t * d[r];
        }
        if dir > 0.0 {
            self.x[enter] = self.ub[enter];
            self.loc[enter] = Location::AtUpper;
        } else {
            self.x[enter] = self.lb[enter];
            self.loc[enter] = Location::AtLower;
        }
    }

    fn apply_pivot(
        &mut self,
        enter: usize,
        dir: f64,
        t: f64,
        r: usize,
        to_upper: bool,
        d: &DVector<f64>,
    ) -> Result<(), LpError> {
        let leave = self.basis[r];
        for row in 0..self.m {
            let k = self.basis[row];
            self.x[k] -= dir * t * d[row];
        }
        self.x[enter] += dir * t;
        // Snap the leaving variable exactly onto the bound it reached.
        if to_upper {
            self.x[leave] = self.ub[leave];
            self.loc[leave] = Location::AtUpper;
        } else {
            self.x[leave] = self.lb[leave];
            self.loc[leave] = Location::AtLower;
        }
        self.basis[r] = enter;
        self.loc[enter] = Location::Basic(r);
        self.eta_update(r, d)?;
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refresh()?;
        }
        Ok(())
    }

    /// Rank-one update of the explicit basis inverse after the column in
    /// row `r` was replaced; `d` is the entering column in basis
    /// coordinates (computed before the swap).
    fn eta_update(&mut self, r: usize, d: &DVector<f64>) -> Result<(), LpError> {
        let dr = d[r];
        if dr.abs() <= PIVOT_TOL {
            return Err(LpError::Numerical("vanishing pivot element".into()));
        }
        let m = self.m;
        let ds = d.as_slice();
        let binv = self.binv.as_mut_slice();
        for c in 0..m {
            let bcol = &mut binv[c * m..(c + 1) * m];
            let brc = bcol[r];
            if brc == 0.0 {
                continue;
            }
            let scaled = brc / dr;
            for (bv, &dv) in bcol.iter_mut().zip(ds) {
                *bv -= dv * scaled;
            }
            bcol[r] = scaled;
        }
        Ok(())
    }

    /// Right-hand side minus the contribution of all nonbasic variables.
    fn nonbasic_residual(&self) -> DVector<f64> {
        let mut r = self.rhs.clone();
        let rs = r.as_mut_slice();
        let cols = self.cols.as_slice();
        for j in 0..self.n_total {
            if matches!(self.loc[j], Location::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            let col = &cols[j * self.m..(j + 1) * self.m];
            for &i in &self.col_nnz[j] {
                let i = i as usize;
                rs[i] -= xj * col[i];
            }
        }
        r
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let mut bmat = DMatrix::zeros(self.m, self.m);
        for (r, &j) in self.basis.iter().enumerate() {
            bmat.set_column(r, &self.cols.column(j));
        }
        bmat
    }

    /// Rebuild the basis inverse from scratch and recompute basic values.
    fn refresh(&mut self) -> Result<(), LpError> {
        self.pivots_since_refactor = 0;
        if self.m == 0 {
            return Ok(());
        }
        self.binv = self
            .basis_matrix()
            .try_inverse()
            .ok_or_else(|| LpError::Numerical("singular basis matrix".into()))?;
        let r = self.nonbasic_residual();
        let xb = &self.binv * r;
        for (row, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[row];
        }
        Ok(())
    }

    /// Cheap exit polish: re-solve for the basic values only when the
    /// accumulated row residual says the incremental updates drifted.
    fn finalize(&mut self) -> Result<(), LpError> {
        if self.m == 0 {
            return Ok(());
        }
        let mut residual = self.nonbasic_residual();
        let rs = residual.as_mut_slice();
        let cols = self.cols.as_slice();
        let mut scale = 1.0f64;
        for (r, &j) in self.basis.iter().enumerate() {
            let xj = self.x[j];
            scale = scale.max(xj.abs());
            let col = &cols[j * self.m..(j + 1) * self.m];
            let _ = r;
            for &i in &self.col_nnz[j] {
                let i = i as usize;
                rs[i] -= xj * col[i];
            }
        }
        let drift = residual.amax();
        if drift <= 1e-11 * scale.max(1.0) {
            return Ok(());
        }
        let lu = self.basis_matrix().lu();
        let xb = lu
            .solve(&self.nonbasic_residual())
            .ok_or_else(|| LpError::Numerical("singular basis matrix".into()))?;
        for (row, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[row];
        }
        Ok(())
    }

    /// Pivot zero-valued artificials out of the basis where a structural or
    /// slack column can replace them; rows with no such column are
    /// redundant and keep their artificial pinned at zero.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let brow = self.binv.row(r).transpose();
            let mut found = None;
            for j in 0..self.first_artificial {
                if matches!(self.loc[j], Location::Basic(_)) {
                    continue;
                }
                if self.lb[j] == self.ub[j] {
                    continue;
                }
                let pivot = brow.dot(&self.cols.column(j));
                if pivot.abs() > 1e-7 {
                    found = Some(j);
                    break;
                }
            }
            if let Some(j) = found {
                let d = self.ftran(j);
                let art = self.basis[r];
                self.x[art] = 0.0;
                self.loc[art] = Location::AtLower;
                self.basis[r] = j;
                self.loc[j] = Location::Basic(r);
                // Degenerate swap: values are unchanged, only the basis and
                // its inverse are updated.
                if self.eta_update(r, &d).is_err() {
                    // Should not happen given the pivot magnitude check;
                    // fall back to a full refresh.
                    let _ = self.refresh();
                }
            }
        }
    }
}
