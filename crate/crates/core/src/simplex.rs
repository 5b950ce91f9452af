//! Two-phase revised simplex with an explicit basis inverse.
//!
//! Free structural variables are split into nonnegative pairs internally, so
//! the computational form is min c'x, Ax = b, x >= 0 with slack columns for
//! every inequality row. Splitting makes stationarity exact over structural
//! variables: both halves of a pair price out to zero at optimality, which is
//! what makes basis-exact dual recovery possible.
//!
//! Pivot selection is fully deterministic (Dantzig with lowest-index ties,
//! Bland's rule after a run of degenerate pivots), so repeated solves of the
//! same data are bit-identical.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub feas_tol: f64,
    pub bland_after: usize,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { pivot_tol: 1e-9, feas_tol: 1e-8, bland_after: 50, max_iter: 100_000 }
    }
}

const REFACTOR_EVERY: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    /// Positive half of structural variable k.
    Plus(usize),
    /// Negative half of structural variable k.
    Minus(usize),
    /// Slack of inequality row i.
    Slack(usize),
    Artificial(usize),
}

pub struct SimplexSolution {
    pub status: SimplexStatus,
    /// Structural solution (undefined unless `Optimal`).
    pub x: DVector<f64>,
    pub objective: f64,
    /// Equality-row multipliers in the convention c + A_eq' nu + A_in' eta = 0.
    pub eq_duals: DVector<f64>,
    /// Inequality-row multipliers, nonnegative at optimality.
    pub in_duals: DVector<f64>,
    pub detail: Option<Tableau>,
}

/// Final solver state; retained for optimality-face probes.
pub struct Tableau {
    m: usize,
    n_struct: usize,
    n_real: usize,
    n_eq: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
    costs: Vec<f64>,
    kinds: Vec<ColKind>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    flip: Vec<f64>,
    degenerate_streak: usize,
    pivots_since_refactor: usize,
    iterations: usize,
    phase_one: bool,
    artificial_costs: Vec<f64>,
    y_cache: DVector<f64>,
}

enum StepOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn build(
        a_eq: &DMatrix<f64>,
        b_eq: &DVector<f64>,
        a_in: &DMatrix<f64>,
        b_in: &DVector<f64>,
        c: &DVector<f64>,
    ) -> Self {
        let n_struct = c.len();
        let me = a_eq.nrows();
        let mi = a_in.nrows();
        let m = me + mi;
        let n_real = 2 * n_struct + mi;

        let mut flip = vec![1.0_f64; m];
        let mut b = DVector::zeros(m);
        for i in 0..me {
            b[i] = b_eq[i];
        }
        for i in 0..mi {
            b[me + i] = b_in[i];
        }
        for i in 0..m {
            if b[i] < 0.0 {
                flip[i] = -1.0;
                b[i] = -b[i];
            }
        }

        // Rows needing an artificial column: all equality rows plus flipped
        // inequality rows (their slack coefficient became -1).
        let mut art_rows = Vec::new();
        for (i, &sigma) in flip.iter().enumerate() {
            if i < me || sigma < 0.0 {
                art_rows.push(i);
            }
        }
        let n_total = n_real + art_rows.len();

        let mut a = DMatrix::zeros(m, n_total);
        let mut kinds = Vec::with_capacity(n_total);
        let mut costs = Vec::with_capacity(n_total);
        for k in 0..n_struct {
            for i in 0..me {
                a[(i, 2 * k)] = flip[i] * a_eq[(i, k)];
            }
            for i in 0..mi {
                a[(me + i, 2 * k)] = flip[me + i] * a_in[(i, k)];
            }
            for i in 0..m {
                a[(i, 2 * k + 1)] = -a[(i, 2 * k)];
            }
            kinds.push(ColKind::Plus(k));
            kinds.push(ColKind::Minus(k));
            costs.push(c[k]);
            costs.push(-c[k]);
        }
        for i in 0..mi {
            a[(me + i, 2 * n_struct + i)] = flip[me + i];
            kinds.push(ColKind::Slack(i));
            costs.push(0.0);
        }
        let mut artificial_costs = vec![0.0; n_real];
        for (t, &row) in art_rows.iter().enumerate() {
            a[(row, n_real + t)] = 1.0;
            kinds.push(ColKind::Artificial(t));
            costs.push(0.0);
            artificial_costs.push(1.0);
        }

        let mut basis = vec![usize::MAX; m];
        let mut in_basis = vec![false; n_total];
        let mut next_art = 0usize;
        for i in 0..m {
            let col = if i >= me && flip[i] > 0.0 {
                2 * n_struct + (i - me)
            } else {
                let col = n_real + next_art;
                next_art += 1;
                col
            };
            basis[i] = col;
            in_basis[col] = true;
        }

        let binv = DMatrix::identity(m, m);
        let xb = b.clone();
        Self {
            m,
            n_struct,
            n_real,
            n_eq: me,
            a,
            b,
            costs,
            kinds,
            basis,
            in_basis,
            binv,
            xb,
            flip,
            degenerate_streak: 0,
            pivots_since_refactor: 0,
            iterations: 0,
            phase_one: true,
            artificial_costs,
            y_cache: DVector::zeros(m),
        }
    }

    fn cost_of(&self, col: usize) -> f64 {
        if self.phase_one {
            self.artificial_costs[col]
        } else {
            self.costs[col]
        }
    }

    fn compute_duals(&mut self) {
        let mut cb = DVector::zeros(self.m);
        for i in 0..self.m {
            cb[i] = self.cost_of(self.basis[i]);
        }
        self.y_cache = self.binv.transpose() * cb;
    }

    fn enterable(&self, col: usize) -> bool {
        if self.in_basis[col] {
            return false;
        }
        if !self.phase_one && matches!(self.kinds[col], ColKind::Artificial(_)) {
            return false;
        }
        true
    }

    fn refactor(&mut self) -> Result<()> {
        let mut bmat = DMatrix::zeros(self.m, self.m);
        for (i, &col) in self.basis.iter().enumerate() {
            bmat.set_column(i, &self.a.column(col));
        }
        let inv = bmat
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Solver("basis matrix singular at refactorization".into()))?;
        self.binv = inv;
        self.xb = &self.binv * &self.b;
        for v in self.xb.iter_mut() {
            if *v < 0.0 && *v > -1e-9 {
                *v = 0.0;
            }
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn apply_eta(&mut self, row: usize, d: &DVector<f64>) {
        // binv <- E * binv where E is the eta matrix of (row, d)
        let pivot = d[row];
        let mut pivot_row = self.binv.row(row).into_owned();
        pivot_row /= pivot;
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let factor = d[i];
            if factor != 0.0 {
                for j in 0..self.m {
                    self.binv[(i, j)] -= factor * pivot_row[j];
                }
            }
        }
        self.binv.row_mut(row).copy_from(&pivot_row);
    }

    fn pivot(&mut self, enter: usize, row: usize, step: f64, d: &DVector<f64>) -> Result<()> {
        for i in 0..self.m {
            self.xb[i] -= step * d[i];
            if self.xb[i] < 0.0 && self.xb[i] > -1e-9 {
                self.xb[i] = 0.0;
            }
        }
        self.xb[row] = step;
        let leaving = self.basis[row];
        self.in_basis[leaving] = false;
        self.basis[row] = enter;
        self.in_basis[enter] = true;
        self.apply_eta(row, d);
        if step.abs() <= 1e-12 {
            self.degenerate_streak += 1;
        } else {
            self.degenerate_streak = 0;
        }
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn run_phase(&mut self, opts: &SimplexOptions) -> Result<StepOutcome> {
        loop {
            self.iterations += 1;
            if self.iterations > opts.max_iter {
                return Err(Error::Solver(format!(
                    "iteration limit {} exceeded",
                    opts.max_iter
                )));
            }
            self.compute_duals();
            let priced = (self.y_cache.transpose() * &self.a).transpose();

            let bland = self.degenerate_streak > opts.bland_after;
            let mut enter: Option<(usize, f64)> = None;
            for col in 0..self.a.ncols() {
                if !self.enterable(col) {
                    continue;
                }
                let rc = self.cost_of(col) - priced[col];
                if rc < -opts.pivot_tol {
                    if bland {
                        enter = Some((col, rc));
                        break;
                    }
                    match enter {
                        Some((_, best)) if rc >= best => {}
                        _ => enter = Some((col, rc)),
                    }
                }
            }
            let Some((enter_col, _)) = enter else {
                return Ok(StepOutcome::Optimal);
            };

            let d = &self.binv * self.a.column(enter_col);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if d[i] > opts.pivot_tol {
                    let ratio = self.xb[i].max(0.0) / d[i];
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((r, best)) => {
                            let tie = (ratio - best).abs() <= 1e-10 * (1.0 + best.abs());
                            if (tie && self.basis[i] < self.basis[r]) || (!tie && ratio < best) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((leave_row, step)) = leave else {
                return Ok(StepOutcome::Unbounded);
            };
            self.pivot(enter_col, leave_row, step, &d)?;
        }
    }

    fn phase_one_objective(&self) -> f64 {
        let mut obj = 0.0;
        for i in 0..self.m {
            obj += self.artificial_costs[self.basis[i]] * self.xb[i];
        }
        obj
    }

    /// Drive any artificial still basic (at zero level) out of the basis.
    fn expel_artificials(&mut self, opts: &SimplexOptions) -> Result<()> {
        for row in 0..self.m {
            if !matches!(self.kinds[self.basis[row]], ColKind::Artificial(_)) {
                continue;
            }
            let transformed_row = self.binv.row(row) * &self.a;
            let mut chosen = None;
            for col in 0..self.n_real {
                if self.in_basis[col] {
                    continue;
                }
                if transformed_row[col].abs() > opts.pivot_tol {
                    chosen = Some(col);
                    break;
                }
            }
            let col = chosen.ok_or_else(|| {
                Error::Solver("dependent constraint row: artificial cannot leave basis".into())
            })?;
            let d = &self.binv * self.a.column(col);
            let step = self.xb[row] / d[row];
            self.pivot(col, row, step, &d)?;
        }
        Ok(())
    }

    fn structural_solution(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_struct);
        for i in 0..self.m {
            match self.kinds[self.basis[i]] {
                ColKind::Plus(k) => x[k] += self.xb[i],
                ColKind::Minus(k) => x[k] -= self.xb[i],
                _ => {}
            }
        }
        x
    }

    /// Row duals of the original (unflipped) rows, add convention:
    /// c + A_eq' nu + A_in' eta = 0 with eta >= 0 at optimality.
    fn row_duals(&mut self) -> (DVector<f64>, DVector<f64>) {
        self.compute_duals();
        let mut nu = DVector::zeros(self.n_eq);
        let mut eta = DVector::zeros(self.m - self.n_eq);
        for i in 0..self.m {
            let orig = -self.flip[i] * self.y_cache[i];
            if i < self.n_eq {
                nu[i] = orig;
            } else {
                eta[i - self.n_eq] = orig;
            }
        }
        (nu, eta)
    }

    /// Reduced cost of column `col` under phase-2 costs (duals must be fresh).
    pub(crate) fn phase2_reduced_cost(&self, col: usize) -> f64 {
        self.costs[col] - self.y_cache.dot(&self.a.column(col))
    }

    pub(crate) fn n_real_cols(&self) -> usize {
        self.n_real
    }

    pub(crate) fn is_basic(&self, col: usize) -> bool {
        self.in_basis[col]
    }

    pub(crate) fn is_artificial(&self, col: usize) -> bool {
        matches!(self.kinds[col], ColKind::Artificial(_))
    }

    /// Basic-variable changes per unit step of entering `col`.
    pub(crate) fn entering_direction(&self, col: usize) -> DVector<f64> {
        &self.binv * self.a.column(col)
    }

    /// Largest feasible step for entering `col`; infinite on a ray.
    pub(crate) fn max_step(&self, d: &DVector<f64>, pivot_tol: f64) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.m {
            if d[i] > pivot_tol {
                best = best.min(self.xb[i].max(0.0) / d[i]);
            }
        }
        best
    }

    /// Structural-space direction induced by entering `col` with unit step.
    pub(crate) fn structural_direction(&self, col: usize, d: &DVector<f64>) -> DVector<f64> {
        let mut dx = DVector::zeros(self.n_struct);
        match self.kinds[col] {
            ColKind::Plus(k) => dx[k] += 1.0,
            ColKind::Minus(k) => dx[k] -= 1.0,
            _ => {}
        }
        for i in 0..self.m {
            match self.kinds[self.basis[i]] {
                ColKind::Plus(k) => dx[k] -= d[i],
                ColKind::Minus(k) => dx[k] += d[i],
                _ => {}
            }
        }
        dx
    }
}

/// Solve min c'x subject to A_eq x = b_eq, A_in x <= b_in, x free.
pub fn solve_standard_form(
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    a_in: &DMatrix<f64>,
    b_in: &DVector<f64>,
    c: &DVector<f64>,
    opts: &SimplexOptions,
) -> Result<SimplexSolution> {
    let n = c.len();
    if a_eq.ncols() != n || a_in.ncols() != n {
        return Err(Error::Dimension(format!(
            "constraint matrices have {} / {} columns, cost has {}",
            a_eq.ncols(),
            a_in.ncols(),
            n
        )));
    }
    if a_eq.nrows() != b_eq.len() || a_in.nrows() != b_in.len() {
        return Err(Error::Dimension("constraint rows and rhs lengths differ".into()));
    }

    let mut t = Tableau::build(a_eq, b_eq, a_in, b_in, c);

    t.phase_one = true;
    match t.run_phase(opts)? {
        StepOutcome::Unbounded => {
            return Err(Error::Solver("phase-1 objective unbounded below".into()))
        }
        StepOutcome::Optimal => {}
    }
    let feas_scale = 1.0 + t.b.amax();
    if t.phase_one_objective() > opts.feas_tol * feas_scale {
        return Ok(SimplexSolution {
            status: SimplexStatus::Infeasible,
            x: DVector::zeros(n),
            objective: f64::NAN,
            eq_duals: DVector::zeros(a_eq.nrows()),
            in_duals: DVector::zeros(a_in.nrows()),
            detail: None,
        });
    }
    t.expel_artificials(opts)?;

    t.phase_one = false;
    t.degenerate_streak = 0;
    match t.run_phase(opts)? {
        StepOutcome::Unbounded => {
            return Ok(SimplexSolution {
                status: SimplexStatus::Unbounded,
                x: DVector::zeros(n),
                objective: f64::NEG_INFINITY,
                eq_duals: DVector::zeros(a_eq.nrows()),
                in_duals: DVector::zeros(a_in.nrows()),
                detail: None,
            })
        }
        StepOutcome::Optimal => {}
    }

    // Refactor once at the end so the reported point and duals come from a
    // freshly inverted basis rather than a chain of eta updates.
    t.refactor()?;
    let x = t.structural_solution();
    let objective = c.dot(&x);
    let (nu, eta) = t.row_duals();
    Ok(SimplexSolution {
        status: SimplexStatus::Optimal,
        x,
        objective,
        eq_duals: nu,
        in_duals: eta,
        detail: Some(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve(
        a_eq: Vec<f64>,
        me: usize,
        b_eq: Vec<f64>,
        a_in: Vec<f64>,
        mi: usize,
        b_in: Vec<f64>,
        c: Vec<f64>,
    ) -> SimplexSolution {
        let n = c.len();
        let a_eq = DMatrix::from_row_slice(me, n, &a_eq);
        let a_in = DMatrix::from_row_slice(mi, n, &a_in);
        solve_standard_form(
            &a_eq,
            &DVector::from_vec(b_eq),
            &a_in,
            &DVector::from_vec(b_in),
            &DVector::from_vec(c),
            &SimplexOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn equality_and_bounds() {
        // min x1 + 2 x2 s.t. x1 + x2 = 1, 0 <= x <= 1 elementwise
        let sol = solve(
            vec![1.0, 1.0],
            1,
            vec![1.0],
            vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0],
            4,
            vec![1.0, 1.0, 0.0, 0.0],
            vec![1.0, 2.0],
        );
        assert_eq!(sol.status, SimplexStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn free_variable_goes_negative() {
        // min x s.t. x >= -3  (as -x <= 3)
        let sol = solve(vec![], 0, vec![], vec![-1.0], 1, vec![3.0], vec![1.0]);
        assert_eq!(sol.status, SimplexStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], -3.0, epsilon = 1e-9);
        // dual: c + A_in' eta = 0 -> 1 - eta = 0
        assert_abs_diff_eq!(sol.in_duals[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        // x <= 1 and x >= 2
        let sol = solve(vec![], 0, vec![], vec![1.0, -1.0], 2, vec![1.0, -2.0], vec![1.0]);
        assert_eq!(sol.status, SimplexStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        // min -x s.t. x >= 0
        let sol = solve(vec![], 0, vec![], vec![-1.0], 1, vec![0.0], vec![-1.0]);
        assert_eq!(sol.status, SimplexStatus::Unbounded);
    }

    #[test]
    fn duals_satisfy_stationarity_and_strong_duality() {
        // min -x1 - 2 x2 s.t. x1 + x2 <= 4, x1 <= 2, x >= 0
        let a_in = DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 1.0, 1.0, 0.0, -1.0, 0.0, 0.0, -1.0],
        );
        let b_in = DVector::from_vec(vec![4.0, 2.0, 0.0, 0.0]);
        let c = DVector::from_vec(vec![-1.0, -2.0]);
        let sol = solve_standard_form(
            &DMatrix::zeros(0, 2),
            &DVector::zeros(0),
            &a_in,
            &b_in,
            &c,
            &SimplexOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.status, SimplexStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, -8.0, epsilon = 1e-9);
        let stat = &c + a_in.transpose() * &sol.in_duals;
        assert!(stat.amax() < 1e-9);
        assert!(sol.in_duals.min() >= -1e-12);
        // strong duality: c'x + b_in' eta = 0
        assert_abs_diff_eq!(sol.objective + b_in.dot(&sol.in_duals), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn repeated_solves_bit_identical() {
        let a_eq = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let b_eq = DVector::from_vec(vec![2.0]);
        let a_in = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0,
                0.0, -1.0,
            ],
        );
        let b_in = DVector::from_vec(vec![1.5, 1.5, 1.5, 0.0, 0.0, 0.0]);
        let c = DVector::from_vec(vec![3.0, 1.0, 2.0]);
        let opts = SimplexOptions::default();
        let s1 = solve_standard_form(&a_eq, &b_eq, &a_in, &b_in, &c, &opts).unwrap();
        let s2 = solve_standard_form(&a_eq, &b_eq, &a_in, &b_in, &c, &opts).unwrap();
        assert_eq!(s1.x.as_slice(), s2.x.as_slice());
        assert_eq!(s1.eq_duals.as_slice(), s2.eq_duals.as_slice());
        assert_eq!(s1.in_duals.as_slice(), s2.in_duals.as_slice());
    }
}
