//! Differentiation of the conic-form solution map through the homogeneous
//! self-dual embedding, specialized to the zero/nonnegative cones of the
//! DC-OPF linear program.

use nalgebra::{DMatrix, DVector, Dyn};

use crate::dcopf::{LoadProfile, SolveStatus, StandardLp};
use crate::error::{Error, Result};
use crate::jacobian::{JacobianMatrix, Provenance};
use crate::linalg;
use crate::operator::OpfContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    NonNeg(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonNeg(d) => d,
        }
    }
}

/// Problem data (A, b, c) with an ordered cone list for the slack variable:
/// minimize c'x subject to Ax + s = b, s in K.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, cones: Vec<Cone>) -> Result<Self> {
        if cones.iter().any(|c| c.dim() == 0) {
            return Err(Error::InvalidArgument("cone dimensions must be positive".into()));
        }
        let total: usize = cones.iter().map(|c| c.dim()).sum();
        if total != a.nrows() || b.len() != a.nrows() || c.len() != a.ncols() {
            return Err(Error::Dimension(format!(
                "cone dims sum {total}, A is {}x{}, b {}, c {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        Ok(Self { a, b, c, cones })
    }

    pub fn n_vars(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_constraints(&self) -> usize {
        self.a.nrows()
    }
}

/// Stack the standard-form LP into conic form with a zero cone over the
/// equality rows and a nonnegative cone over the inequality rows.
pub fn to_conic(lp: &StandardLp) -> ConicProblem {
    let me = lp.a_eq.nrows();
    let mi = lp.a_in.nrows();
    let n = lp.n_vars();
    let mut a = DMatrix::zeros(me + mi, n);
    a.rows_mut(0, me).copy_from(&lp.a_eq);
    a.rows_mut(me, mi).copy_from(&lp.a_in);
    let mut b = DVector::zeros(me + mi);
    b.rows_mut(0, me).copy_from(&lp.b_eq);
    b.rows_mut(me, mi).copy_from(&lp.b_in);
    ConicProblem { a, b, c: lp.cost.clone(), cones: vec![Cone::Zero(me), Cone::NonNeg(mi)] }
}

/// The skew-symmetric embedding matrix
/// [[0, A', c], [-A, 0, b], [-c', -b', 0]].
pub fn skew_embedding_matrix(p: &ConicProblem) -> DMatrix<f64> {
    let n = p.n_vars();
    let m = p.n_constraints();
    let dim = n + m + 1;
    let mut q = DMatrix::zeros(dim, dim);
    for i in 0..m {
        for j in 0..n {
            let v = p.a[(i, j)];
            q[(j, n + i)] = v;
            q[(n + i, j)] = -v;
        }
    }
    for j in 0..n {
        q[(j, n + m)] = p.c[j];
        q[(n + m, j)] = -p.c[j];
    }
    for i in 0..m {
        q[(n + i, n + m)] = p.b[i];
        q[(n + m, n + i)] = -p.b[i];
    }
    q
}

/// Projection of the slack-dual block onto the dual cone K*: free over zero
/// cones, elementwise nonnegative part over nonnegative cones.
pub fn project_dual_cone(block: &DVector<f64>, cones: &[Cone]) -> DVector<f64> {
    let mut out = block.clone();
    let mut offset = 0;
    for cone in cones {
        match *cone {
            Cone::Zero(d) => offset += d,
            Cone::NonNeg(d) => {
                for i in offset..offset + d {
                    out[i] = out[i].max(0.0);
                }
                offset += d;
            }
        }
    }
    out
}

/// Projection onto the embedding cone C = R^n x K* x R_+.
pub fn project_embedding_cone(z: &DVector<f64>, n: usize, cones: &[Cone]) -> DVector<f64> {
    let m = z.len() - n - 1;
    let mut out = z.clone();
    let proj = project_dual_cone(&z.rows(n, m).into_owned(), cones);
    out.rows_mut(n, m).copy_from(&proj);
    out[n + m] = out[n + m].max(0.0);
    out
}

/// Diagonal of the projection derivative onto C, with the coordinates where
/// the nonnegative-orthant projection is nondifferentiable (within
/// `deriv_tol` of zero) flagged and assigned the subgradient value 1/2.
pub fn projection_derivative_diagonal(
    z: &DVector<f64>,
    n: usize,
    cones: &[Cone],
    deriv_tol: f64,
) -> (DVector<f64>, Vec<usize>) {
    let dim = z.len();
    let mut diag = DVector::from_element(dim, 1.0);
    let mut flagged = Vec::new();
    let mut offset = n;
    for cone in cones {
        match *cone {
            Cone::Zero(d) => offset += d,
            Cone::NonNeg(d) => {
                for i in offset..offset + d {
                    set_halfspace_derivative(&mut diag, &mut flagged, z, i, deriv_tol);
                }
                offset += d;
            }
        }
    }
    set_halfspace_derivative(&mut diag, &mut flagged, z, dim - 1, deriv_tol);
    (diag, flagged)
}

fn set_halfspace_derivative(
    diag: &mut DVector<f64>,
    flagged: &mut Vec<usize>,
    z: &DVector<f64>,
    i: usize,
    deriv_tol: f64,
) {
    let v = z[i];
    if v.abs() <= deriv_tol {
        diag[i] = 0.5;
        flagged.push(i);
    } else {
        // 0.5 * (sign(v) + 1)
        diag[i] = 0.5 * (v.signum() + 1.0);
    }
}

/// A point of the self-dual embedding normalized to z_3 = 1, with the
/// primal-dual triple it was built from.
#[derive(Debug, Clone)]
pub struct SelfDualPoint {
    pub z: DVector<f64>,
    pub n: usize,
    pub m: usize,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
}

/// Embed a primal-dual optimal triple as z = (x, y - s, 1).
///
/// Verifies conic optimality and the embedding residual ||Q u - v|| at the
/// constructed point; fails with `NotOptimal` otherwise.
pub fn embed_from_solution(
    p: &ConicProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    s: &DVector<f64>,
    embed_tol: f64,
) -> Result<SelfDualPoint> {
    let n = p.n_vars();
    let m = p.n_constraints();
    if x.len() != n || y.len() != m || s.len() != m {
        return Err(Error::Dimension("embedding point sizes do not match the problem".into()));
    }
    let scale = 1.0 + linalg::inf_norm(&p.b).max(linalg::inf_norm(&p.c));
    let primal = &p.a * x + s - &p.b;
    if linalg::inf_norm(&primal) > embed_tol * scale {
        return Err(Error::NotOptimal(format!(
            "primal residual {:.3e}",
            linalg::inf_norm(&primal)
        )));
    }
    let dual = p.a.transpose() * y + &p.c;
    if linalg::inf_norm(&dual) > embed_tol * scale {
        return Err(Error::NotOptimal(format!("dual residual {:.3e}", linalg::inf_norm(&dual))));
    }
    let mut offset = 0;
    for cone in &p.cones {
        match *cone {
            Cone::Zero(d) => {
                for i in offset..offset + d {
                    if s[i].abs() > embed_tol * scale {
                        return Err(Error::NotOptimal(format!(
                            "zero-cone slack {} is {:.3e}",
                            i, s[i]
                        )));
                    }
                }
                offset += d;
            }
            Cone::NonNeg(d) => {
                for i in offset..offset + d {
                    if s[i] < -embed_tol * scale || y[i] < -embed_tol * scale {
                        return Err(Error::NotOptimal(format!(
                            "cone membership violated at coordinate {i}"
                        )));
                    }
                }
                offset += d;
            }
        }
    }
    let gap = s.dot(y).abs();
    if gap > embed_tol * scale {
        return Err(Error::NotOptimal(format!("complementarity gap {gap:.3e}")));
    }

    let mut z = DVector::zeros(n + m + 1);
    z.rows_mut(0, n).copy_from(x);
    z.rows_mut(n, m).copy_from(&(y - s));
    z[n + m] = 1.0;

    let q = skew_embedding_matrix(p);
    let u = project_embedding_cone(&z, n, &p.cones);
    let v = &u - &z;
    let residual = linalg::inf_norm(&(&q * &u - v));
    if residual > embed_tol * scale {
        return Err(Error::NotOptimal(format!("embedding residual {residual:.3e}")));
    }
    Ok(SelfDualPoint { z, n, m, x: x.clone(), y: y.clone(), s: s.clone() })
}

/// Sparse perturbation of the problem data; absent blocks are zero.
#[derive(Debug, Clone, Default)]
pub struct PerturbationTriple {
    pub da: Option<DMatrix<f64>>,
    pub db: Option<DVector<f64>>,
    pub dc: Option<DVector<f64>>,
}

impl PerturbationTriple {
    pub fn from_db(db: DVector<f64>) -> Self {
        Self { da: None, db: Some(db), dc: None }
    }
}

#[derive(Debug, Clone)]
pub struct DerivativeResult {
    pub dx: DVector<f64>,
    pub dy: DVector<f64>,
    pub ds: DVector<f64>,
    /// Projection coordinates where the subgradient value 1/2 was used.
    pub nondifferentiable: Vec<usize>,
}

/// Factorized derivative of the solution map at a self-dual point; supports
/// repeated directional derivatives against one factorization.
pub struct SolutionMapDerivative {
    n: usize,
    m: usize,
    mat: DMatrix<f64>,
    lu: Option<nalgebra::LU<f64, Dyn, Dyn>>,
    svd: Option<nalgebra::SVD<f64, Dyn, Dyn>>,
    svd_eps: f64,
    u: DVector<f64>,
    dual_diag: DVector<f64>,
    x: DVector<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
    cond: f64,
    pub nondifferentiable: Vec<usize>,
}

const ILL_CONDITIONED: f64 = 1e12;

impl SolutionMapDerivative {
    pub fn new(p: &ConicProblem, point: &SelfDualPoint, deriv_tol: f64) -> Result<Self> {
        let n = point.n;
        let m = point.m;
        let dim = n + m + 1;
        let z3 = point.z[dim - 1];
        if z3 <= 0.0 || z3.is_nan() {
            return Err(Error::NotOptimal(format!("embedding scale z3 = {z3} must be positive")));
        }
        let q = skew_embedding_matrix(p);
        let (diag, flagged) = projection_derivative_diagonal(&point.z, n, &p.cones, deriv_tol);
        // M = ((Q - I) * DP + I) / z3, with DP diagonal
        let mut mat = q;
        for i in 0..dim {
            mat[(i, i)] -= 1.0;
        }
        for j in 0..dim {
            let d = diag[j];
            if d != 1.0 {
                for i in 0..dim {
                    mat[(i, j)] *= d;
                }
            }
        }
        for i in 0..dim {
            mat[(i, i)] += 1.0;
        }
        mat /= z3;

        let cond = linalg::condition_estimate(&mat);
        let mut lu = None;
        let mut svd = None;
        let mut svd_eps = 0.0;
        if cond <= ILL_CONDITIONED {
            lu = Some(mat.clone().lu());
        } else {
            let s = mat.clone().svd(true, true);
            svd_eps = 1e-12 * s.singular_values.max().max(f64::MIN_POSITIVE);
            svd = Some(s);
        }
        let u = project_embedding_cone(&(&point.z / z3), n, &p.cones);
        let dual_diag = diag.rows(n, m).into_owned();
        Ok(Self {
            n,
            m,
            mat,
            lu,
            svd,
            svd_eps,
            u,
            dual_diag,
            x: point.x.clone(),
            y: point.y.clone(),
            s: point.s.clone(),
            cond,
            nondifferentiable: flagged,
        })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.cond
    }

    fn rhs(&self, pert: &PerturbationTriple) -> Result<DVector<f64>> {
        let n = self.n;
        let m = self.m;
        if let Some(da) = &pert.da {
            if da.shape() != (m, n) {
                return Err(Error::Dimension("dA shape mismatch".into()));
            }
        }
        if let Some(db) = &pert.db {
            if db.len() != m {
                return Err(Error::Dimension("db length mismatch".into()));
            }
        }
        if let Some(dc) = &pert.dc {
            if dc.len() != n {
                return Err(Error::Dimension("dc length mismatch".into()));
            }
        }
        let u1 = self.u.rows(0, n);
        let u2 = self.u.rows(n, m);
        let u3 = self.u[n + m];
        // g = dQ * u assembled block-wise from the perturbed pieces only
        let mut g = DVector::zeros(n + m + 1);
        if let Some(da) = &pert.da {
            let top = da.transpose() * u2;
            let mid = -(da * u1);
            for i in 0..n {
                g[i] += top[i];
            }
            for i in 0..m {
                g[n + i] += mid[i];
            }
        }
        if let Some(db) = &pert.db {
            for i in 0..m {
                g[n + i] += db[i] * u3;
            }
            g[n + m] -= db.dot(&u2);
        }
        if let Some(dc) = &pert.dc {
            for i in 0..n {
                g[i] += dc[i] * u3;
            }
            g[n + m] -= dc.dot(&u1);
        }
        Ok(g)
    }

    /// Directional derivative (dx, dy, ds) for one data perturbation.
    pub fn apply(&self, pert: &PerturbationTriple) -> Result<DerivativeResult> {
        let g = self.rhs(pert)?;
        let neg_g = -&g;
        let dz = if let Some(lu) = &self.lu {
            lu.solve(&neg_g)
                .unwrap_or_else(|| linalg::lstsq(&self.mat, &neg_g, 1e-12))
        } else if let Some(svd) = &self.svd {
            svd.solve(&neg_g, self.svd_eps)
                .map_err(|e| Error::Solver(format!("svd solve: {e}")))?
        } else {
            unreachable!("one factorization is always present")
        };
        let residual = linalg::inf_norm(&(&self.mat * &dz + &g));
        if residual > 1e-6 * (1.0 + linalg::inf_norm(&g)) {
            return Err(Error::SingularSystem { cond: self.cond });
        }

        let n = self.n;
        let m = self.m;
        let dz1 = dz.rows(0, n).into_owned();
        let dz2 = dz.rows(n, m).into_owned();
        let dz3 = dz[n + m];
        let dx = &dz1 - &self.x * dz3;
        let mut proj_dz2 = DVector::zeros(m);
        for i in 0..m {
            proj_dz2[i] = self.dual_diag[i] * dz2[i];
        }
        let dy = &proj_dz2 - &self.y * dz3;
        let ds = &proj_dz2 - &dz2 - &self.s * dz3;
        Ok(DerivativeResult { dx, dy, ds, nondifferentiable: self.nondifferentiable.clone() })
    }
}

/// One-shot derivative of the solution map for a single perturbation.
pub fn solution_map_derivative(
    p: &ConicProblem,
    point: &SelfDualPoint,
    pert: &PerturbationTriple,
    deriv_tol: f64,
) -> Result<DerivativeResult> {
    SolutionMapDerivative::new(p, point, deriv_tol)?.apply(pert)
}

/// Solve the OPF at `load` and package the point in conic form.
pub fn conic_point(ctx: &OpfContext, load: &DVector<f64>) -> Result<(ConicProblem, SelfDualPoint)> {
    let lp = ctx.lp(load)?;
    let sol = crate::dcopf::solve_lp(&lp)?;
    match sol.status {
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        SolveStatus::Unbounded => return Err(Error::Unbounded),
        SolveStatus::Optimal => {}
    }
    let p = to_conic(&lp);
    let n = p.n_vars();
    let mut x = DVector::zeros(n);
    for g in 0..lp.n_gen {
        x[g] = sol.sg[g];
    }
    for b in 0..lp.n_bus {
        x[lp.n_gen + b] = sol.theta[b];
    }
    let me = lp.a_eq.nrows();
    let mi = lp.a_in.nrows();
    let mut y = DVector::zeros(me + mi);
    y.rows_mut(0, me).copy_from(&sol.equality_duals_lp_order());
    y.rows_mut(me, mi).copy_from(&sol.inequality_duals_lp_order());
    let s = &p.b - &p.a * &x;
    let point = embed_from_solution(&p, &x, &y, &s, ctx.opts.embed_tol)?;
    Ok((p, point))
}

fn load_rows_db(lp_n_gen: usize, n_load: usize, dload: &DVector<f64>, m: usize) -> DVector<f64> {
    // b_eq = [0; ...; -load], so d b = -dload in the load balance slots
    let mut db = DVector::zeros(m);
    for l in 0..n_load {
        db[1 + lp_n_gen + l] = -dload[l];
    }
    db
}

/// Directional derivative of optimal generation along a load direction,
/// computed through the self-dual embedding.
pub fn opf_derivative_via_conic(
    ctx: &OpfContext,
    load: &LoadProfile,
    dload: &DVector<f64>,
) -> Result<DVector<f64>> {
    if dload.len() != ctx.net.n_load() {
        return Err(Error::Dimension("dload length".into()));
    }
    let (p, point) = conic_point(ctx, load.as_vector())?;
    let deriv = SolutionMapDerivative::new(&p, &point, ctx.opts.deriv_tol)?;
    let db = load_rows_db(ctx.net.n_gen(), ctx.net.n_load(), dload, p.n_constraints());
    let result = deriv.apply(&PerturbationTriple::from_db(db))?;
    Ok(result.dx.rows(0, ctx.net.n_gen()).into_owned())
}

/// Full conic Jacobian: one factorization, one unit load direction per
/// column.
pub fn conic_jacobian(ctx: &OpfContext, load: &LoadProfile) -> Result<JacobianMatrix> {
    let (p, point) = conic_point(ctx, load.as_vector())?;
    let deriv = SolutionMapDerivative::new(&p, &point, ctx.opts.deriv_tol)?;
    let n_gen = ctx.net.n_gen();
    let n_load = ctx.net.n_load();
    let mut matrix = DMatrix::zeros(n_gen, n_load);
    for j in 0..n_load {
        let mut dload = DVector::zeros(n_load);
        dload[j] = 1.0;
        let db = load_rows_db(n_gen, n_load, &dload, p.n_constraints());
        let result = deriv.apply(&PerturbationTriple::from_db(db))?;
        matrix.set_column(j, &result.dx.rows(0, n_gen));
    }
    Ok(JacobianMatrix { matrix, provenance: Provenance::Conic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_problem() -> ConicProblem {
        ConicProblem::new(
            DMatrix::from_row_slice(1, 1, &[2.0]),
            DVector::from_vec(vec![3.0]),
            DVector::from_vec(vec![5.0]),
            vec![Cone::NonNeg(1)],
        )
        .unwrap()
    }

    #[test]
    fn skew_matrix_explicit_three_by_three() {
        let q = skew_embedding_matrix(&tiny_problem());
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 5.0, -2.0, 0.0, 3.0, -5.0, -3.0, 0.0]);
        assert_eq!(q, expected);
    }

    #[test]
    fn skew_symmetry_random_data_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let m = rng.random_range(1..6);
            let n = rng.random_range(1..6);
            let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-5.0..5.0));
            let b = DVector::from_fn(m, |_, _| rng.random_range(-5.0..5.0));
            let c = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
            let p = ConicProblem::new(a, b, c, vec![Cone::NonNeg(m)]).unwrap();
            let q = skew_embedding_matrix(&p);
            let sum = &q + q.transpose();
            assert_eq!(sum.amax(), 0.0);
        }
    }

    #[test]
    fn halfspace_projection_derivative_values() {
        let z = DVector::from_vec(vec![2.0, -3.0, 0.0]);
        let (diag, flagged) =
            projection_derivative_diagonal(&z, 0, &[Cone::NonNeg(2)], 1e-9);
        assert_eq!(diag[0], 1.0);
        assert_eq!(diag[1], 0.0);
        // z3 slot is exactly zero: flagged with subgradient 1/2
        assert_eq!(diag[2], 0.5);
        assert_eq!(flagged, vec![2]);
    }

    #[test]
    fn projection_idempotent_and_moreau() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 3;
        let cones = vec![Cone::Zero(2), Cone::NonNeg(4)];
        for _ in 0..10_000 {
            let z = DVector::from_fn(n + 6 + 1, |_, _| rng.random_range(-2.0..2.0));
            let u = project_embedding_cone(&z, n, &cones);
            let uu = project_embedding_cone(&u, n, &cones);
            assert_eq!(u, uu);
            // Moreau: z = P_C z + P_{-C*} z, where P_{-C*} z = z - P_C z
            // must itself lie in -C* = {0}^n x (-K) x R_-
            let w = &z - &u;
            for i in 0..n {
                assert_eq!(w[i], 0.0);
            }
            for i in n..n + 2 {
                // -K zero-cone slots: anything already absorbed by identity
                assert_eq!(w[i], 0.0);
            }
            for i in n + 2..n + 6 {
                assert!(w[i] <= 0.0);
            }
            assert!(w[n + 6] <= 0.0);
            let recomposed = &u + &w;
            assert!((recomposed - &z).amax() <= 1e-12);
        }
    }

    #[test]
    fn zero_perturbation_gives_exact_zero() {
        let ctx = OpfContext::from_case(&crate::netmodel::ieee9());
        let load = LoadProfile::new(DVector::from_vec(vec![1.0, 0.9, 1e-10, 1.0, 1e-10, 1.25]))
            .unwrap();
        let dsg =
            opf_derivative_via_conic(&ctx, &load, &DVector::zeros(ctx.net.n_load())).unwrap();
        assert_eq!(dsg.amax(), 0.0);
    }

    #[test]
    fn ieee9_conic_dimensions() {
        let ctx = OpfContext::from_case(&crate::netmodel::ieee9());
        let load = DVector::from_vec(vec![1.0, 0.9, 1e-10, 1.0, 1e-10, 1.25]);
        let lp = ctx.lp(&load).unwrap();
        let p = to_conic(&lp);
        assert_eq!(p.n_constraints(), 34);
        assert_eq!(p.n_vars(), 12);
        assert_eq!(p.cones, vec![Cone::Zero(10), Cone::NonNeg(24)]);
        let q = skew_embedding_matrix(&p);
        assert_eq!(q.shape(), (47, 47));
    }

    #[test]
    fn embedding_residual_small_at_optimum() {
        let ctx = OpfContext::from_case(&crate::netmodel::ieee9());
        let load = DVector::from_vec(vec![1.0, 0.9, 1e-10, 1.0, 1e-10, 1.25]);
        let (p, point) = conic_point(&ctx, &load).unwrap();
        assert_eq!(point.z[point.n + point.m], 1.0);
        let u = project_embedding_cone(&point.z, point.n, &p.cones);
        let v = &u - &point.z;
        // complementarity of the embedded parts
        assert!(u.dot(&v).abs() <= 1e-9);
        let q = skew_embedding_matrix(&p);
        assert!(linalg::inf_norm(&(&q * &u - &v)) <= 1e-8);
    }

    #[test]
    fn not_optimal_rejected() {
        let p = tiny_problem();
        // x = 0 is feasible but not optimal (c > 0 pushes x down; dual fails)
        let x = DVector::from_vec(vec![1.0]);
        let y = DVector::from_vec(vec![0.0]);
        let s = &p.b - &p.a * &x;
        let err = embed_from_solution(&p, &x, &y, &s, 1e-7).unwrap_err();
        assert!(matches!(err, Error::NotOptimal(_)));
    }

    #[test]
    fn derivative_linear_in_perturbation() {
        let ctx = OpfContext::from_case(&crate::netmodel::ieee9());
        let load = LoadProfile::new(DVector::from_vec(vec![1.0, 0.9, 1e-10, 1.0, 1e-10, 1.25]))
            .unwrap();
        let (p, point) = conic_point(&ctx, load.as_vector()).unwrap();
        let deriv = SolutionMapDerivative::new(&p, &point, 1e-9).unwrap();
        let m = p.n_constraints();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p1 = PerturbationTriple::from_db(DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)));
        let p2 = PerturbationTriple::from_db(DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)));
        let (alpha, beta) = (0.3, -1.7);
        let combo = PerturbationTriple::from_db(
            p1.db.as_ref().unwrap() * alpha + p2.db.as_ref().unwrap() * beta,
        );
        let r1 = deriv.apply(&p1).unwrap();
        let r2 = deriv.apply(&p2).unwrap();
        let rc = deriv.apply(&combo).unwrap();
        let lin = &r1.dx * alpha + &r2.dx * beta;
        assert!((lin - rc.dx).amax() <= 1e-9);
    }
}
