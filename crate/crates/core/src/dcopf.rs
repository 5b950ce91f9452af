//! DC optimal power flow: LP assembly, solution with duals, KKT checks and
//! binding-constraint detection.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::netmodel::PowerNetwork;
use crate::simplex::{self, SimplexOptions, SimplexStatus};

/// Per-generator marginal costs, nonnegative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector(DVector<f64>);

impl CostVector {
    pub fn new(f: DVector<f64>) -> Result<Self> {
        for (i, v) in f.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "cost entry {} is {v}; costs must be finite and nonnegative",
                    i + 1
                )));
            }
        }
        Ok(Self(f))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }
}

/// Generator and branch capacity bounds: sg_max > sg_min >= 0, p_max > p_min.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityLimits {
    pub sg_max: DVector<f64>,
    pub sg_min: DVector<f64>,
    pub p_max: DVector<f64>,
    pub p_min: DVector<f64>,
}

impl CapacityLimits {
    pub fn new(
        sg_max: DVector<f64>,
        sg_min: DVector<f64>,
        p_max: DVector<f64>,
        p_min: DVector<f64>,
    ) -> Result<Self> {
        if sg_max.len() != sg_min.len() {
            return Err(Error::Dimension("sg_max and sg_min lengths differ".into()));
        }
        if p_max.len() != p_min.len() {
            return Err(Error::Dimension("p_max and p_min lengths differ".into()));
        }
        for i in 0..sg_max.len() {
            if sg_min[i] < 0.0 || sg_min[i].is_nan() {
                return Err(Error::InvalidArgument(format!(
                    "sg_min[{}] = {} must be nonnegative",
                    i + 1,
                    sg_min[i]
                )));
            }
            if sg_max[i] <= sg_min[i] || sg_max[i].is_nan() {
                return Err(Error::InvalidArgument(format!(
                    "generator {} limits not well posed: need sg_max > sg_min, got ({}, {})",
                    i + 1,
                    sg_max[i],
                    sg_min[i]
                )));
            }
        }
        for e in 0..p_max.len() {
            if p_max[e] <= p_min[e] || p_max[e].is_nan() || p_min[e].is_nan() {
                return Err(Error::InvalidArgument(format!(
                    "branch {} limits not well posed: need p_max > p_min, got ({}, {})",
                    e + 1,
                    p_max[e],
                    p_min[e]
                )));
            }
        }
        Ok(Self { sg_max, sg_min, p_max, p_min })
    }

    pub fn n_gen(&self) -> usize {
        self.sg_max.len()
    }

    pub fn n_edges(&self) -> usize {
        self.p_max.len()
    }
}

/// Strictly positive demand vector over the load buses.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile(DVector<f64>);

impl LoadProfile {
    pub fn new(sl: DVector<f64>) -> Result<Self> {
        for (i, v) in sl.iter().enumerate() {
            if *v <= 0.0 || !v.is_finite() {
                return Err(Error::NonPositiveLoad { index: i + 1, value: *v });
            }
        }
        Ok(Self(sl))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }
}

/// The DC-OPF in standard LP form over x = [generation; angles].
///
/// Equality rows: [slack-angle row; N nodal balance rows]. Inequality rows:
/// [E upper-flow; E lower-flow; N_G upper-generation; N_G lower-generation].
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub cost: DVector<f64>,
    pub n_gen: usize,
    pub n_bus: usize,
    pub n_edge: usize,
}

impl StandardLp {
    pub fn n_vars(&self) -> usize {
        self.n_gen + self.n_bus
    }
}

/// Assemble the standard-form LP for a network, cost, limits and raw load
/// vector (signs unrestricted here; operator-level code enforces positivity).
pub fn assemble_lp(
    net: &PowerNetwork,
    cost: &CostVector,
    limits: &CapacityLimits,
    load: &DVector<f64>,
) -> Result<StandardLp> {
    let n_gen = net.n_gen();
    let n_bus = net.n_buses();
    let n_edge = net.n_edges();
    if cost.len() != n_gen {
        return Err(Error::Dimension(format!("cost length {} != {n_gen}", cost.len())));
    }
    if limits.n_gen() != n_gen || limits.n_edges() != n_edge {
        return Err(Error::Dimension("limits do not match network dimensions".into()));
    }
    if load.len() != net.n_load() {
        return Err(Error::Dimension(format!(
            "load length {} != {}",
            load.len(),
            net.n_load()
        )));
    }

    let lap = net.laplacian();
    let flow = net.branch_flow_matrix();
    let n_vars = n_gen + n_bus;

    // [ 0      e_1' ]           theta_1 = 0
    // [ -I | L_gen  ]           nodal balance, generator buses
    // [  0 | L_load ]           nodal balance, load buses
    let mut a_eq = DMatrix::zeros(n_bus + 1, n_vars);
    a_eq[(0, n_gen)] = 1.0;
    for i in 0..n_bus {
        for j in 0..n_bus {
            a_eq[(1 + i, n_gen + j)] = lap[(i, j)];
        }
    }
    for g in 0..n_gen {
        a_eq[(1 + g, g)] = -1.0;
    }
    let mut b_eq = DVector::zeros(n_bus + 1);
    for l in 0..net.n_load() {
        b_eq[1 + n_gen + l] = -load[l];
    }

    // [  B C' ] <= p_max     [  I ] <= sg_max
    // [ -B C' ] <= -p_min    [ -I ] <= -sg_min
    let mut a_in = DMatrix::zeros(2 * n_edge + 2 * n_gen, n_vars);
    for e in 0..n_edge {
        for j in 0..n_bus {
            a_in[(e, n_gen + j)] = flow[(e, j)];
            a_in[(n_edge + e, n_gen + j)] = -flow[(e, j)];
        }
    }
    for g in 0..n_gen {
        a_in[(2 * n_edge + g, g)] = 1.0;
        a_in[(2 * n_edge + n_gen + g, g)] = -1.0;
    }
    let mut b_in = DVector::zeros(2 * n_edge + 2 * n_gen);
    for e in 0..n_edge {
        b_in[e] = limits.p_max[e];
        b_in[n_edge + e] = -limits.p_min[e];
    }
    for g in 0..n_gen {
        b_in[2 * n_edge + g] = limits.sg_max[g];
        b_in[2 * n_edge + n_gen + g] = -limits.sg_min[g];
    }

    let mut c = DVector::zeros(n_vars);
    for g in 0..n_gen {
        c[g] = cost.as_vector()[g];
    }

    Ok(StandardLp { a_eq, b_eq, a_in, b_in, cost: c, n_gen, n_bus, n_edge })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Optimal dispatch with dual multipliers.
///
/// `tau` holds the nodal-balance multipliers in bus order followed by the
/// slack-angle multiplier; `lambda`/`mu` are the generator and branch bound
/// multipliers, nonnegative at optimality.
#[derive(Debug, Clone)]
pub struct DispatchSolution {
    pub status: SolveStatus,
    pub sg: DVector<f64>,
    pub theta: DVector<f64>,
    pub flows: DVector<f64>,
    pub objective: f64,
    pub tau: DVector<f64>,
    pub lambda_plus: DVector<f64>,
    pub lambda_minus: DVector<f64>,
    pub mu_plus: DVector<f64>,
    pub mu_minus: DVector<f64>,
}

impl DispatchSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn non_optimal(status: SolveStatus, lp: &StandardLp) -> Self {
        Self {
            status,
            sg: DVector::zeros(lp.n_gen),
            theta: DVector::zeros(lp.n_bus),
            flows: DVector::zeros(lp.n_edge),
            objective: f64::NAN,
            tau: DVector::zeros(lp.n_bus + 1),
            lambda_plus: DVector::zeros(lp.n_gen),
            lambda_minus: DVector::zeros(lp.n_gen),
            mu_plus: DVector::zeros(lp.n_edge),
            mu_minus: DVector::zeros(lp.n_edge),
        }
    }

    /// Equality-row multipliers in LP row order ([slack row; bus rows]).
    pub fn equality_duals_lp_order(&self) -> DVector<f64> {
        let n_bus = self.tau.len() - 1;
        let mut nu = DVector::zeros(n_bus + 1);
        nu[0] = self.tau[n_bus];
        for i in 0..n_bus {
            nu[1 + i] = self.tau[i];
        }
        nu
    }

    /// Inequality-row multipliers in LP row order
    /// ([mu_plus; mu_minus; lambda_plus; lambda_minus]).
    pub fn inequality_duals_lp_order(&self) -> DVector<f64> {
        let e = self.mu_plus.len();
        let g = self.lambda_plus.len();
        let mut eta = DVector::zeros(2 * e + 2 * g);
        for i in 0..e {
            eta[i] = self.mu_plus[i];
            eta[e + i] = self.mu_minus[i];
        }
        for i in 0..g {
            eta[2 * e + i] = self.lambda_plus[i];
            eta[2 * e + g + i] = self.lambda_minus[i];
        }
        eta
    }
}

pub(crate) fn simplex_options(pivot_tol: f64) -> SimplexOptions {
    SimplexOptions { pivot_tol, ..SimplexOptions::default() }
}

pub(crate) fn solve_lp_with_detail(
    lp: &StandardLp,
    pivot_tol: f64,
) -> Result<(DispatchSolution, Option<simplex::Tableau>)> {
    let opts = simplex_options(pivot_tol);
    let sol = simplex::solve_standard_form(&lp.a_eq, &lp.b_eq, &lp.a_in, &lp.b_in, &lp.cost, &opts)?;
    match sol.status {
        SimplexStatus::Infeasible => {
            Ok((DispatchSolution::non_optimal(SolveStatus::Infeasible, lp), None))
        }
        SimplexStatus::Unbounded => {
            Ok((DispatchSolution::non_optimal(SolveStatus::Unbounded, lp), None))
        }
        SimplexStatus::Optimal => {
            let n_gen = lp.n_gen;
            let n_bus = lp.n_bus;
            let n_edge = lp.n_edge;
            let sg = sol.x.rows(0, n_gen).into_owned();
            let theta = sol.x.rows(n_gen, n_bus).into_owned();
            // flows = B C' theta, read off the upper-flow block of A_in
            let flows = lp.a_in.rows(0, n_edge) * &sol.x;
            let mut tau = DVector::zeros(n_bus + 1);
            for i in 0..n_bus {
                tau[i] = sol.eq_duals[1 + i];
            }
            tau[n_bus] = sol.eq_duals[0];
            let eta = &sol.in_duals;
            let mu_plus = eta.rows(0, n_edge).into_owned();
            let mu_minus = eta.rows(n_edge, n_edge).into_owned();
            let lambda_plus = eta.rows(2 * n_edge, n_gen).into_owned();
            let lambda_minus = eta.rows(2 * n_edge + n_gen, n_gen).into_owned();
            let dispatch = DispatchSolution {
                status: SolveStatus::Optimal,
                sg,
                theta,
                flows,
                objective: sol.objective,
                tau,
                lambda_plus,
                lambda_minus,
                mu_plus,
                mu_minus,
            };
            Ok((dispatch, sol.detail))
        }
    }
}

/// Solve the standard-form LP, recovering duals from the optimal basis.
pub fn solve_lp(lp: &StandardLp) -> Result<DispatchSolution> {
    solve_lp_with_detail(lp, SimplexOptions::default().pivot_tol).map(|(d, _)| d)
}

/// Assemble and solve in one step.
pub fn solve_opf(
    net: &PowerNetwork,
    cost: &CostVector,
    limits: &CapacityLimits,
    load: &DVector<f64>,
) -> Result<DispatchSolution> {
    let lp = assemble_lp(net, cost, limits, load)?;
    solve_lp(&lp)
}

/// Named maxima of the four KKT residual groups.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

/// Residuals of the KKT system at a reported solution.
pub fn kkt_residuals(sol: &DispatchSolution, lp: &StandardLp) -> KktReport {
    let mut x = DVector::zeros(lp.n_vars());
    for g in 0..lp.n_gen {
        x[g] = sol.sg[g];
    }
    for b in 0..lp.n_bus {
        x[lp.n_gen + b] = sol.theta[b];
    }
    let nu = sol.equality_duals_lp_order();
    let eta = sol.inequality_duals_lp_order();

    let stat = &lp.cost + lp.a_eq.transpose() * &nu + lp.a_in.transpose() * &eta;
    let stationarity = linalg::inf_norm(&stat);

    let eq_res = &lp.a_eq * &x - &lp.b_eq;
    let in_res = &lp.a_in * &x - &lp.b_in;
    let mut primal = linalg::inf_norm(&eq_res);
    for v in in_res.iter() {
        primal = primal.max(v.max(0.0));
    }

    let dual = eta.iter().fold(0.0_f64, |acc, &v| acc.max(-v));

    let slack = &lp.b_in - &lp.a_in * &x;
    let mut complementarity = 0.0_f64;
    for i in 0..eta.len() {
        complementarity = complementarity.max((eta[i] * slack[i]).abs());
    }

    KktReport { stationarity, primal, dual, complementarity }
}

/// Which side of a two-sided bound is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

/// Binding generator and branch inequalities with a rank certificate for the
/// stacked equality + binding-inequality gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingSet {
    /// (generator index, side), 1-based, sorted by index.
    pub gens: Vec<(usize, Side)>,
    /// (edge index, side), 1-based, sorted by index.
    pub branches: Vec<(usize, Side)>,
    pub rank_certificate: usize,
}

impl BindingSet {
    pub fn count(&self) -> usize {
        self.gens.len() + self.branches.len()
    }

    pub fn gen_indices(&self) -> Vec<usize> {
        self.gens.iter().map(|&(i, _)| i).collect()
    }

    pub fn branch_indices(&self) -> Vec<usize> {
        self.branches.iter().map(|&(i, _)| i).collect()
    }

    /// Canonical serialization used for region identity.
    pub fn canonical_key(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        for &(i, side) in &self.gens {
            parts.push(format!("g{}{}", i, side_char(side)));
        }
        parts.push("|".into());
        for &(e, side) in &self.branches {
            parts.push(format!("b{}{}", e, side_char(side)));
        }
        parts.join(",")
    }

    /// Stable 64-bit FNV-1a hash of the canonical key.
    pub fn region_hash(&self) -> u64 {
        fnv1a(self.canonical_key().as_bytes())
    }

    /// Same index sets regardless of bound sides.
    pub fn same_index_sets(&self, other: &BindingSet) -> bool {
        self.gen_indices() == other.gen_indices() && self.branch_indices() == other.branch_indices()
    }
}

fn side_char(side: Side) -> char {
    match side {
        Side::Upper => '+',
        Side::Lower => '-',
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// A bound whose two sides both lie within the detection tolerance, so the
/// active side is ambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateLimit {
    Generator(usize),
    Branch(usize),
}

#[derive(Debug, Clone)]
pub struct BindingDetection {
    pub set: BindingSet,
    /// Bounds where both sides were within tolerance; flagged, not fatal.
    pub degenerate_limits: Vec<DegenerateLimit>,
}

/// Detect binding inequalities at an optimal solution.
///
/// A bound is binding when its gap is at most `tol * max(1, |limit|)`. The
/// rank certificate is the numerical rank of the stacked equality rows plus
/// binding inequality rows of the LP.
pub fn detect_binding(
    sol: &DispatchSolution,
    net: &PowerNetwork,
    limits: &CapacityLimits,
    tol: f64,
    rank_rel_tol: f64,
) -> BindingDetection {
    debug_assert!(sol.is_optimal());
    let mut gens = Vec::new();
    let mut branches = Vec::new();
    let mut degenerate = Vec::new();

    for g in 0..limits.n_gen() {
        let up = limits.sg_max[g] - sol.sg[g];
        let lo = sol.sg[g] - limits.sg_min[g];
        let up_tol = tol * limits.sg_max[g].abs().max(1.0);
        let lo_tol = tol * limits.sg_min[g].abs().max(1.0);
        let up_bind = up <= up_tol;
        let lo_bind = lo <= lo_tol;
        if up_bind && lo_bind {
            degenerate.push(DegenerateLimit::Generator(g + 1));
            gens.push((g + 1, if up <= lo { Side::Upper } else { Side::Lower }));
        } else if up_bind {
            gens.push((g + 1, Side::Upper));
        } else if lo_bind {
            gens.push((g + 1, Side::Lower));
        }
    }
    for e in 0..limits.n_edges() {
        let up = limits.p_max[e] - sol.flows[e];
        let lo = sol.flows[e] - limits.p_min[e];
        let up_tol = tol * limits.p_max[e].abs().max(1.0);
        let lo_tol = tol * limits.p_min[e].abs().max(1.0);
        let up_bind = up <= up_tol;
        let lo_bind = lo <= lo_tol;
        if up_bind && lo_bind {
            degenerate.push(DegenerateLimit::Branch(e + 1));
            branches.push((e + 1, if up <= lo { Side::Upper } else { Side::Lower }));
        } else if up_bind {
            branches.push((e + 1, Side::Upper));
        } else if lo_bind {
            branches.push((e + 1, Side::Lower));
        }
    }

    let rank_certificate = binding_rank(net, &gens, &branches, rank_rel_tol);
    BindingDetection {
        set: BindingSet { gens, branches, rank_certificate },
        degenerate_limits: degenerate,
    }
}

/// Rank of the stacked equality gradients plus binding inequality gradients.
fn binding_rank(
    net: &PowerNetwork,
    gens: &[(usize, Side)],
    branches: &[(usize, Side)],
    rank_rel_tol: f64,
) -> usize {
    let n_gen = net.n_gen();
    let n_bus = net.n_buses();
    let n_vars = n_gen + n_bus;
    let lap = net.laplacian();
    let flow = net.branch_flow_matrix();
    let rows = n_bus + 1 + gens.len() + branches.len();
    let mut m = DMatrix::zeros(rows, n_vars);
    m[(0, n_gen)] = 1.0;
    for i in 0..n_bus {
        for j in 0..n_bus {
            m[(1 + i, n_gen + j)] = lap[(i, j)];
        }
    }
    for g in 0..n_gen {
        m[(1 + g, g)] = -1.0;
    }
    let mut r = n_bus + 1;
    for &(g, _) in gens {
        m[(r, g - 1)] = 1.0;
        r += 1;
    }
    for &(e, _) in branches {
        for j in 0..n_bus {
            m[(r, n_gen + j)] = flow[(e - 1, j)];
        }
        r += 1;
    }
    linalg::rank(&m, rank_rel_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Uniqueness {
    Unique,
    MultipleSuspected,
}

/// Empirical uniqueness probe.
///
/// Re-solves the LP and inspects the optimal face: a nonbasic column with
/// (near) zero reduced cost that admits a positive step changing the
/// generation vector signals an alternate optimum. Columns whose entering
/// direction leaves the generation unchanged (such as the negative half of a
/// split free variable) are not evidence of multiplicity. A seeded re-solve
/// under a tiny cost jitter provides a second, independent signal.
pub fn uniqueness_probe(lp: &StandardLp, sol: &DispatchSolution, seed: u64) -> Result<Uniqueness> {
    if !sol.is_optimal() {
        return Ok(Uniqueness::Unique);
    }
    let pivot_tol = SimplexOptions::default().pivot_tol;
    let (resolved, detail) = solve_lp_with_detail(lp, pivot_tol)?;
    if !resolved.is_optimal() {
        return Ok(Uniqueness::Unique);
    }
    let tableau = detail.expect("optimal solve retains detail");

    let rc_tol = 1e-9 * (1.0 + linalg::inf_norm(&lp.cost));
    for col in 0..tableau.n_real_cols() {
        if tableau.is_basic(col) || tableau.is_artificial(col) {
            continue;
        }
        let rc = tableau.phase2_reduced_cost(col);
        if rc.abs() > rc_tol {
            continue;
        }
        let d = tableau.entering_direction(col);
        let step = tableau.max_step(&d, pivot_tol);
        if step <= 1e-7 {
            continue;
        }
        let dx = tableau.structural_direction(col, &d);
        let dsg = dx.rows(0, lp.n_gen);
        let move_size = step.min(1.0) * dsg.amax();
        if move_size > 1e-7 {
            return Ok(Uniqueness::MultipleSuspected);
        }
    }

    // jitter probe: perturb costs by <= 1e-9 and compare generations
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jittered = lp.clone();
    for g in 0..lp.n_gen {
        jittered.cost[g] += rng.random_range(0.0..1e-9);
    }
    let re = solve_lp(&jittered)?;
    if re.is_optimal() {
        let diff = (&re.sg - &resolved.sg).amax();
        if diff > 1e-5 {
            return Ok(Uniqueness::MultipleSuspected);
        }
    }
    Ok(Uniqueness::Unique)
}

/// Number of inequality multipliers larger than `tol` in absolute value.
pub fn multiplier_count(sol: &DispatchSolution, tol: f64) -> usize {
    sol.mu_plus
        .iter()
        .chain(sol.mu_minus.iter())
        .chain(sol.lambda_plus.iter())
        .chain(sol.lambda_minus.iter())
        .filter(|v| v.abs() > tol)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{ieee9, Edge};
    use approx::assert_abs_diff_eq;

    fn two_bus_parts() -> (PowerNetwork, CostVector, CapacityLimits) {
        let net =
            PowerNetwork::new(1, 1, vec![Edge { from: 1, to: 2, susceptance: 1.0 }]).unwrap();
        let cost = CostVector::new(DVector::from_vec(vec![1.0])).unwrap();
        let limits = CapacityLimits::new(
            DVector::from_vec(vec![5.0]),
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![5.0]),
            DVector::from_vec(vec![-5.0]),
        )
        .unwrap();
        (net, cost, limits)
    }

    #[test]
    fn two_bus_block_shapes() {
        let (net, cost, limits) = two_bus_parts();
        let load = DVector::from_vec(vec![0.5]);
        let lp = assemble_lp(&net, &cost, &limits, &load).unwrap();
        assert_eq!(lp.a_eq.shape(), (3, 3));
        assert_eq!(lp.a_in.shape(), (4, 3));
        // [p_max; -p_min; sg_max; -sg_min]
        assert_eq!(lp.b_in.as_slice(), &[5.0, 5.0, 5.0, 0.0]);
    }

    #[test]
    fn two_bus_solve_balances() {
        let (net, cost, limits) = two_bus_parts();
        let load = DVector::from_vec(vec![0.5]);
        let sol = solve_opf(&net, &cost, &limits, &load).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.sg[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.objective, 0.5, epsilon = 1e-10);
        assert_eq!(sol.theta[0], 0.0);
        let lp = assemble_lp(&net, &cost, &limits, &load).unwrap();
        let kkt = kkt_residuals(&sol, &lp);
        assert!(kkt.max() <= 1e-9, "kkt residuals {kkt:?}");
    }

    #[test]
    fn gen_bound_rows_have_zero_theta_columns() {
        let case = ieee9();
        let lp = assemble_lp(
            &case.network,
            &case.cost,
            &case.limits,
            case.base_load.as_vector(),
        )
        .unwrap();
        assert_eq!(lp.a_eq.shape(), (10, 12));
        assert_eq!(lp.a_in.shape(), (24, 12));
        let n_edge = lp.n_edge;
        for r in 2 * n_edge..2 * n_edge + 2 * lp.n_gen {
            for j in lp.n_gen..lp.n_vars() {
                assert_eq!(lp.a_in[(r, j)], 0.0);
            }
        }
    }

    #[test]
    fn infeasible_when_load_exceeds_capacity() {
        let (net, cost, limits) = two_bus_parts();
        let load = DVector::from_vec(vec![50.0]);
        let sol = solve_opf(&net, &cost, &limits, &load).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn interior_solution_has_empty_binding_set() {
        let (net, cost, limits) = two_bus_parts();
        let load = DVector::from_vec(vec![0.5]);
        let sol = solve_opf(&net, &cost, &limits, &load).unwrap();
        let det = detect_binding(&sol, &net, &limits, 1e-7, 1e-9);
        assert!(det.set.gens.is_empty());
        assert!(det.set.branches.is_empty());
        assert_eq!(det.set.rank_certificate, net.n_buses() + 1);
    }

    #[test]
    fn exact_upper_bound_detected_with_zero_tol() {
        let (net, cost, _) = two_bus_parts();
        let limits = CapacityLimits::new(
            DVector::from_vec(vec![0.5]),
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![5.0]),
            DVector::from_vec(vec![-5.0]),
        )
        .unwrap();
        let load = DVector::from_vec(vec![0.5]);
        let sol = solve_opf(&net, &cost, &limits, &load).unwrap();
        let det = detect_binding(&sol, &net, &limits, 0.0, 1e-9);
        assert_eq!(det.set.gens, vec![(1, Side::Upper)]);
    }

    #[test]
    fn perturbed_theta_shows_primal_residual() {
        let (net, cost, limits) = two_bus_parts();
        let load = DVector::from_vec(vec![0.5]);
        let lp = assemble_lp(&net, &cost, &limits, &load).unwrap();
        let mut sol = solve_lp(&lp).unwrap();
        sol.theta[1] += 1e-3;
        let kkt = kkt_residuals(&sol, &lp);
        // laplacian magnitude 1.0 times 1e-3 perturbation
        assert!(kkt.primal > 5e-4 && kkt.primal < 5e-3, "primal {}", kkt.primal);
    }

    #[test]
    fn identical_costs_flag_multiple_optima() {
        // two generators joined to one load; equal costs tie
        let net = PowerNetwork::new(
            2,
            1,
            vec![
                Edge { from: 1, to: 3, susceptance: 1.0 },
                Edge { from: 2, to: 3, susceptance: 1.0 },
            ],
        )
        .unwrap();
        let limits = CapacityLimits::new(
            DVector::from_vec(vec![5.0, 5.0]),
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![5.0, 5.0]),
            DVector::from_vec(vec![-5.0, -5.0]),
        )
        .unwrap();
        let load = DVector::from_vec(vec![1.0]);

        let tied = CostVector::new(DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let lp = assemble_lp(&net, &tied, &limits, &load).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(uniqueness_probe(&lp, &sol, 7).unwrap(), Uniqueness::MultipleSuspected);

        let strict = CostVector::new(DVector::from_vec(vec![1.0, 1.0 + 1e-3])).unwrap();
        let lp2 = assemble_lp(&net, &strict, &limits, &load).unwrap();
        let sol2 = solve_lp(&lp2).unwrap();
        assert_eq!(uniqueness_probe(&lp2, &sol2, 7).unwrap(), Uniqueness::Unique);
    }

    #[test]
    fn multiplier_count_zero_for_zero_duals() {
        let (net, cost, limits) = two_bus_parts();
        let load = DVector::from_vec(vec![0.5]);
        let mut sol = solve_opf(&net, &cost, &limits, &load).unwrap();
        sol.mu_plus.fill(0.0);
        sol.mu_minus.fill(0.0);
        sol.lambda_plus.fill(0.0);
        sol.lambda_minus.fill(0.0);
        assert_eq!(multiplier_count(&sol, 1e-9), 0);
    }

    #[test]
    fn duplicate_solves_bit_identical() {
        let case = ieee9();
        let lp = assemble_lp(
            &case.network,
            &case.cost,
            &case.limits,
            case.base_load.as_vector(),
        )
        .unwrap();
        let s1 = solve_lp(&lp).unwrap();
        let s2 = solve_lp(&lp).unwrap();
        assert_eq!(s1.sg.as_slice(), s2.sg.as_slice());
        assert_eq!(s1.theta.as_slice(), s2.theta.as_slice());
        assert_eq!(s1.tau.as_slice(), s2.tau.as_slice());
    }
}
