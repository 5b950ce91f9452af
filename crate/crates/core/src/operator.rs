//! The OPF operator: unique optimal generation as a function of load,
//! regularity checks, and synthesis of parameters realizing a prescribed
//! binding set.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dcopf::{
    self, assemble_lp, detect_binding, solve_lp, uniqueness_probe, BindingSet, CapacityLimits,
    CostVector, DispatchSolution, LoadProfile, Side, SolveStatus, StandardLp, Uniqueness,
};
use crate::error::{Error, Result};
use crate::jacobian;
use crate::linalg;
use crate::netmodel::{CaseFile, PowerNetwork};

/// Tolerances and knobs shared across the pipeline.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub kkt_tol: f64,
    pub binding_tol: f64,
    pub rank_rel_tol: f64,
    pub pivot_tol: f64,
    pub fd_step: f64,
    pub deriv_tol: f64,
    pub embed_tol: f64,
    pub strict_comp_tol: f64,
    pub probe_seed: u64,
    pub construct_retries: usize,
    pub combo_cap: u128,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-8,
            binding_tol: 1e-7,
            rank_rel_tol: 1e-9,
            pivot_tol: 1e-9,
            fd_step: 1e-6,
            deriv_tol: 1e-9,
            embed_tol: 1e-7,
            strict_comp_tol: 1e-9,
            probe_seed: 0,
            construct_retries: 20,
            combo_cap: 1_000_000,
        }
    }
}

/// Immutable problem context: network, costs, limits and options. Safe to
/// share across threads; every operation on it is a pure function.
#[derive(Debug, Clone)]
pub struct OpfContext {
    pub net: PowerNetwork,
    pub cost: CostVector,
    pub limits: CapacityLimits,
    pub opts: SolveOptions,
}

impl OpfContext {
    pub fn new(net: PowerNetwork, cost: CostVector, limits: CapacityLimits) -> Result<Self> {
        if cost.len() != net.n_gen() || limits.n_gen() != net.n_gen() || limits.n_edges() != net.n_edges()
        {
            return Err(Error::Dimension("context pieces do not match the network".into()));
        }
        Ok(Self { net, cost, limits, opts: SolveOptions::default() })
    }

    pub fn from_case(case: &CaseFile) -> Self {
        Self {
            net: case.network.clone(),
            cost: case.cost.clone(),
            limits: case.limits.clone(),
            opts: SolveOptions::default(),
        }
    }

    pub fn with_options(mut self, opts: SolveOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn lp(&self, load: &DVector<f64>) -> Result<StandardLp> {
        assemble_lp(&self.net, &self.cost, &self.limits, load)
    }

    /// Solve at a raw load vector (no positivity requirement). Used by
    /// finite differences and scans; `evaluate` is the operator-facing path.
    pub fn solve_raw(&self, load: &DVector<f64>) -> Result<DispatchSolution> {
        solve_lp(&self.lp(load)?)
    }

    pub fn detect(&self, sol: &DispatchSolution) -> dcopf::BindingDetection {
        detect_binding(sol, &self.net, &self.limits, self.opts.binding_tol, self.opts.rank_rel_tol)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub sg: DVector<f64>,
    pub binding: BindingSet,
    pub solution: DispatchSolution,
}

/// Evaluate the operator at a strictly positive load.
///
/// Errors with `Infeasible` when the load is outside the feasible set and
/// with `MultipleOptima` when the uniqueness probe rejects the point.
pub fn evaluate(ctx: &OpfContext, load: &LoadProfile) -> Result<Evaluation> {
    let lp = ctx.lp(load.as_vector())?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        SolveStatus::Unbounded => return Err(Error::Unbounded),
        SolveStatus::Optimal => {}
    }
    if uniqueness_probe(&lp, &sol, ctx.opts.probe_seed)? == Uniqueness::MultipleSuspected {
        return Err(Error::MultipleOptima);
    }
    let det = ctx.detect(&sol);
    Ok(Evaluation { sg: sol.sg.clone(), binding: det.set, solution: sol })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct RegularityReport {
    pub binding_count: usize,
    pub expected: usize,
    pub rank_ok: bool,
    pub strict_complementarity_ok: bool,
}

impl RegularityReport {
    pub fn is_regular(&self) -> bool {
        self.binding_count == self.expected && self.rank_ok && self.strict_complementarity_ok
    }
}

/// Check the regularity conditions at a load: exactly n_gen - 1 binding
/// inequalities, independent gradients, strict complementary slackness.
pub fn regularity_report(ctx: &OpfContext, load: &LoadProfile) -> Result<RegularityReport> {
    let sol = ctx.solve_raw(load.as_vector())?;
    match sol.status {
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        SolveStatus::Unbounded => return Err(Error::Unbounded),
        SolveStatus::Optimal => {}
    }
    Ok(regularity_from_solution(ctx, &sol))
}

pub(crate) fn regularity_from_solution(ctx: &OpfContext, sol: &DispatchSolution) -> RegularityReport {
    let det = ctx.detect(sol);
    let binding_count = det.set.count();
    let expected = ctx.net.n_gen() - 1;
    let n_bus = ctx.net.n_buses();
    let rank_ok = det.set.rank_certificate == n_bus + 1 + binding_count;
    let tol = ctx.opts.strict_comp_tol;
    let strict = det.set.gens.iter().all(|&(g, side)| match side {
        Side::Upper => sol.lambda_plus[g - 1] > tol,
        Side::Lower => sol.lambda_minus[g - 1] > tol,
    }) && det.set.branches.iter().all(|&(e, side)| match side {
        Side::Upper => sol.mu_plus[e - 1] > tol,
        Side::Lower => sol.mu_minus[e - 1] > tol,
    });
    RegularityReport {
        binding_count,
        expected,
        rank_ok,
        strict_complementarity_ok: strict,
    }
}

/// Parameters realizing a prescribed binding set, with the dispatch scale
/// used by the construction (per-unit target generation of the free
/// generators).
#[derive(Debug, Clone)]
pub struct ConstructedParameters {
    pub cost: CostVector,
    pub limits: CapacityLimits,
    pub load: LoadProfile,
    pub scale: f64,
}

/// Construct (cost, limits, load) whose unique OPF optimum binds exactly the
/// requested generator set (at lower bounds) and branch set (at the realized
/// flow side).
///
/// The free generators dispatch one unit each inside [0, 2] bounds, loads
/// share the balance uniformly, target flows pin the bounds of the requested
/// branches, and the cost is a strict interior point of the normal cone at
/// the target vertex of the generation-space polytope. Uniqueness is
/// certified by the empirical probe; the normal-cone weights are re-drawn at
/// random on failure.
pub fn construct_parameters_for_binding(
    net: &PowerNetwork,
    gens: &[usize],
    branches: &[usize],
    opts: &SolveOptions,
) -> Result<ConstructedParameters> {
    let n_gen = net.n_gen();
    let n_load = net.n_load();
    let n_bus = net.n_buses();
    let n_edge = net.n_edges();
    validate_combo_indices(net, gens, branches)?;
    if gens.len() + branches.len() != n_gen - 1 {
        return Err(Error::ComboSize { got: gens.len() + branches.len(), need: n_gen - 1 });
    }
    let reduced = jacobian::assemble_reduced_system(net, gens, branches)?;
    if linalg::rank(&reduced, opts.rank_rel_tol) < n_bus {
        return Err(Error::DependentSets);
    }

    // target dispatch: bound generators at zero, the rest at one unit
    let mut sg_star = DVector::from_element(n_gen, 1.0);
    for &g in gens {
        sg_star[g - 1] = 0.0;
    }
    let free_gens = n_gen - gens.len();
    let load_star = DVector::from_element(n_load, free_gens as f64 / n_load as f64);

    // angles solving the balance equations with the slack pinned to zero
    let lap = net.laplacian();
    let mut stationarity = DMatrix::zeros(n_bus + 1, n_bus);
    stationarity.rows_mut(0, n_bus).copy_from(&lap);
    stationarity[(n_bus, 0)] = 1.0;
    let mut rhs = DVector::zeros(n_bus + 1);
    for g in 0..n_gen {
        rhs[g] = sg_star[g];
    }
    for l in 0..n_load {
        rhs[n_gen + l] = -load_star[l];
    }
    let theta_star = linalg::lstsq(&stationarity, &rhs, opts.rank_rel_tol);
    let flow = net.branch_flow_matrix();
    let p_star = &flow * &theta_star;

    let p_inf = linalg::inf_norm(&p_star);
    let mut p_max = DVector::from_element(n_edge, p_inf + 1.0);
    let mut p_min = DVector::from_element(n_edge, -p_inf - 1.0);
    let mut branch_sides = Vec::with_capacity(branches.len());
    for &e in branches {
        if p_star[e - 1] >= 0.0 {
            p_max[e - 1] = p_star[e - 1];
            branch_sides.push((e, Side::Upper));
        } else {
            p_min[e - 1] = p_star[e - 1];
            branch_sides.push((e, Side::Lower));
        }
    }
    let limits = CapacityLimits::new(
        DVector::from_element(n_gen, 2.0),
        DVector::zeros(n_gen),
        p_max,
        p_min,
    )?;
    let load = LoadProfile::new(load_star.clone())?;
    let target_gens: Vec<(usize, Side)> = gens.iter().map(|&g| (g, Side::Lower)).collect();

    // Gradient rows of the active reduced-problem constraints with respect
    // to the generation variables; flows respond through the network
    // pseudoinverse.
    let lap_pinv = linalg::pseudo_inverse(&lap, opts.rank_rel_tol);
    let flow_sens = &flow * lap_pinv.columns(0, n_gen).into_owned();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.probe_seed.wrapping_add(0x5eed));
    let attempts = opts.construct_retries.max(1);
    let mut last_failure = String::from("no attempts made");
    for attempt in 0..attempts {
        let mut f_prime = DVector::zeros(n_gen);
        let weight = |rng: &mut ChaCha8Rng| -> f64 {
            if attempt == 0 {
                1.0
            } else {
                rng.random_range(0.05..1.0)
            }
        };
        for &g in gens {
            f_prime[g - 1] += weight(&mut rng);
        }
        for &(e, side) in &branch_sides {
            let sign = match side {
                Side::Upper => -1.0,
                Side::Lower => 1.0,
            };
            let w = weight(&mut rng);
            for g in 0..n_gen {
                f_prime[g] += sign * w * flow_sens[(e - 1, g)];
            }
        }
        let shift = linalg::inf_norm(&f_prime);
        let mut f_star = if shift > 0.0 {
            f_prime.add_scalar(shift)
        } else {
            DVector::from_element(n_gen, 1.0)
        };
        for v in f_star.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let cost = CostVector::new(f_star)?;

        let lp = assemble_lp(net, &cost, &limits, &load_star)?;
        let sol = solve_lp(&lp)?;
        if sol.status != SolveStatus::Optimal {
            last_failure = format!("constructed problem solved as {:?}", sol.status);
            continue;
        }
        let det = detect_binding(&sol, net, &limits, opts.binding_tol, opts.rank_rel_tol);
        if det.set.gens != target_gens || det.set.branches != branch_sides {
            last_failure = format!(
                "binding set {} differs from target",
                det.set.canonical_key()
            );
            continue;
        }
        if uniqueness_probe(&lp, &sol, opts.probe_seed)? == Uniqueness::MultipleSuspected {
            last_failure = "uniqueness probe rejected the supporting cost".into();
            continue;
        }
        return Ok(ConstructedParameters { cost, limits, load, scale: 1.0 });
    }
    Err(Error::ConstructionFailed(format!(
        "after {attempts} attempts: {last_failure}"
    )))
}

pub(crate) fn validate_combo_indices(
    net: &PowerNetwork,
    gens: &[usize],
    branches: &[usize],
) -> Result<()> {
    for w in gens.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidArgument("generator set must be strictly increasing".into()));
        }
    }
    for w in branches.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidArgument("branch set must be strictly increasing".into()));
        }
    }
    if gens.iter().any(|&g| g == 0 || g > net.n_gen()) {
        return Err(Error::InvalidArgument(format!(
            "generator index out of range 1..={}",
            net.n_gen()
        )));
    }
    if branches.iter().any(|&e| e == 0 || e > net.n_edges()) {
        return Err(Error::InvalidArgument(format!(
            "branch index out of range 1..={}",
            net.n_edges()
        )));
    }
    Ok(())
}

/// Additive nonnegative cost jitter in [0, magnitude], clamped nonnegative.
pub fn perturb_cost(cost: &CostVector, magnitude: f64, rng: &mut impl Rng) -> CostVector {
    let mut f = cost.as_vector().clone();
    if magnitude > 0.0 {
        for v in f.iter_mut() {
            *v += rng.random_range(0.0..=magnitude);
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    CostVector::new(f).expect("jittered nonnegative cost is valid")
}

/// Jitter every bound by at most `magnitude` while preserving the limit
/// invariants (upper > lower, nonnegative generator floors). Pairs whose
/// jitter would invert the ordering are re-drawn, falling back to the
/// original pair.
pub fn perturb_limits(limits: &CapacityLimits, magnitude: f64, rng: &mut impl Rng) -> CapacityLimits {
    if magnitude <= 0.0 {
        return limits.clone();
    }
    let jitter_pair = |upper: f64, lower: f64, floor: Option<f64>, rng: &mut dyn rand::RngCore| {
        for _ in 0..100 {
            let mut up = upper + uniform_sym(rng, magnitude);
            let mut lo = lower + uniform_sym(rng, magnitude);
            if let Some(fl) = floor {
                if lo < fl {
                    lo = fl;
                }
                if up < fl {
                    up = fl;
                }
            }
            if up > lo {
                return (up, lo);
            }
        }
        (upper, lower)
    };
    let mut sg_max = limits.sg_max.clone();
    let mut sg_min = limits.sg_min.clone();
    for g in 0..limits.n_gen() {
        let (up, lo) = jitter_pair(sg_max[g], sg_min[g], Some(0.0), rng);
        sg_max[g] = up;
        sg_min[g] = lo;
    }
    let mut p_max = limits.p_max.clone();
    let mut p_min = limits.p_min.clone();
    for e in 0..limits.n_edges() {
        let (up, lo) = jitter_pair(p_max[e], p_min[e], None, rng);
        p_max[e] = up;
        p_min[e] = lo;
    }
    CapacityLimits::new(sg_max, sg_min, p_max, p_min).expect("repaired limits are well posed")
}

fn uniform_sym(rng: &mut dyn rand::RngCore, magnitude: f64) -> f64 {
    let mut r = rand_chacha::rand_core::RngCore::next_u64(rng) as f64 / u64::MAX as f64;
    r = 2.0 * r - 1.0;
    r * magnitude
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{ieee9, Edge};
    use approx::assert_abs_diff_eq;

    fn single_gen_ctx() -> OpfContext {
        let net = PowerNetwork::new(
            1,
            2,
            vec![
                Edge { from: 1, to: 2, susceptance: 1.0 },
                Edge { from: 2, to: 3, susceptance: 2.0 },
            ],
        )
        .unwrap();
        let cost = CostVector::new(DVector::from_vec(vec![1.0])).unwrap();
        let limits = CapacityLimits::new(
            DVector::from_vec(vec![10.0]),
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![10.0, 10.0]),
            DVector::from_vec(vec![-10.0, -10.0]),
        )
        .unwrap();
        OpfContext::new(net, cost, limits).unwrap()
    }

    #[test]
    fn single_generator_covers_total_load() {
        let ctx = single_gen_ctx();
        let load = LoadProfile::new(DVector::from_vec(vec![0.7, 1.1])).unwrap();
        let eval = evaluate(&ctx, &load).unwrap();
        assert_abs_diff_eq!(eval.sg[0], 1.8, epsilon = 1e-9);
        assert!(eval.binding.gens.is_empty() && eval.binding.branches.is_empty());
    }

    #[test]
    fn zero_load_rejected_by_profile() {
        let err = LoadProfile::new(DVector::from_vec(vec![0.5, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonPositiveLoad { index: 2, .. }));
    }

    #[test]
    fn infeasible_load_is_an_error() {
        let ctx = single_gen_ctx();
        let load = LoadProfile::new(DVector::from_vec(vec![100.0, 1.0])).unwrap();
        assert!(matches!(evaluate(&ctx, &load), Err(Error::Infeasible)));
    }

    #[test]
    fn single_generator_regularity() {
        let ctx = single_gen_ctx();
        let load = LoadProfile::new(DVector::from_vec(vec![0.7, 1.1])).unwrap();
        let rep = regularity_report(&ctx, &load).unwrap();
        assert_eq!(rep.binding_count, 0);
        assert_eq!(rep.expected, 0);
        assert!(rep.rank_ok);
        assert!(rep.strict_complementarity_ok);
        assert!(rep.is_regular());
    }

    #[test]
    fn ieee9_base_point_regular() {
        let ctx = OpfContext::from_case(&ieee9());
        let load = LoadProfile::new(ctx_load_with(&ctx, 1.0, 1.0)).unwrap();
        let rep = regularity_report(&ctx, &load).unwrap();
        assert_eq!(rep.binding_count, 2, "{rep:?}");
        assert!(rep.is_regular(), "{rep:?}");
    }

    fn ctx_load_with(_ctx: &OpfContext, bus4: f64, bus7: f64) -> DVector<f64> {
        DVector::from_vec(vec![bus4, 0.90, 1e-10, bus7, 1e-10, 1.25])
    }

    #[test]
    fn perturb_cost_zero_magnitude_is_identity() {
        let cost = CostVector::new(DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = perturb_cost(&cost, 0.0, &mut rng);
        assert_eq!(out.as_vector().as_slice(), cost.as_vector().as_slice());
    }

    #[test]
    fn perturb_cost_stays_nonnegative() {
        let cost = CostVector::new(DVector::from_vec(vec![0.0, 0.0, 5.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let out = perturb_cost(&cost, 1e-3, &mut rng);
            assert!(out.as_vector().min() >= 0.0);
        }
    }

    #[test]
    fn perturb_limits_preserves_invariants() {
        let case = ieee9();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let out = perturb_limits(&case.limits, 1e-3, &mut rng);
            for g in 0..out.n_gen() {
                assert!(out.sg_max[g] > out.sg_min[g]);
                assert!(out.sg_min[g] >= 0.0);
            }
            for e in 0..out.n_edges() {
                assert!(out.p_max[e] > out.p_min[e]);
            }
        }
    }

    #[test]
    fn perturb_limits_zero_magnitude_is_identity() {
        let case = ieee9();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = perturb_limits(&case.limits, 0.0, &mut rng);
        assert_eq!(out, case.limits);
    }

    #[test]
    fn symmetric_tie_broken_by_tiny_perturbation() {
        // two identical generators feeding one load
        let net = PowerNetwork::new(
            2,
            1,
            vec![
                Edge { from: 1, to: 3, susceptance: 1.0 },
                Edge { from: 2, to: 3, susceptance: 1.0 },
            ],
        )
        .unwrap();
        let cost = CostVector::new(DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let limits = CapacityLimits::new(
            DVector::from_vec(vec![5.0, 5.0]),
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![5.0, 5.0]),
            DVector::from_vec(vec![-5.0, -5.0]),
        )
        .unwrap();
        let ctx = OpfContext::new(net, cost, limits).unwrap();
        let load = LoadProfile::new(DVector::from_vec(vec![1.0])).unwrap();
        assert!(matches!(evaluate(&ctx, &load), Err(Error::MultipleOptima)));

        let mut ok = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 200;
        for _ in 0..trials {
            let jittered = perturb_cost(&ctx.cost, 1e-6, &mut rng);
            let ctx2 = OpfContext::new(ctx.net.clone(), jittered, ctx.limits.clone()).unwrap();
            if evaluate(&ctx2, &load).is_ok() {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.99 * trials as f64, "only {ok}/{trials} unique");
    }

    #[test]
    fn construct_on_path_network() {
        // generators at buses 1 and 2, load at bus 3
        let net = PowerNetwork::new(
            2,
            1,
            vec![
                Edge { from: 1, to: 3, susceptance: 1.0 },
                Edge { from: 2, to: 3, susceptance: 1.0 },
            ],
        )
        .unwrap();
        let opts = SolveOptions::default();
        let built = construct_parameters_for_binding(&net, &[2], &[], &opts).unwrap();
        assert_abs_diff_eq!(built.load.as_vector()[0], 1.0, epsilon = 1e-12);
        let sol = dcopf::solve_opf(&net, &built.cost, &built.limits, built.load.as_vector()).unwrap();
        assert_abs_diff_eq!(sol.sg[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.sg[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn construct_empty_sets_single_generator() {
        let net = PowerNetwork::new(1, 1, vec![Edge { from: 1, to: 2, susceptance: 1.0 }]).unwrap();
        let opts = SolveOptions::default();
        let built = construct_parameters_for_binding(&net, &[], &[], &opts).unwrap();
        let sol = dcopf::solve_opf(&net, &built.cost, &built.limits, built.load.as_vector()).unwrap();
        let det = detect_binding(&sol, &net, &built.limits, 1e-7, 1e-9);
        assert!(det.set.gens.is_empty() && det.set.branches.is_empty());
    }
}
