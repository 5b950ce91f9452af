//! Jacobian of the OPF operator from binding sets, a finite-difference
//! oracle, binding-combination enumeration, and worst-case sensitivity.

use nalgebra::DMatrix;

use crate::dcopf::{LoadProfile, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg;
use crate::netmodel::PowerNetwork;
use crate::operator::{validate_combo_indices, OpfContext};

/// How a Jacobian was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    ClosedForm { gens: Vec<usize>, branches: Vec<usize> },
    FiniteDifference { step: f64 },
    Conic,
}

/// n_gen x n_load sensitivity of optimal generation to loads.
#[derive(Debug, Clone)]
pub struct JacobianMatrix {
    pub matrix: DMatrix<f64>,
    pub provenance: Provenance,
}

/// A candidate binding combination with its independence tag.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingCombo {
    pub gens: Vec<usize>,
    pub branches: Vec<usize>,
    pub independent: bool,
}

impl BindingCombo {
    pub fn label(&self) -> String {
        let g: Vec<String> = self.gens.iter().map(|v| format!("g{v}")).collect();
        let b: Vec<String> = self.branches.iter().map(|v| format!("b{v}")).collect();
        format!("{{{}|{}}}", g.join(","), b.join(","))
    }
}

/// Square system tying (generation, angles) to (loads, binding limits) when
/// the given generator bounds and branch flows are binding.
///
/// Row blocks: [-I | L_gen], [0 | L_load], [I_gens | 0], [0 | flow_branches],
/// [0 | e_1'].
pub fn assemble_binding_system(
    net: &PowerNetwork,
    gens: &[usize],
    branches: &[usize],
) -> Result<DMatrix<f64>> {
    validate_combo_indices(net, gens, branches)?;
    let n_gen = net.n_gen();
    let need = n_gen - 1;
    if gens.len() + branches.len() != need {
        return Err(Error::ComboSize { got: gens.len() + branches.len(), need });
    }
    let n_bus = net.n_buses();
    let n_load = net.n_load();
    let lap = net.laplacian();
    let flow = net.branch_flow_matrix();
    let size = n_bus + n_gen;
    let mut h = DMatrix::zeros(size, size);
    for g in 0..n_gen {
        h[(g, g)] = -1.0;
        for j in 0..n_bus {
            h[(g, n_gen + j)] = lap[(g, j)];
        }
    }
    for l in 0..n_load {
        for j in 0..n_bus {
            h[(n_gen + l, n_gen + j)] = lap[(n_gen + l, j)];
        }
    }
    let mut r = n_bus;
    for &g in gens {
        h[(r, g - 1)] = 1.0;
        r += 1;
    }
    for &e in branches {
        for j in 0..n_bus {
            h[(r, n_gen + j)] = flow[(e - 1, j)];
        }
        r += 1;
    }
    h[(size - 1, n_gen)] = 1.0;
    Ok(h)
}

/// Reduced n_bus x n_bus angle-space system; invertible exactly when the
/// combination is independent.
///
/// Rows: load rows of the Laplacian, generator rows of the Laplacian for the
/// binding generators, flow rows for the binding branches, slack row.
pub fn assemble_reduced_system(
    net: &PowerNetwork,
    gens: &[usize],
    branches: &[usize],
) -> Result<DMatrix<f64>> {
    validate_combo_indices(net, gens, branches)?;
    let n_gen = net.n_gen();
    let need = n_gen - 1;
    if gens.len() + branches.len() != need {
        return Err(Error::ComboSize { got: gens.len() + branches.len(), need });
    }
    let n_bus = net.n_buses();
    let n_load = net.n_load();
    let lap = net.laplacian();
    let flow = net.branch_flow_matrix();
    let mut m = DMatrix::zeros(n_bus, n_bus);
    for l in 0..n_load {
        for j in 0..n_bus {
            m[(l, j)] = lap[(n_gen + l, j)];
        }
    }
    let mut r = n_load;
    for &g in gens {
        for j in 0..n_bus {
            m[(r, j)] = lap[(g - 1, j)];
        }
        r += 1;
    }
    for &e in branches {
        for j in 0..n_bus {
            m[(r, j)] = flow[(e - 1, j)];
        }
        r += 1;
    }
    m[(n_bus - 1, 0)] = 1.0;
    Ok(m)
}

/// Closed-form Jacobian for an independent binding combination.
///
/// Depends only on the index sets, never on bound sides: columns sum to one
/// and rows of binding generators vanish identically.
pub fn closed_form_jacobian(
    net: &PowerNetwork,
    gens: &[usize],
    branches: &[usize],
) -> Result<JacobianMatrix> {
    let reduced = assemble_reduced_system(net, gens, branches)?;
    if linalg::condition_estimate(&reduced) > 1e9 {
        return Err(Error::SingularCombo);
    }
    let n_gen = net.n_gen();
    let n_bus = net.n_buses();
    let n_load = net.n_load();
    let lu = reduced.lu();
    // angle response to the load slots of the right-hand side
    let mut rhs = DMatrix::zeros(n_bus, n_load);
    for l in 0..n_load {
        rhs[(l, l)] = 1.0;
    }
    let theta_sens = lu.solve(&rhs).ok_or(Error::SingularCombo)?;
    let lap_gen = net.laplacian().rows(0, n_gen).into_owned();
    let j = -(lap_gen * theta_sens);
    Ok(JacobianMatrix {
        matrix: j,
        provenance: Provenance::ClosedForm { gens: gens.to_vec(), branches: branches.to_vec() },
    })
}

/// Central-difference Jacobian at a load strictly inside one region.
///
/// Fails with `RegionBoundary` when the binding set changes within one step
/// of any load coordinate. Evaluation points may dip into tiny negative
/// loads; the LP extends continuously there even though the operator domain
/// does not.
pub fn fd_jacobian(ctx: &OpfContext, load: &LoadProfile, step: f64) -> Result<JacobianMatrix> {
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step {step} must be positive")));
    }
    let base = ctx.solve_raw(load.as_vector())?;
    match base.status {
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        SolveStatus::Unbounded => return Err(Error::Unbounded),
        SolveStatus::Optimal => {}
    }
    let base_det = ctx.detect(&base);
    let n_gen = ctx.net.n_gen();
    let n_load = ctx.net.n_load();
    let mut matrix = DMatrix::zeros(n_gen, n_load);
    for j in 0..n_load {
        let mut up = load.as_vector().clone();
        up[j] += step;
        let mut dn = load.as_vector().clone();
        dn[j] -= step;
        let sol_up = ctx.solve_raw(&up)?;
        let sol_dn = ctx.solve_raw(&dn)?;
        if sol_up.status != SolveStatus::Optimal || sol_dn.status != SolveStatus::Optimal {
            return Err(Error::RegionBoundary);
        }
        let det_up = ctx.detect(&sol_up);
        let det_dn = ctx.detect(&sol_dn);
        if det_up.set.gens != base_det.set.gens
            || det_up.set.branches != base_det.set.branches
            || det_dn.set.gens != base_det.set.gens
            || det_dn.set.branches != base_det.set.branches
        {
            return Err(Error::RegionBoundary);
        }
        let col = (&sol_up.sg - &sol_dn.sg) / (2.0 * step);
        matrix.set_column(j, &col);
    }
    Ok(JacobianMatrix { matrix, provenance: Provenance::FiniteDifference { step } })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num * (n - i) as u128 / (i + 1) as u128;
    }
    num
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    // 1-based k-subsets of [n] in lexicographic order
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (1..=k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - (k - i) {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// All (generator set, branch set) pairs with |gens| + |branches| = n_gen-1,
/// tagged with their independence via the reduced-system rank.
///
/// Order: |gens| descending, then lexicographic within each block.
pub fn enumerate_binding_combos(net: &PowerNetwork, cap: u128) -> Result<Vec<BindingCombo>> {
    let n_gen = net.n_gen();
    let n_edge = net.n_edges();
    let need = n_gen - 1;
    let mut total: u128 = 0;
    for k in 0..=need.min(n_gen) {
        let b = need - k;
        total += binomial(n_gen, k) * binomial(n_edge, b);
    }
    if total > cap {
        return Err(Error::BudgetExceeded { candidates: total, cap });
    }
    let n_bus = net.n_buses();
    let mut out = Vec::with_capacity(total as usize);
    for k in (0..=need.min(n_gen)).rev() {
        let b = need - k;
        if b > n_edge {
            continue;
        }
        for gens in combinations(n_gen, k) {
            for branches in combinations(n_edge, b) {
                let reduced = assemble_reduced_system(net, &gens, &branches)?;
                let independent = linalg::rank(&reduced, 1e-9) == n_bus;
                out.push(BindingCombo { gens: gens.clone(), branches, independent });
            }
        }
    }
    Ok(out)
}

/// Worst-case sensitivity of generator `gen` to load index `load_idx`
/// (both 1-based): the maximum |J[gen, load]| over independent combinations,
/// with the first combination achieving it.
pub fn worst_case_sensitivity(
    net: &PowerNetwork,
    gen: usize,
    load_idx: usize,
    cap: u128,
) -> Result<(f64, BindingCombo)> {
    if gen == 0 || gen > net.n_gen() {
        return Err(Error::InvalidArgument(format!("generator {gen} out of range")));
    }
    if load_idx == 0 || load_idx > net.n_load() {
        return Err(Error::InvalidArgument(format!("load index {load_idx} out of range")));
    }
    let combos = enumerate_binding_combos(net, cap)?;
    let mut best: Option<(f64, BindingCombo)> = None;
    for combo in combos.into_iter().filter(|c| c.independent) {
        let jac = match closed_form_jacobian(net, &combo.gens, &combo.branches) {
            Ok(j) => j,
            Err(Error::SingularCombo) => continue,
            Err(e) => return Err(e),
        };
        let value = jac.matrix[(gen - 1, load_idx - 1)].abs();
        match &best {
            Some((v, _)) if value <= *v => {}
            _ => best = Some((value, combo)),
        }
    }
    best.ok_or(Error::DependentSets)
}

/// One row of the all-pairs worst-case table.
#[derive(Debug, Clone)]
pub struct WorstCaseEntry {
    pub gen: usize,
    pub load_idx: usize,
    pub value: f64,
    pub combo: BindingCombo,
}

/// Worst-case sensitivities for every (generator, load) pair in one
/// enumeration pass.
pub fn worst_case_table(net: &PowerNetwork, cap: u128) -> Result<Vec<WorstCaseEntry>> {
    let combos = enumerate_binding_combos(net, cap)?;
    let mut jacobians = Vec::new();
    for combo in combos.into_iter().filter(|c| c.independent) {
        match closed_form_jacobian(net, &combo.gens, &combo.branches) {
            Ok(j) => jacobians.push((combo, j)),
            Err(Error::SingularCombo) => continue,
            Err(e) => return Err(e),
        }
    }
    if jacobians.is_empty() {
        return Err(Error::DependentSets);
    }
    let mut out = Vec::new();
    for gen in 1..=net.n_gen() {
        for load_idx in 1..=net.n_load() {
            let mut best: Option<(f64, &BindingCombo)> = None;
            for (combo, jac) in &jacobians {
                let value = jac.matrix[(gen - 1, load_idx - 1)].abs();
                match &best {
                    Some((v, _)) if value <= *v => {}
                    _ => best = Some((value, combo)),
                }
            }
            let (value, combo) = best.expect("nonempty jacobian list");
            out.push(WorstCaseEntry { gen, load_idx, value, combo: combo.clone() });
        }
    }
    Ok(out)
}
