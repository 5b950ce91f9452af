//! Region classification over load and capacity-limit slices, and load-path
//! traces.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dcopf::{self, BindingSet, CapacityLimits, SolveStatus};
use crate::error::{Error, Result};
use crate::operator::{regularity_from_solution, OpfContext};
use crate::simplex::{self, SimplexStatus};

/// One swept axis: `resolution` cells with centers inside [lo, hi].
#[derive(Debug, Clone, Serialize)]
pub struct AxisSpec {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub resolution: usize,
}

impl AxisSpec {
    pub fn new(label: impl Into<String>, lo: f64, hi: f64, resolution: usize) -> Result<Self> {
        if hi <= lo || hi.is_nan() || lo.is_nan() || resolution == 0 {
            return Err(Error::InvalidArgument(format!(
                "axis needs hi > lo and positive resolution, got [{lo}, {hi}] x {resolution}"
            )));
        }
        Ok(Self { label: label.into(), lo, hi, resolution })
    }

    /// Center of cell k.
    pub fn value(&self, k: usize) -> f64 {
        let width = (self.hi - self.lo) / self.resolution as f64;
        self.lo + (k as f64 + 0.5) * width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellLabel {
    Infeasible,
    Degenerate,
    Region(u64),
}

/// Composition class of a binding set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionClass {
    TwoGens,
    GenBranch,
    TwoBranches,
    Other,
}

impl RegionClass {
    pub fn of(binding: &BindingSet) -> Self {
        match (binding.gens.len(), binding.branches.len()) {
            (2, 0) => RegionClass::TwoGens,
            (1, 1) => RegionClass::GenBranch,
            (0, 2) => RegionClass::TwoBranches,
            _ => RegionClass::Other,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegionInfo {
    pub hash: u64,
    pub key: String,
    pub binding: BindingSet,
    pub class: RegionClass,
    pub cell_count: usize,
    /// Fraction of feasible (non-infeasible) cells.
    pub area_fraction: f64,
    /// Closed-form Jacobian of the region's binding set, when independent.
    pub jacobian: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct RegionGrid {
    pub x: AxisSpec,
    pub y: AxisSpec,
    /// Row-major: cell (i, j) = cells[j * x.resolution + i].
    pub cells: Vec<CellLabel>,
    pub regions: Vec<RegionInfo>,
    pub feasible_cells: usize,
    pub degenerate_cells: usize,
}

impl RegionGrid {
    pub fn degenerate_fraction(&self) -> f64 {
        if self.feasible_cells == 0 {
            0.0
        } else {
            self.degenerate_cells as f64 / self.feasible_cells as f64
        }
    }

    /// Regions at or above the area filter, largest first.
    pub fn macro_regions(&self, min_area_fraction: f64) -> Vec<&RegionInfo> {
        let mut out: Vec<&RegionInfo> =
            self.regions.iter().filter(|r| r.area_fraction >= min_area_fraction).collect();
        out.sort_by(|a, b| b.cell_count.cmp(&a.cell_count).then(a.key.cmp(&b.key)));
        out
    }

    pub fn label_at(&self, i: usize, j: usize) -> CellLabel {
        self.cells[j * self.x.resolution + i]
    }

    /// Stable digest of the whole label grid.
    pub fn grid_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.cells.len() * 9);
        for cell in &self.cells {
            match cell {
                CellLabel::Infeasible => bytes.push(0u8),
                CellLabel::Degenerate => bytes.push(1u8),
                CellLabel::Region(h) => {
                    bytes.push(2u8);
                    bytes.extend_from_slice(&h.to_le_bytes());
                }
            }
        }
        dcopf::fnv1a(&bytes)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,status,region_hash,class\n");
        for j in 0..self.y.resolution {
            for i in 0..self.x.resolution {
                let (status, hash, class) = match self.label_at(i, j) {
                    CellLabel::Infeasible => ("infeasible", 0u64, String::new()),
                    CellLabel::Degenerate => ("degenerate", 0u64, String::new()),
                    CellLabel::Region(h) => {
                        let class = self
                            .regions
                            .iter()
                            .find(|r| r.hash == h)
                            .map(|r| format!("{:?}", r.class))
                            .unwrap_or_default();
                        ("region", h, class)
                    }
                };
                out.push_str(&format!(
                    "{},{},{},{:016x},{}\n",
                    self.x.value(i),
                    self.y.value(j),
                    status,
                    hash,
                    class
                ));
            }
        }
        out
    }

    pub fn summary_json(&self, min_area_fraction: f64) -> serde_json::Value {
        let regions: Vec<serde_json::Value> = self
            .macro_regions(0.0)
            .into_iter()
            .map(|r| {
                serde_json::json!({
                    "hash": format!("{:016x}", r.hash),
                    "key": r.key,
                    "binding": {
                        "gens": r.binding.gens.iter()
                            .map(|&(i, s)| serde_json::json!([i, format!("{s:?}").to_lowercase()]))
                            .collect::<Vec<_>>(),
                        "branches": r.binding.branches.iter()
                            .map(|&(i, s)| serde_json::json!([i, format!("{s:?}").to_lowercase()]))
                            .collect::<Vec<_>>(),
                    },
                    "class": format!("{:?}", r.class),
                    "cells": r.cell_count,
                    "area_fraction": r.area_fraction,
                    "macro": r.area_fraction >= min_area_fraction,
                    "jacobian": r.jacobian.as_ref().map(|j| {
                        (0..j.nrows())
                            .map(|i| (0..j.ncols()).map(|c| j[(i, c)]).collect::<Vec<f64>>())
                            .collect::<Vec<Vec<f64>>>()
                    }),
                })
            })
            .collect();
        serde_json::json!({
            "x": {"label": self.x.label, "lo": self.x.lo, "hi": self.x.hi, "resolution": self.x.resolution},
            "y": {"label": self.y.label, "lo": self.y.lo, "hi": self.y.hi, "resolution": self.y.resolution},
            "feasible_cells": self.feasible_cells,
            "degenerate_cells": self.degenerate_cells,
            "degenerate_fraction": self.degenerate_fraction(),
            "macro_region_count": self.macro_regions(min_area_fraction).len(),
            "regions": regions,
        })
    }
}

fn classify_load_cell(ctx: &OpfContext, load: &DVector<f64>) -> (CellLabel, Option<BindingSet>) {
    if load.iter().any(|&v| v <= 0.0) {
        return (CellLabel::Infeasible, None);
    }
    let sol = match ctx.solve_raw(load) {
        Ok(s) => s,
        Err(_) => return (CellLabel::Degenerate, None),
    };
    match sol.status {
        SolveStatus::Infeasible => return (CellLabel::Infeasible, None),
        SolveStatus::Unbounded => return (CellLabel::Degenerate, None),
        SolveStatus::Optimal => {}
    }
    let det = ctx.detect(&sol);
    let expected = ctx.net.n_gen() - 1;
    let n_bus = ctx.net.n_buses();
    let regular = det.set.count() == expected
        && det.set.rank_certificate == n_bus + 1 + det.set.count()
        && det.degenerate_limits.is_empty();
    if regular {
        (CellLabel::Region(det.set.region_hash()), Some(det.set))
    } else {
        (CellLabel::Degenerate, None)
    }
}

fn collect_regions(
    ctx: &OpfContext,
    cells: &[CellLabel],
    sets: Vec<Option<BindingSet>>,
) -> (Vec<RegionInfo>, usize, usize) {
    let mut feasible = 0usize;
    let mut degenerate = 0usize;
    let mut regions: Vec<RegionInfo> = Vec::new();
    for (cell, set) in cells.iter().zip(sets) {
        match cell {
            CellLabel::Infeasible => continue,
            CellLabel::Degenerate => {
                feasible += 1;
                degenerate += 1;
            }
            CellLabel::Region(hash) => {
                feasible += 1;
                if let Some(info) = regions.iter_mut().find(|r| r.hash == *hash) {
                    info.cell_count += 1;
                } else {
                    let binding = set.expect("region cell retains its binding set");
                    let jacobian = crate::jacobian::closed_form_jacobian(
                        &ctx.net,
                        &binding.gen_indices(),
                        &binding.branch_indices(),
                    )
                    .ok()
                    .map(|j| j.matrix);
                    regions.push(RegionInfo {
                        hash: *hash,
                        key: binding.canonical_key(),
                        class: RegionClass::of(&binding),
                        binding,
                        cell_count: 1,
                        area_fraction: 0.0,
                        jacobian,
                    });
                }
            }
        }
    }
    if feasible > 0 {
        for r in &mut regions {
            r.area_fraction = r.cell_count as f64 / feasible as f64;
        }
    }
    regions.sort_by(|a, b| b.cell_count.cmp(&a.cell_count).then(a.key.cmp(&b.key)));
    (regions, feasible, degenerate)
}

/// Scan a two-load plane: axes are 1-based load indices; the remaining loads
/// are fixed. Cells are labelled infeasible, degenerate, or by the stable
/// hash of their binding set.
pub fn scan_load_plane(
    ctx: &OpfContext,
    fixed_loads: &DVector<f64>,
    axes: (usize, usize),
    x_axis: AxisSpec,
    y_axis: AxisSpec,
    threads: usize,
) -> Result<RegionGrid> {
    let n_load = ctx.net.n_load();
    if fixed_loads.len() != n_load {
        return Err(Error::Dimension("fixed loads length".into()));
    }
    let (ax, ay) = axes;
    if ax == 0 || ax > n_load || ay == 0 || ay > n_load || ax == ay {
        return Err(Error::InvalidArgument(format!(
            "axes must be distinct load indices in 1..={n_load}"
        )));
    }
    let total = x_axis.resolution * y_axis.resolution;
    let labelled: Vec<(CellLabel, Option<BindingSet>)> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
        pool.install(|| {
            (0..total)
                .into_par_iter()
                .map(|k| {
                    let i = k % x_axis.resolution;
                    let j = k / x_axis.resolution;
                    let mut load = fixed_loads.clone();
                    load[ax - 1] = x_axis.value(i);
                    load[ay - 1] = y_axis.value(j);
                    classify_load_cell(ctx, &load)
                })
                .collect()
        })
    } else {
        (0..total)
            .map(|k| {
                let i = k % x_axis.resolution;
                let j = k / x_axis.resolution;
                let mut load = fixed_loads.clone();
                load[ax - 1] = x_axis.value(i);
                load[ay - 1] = y_axis.value(j);
                classify_load_cell(ctx, &load)
            })
            .collect()
    };
    let (cells, sets): (Vec<CellLabel>, Vec<Option<BindingSet>>) = labelled.into_iter().unzip();
    let (regions, feasible, degenerate) = collect_regions(ctx, &cells, sets);
    Ok(RegionGrid {
        x: x_axis,
        y: y_axis,
        cells,
        regions,
        feasible_cells: feasible,
        degenerate_cells: degenerate,
    })
}

/// Spec of the random feasible-load probe used by the limit-plane scan.
#[derive(Debug, Clone)]
pub struct LoadSampleSpec {
    /// Base load; varied coordinates are overwritten per sample.
    pub base: DVector<f64>,
    /// 1-based load indices drawn uniformly per sample.
    pub vary: Vec<usize>,
    pub lo: f64,
    pub hi: f64,
    /// Feasible samples requested per cell.
    pub samples: usize,
    /// Cell is degenerate when more than this fraction of samples fails the
    /// regularity test.
    pub fail_fraction: f64,
    pub seed: u64,
}

impl LoadSampleSpec {
    pub fn new(base: DVector<f64>, vary: Vec<usize>, lo: f64, hi: f64) -> Self {
        Self { base, vary, lo, hi, samples: 64, fail_fraction: 0.05, seed: 0 }
    }
}

/// Does any strictly positive load admit a feasible dispatch under the given
/// limits? Probed with a phase-1 LP over joint (generation, angles, loads).
fn limits_feasible(ctx: &OpfContext, limits: &CapacityLimits, min_load: f64) -> Result<bool> {
    let net = &ctx.net;
    let n_gen = net.n_gen();
    let n_bus = net.n_buses();
    let n_load = net.n_load();
    let n_edge = net.n_edges();
    let lap = net.laplacian();
    let flow = net.branch_flow_matrix();
    // variables: [sg; theta; sl]
    let n_vars = n_gen + n_bus + n_load;
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
    for l in 0..n_load {
        a_eq[(1 + n_gen + l, n_gen + n_bus + l)] = 1.0;
    }
    let b_eq = DVector::zeros(n_bus + 1);
    let mut a_in = DMatrix::zeros(2 * n_edge + 2 * n_gen + n_load, n_vars);
    let mut b_in = DVector::zeros(2 * n_edge + 2 * n_gen + n_load);
    for e in 0..n_edge {
        for j in 0..n_bus {
            a_in[(e, n_gen + j)] = flow[(e, j)];
            a_in[(n_edge + e, n_gen + j)] = -flow[(e, j)];
        }
        b_in[e] = limits.p_max[e];
        b_in[n_edge + e] = -limits.p_min[e];
    }
    for g in 0..n_gen {
        a_in[(2 * n_edge + g, g)] = 1.0;
        a_in[(2 * n_edge + n_gen + g, g)] = -1.0;
        b_in[2 * n_edge + g] = limits.sg_max[g];
        b_in[2 * n_edge + n_gen + g] = -limits.sg_min[g];
    }
    for l in 0..n_load {
        a_in[(2 * n_edge + 2 * n_gen + l, n_gen + n_bus + l)] = -1.0;
        b_in[2 * n_edge + 2 * n_gen + l] = -min_load;
    }
    let c = DVector::zeros(n_vars);
    let sol = simplex::solve_standard_form(
        &a_eq,
        &b_eq,
        &a_in,
        &b_in,
        &c,
        &dcopf::simplex_options(ctx.opts.pivot_tol),
    )?;
    Ok(sol.status == SimplexStatus::Optimal)
}

/// Scan candidate (lower, upper) bounds for one branch. A cell is infeasible
/// when lower >= upper or no strictly positive load is feasible; it is
/// degenerate when more than `spec.fail_fraction` of sampled feasible loads
/// fail the regularity test. Otherwise the cell carries the hash of the most
/// common regular binding set among the samples.
pub fn scan_limit_plane(
    ctx: &OpfContext,
    spec: &LoadSampleSpec,
    branch: usize,
    lower_axis: AxisSpec,
    upper_axis: AxisSpec,
    threads: usize,
) -> Result<RegionGrid> {
    if branch == 0 || branch > ctx.net.n_edges() {
        return Err(Error::InvalidArgument(format!("branch {branch} out of range")));
    }
    if spec.base.len() != ctx.net.n_load() {
        return Err(Error::Dimension("sample base load length".into()));
    }
    for &v in &spec.vary {
        if v == 0 || v > ctx.net.n_load() {
            return Err(Error::InvalidArgument(format!("varied load index {v} out of range")));
        }
    }
    let total = lower_axis.resolution * upper_axis.resolution;
    let labelled: Vec<(CellLabel, Option<BindingSet>)> = {
        let eval = |k: usize| -> (CellLabel, Option<BindingSet>) {
            let i = k % lower_axis.resolution;
            let j = k / lower_axis.resolution;
            let lower = lower_axis.value(i);
            let upper = upper_axis.value(j);
            classify_limit_cell(ctx, spec, branch, lower, upper, k as u64)
        };
        if threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
            pool.install(|| (0..total).into_par_iter().map(eval).collect())
        } else {
            (0..total).map(eval).collect()
        }
    };
    let (cells, sets): (Vec<CellLabel>, Vec<Option<BindingSet>>) = labelled.into_iter().unzip();
    let (regions, feasible, degenerate) = collect_regions(ctx, &cells, sets);
    Ok(RegionGrid {
        x: lower_axis,
        y: upper_axis,
        cells,
        regions,
        feasible_cells: feasible,
        degenerate_cells: degenerate,
    })
}

fn classify_limit_cell(
    ctx: &OpfContext,
    spec: &LoadSampleSpec,
    branch: usize,
    lower: f64,
    upper: f64,
    cell_index: u64,
) -> (CellLabel, Option<BindingSet>) {
    if lower >= upper {
        return (CellLabel::Infeasible, None);
    }
    let mut p_max = ctx.limits.p_max.clone();
    let mut p_min = ctx.limits.p_min.clone();
    p_max[branch - 1] = upper;
    p_min[branch - 1] = lower;
    let limits = match CapacityLimits::new(
        ctx.limits.sg_max.clone(),
        ctx.limits.sg_min.clone(),
        p_max,
        p_min,
    ) {
        Ok(l) => l,
        Err(_) => return (CellLabel::Infeasible, None),
    };
    let probe_ctx = OpfContext {
        net: ctx.net.clone(),
        cost: ctx.cost.clone(),
        limits,
        opts: ctx.opts,
    };
    match limits_feasible(&probe_ctx, &probe_ctx.limits, 1e-9) {
        Ok(true) => {}
        Ok(false) => return (CellLabel::Infeasible, None),
        Err(_) => return (CellLabel::Degenerate, None),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ cell_index.wrapping_mul(0x9e3779b97f4a7c15));
    let mut feasible_found = 0usize;
    let mut failures = 0usize;
    let mut set_counts: Vec<(BindingSet, usize)> = Vec::new();
    let max_attempts = spec.samples * 40;
    let mut attempts = 0usize;
    while feasible_found < spec.samples && attempts < max_attempts {
        attempts += 1;
        let mut load = spec.base.clone();
        for &v in &spec.vary {
            load[v - 1] = rng.random_range(spec.lo..spec.hi);
        }
        if load.iter().any(|&v| v <= 0.0) {
            continue;
        }
        let sol = match probe_ctx.solve_raw(&load) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if sol.status != SolveStatus::Optimal {
            continue;
        }
        feasible_found += 1;
        let report = regularity_from_solution(&probe_ctx, &sol);
        if report.is_regular() {
            let det = probe_ctx.detect(&sol);
            if let Some(entry) = set_counts.iter_mut().find(|(s, _)| *s == det.set) {
                entry.1 += 1;
            } else {
                set_counts.push((det.set, 1));
            }
        } else {
            failures += 1;
        }
    }
    if feasible_found == 0 {
        // feasibility LP says yes but sampling found nothing: cannot certify
        return (CellLabel::Degenerate, None);
    }
    if failures as f64 > spec.fail_fraction * feasible_found as f64 {
        return (CellLabel::Degenerate, None);
    }
    set_counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.canonical_key().cmp(&b.0.canonical_key())));
    let (set, _) = set_counts.into_iter().next().expect("at least one regular sample");
    (CellLabel::Region(set.region_hash()), Some(set))
}

#[derive(Debug, Clone)]
pub struct PathSample {
    pub t: f64,
    pub load: DVector<f64>,
    pub sg: DVector<f64>,
    pub objective: f64,
    pub region_key: String,
    pub region_hash: u64,
}

#[derive(Debug, Clone)]
pub struct PathTrace {
    pub samples: Vec<PathSample>,
    /// Indices k where sample k's binding set differs from sample k-1's.
    pub region_changes: Vec<usize>,
}

impl PathTrace {
    pub fn to_csv(&self) -> String {
        let n_load = self.samples.first().map(|s| s.load.len()).unwrap_or(0);
        let n_gen = self.samples.first().map(|s| s.sg.len()).unwrap_or(0);
        let mut header = String::from("t");
        for l in 1..=n_load {
            header.push_str(&format!(",load{l}"));
        }
        for g in 1..=n_gen {
            header.push_str(&format!(",sg{g}"));
        }
        header.push_str(",objective,region_hash\n");
        let mut out = header;
        for s in &self.samples {
            out.push_str(&format!("{}", s.t));
            for v in s.load.iter() {
                out.push_str(&format!(",{v}"));
            }
            for v in s.sg.iter() {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{},{:016x}\n", s.objective, s.region_hash));
        }
        out
    }
}

/// Solve along the piecewise-linear path through `waypoints`, uniformly
/// sampled in path parameter, and record the binding-set changes.
pub fn trace_load_path(
    ctx: &OpfContext,
    waypoints: &[DVector<f64>],
    samples: usize,
) -> Result<PathTrace> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidArgument("need at least two waypoints".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let n_load = ctx.net.n_load();
    for w in waypoints {
        if w.len() != n_load {
            return Err(Error::Dimension("waypoint length".into()));
        }
    }
    let segments = waypoints.len() - 1;
    let mut out = Vec::with_capacity(samples);
    let mut changes = Vec::new();
    let mut prev_hash: Option<u64> = None;
    for k in 0..samples {
        let t = k as f64 / (samples - 1) as f64;
        let pos = t * segments as f64;
        let seg = (pos.floor() as usize).min(segments - 1);
        let frac = pos - seg as f64;
        let load = &waypoints[seg] + (&waypoints[seg + 1] - &waypoints[seg]) * frac;
        let sol = ctx.solve_raw(&load)?;
        match sol.status {
            SolveStatus::Infeasible => return Err(Error::Infeasible),
            SolveStatus::Unbounded => return Err(Error::Unbounded),
            SolveStatus::Optimal => {}
        }
        let det = ctx.detect(&sol);
        let hash = det.set.region_hash();
        if let Some(prev) = prev_hash {
            if prev != hash {
                changes.push(k);
            }
        }
        prev_hash = Some(hash);
        out.push(PathSample {
            t,
            load,
            sg: sol.sg.clone(),
            objective: sol.objective,
            region_key: det.set.canonical_key(),
            region_hash: hash,
        });
    }
    Ok(PathTrace { samples: out, region_changes: changes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcopf::{CostVector, LoadProfile};
    use crate::netmodel::ieee9;

    fn ieee9_ctx() -> OpfContext {
        OpfContext::from_case(&ieee9())
    }

    fn base_load() -> DVector<f64> {
        DVector::from_vec(vec![1.0, 0.90, 1e-10, 1.0, 1e-10, 1.25])
    }

    #[test]
    fn all_infeasible_range() {
        let ctx = ieee9_ctx();
        let grid = scan_load_plane(
            &ctx,
            &base_load(),
            (1, 4),
            AxisSpec::new("bus4", 20.0, 30.0, 4).unwrap(),
            AxisSpec::new("bus7", 20.0, 30.0, 4).unwrap(),
            1,
        )
        .unwrap();
        assert!(grid.cells.iter().all(|c| *c == CellLabel::Infeasible));
        assert_eq!(grid.feasible_cells, 0);
    }

    #[test]
    fn nonpositive_loads_marked_infeasible() {
        let ctx = ieee9_ctx();
        let grid = scan_load_plane(
            &ctx,
            &base_load(),
            (1, 4),
            AxisSpec::new("bus4", -1.0, -0.5, 2).unwrap(),
            AxisSpec::new("bus7", 0.5, 1.0, 2).unwrap(),
            1,
        )
        .unwrap();
        assert!(grid.cells.iter().all(|c| *c == CellLabel::Infeasible));
    }

    #[test]
    fn scan_deterministic_and_thread_invariant() {
        let ctx = ieee9_ctx();
        let make = |threads| {
            scan_load_plane(
                &ctx,
                &base_load(),
                (1, 4),
                AxisSpec::new("bus4", 0.1, 2.5, 12).unwrap(),
                AxisSpec::new("bus7", 0.1, 2.5, 12).unwrap(),
                threads,
            )
            .unwrap()
        };
        let g1 = make(1);
        let g2 = make(1);
        let g4 = make(4);
        assert_eq!(g1.grid_hash(), g2.grid_hash());
        assert_eq!(g1.grid_hash(), g4.grid_hash());
        assert!(g1.feasible_cells > 0);
    }

    #[test]
    fn limit_plane_lower_above_upper_is_infeasible() {
        let ctx = ieee9_ctx();
        let spec = LoadSampleSpec::new(base_load(), vec![1, 4], 0.05, 2.5);
        let grid = scan_limit_plane(
            &ctx,
            &spec,
            9,
            AxisSpec::new("lower", 1.0, 2.0, 2).unwrap(),
            AxisSpec::new("upper", -2.0, -1.0, 2).unwrap(),
            1,
        )
        .unwrap();
        assert!(grid.cells.iter().all(|c| *c == CellLabel::Infeasible));
    }

    #[test]
    fn constant_path_constant_outputs() {
        let ctx = ieee9_ctx();
        let w = base_load();
        let trace = trace_load_path(&ctx, &[w.clone(), w.clone()], 10).unwrap();
        assert!(trace.region_changes.is_empty());
        let first = &trace.samples[0];
        for s in &trace.samples {
            assert_eq!(s.sg.as_slice(), first.sg.as_slice());
            assert_eq!(s.objective, first.objective);
        }
    }

    #[test]
    fn path_respects_generation_bounds() {
        let ctx = ieee9_ctx();
        let mut a = base_load();
        a[0] = 0.3;
        a[3] = 0.3;
        let mut b = base_load();
        b[0] = 2.2;
        b[3] = 2.0;
        let trace = trace_load_path(&ctx, &[a, b], 25).unwrap();
        for s in &trace.samples {
            for g in 0..ctx.net.n_gen() {
                assert!(s.sg[g] <= ctx.limits.sg_max[g] + 1e-7);
                assert!(s.sg[g] >= ctx.limits.sg_min[g] - 1e-7);
            }
        }
    }

    #[test]
    fn single_generator_grid_has_one_region() {
        use crate::netmodel::Edge;
        use crate::netmodel::PowerNetwork;
        let net = PowerNetwork::new(
            1,
            2,
            vec![
                Edge { from: 1, to: 2, susceptance: 1.0 },
                Edge { from: 2, to: 3, susceptance: 1.0 },
            ],
        )
        .unwrap();
        let cost = CostVector::new(DVector::from_vec(vec![1.0])).unwrap();
        let limits = crate::dcopf::CapacityLimits::new(
            DVector::from_vec(vec![10.0]),
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![10.0, 10.0]),
            DVector::from_vec(vec![-10.0, -10.0]),
        )
        .unwrap();
        let ctx = OpfContext::new(net, cost, limits).unwrap();
        let fixed = LoadProfile::new(DVector::from_vec(vec![0.5, 0.5])).unwrap();
        let grid = scan_load_plane(
            &ctx,
            fixed.as_vector(),
            (1, 2),
            AxisSpec::new("l1", 0.1, 2.0, 8).unwrap(),
            AxisSpec::new("l2", 0.1, 2.0, 8).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(grid.regions.len(), 1);
        assert_eq!(grid.macro_regions(0.001).len(), 1);
    }
}
