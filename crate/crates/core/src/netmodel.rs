//! Power network topology and case-file handling.
//!
//! Buses are numbered 1..N with generators occupying 1..N_G and loads
//! N_G+1..N. Edge orientation follows the stored order: the flow on edge
//! (u, v) is positive when power moves from u to v.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dcopf::{CapacityLimits, CostVector, LoadProfile};
use crate::error::{Error, Result};

/// A transmission branch between two buses with a positive susceptance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    #[serde(rename = "b")]
    pub susceptance: f64,
}

/// Connected network with generators-first bus numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork {
    n_gen: usize,
    n_load: usize,
    edges: Vec<Edge>,
}

impl PowerNetwork {
    pub fn new(n_gen: usize, n_load: usize, edges: Vec<Edge>) -> Result<Self> {
        if n_gen == 0 {
            return Err(Error::InvalidNetwork("at least one generator required".into()));
        }
        if n_load == 0 {
            return Err(Error::InvalidNetwork("at least one load bus required".into()));
        }
        let n = n_gen + n_load;
        if edges.is_empty() {
            return Err(Error::InvalidNetwork("disconnected: no edges".into()));
        }
        for (k, e) in edges.iter().enumerate() {
            if e.from == 0 || e.from > n || e.to == 0 || e.to > n {
                return Err(Error::InvalidNetwork(format!(
                    "edge {} endpoints ({}, {}) out of range 1..={}",
                    k + 1,
                    e.from,
                    e.to,
                    n
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidNetwork(format!("edge {} is a self-loop", k + 1)));
            }
            if e.susceptance <= 0.0 || !e.susceptance.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "edge {} susceptance {} must be strictly positive and finite",
                    k + 1,
                    e.susceptance
                )));
            }
        }
        let net = Self { n_gen, n_load, edges };
        if !net.is_connected() {
            return Err(Error::InvalidNetwork("disconnected".into()));
        }
        Ok(net)
    }

    pub fn n_gen(&self) -> usize {
        self.n_gen
    }

    pub fn n_load(&self) -> usize {
        self.n_load
    }

    pub fn n_buses(&self) -> usize {
        self.n_gen + self.n_load
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_generator(&self, bus: usize) -> bool {
        bus >= 1 && bus <= self.n_gen
    }

    fn is_connected(&self) -> bool {
        let n = self.n_buses();
        let mut adj = vec![Vec::new(); n + 1];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let mut seen = vec![false; n + 1];
        let mut stack = vec![1usize];
        seen[1] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Bus-edge incidence matrix: column e carries +1 at the from-bus and -1
    /// at the to-bus of edge e.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let n = self.n_buses();
        let mut c = DMatrix::zeros(n, self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            c[(e.from - 1, k)] = 1.0;
            c[(e.to - 1, k)] = -1.0;
        }
        c
    }

    pub fn susceptances(&self) -> DVector<f64> {
        DVector::from_iterator(self.edges.len(), self.edges.iter().map(|e| e.susceptance))
    }

    /// Weighted graph Laplacian, computed literally as C * diag(b) * C^T so
    /// that it is arithmetically identical to the incidence-based product.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let c = self.incidence_matrix();
        let b = DMatrix::from_diagonal(&self.susceptances());
        &c * b * c.transpose()
    }

    /// Branch flow map B * C^T: flows = branch_flow_matrix * angles.
    pub fn branch_flow_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.susceptances()) * self.incidence_matrix().transpose()
    }
}

/// Case metadata carried alongside the numeric data.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseMetadata {
    pub name: String,
    pub mva_base: f64,
}

/// A complete, dimension-checked problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseFile {
    pub network: PowerNetwork,
    pub cost: CostVector,
    pub limits: CapacityLimits,
    pub base_load: LoadProfile,
    pub metadata: CaseMetadata,
}

impl CaseFile {
    pub fn new(
        network: PowerNetwork,
        cost: CostVector,
        limits: CapacityLimits,
        base_load: LoadProfile,
        metadata: CaseMetadata,
    ) -> Result<Self> {
        if cost.len() != network.n_gen() {
            return Err(Error::Dimension(format!(
                "cost length {} but {} generators",
                cost.len(),
                network.n_gen()
            )));
        }
        if limits.n_gen() != network.n_gen() {
            return Err(Error::Dimension(format!(
                "generator limits length {} but {} generators",
                limits.n_gen(),
                network.n_gen()
            )));
        }
        if limits.n_edges() != network.n_edges() {
            return Err(Error::Dimension(format!(
                "branch limits length {} but {} edges",
                limits.n_edges(),
                network.n_edges()
            )));
        }
        if base_load.len() != network.n_load() {
            return Err(Error::Dimension(format!(
                "load length {} but {} load buses",
                base_load.len(),
                network.n_load()
            )));
        }
        Ok(Self { network, cost, limits, base_load, metadata })
    }
}

fn default_mva_base() -> f64 {
    100.0
}

/// On-disk JSON schema. Units are per-unit on the stated MVA base.
#[derive(Debug, Serialize, Deserialize)]
struct CaseJson {
    name: String,
    generators: usize,
    loads: usize,
    edges: Vec<Edge>,
    cost: Vec<f64>,
    sg_max: Vec<f64>,
    sg_min: Vec<f64>,
    p_max: Vec<f64>,
    p_min: Vec<f64>,
    load: Vec<f64>,
    #[serde(default = "default_mva_base")]
    mva_base: f64,
}

impl CaseJson {
    fn into_case(self) -> Result<CaseFile> {
        let network = PowerNetwork::new(self.generators, self.loads, self.edges)?;
        let cost = CostVector::new(DVector::from_vec(self.cost))?;
        let limits = CapacityLimits::new(
            DVector::from_vec(self.sg_max),
            DVector::from_vec(self.sg_min),
            DVector::from_vec(self.p_max),
            DVector::from_vec(self.p_min),
        )?;
        let base_load = LoadProfile::new(DVector::from_vec(self.load))?;
        let metadata = CaseMetadata { name: self.name, mva_base: self.mva_base };
        CaseFile::new(network, cost, limits, base_load, metadata)
    }

    fn from_case(case: &CaseFile) -> Self {
        Self {
            name: case.metadata.name.clone(),
            generators: case.network.n_gen(),
            loads: case.network.n_load(),
            edges: case.network.edges().to_vec(),
            cost: case.cost.as_vector().iter().copied().collect(),
            sg_max: case.limits.sg_max.iter().copied().collect(),
            sg_min: case.limits.sg_min.iter().copied().collect(),
            p_max: case.limits.p_max.iter().copied().collect(),
            p_min: case.limits.p_min.iter().copied().collect(),
            load: case.base_load.as_vector().iter().copied().collect(),
            mva_base: case.metadata.mva_base,
        }
    }
}

/// Parse a case from JSON text, reporting the field path on schema errors.
pub fn parse_case(text: &str) -> Result<CaseFile> {
    let mut de = serde_json::Deserializer::from_str(text);
    let parsed: CaseJson = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    parsed.into_case()
}

pub fn load_case(path: impl AsRef<Path>) -> Result<CaseFile> {
    let text = std::fs::read_to_string(path)?;
    parse_case(&text)
}

pub fn case_to_json(case: &CaseFile) -> String {
    serde_json::to_string_pretty(&CaseJson::from_case(case)).expect("case serialization")
}

pub fn save_case(case: &CaseFile, path: impl AsRef<Path>) -> Result<()> {
    let mut text = case_to_json(case);
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// The bundled IEEE 9-bus case: 3 generators, 6 loads, 9 branches.
pub fn ieee9() -> CaseFile {
    parse_case(include_str!("../data/case9.json")).expect("bundled case9 is valid")
}

/// Raw (pre-normalization) bus: may carry a generator, a load, both, or
/// neither. Junction buses and zero loads become load buses with an
/// arbitrarily small positive demand.
#[derive(Debug, Clone, Default)]
pub struct RawBus {
    pub generator: Option<RawGenerator>,
    pub load: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RawGenerator {
    pub cost: f64,
    pub sg_max: f64,
    pub sg_min: f64,
}

#[derive(Debug, Clone)]
pub struct RawEdge {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    pub p_max: f64,
    pub p_min: f64,
}

#[derive(Debug, Clone)]
pub struct RawCase {
    pub name: String,
    pub mva_base: f64,
    pub buses: Vec<RawBus>,
    pub edges: Vec<RawEdge>,
}

/// Role of a normalized bus relative to the raw case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusRole {
    Generator,
    Load,
    /// Load half of a split composite bus.
    SplitLoad,
}

/// Mapping from normalized bus numbers back to raw bus numbers.
#[derive(Debug, Clone)]
pub struct BusMapEntry {
    pub original_bus: usize,
    pub role: BusRole,
}

#[derive(Debug, Clone)]
pub struct NormalizedCase {
    pub case: CaseFile,
    /// Entry k describes normalized bus k+1.
    pub bus_map: Vec<BusMapEntry>,
}

pub const DEFAULT_SPLIT_SUSCEPTANCE: f64 = 1e6;
const MIN_POSITIVE_LOAD: f64 = 1e-10;

/// Normalize a raw case so that no bus is both a generator and a load.
///
/// Composite buses are split: the generator keeps a new dedicated bus and
/// all original neighbors reattach to the load half; the connecting edge
/// receives `split_susceptance`. Buses are renumbered generators-first and
/// the permutation back to raw numbering is returned.
pub fn split_composite_buses(raw: &RawCase, split_susceptance: f64) -> Result<NormalizedCase> {
    if split_susceptance <= 0.0 || !split_susceptance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "split susceptance {split_susceptance} must be strictly positive and finite"
        )));
    }
    let n_raw = raw.buses.len();
    if n_raw == 0 {
        return Err(Error::InvalidNetwork("raw case has no buses".into()));
    }
    for e in &raw.edges {
        if e.from == 0 || e.from > n_raw || e.to == 0 || e.to > n_raw || e.from == e.to {
            return Err(Error::InvalidNetwork(format!(
                "raw edge ({}, {}) invalid for {} buses",
                e.from, e.to, n_raw
            )));
        }
    }
    for (i, bus) in raw.buses.iter().enumerate() {
        if let Some(v) = bus.load {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidNetwork(format!("raw bus {} load {} invalid", i + 1, v)));
            }
        }
    }

    // Assign normalized numbers: generators in raw order, then load buses in
    // raw order (a composite bus contributes to both lists).
    let mut gen_of_raw = vec![0usize; n_raw + 1];
    let mut load_of_raw = vec![0usize; n_raw + 1];
    let mut bus_map = Vec::new();
    let mut next = 1usize;
    for (i, bus) in raw.buses.iter().enumerate() {
        if bus.generator.is_some() {
            gen_of_raw[i + 1] = next;
            bus_map.push(BusMapEntry { original_bus: i + 1, role: BusRole::Generator });
            next += 1;
        }
    }
    let n_gen = next - 1;
    if n_gen == 0 {
        return Err(Error::InvalidNetwork("raw case has no generators".into()));
    }
    for (i, bus) in raw.buses.iter().enumerate() {
        let is_composite = bus.generator.is_some() && bus.load.is_some();
        let is_load_side = bus.generator.is_none() || is_composite;
        if is_load_side {
            load_of_raw[i + 1] = next;
            let role = if is_composite { BusRole::SplitLoad } else { BusRole::Load };
            bus_map.push(BusMapEntry { original_bus: i + 1, role });
            next += 1;
        }
    }
    let n_load = next - 1 - n_gen;
    if n_load == 0 {
        return Err(Error::InvalidNetwork("raw case has no load buses".into()));
    }

    // Original edges reattach to the load half of any composite endpoint.
    let attach = |raw_bus: usize| -> usize {
        if load_of_raw[raw_bus] != 0 {
            load_of_raw[raw_bus]
        } else {
            gen_of_raw[raw_bus]
        }
    };
    let mut edges = Vec::with_capacity(raw.edges.len());
    let mut p_max = Vec::with_capacity(raw.edges.len());
    let mut p_min = Vec::with_capacity(raw.edges.len());
    for e in &raw.edges {
        edges.push(Edge { from: attach(e.from), to: attach(e.to), susceptance: e.susceptance });
        p_max.push(e.p_max);
        p_min.push(e.p_min);
    }

    // Splitting edges go from the generator half to the load half, appended
    // after the original edges in raw bus order. Their limits must never
    // bind: bound by the total capacity plus total load of the system.
    let total_cap: f64 = raw
        .buses
        .iter()
        .filter_map(|b| b.generator.as_ref().map(|g| g.sg_max))
        .sum();
    let total_load: f64 = raw.buses.iter().filter_map(|b| b.load).sum();
    let flow_bound = total_cap + total_load + 1.0;
    for (i, bus) in raw.buses.iter().enumerate() {
        if bus.generator.is_some() && bus.load.is_some() {
            edges.push(Edge {
                from: gen_of_raw[i + 1],
                to: load_of_raw[i + 1],
                susceptance: split_susceptance,
            });
            p_max.push(flow_bound);
            p_min.push(-flow_bound);
        }
    }

    let mut cost = Vec::with_capacity(n_gen);
    let mut sg_max = Vec::with_capacity(n_gen);
    let mut sg_min = Vec::with_capacity(n_gen);
    for bus in &raw.buses {
        if let Some(g) = &bus.generator {
            cost.push(g.cost);
            sg_max.push(g.sg_max);
            sg_min.push(g.sg_min);
        }
    }
    let mut load = Vec::with_capacity(n_load);
    for bus in &raw.buses {
        let is_composite = bus.generator.is_some() && bus.load.is_some();
        if bus.generator.is_none() || is_composite {
            load.push(bus.load.unwrap_or(0.0).max(MIN_POSITIVE_LOAD));
        }
    }

    let network = PowerNetwork::new(n_gen, n_load, edges)?;
    let case = CaseFile::new(
        network,
        CostVector::new(DVector::from_vec(cost))?,
        CapacityLimits::new(
            DVector::from_vec(sg_max),
            DVector::from_vec(sg_min),
            DVector::from_vec(p_max),
            DVector::from_vec(p_min),
        )?,
        LoadProfile::new(DVector::from_vec(load))?,
        CaseMetadata { name: raw.name.clone(), mva_base: raw.mva_base },
    )?;
    Ok(NormalizedCase { case, bus_map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use approx::assert_abs_diff_eq;

    fn two_bus() -> PowerNetwork {
        PowerNetwork::new(1, 1, vec![Edge { from: 1, to: 2, susceptance: 2.0 }]).unwrap()
    }

    #[test]
    fn incidence_two_bus() {
        let c = two_bus().incidence_matrix();
        assert_eq!(c.nrows(), 2);
        assert_eq!(c.ncols(), 1);
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(1, 0)], -1.0);
    }

    #[test]
    fn incidence_columns_sum_to_zero() {
        let net = ieee9().network;
        let c = net.incidence_matrix();
        for k in 0..c.ncols() {
            assert_eq!(c.column(k).sum(), 0.0);
        }
    }

    #[test]
    fn laplacian_two_bus() {
        let l = two_bus().laplacian();
        assert_abs_diff_eq!(l[(0, 0)], 2.0);
        assert_abs_diff_eq!(l[(0, 1)], -2.0);
        assert_abs_diff_eq!(l[(1, 0)], -2.0);
        assert_abs_diff_eq!(l[(1, 1)], 2.0);
    }

    #[test]
    fn laplacian_nullspace_is_ones() {
        let net = ieee9().network;
        let l = net.laplacian();
        let ones = DVector::from_element(net.n_buses(), 1.0);
        assert!(linalg::inf_norm(&(&l * &ones)) < 1e-9);
    }

    #[test]
    fn ieee9_incidence_rank() {
        let net = ieee9().network;
        let c = net.incidence_matrix();
        assert_eq!(c.nrows(), 9);
        assert_eq!(c.ncols(), 9);
        assert_eq!(linalg::rank(&c, 1e-9), 8);
    }

    #[test]
    fn ieee9_laplacian_zero_eigenvalue_multiplicity_one() {
        let net = ieee9().network;
        let l = net.laplacian();
        let eig = l.symmetric_eigenvalues();
        let near_zero = eig.iter().filter(|&&v| v.abs() < 1e-6).count();
        assert_eq!(near_zero, 1);
        assert_eq!(linalg::rank(&l, 1e-9), 8);
    }

    #[test]
    fn ieee9_dimensions() {
        let case = ieee9();
        assert_eq!(case.network.n_gen(), 3);
        assert_eq!(case.network.n_load(), 6);
        assert_eq!(case.network.n_edges(), 9);
    }

    #[test]
    fn disconnected_rejected() {
        let err = PowerNetwork::new(
            2,
            2,
            vec![
                Edge { from: 1, to: 3, susceptance: 1.0 },
                Edge { from: 2, to: 4, susceptance: 1.0 },
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("disconnected"));
    }

    #[test]
    fn empty_edge_list_rejected() {
        let err = PowerNetwork::new(1, 1, vec![]).unwrap_err();
        assert!(err.to_string().contains("disconnected"));
    }

    #[test]
    fn self_loop_rejected() {
        let err = PowerNetwork::new(
            1,
            1,
            vec![
                Edge { from: 1, to: 2, susceptance: 1.0 },
                Edge { from: 2, to: 2, susceptance: 1.0 },
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("self-loop"));
    }

    #[test]
    fn nonpositive_susceptance_rejected() {
        assert!(PowerNetwork::new(1, 1, vec![Edge { from: 1, to: 2, susceptance: 0.0 }]).is_err());
        assert!(PowerNetwork::new(1, 1, vec![Edge { from: 1, to: 2, susceptance: -1.0 }]).is_err());
    }

    #[test]
    fn cost_length_mismatch_rejected() {
        let text = r#"{
            "name": "bad", "generators": 3, "loads": 1,
            "edges": [{"from":1,"to":4,"b":1.0},{"from":2,"to":4,"b":1.0},{"from":3,"to":4,"b":1.0}],
            "cost": [1.0, 2.0],
            "sg_max": [1.0,1.0,1.0], "sg_min": [0.0,0.0,0.0],
            "p_max": [1.0,1.0,1.0], "p_min": [-1.0,-1.0,-1.0],
            "load": [0.5]
        }"#;
        let err = parse_case(text).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "got {err}");
    }

    #[test]
    fn schema_error_carries_field_path() {
        let text = r#"{"name": "x", "generators": 1, "loads": 1,
            "edges": [{"from":1,"to":"two","b":1.0}],
            "cost":[1.0],"sg_max":[1.0],"sg_min":[0.0],"p_max":[1.0],"p_min":[-1.0],"load":[0.5]}"#;
        match parse_case(text).unwrap_err() {
            Error::Schema { path, .. } => assert!(path.contains("edges"), "path: {path}"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn case_round_trip_is_identity() {
        let case = ieee9();
        let text = case_to_json(&case);
        let reparsed = parse_case(&text).unwrap();
        assert_eq!(case, reparsed);
        let text2 = case_to_json(&reparsed);
        assert_eq!(text, text2);
    }

    #[test]
    fn split_no_composite_is_reindex_only() {
        let raw = RawCase {
            name: "plain".into(),
            mva_base: 100.0,
            buses: vec![
                RawBus { generator: Some(RawGenerator { cost: 1.0, sg_max: 2.0, sg_min: 0.0 }), load: None },
                RawBus { generator: None, load: Some(0.5) },
            ],
            edges: vec![RawEdge { from: 1, to: 2, susceptance: 1.0, p_max: 2.0, p_min: -2.0 }],
        };
        let norm = split_composite_buses(&raw, DEFAULT_SPLIT_SUSCEPTANCE).unwrap();
        assert_eq!(norm.case.network.n_gen(), 1);
        assert_eq!(norm.case.network.n_load(), 1);
        assert_eq!(norm.case.network.n_edges(), 1);
        assert_eq!(norm.bus_map[0].original_bus, 1);
        assert_eq!(norm.bus_map[1].original_bus, 2);
    }

    #[test]
    fn split_composite_adds_one_bus_and_one_edge() {
        // composite bus 2 of degree 2
        let raw = RawCase {
            name: "comp".into(),
            mva_base: 100.0,
            buses: vec![
                RawBus { generator: Some(RawGenerator { cost: 1.0, sg_max: 2.0, sg_min: 0.0 }), load: None },
                RawBus {
                    generator: Some(RawGenerator { cost: 2.0, sg_max: 2.0, sg_min: 0.0 }),
                    load: Some(0.3),
                },
                RawBus { generator: None, load: Some(0.5) },
            ],
            edges: vec![
                RawEdge { from: 1, to: 2, susceptance: 1.0, p_max: 3.0, p_min: -3.0 },
                RawEdge { from: 2, to: 3, susceptance: 1.5, p_max: 3.0, p_min: -3.0 },
            ],
        };
        let norm = split_composite_buses(&raw, DEFAULT_SPLIT_SUSCEPTANCE).unwrap();
        let net = &norm.case.network;
        assert_eq!(net.n_buses(), 4);
        assert_eq!(net.n_edges(), 3);
        assert_eq!(net.n_gen(), 2);
        // neighbors of raw bus 2 now attach to its load half
        let split_load_bus = norm
            .bus_map
            .iter()
            .position(|e| e.role == BusRole::SplitLoad)
            .map(|i| i + 1)
            .unwrap();
        let degree = net
            .edges()
            .iter()
            .filter(|e| e.from == split_load_bus || e.to == split_load_bus)
            .count();
        assert_eq!(degree, 3); // two original neighbors plus the splitting edge
        // generator half keeps only the splitting edge
        let gen_bus = 2; // raw bus 2 is the second generator
        let gen_degree = net.edges().iter().filter(|e| e.from == gen_bus || e.to == gen_bus).count();
        assert_eq!(gen_degree, 1);
    }
}
