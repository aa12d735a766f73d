//! Grid data model: substations, buses, branches, generators and loads.
//!
//! A [`GridCase`] is built from a deserialized [`CaseData`] by
//! [`GridCase::new`], which checks every invariant and resolves string ids to
//! dense indices. After construction the case is immutable.

mod ac;
mod io;
mod scenario;
mod status;

pub use ac::{ac_residuals, AcPoint, AcResiduals};
pub use io::{load_case, load_scenarios, save_case, save_scenarios, sha256_hex, to_canonical_json};
pub use scenario::{
    aggregate_max, aggregate_mean, convert_depths, FloodScenario, IndicatorMatrix, ScenarioSet,
    DEFAULT_THRESHOLDS,
};
pub use status::{component_status, ComponentStatus};

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Substation size, keyed on the highest-voltage component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    /// 115 kV or 161 kV.
    Small,
    /// 230 kV.
    Medium,
    /// 500 kV.
    Large,
}

impl SizeClass {
    /// Multiplier on the marginal resource cost of each resilience level.
    pub fn cost_multiplier(self) -> u32 {
        match self {
            SizeClass::Small => 1,
            SizeClass::Medium => 2,
            SizeClass::Large => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substation {
    pub id: String,
    pub bus_ids: Vec<String>,
    pub size_class: SizeClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub substation_id: String,
    pub v_target: f64,
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default)]
    pub is_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Series susceptance (per-unit).
    pub b: f64,
    /// Series conductance (per-unit).
    pub g: f64,
    /// Apparent-power flow limit (per-unit).
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus_id: String,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub id: String,
    pub bus_id: String,
    pub p_load: f64,
    pub q_load: f64,
}

/// Objective weights, angle bounds and numerical tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub lambda_shed: f64,
    pub lambda_over: f64,
    /// Bound on the absolute phase angle of any bus (radians).
    pub theta_max: f64,
    /// Bound on the phase angle difference across a live edge (radians).
    pub theta_delta_max: f64,
    /// Number of cosine tangent points used by the fine LPAC variant.
    pub t_cos: usize,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub oa_tol: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            lambda_shed: 1.0,
            lambda_over: 1e-3,
            theta_max: PI,
            theta_delta_max: FRAC_PI_2,
            t_cos: 7,
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            oa_tol: 1e-6,
        }
    }
}

impl Config {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lambda_shed > 0.0) {
            out.push(format!("config: lambda_shed must be > 0 (got {})", self.lambda_shed));
        }
        if !(self.lambda_over >= 0.0) {
            out.push(format!("config: lambda_over must be >= 0 (got {})", self.lambda_over));
        }
        if !(self.theta_delta_max > 0.0 && self.theta_delta_max <= self.theta_max) {
            out.push(format!(
                "config: need 0 < theta_delta_max <= theta_max (got {} and {})",
                self.theta_delta_max, self.theta_max
            ));
        }
        if self.t_cos == 0 {
            out.push("config: t_cos must be >= 1".to_string());
        }
        for (name, tol) in [
            ("feasibility_tol", self.feasibility_tol),
            ("integrality_tol", self.integrality_tol),
            ("oa_tol", self.oa_tol),
        ] {
            if !(tol > 0.0) {
                out.push(format!("config: {name} must be > 0 (got {tol})"));
            }
        }
        out
    }
}

/// The on-disk shape of a case file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseData {
    pub substations: Vec<Substation>,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub config: Config,
}

/// An undirected bus pair carrying one or more parallel branches.
///
/// `from < to` by bus index; branch orientation relative to the edge is
/// recorded in [`GridCase::branch_aligned`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub branches: Vec<usize>,
}

/// A validated grid with resolved indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    data: CaseData,
    bus_substation: Vec<usize>,
    substation_buses: Vec<Vec<usize>>,
    branch_ends: Vec<(usize, usize)>,
    branch_edge: Vec<usize>,
    branch_aligned: Vec<bool>,
    edges: Vec<Edge>,
    gen_bus: Vec<usize>,
    load_bus: Vec<usize>,
    reference_bus: usize,
    substation_index: HashMap<String, usize>,
}

fn index_of<'a>(
    items: impl Iterator<Item = &'a str>,
    kind: &str,
    problems: &mut Vec<String>,
) -> HashMap<String, usize> {
    let mut map = HashMap::new();
    for (i, id) in items.enumerate() {
        if map.insert(id.to_string(), i).is_some() {
            problems.push(format!("{kind} '{id}': duplicate id"));
        }
    }
    map
}

impl GridCase {
    /// Validate `data` and resolve all cross references. Every violated
    /// invariant is reported, not just the first.
    pub fn new(data: CaseData) -> Result<Self> {
        let mut problems = Vec::new();

        let sub_index = index_of(data.substations.iter().map(|s| s.id.as_str()), "substation", &mut problems);
        let bus_index = index_of(data.buses.iter().map(|b| b.id.as_str()), "bus", &mut problems);
        index_of(data.branches.iter().map(|b| b.id.as_str()), "branch", &mut problems);
        index_of(data.generators.iter().map(|g| g.id.as_str()), "generator", &mut problems);
        index_of(data.loads.iter().map(|d| d.id.as_str()), "load", &mut problems);

        let mut substation_buses = vec![Vec::new(); data.substations.len()];
        let mut listed_in: Vec<Vec<usize>> = vec![Vec::new(); data.buses.len()];
        for (k, sub) in data.substations.iter().enumerate() {
            if sub.bus_ids.is_empty() {
                problems.push(format!("substation '{}': bus_ids is empty", sub.id));
            }
            for bid in &sub.bus_ids {
                match bus_index.get(bid) {
                    Some(&n) => {
                        listed_in[n].push(k);
                        substation_buses[k].push(n);
                    }
                    None => problems.push(format!("substation '{}': unknown bus '{bid}'", sub.id)),
                }
            }
        }

        let mut bus_substation = vec![usize::MAX; data.buses.len()];
        let mut reference = Vec::new();
        for (n, bus) in data.buses.iter().enumerate() {
            match sub_index.get(&bus.substation_id) {
                Some(&k) => {
                    bus_substation[n] = k;
                    if listed_in[n] != [k] {
                        problems.push(format!(
                            "bus '{}': must be listed by exactly its own substation '{}'",
                            bus.id, bus.substation_id
                        ));
                    }
                }
                None => problems.push(format!("bus '{}': unknown substation '{}'", bus.id, bus.substation_id)),
            }
            if !(bus.v_min > 0.0 && bus.v_min <= bus.v_target && bus.v_target <= bus.v_max) {
                problems.push(format!(
                    "bus '{}': need 0 < v_min <= v_target <= v_max (got {}, {}, {})",
                    bus.id, bus.v_min, bus.v_target, bus.v_max
                ));
            }
            if bus.is_reference {
                reference.push(n);
            }
        }
        if reference.len() != 1 {
            problems.push(format!("case: exactly one reference bus required (found {})", reference.len()));
        }

        let mut branch_ends = Vec::with_capacity(data.branches.len());
        for br in &data.branches {
            let from = bus_index.get(&br.from_bus).copied();
            let to = bus_index.get(&br.to_bus).copied();
            if from.is_none() {
                problems.push(format!("branch '{}': unknown from_bus '{}'", br.id, br.from_bus));
            }
            if to.is_none() {
                problems.push(format!("branch '{}': unknown to_bus '{}'", br.id, br.to_bus));
            }
            if br.from_bus == br.to_bus {
                problems.push(format!("branch '{}': from_bus equals to_bus", br.id));
            }
            if !(br.s_max > 0.0) {
                problems.push(format!("branch '{}': s_max must be > 0 (got {})", br.id, br.s_max));
            }
            if br.b == 0.0 && br.g == 0.0 {
                problems.push(format!("branch '{}': b and g are both zero", br.id));
            }
            if !br.b.is_finite() || !br.g.is_finite() {
                problems.push(format!("branch '{}': non-finite admittance", br.id));
            }
            branch_ends.push((from.unwrap_or(0), to.unwrap_or(0)));
        }

        let mut gen_bus = Vec::with_capacity(data.generators.len());
        for g in &data.generators {
            match bus_index.get(&g.bus_id) {
                Some(&n) => gen_bus.push(n),
                None => {
                    problems.push(format!("generator '{}': unknown bus '{}'", g.id, g.bus_id));
                    gen_bus.push(0);
                }
            }
            if !(g.p_min >= 0.0 && g.p_min <= g.p_max) {
                problems.push(format!("generator '{}': need 0 <= p_min <= p_max (got {}, {})", g.id, g.p_min, g.p_max));
            }
            if !(g.q_min <= 0.0 && 0.0 <= g.q_max) {
                problems.push(format!("generator '{}': need q_min <= 0 <= q_max (got {}, {})", g.id, g.q_min, g.q_max));
            }
        }

        let mut load_bus = Vec::with_capacity(data.loads.len());
        for d in &data.loads {
            match bus_index.get(&d.bus_id) {
                Some(&n) => load_bus.push(n),
                None => {
                    problems.push(format!("load '{}': unknown bus '{}'", d.id, d.bus_id));
                    load_bus.push(0);
                }
            }
            if !(d.p_load >= 0.0) {
                problems.push(format!("load '{}': p_load must be >= 0 (got {})", d.id, d.p_load));
            }
        }

        problems.extend(data.config.violations());
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }

        let mut edge_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut branch_edge = Vec::with_capacity(branch_ends.len());
        let mut branch_aligned = Vec::with_capacity(branch_ends.len());
        for (l, &(f, t)) in branch_ends.iter().enumerate() {
            let key = (f.min(t), f.max(t));
            let e = *edge_of.entry(key).or_insert_with(|| {
                edges.push(Edge { from: key.0, to: key.1, branches: Vec::new() });
                edges.len() - 1
            });
            edges[e].branches.push(l);
            branch_edge.push(e);
            branch_aligned.push(f < t);
        }

        Ok(Self {
            substation_index: sub_index,
            data,
            bus_substation,
            substation_buses,
            branch_ends,
            branch_edge,
            branch_aligned,
            edges,
            gen_bus,
            load_bus,
            reference_bus: reference[0],
        })
    }

    pub fn data(&self) -> &CaseData {
        &self.data
    }

    pub fn config(&self) -> &Config {
        &self.data.config
    }

    /// Same network with a different configuration (revalidated).
    pub fn with_config(&self, config: Config) -> Result<Self> {
        let mut data = self.data.clone();
        data.config = config;
        Self::new(data)
    }

    pub fn substations(&self) -> &[Substation] {
        &self.data.substations
    }
    pub fn buses(&self) -> &[Bus] {
        &self.data.buses
    }
    pub fn branches(&self) -> &[Branch] {
        &self.data.branches
    }
    pub fn generators(&self) -> &[Generator] {
        &self.data.generators
    }
    pub fn loads(&self) -> &[Load] {
        &self.data.loads
    }
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn substation_index(&self, id: &str) -> Option<usize> {
        self.substation_index.get(id).copied()
    }
    pub fn bus_substation(&self, bus: usize) -> usize {
        self.bus_substation[bus]
    }
    pub fn substation_buses(&self, k: usize) -> &[usize] {
        &self.substation_buses[k]
    }
    /// `(from, to)` bus indices of branch `l`.
    pub fn branch_ends(&self, l: usize) -> (usize, usize) {
        self.branch_ends[l]
    }
    pub fn branch_edge(&self, l: usize) -> usize {
        self.branch_edge[l]
    }
    /// True when branch `l` runs in the same direction as its edge.
    pub fn branch_aligned(&self, l: usize) -> bool {
        self.branch_aligned[l]
    }
    pub fn gen_bus(&self, g: usize) -> usize {
        self.gen_bus[g]
    }
    pub fn load_bus(&self, d: usize) -> usize {
        self.load_bus[d]
    }
    pub fn reference_bus(&self) -> usize {
        self.reference_bus
    }

    pub fn total_load(&self) -> f64 {
        self.data.loads.iter().map(|d| d.p_load).sum()
    }
}
