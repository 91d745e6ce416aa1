//! Grid descriptions and the two graph domains built from them.
//!
//! A [`GridCase`] holds the bus and branch tables. From it we build either the
//! bus-vertex graph (buses are vertices, in-service branches are weighted
//! edges) or the line-vertex graph (in-service branches are vertices, joined
//! whenever two branches share a bus). Both carry their combinatorial
//! Laplacian `L = D - W`.

mod matpower;
mod native;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use matpower::{parse_matpower_case, write_matpower_case};
pub use native::{apply_coordinates, parse_coordinates_csv, read_native_case, write_native_case};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    Pv,
    Pq,
}

impl BusType {
    /// MATPOWER type code: 1 = PQ, 2 = PV, 3 = reference.
    pub fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            1 if code == 1.0 => Some(BusType::Pq),
            2 if code == 2.0 => Some(BusType::Pv),
            3 if code == 3.0 => Some(BusType::Slack),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Slack => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: u32,
    pub bus_type: BusType,
    /// Active demand in per-unit on the case base.
    pub p_load: f64,
    pub coords: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    InService,
    Out,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from_bus: u32,
    pub to_bus: u32,
    /// Series reactance in per-unit.
    pub reactance: f64,
    pub status: BranchStatus,
}

impl BranchRecord {
    pub fn in_service(&self) -> bool {
        self.status == BranchStatus::InService
    }
}

/// Bus and branch tables of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
}

impl GridCase {
    pub fn new(base_mva: f64, buses: Vec<BusRecord>, branches: Vec<BranchRecord>) -> Result<Self> {
        let case = GridCase {
            base_mva,
            buses,
            branches,
        };
        case.validate()?;
        Ok(case)
    }

    /// Bus id to row position in the bus table.
    pub fn bus_index(&self) -> HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.bus_type == BusType::Slack)
    }

    /// Table positions of the in-service branches, in table order.
    pub fn in_service_branches(&self) -> Vec<usize> {
        (0..self.branches.len())
            .filter(|&k| self.branches[k].in_service())
            .collect()
    }

    /// Branch endpoints as bus-table positions.
    pub fn branch_endpoints(&self, branch: usize) -> (usize, usize) {
        let index = self.bus_index();
        let b = &self.branches[branch];
        (index[&b.from_bus], index[&b.to_bus])
    }

    fn validate(&self) -> Result<()> {
        if !(self.base_mva.is_finite() && self.base_mva > 0.0) {
            return Err(Error::Validation(format!(
                "baseMVA must be positive, got {}",
                self.base_mva
            )));
        }
        let mut index = HashMap::with_capacity(self.buses.len());
        for (i, bus) in self.buses.iter().enumerate() {
            if index.insert(bus.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate bus id {}", bus.id)));
            }
            if !bus.p_load.is_finite() {
                return Err(Error::Validation(format!("bus {} has non-finite load", bus.id)));
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            if br.from_bus == br.to_bus {
                return Err(Error::Validation(format!(
                    "branch {k} connects bus {} to itself",
                    br.from_bus
                )));
            }
            for end in [br.from_bus, br.to_bus] {
                if !index.contains_key(&end) {
                    return Err(Error::Validation(format!(
                        "branch {k} references unknown bus {end}"
                    )));
                }
            }
            if !(br.reactance.is_finite() && br.reactance > 0.0) {
                return Err(Error::Validation(format!(
                    "branch {k} has non-positive reactance {}",
                    br.reactance
                )));
            }
        }

        // Exactly one slack per connected piece of the in-service network.
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in self.branches.iter().filter(|b| b.in_service()) {
            let (a, b) = (index[&br.from_bus], index[&br.to_bus]);
            adj[a].push(b);
            adj[b].push(a);
        }
        for comp in components(&adj) {
            let slacks: Vec<u32> = comp
                .iter()
                .filter(|&&i| self.buses[i].bus_type == BusType::Slack)
                .map(|&i| self.buses[i].id)
                .collect();
            if slacks.len() != 1 {
                let first = self.buses[comp[0]].id;
                return Err(Error::Validation(format!(
                    "connected system containing bus {first} has {} slack buses {slacks:?}",
                    slacks.len()
                )));
            }
        }
        Ok(())
    }
}

/// Connected components of an adjacency list, each sorted, ordered by smallest member.
fn components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    let mut out = Vec::new();
    for start in 0..adj.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    BusVertex,
    LineVertex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    InverseDistance,
    #[default]
    InverseReactance,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Weighted undirected graph with its Laplacian.
#[derive(Debug, Clone)]
pub struct GridGraph {
    kind: GraphKind,
    edges: Vec<Edge>,
    laplacian: DMatrix<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Bus ids for bus-vertex graphs, branch-table positions for line-vertex graphs.
    labels: Vec<u32>,
    component_count: usize,
}

impl GridGraph {
    /// Builds a graph from `(i, j, w)` triples. Repeated pairs are merged by
    /// summing their weights; zero-weight pairs are dropped.
    pub fn from_weighted_edges(
        kind: GraphKind,
        n: usize,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        if labels.len() != n {
            return Err(Error::mismatch(n, labels.len()));
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, w) in triples {
            if i >= n || j >= n {
                return Err(Error::Validation(format!("edge ({i}, {j}) outside {n} vertices")));
            }
            if i == j {
                return Err(Error::Validation(format!("self loop at vertex {i}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Validation(format!("edge ({i}, {j}) has weight {w}")));
            }
            *merged.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
        }
        let edges: Vec<Edge> = merged
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|((i, j), weight)| Edge { i, j, weight })
            .collect();

        let mut adjacency = vec![Vec::new(); n];
        let mut laplacian = DMatrix::zeros(n, n);
        for e in &edges {
            adjacency[e.i].push((e.j, e.weight));
            adjacency[e.j].push((e.i, e.weight));
            laplacian[(e.i, e.j)] = -e.weight;
            laplacian[(e.j, e.i)] = -e.weight;
        }
        for (v, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_by_key(|&(w, _)| w);
            // Diagonal summed in column order so each row cancels in that order.
            laplacian[(v, v)] = -(0..n).filter(|&c| c != v).map(|c| laplacian[(v, c)]).sum::<f64>();
        }
        let plain: Vec<Vec<usize>> = adjacency
            .iter()
            .map(|nb| nb.iter().map(|&(w, _)| w).collect())
            .collect();
        let component_count = components(&plain).len();
        Ok(GridGraph {
            kind,
            edges,
            laplacian,
            adjacency,
            labels,
            component_count,
        })
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            -self.laplacian[(i, j)]
        }
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    /// Warning flag: detectors still run, but per-component spectra mix.
    pub fn is_disconnected(&self) -> bool {
        self.component_count > 1
    }

    /// `(Lx)(n)` without forming a dense product.
    pub fn apply_laplacian(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::mismatch(self.n(), x.len()));
        }
        Ok(self
            .adjacency
            .iter()
            .enumerate()
            .map(|(v, nbrs)| {
                let mut acc = 0.0;
                for &(w, weight) in nbrs {
                    acc += weight * (x[v] - x[w]);
                }
                acc
            })
            .collect())
    }

    /// Unweighted BFS hop counts from `source`; `None` marks another component.
    pub fn hop_distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        if source >= self.n() {
            return dist;
        }
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or(0);
            for &(w, _) in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// Hop count between two vertices, `None` when they lie in different components.
pub fn hop_distance(g: &GridGraph, a: usize, b: usize) -> Option<usize> {
    if a >= g.n() || b >= g.n() {
        return None;
    }
    g.hop_distances_from(a)[b]
}

/// One vertex per bus; out-of-service branches are skipped and parallel
/// branches merge by summing their weights.
pub fn build_bus_graph(case: &GridCase, weighting: Weighting) -> Result<GridGraph> {
    let index = case.bus_index();
    let mut triples = Vec::with_capacity(case.branches.len());
    for br in case.branches.iter().filter(|b| b.in_service()) {
        let (i, j) = (index[&br.from_bus], index[&br.to_bus]);
        let w = match weighting {
            Weighting::Unit => 1.0,
            Weighting::InverseReactance => 1.0 / br.reactance,
            Weighting::InverseDistance => {
                let a = case.buses[i].coords.ok_or(Error::MissingCoordinates(br.from_bus))?;
                let b = case.buses[j].coords.ok_or(Error::MissingCoordinates(br.to_bus))?;
                let d = (a.0 - b.0).hypot(a.1 - b.1);
                if d == 0.0 {
                    return Err(Error::DegenerateWeight {
                        from: br.from_bus,
                        to: br.to_bus,
                    });
                }
                1.0 / d
            }
        };
        triples.push((i, j, w));
    }
    let labels = case.buses.iter().map(|b| b.id).collect();
    GridGraph::from_weighted_edges(GraphKind::BusVertex, case.buses.len(), triples, labels)
}

/// One vertex per in-service branch; unit edge whenever two branches share a bus.
pub fn build_line_graph(case: &GridCase) -> Result<GridGraph> {
    let active = case.in_service_branches();
    if active.is_empty() {
        return Err(Error::Structure("no in-service branches".into()));
    }
    let mut at_bus: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (v, &k) in active.iter().enumerate() {
        let br = &case.branches[k];
        at_bus.entry(br.from_bus).or_default().push(v);
        at_bus.entry(br.to_bus).or_default().push(v);
    }
    let mut pairs = BTreeSet::new();
    for incident in at_bus.values() {
        for (a, &p) in incident.iter().enumerate() {
            for &q in &incident[a + 1..] {
                pairs.insert((p.min(q), p.max(q)));
            }
        }
    }
    let labels = active.iter().map(|&k| k as u32).collect();
    GridGraph::from_weighted_edges(
        GraphKind::LineVertex,
        active.len(),
        pairs.into_iter().map(|(p, q)| (p, q, 1.0)),
        labels,
    )
}
