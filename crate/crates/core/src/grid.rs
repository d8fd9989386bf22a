//! Radial distribution feeder with scalar edge capacities.
//!
//! The DSO feasibility check is a bottleneck model: a transfer between two
//! feeder nodes may use at most the smallest residual capacity along the
//! unique tree path between them. Scheduled flows are additive magnitudes.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Address, Canonical, Encoder};

pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("unknown feeder node {0:?}")]
    UnknownNode(String),
    #[error("feeder node {0:?} declared twice")]
    DuplicateNode(String),
    #[error("edge {0:?}-{1:?} has zero capacity")]
    ZeroCapacity(String, String),
    #[error("no edge between {0:?} and {1:?}")]
    UnknownEdge(String, String),
    #[error("feeder is not radial: {0}")]
    NotRadial(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub a: String,
    pub b: String,
    pub capacity_w: u64,
}

impl Canonical for EdgeSpec {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.str(&self.a).str(&self.b).u64(self.capacity_w);
    }
}

/// Node and edge lists as declared in a scenario or genesis record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeederSpec {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeSpec>,
}

impl Canonical for FeederSpec {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.list(&self.nodes).list(&self.edges);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub capacity_w: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeederGraph {
    nodes: Vec<String>,
    index: BTreeMap<String, usize>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, EdgeId)>>,
    locations: BTreeMap<Address, usize>,
}

/// Outcome of a feasibility request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grant {
    Feasible { granted_w: u64 },
    Clipped { granted_w: u64 },
}

impl Grant {
    pub fn granted_w(&self) -> u64 {
        match *self {
            Grant::Feasible { granted_w } | Grant::Clipped { granted_w } => granted_w,
        }
    }

    pub fn is_clipped(&self) -> bool {
        matches!(self, Grant::Clipped { .. })
    }
}

/// Per-edge scheduled flow for the current round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSchedule {
    flows: Vec<u64>,
}

impl FlowSchedule {
    pub fn new(graph: &FeederGraph) -> Self {
        Self { flows: vec![0; graph.edges.len()] }
    }

    pub fn flow(&self, edge: EdgeId) -> u64 {
        self.flows[edge]
    }

    pub fn flows(&self) -> &[u64] {
        &self.flows
    }

    pub fn reset(&mut self) {
        self.flows.iter_mut().for_each(|f| *f = 0);
    }
}

impl FeederGraph {
    pub fn build(spec: &FeederSpec) -> Result<Self, GridError> {
        if spec.nodes.is_empty() {
            return Err(GridError::NotRadial("no nodes".into()));
        }
        let mut index = BTreeMap::new();
        for (i, name) in spec.nodes.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(GridError::DuplicateNode(name.clone()));
            }
        }
        if spec.edges.len() + 1 != spec.nodes.len() {
            return Err(GridError::NotRadial(format!(
                "{} nodes need {} edges, found {}",
                spec.nodes.len(),
                spec.nodes.len() - 1,
                spec.edges.len()
            )));
        }
        let mut edges = Vec::with_capacity(spec.edges.len());
        let mut adjacency = vec![Vec::new(); spec.nodes.len()];
        for e in &spec.edges {
            let a = *index.get(&e.a).ok_or_else(|| GridError::UnknownNode(e.a.clone()))?;
            let b = *index.get(&e.b).ok_or_else(|| GridError::UnknownNode(e.b.clone()))?;
            if a == b {
                return Err(GridError::NotRadial(format!("self-loop at {:?}", e.a)));
            }
            if e.capacity_w == 0 {
                return Err(GridError::ZeroCapacity(e.a.clone(), e.b.clone()));
            }
            let id = edges.len();
            edges.push(Edge { a, b, capacity_w: e.capacity_w });
            adjacency[a].push((b, id));
            adjacency[b].push((a, id));
        }
        let graph = Self {
            nodes: spec.nodes.clone(),
            index,
            edges,
            adjacency,
            locations: BTreeMap::new(),
        };
        // n-1 edges plus connectivity implies acyclic
        let reached = graph.bfs_parents(0).iter().filter(|p| p.is_some()).count();
        if reached != graph.nodes.len() {
            return Err(GridError::NotRadial("graph is disconnected".into()));
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_name(&self, idx: usize) -> &str {
        &self.nodes[idx]
    }

    pub fn contains(&self, node: &str) -> bool {
        self.index.contains_key(node)
    }

    pub fn set_location(&mut self, who: Address, node: &str) -> Result<(), GridError> {
        let idx = self.node_index(node)?;
        self.locations.insert(who, idx);
        Ok(())
    }

    pub fn location_of(&self, who: &Address) -> Option<&str> {
        self.locations.get(who).map(|&i| self.nodes[i].as_str())
    }

    /// Overwrite the capacity of the edge joining `a` and `b`.
    pub fn set_capacity(&mut self, a: &str, b: &str, capacity_w: u64) -> Result<(), GridError> {
        if capacity_w == 0 {
            return Err(GridError::ZeroCapacity(a.into(), b.into()));
        }
        let ia = self.node_index(a)?;
        let ib = self.node_index(b)?;
        let edge = self
            .edges
            .iter_mut()
            .find(|e| (e.a == ia && e.b == ib) || (e.a == ib && e.b == ia))
            .ok_or_else(|| GridError::UnknownEdge(a.into(), b.into()))?;
        edge.capacity_w = capacity_w;
        Ok(())
    }

    /// The unique tree path from `a` to `b`, as edge ids in walking order.
    pub fn path_between(&self, a: &str, b: &str) -> Result<Vec<EdgeId>, GridError> {
        let ia = self.node_index(a)?;
        let ib = self.node_index(b)?;
        let parents = self.bfs_parents(ia);
        let mut path = Vec::new();
        let mut at = ib;
        while at != ia {
            let (prev, edge) = parents[at].expect("tree is connected");
            path.push(edge);
            at = prev;
        }
        path.reverse();
        Ok(path)
    }

    /// Smallest residual capacity on the path; `None` for an empty path.
    pub fn residual(&self, schedule: &FlowSchedule, path: &[EdgeId]) -> Option<u64> {
        path.iter()
            .map(|&e| self.edges[e].capacity_w.saturating_sub(schedule.flows[e]))
            .min()
    }

    /// Grant as much of `amount_w` as the path bottleneck allows and book the
    /// granted amount on every path edge.
    pub fn check_feasibility(
        &self,
        schedule: &mut FlowSchedule,
        from: &str,
        to: &str,
        amount_w: u64,
    ) -> Result<Grant, GridError> {
        let path = self.path_between(from, to)?;
        let granted_w = match self.residual(schedule, &path) {
            Some(residual) => amount_w.min(residual),
            None => amount_w,
        };
        for &e in &path {
            schedule.flows[e] += granted_w;
        }
        Ok(if granted_w < amount_w {
            Grant::Clipped { granted_w }
        } else {
            Grant::Feasible { granted_w }
        })
    }

    fn node_index(&self, node: &str) -> Result<usize, GridError> {
        self.index
            .get(node)
            .copied()
            .ok_or_else(|| GridError::UnknownNode(node.to_string()))
    }

    /// BFS tree rooted at `root`: entry i is `(parent, edge)`; the root maps
    /// to itself.
    fn bfs_parents(&self, root: usize) -> Vec<Option<(usize, EdgeId)>> {
        let mut parents = vec![None; self.nodes.len()];
        parents[root] = Some((root, usize::MAX));
        let mut queue = VecDeque::from([root]);
        while let Some(n) = queue.pop_front() {
            for &(m, e) in &self.adjacency[n] {
                if parents[m].is_none() {
                    parents[m] = Some((n, e));
                    queue.push_back(m);
                }
            }
        }
        parents
    }
}

/// Power booked on the feeder for `wh` delivered over one round.
pub fn energy_to_power(wh: u64, round_minutes: u64) -> u64 {
    let num = wh as u128 * 60;
    let den = round_minutes.max(1) as u128;
    u64::try_from(num.div_ceil(den)).unwrap_or(u64::MAX)
}

/// Energy deliverable in one round at constant power `w`.
pub fn power_to_energy(w: u64, round_minutes: u64) -> u64 {
    u64::try_from(w as u128 * round_minutes as u128 / 60).unwrap_or(u64::MAX)
}
