//! Structural graphs of the restoration environment: the power network, the
//! road transport network, and the coupling that maps power nodes onto the
//! road node a crew has to reach to work on them.
//!
//! All types here are immutable after construction and safe to share across
//! concurrent episode evaluators.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::EpisodeConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerNodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoadNodeId(pub u32);

impl fmt::Display for PowerNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for RoadNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// A bus in the distribution network. Sources are generator buses and carry
/// no load; every other node is a consumer bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerNode {
    pub id: PowerNodeId,
    pub x: f64,
    pub y: f64,
    pub load_kw: f64,
    pub is_source: bool,
}

/// Undirected, unweighted distribution network.
#[derive(Debug, Clone)]
pub struct PowerNetwork {
    nodes: Vec<PowerNode>,
    edges: Vec<(PowerNodeId, PowerNodeId)>,
    index: HashMap<PowerNodeId, usize>,
    adjacency: Vec<Vec<usize>>,
}

impl PowerNetwork {
    pub fn new(nodes: Vec<PowerNode>, edges: Vec<(PowerNodeId, PowerNodeId)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyNetwork("power network has no nodes"));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id, i).is_some() {
                return Err(Error::DuplicateNode {
                    kind: "power",
                    id: node.id.0,
                });
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(a, b) in &edges {
            let ia = *index.get(&a).ok_or(Error::UnknownNode {
                kind: "power",
                id: a.0,
            })?;
            let ib = *index.get(&b).ok_or(Error::UnknownNode {
                kind: "power",
                id: b.0,
            })?;
            if ia != ib {
                adjacency[ia].push(ib);
                adjacency[ib].push(ia);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            nodes,
            edges,
            index,
            adjacency,
        })
    }

    pub fn nodes(&self) -> &[PowerNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(PowerNodeId, PowerNodeId)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: PowerNodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, id: PowerNodeId) -> Option<&PowerNode> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn neighbors(&self, idx: usize) -> &[usize] {
        &self.adjacency[idx]
    }

    /// Sum of all loads; the power served when nothing is damaged.
    pub fn total_load_kw(&self) -> f64 {
        self.nodes.iter().map(|n| n.load_kw).sum()
    }

    pub fn source_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_source)
            .map(|(i, _)| i)
    }

    /// Indices of nodes eligible for damage sampling (non-sources).
    pub fn non_source_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.is_source)
            .map(|(i, _)| i)
    }

    fn connected_component_count(&self) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut components = 0;
        for start in 0..self.nodes.len() {
            if seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }
}

/// A point of interest along the road network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNode {
    pub id: RoadNodeId,
    pub x: f64,
    pub y: f64,
}

/// One directed road segment; `travel_time_h` is the time for a vehicle
/// moving at the speed limit.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadEdge {
    pub from: RoadNodeId,
    pub to: RoadNodeId,
    pub travel_time_h: f64,
}

/// Directed, weighted road network with parallel edges permitted.
#[derive(Debug, Clone)]
pub struct TransportNetwork {
    nodes: Vec<RoadNode>,
    edges: Vec<RoadEdge>,
    index: HashMap<RoadNodeId, usize>,
    // (head node index, edge index), sorted by (head id, weight, edge index)
    out_adj: Vec<Vec<(usize, usize)>>,
    // (tail node index, edge index)
    in_adj: Vec<Vec<(usize, usize)>>,
}

impl TransportNetwork {
    pub fn new(nodes: Vec<RoadNode>, edges: Vec<RoadEdge>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyNetwork("transport network has no nodes"));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id, i).is_some() {
                return Err(Error::DuplicateNode {
                    kind: "road",
                    id: node.id.0,
                });
            }
        }
        let mut out_adj = vec![Vec::new(); nodes.len()];
        let mut in_adj = vec![Vec::new(); nodes.len()];
        for (e, edge) in edges.iter().enumerate() {
            let tail = *index.get(&edge.from).ok_or(Error::UnknownNode {
                kind: "road",
                id: edge.from.0,
            })?;
            let head = *index.get(&edge.to).ok_or(Error::UnknownNode {
                kind: "road",
                id: edge.to.0,
            })?;
            out_adj[tail].push((head, e));
            in_adj[head].push((tail, e));
        }
        let sort_key = |entry: &(usize, usize)| {
            (
                nodes[entry.0].id,
                edges[entry.1].travel_time_h.to_bits() as i64,
                entry.1,
            )
        };
        for list in &mut out_adj {
            list.sort_by_key(sort_key);
        }
        for list in &mut in_adj {
            list.sort_by_key(sort_key);
        }
        Ok(Self {
            nodes,
            edges,
            index,
            out_adj,
            in_adj,
        })
    }

    pub fn nodes(&self) -> &[RoadNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: RoadNodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, id: RoadNodeId) -> Option<&RoadNode> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    /// Outgoing `(head index, edge index)` pairs, id-sorted.
    pub fn outgoing(&self, idx: usize) -> &[(usize, usize)] {
        &self.out_adj[idx]
    }

    /// Incoming `(tail index, edge index)` pairs, id-sorted.
    pub fn incoming(&self, idx: usize) -> &[(usize, usize)] {
        &self.in_adj[idx]
    }

    /// True iff every node can reach every other node along directed edges.
    pub fn is_strongly_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let reaches_all = |adj: &Vec<Vec<(usize, usize)>>| {
            let mut seen = vec![false; self.nodes.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        count += 1;
                        stack.push(v);
                    }
                }
            }
            count == self.nodes.len()
        };
        reaches_all(&self.out_adj) && reaches_all(&self.in_adj)
    }
}

/// Total map from power node to the nearest road node.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    map: Vec<(PowerNodeId, RoadNodeId)>,
    index: HashMap<PowerNodeId, RoadNodeId>,
}

impl Coupling {
    pub fn road_for(&self, power: PowerNodeId) -> Option<RoadNodeId> {
        self.index.get(&power).copied()
    }

    pub fn entries(&self) -> &[(PowerNodeId, RoadNodeId)] {
        &self.map
    }
}

/// Maps every power node onto the road node minimizing Euclidean distance.
/// Distance ties break to the lowest road node id. Both networks must share
/// one planar coordinate frame.
pub fn couple_networks(power: &PowerNetwork, roads: &TransportNetwork) -> Result<Coupling> {
    if roads.is_empty() {
        return Err(Error::EmptyNetwork(
            "cannot couple onto an empty road network",
        ));
    }
    if power.is_empty() {
        return Err(Error::EmptyNetwork("cannot couple an empty power network"));
    }
    let mut map = Vec::with_capacity(power.len());
    let mut index = HashMap::with_capacity(power.len());
    for pnode in power.nodes() {
        let mut best: Option<(f64, RoadNodeId)> = None;
        for rnode in roads.nodes() {
            let d2 = (pnode.x - rnode.x).powi(2) + (pnode.y - rnode.y).powi(2);
            let candidate = (d2, rnode.id);
            best = Some(match best {
                None => candidate,
                Some(cur) => {
                    if candidate.0 < cur.0 || (candidate.0 == cur.0 && candidate.1 < cur.1) {
                        candidate
                    } else {
                        cur
                    }
                }
            });
        }
        let (_, road) = best.expect("non-empty road network");
        map.push((pnode.id, road));
        index.insert(pnode.id, road);
    }
    Ok(Coupling { map, index })
}

/// One broken scenario invariant, naming the offending element and rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: &'static str,
    pub subject: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.subject)
    }
}

/// Immutable description of one restoration problem: coupled networks,
/// depot placement and episode parameters.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub power: PowerNetwork,
    pub roads: TransportNetwork,
    pub coupling: Coupling,
    pub depots: Vec<RoadNodeId>,
    pub config: EpisodeConfig,
}

pub type SharedScenario = Arc<Scenario>;

impl Scenario {
    pub fn new(
        power: PowerNetwork,
        roads: TransportNetwork,
        coupling: Coupling,
        depots: Vec<RoadNodeId>,
        config: EpisodeConfig,
    ) -> Self {
        Self {
            power,
            roads,
            coupling,
            depots,
            config,
        }
    }

    /// Returns `self` if `validate_scenario` reports nothing, else an error
    /// carrying every violation.
    pub fn validated(self) -> Result<Self> {
        let violations = validate_scenario(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidScenario(violations))
        }
    }
}

/// Checks every structural invariant and reports all violations; never
/// panics or errors on bad input.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();

    // Power network rules.
    let mut sources = 0;
    for node in s.power.nodes() {
        if node.is_source {
            sources += 1;
            if node.load_kw != 0.0 {
                out.push(Violation {
                    rule: "source node carries load",
                    subject: format!("{} load_kw={}", node.id, node.load_kw),
                });
            }
        }
        if node.load_kw.is_nan() || node.load_kw < 0.0 {
            out.push(Violation {
                rule: "negative load",
                subject: format!("{} load_kw={}", node.id, node.load_kw),
            });
        }
    }
    if sources == 0 {
        out.push(Violation {
            rule: "power network has no source node",
            subject: "expected at least one".into(),
        });
    }
    for &(a, b) in s.power.edges() {
        if a == b {
            out.push(Violation {
                rule: "power self-loop",
                subject: format!("{a}"),
            });
        }
    }
    if s.power.connected_component_count() > 1 {
        out.push(Violation {
            rule: "power network disconnected",
            subject: format!("{} components", s.power.connected_component_count()),
        });
    }

    // Transport network rules.
    for (e, edge) in s.roads.edges().iter().enumerate() {
        if !(edge.travel_time_h > 0.0 && edge.travel_time_h.is_finite()) {
            out.push(Violation {
                rule: "non-positive travel time",
                subject: format!(
                    "edge #{e} {}->{} t={}",
                    edge.from, edge.to, edge.travel_time_h
                ),
            });
        }
    }
    if !s.roads.is_strongly_connected() {
        out.push(Violation {
            rule: "transport network not strongly connected",
            subject: "some node pair has no directed route".into(),
        });
    }

    // Coupling rules: total map over power nodes.
    for node in s.power.nodes() {
        match s.coupling.road_for(node.id) {
            None => out.push(Violation {
                rule: "power node missing from coupling",
                subject: format!("{}", node.id),
            }),
            Some(road) => {
                if s.roads.index_of(road).is_none() {
                    out.push(Violation {
                        rule: "coupling references unknown road node",
                        subject: format!("{} -> {road}", node.id),
                    });
                }
            }
        }
    }

    // Depots and config consistency.
    for &d in &s.depots {
        if s.roads.index_of(d).is_none() {
            out.push(Violation {
                rule: "depot id not in road network",
                subject: format!("{d}"),
            });
        }
    }
    if s.depots.len() != s.config.n_depots {
        out.push(Violation {
            rule: "depot count mismatch",
            subject: format!(
                "config says {}, scenario has {}",
                s.config.n_depots,
                s.depots.len()
            ),
        });
    }
    if let Err(err) = s.config.validate() {
        out.push(Violation {
            rule: "invalid episode config",
            subject: err.to_string(),
        });
    }
    let eligible = s.power.non_source_indices().count();
    if s.config.n_damaged > eligible {
        out.push(Violation {
            rule: "n_damaged exceeds eligible (non-source) power nodes",
            subject: format!("{} > {}", s.config.n_damaged, eligible),
        });
    }

    out
}
