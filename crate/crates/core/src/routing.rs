//! Shortest-path travel times over the transport network.
//!
//! All node-to-node plans a crew can need during an episode are precomputed
//! at reset: for every point of interest (depot or damaged-node road node) we
//! run one reverse Dijkstra, giving the travel time from *every* road node to
//! that POI. Crews then move by greedy next-hop walks over those fields, so
//! per-step movement and observation features are O(1) lookups.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::net::{RoadNodeId, TransportNetwork};

/// An explicit route: consecutive nodes joined by directed edges, with the
/// summed travel time.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPlan {
    pub nodes: Vec<RoadNodeId>,
    pub total_time: f64,
}

/// Where a crew is on the road network: at a node, or part-way along a
/// directed edge. Crews may not reverse mid-edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrewPosition {
    AtNode(RoadNodeId),
    OnEdge {
        /// Index into `TransportNetwork::edges`.
        edge: usize,
        /// Fraction of the edge already covered, in [0, 1).
        fraction: f64,
    },
}

/// Travel time from every road node to one fixed POI, plus the greedy
/// next-hop walk that realizes it.
#[derive(Debug, Clone)]
struct ToPoiField {
    target_idx: usize,
    /// dist[v] = shortest travel time from node v to the POI (inf if none).
    dist: Vec<f64>,
}

impl ToPoiField {
    /// Reverse Dijkstra over incoming edges from `target`.
    fn build(roads: &TransportNetwork, target_idx: usize) -> Self {
        #[derive(PartialEq)]
        struct Entry {
            dist: f64,
            node: usize,
            id: RoadNodeId,
        }
        impl Eq for Entry {}
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                // Min-heap on (dist, id) via reversed comparison.
                other
                    .dist
                    .total_cmp(&self.dist)
                    .then_with(|| other.id.cmp(&self.id))
            }
        }
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let n = roads.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut settled = vec![false; n];
        dist[target_idx] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry {
            dist: 0.0,
            node: target_idx,
            id: roads.nodes()[target_idx].id,
        });
        while let Some(Entry {
            dist: d, node: v, ..
        }) = heap.pop()
        {
            if settled[v] {
                continue;
            }
            settled[v] = true;
            for &(u, e) in roads.incoming(v) {
                let cand = roads.edges()[e].travel_time_h + d;
                if cand < dist[u] {
                    dist[u] = cand;
                    heap.push(Entry {
                        dist: cand,
                        node: u,
                        id: roads.nodes()[u].id,
                    });
                }
            }
        }
        Self { target_idx, dist }
    }

    /// Next hop from `u` on a shortest route to the POI: the lowest-id
    /// neighbor v whose edge satisfies dist[u] = w(u,v) + dist[v] exactly.
    /// Among parallel edges the minimum-weight one wins.
    fn next_hop(&self, roads: &TransportNetwork, u: usize) -> Option<(usize, usize)> {
        if u == self.target_idx {
            return None;
        }
        let du = self.dist[u];
        if !du.is_finite() {
            return None;
        }
        // outgoing() is sorted by (head id, weight, edge index), so the first
        // exact match is the deterministic choice.
        roads
            .outgoing(u)
            .iter()
            .copied()
            .find(|&(v, e)| roads.edges()[e].travel_time_h + self.dist[v] == du)
    }

    /// Reconstructs the lexicographically-smallest minimum-time node
    /// sequence from `from` to the POI.
    fn walk(&self, roads: &TransportNetwork, from: usize) -> Vec<RoadNodeId> {
        let mut nodes = vec![roads.nodes()[from].id];
        let mut u = from;
        while let Some((v, _)) = self.next_hop(roads, u) {
            nodes.push(roads.nodes()[v].id);
            u = v;
        }
        nodes
    }
}

/// Minimum travel time among all directed routes, with a deterministic
/// lexicographically-smallest tie-break on the node sequence.
pub fn shortest_path(
    roads: &TransportNetwork,
    from: RoadNodeId,
    to: RoadNodeId,
) -> Result<PathPlan> {
    let from_idx = roads.index_of(from).ok_or(Error::UnknownNode {
        kind: "road",
        id: from.0,
    })?;
    let to_idx = roads.index_of(to).ok_or(Error::UnknownNode {
        kind: "road",
        id: to.0,
    })?;
    let field = ToPoiField::build(roads, to_idx);
    let total = field.dist[from_idx];
    if !total.is_finite() {
        return Err(Error::NoRoute {
            from: from.0,
            to: to.0,
        });
    }
    Ok(PathPlan {
        nodes: field.walk(roads, from_idx),
        total_time: total,
    })
}

/// Travel times (and realizing plans) between every pair of points of
/// interest, plus the full to-POI distance fields used for crew movement
/// and observation features.
#[derive(Debug, Clone)]
pub struct PoiMatrix {
    pois: Vec<RoadNodeId>,
    poi_index: HashMap<RoadNodeId, usize>,
    /// Row-major |POI| x |POI| travel times.
    times: Vec<f64>,
    /// Row-major companion matrix of realized paths.
    plans: Vec<PathPlan>,
    fields: Vec<ToPoiField>,
}

impl PoiMatrix {
    pub fn pois(&self) -> &[RoadNodeId] {
        &self.pois
    }

    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn poi_position(&self, id: RoadNodeId) -> Option<usize> {
        self.poi_index.get(&id).copied()
    }

    /// Travel time from POI `i` to POI `j` (matrix positions).
    pub fn time(&self, i: usize, j: usize) -> f64 {
        self.times[i * self.pois.len() + j]
    }

    pub fn plan(&self, i: usize, j: usize) -> &PathPlan {
        &self.plans[i * self.pois.len() + j]
    }

    fn field_for(&self, target: RoadNodeId) -> Result<&ToPoiField> {
        let j = self.poi_position(target).ok_or(Error::UnknownNode {
            kind: "poi",
            id: target.0,
        })?;
        Ok(&self.fields[j])
    }

    /// Travel time from an arbitrary road node index to a POI.
    pub fn time_from_node(&self, node_idx: usize, target: RoadNodeId) -> Result<f64> {
        Ok(self.field_for(target)?.dist[node_idx])
    }

    /// Next hop (head node index, edge index) from `node_idx` toward `target`.
    pub(crate) fn next_hop(
        &self,
        roads: &TransportNetwork,
        node_idx: usize,
        target: RoadNodeId,
    ) -> Result<Option<(usize, usize)>> {
        Ok(self.field_for(target)?.next_hop(roads, node_idx))
    }
}

/// Runs one reverse Dijkstra per POI and assembles the pairwise matrix.
/// Errors with `NoRoute` if any POI pair is unreachable.
pub fn precompute_poi_matrix(roads: &TransportNetwork, pois: &[RoadNodeId]) -> Result<PoiMatrix> {
    let n = pois.len();
    let mut poi_index = HashMap::with_capacity(n);
    let mut fields = Vec::with_capacity(n);
    for (j, &poi) in pois.iter().enumerate() {
        let idx = roads.index_of(poi).ok_or(Error::UnknownNode {
            kind: "road",
            id: poi.0,
        })?;
        poi_index.insert(poi, j);
        fields.push(ToPoiField::build(roads, idx));
    }
    let mut times = vec![0.0; n * n];
    let mut plans = Vec::with_capacity(n * n);
    for (i, &from) in pois.iter().enumerate() {
        let from_idx = roads.index_of(from).expect("checked above");
        for (j, &to) in pois.iter().enumerate() {
            let t = fields[j].dist[from_idx];
            if !t.is_finite() {
                return Err(Error::NoRoute {
                    from: from.0,
                    to: to.0,
                });
            }
            times[i * n + j] = t;
            plans.push(PathPlan {
                nodes: fields[j].walk(roads, from_idx),
                total_time: t,
            });
        }
    }
    Ok(PoiMatrix {
        pois: pois.to_vec(),
        poi_index,
        times,
        plans,
        fields,
    })
}

/// Remaining travel time from a crew position to a POI. Mid-edge crews must
/// finish the current edge first: (1-f)*w(u,v) + time(v -> target).
pub fn remaining_time_from_position(
    roads: &TransportNetwork,
    matrix: &PoiMatrix,
    pos: CrewPosition,
    target: RoadNodeId,
) -> Result<f64> {
    let time = match pos {
        CrewPosition::AtNode(n) => {
            let idx = roads.index_of(n).ok_or(Error::UnknownNode {
                kind: "road",
                id: n.0,
            })?;
            matrix.time_from_node(idx, target)?
        }
        CrewPosition::OnEdge { edge, fraction } => {
            let e = &roads.edges()[edge];
            let head_idx = roads.index_of(e.to).expect("edge endpoints exist");
            (1.0 - fraction) * e.travel_time_h + matrix.time_from_node(head_idx, target)?
        }
    };
    if !time.is_finite() {
        let from = match pos {
            CrewPosition::AtNode(n) => n.0,
            CrewPosition::OnEdge { edge, .. } => roads.edges()[edge].to.0,
        };
        return Err(Error::NoRoute { from, to: target.0 });
    }
    Ok(time)
}

/// Outcome of spending a travel budget moving toward a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvanceOutcome {
    pub position: CrewPosition,
    /// Budget left after moving (0 unless the target was reached early).
    pub budget_left: f64,
    pub arrived: bool,
}

/// Moves a crew toward `target` for up to `budget` hours along the
/// precomputed shortest routes. Movement is edge-by-edge; a crew part-way
/// along an edge always completes that edge before re-routing.
pub(crate) fn advance_toward(
    roads: &TransportNetwork,
    matrix: &PoiMatrix,
    pos: CrewPosition,
    target: RoadNodeId,
    budget: f64,
) -> Result<AdvanceOutcome> {
    let mut remaining = budget;
    let mut current = pos;

    // Finish the current edge if mid-edge.
    if let CrewPosition::OnEdge { edge, fraction } = current {
        let e = &roads.edges()[edge];
        let left = (1.0 - fraction) * e.travel_time_h;
        if remaining < left {
            let new_fraction = fraction + remaining / e.travel_time_h;
            return Ok(AdvanceOutcome {
                position: CrewPosition::OnEdge {
                    edge,
                    fraction: new_fraction.min(1.0 - f64::EPSILON),
                },
                budget_left: 0.0,
                arrived: false,
            });
        }
        remaining -= left;
        current = CrewPosition::AtNode(e.to);
    }

    loop {
        let CrewPosition::AtNode(node) = current else {
            unreachable!("current is a node inside the loop")
        };
        if node == target {
            return Ok(AdvanceOutcome {
                position: current,
                budget_left: remaining,
                arrived: true,
            });
        }
        let node_idx = roads.index_of(node).ok_or(Error::UnknownNode {
            kind: "road",
            id: node.0,
        })?;
        if remaining <= 0.0 {
            // Budget exhausted exactly at a node: stay there rather than
            // committing to the next edge with zero progress.
            return Ok(AdvanceOutcome {
                position: current,
                budget_left: 0.0,
                arrived: false,
            });
        }
        let Some((head, edge)) = matrix.next_hop(roads, node_idx, target)? else {
            return Err(Error::NoRoute {
                from: node.0,
                to: target.0,
            });
        };
        let w = roads.edges()[edge].travel_time_h;
        if remaining < w {
            let fraction = remaining / w;
            return Ok(AdvanceOutcome {
                position: CrewPosition::OnEdge { edge, fraction },
                budget_left: 0.0,
                arrived: false,
            });
        }
        remaining -= w;
        current = CrewPosition::AtNode(roads.nodes()[head].id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{RoadEdge, RoadNode};

    fn net(nodes: &[u32], edges: &[(u32, u32, f64)]) -> TransportNetwork {
        let nodes = nodes
            .iter()
            .map(|&id| RoadNode {
                id: RoadNodeId(id),
                x: f64::from(id),
                y: 0.0,
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(a, b, w)| RoadEdge {
                from: RoadNodeId(a),
                to: RoadNodeId(b),
                travel_time_h: w,
            })
            .collect();
        TransportNetwork::new(nodes, edges).unwrap()
    }

    #[test]
    fn self_path_is_zero() {
        let roads = net(&[0, 1], &[(0, 1, 0.5), (1, 0, 0.5)]);
        let plan = shortest_path(&roads, RoadNodeId(0), RoadNodeId(0)).unwrap();
        assert_eq!(plan.nodes, vec![RoadNodeId(0)]);
        assert_eq!(plan.total_time, 0.0);
    }

    #[test]
    fn single_edge_path() {
        let roads = net(&[0, 1], &[(0, 1, 0.5), (1, 0, 0.5)]);
        let plan = shortest_path(&roads, RoadNodeId(0), RoadNodeId(1)).unwrap();
        assert_eq!(plan.nodes, vec![RoadNodeId(0), RoadNodeId(1)]);
        assert_eq!(plan.total_time, 0.5);
    }

    #[test]
    fn triangle_prefers_two_hop_route() {
        // Exhaustive check over the two simple a->c paths: direct 2.5 vs
        // via b 2.0.
        let roads = net(
            &[0, 1, 2],
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 2.5),
                (2, 0, 1.0),
                (1, 0, 1.0),
                (2, 1, 1.0),
            ],
        );
        let plan = shortest_path(&roads, RoadNodeId(0), RoadNodeId(2)).unwrap();
        assert_eq!(plan.total_time, 2.0);
        assert_eq!(
            plan.nodes,
            vec![RoadNodeId(0), RoadNodeId(1), RoadNodeId(2)]
        );
    }

    #[test]
    fn unreachable_destination_errors() {
        let roads = net(&[0, 1], &[(0, 1, 1.0)]);
        assert!(matches!(
            shortest_path(&roads, RoadNodeId(1), RoadNodeId(0)),
            Err(Error::NoRoute { from: 1, to: 0 })
        ));
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // Two equal-cost routes 0->1->3 and 0->2->3; node ids decide.
        let roads = net(
            &[0, 1, 2, 3],
            &[
                (0, 1, 1.0),
                (0, 2, 1.0),
                (1, 3, 1.0),
                (2, 3, 1.0),
                (3, 0, 1.0),
            ],
        );
        let plan = shortest_path(&roads, RoadNodeId(0), RoadNodeId(3)).unwrap();
        assert_eq!(
            plan.nodes,
            vec![RoadNodeId(0), RoadNodeId(1), RoadNodeId(3)]
        );
    }

    #[test]
    fn parallel_edges_use_minimum_weight() {
        let roads = net(&[0, 1], &[(0, 1, 2.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let plan = shortest_path(&roads, RoadNodeId(0), RoadNodeId(1)).unwrap();
        assert_eq!(plan.total_time, 1.0);
    }

    #[test]
    fn poi_matrix_single_node() {
        let roads = net(&[0, 1], &[(0, 1, 0.5), (1, 0, 0.5)]);
        let m = precompute_poi_matrix(&roads, &[RoadNodeId(1)]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.time(0, 0), 0.0);
    }

    #[test]
    fn poi_matrix_line_graph() {
        // Hand evaluation on the 3-node unit line: [[0,1,2],[1,0,1],[2,1,0]].
        let roads = net(
            &[0, 1, 2],
            &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
        );
        let pois = [RoadNodeId(0), RoadNodeId(1), RoadNodeId(2)];
        let m = precompute_poi_matrix(&roads, &pois).unwrap();
        let expect = [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.time(i, j), expect[i][j], "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn poi_matrix_matches_single_pair_queries() {
        let roads = net(
            &[0, 1, 2, 3],
            &[
                (0, 1, 0.3),
                (1, 2, 0.4),
                (2, 3, 0.2),
                (3, 0, 0.9),
                (1, 0, 0.3),
                (2, 1, 0.4),
                (3, 2, 0.2),
                (0, 3, 0.9),
            ],
        );
        let pois = [RoadNodeId(0), RoadNodeId(2), RoadNodeId(3)];
        let m = precompute_poi_matrix(&roads, &pois).unwrap();
        for (i, &a) in pois.iter().enumerate() {
            for (j, &b) in pois.iter().enumerate() {
                let single = shortest_path(&roads, a, b).unwrap();
                assert_eq!(m.time(i, j), single.total_time);
                assert_eq!(m.plan(i, j).nodes, single.nodes);
            }
        }
    }

    #[test]
    fn remaining_time_at_target_is_zero() {
        let roads = net(&[0, 1], &[(0, 1, 0.5), (1, 0, 0.5)]);
        let m = precompute_poi_matrix(&roads, &[RoadNodeId(1)]).unwrap();
        let t = remaining_time_from_position(
            &roads,
            &m,
            CrewPosition::AtNode(RoadNodeId(1)),
            RoadNodeId(1),
        )
        .unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn remaining_time_interpolates_mid_edge() {
        let roads = net(&[0, 1], &[(0, 1, 2.0), (1, 0, 2.0)]);
        let m = precompute_poi_matrix(&roads, &[RoadNodeId(1)]).unwrap();
        let t = remaining_time_from_position(
            &roads,
            &m,
            CrewPosition::OnEdge {
                edge: 0,
                fraction: 0.5,
            },
            RoadNodeId(1),
        )
        .unwrap();
        assert_eq!(t, 1.0);
    }

    #[test]
    fn remaining_time_composes_with_shortest_path() {
        // 0.25 into a unit edge, then a 3-hop unit path: 0.75 + 3.
        let roads = net(
            &[0, 1, 2, 3, 4],
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (3, 4, 1.0),
                (4, 0, 1.0),
            ],
        );
        let m = precompute_poi_matrix(&roads, &[RoadNodeId(4)]).unwrap();
        let t = remaining_time_from_position(
            &roads,
            &m,
            CrewPosition::OnEdge {
                edge: 0,
                fraction: 0.25,
            },
            RoadNodeId(4),
        )
        .unwrap();
        let tail = shortest_path(&roads, RoadNodeId(1), RoadNodeId(4))
            .unwrap()
            .total_time;
        assert_eq!(t, 0.75 * 1.0 + tail);
        assert_eq!(t, 3.75);
    }

    #[test]
    fn advance_stops_mid_edge_and_resumes() {
        let roads = net(&[0, 1, 2], &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
        let m = precompute_poi_matrix(&roads, &[RoadNodeId(2)]).unwrap();
        let step1 = advance_toward(
            &roads,
            &m,
            CrewPosition::AtNode(RoadNodeId(0)),
            RoadNodeId(2),
            1.5,
        )
        .unwrap();
        assert!(!step1.arrived);
        assert_eq!(step1.budget_left, 0.0);
        match step1.position {
            CrewPosition::OnEdge { edge, fraction } => {
                assert_eq!(roads.edges()[edge].from, RoadNodeId(1));
                assert_eq!(fraction, 0.5);
            }
            other => panic!("expected mid-edge, got {other:?}"),
        }
        let step2 = advance_toward(&roads, &m, step1.position, RoadNodeId(2), 1.0).unwrap();
        assert!(step2.arrived);
        assert_eq!(step2.position, CrewPosition::AtNode(RoadNodeId(2)));
        assert!((step2.budget_left - 0.5).abs() < 1e-12);
    }
}
