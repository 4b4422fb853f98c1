//! The policy's view of an episode: a bipartite crew/target graph with one
//! relation node inserted on every edge.
//!
//! Node indexing is fixed as [relations | crews | depots | damaged nodes].
//! Relation (c, t) carries the travel time from crew c's position to target
//! t; crews carry their cargo; damaged nodes carry their repair state; depot
//! features are a placeholder zero. Raw values are stored here, and
//! `encode_features` produces the normalized fixed-width input the policy
//! consumes.

/// Width of the encoded per-node feature vector:
/// 4 node-type one-hots followed by 5 feature slots.
pub const FEATURE_DIM: usize = 9;

/// Normalization constants applied when encoding policy inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsNorm {
    pub episode_hours: f64,
    pub p_max: f64,
    pub crew_capacity: f64,
}

/// Raw per-damaged-node features (i0..i4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamagedFeatures {
    /// i0: still damaged.
    pub damaged: bool,
    /// i1: resources still required before repair can progress.
    pub resources_needed: f64,
    /// i2: remaining repair hours.
    pub repair_time_left: f64,
    /// i3: power lost if this were the only damaged node (cached at reset).
    pub power_lost_solo: f64,
    /// i4: some power-graph neighbor is currently energized.
    pub adjacent_energized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObsNodeKind {
    Relation,
    Crew,
    Depot,
    Damaged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGraph {
    pub n_crews: usize,
    pub n_depots: usize,
    pub n_damaged: usize,
    /// b0 per relation node, row-major crew x target, raw hours.
    pub travel_times: Vec<f64>,
    /// c0 per crew, raw resource count.
    pub crew_cargo: Vec<f64>,
    pub damaged: Vec<DamagedFeatures>,
    pub norm: ObsNorm,
}

impl ObservationGraph {
    pub fn n_targets(&self) -> usize {
        self.n_depots + self.n_damaged
    }

    pub fn n_relations(&self) -> usize {
        self.n_crews * self.n_targets()
    }

    pub fn node_count(&self) -> usize {
        self.n_relations() + self.n_crews + self.n_targets()
    }

    pub fn relation_index(&self, crew: usize, target: usize) -> usize {
        crew * self.n_targets() + target
    }

    pub fn crew_node_index(&self, crew: usize) -> usize {
        self.n_relations() + crew
    }

    pub fn target_node_index(&self, target: usize) -> usize {
        self.n_relations() + self.n_crews + target
    }

    pub fn kind(&self, node: usize) -> ObsNodeKind {
        if node < self.n_relations() {
            ObsNodeKind::Relation
        } else if node < self.n_relations() + self.n_crews {
            ObsNodeKind::Crew
        } else if node < self.node_count() {
            if node - self.n_relations() - self.n_crews < self.n_depots {
                ObsNodeKind::Depot
            } else {
                ObsNodeKind::Damaged
            }
        } else {
            panic!("node index {node} out of range");
        }
    }

    /// The (crew, target) identity of a relation node.
    pub fn relation_endpoints(&self, relation: usize) -> (usize, usize) {
        (relation / self.n_targets(), relation % self.n_targets())
    }

    /// Undirected edges: every relation node connects to its crew and its
    /// target, nothing else.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(2 * self.n_relations());
        for r in 0..self.n_relations() {
            let (c, t) = self.relation_endpoints(r);
            out.push((r, self.crew_node_index(c)));
            out.push((r, self.target_node_index(t)));
        }
        out
    }

    /// Normalized node-feature matrix (node_count x FEATURE_DIM, row-major):
    /// travel times divided by episode hours, powers by p_max, resource
    /// counts by crew capacity, booleans as 0/1.
    pub fn encode_features(&self) -> Vec<f64> {
        let n = self.node_count();
        let mut x = vec![0.0; n * FEATURE_DIM];
        let hours = self.norm.episode_hours.max(f64::MIN_POSITIVE);
        let p_max = if self.norm.p_max > 0.0 {
            self.norm.p_max
        } else {
            1.0
        };
        let cap = self.norm.crew_capacity.max(1.0);

        for r in 0..self.n_relations() {
            let row = &mut x[r * FEATURE_DIM..(r + 1) * FEATURE_DIM];
            row[0] = 1.0;
            row[4] = self.travel_times[r] / hours;
        }
        for c in 0..self.n_crews {
            let i = self.crew_node_index(c);
            let row = &mut x[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            row[1] = 1.0;
            row[4] = self.crew_cargo[c] / cap;
        }
        for d in 0..self.n_depots {
            let i = self.target_node_index(d);
            let row = &mut x[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            row[2] = 1.0;
            // d0 placeholder stays zero.
        }
        for (k, feats) in self.damaged.iter().enumerate() {
            let i = self.target_node_index(self.n_depots + k);
            let row = &mut x[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            row[3] = 1.0;
            row[4] = f64::from(feats.damaged);
            row[5] = feats.resources_needed / cap;
            row[6] = feats.repair_time_left / hours;
            row[7] = feats.power_lost_solo / p_max;
            row[8] = f64::from(feats.adjacent_energized);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ObservationGraph {
        ObservationGraph {
            n_crews: 2,
            n_depots: 3,
            n_damaged: 5,
            travel_times: vec![0.5; 2 * 8],
            crew_cargo: vec![5.0, 2.0],
            damaged: vec![
                DamagedFeatures {
                    damaged: true,
                    resources_needed: 3.0,
                    repair_time_left: 2.0,
                    power_lost_solo: 40.0,
                    adjacent_energized: true,
                };
                5
            ],
            norm: ObsNorm {
                episode_hours: 48.0,
                p_max: 100.0,
                crew_capacity: 5.0,
            },
        }
    }

    #[test]
    fn relation_count_is_crews_times_targets() {
        let obs = sample();
        assert_eq!(obs.n_relations(), 16);
        assert_eq!(obs.node_count(), 16 + 2 + 8);
    }

    #[test]
    fn each_relation_has_exactly_two_edges() {
        let obs = sample();
        let edges = obs.edges();
        assert_eq!(edges.len(), 2 * obs.n_relations());
        for r in 0..obs.n_relations() {
            let incident: Vec<_> = edges.iter().filter(|&&(a, _)| a == r).collect();
            assert_eq!(incident.len(), 2);
            let (c, t) = obs.relation_endpoints(r);
            assert_eq!(incident[0].1, obs.crew_node_index(c));
            assert_eq!(incident[1].1, obs.target_node_index(t));
        }
    }

    #[test]
    fn encoding_normalizes_each_slot() {
        let obs = sample();
        let x = obs.encode_features();
        let r0 = &x[0..FEATURE_DIM];
        assert_eq!(r0[0], 1.0);
        assert_eq!(r0[4], 0.5 / 48.0);
        let crew1 = obs.crew_node_index(1);
        assert_eq!(x[crew1 * FEATURE_DIM + 4], 2.0 / 5.0);
        let dmg0 = obs.target_node_index(3);
        let row = &x[dmg0 * FEATURE_DIM..(dmg0 + 1) * FEATURE_DIM];
        assert_eq!(row[3], 1.0);
        assert_eq!(row[4], 1.0);
        assert_eq!(row[5], 3.0 / 5.0);
        assert_eq!(row[6], 2.0 / 48.0);
        assert_eq!(row[7], 0.4);
        assert_eq!(row[8], 1.0);
        let depot0 = obs.target_node_index(0);
        assert_eq!(x[depot0 * FEATURE_DIM + 2], 1.0);
        assert_eq!(x[depot0 * FEATURE_DIM + 4], 0.0);
    }
}
