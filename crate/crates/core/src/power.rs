//! Connectivity-based served-power evaluation.
//!
//! A damaged node is an open point: it serves no load itself and conducts
//! nothing, so everything whose only paths to a source run through damaged
//! nodes is de-energized. Served power is the sum of loads on energized
//! nodes. Purely topological; no electrical parameters.

use std::collections::BTreeSet;

use crate::net::{PowerNetwork, PowerNodeId};

/// Result of a served-power evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ServedResult {
    pub served_kw: f64,
    pub energized: BTreeSet<PowerNodeId>,
}

/// Mask-based evaluation used on the simulator hot path; `damaged` is
/// indexed by node position.
pub(crate) fn served_with_mask(power: &PowerNetwork, damaged: &[bool]) -> (f64, Vec<bool>) {
    debug_assert_eq!(damaged.len(), power.len());
    let mut energized = vec![false; power.len()];
    let mut stack: Vec<usize> = power.source_indices().filter(|&s| !damaged[s]).collect();
    for &s in &stack {
        energized[s] = true;
    }
    while let Some(u) = stack.pop() {
        for &v in power.neighbors(u) {
            if !energized[v] && !damaged[v] {
                energized[v] = true;
                stack.push(v);
            }
        }
    }
    let served: f64 = power
        .nodes()
        .iter()
        .enumerate()
        .filter(|(i, _)| energized[*i])
        .map(|(_, n)| n.load_kw)
        .sum();
    (served, energized)
}

fn mask_from_set(power: &PowerNetwork, damaged: &BTreeSet<PowerNodeId>) -> Vec<bool> {
    let mut mask = vec![false; power.len()];
    for &id in damaged {
        if let Some(i) = power.index_of(id) {
            mask[i] = true;
        }
    }
    mask
}

/// Power supplied to loads with the given nodes damaged.
pub fn compute_served(power: &PowerNetwork, damaged: &BTreeSet<PowerNodeId>) -> ServedResult {
    let mask = mask_from_set(power, damaged);
    let (served_kw, energized_mask) = served_with_mask(power, &mask);
    let energized = power
        .nodes()
        .iter()
        .enumerate()
        .filter(|(i, _)| energized_mask[*i])
        .map(|(_, n)| n.id)
        .collect();
    ServedResult {
        served_kw,
        energized,
    }
}

/// Counterfactual loss: how much load disappears if `node` were the only
/// damaged node. Independent of the current damage state, so the simulator
/// caches it once per episode.
pub fn power_lost_if_only(power: &PowerNetwork, node: PowerNodeId) -> f64 {
    let p_max = power.total_load_kw();
    let only: BTreeSet<PowerNodeId> = [node].into_iter().collect();
    p_max - compute_served(power, &only).served_kw
}

/// True iff some power-graph neighbor of `node` is energized under the given
/// damage set. `node` is expected to be in `damaged`.
pub fn adjacent_to_energized(
    power: &PowerNetwork,
    damaged: &BTreeSet<PowerNodeId>,
    node: PowerNodeId,
) -> bool {
    let mask = mask_from_set(power, damaged);
    let (_, energized) = served_with_mask(power, &mask);
    let Some(idx) = power.index_of(node) else {
        return false;
    };
    power.neighbors(idx).iter().any(|&v| energized[v])
}

/// Same check against a precomputed energized mask (simulator hot path).
pub(crate) fn adjacent_to_energized_mask(
    power: &PowerNetwork,
    energized: &[bool],
    node_idx: usize,
) -> bool {
    power.neighbors(node_idx).iter().any(|&v| energized[v])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::PowerNode;

    /// S(0) - A(1, 10kW) - B(2, 20kW) chain.
    fn chain() -> PowerNetwork {
        let nodes = vec![
            PowerNode {
                id: PowerNodeId(0),
                x: 0.0,
                y: 0.0,
                load_kw: 0.0,
                is_source: true,
            },
            PowerNode {
                id: PowerNodeId(1),
                x: 1.0,
                y: 0.0,
                load_kw: 10.0,
                is_source: false,
            },
            PowerNode {
                id: PowerNodeId(2),
                x: 2.0,
                y: 0.0,
                load_kw: 20.0,
                is_source: false,
            },
        ];
        let edges = vec![
            (PowerNodeId(0), PowerNodeId(1)),
            (PowerNodeId(1), PowerNodeId(2)),
        ];
        PowerNetwork::new(nodes, edges).unwrap()
    }

    fn set(ids: &[u32]) -> BTreeSet<PowerNodeId> {
        ids.iter().map(|&i| PowerNodeId(i)).collect()
    }

    #[test]
    fn no_damage_serves_everything() {
        let p = chain();
        let r = compute_served(&p, &set(&[]));
        assert_eq!(r.served_kw, 30.0);
        assert_eq!(r.energized.len(), 3);
    }

    #[test]
    fn damaged_middle_node_cuts_downstream() {
        let p = chain();
        let r = compute_served(&p, &set(&[1]));
        assert_eq!(r.served_kw, 0.0);
        assert!(r.energized.contains(&PowerNodeId(0)));
        assert!(!r.energized.contains(&PowerNodeId(1)));
        assert!(!r.energized.contains(&PowerNodeId(2)));
    }

    #[test]
    fn damaged_leaf_keeps_upstream() {
        let p = chain();
        let r = compute_served(&p, &set(&[2]));
        assert_eq!(r.served_kw, 10.0);
    }

    #[test]
    fn damaged_source_serves_nothing() {
        let p = chain();
        let r = compute_served(&p, &set(&[0]));
        assert_eq!(r.served_kw, 0.0);
        assert!(r.energized.is_empty());
    }

    #[test]
    fn lost_if_only_leaf_is_its_load() {
        let p = chain();
        assert_eq!(power_lost_if_only(&p, PowerNodeId(2)), 20.0);
    }

    #[test]
    fn lost_if_only_source_child_is_everything() {
        let p = chain();
        assert_eq!(power_lost_if_only(&p, PowerNodeId(1)), 30.0);
    }

    #[test]
    fn lost_if_only_zero_load_leaf_is_zero() {
        let nodes = vec![
            PowerNode {
                id: PowerNodeId(0),
                x: 0.0,
                y: 0.0,
                load_kw: 0.0,
                is_source: true,
            },
            PowerNode {
                id: PowerNodeId(1),
                x: 1.0,
                y: 0.0,
                load_kw: 0.0,
                is_source: false,
            },
        ];
        let p = PowerNetwork::new(nodes, vec![(PowerNodeId(0), PowerNodeId(1))]).unwrap();
        assert_eq!(power_lost_if_only(&p, PowerNodeId(1)), 0.0);
    }

    #[test]
    fn adjacency_to_energized_on_chain() {
        let p = chain();
        let damaged = set(&[1, 2]);
        assert!(adjacent_to_energized(&p, &damaged, PowerNodeId(1)));
        assert!(!adjacent_to_energized(&p, &damaged, PowerNodeId(2)));
    }
}
