//! Served-power checks against independent reachability and tree oracles.

use std::collections::BTreeSet;

use gridmend_core::gen::generate_feeder;
use gridmend_core::net::{PowerNetwork, PowerNodeId};
use gridmend_core::power::compute_served;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent reachability oracle: plain BFS over the raw edge list.
fn reachable_served(power: &PowerNetwork, damaged: &BTreeSet<PowerNodeId>) -> f64 {
    let ids: Vec<PowerNodeId> = power.nodes().iter().map(|n| n.id).collect();
    let idx = |id: PowerNodeId| ids.iter().position(|&x| x == id).unwrap();
    let mut adj = vec![Vec::new(); ids.len()];
    for &(a, b) in power.edges() {
        adj[idx(a)].push(idx(b));
        adj[idx(b)].push(idx(a));
    }
    let mut seen = vec![false; ids.len()];
    let mut queue: Vec<usize> = power
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.is_source && !damaged.contains(&n.id))
        .map(|(i, _)| i)
        .collect();
    for &s in &queue {
        seen[s] = true;
    }
    while let Some(u) = queue.pop() {
        for &v in &adj[u] {
            if !seen[v] && !damaged.contains(&ids[v]) {
                seen[v] = true;
                queue.push(v);
            }
        }
    }
    power
        .nodes()
        .iter()
        .enumerate()
        .filter(|(i, _)| seen[*i])
        .map(|(_, n)| n.load_kw)
        .sum()
}

/// Tree oracle: p_max minus the subtree loads of each highest damaged
/// ancestor. Only valid on radial networks rooted at the single source.
fn radial_served(power: &PowerNetwork, damaged: &BTreeSet<PowerNodeId>) -> f64 {
    let n = power.len();
    let root = power.source_indices().next().unwrap();
    // Parents via BFS from the root.
    let mut parent = vec![usize::MAX; n];
    let mut order = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &v in power.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                parent[v] = u;
                order.push(v);
            }
        }
    }
    // Subtree loads in reverse BFS order.
    let mut subtree: Vec<f64> = power.nodes().iter().map(|nd| nd.load_kw).collect();
    for &u in order.iter().rev() {
        if parent[u] != usize::MAX {
            subtree[parent[u]] += subtree[u];
        }
    }
    let is_damaged = |i: usize| damaged.contains(&power.nodes()[i].id);
    let mut lost = 0.0;
    for i in 0..n {
        if !is_damaged(i) {
            continue;
        }
        // Highest damaged ancestor: no damaged node on the path above it.
        let mut a = parent[i];
        let mut shadowed = false;
        while a != usize::MAX {
            if is_damaged(a) {
                shadowed = true;
                break;
            }
            a = parent[a];
        }
        if !shadowed {
            lost += subtree[i];
        }
    }
    power.total_load_kw() - lost
}

fn random_tree_and_damage(seed: u64) -> (PowerNetwork, BTreeSet<PowerNodeId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=12usize);
    let power = generate_feeder(n, (10.0, 10.0), (10.0, 200.0), &mut rng);
    let k = rng.random_range(0..n);
    let mut damaged = BTreeSet::new();
    for _ in 0..k {
        let pick = rng.random_range(1..n as u32); // never the source
        damaged.insert(PowerNodeId(pick));
    }
    (power, damaged)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn served_matches_reachability_oracle(seed in any::<u64>()) {
        let (power, damaged) = random_tree_and_damage(seed);
        let got = compute_served(&power, &damaged);
        let expect = reachable_served(&power, &damaged);
        prop_assert_eq!(got.served_kw, expect);
    }

    #[test]
    fn served_matches_highest_ancestor_tree_oracle(seed in any::<u64>()) {
        let (power, damaged) = random_tree_and_damage(seed);
        let got = compute_served(&power, &damaged).served_kw;
        let expect = radial_served(&power, &damaged);
        prop_assert!((got - expect).abs() < 1e-9, "got {got}, tree oracle {expect}");
    }

    /// Repairing (removing a node from the damage set) never loses power.
    #[test]
    fn served_is_monotone_under_repair(seed in any::<u64>()) {
        let (power, damaged) = random_tree_and_damage(seed);
        let base = compute_served(&power, &damaged).served_kw;
        for &node in &damaged {
            let mut repaired = damaged.clone();
            repaired.remove(&node);
            let after = compute_served(&power, &repaired).served_kw;
            prop_assert!(after >= base);
        }
    }

    #[test]
    fn no_damage_serves_p_max_and_dead_sources_serve_zero(seed in any::<u64>()) {
        let (power, _) = random_tree_and_damage(seed);
        prop_assert_eq!(
            compute_served(&power, &BTreeSet::new()).served_kw,
            power.total_load_kw()
        );
        let all_sources: BTreeSet<PowerNodeId> = power
            .nodes()
            .iter()
            .filter(|n| n.is_source)
            .map(|n| n.id)
            .collect();
        prop_assert_eq!(compute_served(&power, &all_sources).served_kw, 0.0);
    }
}
