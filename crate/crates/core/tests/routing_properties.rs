//! Property checks for the routing layer against brute-force oracles.

use gridmend_core::net::{RoadEdge, RoadNode, RoadNodeId, TransportNetwork};
use gridmend_core::routing::{precompute_poi_matrix, shortest_path};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn build(n: usize, edges: &[(u32, u32, f64)]) -> TransportNetwork {
    let nodes = (0..n as u32)
        .map(|id| RoadNode {
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

/// Enumerates every simple path and returns the minimum total time.
fn brute_force_min_time(
    n: usize,
    edges: &[(u32, u32, f64)],
    from: usize,
    to: usize,
) -> Option<f64> {
    fn dfs(
        adj: &Vec<Vec<(usize, f64)>>,
        u: usize,
        to: usize,
        time: f64,
        visited: &mut Vec<bool>,
        best: &mut Option<f64>,
    ) {
        if u == to {
            *best = Some(best.map_or(time, |b: f64| b.min(time)));
            return;
        }
        for &(v, w) in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                dfs(adj, v, to, time + w, visited, best);
                visited[v] = false;
            }
        }
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        adj[a as usize].push((b as usize, w));
    }
    let mut visited = vec![false; n];
    visited[from] = true;
    let mut best = None;
    dfs(&adj, from, to, 0.0, &mut visited, &mut best);
    best
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<(u32, u32, f64)> {
    (0..m)
        .map(|_| {
            let a = rng.random_range(0..n as u32);
            let mut b = rng.random_range(0..n as u32);
            if b == a {
                b = (b + 1) % n as u32;
            }
            (a, b, rng.random_range(0.1..4.0))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    /// On networks of <= 8 nodes the result never exceeds any explicitly
    /// enumerated path's time, and matches the brute-force minimum.
    #[test]
    fn shortest_path_matches_exhaustive_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=8usize);
        let m = rng.random_range(1..=(n * 3));
        let edges = random_edges(&mut rng, n, m);
        let net = build(n, &edges);
        let from = rng.random_range(0..n);
        let to = rng.random_range(0..n);

        let brute = if from == to { Some(0.0) } else { brute_force_min_time(n, &edges, from, to) };
        match shortest_path(&net, RoadNodeId(from as u32), RoadNodeId(to as u32)) {
            Ok(plan) => {
                let expect = brute.expect("dijkstra found a path, enumeration must too");
                prop_assert!((plan.total_time - expect).abs() < 1e-9,
                    "dijkstra {} vs brute {}", plan.total_time, expect);
                // The reported path must realize the reported time.
                let mut acc = 0.0;
                for pair in plan.nodes.windows(2) {
                    let w = net
                        .edges()
                        .iter()
                        .filter(|e| e.from == pair[0] && e.to == pair[1])
                        .map(|e| e.travel_time_h)
                        .fold(f64::INFINITY, f64::min);
                    prop_assert!(w.is_finite(), "path uses a missing edge");
                    acc += w;
                }
                prop_assert!((acc - plan.total_time).abs() < 1e-9);
            }
            Err(_) => prop_assert!(brute.is_none(), "dijkstra said no route, enumeration found one"),
        }
    }

    /// Dropping an edge never decreases any shortest-path time.
    #[test]
    fn edge_removal_is_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=7usize);
        let m = rng.random_range(2..=(n * 3));
        let edges = random_edges(&mut rng, n, m);
        let full = build(n, &edges);
        let drop_idx = rng.random_range(0..edges.len());
        let mut reduced_edges = edges.clone();
        reduced_edges.remove(drop_idx);
        let reduced = build(n, &reduced_edges);

        for from in 0..n {
            for to in 0..n {
                let before = shortest_path(&full, RoadNodeId(from as u32), RoadNodeId(to as u32))
                    .map(|p| p.total_time);
                let after = shortest_path(&reduced, RoadNodeId(from as u32), RoadNodeId(to as u32))
                    .map(|p| p.total_time);
                match (before, after) {
                    (Ok(b), Ok(a)) => prop_assert!(a >= b - 1e-12),
                    (Ok(_), Err(_)) => {}   // became unreachable: time rose to infinity
                    (Err(_), Ok(_)) => prop_assert!(false, "removal created a route"),
                    (Err(_), Err(_)) => {}
                }
            }
        }
    }

    /// Matrix entries agree with independent single-pair queries.
    #[test]
    fn poi_matrix_consistent_with_single_queries(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=8usize);
        // A ring guarantees strong connectivity, extras add shortcuts.
        let mut edges: Vec<(u32, u32, f64)> = (0..n as u32)
            .map(|i| (i, (i + 1) % n as u32, rng.random_range(0.1..2.0)))
            .collect();
        edges.extend(random_edges(&mut rng, n, n));
        let net = build(n, &edges);
        let pois: Vec<RoadNodeId> = (0..n as u32).step_by(2).map(RoadNodeId).collect();
        let matrix = precompute_poi_matrix(&net, &pois).unwrap();
        for (i, &a) in pois.iter().enumerate() {
            prop_assert_eq!(matrix.time(i, i), 0.0);
            for (j, &b) in pois.iter().enumerate() {
                let single = shortest_path(&net, a, b).unwrap();
                prop_assert_eq!(matrix.time(i, j), single.total_time);
                // Triangle inequality over the POI subset.
                for k in 0..pois.len() {
                    prop_assert!(
                        matrix.time(i, j) <= matrix.time(i, k) + matrix.time(k, j) + 1e-12
                    );
                }
            }
        }
    }
}
