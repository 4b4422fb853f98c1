//! Generator and coupling invariants over many random seeds.

use gridmend_core::gen::{generate_scenario, preset};
use gridmend_core::net::{couple_networks, validate_scenario, TransportNetwork};

#[test]
fn thousand_random_scenarios_validate_cleanly() {
    let spec = preset("desk-oracle").unwrap();
    for seed in 0..1000u64 {
        let s = generate_scenario(&spec, seed).expect("generation succeeds");
        let violations = validate_scenario(&s);
        assert!(violations.is_empty(), "seed {seed}: {violations:?}");
    }
}

#[test]
fn coupling_is_invariant_under_road_insertion_order() {
    let spec = preset("desk-oracle").unwrap();
    for seed in 0..50u64 {
        let s = generate_scenario(&spec, seed).unwrap();
        let mut shuffled_nodes = s.roads.nodes().to_vec();
        shuffled_nodes.reverse();
        let rot = seed as usize % shuffled_nodes.len();
        shuffled_nodes.rotate_left(rot);
        let reshaped = TransportNetwork::new(shuffled_nodes, s.roads.edges().to_vec()).unwrap();
        let recoupled = couple_networks(&s.power, &reshaped).unwrap();
        assert_eq!(
            s.coupling.entries(),
            recoupled.entries(),
            "seed {seed}: coupling depends on node order"
        );
    }
}

#[test]
fn coupling_is_idempotent() {
    let spec = preset("desk-oracle").unwrap();
    let s = generate_scenario(&spec, 3).unwrap();
    let again = couple_networks(&s.power, &s.roads).unwrap();
    assert_eq!(s.coupling.entries(), again.entries());
}
