//! Connectivity against the brute-force pair-reachability oracle.

use cutter_core::graph::{ConnectivityTracker, Graph};
use cutter_core::testkit;

use proptest::prelude::*;

#[test]
fn pairwise_connectivity_matches_pair_reachability_oracle() {
    for seed in 0..200u64 {
        let g = testkit::random_test_graph(seed, 12);
        assert_eq!(
            g.pairwise_connectivity(),
            testkit::brute_force_pairwise_connectivity(&g),
            "seed {seed}"
        );
    }
}

#[test]
fn connectivity_matches_oracle_under_removals() {
    for seed in 0..40u64 {
        let g = testkit::random_test_graph(seed, 10);
        let n = g.node_count();
        // remove 3 nodes (or fewer on tiny graphs) chosen deterministically
        let victims: Vec<u32> = (0..n as u32).step_by(3).take(3.min(n)).collect();
        let removed = g.remove_nodes(&victims).unwrap();
        assert_eq!(
            removed.pairwise_connectivity(),
            testkit::brute_force_pairwise_connectivity(&removed),
            "seed {seed}"
        );
    }
}

#[test]
fn incremental_tracker_equals_full_recount_everywhere() {
    for seed in 200..240u64 {
        let g = testkit::random_test_graph(seed, 12);
        let order: Vec<u32> = (0..g.node_count() as u32).collect();
        let mut tracker = ConnectivityTracker::new(g.clone());
        for &u in order.iter().take(g.node_count() - 1) {
            tracker.remove(u).unwrap();
            assert_eq!(
                tracker.connectivity(),
                testkit::brute_force_pairwise_connectivity(tracker.graph()),
                "seed {seed} node {u}"
            );
        }
    }
}

proptest! {
    #[test]
    fn graph_invariants_hold_for_arbitrary_edge_lists(
        edges in proptest::collection::vec((0u32..15, 0u32..15), 0..60),
        n in 15usize..16,
    ) {
        let g = Graph::from_edges(n, &edges);
        // symmetry and no self-loops / duplicates
        for u in 0..n as u32 {
            let neigh = g.neighbors(u);
            for w in neigh.windows(2) {
                prop_assert!(w[0] < w[1], "sorted, no duplicates");
            }
            for &v in neigh {
                prop_assert!(v != u, "no self-loops");
                prop_assert!(g.neighbors(v).contains(&u), "symmetric");
            }
        }
    }

    #[test]
    fn connectivity_never_increases_under_removal(
        seed in 0u64..5000,
        victim in 0u32..12,
    ) {
        let g = testkit::random_test_graph(seed, 12);
        let victim = victim % g.node_count() as u32;
        let before = g.pairwise_connectivity();
        let after = g.remove_nodes(&[victim]).unwrap().pairwise_connectivity();
        prop_assert!(after <= before);
    }
}
