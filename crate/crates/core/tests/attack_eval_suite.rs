//! Attack execution against the recompute-everything oracle, plus
//! shortest-path-kernel and RPS arithmetic checks.

use cutter_core::attack::{execute_attack, rank_nodes, AttackSchedule, AttackStrategy};
use cutter_core::eval::{rps, rps_mean, sp_kernel, topo_report};
use cutter_core::generate::erdos_renyi;
use cutter_core::rng::{stream, Stream};
use cutter_core::testkit;

use proptest::prelude::*;
use rand::Rng;

#[test]
fn curves_match_naive_recompute_oracle() {
    let g = erdos_renyi(50, 0.1, &mut stream(20, Stream::Generator));
    assert!(g.pairwise_connectivity() > 0);
    for strategy in [
        AttackStrategy::Closeness,
        AttackStrategy::Degree,
        AttackStrategy::Betweenness,
    ] {
        let plan = rank_nodes(&g, strategy).unwrap();
        let sched = AttackSchedule::default();
        let curve = execute_attack(&g, &plan, &sched).unwrap();
        let oracle = testkit::naive_degradation_curve(&g, &plan.ranking, 0.01, 0.40);
        assert_eq!(curve.values.len(), oracle.len());
        for (i, (got, want)) in curve.values.iter().zip(oracle.iter()).enumerate() {
            assert!(
                (got - want).abs() < 1e-12,
                "{} step {i}: {got} vs {want}",
                strategy.name()
            );
        }
    }
}

#[test]
fn full_attack_curves_on_random_graphs_match_oracle() {
    for seed in 0..15u64 {
        let g = testkit::random_test_graph(seed.wrapping_add(500), 12);
        if g.pairwise_connectivity() == 0 {
            continue;
        }
        for strategy in AttackStrategy::ALL {
            let plan = rank_nodes(&g, strategy).unwrap();
            let sched = AttackSchedule::new(0.15, 0.9).unwrap();
            let curve = execute_attack(&g, &plan, &sched).unwrap();
            let oracle = testkit::naive_degradation_curve(&g, &plan.ranking, 0.15, 0.9);
            for (got, want) in curve.values.iter().zip(oracle.iter()) {
                assert!((got - want).abs() < 1e-12, "seed {seed} {}", strategy.name());
            }
        }
    }
}

#[test]
fn sp_kernel_matches_brute_force_on_random_pairs() {
    for seed in 0..25u64 {
        let a = testkit::random_test_graph(seed.wrapping_add(900), 12);
        let b = testkit::random_test_graph(seed.wrapping_add(1900), 12);
        let got = sp_kernel(&a, &b);
        let want = testkit::brute_force_sp_kernel(&a, &b);
        assert!((got - want).abs() < 1e-9, "seed {seed}: {got} vs {want}");
        assert!((0.0..=1.0).contains(&got));
        assert_eq!(sp_kernel(&a, &a), 1.0, "self kernel seed {seed}");
    }
}

#[test]
fn rps_matches_hand_sums_on_random_curves() {
    let mut rng = stream(77, Stream::Env);
    for _ in 0..50 {
        let len = rng.random_range(2..40usize);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut vals = vec![1.0];
            let mut cur = 1.0f64;
            for _ in 1..len {
                cur = (cur - rng.random_range(0.0..0.2)).max(0.0);
                vals.push(cur);
            }
            cutter_core::attack::DegradationCurve {
                values: vals,
                strategy: AttackStrategy::Degree,
                graph_tag: cutter_core::attack::GraphTag::Original,
            }
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let mut hand = 0.0;
        for i in 0..len {
            hand += (a.values[i] - b.values[i]).abs();
        }
        let want = 1.0 - hand / len as f64;
        let got = rps(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-12);
    }
    // mean of six random values matches a hand mean
    let vals: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
    let want = vals.iter().sum::<f64>() / 6.0;
    assert!((rps_mean(&vals).unwrap() - want).abs() < 1e-12);
}

#[test]
fn identical_graph_attacks_give_rps_one_for_every_strategy() {
    let g = erdos_renyi(40, 0.12, &mut stream(21, Stream::Generator));
    let sched = AttackSchedule::default();
    for strategy in AttackStrategy::ALL {
        let plan = rank_nodes(&g, strategy).unwrap();
        let a = execute_attack(&g, &plan, &sched).unwrap();
        let b = execute_attack(&g, &plan, &sched).unwrap();
        assert_eq!(rps(&a, &b).unwrap(), 1.0, "{}", strategy.name());
    }
}

#[test]
fn topo_report_on_random_compression_is_sane() {
    let g = erdos_renyi(30, 0.2, &mut stream(22, Stream::Generator));
    let removed: Vec<u32> = (0..10u32).collect();
    let compressed = g.remove_nodes(&removed).unwrap();
    let r = topo_report(&g, &compressed).unwrap();
    assert!(r.degree_diff >= 0.0);
    assert!(r.clust_diff >= 0.0);
    assert!(r.pathlen_diff >= 0.0);
    assert!((0.0..=1.0).contains(&r.sp_kernel));
    let want = testkit::brute_force_sp_kernel(&g, &compressed);
    assert!((r.sp_kernel - want).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn curves_are_monotone_bounded_and_start_at_one(
        seed in 0u64..2000,
        step_pct in 1u32..30,
        max_pct in 30u32..100,
    ) {
        let g = testkit::random_test_graph(seed, 12);
        prop_assume!(g.pairwise_connectivity() > 0);
        let sched = AttackSchedule::new(step_pct as f64 / 100.0, max_pct as f64 / 100.0).unwrap();
        for strategy in [AttackStrategy::Degree, AttackStrategy::Percolation] {
            let plan = rank_nodes(&g, strategy).unwrap();
            let curve = execute_attack(&g, &plan, &sched).unwrap();
            prop_assert_eq!(curve.values[0], 1.0);
            prop_assert_eq!(curve.values.len(), sched.steps() + 1);
            for w in curve.values.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15);
                prop_assert!((0.0..=1.0).contains(&w[1]));
            }
        }
    }
}
