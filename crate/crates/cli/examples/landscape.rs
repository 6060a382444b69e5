use cutter_core::attack::{execute_attack, rank_nodes, AttackSchedule, AttackStrategy};
use cutter_core::eval::{rps, rps_mean};
use cutter_core::generate::barabasi_albert;
use cutter_core::graph::Graph;
use cutter_core::rng::{stream, Stream};
use cutter_core::trainer::compress_random;
use std::collections::BTreeSet;

fn rps_mean_for(original: &Graph, compressed: &Graph) -> Option<f64> {
    let sched = AttackSchedule::default();
    let mut vals = Vec::new();
    for s in AttackStrategy::ALL {
        let po = rank_nodes(original, s).ok()?;
        let pc = rank_nodes(compressed, s).ok()?;
        let co = execute_attack(original, &po, &sched).ok()?;
        let cc = execute_attack(compressed, &pc, &sched).ok()?;
        vals.push(rps(&co, &cc).ok()?);
    }
    rps_mean(&vals).ok()
}

fn main() {
    for seed in 0..6u64 {
        let g = barabasi_albert(200, 2, &mut stream(seed, Stream::Generator));
        let mut by_deg: Vec<u32> = g.alive_nodes().collect();
        by_deg.sort_by_key(|&u| std::cmp::Reverse((g.alive_degree(u), std::cmp::Reverse(u))));
        // protect the top 15 original-degree nodes, then sequentially
        // remove the lowest-residual-degree unprotected node
        let protected: BTreeSet<u32> = by_deg[..15].iter().copied().collect();
        let mut cur = g.clone();
        let mut removed = Vec::new();
        for _ in 0..100 {
            let pick = cur
                .alive_nodes()
                .filter(|u| !protected.contains(u))
                .min_by_key(|&u| (cur.alive_degree(u), u))
                .unwrap();
            cur = cur.remove_nodes(&[pick]).unwrap();
            removed.push(pick);
        }
        let residual_greedy = rps_mean_for(&g, &cur);

        // static bottom-100 by original degree
        let keep_hubs: Vec<u32> = by_deg[100..].to_vec();
        let static_rps = rps_mean_for(&g, &g.remove_nodes(&keep_hubs).unwrap());

        let random = compress_random(&g, 0.5, &mut stream(seed, Stream::Baseline)).unwrap();
        println!(
            "seed {seed}: random {:?} | static-bottom {:?} | residual-greedy+protect {:?}",
            rps_mean_for(&g, &random.graph).map(|v| (v * 1e4).round() / 1e4),
            static_rps.map(|v| (v * 1e4).round() / 1e4),
            residual_greedy.map(|v| (v * 1e4).round() / 1e4),
        );
    }
}
