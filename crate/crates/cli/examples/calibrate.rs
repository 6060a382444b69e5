use std::time::Instant;
use cutter_core::attack::{execute_attack, rank_nodes, AttackSchedule, AttackStrategy};
use cutter_core::eval::{rps, rps_mean};
use cutter_core::generate::barabasi_albert;
use cutter_core::graph::Graph;
use cutter_core::models::ModelDims;
use cutter_core::rng::{stream, Stream};
use cutter_core::trainer::{compress, compress_random, TrainConfig, Trainer};

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

fn config_for(seed: u64, variant: &str) -> TrainConfig {
    let base = TrainConfig {
        rho: 0.5,
        episodes: 150,
        seed,
        dims: ModelDims { embed: 16, layers: 2, q_hidden: (16, 8), reward_hidden: 16 },
        batch_size: 32,
        updates_per_episode: 4,
        reward_batch: 8,
        gamma: 0.9,
        omega: [0.6, 0.2, 0.2],
        ..TrainConfig::default()
    };
    match variant {
        "base" => base,
        "explore" => TrainConfig { eps_end: 0.2, eps_decay_frac: 1.0, ..base },
        "短budget" => TrainConfig { budget_override: Some(60), ..base },
        "explore+budget" => TrainConfig {
            eps_end: 0.2, eps_decay_frac: 1.0, budget_override: Some(60), ..base
        },
        "explore+budget+rb16" => TrainConfig {
            eps_end: 0.2, eps_decay_frac: 1.0, budget_override: Some(60), reward_batch: 16, ..base
        },
        "balanced" => TrainConfig {
            eps_end: 0.2, eps_decay_frac: 1.0, budget_override: Some(60),
            omega: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], ..base
        },
        "delete-heavy" => TrainConfig {
            eps_end: 0.2, eps_decay_frac: 1.0, budget_override: Some(60),
            omega: [0.2, 0.4, 0.4], ..base
        },
        "strong" => TrainConfig {
            eps_end: 0.2, eps_decay_frac: 1.0, budget_override: Some(60),
            omega: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            updates_per_episode: 6, reward_batch: 16, ..base
        },
        "strong8" => TrainConfig {
            eps_end: 0.2, eps_decay_frac: 1.0, budget_override: Some(60),
            omega: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            updates_per_episode: 6, reward_batch: 16,
            dims: ModelDims { embed: 8, layers: 2, q_hidden: (16, 8), reward_hidden: 8 },
            ..base
        },
        _ => panic!("unknown variant"),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let variant = args.get(1).map(|s| s.as_str()).unwrap_or("base");
    let n_seeds: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
    let t0 = Instant::now();
    let mut wins = 0;
    for seed in 0..n_seeds {
        let t = Instant::now();
        let graph = barabasi_albert(200, 2, &mut stream(seed, Stream::Generator));
        let mut trainer = Trainer::new(graph.clone(), config_for(seed, variant)).unwrap();
        trainer.run().unwrap();
        let cut = compress(&trainer.model, &graph, 0.5).unwrap();
        let mean_removed_deg: f64 = cut.removed.iter().map(|&u| graph.alive_degree(u) as f64).sum::<f64>() / cut.removed.len() as f64;
        let cut_rps = rps_mean_for(&graph, &cut.graph);
        let rand_out = compress_random(&graph, 0.5, &mut stream(seed, Stream::Baseline)).unwrap();
        let rand_rps = rps_mean_for(&graph, &rand_out.graph);
        let win = match (cut_rps, rand_rps) { (Some(c), Some(r)) => c > r, (Some(_), None) => true, _ => false };
        wins += win as u32;
        println!(
            "seed {seed}: rm-deg {mean_removed_deg:.2} F {} | cutter {:?} vs random {:?} -> {} ({:.0?})",
            cut.graph.pairwise_connectivity(),
            cut_rps.map(|v| (v * 1e4).round() / 1e4), rand_rps.map(|v| (v * 1e4).round() / 1e4),
            if win { "WIN" } else { "loss" }, t.elapsed()
        );
    }
    println!("[{variant}] wins: {wins}/{n_seeds} in {:.0?}", t0.elapsed());
}
