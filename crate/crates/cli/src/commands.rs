//! Subcommand implementations and the CSV/report writers.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cutter_core::attack::{execute_attack, rank_nodes, AttackSchedule, AttackStrategy, GraphTag};
use cutter_core::eval::{rps, rps_mean, topo_report};
use cutter_core::generate::GenSpec;
use cutter_core::graph::Graph;
use cutter_core::models::CutterModel;
use cutter_core::nn::{checkpoint_from_text, checkpoint_to_text};
use cutter_core::rng::{stream, Stream};
use cutter_core::trainer::{compress, TrainConfig, TrainResult, Trainer};

pub fn load_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading edge list {}", path.display()))?;
    Ok(Graph::parse_edge_list(&text)?)
}

fn write_or_stdout(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(p, content).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

/// Training log CSV: `episode,agent,true_return,loss,epsilon`.
fn training_csv(result: &TrainResult) -> String {
    let mut out = String::from("episode,agent,true_return,loss,epsilon\n");
    for row in &result.training_rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.episode,
            row.agent.name(),
            row.true_return,
            row.loss,
            row.epsilon
        ));
    }
    out
}

/// Shaping diagnostics CSV: `episode,pred_return,true_return,affine_pred,proto_loss`.
fn shaping_csv(rows: &[cutter_core::trainer::ShapingLog]) -> String {
    let mut out = String::from("episode,pred_return,true_return,affine_pred,proto_loss\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.episode, r.pred_return, r.true_return, r.affine_pred, r.proto_loss
        ));
    }
    out
}

pub fn cmd_train(graph_path: &Path, config: TrainConfig, out_dir: &Path) -> Result<()> {
    let graph = load_graph(graph_path)?;
    let mut trainer = Trainer::new(graph, config)?;
    let result = trainer.run()?;
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("checkpoint.txt"),
        checkpoint_to_text(&trainer.model.params),
    )?;
    fs::write(out_dir.join("training_log.csv"), training_csv(&result))?;
    fs::write(out_dir.join("shaping_vda.csv"), shaping_csv(&result.shaping_vda))?;
    fs::write(out_dir.join("shaping_rda.csv"), shaping_csv(&result.shaping_rda))?;
    eprintln!(
        "trained {} episodes (budget {}); artifacts in {}",
        trainer.config.episodes,
        trainer.budget(),
        out_dir.display()
    );
    Ok(())
}

pub fn load_model(checkpoint: &Path, config: &TrainConfig) -> Result<CutterModel> {
    let mut model = CutterModel::new(config.dims, &mut stream(config.seed, Stream::Init));
    let text = fs::read_to_string(checkpoint)
        .with_context(|| format!("reading checkpoint {}", checkpoint.display()))?;
    model.params.load_records(checkpoint_from_text(&text)?)?;
    Ok(model)
}

pub fn cmd_compress(
    graph_path: &Path,
    checkpoint: &Path,
    rho: f64,
    config: TrainConfig,
    out_edges: Option<&Path>,
    out_removed: Option<&Path>,
) -> Result<()> {
    let graph = load_graph(graph_path)?;
    let model = load_model(checkpoint, &config)?;
    let outcome = compress(&model, &graph, rho)?;
    let mut removed_text = String::new();
    for &node in &outcome.removed {
        removed_text.push_str(&format!("{}\n", graph.original_label(node)));
    }
    write_or_stdout(out_edges, &outcome.graph.to_edge_list_text())?;
    write_or_stdout(out_removed, &removed_text)?;
    eprintln!(
        "removed {} of {} nodes (rho = {rho})",
        outcome.removed.len(),
        graph.alive_count()
    );
    Ok(())
}

/// Degradation-curve CSV: `step,frac_removed,connectivity`.
fn curve_csv(values: &[f64], sched: &AttackSchedule) -> String {
    let mut out = String::from("step,frac_removed,connectivity\n");
    for (step, v) in values.iter().enumerate() {
        let frac = (step as f64 * sched.step_fraction).min(sched.max_fraction);
        out.push_str(&format!("{step},{frac},{v}\n"));
    }
    out
}

pub fn cmd_attack(
    graph_path: &Path,
    strategy: &str,
    step: f64,
    max: f64,
    out: Option<&Path>,
) -> Result<()> {
    let graph = load_graph(graph_path)?;
    let strategy = AttackStrategy::parse(strategy)?;
    let sched = AttackSchedule::new(step, max)?;
    let plan = rank_nodes(&graph, strategy)?;
    let curve = execute_attack(&graph, &plan, &sched)?;
    write_or_stdout(out, &curve_csv(&curve.values, &sched))
}

pub fn parse_strategies(spec: Option<&str>) -> Result<Vec<AttackStrategy>> {
    match spec {
        None => Ok(AttackStrategy::ALL.to_vec()),
        Some(raw) => {
            let names: Vec<&str> = raw.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
            if names.is_empty() {
                bail!("strategy list is empty");
            }
            names.into_iter().map(|n| Ok(AttackStrategy::parse(n)?)).collect()
        }
    }
}

pub fn cmd_evaluate(
    original_path: &Path,
    compressed_path: &Path,
    strategies: &[AttackStrategy],
    step: f64,
    max: f64,
    out_rps: Option<&Path>,
    out_topo: Option<&Path>,
) -> Result<()> {
    let original = load_graph(original_path)?;
    let compressed = load_graph(compressed_path)?;
    let sched = AttackSchedule::new(step, max)?;

    let mut per_strategy = BTreeMap::new();
    for &strategy in strategies {
        let ori_plan = rank_nodes(&original, strategy)?;
        let cmp_plan = rank_nodes(&compressed, strategy)?;
        let ori_curve = execute_attack(&original, &ori_plan, &sched)?;
        let cmp_curve =
            execute_attack(&compressed, &cmp_plan, &sched)?.tagged(GraphTag::Compressed);
        per_strategy.insert(strategy, rps(&ori_curve, &cmp_curve)?);
    }
    let values: Vec<f64> = per_strategy.values().copied().collect();
    let mean = rps_mean(&values)?;

    let mut rps_csv = String::from("strategy,rps\n");
    for (s, v) in &per_strategy {
        rps_csv.push_str(&format!("{},{}\n", s.name(), v));
    }
    rps_csv.push_str(&format!("mean,{mean}\n"));

    let topo = topo_report(&original, &compressed)?;
    let topo_csv = format!(
        "metric,value\ndegree_diff,{}\nclust_diff,{}\npathlen_diff,{}\nsp_kernel,{}\n",
        topo.degree_diff, topo.clust_diff, topo.pathlen_diff, topo.sp_kernel
    );

    write_or_stdout(out_rps, &rps_csv)?;
    write_or_stdout(out_topo, &topo_csv)?;
    Ok(())
}

pub fn cmd_gen(spec: &str, seed: u64, out: Option<&PathBuf>) -> Result<()> {
    let spec = GenSpec::parse(spec)?;
    let graph = spec.build(&mut stream(seed, Stream::Generator));
    write_or_stdout(out.map(|p| p.as_path()), &graph.to_edge_list_text())
}
