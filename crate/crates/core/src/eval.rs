//! Robustness-preservation scoring and static topological fidelity.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::attack::{AttackStrategy, DegradationCurve};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("curve lengths differ: {left} vs {right}")]
    CurveLengthMismatch { left: usize, right: usize },
    #[error("curves were produced by different strategies")]
    StrategyMismatch,
    #[error("report contains no strategies")]
    EmptyReport,
    #[error("graph has no alive nodes")]
    EmptyGraph,
}

/// Robustness Preservation Similarity between two degradation curves:
/// `1 - (1/(T+1)) * Σ |F_t - F_t'|` over normalized curves.
pub fn rps(ori: &DegradationCurve, cmp: &DegradationCurve) -> Result<f64, EvalError> {
    if ori.values.len() != cmp.values.len() {
        return Err(EvalError::CurveLengthMismatch {
            left: ori.values.len(),
            right: cmp.values.len(),
        });
    }
    if ori.strategy != cmp.strategy {
        return Err(EvalError::StrategyMismatch);
    }
    let t1 = ori.values.len() as f64;
    let gap: f64 = ori
        .values
        .iter()
        .zip(cmp.values.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(1.0 - gap / t1)
}

/// Per-strategy RPS values and their mean.
#[derive(Debug, Clone)]
pub struct RpsReport {
    pub per_strategy: BTreeMap<AttackStrategy, f64>,
    pub mean: f64,
}

impl RpsReport {
    pub fn new(per_strategy: BTreeMap<AttackStrategy, f64>) -> Result<Self, EvalError> {
        let mean = rps_mean(per_strategy.values().copied().collect::<Vec<_>>().as_slice())?;
        Ok(RpsReport { per_strategy, mean })
    }
}

/// Arithmetic mean of per-strategy RPS values.
pub fn rps_mean(values: &[f64]) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Static topology discrepancies between an original graph and its
/// compressed counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoReport {
    pub degree_diff: f64,
    pub clust_diff: f64,
    pub pathlen_diff: f64,
    pub sp_kernel: f64,
}

/// Mean alive degree.
fn mean_degree(g: &Graph) -> f64 {
    let n = g.alive_count();
    if n == 0 {
        return 0.0;
    }
    2.0 * g.alive_edge_count() as f64 / n as f64
}

/// Mean local clustering coefficient (nodes with alive degree < 2 count
/// as 0).
fn mean_clustering(g: &Graph) -> f64 {
    let n = g.alive_count();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for u in g.alive_nodes() {
        let neigh: Vec<u32> = g.alive_neighbors(u).collect();
        let k = neigh.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for (i, &a) in neigh.iter().enumerate() {
            for &b in &neigh[i + 1..] {
                // neighbor lists are sorted
                if g.neighbors(a).binary_search(&b).is_ok() && g.is_alive(b) {
                    links += 1;
                }
            }
        }
        total += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    total / n as f64
}

/// Average shortest-path length within the largest alive component
/// (0 when that component is a single node).
fn avg_path_len_largest_component(g: &Graph) -> f64 {
    let labeling = g.connected_components();
    let Some((target, size)) = labeling
        .sizes
        .iter()
        .enumerate()
        .max_by(|(ia, sa), (ib, sb)| sa.cmp(sb).then(ib.cmp(ia)))
        .map(|(i, &s)| (i as u32, s))
    else {
        return 0.0;
    };
    if size < 2 {
        return 0.0;
    }
    let members: Vec<u32> = (0..g.node_count() as u32)
        .filter(|&u| labeling.label_of[u as usize] == Some(target))
        .collect();
    let mut total = 0u64;
    for &u in &members {
        let dist = g.bfs_distances(u);
        for &v in &members {
            if v > u {
                total += dist[v as usize].expect("same component") as u64;
            }
        }
    }
    let pairs = (size as u64 * (size as u64 - 1)) / 2;
    total as f64 / pairs as f64
}

/// Histogram of finite shortest-path lengths over unordered alive pairs.
fn path_length_histogram(g: &Graph) -> BTreeMap<u32, u64> {
    let mut hist = BTreeMap::new();
    for u in g.alive_nodes() {
        let dist = g.bfs_distances(u);
        for v in g.alive_nodes() {
            if v > u {
                if let Some(d) = dist[v as usize] {
                    *hist.entry(d).or_insert(0u64) += 1;
                }
            }
        }
    }
    hist
}

fn hist_dot(a: &BTreeMap<u32, u64>, b: &BTreeMap<u32, u64>) -> f64 {
    a.iter()
        .filter_map(|(d, ca)| b.get(d).map(|cb| *ca as f64 * *cb as f64))
        .sum()
}

/// Normalized shortest-path kernel: the delta kernel on path lengths is
/// a dot product of path-length histograms, cosine-normalized to [0, 1].
pub fn sp_kernel(a: &Graph, b: &Graph) -> f64 {
    let ha = path_length_histogram(a);
    let hb = path_length_histogram(b);
    let kaa = hist_dot(&ha, &ha);
    let kbb = hist_dot(&hb, &hb);
    if kaa == 0.0 && kbb == 0.0 {
        // both graphs have no connected pairs; identical (empty) profiles
        return if ha == hb { 1.0 } else { 0.0 };
    }
    if kaa == 0.0 || kbb == 0.0 {
        return 0.0;
    }
    let k = hist_dot(&ha, &hb);
    (k / libm::sqrt(kaa * kbb)).clamp(0.0, 1.0)
}

/// Topological fidelity metrics between the original and compressed
/// graphs.
pub fn topo_report(original: &Graph, compressed: &Graph) -> Result<TopoReport, EvalError> {
    if original.alive_count() == 0 || compressed.alive_count() == 0 {
        return Err(EvalError::EmptyGraph);
    }
    Ok(TopoReport {
        degree_diff: (mean_degree(original) - mean_degree(compressed)).abs(),
        clust_diff: (mean_clustering(original) - mean_clustering(compressed)).abs(),
        pathlen_diff: (avg_path_len_largest_component(original)
            - avg_path_len_largest_component(compressed))
        .abs(),
        sp_kernel: sp_kernel(original, compressed),
    })
}
