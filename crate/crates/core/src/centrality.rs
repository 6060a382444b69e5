//! Node importance scores used by the attack strategies.
//!
//! All functions score the alive subgraph of a snapshot and return one
//! value per node id (dead nodes score 0). Scores only need to induce a
//! ranking; no cross-graph normalization is applied beyond what each
//! measure's convention requires.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::Graph;

/// Alive degree per node.
pub fn degree(g: &Graph) -> Vec<f64> {
    (0..g.node_count() as u32)
        .map(|u| {
            if g.is_alive(u) {
                g.alive_degree(u) as f64
            } else {
                0.0
            }
        })
        .collect()
}

/// Collective influence with ball radius `ell`:
/// `CI(i) = (k_i - 1) * Σ_{j at distance exactly ell} (k_j - 1)`.
pub fn collective_influence(g: &Graph, ell: u32) -> Vec<f64> {
    let n = g.node_count();
    let mut scores = vec![0.0; n];
    let mut dist: Vec<Option<u32>> = vec![None; n];
    let mut touched: Vec<u32> = Vec::new();
    for u in 0..n as u32 {
        if !g.is_alive(u) {
            continue;
        }
        let ki = g.alive_degree(u) as f64;
        // bounded BFS to the ball frontier
        touched.clear();
        dist[u as usize] = Some(0);
        touched.push(u);
        let mut queue = VecDeque::new();
        queue.push_back(u);
        let mut frontier_sum = 0.0;
        while let Some(v) = queue.pop_front() {
            let dv = dist[v as usize].unwrap();
            if dv == ell {
                frontier_sum += g.alive_degree(v) as f64 - 1.0;
                continue;
            }
            for w in g.alive_neighbors(v) {
                if dist[w as usize].is_none() {
                    dist[w as usize] = Some(dv + 1);
                    touched.push(w);
                    queue.push_back(w);
                }
            }
        }
        scores[u as usize] = (ki - 1.0) * frontier_sum;
        for &t in &touched {
            dist[t as usize] = None;
        }
    }
    scores
}

/// Eigenvector centrality of the largest alive component via power
/// iteration on `A + I` (the shift avoids oscillation on bipartite
/// components). Nodes outside the largest component score 0.
pub fn eigenvector(g: &Graph, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = g.node_count();
    let mut scores = vec![0.0; n];
    let labeling = g.connected_components();
    let Some(target) = largest_component(&labeling.sizes) else {
        return scores;
    };
    let members: Vec<u32> = (0..n as u32)
        .filter(|&u| labeling.label_of[u as usize] == Some(target))
        .collect();
    if members.is_empty() {
        return scores;
    }
    let m = members.len();
    let mut x = vec![1.0 / libm::sqrt(m as f64); n];
    for u in 0..n as u32 {
        if labeling.label_of[u as usize] != Some(target) {
            x[u as usize] = 0.0;
        }
    }
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        for &u in &members {
            let mut s = x[u as usize]; // the +I shift
            for v in g.alive_neighbors(u) {
                s += x[v as usize];
            }
            next[u as usize] = s;
        }
        let norm = libm::sqrt(members.iter().map(|&u| next[u as usize] * next[u as usize]).sum());
        if norm == 0.0 {
            break;
        }
        for &u in &members {
            next[u as usize] /= norm;
        }
        let diff: f64 = members
            .iter()
            .map(|&u| {
                let d = next[u as usize] - x[u as usize];
                d.abs()
            })
            .sum();
        for &u in &members {
            x[u as usize] = next[u as usize];
        }
        if diff < tol {
            break;
        }
    }
    for &u in &members {
        scores[u as usize] = x[u as usize];
    }
    scores
}

/// Largest component by size; ties broken by the smaller label (which is
/// the component containing the smallest node id that appears first).
fn largest_component(sizes: &[usize]) -> Option<u32> {
    sizes
        .iter()
        .enumerate()
        .max_by(|(ia, sa), (ib, sb)| sa.cmp(sb).then(ib.cmp(ia)))
        .map(|(i, _)| i as u32)
}

/// Betweenness centrality (Brandes, unweighted). Each unordered pair is
/// counted once.
pub fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut scores = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist: Vec<i64> = vec![-1; n];
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut delta = vec![0.0f64; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut queue = VecDeque::new();

    for s in 0..n as u32 {
        if !g.is_alive(s) {
            continue;
        }
        stack.clear();
        queue.clear();
        for u in 0..n {
            sigma[u] = 0.0;
            dist[u] = -1;
            preds[u].clear();
            delta[u] = 0.0;
        }
        sigma[s as usize] = 1.0;
        dist[s as usize] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for w in g.alive_neighbors(v) {
                if dist[w as usize] < 0 {
                    dist[w as usize] = dist[v as usize] + 1;
                    queue.push_back(w);
                }
                if dist[w as usize] == dist[v as usize] + 1 {
                    sigma[w as usize] += sigma[v as usize];
                    preds[w as usize].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w as usize] {
                delta[v as usize] +=
                    (sigma[v as usize] / sigma[w as usize]) * (1.0 + delta[w as usize]);
            }
            if w != s {
                scores[w as usize] += delta[w as usize];
            }
        }
    }
    // undirected: every pair was accumulated from both endpoints
    for s in &mut scores {
        *s /= 2.0;
    }
    scores
}

/// Harmonic closeness: `Σ_{v != u, reachable} 1/d(u, v)`. Well-defined on
/// disconnected graphs (unreachable pairs contribute 0).
pub fn closeness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut scores = vec![0.0; n];
    for u in 0..n as u32 {
        if !g.is_alive(u) {
            continue;
        }
        let dist = g.bfs_distances(u);
        scores[u as usize] = dist
            .iter()
            .filter_map(|d| *d)
            .filter(|&d| d > 0)
            .map(|d| 1.0 / d as f64)
            .sum();
    }
    scores
}

/// Percolation centrality with degree-proportional percolation states
/// `x_i = deg(i) / max_deg`:
/// `PC(v) = (1/(n-2)) Σ_{s != v} δ_s(v) * x_s / (Σ_w x_w - x_v)`
/// where `δ_s(v)` is the Brandes dependency of source `s` on `v`.
pub fn percolation(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut scores = vec![0.0; n];
    let alive: Vec<u32> = g.alive_nodes().collect();
    if alive.len() <= 2 {
        return scores;
    }
    let max_deg = alive
        .iter()
        .map(|&u| g.alive_degree(u))
        .max()
        .unwrap_or(0);
    if max_deg == 0 {
        return scores;
    }
    let states: Vec<f64> = (0..n as u32)
        .map(|u| {
            if g.is_alive(u) {
                g.alive_degree(u) as f64 / max_deg as f64
            } else {
                0.0
            }
        })
        .collect();
    let sum_states: f64 = states.iter().sum();

    let mut sigma = vec![0.0f64; n];
    let mut dist: Vec<i64> = vec![-1; n];
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut delta = vec![0.0f64; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut queue = VecDeque::new();

    for &s in &alive {
        stack.clear();
        queue.clear();
        for u in 0..n {
            sigma[u] = 0.0;
            dist[u] = -1;
            preds[u].clear();
            delta[u] = 0.0;
        }
        sigma[s as usize] = 1.0;
        dist[s as usize] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for w in g.alive_neighbors(v) {
                if dist[w as usize] < 0 {
                    dist[w as usize] = dist[v as usize] + 1;
                    queue.push_back(w);
                }
                if dist[w as usize] == dist[v as usize] + 1 {
                    sigma[w as usize] += sigma[v as usize];
                    preds[w as usize].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w as usize] {
                delta[v as usize] +=
                    (sigma[v as usize] / sigma[w as usize]) * (1.0 + delta[w as usize]);
            }
            if w != s {
                let denom = sum_states - states[w as usize];
                if denom > 0.0 {
                    scores[w as usize] += delta[w as usize] * states[s as usize] / denom;
                }
            }
        }
    }
    let norm = 1.0 / (alive.len() as f64 - 2.0);
    for s in &mut scores {
        *s *= norm;
    }
    scores
}
