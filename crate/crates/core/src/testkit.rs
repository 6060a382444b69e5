//! Independent reference implementations used as oracles by the test
//! suites. Everything here deliberately takes a different algorithmic
//! route than the production code it checks: explicit path enumeration
//! instead of Brandes, Floyd–Warshall instead of BFS, Jacobi
//! eigendecomposition instead of power iteration, and full recounting
//! instead of incremental tracking.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;
use crate::nn::ParamSet;

/// Seeded random graph for oracle sweeps: N in [2, max_n], density drawn
/// from a wide range.
pub fn random_test_graph(seed: u64, max_n: usize) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let p = rng.random_range(0.05..0.95);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// All-pairs shortest-path lengths over alive nodes (Floyd–Warshall).
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<Option<u32>>> {
    let n = g.node_count();
    let mut dist = vec![vec![None; n]; n];
    for u in g.alive_nodes() {
        dist[u as usize][u as usize] = Some(0);
        for v in g.alive_neighbors(u) {
            dist[u as usize][v as usize] = Some(1);
        }
    }
    for k in 0..n {
        if !g.is_alive(k as u32) {
            continue;
        }
        for i in 0..n {
            let Some(dik) = dist[i][k] else { continue };
            for j in 0..n {
                let Some(dkj) = dist[k][j] else { continue };
                let via = dik + dkj;
                if dist[i][j].map_or(true, |d| via < d) {
                    dist[i][j] = Some(via);
                }
            }
        }
    }
    dist
}

/// Pair-reachability count: the number of unordered alive pairs at finite
/// distance.
pub fn brute_force_pairwise_connectivity(g: &Graph) -> u64 {
    let dist = floyd_warshall(g);
    let mut count = 0u64;
    for u in g.alive_nodes() {
        for v in g.alive_nodes() {
            if v > u && dist[u as usize][v as usize].is_some() {
                count += 1;
            }
        }
    }
    count
}

/// Enumerates every shortest path between `s` and `t` explicitly.
fn all_shortest_paths(g: &Graph, dist: &[Vec<Option<u32>>], s: u32, t: u32) -> Vec<Vec<u32>> {
    let Some(d) = dist[s as usize][t as usize] else {
        return Vec::new();
    };
    let mut paths = Vec::new();
    let mut stack = vec![(vec![s], s)];
    while let Some((path, u)) = stack.pop() {
        if u == t {
            paths.push(path);
            continue;
        }
        let du = dist[s as usize][u as usize].unwrap();
        for v in g.alive_neighbors(u) {
            let on_shortest = dist[s as usize][v as usize] == Some(du + 1)
                && dist[v as usize][t as usize].map(|r| du + 1 + r) == Some(d);
            if on_shortest {
                let mut next = path.clone();
                next.push(v);
                stack.push((next, v));
            }
        }
    }
    paths
}

/// Exact betweenness by explicit path enumeration:
/// `Σ_{s<t} σ_st(v) / σ_st` as a rational per node.
pub fn exact_betweenness(g: &Graph) -> Vec<Ratio<i64>> {
    let n = g.node_count();
    let dist = floyd_warshall(g);
    let mut scores = vec![Ratio::new(0, 1); n];
    let alive: Vec<u32> = g.alive_nodes().collect();
    for (i, &s) in alive.iter().enumerate() {
        for &t in &alive[i + 1..] {
            let paths = all_shortest_paths(g, &dist, s, t);
            if paths.is_empty() {
                continue;
            }
            let sigma = paths.len() as i64;
            let mut through: BTreeMap<u32, i64> = BTreeMap::new();
            for path in &paths {
                for &v in &path[1..path.len() - 1] {
                    *through.entry(v).or_insert(0) += 1;
                }
            }
            for (v, count) in through {
                scores[v as usize] += Ratio::new(count, sigma);
            }
        }
    }
    scores
}

/// Exact harmonic closeness as rationals, from Floyd–Warshall distances.
pub fn exact_closeness_harmonic(g: &Graph) -> Vec<Ratio<i64>> {
    let n = g.node_count();
    let dist = floyd_warshall(g);
    let mut scores = vec![Ratio::new(0, 1); n];
    for u in g.alive_nodes() {
        for v in g.alive_nodes() {
            if v != u {
                if let Some(d) = dist[u as usize][v as usize] {
                    scores[u as usize] += Ratio::new(1, d as i64);
                }
            }
        }
    }
    scores
}

/// Exact percolation centrality with degree-proportional states, by path
/// enumeration:
/// `PC(v) = (1/(n-2)) Σ_{s != v} (x_s / (Σx - x_v)) Σ_{t ∉ {s,v}} σ_st(v)/σ_st`.
pub fn exact_percolation(g: &Graph) -> Vec<Ratio<i64>> {
    let n = g.node_count();
    let alive: Vec<u32> = g.alive_nodes().collect();
    let mut scores = vec![Ratio::new(0, 1); n];
    if alive.len() <= 2 {
        return scores;
    }
    let max_deg = alive.iter().map(|&u| g.alive_degree(u)).max().unwrap_or(0);
    if max_deg == 0 {
        return scores;
    }
    let state = |u: u32| Ratio::new(g.alive_degree(u) as i64, max_deg as i64);
    let sum_states: Ratio<i64> = alive.iter().map(|&u| state(u)).sum();
    let dist = floyd_warshall(g);

    for &v in &alive {
        let denom = sum_states - state(v);
        if denom == Ratio::new(0, 1) {
            continue;
        }
        let mut total = Ratio::new(0, 1);
        for &s in &alive {
            if s == v {
                continue;
            }
            let mut dep = Ratio::new(0, 1);
            for &t in &alive {
                if t == s || t == v {
                    continue;
                }
                let paths = all_shortest_paths(g, &dist, s, t);
                if paths.is_empty() {
                    continue;
                }
                let through = paths
                    .iter()
                    .filter(|p| p[1..p.len() - 1].contains(&v))
                    .count() as i64;
                dep += Ratio::new(through, paths.len() as i64);
            }
            total += state(s) / denom * dep;
        }
        scores[v as usize] = total / Ratio::new(alive.len() as i64 - 2, 1);
    }
    scores
}

/// Brute-force collective influence from Floyd–Warshall distances.
pub fn brute_force_collective_influence(g: &Graph, ell: u32) -> Vec<f64> {
    let n = g.node_count();
    let dist = floyd_warshall(g);
    let mut scores = vec![0.0; n];
    for u in g.alive_nodes() {
        let ku = g.alive_degree(u) as f64;
        let frontier: f64 = g
            .alive_nodes()
            .filter(|&v| dist[u as usize][v as usize] == Some(ell))
            .map(|v| g.alive_degree(v) as f64 - 1.0)
            .sum();
        scores[u as usize] = (ku - 1.0) * frontier;
    }
    scores
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as columns).
pub fn jacobi_symmetric_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

/// Dominant-eigenvector oracle matching the production contract: the
/// Perron vector of the largest alive component (L2-normalized,
/// nonnegative), zero elsewhere.
pub fn exact_eigenvector_centrality(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let dist = floyd_warshall(g);
    // components via finite distances
    let mut comp: Vec<Option<usize>> = vec![None; n];
    let mut comp_members: Vec<Vec<u32>> = Vec::new();
    for u in g.alive_nodes() {
        if comp[u as usize].is_some() {
            continue;
        }
        let id = comp_members.len();
        let members: Vec<u32> = g
            .alive_nodes()
            .filter(|&v| dist[u as usize][v as usize].is_some())
            .collect();
        for &m in &members {
            comp[m as usize] = Some(id);
        }
        comp_members.push(members);
    }
    let mut scores = vec![0.0; n];
    let Some(largest) = comp_members
        .iter()
        .enumerate()
        .max_by(|(ia, ma), (ib, mb)| ma.len().cmp(&mb.len()).then(ib.cmp(ia)))
        .map(|(i, _)| i)
    else {
        return scores;
    };
    let members = &comp_members[largest];
    let m = members.len();
    let mut adj = vec![vec![0.0; m]; m];
    for (i, &u) in members.iter().enumerate() {
        for (j, &v) in members.iter().enumerate() {
            if dist[u as usize][v as usize] == Some(1) {
                adj[i][j] = 1.0;
            }
        }
    }
    let (eigenvalues, vectors) = jacobi_symmetric_eigen(adj);
    let top = eigenvalues
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut vec_top: Vec<f64> = (0..m).map(|i| vectors[i][top]).collect();
    let norm = libm::sqrt(vec_top.iter().map(|x| x * x).sum());
    for x in &mut vec_top {
        *x /= norm;
    }
    // Perron vector: flip sign so it is nonnegative
    let flip = vec_top
        .iter()
        .fold(0.0f64, |acc, &x| if x.abs() > acc.abs() { x } else { acc });
    if flip < 0.0 {
        for x in &mut vec_top {
            *x = -*x;
        }
    }
    for (i, &u) in members.iter().enumerate() {
        scores[u as usize] = vec_top[i];
    }
    scores
}

/// Degradation curve by full recomputation: rebuild the residual graph
/// and recount reachable pairs from scratch after every batch.
pub fn naive_degradation_curve(
    g: &Graph,
    ranking: &[u32],
    step_fraction: f64,
    max_fraction: f64,
) -> Vec<f64> {
    let n0 = g.alive_count();
    let steps = libm::floor(max_fraction / step_fraction + 1e-9) as usize;
    let batch = libm::ceil(step_fraction * n0 as f64 - 1e-9).max(1.0) as usize;
    let baseline = brute_force_pairwise_connectivity(g) as f64;
    let mut values = vec![1.0];
    let mut current = g.clone();
    let mut cursor = 0usize;
    for _ in 0..steps {
        let take = batch.min(ranking.len() - cursor);
        if take > 0 {
            current = current.remove_nodes(&ranking[cursor..cursor + take]).unwrap();
            cursor += take;
        }
        values.push(brute_force_pairwise_connectivity(&current) as f64 / baseline);
    }
    values
}

/// Brute-force normalized shortest-path kernel via Floyd–Warshall
/// histograms.
pub fn brute_force_sp_kernel(a: &Graph, b: &Graph) -> f64 {
    let hist = |g: &Graph| -> BTreeMap<u32, u64> {
        let dist = floyd_warshall(g);
        let mut h = BTreeMap::new();
        for u in g.alive_nodes() {
            for v in g.alive_nodes() {
                if v > u {
                    if let Some(d) = dist[u as usize][v as usize] {
                        *h.entry(d).or_insert(0u64) += 1;
                    }
                }
            }
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    let dot = |x: &BTreeMap<u32, u64>, y: &BTreeMap<u32, u64>| -> f64 {
        x.iter()
            .filter_map(|(d, cx)| y.get(d).map(|cy| *cx as f64 * *cy as f64))
            .sum()
    };
    let (kaa, kbb) = (dot(&ha, &ha), dot(&hb, &hb));
    if kaa == 0.0 && kbb == 0.0 {
        return if ha == hb { 1.0 } else { 0.0 };
    }
    if kaa == 0.0 || kbb == 0.0 {
        return 0.0;
    }
    dot(&ha, &hb) / libm::sqrt(kaa * kbb)
}

/// Central finite-difference check of the analytic gradients currently
/// stored in `params` (call after `Tape::backward`). `loss` must rebuild
/// the forward pass from scratch. Returns the worst relative error.
pub fn max_relative_grad_error(
    params: &mut ParamSet,
    slots: &[usize],
    mut loss: impl FnMut(&ParamSet) -> f64,
    h: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for &slot in slots {
        let len = params.value(slot).data().len();
        for k in 0..len {
            let analytic = params.grad(slot).data()[k];
            let orig = params.value(slot).data()[k];
            params.value_mut(slot).data_mut()[k] = orig + h;
            let up = loss(params);
            params.value_mut(slot).data_mut()[k] = orig - h;
            let down = loss(params);
            params.value_mut(slot).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
            if err > worst {
                worst = err;
            }
        }
    }
    worst
}
