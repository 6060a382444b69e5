//! Immutable undirected graph snapshots with logical node deletion.
//!
//! A [`Graph`] owns a shared adjacency structure (neighbor lists over
//! compact ids) plus a per-snapshot alive mask. Deleting nodes clones
//! the mask, never the adjacency, so removal sequences produce cheap
//! persistent snapshots and embedding layers can keep indexing by the
//! original compact id for a whole episode.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::util::ceil_frac;

/// Errors from graph construction and manipulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("line {line}: expected two integer node labels, got '{content}'")]
    MalformedLine { line: usize, content: String },
    #[error("edge list is empty")]
    EmptyInput,
    #[error("node {node} is out of range (graph has {nodes} nodes)")]
    OutOfRange { node: u32, nodes: usize },
    #[error("node {node} is not alive")]
    DeadNode { node: u32 },
    #[error("baseline connectivity is zero (degenerate graph)")]
    ZeroBaseline,
    #[error("compression ratio {rho} is outside (0, 1]")]
    BadRatio { rho: f64 },
}

/// Immutable undirected simple graph snapshot.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Arc<Vec<Vec<u32>>>,
    labels: Arc<Vec<u64>>,
    alive: Vec<bool>,
    alive_count: usize,
}

impl Graph {
    /// Builds a graph from undirected edges over compact ids `0..n`.
    /// Self-loops and duplicate edges are dropped.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut seen = BTreeSet::new();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            debug_assert!((u as usize) < n && (v as usize) < n);
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                adj[u as usize].push(v);
                adj[v as usize].push(u);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let labels = (0..n as u64).collect();
        Graph {
            adj: Arc::new(adj),
            labels: Arc::new(labels),
            alive: vec![true; n],
            alive_count: n,
        }
    }

    /// Parses edge-list text: one `u v` pair per line, `#` starts a
    /// comment, whitespace-separated integer labels. Labels are compacted
    /// to `0..N-1` in first-appearance order; the original labels are
    /// retained for reporting.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut labels: Vec<u64> = Vec::new();
        let mut index: BTreeMap<u64, u32> = BTreeMap::new();
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let intern = |label: u64, labels: &mut Vec<u64>, index: &mut BTreeMap<u64, u32>| -> u32 {
            *index.entry(label).or_insert_with(|| {
                labels.push(label);
                (labels.len() - 1) as u32
            })
        };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let mut tokens = line.split_whitespace();
            let (a, b) = match (tokens.next(), tokens.next()) {
                (None, _) => continue,
                (Some(a), Some(b)) => (a, b),
                (Some(_), None) => {
                    return Err(GraphError::MalformedLine {
                        line: line_no,
                        content: String::from(raw.trim()),
                    })
                }
            };
            if tokens.next().is_some() {
                return Err(GraphError::MalformedLine {
                    line: line_no,
                    content: String::from(raw.trim()),
                });
            }
            let parse = |t: &str| -> Result<u64, GraphError> {
                t.parse().map_err(|_| GraphError::MalformedLine {
                    line: line_no,
                    content: String::from(raw.trim()),
                })
            };
            let (ul, vl) = (parse(a)?, parse(b)?);
            let u = intern(ul, &mut labels, &mut index);
            let v = intern(vl, &mut labels, &mut index);
            edges.push((u, v));
        }
        if labels.is_empty() {
            return Err(GraphError::EmptyInput);
        }
        let n = labels.len();
        let mut g = Graph::from_edges(n, &edges);
        g.labels = Arc::new(labels);
        Ok(g)
    }

    /// Serializes the alive-induced subgraph as edge-list text using the
    /// original node labels, one edge per line, `u < v` order by id.
    pub fn to_edge_list_text(&self) -> String {
        let mut out = String::new();
        for u in 0..self.node_count() as u32 {
            if !self.is_alive(u) {
                continue;
            }
            for &v in self.neighbors(u) {
                if v > u && self.is_alive(v) {
                    out.push_str(&alloc::format!(
                        "{} {}\n",
                        self.original_label(u),
                        self.original_label(v)
                    ));
                }
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    #[inline]
    pub fn is_alive(&self, node: u32) -> bool {
        self.alive.get(node as usize).copied().unwrap_or(false)
    }

    /// Raw neighbor list (may include dead nodes; traversals filter).
    #[inline]
    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adj[node as usize]
    }

    pub fn alive_neighbors(&self, node: u32) -> impl Iterator<Item = u32> + '_ {
        self.adj[node as usize]
            .iter()
            .copied()
            .filter(move |&v| self.alive[v as usize])
    }

    pub fn alive_degree(&self, node: u32) -> usize {
        self.alive_neighbors(node).count()
    }

    pub fn alive_nodes(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.node_count() as u32).filter(move |&u| self.alive[u as usize])
    }

    pub fn alive_mask(&self) -> &[bool] {
        &self.alive
    }

    /// Number of edges between alive nodes.
    pub fn alive_edge_count(&self) -> usize {
        self.alive_nodes()
            .map(|u| self.alive_neighbors(u).filter(|&v| v > u).count())
            .sum()
    }

    pub fn original_label(&self, node: u32) -> u64 {
        self.labels[node as usize]
    }

    /// New snapshot with the given nodes logically deleted. The receiver
    /// is unchanged; repeated calls on the same snapshot are independent.
    pub fn remove_nodes(&self, nodes: &[u32]) -> Result<Graph, GraphError> {
        let mut next = self.clone();
        for &node in nodes {
            if (node as usize) >= self.node_count() {
                return Err(GraphError::OutOfRange {
                    node,
                    nodes: self.node_count(),
                });
            }
            if !next.alive[node as usize] {
                return Err(GraphError::DeadNode { node });
            }
            next.alive[node as usize] = false;
            next.alive_count -= 1;
        }
        Ok(next)
    }

    /// Connected components over alive nodes (BFS).
    pub fn connected_components(&self) -> ComponentLabeling {
        let n = self.node_count();
        let mut label_of: Vec<Option<u32>> = vec![None; n];
        let mut sizes = Vec::new();
        let mut queue = Vec::new();
        for start in 0..n as u32 {
            if !self.alive[start as usize] || label_of[start as usize].is_some() {
                continue;
            }
            let label = sizes.len() as u32;
            let mut size = 0usize;
            queue.clear();
            queue.push(start);
            label_of[start as usize] = Some(label);
            while let Some(u) = queue.pop() {
                size += 1;
                for v in self.alive_neighbors(u) {
                    if label_of[v as usize].is_none() {
                        label_of[v as usize] = Some(label);
                        queue.push(v);
                    }
                }
            }
            sizes.push(size);
        }
        ComponentLabeling { label_of, sizes }
    }

    /// Pairwise connectivity: Σ over components of |C|(|C|-1)/2.
    pub fn pairwise_connectivity(&self) -> u64 {
        self.connected_components().pairwise_connectivity()
    }

    /// Connectivity normalized by the unattacked baseline.
    pub fn normalized_connectivity(&self, baseline: u64) -> Result<f64, GraphError> {
        if baseline == 0 {
            return Err(GraphError::ZeroBaseline);
        }
        Ok(self.pairwise_connectivity() as f64 / baseline as f64)
    }

    /// BFS distances from `source` over alive nodes; `None` if unreachable.
    pub fn bfs_distances(&self, source: u32) -> Vec<Option<u32>> {
        let n = self.node_count();
        let mut dist = vec![None; n];
        if !self.is_alive(source) {
            return dist;
        }
        dist[source as usize] = Some(0);
        let mut queue = alloc::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize].unwrap();
            for v in self.alive_neighbors(u) {
                if dist[v as usize].is_none() {
                    dist[v as usize] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Component labeling of the alive nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    /// Component id per node; `None` for dead nodes. Labels are
    /// contiguous from 0.
    pub label_of: Vec<Option<u32>>,
    /// Size of each component, indexed by label.
    pub sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn pairwise_connectivity(&self) -> u64 {
        self.sizes
            .iter()
            .map(|&s| (s as u64 * (s as u64 - 1)) / 2)
            .sum()
    }
}

/// A compression request: retain fraction `rho`, remove the listed nodes.
#[derive(Debug, Clone)]
pub struct CompressionSpec {
    pub rho: f64,
    pub removal_set: BTreeSet<u32>,
}

impl CompressionSpec {
    /// Number of removals implied by `rho` on a graph of `n` nodes:
    /// `ceil((1 - rho) * n)`, with `rho = 1` yielding zero.
    pub fn removal_budget(rho: f64, n: usize) -> Result<usize, GraphError> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(GraphError::BadRatio { rho });
        }
        Ok(ceil_frac(1.0 - rho, n))
    }

    pub fn new(rho: f64, removal_set: BTreeSet<u32>) -> Result<Self, GraphError> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(GraphError::BadRatio { rho });
        }
        Ok(CompressionSpec { rho, removal_set })
    }
}

/// Incrementally maintained connectivity under node removals.
///
/// After each removal only the deleted node's former component is
/// relabeled, which is equivalent to a full recount (asserted in tests)
/// but much cheaper during long attack or episode sequences.
#[derive(Debug, Clone)]
pub struct ConnectivityTracker {
    graph: Graph,
    labels: Vec<Option<u32>>,
    sizes: BTreeMap<u32, usize>,
    next_label: u32,
    connectivity: u64,
}

impl ConnectivityTracker {
    pub fn new(graph: Graph) -> Self {
        let labeling = graph.connected_components();
        let connectivity = labeling.pairwise_connectivity();
        let sizes = labeling
            .sizes
            .iter()
            .enumerate()
            .map(|(i, &s)| (i as u32, s))
            .collect::<BTreeMap<_, _>>();
        let next_label = labeling.sizes.len() as u32;
        ConnectivityTracker {
            graph,
            labels: labeling.label_of,
            sizes,
            next_label,
            connectivity,
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn connectivity(&self) -> u64 {
        self.connectivity
    }

    /// Removes one node and updates connectivity by re-exploring only its
    /// former component.
    pub fn remove(&mut self, node: u32) -> Result<(), GraphError> {
        if (node as usize) >= self.graph.node_count() {
            return Err(GraphError::OutOfRange {
                node,
                nodes: self.graph.node_count(),
            });
        }
        if !self.graph.is_alive(node) {
            return Err(GraphError::DeadNode { node });
        }
        let old_label = self.labels[node as usize].expect("alive node must be labeled");
        let old_size = self.sizes.remove(&old_label).expect("tracked component");
        self.connectivity -= pairs(old_size);

        self.graph = self.graph.remove_nodes(&[node])?;
        self.labels[node as usize] = None;

        // Relabel the survivors of the old component: BFS from each member
        // still carrying the old label discovers one fragment.
        let members: Vec<u32> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(old_label))
            .map(|(i, _)| i as u32)
            .collect();
        let mut queue = alloc::collections::VecDeque::new();
        for &seed in &members {
            if self.labels[seed as usize] != Some(old_label) {
                continue;
            }
            let label = self.next_label;
            self.next_label += 1;
            let mut size = 0usize;
            self.labels[seed as usize] = Some(label);
            queue.push_back(seed);
            while let Some(u) = queue.pop_front() {
                size += 1;
                for v in self.graph.alive_neighbors(u) {
                    if self.labels[v as usize] == Some(old_label) {
                        self.labels[v as usize] = Some(label);
                        queue.push_back(v);
                    }
                }
            }
            self.connectivity += pairs(size);
            self.sizes.insert(label, size);
        }
        Ok(())
    }
}

fn pairs(n: usize) -> u64 {
    (n as u64 * (n as u64).saturating_sub(1)) / 2
}
