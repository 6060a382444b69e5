//! Adversarial node-removal strategies and the progressive attack
//! executor that produces degradation curves.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::centrality;
use crate::graph::{ConnectivityTracker, Graph, GraphError};
use crate::util::{ceil_frac, floor_ratio};

/// The six heuristic attack strategies. Learning-based attacks that need
/// external pretrained models are intentionally not part of this set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttackStrategy {
    Degree,
    CollectiveInfluence,
    Eigenvector,
    Betweenness,
    Closeness,
    Percolation,
}

impl AttackStrategy {
    pub const ALL: [AttackStrategy; 6] = [
        AttackStrategy::Degree,
        AttackStrategy::CollectiveInfluence,
        AttackStrategy::Eigenvector,
        AttackStrategy::Betweenness,
        AttackStrategy::Closeness,
        AttackStrategy::Percolation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AttackStrategy::Degree => "degree",
            AttackStrategy::CollectiveInfluence => "collective-influence",
            AttackStrategy::Eigenvector => "eigenvector",
            AttackStrategy::Betweenness => "betweenness",
            AttackStrategy::Closeness => "closeness",
            AttackStrategy::Percolation => "percolation",
        }
    }

    pub fn parse(name: &str) -> Result<Self, AttackError> {
        Self::ALL
            .iter()
            .copied()
            .find(|s| s.name() == name)
            .ok_or_else(|| AttackError::UnknownStrategy {
                name: String::from(name),
            })
    }

    /// Importance score per node for this strategy.
    pub fn scores(&self, g: &Graph) -> Vec<f64> {
        match self {
            AttackStrategy::Degree => centrality::degree(g),
            AttackStrategy::CollectiveInfluence => centrality::collective_influence(g, 2),
            AttackStrategy::Eigenvector => centrality::eigenvector(g, 1e-8, 1000),
            AttackStrategy::Betweenness => centrality::betweenness(g),
            AttackStrategy::Closeness => centrality::closeness(g),
            AttackStrategy::Percolation => centrality::percolation(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("unknown strategy '{name}'; valid strategies: degree, collective-influence, eigenvector, betweenness, closeness, percolation")]
    UnknownStrategy { name: String },
    #[error("graph has no alive nodes")]
    EmptyGraph,
    #[error("invalid schedule: require 0 < step ({step}) <= max ({max}) <= 1")]
    BadSchedule { step: f64, max: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A full node ranking for one strategy on one graph. Deterministic:
/// ties are broken by ascending node id.
#[derive(Debug, Clone)]
pub struct AttackPlan {
    pub strategy: AttackStrategy,
    /// Alive node ids in descending importance.
    pub ranking: Vec<u32>,
}

/// Progressive removal schedule: per-step fraction of the initial node
/// count, up to a total fraction.
#[derive(Debug, Clone, Copy)]
pub struct AttackSchedule {
    pub step_fraction: f64,
    pub max_fraction: f64,
}

impl Default for AttackSchedule {
    fn default() -> Self {
        AttackSchedule {
            step_fraction: 0.01,
            max_fraction: 0.40,
        }
    }
}

impl AttackSchedule {
    pub fn new(step_fraction: f64, max_fraction: f64) -> Result<Self, AttackError> {
        let ok = step_fraction > 0.0 && step_fraction <= max_fraction && max_fraction <= 1.0;
        if !ok {
            return Err(AttackError::BadSchedule {
                step: step_fraction,
                max: max_fraction,
            });
        }
        Ok(AttackSchedule {
            step_fraction,
            max_fraction,
        })
    }

    /// Number of removal steps `T`.
    pub fn steps(&self) -> usize {
        floor_ratio(self.max_fraction, self.step_fraction)
    }
}

/// Which graph a degradation curve was measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphTag {
    Original,
    Compressed,
}

/// Normalized pairwise-connectivity sequence under an attack schedule:
/// `values[0] = 1.0`, then one entry per removal step. Non-increasing and
/// bounded in [0, 1].
#[derive(Debug, Clone)]
pub struct DegradationCurve {
    pub values: Vec<f64>,
    pub strategy: AttackStrategy,
    pub graph_tag: GraphTag,
}

impl DegradationCurve {
    pub fn tagged(mut self, tag: GraphTag) -> Self {
        self.graph_tag = tag;
        self
    }
}

/// Ranks all alive nodes by descending strategy score, ties by ascending
/// node id. The ranking is computed once and never refreshed mid-attack.
pub fn rank_nodes(g: &Graph, strategy: AttackStrategy) -> Result<AttackPlan, AttackError> {
    if g.alive_count() == 0 {
        return Err(AttackError::EmptyGraph);
    }
    let scores = strategy.scores(g);
    let mut ranking: Vec<u32> = g.alive_nodes().collect();
    ranking.sort_by(|&a, &b| {
        scores[b as usize]
            .partial_cmp(&scores[a as usize])
            .expect("centrality scores are finite")
            .then(a.cmp(&b))
    });
    Ok(AttackPlan { strategy, ranking })
}

/// Executes the plan on `g`: `T = floor(max/step)` steps; each step
/// removes the next `ceil(step * N)` unremoved top-ranked nodes (N = the
/// initial alive count) and records connectivity normalized by the
/// unattacked baseline. The first entry is always 1.0, giving `T + 1`
/// points. If the ranking is exhausted early the curve is padded with
/// the last (zero-connectivity) value.
pub fn execute_attack(
    g: &Graph,
    plan: &AttackPlan,
    sched: &AttackSchedule,
) -> Result<DegradationCurve, AttackError> {
    let n0 = g.alive_count();
    if n0 == 0 {
        return Err(AttackError::EmptyGraph);
    }
    let baseline = g.pairwise_connectivity();
    if baseline == 0 {
        return Err(AttackError::Graph(GraphError::ZeroBaseline));
    }
    let steps = sched.steps();
    let batch = ceil_frac(sched.step_fraction, n0).max(1);
    let mut tracker = ConnectivityTracker::new(g.clone());
    let mut values = Vec::with_capacity(steps + 1);
    values.push(1.0);
    let mut cursor = 0usize;
    for _ in 0..steps {
        for _ in 0..batch {
            if cursor >= plan.ranking.len() {
                // ranking exhausted: the graph is empty, later entries stay 0
                break;
            }
            tracker.remove(plan.ranking[cursor])?;
            cursor += 1;
        }
        values.push(tracker.connectivity() as f64 / baseline as f64);
    }
    Ok(DegradationCurve {
        values,
        strategy: plan.strategy,
        graph_tag: GraphTag::Original,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(leaves: usize) -> Graph {
        let edges: Vec<(u32, u32)> = (1..=leaves).map(|i| (0, i as u32)).collect();
        Graph::from_edges(leaves + 1, &edges)
    }

    #[test]
    fn strategy_names_roundtrip() {
        for s in AttackStrategy::ALL {
            assert_eq!(AttackStrategy::parse(s.name()).unwrap(), s);
        }
        assert!(matches!(
            AttackStrategy::parse("finder"),
            Err(AttackError::UnknownStrategy { .. })
        ));
    }

    #[test]
    fn rank_degree_star_center_first() {
        let plan = rank_nodes(&star(4), AttackStrategy::Degree).unwrap();
        assert_eq!(plan.ranking[0], 0);
        // leaves tie, broken by ascending id
        assert_eq!(&plan.ranking[1..], &[1, 2, 3, 4]);
    }

    #[test]
    fn rank_betweenness_path_middle_first() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]);
        let plan = rank_nodes(&g, AttackStrategy::Betweenness).unwrap();
        assert_eq!(plan.ranking[0], 1);
    }

    #[test]
    fn ranking_is_permutation_of_alive_nodes() {
        let g = star(6).remove_nodes(&[3]).unwrap();
        for s in AttackStrategy::ALL {
            let plan = rank_nodes(&g, s).unwrap();
            let mut seen = plan.ranking.clone();
            seen.sort_unstable();
            let alive: Vec<u32> = g.alive_nodes().collect();
            assert_eq!(seen, alive, "{}", s.name());
        }
    }

    #[test]
    fn schedule_validation_and_steps() {
        assert!(AttackSchedule::new(0.0, 0.4).is_err());
        assert!(AttackSchedule::new(0.5, 0.4).is_err());
        assert!(AttackSchedule::new(0.1, 1.5).is_err());
        assert_eq!(AttackSchedule::default().steps(), 40);
        assert_eq!(AttackSchedule::new(0.1, 0.3).unwrap().steps(), 3);
    }

    #[test]
    fn star_collapses_in_first_batch() {
        let g = star(10);
        let plan = rank_nodes(&g, AttackStrategy::Degree).unwrap();
        let sched = AttackSchedule::default();
        let curve = execute_attack(&g, &plan, &sched).unwrap();
        assert_eq!(curve.values.len(), 41);
        assert_eq!(curve.values[0], 1.0);
        // batch = ceil(0.01 * 11) = 1, and the center ranks first
        assert_eq!(curve.values[1], 0.0);
    }

    #[test]
    fn curve_is_monotone_and_bounded() {
        let g = Graph::from_edges(
            9,
            &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 4)],
        );
        for s in AttackStrategy::ALL {
            let plan = rank_nodes(&g, s).unwrap();
            let sched = AttackSchedule::new(0.2, 1.0).unwrap();
            let curve = execute_attack(&g, &plan, &sched).unwrap();
            assert_eq!(curve.values[0], 1.0);
            for w in curve.values.windows(2) {
                assert!(w[1] <= w[0] + 1e-15, "{}", s.name());
                assert!((0.0..=1.0).contains(&w[1]));
            }
        }
    }

    #[test]
    fn exhausted_ranking_pads_with_zero() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]);
        let plan = rank_nodes(&g, AttackStrategy::Degree).unwrap();
        // steps = 10, batch = ceil(0.1*3) = 1; graph empties after 3 steps
        let sched = AttackSchedule::new(0.1, 1.0).unwrap();
        let curve = execute_attack(&g, &plan, &sched).unwrap();
        assert_eq!(curve.values.len(), 11);
        for &v in &curve.values[3..] {
            assert_eq!(v, 0.0);
        }
    }
}
