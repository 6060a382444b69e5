//! Synthetic graph generators for desk-scale experiments and tests.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generator spec '{spec}', expected er:N,p or ba:N,m")]
    BadSpec { spec: String },
    #[error("generator parameters out of range: {reason}")]
    BadParams { reason: String },
}

/// A parsed generator request (`er:N,p` or `ba:N,m`).
#[derive(Debug, Clone, PartialEq)]
pub enum GenSpec {
    ErdosRenyi { n: usize, p: f64 },
    BarabasiAlbert { n: usize, m: usize },
}

impl GenSpec {
    pub fn parse(spec: &str) -> Result<Self, GenError> {
        let bad = || GenError::BadSpec {
            spec: String::from(spec),
        };
        let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
        let (a, b) = rest.split_once(',').ok_or_else(bad)?;
        match kind {
            "er" => {
                let n: usize = a.trim().parse().map_err(|_| bad())?;
                let p: f64 = b.trim().parse().map_err(|_| bad())?;
                if n == 0 || !(0.0..=1.0).contains(&p) {
                    return Err(GenError::BadParams {
                        reason: alloc::format!("er requires N >= 1 and p in [0,1], got N={n}, p={p}"),
                    });
                }
                Ok(GenSpec::ErdosRenyi { n, p })
            }
            "ba" => {
                let n: usize = a.trim().parse().map_err(|_| bad())?;
                let m: usize = b.trim().parse().map_err(|_| bad())?;
                if m == 0 || n < m + 1 {
                    return Err(GenError::BadParams {
                        reason: alloc::format!("ba requires m >= 1 and N >= m+1, got N={n}, m={m}"),
                    });
                }
                Ok(GenSpec::BarabasiAlbert { n, m })
            }
            _ => Err(bad()),
        }
    }

    pub fn build<R: Rng>(&self, rng: &mut R) -> Graph {
        match *self {
            GenSpec::ErdosRenyi { n, p } => erdos_renyi(n, p, rng),
            GenSpec::BarabasiAlbert { n, m } => barabasi_albert(n, m, rng),
        }
    }
}

/// G(n, p): each of the n(n-1)/2 possible edges included independently.
pub fn erdos_renyi<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
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

/// Barabási–Albert preferential attachment: start from a complete graph
/// on m+1 nodes, then attach each new node to m distinct existing nodes
/// sampled proportionally to degree (repeated-endpoint list trick).
pub fn barabasi_albert<R: Rng>(n: usize, m: usize, rng: &mut R) -> Graph {
    assert!(m >= 1 && n >= m + 1);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut endpoints: Vec<u32> = Vec::new();
    for u in 0..=m as u32 {
        for v in u + 1..=m as u32 {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    for new in (m + 1)..n {
        let new = new as u32;
        let mut targets = alloc::collections::BTreeSet::new();
        while targets.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            targets.insert(t);
        }
        for &t in &targets {
            edges.push((new, t));
            endpoints.push(new);
            endpoints.push(t);
        }
    }
    Graph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn parse_specs() {
        assert_eq!(
            GenSpec::parse("er:50,0.1").unwrap(),
            GenSpec::ErdosRenyi { n: 50, p: 0.1 }
        );
        assert_eq!(
            GenSpec::parse("ba:200,2").unwrap(),
            GenSpec::BarabasiAlbert { n: 200, m: 2 }
        );
        assert!(GenSpec::parse("foo:1,2").is_err());
        assert!(GenSpec::parse("ba:2,2").is_err());
        assert!(GenSpec::parse("er:10,1.5").is_err());
    }

    #[test]
    fn ba_has_expected_edge_count_and_connectivity() {
        let mut rng = stream(3, Stream::Generator);
        let g = barabasi_albert(100, 2, &mut rng);
        assert_eq!(g.node_count(), 100);
        // complete core of 3 + 2 per added node
        assert_eq!(g.alive_edge_count(), 3 + 2 * 97);
        assert_eq!(g.connected_components().component_count(), 1);
    }

    #[test]
    fn er_is_deterministic_per_seed() {
        let g1 = erdos_renyi(30, 0.2, &mut stream(5, Stream::Generator));
        let g2 = erdos_renyi(30, 0.2, &mut stream(5, Stream::Generator));
        assert_eq!(g1.alive_edge_count(), g2.alive_edge_count());
        assert_eq!(g1.pairwise_connectivity(), g2.pairwise_connectivity());
    }
}
