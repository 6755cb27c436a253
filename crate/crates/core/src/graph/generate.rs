use std::collections::BTreeSet;

use rand::Rng;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Erdős–Rényi G(n, p): every unordered pair is an edge independently with probability `p`.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("graph needs at least one node"));
    }
    check_probability("p", p)?;
    let mut rng = seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Stochastic block model sample together with its planted community labels.
#[derive(Debug, Clone)]
pub struct SbmGraph {
    pub graph: Graph,
    pub communities: Vec<usize>,
}

/// Stochastic block model with `communities` equally sized, contiguous blocks.
pub fn generate_sbm(n: usize, communities: usize, p_in: f64, p_out: f64, seed: u64) -> Result<SbmGraph> {
    if n == 0 || communities == 0 {
        return Err(Error::invalid("SBM needs at least one node and one community"));
    }
    if n % communities != 0 {
        return Err(Error::invalid(format!(
            "{n} nodes cannot be split into {communities} equally sized communities"
        )));
    }
    check_probability("p_in", p_in)?;
    check_probability("p_out", p_out)?;
    let size = n / communities;
    let labels: Vec<usize> = (0..n).map(|i| i / size).collect();
    let mut rng = seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(SbmGraph {
        graph: Graph::from_edges(n, edges)?,
        communities: labels,
    })
}

/// Watts–Strogatz small-world graph: a ring where each node links to its
/// `k_ring` nearest neighbours, after which every lattice edge `(u, u+j)` is
/// rewired to `(u, w)` with probability `beta`. Rewiring never creates
/// self-loops or duplicates and keeps the edge count at `n * k_ring / 2`.
pub fn generate_small_world(n: usize, k_ring: usize, beta: f64, seed: u64) -> Result<Graph> {
    if k_ring % 2 != 0 {
        return Err(Error::invalid(format!("k_ring must be even, got {k_ring}")));
    }
    if k_ring >= n {
        return Err(Error::invalid(format!("k_ring ({k_ring}) must be smaller than n ({n})")));
    }
    check_probability("beta", beta)?;
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for j in 1..=k_ring / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    let mut rng = seeded(seed);
    for j in 1..=k_ring / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.random::<f64>() >= beta {
                continue;
            }
            // The lattice edge may already have been moved away by an earlier rewire of v.
            if !adj[u].contains(&v) || adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let edges = adj
        .iter()
        .enumerate()
        .flat_map(|(u, nb)| nb.iter().filter(move |&&v| v > u).map(move |&v| (u, v)));
    Graph::from_edges(n, edges)
}

/// Draws graphs with seeds derived from `seed` until one is connected.
pub fn resample_connected<F>(seed: u64, max_attempts: usize, mut sample: F) -> Result<Graph>
where
    F: FnMut(u64) -> Result<Graph>,
{
    for attempt in 0..max_attempts {
        let g = sample(derive_seed(seed, attempt as u64))?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::NotConnected(max_attempts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bfs_distances, components};

    #[test]
    fn er_extremes() {
        assert_eq!(generate_er(5, 0.0, 1).unwrap().edge_count(), 0);
        assert_eq!(generate_er(5, 1.0, 1).unwrap().edge_count(), 10);
        assert!(generate_er(5, 1.5, 1).is_err());
        assert!(generate_er(0, 0.5, 1).is_err());
    }

    #[test]
    fn er_is_deterministic_per_seed() {
        assert_eq!(generate_er(30, 0.3, 9).unwrap(), generate_er(30, 0.3, 9).unwrap());
        assert_ne!(generate_er(30, 0.3, 9).unwrap(), generate_er(30, 0.3, 10).unwrap());
    }

    #[test]
    fn er_edge_count_within_binomial_bounds() {
        // Binomial(2016, 0.2): mean 403.2, sd = sqrt(2016 * 0.2 * 0.8) ~= 17.96
        let mean = 0.2 * (64.0 * 63.0 / 2.0);
        let sd = (64.0 * 63.0 / 2.0 * 0.2 * 0.8f64).sqrt();
        let m = generate_er(64, 0.2, 7).unwrap().edge_count() as f64;
        assert!((m - mean).abs() <= 4.0 * sd, "{m}");
        let total: f64 = (0..200)
            .map(|s| generate_er(64, 0.2, s).unwrap().edge_count() as f64)
            .sum();
        // mean of 200 draws has sd ~= 1.27
        assert!((total / 200.0 - mean).abs() < 4.0 * sd / 200f64.sqrt());
    }

    #[test]
    fn sbm_deterministic_blocks() {
        let s = generate_sbm(4, 2, 1.0, 0.0, 3).unwrap();
        assert_eq!(s.communities, vec![0, 0, 1, 1]);
        let edges: Vec<_> = s.graph.edges().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(edges, vec![(0, 1), (2, 3)]);
        assert!(generate_sbm(10, 3, 0.3, 0.1, 0).is_err());
    }

    #[test]
    fn sbm_intra_degree_matches_expectation() {
        // 4 blocks of 64: expected intra-community degree 0.3 * 63 = 18.9
        let mut sum = 0.0;
        let seeds = 100;
        for s in 0..seeds {
            let sbm = generate_sbm(256, 4, 0.3, 0.0075, s).unwrap();
            let g = &sbm.graph;
            let intra: usize = (0..256)
                .map(|i| {
                    g.neighbors(i)
                        .iter()
                        .filter(|&&j| sbm.communities[j] == sbm.communities[i])
                        .count()
                })
                .sum();
            sum += intra as f64 / 256.0;
        }
        let mean = sum / seeds as f64;
        assert!((mean - 18.9).abs() < 0.15, "{mean}");
    }

    #[test]
    fn small_world_without_rewiring_is_a_cycle() {
        let g = generate_small_world(8, 2, 0.0, 0).unwrap();
        assert_eq!(g.edge_count(), 8);
        assert!((0..8).all(|i| g.degree(i) == 2 && g.has_edge(i, (i + 1) % 8)));
        assert_eq!(bfs_distances(&g).diameter(), Some(4));
    }

    #[test]
    fn small_world_rewiring_preserves_edge_count() {
        let g = generate_small_world(64, 4, 0.1, 3).unwrap();
        assert_eq!(g.edge_count(), 128);
        let g = generate_small_world(20, 6, 1.0, 5).unwrap();
        assert_eq!(g.edge_count(), 60);
        assert!(generate_small_world(8, 3, 0.1, 0).is_err());
        assert!(generate_small_world(4, 4, 0.1, 0).is_err());
    }

    #[test]
    fn resampling_finds_connected_graph() {
        let g = resample_connected(1, 100, |s| generate_er(20, 0.2, s)).unwrap();
        assert!(components(&g).iter().all(|&c| c == 0));
        assert!(matches!(
            resample_connected(1, 5, |s| generate_er(20, 0.0, s)),
            Err(Error::NotConnected(5))
        ));
    }
}
