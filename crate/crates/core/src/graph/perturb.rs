use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

fn edit_count(pct: f64, edges: usize) -> usize {
    (pct * edges as f64 + 0.5).floor() as usize
}

/// Removes `round(destroy_pct·|E|)` existing edges and adds
/// `round(create_pct·|E|)` pairs that were not edges of `g`, both sampled
/// uniformly without replacement. Counts round half up. New edges get weight 1.
pub fn perturb(g: &Graph, create_pct: f64, destroy_pct: f64, seed: u64) -> Result<Graph> {
    for (name, p) in [("create_pct", create_pct), ("destroy_pct", destroy_pct)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    let n = g.n();
    let edges: Vec<(usize, usize, f64)> = g.edges().collect();
    let m = edges.len();
    let n_destroy = edit_count(destroy_pct, m);
    let n_create = edit_count(create_pct, m);
    let pairs = n * n.saturating_sub(1) / 2;
    let available = pairs - m;
    if n_create > available {
        return Err(Error::NotEnoughNonEdges {
            requested: n_create,
            available,
        });
    }

    let mut rng = seeded(seed);
    let mut removed = vec![false; m];
    for idx in sample(&mut rng, m, n_destroy.min(m)) {
        removed[idx] = true;
    }

    let added: Vec<(usize, usize)> = if 2 * n_create <= available {
        // sparse regime: rejection sampling over pairs
        let mut chosen = HashSet::with_capacity(n_create);
        let mut out = Vec::with_capacity(n_create);
        while out.len() < n_create {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let pair = (i.min(j), i.max(j));
            if g.has_edge(pair.0, pair.1) || !chosen.insert(pair) {
                continue;
            }
            out.push(pair);
        }
        out
    } else {
        let non_edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !g.has_edge(i, j))
            .collect();
        sample(&mut rng, non_edges.len(), n_create)
            .into_iter()
            .map(|k| non_edges[k])
            .collect()
    };

    let kept = edges
        .iter()
        .zip(&removed)
        .filter(|(_, &r)| !r)
        .map(|(&e, _)| e);
    Graph::from_weighted_edges(n, kept.chain(added.into_iter().map(|(i, j)| (i, j, 1.0))))
}

/// Repeats [`perturb`] with derived seeds until the result is connected.
pub fn perturb_connected(
    g: &Graph,
    create_pct: f64,
    destroy_pct: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<Graph> {
    for attempt in 0..max_attempts {
        let p = perturb(g, create_pct, destroy_pct, derive_seed(seed, attempt as u64))?;
        if p.is_connected() {
            return Ok(p);
        }
    }
    Err(Error::NotConnected(max_attempts))
}
