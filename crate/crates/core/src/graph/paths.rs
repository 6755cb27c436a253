use std::collections::VecDeque;

use ndarray::Array2;

use super::Graph;
use crate::error::{Error, Result};

/// Marker for node pairs in different connected components.
pub const UNREACHABLE: u32 = u32::MAX;

/// All-pairs hop counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<u32>,
}

impl DistanceMatrix {
    pub fn from_raw(n: usize, d: Vec<u32>) -> Result<Self> {
        if d.len() != n * n {
            return Err(Error::dims(n * n, d.len()));
        }
        Ok(Self { n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Raw entry; [`UNREACHABLE`] for pairs in different components.
    #[inline]
    pub fn raw(&self, i: usize, j: usize) -> u32 {
        self.d[i * self.n + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        Some(self.raw(i, j)).filter(|&d| d != UNREACHABLE)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.d
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    /// Largest finite distance, `None` for the empty graph.
    pub fn diameter(&self) -> Option<usize> {
        self.d
            .iter()
            .filter(|&&d| d != UNREACHABLE)
            .max()
            .map(|&d| d as usize)
    }
}

fn bfs_from(g: &Graph, source: usize, dist: &mut [u32], queue: &mut VecDeque<usize>) {
    dist.fill(UNREACHABLE);
    dist[source] = 0;
    queue.clear();
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let next = dist[u] + 1;
        for &v in g.neighbors(u) {
            if dist[v] == UNREACHABLE {
                dist[v] = next;
                queue.push_back(v);
            }
        }
    }
}

/// Unweighted BFS from every node. Edge weights are ignored.
pub fn bfs_distances(g: &Graph) -> DistanceMatrix {
    let n = g.n();
    let mut d = vec![UNREACHABLE; n * n];
    let mut queue = VecDeque::with_capacity(n);
    for (s, row) in d.chunks_mut(n.max(1)).enumerate().take(n) {
        bfs_from(g, s, row, &mut queue);
    }
    DistanceMatrix { n, d }
}

/// Component id per node, numbered by smallest member.
pub fn components(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &v in g.neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Square 0/1 matrix packed 64 entries per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Column indices of the set entries in row `i`.
    pub fn row_ones(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.bits[i * self.words..(i + 1) * self.words];
        row.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + b)
            })
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n, self.n), |(i, j)| if self.get(i, j) { 1.0 } else { 0.0 })
    }
}

/// The k-hop adjacency matrices `A(0) = I, A(1), …, A(k_max)` of a graph,
/// where `A(k)[i][j] = 1` iff the hop distance between `i` and `j` is exactly `k`.
#[derive(Debug, Clone)]
pub struct KHopStack {
    layers: Vec<BitMatrix>,
    distances: DistanceMatrix,
    diameter: usize,
    components: Vec<usize>,
}

impl KHopStack {
    pub fn n(&self) -> usize {
        self.distances.n()
    }

    /// Number of matrices, `k_max + 1`.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn k_max(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, k: usize) -> &BitMatrix {
        &self.layers[k]
    }

    pub fn layers(&self) -> &[BitMatrix] {
        &self.layers
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn components(&self) -> &[usize] {
        &self.components
    }
}

pub fn khop_stack(g: &Graph, k_max: usize) -> KHopStack {
    let distances = bfs_distances(g);
    let n = g.n();
    let mut layers = vec![BitMatrix::zeros(n); k_max + 1];
    for i in 0..n {
        for (j, &d) in distances.row(i).iter().enumerate() {
            if d != UNREACHABLE && (d as usize) <= k_max {
                layers[d as usize].set(i, j);
            }
        }
    }
    KHopStack {
        layers,
        diameter: distances.diameter().unwrap_or(0),
        distances,
        components: components(g),
    }
}

/// Eccentricity-based summary of the largest connected component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct GraphMetrics {
    pub radius: usize,
    pub diameter: usize,
    pub largest_cc_size: usize,
    pub components: usize,
}

/// Radius and diameter of the largest connected component (ties broken by
/// lowest component id). Runs one BFS per component node without storing
/// the full distance matrix.
pub fn graph_metrics(g: &Graph) -> Result<GraphMetrics> {
    if g.n() == 0 {
        return Err(Error::invalid("graph metrics are undefined for an empty graph"));
    }
    let labels = components(g);
    let count = labels.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; count];
    for &c in &labels {
        sizes[c] += 1;
    }
    let (largest, &size) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty graph has a component");
    let mut dist = vec![UNREACHABLE; g.n()];
    let mut queue = VecDeque::with_capacity(g.n());
    let mut radius = usize::MAX;
    let mut diameter = 0;
    for s in (0..g.n()).filter(|&s| labels[s] == largest) {
        bfs_from(g, s, &mut dist, &mut queue);
        let ecc = dist
            .iter()
            .filter(|&&d| d != UNREACHABLE)
            .max()
            .copied()
            .unwrap_or(0) as usize;
        radius = radius.min(ecc);
        diameter = diameter.max(ecc);
    }
    Ok(GraphMetrics {
        radius,
        diameter,
        largest_cc_size: size,
        components: count,
    })
}
