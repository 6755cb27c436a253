//! Undirected simple graphs and everything built directly on their topology:
//! random generators, hop distances, k-hop adjacency stacks, shift operators
//! and random edge perturbations.

mod generate;
mod gso;
mod paths;
mod perturb;

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

pub use generate::{generate_er, generate_sbm, generate_small_world, resample_connected, SbmGraph};
pub use gso::{gso, spectral_radius, GsoChoice, GsoKind, PowerIteration};
pub use paths::{
    bfs_distances, components, graph_metrics, khop_stack, BitMatrix, DistanceMatrix, GraphMetrics,
    KHopStack, UNREACHABLE,
};
pub use perturb::{perturb, perturb_connected};

/// Undirected simple graph on nodes `0..n` with optional edge weights.
///
/// Neighbor lists are kept sorted, so two graphs with the same edge set
/// compare equal regardless of insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            neighbors: vec![Vec::new(); n],
            weights: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from unweighted pairs, rejecting self-loops,
    /// duplicates (in either orientation) and out-of-range indices.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_weighted_edges(n, edges.into_iter().map(|(i, j)| (i, j, 1.0)))
    }

    pub fn from_weighted_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut g = Self::empty(n);
        for (i, j, w) in edges {
            g.insert(i, j, w)?;
        }
        Ok(g)
    }

    fn insert(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        for idx in [i, j] {
            if idx >= self.n {
                return Err(Error::NodeOutOfRange { index: idx, n: self.n });
            }
        }
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        if !w.is_finite() {
            return Err(Error::invalid(format!("non-finite weight on edge ({i}, {j})")));
        }
        let pos_i = match self.neighbors[i].binary_search(&j) {
            Ok(_) => return Err(Error::DuplicateEdge(i.min(j), i.max(j))),
            Err(p) => p,
        };
        self.neighbors[i].insert(pos_i, j);
        self.weights[i].insert(pos_i, w);
        let pos_j = self.neighbors[j].binary_search(&i).unwrap_err();
        self.neighbors[j].insert(pos_j, i);
        self.weights[j].insert(pos_j, w);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let pos = self.neighbors.get(i)?.binary_search(&j).ok()?;
        Some(self.weights[i][pos])
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.iter().flatten().any(|&w| w != 1.0)
    }

    /// Edges as `(i, j, weight)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.neighbors.iter().enumerate().flat_map(move |(i, nb)| {
            nb.iter()
                .zip(&self.weights[i])
                .filter(move |(&j, _)| j > i)
                .map(move |(&j, &w)| (i, j, w))
        })
    }

    /// Dense adjacency matrix carrying edge weights.
    pub fn adjacency(&self) -> ndarray::Array2<f64> {
        let mut a = ndarray::Array2::zeros((self.n, self.n));
        for (i, j, w) in self.edges() {
            a[[i, j]] = w;
            a[[j, i]] = w;
        }
        a
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::dims(self.n, perm.len()));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        Self::from_weighted_edges(self.n, self.edges().map(|(i, j, w)| (perm[i], perm[j], w)))
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || components(self).iter().all(|&c| c == 0)
    }

    /// Subgraph induced by `nodes`, relabelled densely in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Result<Self> {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in nodes.iter().enumerate() {
            if old >= self.n {
                return Err(Error::NodeOutOfRange { index: old, n: self.n });
            }
            map[old] = new;
        }
        Self::from_weighted_edges(
            nodes.len(),
            self.edges()
                .filter(|&(i, j, _)| map[i] != usize::MAX && map[j] != usize::MAX)
                .map(|(i, j, w)| (map[i], map[j], w)),
        )
    }

    /// Serializes to the edge-list text format. A `# nodes N` line preserves
    /// trailing isolated nodes.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# nodes {}", self.n).unwrap();
        for (i, j, w) in self.edges() {
            if w == 1.0 {
                writeln!(out, "{i} {j}").unwrap();
            } else {
                writeln!(out, "{i} {j} {w}").unwrap();
            }
        }
        out
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse_edge_list(std::io::BufReader::new(file), path)
    }

    /// Parses `i j [weight]` lines. Blank lines and `#` comments are ignored,
    /// except `# nodes N`, which fixes the node count.
    pub fn parse_edge_list<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut declared: Option<usize> = None;
        let mut triples = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                let mut parts = comment.split_whitespace();
                if parts.next() == Some("nodes") {
                    let n = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(lineno, "malformed '# nodes' directive".into()))?;
                    declared = Some(n);
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(err(lineno, format!("expected 'i j [weight]', got {trimmed:?}")));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|_| err(lineno, format!("bad node index {:?}", fields[0])))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|_| err(lineno, format!("bad node index {:?}", fields[1])))?;
            let w: f64 = match fields.get(2) {
                Some(s) => s.parse().map_err(|_| err(lineno, format!("bad weight {s:?}")))?,
                None => 1.0,
            };
            triples.push((lineno, i, j, w));
        }
        let n = declared.unwrap_or_else(|| {
            triples
                .iter()
                .map(|&(_, i, j, _)| i.max(j) + 1)
                .max()
                .unwrap_or(0)
        });
        let mut g = Graph::empty(n);
        for (lineno, i, j, w) in triples {
            g.insert(i, j, w).map_err(|e| err(lineno, e.to_string()))?;
        }
        Ok(g)
    }
}
