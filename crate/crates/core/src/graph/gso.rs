use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GsoKind {
    Adjacency,
    Laplacian,
}

/// Which graph shift operator to use and whether to scale it by its
/// largest-magnitude eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GsoChoice {
    pub kind: GsoKind,
    pub normalize: bool,
}

impl GsoChoice {
    pub const ADJACENCY: Self = Self {
        kind: GsoKind::Adjacency,
        normalize: false,
    };
    pub const NORMALIZED_ADJACENCY: Self = Self {
        kind: GsoKind::Adjacency,
        normalize: true,
    };
}

impl Default for GsoChoice {
    fn default() -> Self {
        Self::ADJACENCY
    }
}

/// Power iteration for the modulus of the dominant eigenvalue of a symmetric matrix.
///
/// The estimate is `‖S x‖` for the normalized iterate `x`. Unlike the plain
/// Rayleigh quotient it also converges when `λ` and `-λ` are both dominant
/// (bipartite graphs), and it increases monotonically for symmetric `S`.
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 10_000,
        }
    }
}

impl PowerIteration {
    fn start_vector(n: usize) -> Array1<f64> {
        // all-ones plus a small deterministic ripple, so that eigenvectors
        // orthogonal to 1 (e.g. the Laplacian's) are still excited
        Array1::from_shape_fn(n, |i| 1.0 + 1e-3 * ((i as f64 * 0.618_033_988_749_895).fract() - 0.5))
    }

    pub fn run(&self, s: &Array2<f64>) -> Result<f64> {
        let n = s.nrows();
        if n == 0 {
            return Ok(0.0);
        }
        let mut x = Self::start_vector(n);
        x /= x.dot(&x).sqrt();
        let mut prev = 0.0;
        let mut change = f64::INFINITY;
        for _ in 0..self.max_iterations {
            let y = s.dot(&x);
            let mu = y.dot(&y).sqrt();
            if mu == 0.0 {
                return Ok(0.0);
            }
            if !mu.is_finite() {
                break;
            }
            change = (mu - prev).abs() / mu;
            if change <= self.tolerance {
                return Ok(mu);
            }
            prev = mu;
            x = y / mu;
        }
        Err(Error::PowerIteration {
            iterations: self.max_iterations,
            residual: change,
        })
    }
}

/// Modulus of the dominant eigenvalue with default power-iteration settings.
pub fn spectral_radius(s: &Array2<f64>) -> Result<f64> {
    PowerIteration::default().run(s)
}

/// Dense shift operator: weighted adjacency `A` or Laplacian `diag(A·1) − A`,
/// optionally divided by its largest-magnitude eigenvalue.
pub fn gso(g: &Graph, choice: GsoChoice) -> Result<Array2<f64>> {
    let a = g.adjacency();
    let mut s = match choice.kind {
        GsoKind::Adjacency => a,
        GsoKind::Laplacian => {
            let deg = a.sum_axis(ndarray::Axis(1));
            Array2::from_diag(&deg) - a
        }
    };
    if choice.normalize {
        if g.edge_count() == 0 {
            return Err(Error::EmptyGraph);
        }
        let lambda = spectral_radius(&s)?;
        if lambda == 0.0 {
            return Err(Error::EmptyGraph);
        }
        s /= lambda;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn k2_normalized_adjacency() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let s = gso(&g, GsoChoice::NORMALIZED_ADJACENCY).unwrap();
        assert!((&s - &array![[0.0, 1.0], [1.0, 0.0]]).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn path_laplacian() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let l = gso(
            &g,
            GsoChoice {
                kind: GsoKind::Laplacian,
                normalize: false,
            },
        )
        .unwrap();
        assert_eq!(l, array![[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]]);
    }

    #[test]
    fn normalized_laplacian_of_path_has_unit_radius() {
        // path Laplacian eigenvalues: 0, 1, 3
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let choice = GsoChoice {
            kind: GsoKind::Laplacian,
            normalize: true,
        };
        let l = gso(&g, choice).unwrap();
        assert!((l[[1, 1]] - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn bipartite_radius_converges() {
        // even cycle: eigenvalues ±2 both dominant
        let edges = (0..6).map(|i| (i, (i + 1) % 6));
        let g = Graph::from_edges(6, edges).unwrap();
        let r = spectral_radius(&g.adjacency()).unwrap();
        assert!((r - 2.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn normalizing_empty_graph_fails() {
        assert!(matches!(
            gso(&Graph::empty(3), GsoChoice::NORMALIZED_ADJACENCY),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn non_convergence_reports_residual() {
        // star graph converges slowly enough that one iteration cannot succeed
        let g = Graph::from_edges(5, (1..5).map(|j| (0, j))).unwrap();
        let pi = PowerIteration {
            tolerance: 1e-15,
            max_iterations: 1,
        };
        match pi.run(&g.adjacency()) {
            Err(Error::PowerIteration { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
