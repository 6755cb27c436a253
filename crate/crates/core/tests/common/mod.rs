#![allow(dead_code)]

use ndarray::Array2;
use ngf::graph::{generate_er, Graph, GsoChoice, UNREACHABLE};
use ngf::neural::{
    backward, forward, init_state, Activation, CoeffMode, GraphOperators, HopScaling, Loss, Network, NetworkSpec,
    NetworkState, OperatorKind, OutputHead, PreparedInput,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All-pairs hop counts by Floyd–Warshall over the binarized adjacency.
pub fn floyd_warshall(g: &Graph) -> Vec<u32> {
    let n = g.n();
    let inf = u64::MAX / 4;
    let mut d = vec![inf; n * n];
    for i in 0..n {
        d[i * n + i] = 0;
        for &j in g.neighbors(i) {
            d[i * n + j] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    d.into_iter().map(|v| if v >= inf { UNREACHABLE } else { v as u32 }).collect()
}

/// Largest over parameters of `|a - f| / max(|a|, |f|, floor)`, where the
/// floor is 1e-3 times the largest gradient magnitude so that entries which
/// are numerically zero do not dominate.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (scale * 1e-3).max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub struct GradCase {
    pub net: Network,
    pub state: NetworkState,
    pub input: PreparedInput,
    pub target: Array2<f64>,
    pub labels: Vec<usize>,
    pub mask: Vec<usize>,
    pub softmax: bool,
}

impl GradCase {
    pub fn random(op: OperatorKind, mode: CoeffMode, act: Activation, softmax: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=8);
        let g = loop {
            let g = generate_er(n, 0.5, rng.random()).unwrap();
            if g.edge_count() > 0 {
                break g;
            }
        };
        Self::on_graph(g, op, mode, act, softmax, rng)
    }

    /// Same as [`GradCase::random`] on a path of 8 to 10 nodes, sparse
    /// enough for the row-compressed kernels.
    pub fn random_sparse(op: OperatorKind, mode: CoeffMode, act: Activation, softmax: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(8..=10);
        let g = Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap();
        Self::on_graph(g, op, mode, act, softmax, rng)
    }

    fn on_graph(g: Graph, op: OperatorKind, mode: CoeffMode, act: Activation, softmax: bool, mut rng: ChaCha8Rng) -> Self {
        let n = g.n();
        let f_out = if softmax { 3 } else { rng.random_range(1..=2) };
        let dims = vec![rng.random_range(1..=3), rng.random_range(2..=4), f_out];
        let taps = rng.random_range(2..=4);
        let head = if softmax { OutputHead::Softmax } else { OutputHead::Identity };
        let spec = NetworkSpec::uniform(dims.clone(), op, taps, mode, act, head);
        let ops = GraphOperators::for_network(&g, GsoChoice::NORMALIZED_ADJACENCY, &spec, HopScaling::SpectralRadius).unwrap();
        let net = Network::new(spec, &ops).unwrap();
        let mut state = init_state(&net, rng.random());
        for c in state.coeffs.iter_mut() {
            for v in c.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let z = Array2::from_shape_simple_fn((n, dims[0]), || rng.random_range(-1.0..1.0));
        let target = Array2::from_shape_simple_fn((n, f_out), || rng.random_range(-1.0..1.0));
        let labels = (0..n).map(|_| rng.random_range(0..f_out)).collect();
        let mask = (0..n).filter(|_| rng.random_bool(0.6)).chain([0]).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let input = net.prepare(z).unwrap();
        Self { net, state, input, target, labels, mask, softmax }
    }

    pub fn loss(&self) -> Loss<'_> {
        if self.softmax {
            Loss::CrossEntropy { labels: &self.labels, mask: &self.mask }
        } else {
            Loss::SquaredError { target: &self.target }
        }
    }

    fn value_at(&self, state: &NetworkState) -> f64 {
        let mut s = state.clone();
        let out = forward(&self.net, &mut s, &self.input).unwrap();
        self.loss().value(&out).unwrap()
    }

    /// (analytic, central-difference) gradients flattened in parameter order.
    pub fn gradients(&self, step: f64) -> (Vec<f64>, Vec<f64>) {
        let mut state = self.state.clone();
        forward(&self.net, &mut state, &self.input).unwrap();
        let grads = backward(&self.net, &state, &self.input, &self.loss()).unwrap();
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for l in 0..state.weights.len() {
            for idx in 0..state.weights[l].len() {
                let (r, c) = (idx / state.weights[l].ncols(), idx % state.weights[l].ncols());
                analytic.push(grads.weights[l][[r, c]]);
                let mut plus = self.state.clone();
                plus.weights[l][[r, c]] += step;
                let mut minus = self.state.clone();
                minus.weights[l][[r, c]] -= step;
                numeric.push((self.value_at(&plus) - self.value_at(&minus)) / (2.0 * step));
            }
            if let Some(gh) = &grads.coeffs[l] {
                for (k, &g) in gh.iter().enumerate() {
                    analytic.push(g);
                    let mut plus = self.state.clone();
                    plus.coeffs[l][k] += step;
                    let mut minus = self.state.clone();
                    minus.coeffs[l][k] -= step;
                    numeric.push((self.value_at(&plus) - self.value_at(&minus)) / (2.0 * step));
                }
            }
        }
        (analytic, numeric)
    }
}

pub const OPERATORS: [OperatorKind; 3] = [OperatorKind::Adjacency, OperatorKind::Classical, OperatorKind::Neighborhood];
pub const MODES: [CoeffMode; 2] = [CoeffMode::Fixed, CoeffMode::Learnable];
pub const ACTIVATIONS: [Activation; 2] = [Activation::Relu, Activation::Tanh];
