use ndarray::{Array2, Axis, Zip};

use super::basis::{Basis, GraphOperators};
use super::sparse::SparseMatrix;
use super::{softmax_rows, CoeffMode, Loss, NetworkSpec, OutputHead};
use crate::error::{Error, Result};

/// A [`NetworkSpec`] bound to the operator bases of one graph.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    bases: Vec<Basis>,
    /// Assembled operators of fixed-coefficient layers.
    fixed: Vec<Option<Array2<f64>>>,
}

/// How the first layer consumes its (constant) input `Z`.
#[derive(Debug, Clone)]
enum FirstLayer {
    /// `H (Z Θ)` every pass.
    Direct,
    /// `B_k Z` precomputed; the layer computes `(Σ h_k B_k Z) Θ`.
    Products(Vec<Array2<f64>>),
    /// `H Z` precomputed for a fixed-coefficient first layer.
    Filtered(Array2<f64>),
}

/// Network input with whatever first-layer products are worth caching.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    z: Array2<f64>,
    first: FirstLayer,
    /// Row-compressed `Z` for a direct first layer with sparse input.
    sparse_z: Option<SparseMatrix>,
}

impl PreparedInput {
    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }
}

#[derive(Debug, Clone)]
enum Mixed {
    /// `V = X Θ` and the assembled operator (None: use the network's fixed one).
    Direct { v: Array2<f64>, op: Option<Array2<f64>> },
    /// `M = H X` with `X = Z`.
    Premixed { m: Array2<f64> },
    /// The per-term products `B_k X Θ`.
    Terms { terms: Vec<Array2<f64>> },
}

#[derive(Debug, Clone)]
struct LayerCache {
    mixed: Mixed,
    output: Array2<f64>,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    layers: Vec<LayerCache>,
}

/// Learnable weights `Θ(ℓ)` and filter coefficients `h(ℓ)` (fixed layers keep
/// their constant coefficients here too), plus the last forward pass.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub weights: Vec<Array2<f64>>,
    pub coeffs: Vec<Vec<f64>>,
    cache: Option<ForwardCache>,
}

impl NetworkState {
    pub fn new(weights: Vec<Array2<f64>>, coeffs: Vec<Vec<f64>>) -> Self {
        Self {
            weights,
            coeffs,
            cache: None,
        }
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.coeffs.iter().flatten().all(|v| v.is_finite())
    }
}

impl PartialEq for NetworkState {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights && self.coeffs == other.coeffs
    }
}

/// Gradients of the loss with respect to every parameter; `coeffs[ℓ]` is
/// `None` for fixed-coefficient layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub coeffs: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        let w: f64 = self.weights.iter().flatten().map(|v| v * v).sum();
        let c: f64 = self.coeffs.iter().flatten().flatten().map(|v| v * v).sum();
        (w + c).sqrt()
    }
}

impl Network {
    pub fn new(spec: NetworkSpec, ops: &GraphOperators) -> Result<Self> {
        spec.validate()?;
        let bases = spec
            .layers
            .iter()
            .map(|l| ops.basis(l))
            .collect::<Result<Vec<_>>>()?;
        let fixed = spec
            .layers
            .iter()
            .zip(&bases)
            .map(|(l, b)| (l.coeff_mode == CoeffMode::Fixed).then(|| b.assemble(&l.initial_coeffs())))
            .collect();
        Ok(Self { spec, bases, fixed })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.bases[0].n()
    }

    pub fn basis(&self, layer: usize) -> &Basis {
        &self.bases[layer]
    }

    fn check_input(&self, z: &Array2<f64>) -> Result<()> {
        let expected = (self.n(), self.spec.feature_dims[0]);
        if z.dim() != expected {
            return Err(Error::dims(format!("{expected:?}"), format!("{:?}", z.dim())));
        }
        Ok(())
    }

    /// Caches first-layer products when that is cheaper than recomputing
    /// `H (Z Θ)` each pass (fixed first layer, or learnable with `F(0) ≤ F(1)`).
    pub fn prepare(&self, z: Array2<f64>) -> Result<PreparedInput> {
        self.check_input(&z)?;
        let first = match &self.fixed[0] {
            Some(h) => FirstLayer::Filtered(h.dot(&z)),
            None if self.spec.feature_dims[0] <= self.spec.feature_dims[1] => {
                FirstLayer::Products(self.bases[0].apply_each(&z))
            }
            None => FirstLayer::Direct,
        };
        let sparse_z = matches!(first, FirstLayer::Direct)
            .then(|| SparseMatrix::from_dense(&z))
            .filter(SparseMatrix::is_sparse);
        Ok(PreparedInput { z, first, sparse_z })
    }

    /// Input without any cached products; every layer runs `H (X Θ)`.
    pub fn prepare_plain(&self, z: Array2<f64>) -> Result<PreparedInput> {
        self.check_input(&z)?;
        Ok(PreparedInput {
            z,
            first: FirstLayer::Direct,
            sparse_z: None,
        })
    }

    /// The layer operator `H(ℓ)` for the given coefficients.
    pub fn operator(&self, layer: usize, coeffs: &[f64]) -> Array2<f64> {
        match &self.fixed[layer] {
            Some(h) => h.clone(),
            None => self.bases[layer].assemble(coeffs),
        }
    }

    fn check_state(&self, state: &NetworkState) -> Result<()> {
        let dims = &self.spec.feature_dims;
        if state.weights.len() != self.spec.depth() || state.coeffs.len() != self.spec.depth() {
            return Err(Error::dims(self.spec.depth(), state.weights.len()));
        }
        for (l, (w, c)) in state.weights.iter().zip(&state.coeffs).enumerate() {
            if w.dim() != (dims[l], dims[l + 1]) {
                return Err(Error::dims(format!("Θ({}) {:?}", l + 1, (dims[l], dims[l + 1])), format!("{:?}", w.dim())));
            }
            if c.len() != self.bases[l].taps() {
                return Err(Error::dims(format!("h({}) of length {}", l + 1, self.bases[l].taps()), c.len()));
            }
        }
        Ok(())
    }
}

/// Runs `X(ℓ) = σ(H(ℓ) X(ℓ−1) Θ(ℓ))` for every layer, caching what the
/// backward pass needs, and returns `X(L)`.
pub fn forward(net: &Network, state: &mut NetworkState, input: &PreparedInput) -> Result<Array2<f64>> {
    net.check_state(state)?;
    state.cache = None;
    let depth = net.spec.depth();
    let mut layers: Vec<LayerCache> = Vec::with_capacity(depth);
    for l in 0..depth {
        let theta = &state.weights[l];
        let coeffs = &state.coeffs[l];
        let (mixed, pre) = match (l, &input.first) {
            (0, FirstLayer::Products(products)) => {
                let mut m = Array2::zeros(input.z.dim());
                for (p, &c) in products.iter().zip(coeffs) {
                    m.scaled_add(c, p);
                }
                let pre = m.dot(theta);
                (Mixed::Premixed { m }, pre)
            }
            (0, FirstLayer::Filtered(hz)) => {
                let pre = hz.dot(theta);
                (Mixed::Premixed { m: hz.clone() }, pre)
            }
            _ => {
                let v = match (l, &input.sparse_z) {
                    (0, Some(sz)) => sz.mul(theta),
                    (0, None) => input.z.dot(theta),
                    _ => layers[l - 1].output.dot(theta),
                };
                if net.fixed[l].is_none() && net.bases[l].prefers_terms(v.ncols()) {
                    let terms = net.bases[l].apply_each(&v);
                    let mut pre = Array2::zeros(v.dim());
                    for (t, &c) in terms.iter().zip(coeffs) {
                        pre.scaled_add(c, t);
                    }
                    layers.push(finish(net, l, pre, Mixed::Terms { terms })?);
                    continue;
                }
                let op = net.fixed[l].is_none().then(|| net.bases[l].assemble(coeffs));
                let pre = op.as_ref().or(net.fixed[l].as_ref()).expect("operator").dot(&v);
                (Mixed::Direct { v, op }, pre)
            }
        };
        layers.push(finish(net, l, pre, mixed)?);
    }
    let out = layers[depth - 1].output.clone();
    state.cache = Some(ForwardCache { layers });
    Ok(out)
}

fn finish(net: &Network, l: usize, mut pre: Array2<f64>, mixed: Mixed) -> Result<LayerCache> {
    if l + 1 == net.spec.depth() {
        if net.spec.head == OutputHead::Softmax {
            softmax_rows(&mut pre);
        }
    } else {
        net.spec.activation.apply(&mut pre);
    }
    if pre.iter().any(|v| !v.is_finite()) {
        return Err(Error::DivergedForward { layer: l + 1 });
    }
    Ok(LayerCache { mixed, output: pre })
}

/// Reverse-mode gradients of `loss` at the cached forward pass.
pub fn backward(net: &Network, state: &NetworkState, input: &PreparedInput, loss: &Loss<'_>) -> Result<Gradients> {
    let cache = state.cache.as_ref().ok_or(Error::MissingForwardCache)?;
    let depth = net.spec.depth();
    let mut grad = loss.gradient(&cache.layers[depth - 1].output);
    let mut weights = vec![Array2::zeros((0, 0)); depth];
    let mut coeffs = vec![None; depth];
    for l in (0..depth).rev() {
        let layer = &cache.layers[l];
        if l + 1 == depth {
            if net.spec.head == OutputHead::Softmax {
                softmax_backprop(&mut grad, &layer.output);
            }
        } else {
            net.spec.activation.backprop(&mut grad, &layer.output);
        }
        let learnable = net.fixed[l].is_none();
        let theta = &state.weights[l];
        match &layer.mixed {
            Mixed::Premixed { m } => {
                weights[l] = m.t().dot(&grad);
                if learnable {
                    let FirstLayer::Products(products) = &input.first else {
                        return Err(Error::MissingForwardCache);
                    };
                    let dm = grad.dot(&theta.t());
                    coeffs[l] = Some(
                        products
                            .iter()
                            .map(|p| Zip::from(p).and(&dm).fold(0.0, |acc, &a, &b| acc + a * b))
                            .collect(),
                    );
                }
            }
            Mixed::Terms { terms } => {
                coeffs[l] = Some(
                    terms
                        .iter()
                        .map(|t| Zip::from(t).and(&grad).fold(0.0, |acc, &a, &b| acc + a * b))
                        .collect(),
                );
                let dv = net.bases[l].combine(&state.coeffs[l], &grad);
                weights[l] = match (l, &input.sparse_z) {
                    (0, Some(sz)) => sz.t_mul(&dv),
                    (0, None) => input.z.t().dot(&dv),
                    _ => cache.layers[l - 1].output.t().dot(&dv),
                };
                if l > 0 {
                    grad = dv.dot(&theta.t());
                }
            }
            Mixed::Direct { v, op } => {
                let h = op.as_ref().or(net.fixed[l].as_ref()).expect("operator");
                let dv = h.t().dot(&grad);
                weights[l] = match (l, &input.sparse_z) {
                    (0, Some(sz)) => sz.t_mul(&dv),
                    (0, None) => input.z.t().dot(&dv),
                    _ => cache.layers[l - 1].output.t().dot(&dv),
                };
                if learnable {
                    let g = grad.dot(&v.t());
                    coeffs[l] = Some(net.bases[l].coeff_grad(&g));
                }
                if l > 0 {
                    grad = dv.dot(&theta.t());
                }
            }
        }
    }
    Ok(Gradients { weights, coeffs })
}

/// `dZ = P ⊙ (G − rowsum(G ⊙ P))` for `P = softmax(Z)`.
fn softmax_backprop(grad: &mut Array2<f64>, probs: &Array2<f64>) {
    let dots = (&*grad * probs).sum_axis(Axis(1));
    for ((mut g, p), d) in grad.rows_mut().into_iter().zip(probs.rows()).zip(dots) {
        Zip::from(&mut g).and(&p).for_each(|g, &p| *g = p * (*g - d));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_er, Graph, GsoChoice};
    use crate::neural::{init_state, Activation, HopScaling, LayerSpec, OperatorKind};
    use crate::neural::CoeffMode::{Fixed, Learnable};
    use ndarray::array;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn build(g: &Graph, spec: NetworkSpec) -> Network {
        let ops = GraphOperators::for_network(g, GsoChoice::ADJACENCY, &spec, HopScaling::None).unwrap();
        Network::new(spec, &ops).unwrap()
    }

    #[test]
    fn identity_network_passes_input_through() {
        let mut spec = NetworkSpec::uniform(vec![2, 2], OperatorKind::Neighborhood, 1, Fixed, Activation::Identity, OutputHead::Identity);
        spec.layers[0].init_coeffs = Some(vec![1.0]);
        let net = build(&path3(), spec);
        let mut state = NetworkState::new(vec![Array2::eye(2)], vec![vec![1.0]]);
        let z = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let out = forward(&net, &mut state, &net.prepare(z.clone()).unwrap()).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn two_layer_relu_on_path_by_hand() {
        let spec = NetworkSpec {
            feature_dims: vec![1, 2, 1],
            layers: vec![
                LayerSpec::new(OperatorKind::Neighborhood, 2, Learnable),
                LayerSpec::new(OperatorKind::Neighborhood, 3, Learnable),
            ],
            activation: Activation::Relu,
            head: OutputHead::Identity,
        };
        let net = build(&path3(), spec);
        // H1 = I + A(1), H2 = A(2)
        let mut state = NetworkState::new(
            vec![array![[1.0, -1.0]], array![[1.0], [3.0]]],
            vec![vec![1.0, 1.0], vec![0.0, 0.0, 1.0]],
        );
        let z = array![[1.0], [-1.0], [2.0]];
        // H1 z = [0, 2, 1]; relu(H1 z Θ1) = [[0,0],[2,0],[1,0]]; ·Θ2 = [0, 2, 1]; A(2)· = [1, 0, 0]
        let expected = array![[1.0], [0.0], [0.0]];
        for input in [net.prepare(z.clone()).unwrap(), net.prepare_plain(z.clone()).unwrap()] {
            assert_eq!(forward(&net, &mut state, &input).unwrap(), expected);
        }
    }

    #[test]
    fn softmax_head_rows_on_simplex() {
        let g = generate_er(7, 0.4, 2).unwrap();
        let spec = NetworkSpec::uniform(vec![3, 4, 5], OperatorKind::Classical, 3, Learnable, Activation::Relu, OutputHead::Softmax);
        let net = build(&g, spec);
        let mut state = init_state(&net, 9);
        let z = Array2::from_shape_fn((7, 3), |(i, j)| (i as f64 - 3.0) * 0.7 + j as f64);
        let out = forward(&net, &mut state, &net.prepare(z).unwrap()).unwrap();
        for row in out.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn cached_first_layer_matches_plain_path() {
        let g = generate_er(8, 0.35, 4).unwrap();
        let target = Array2::from_shape_fn((8, 2), |(i, j)| ((i + 2 * j) % 3) as f64 - 1.0);
        for op in [OperatorKind::Adjacency, OperatorKind::Classical, OperatorKind::Neighborhood] {
            // narrow dense input (cached products) and wide sparse input (direct)
            let dense = Array2::from_shape_fn((8, 2), |(i, j)| (i as f64 * 0.3 - 1.0) * (j as f64 + 1.0));
            let sparse = Array2::from_shape_fn((8, 6), |(i, j)| if (i + j) % 5 == 0 { 1.0 } else { 0.0 });
            for (mode, z) in [(Fixed, &dense), (Learnable, &dense), (Learnable, &sparse)] {
                let z = z.clone();
                let spec = NetworkSpec::uniform(vec![z.ncols(), 5, 2], op, 3, mode, Activation::Tanh, OutputHead::Identity);
                let net = build(&g, spec);
                let loss = Loss::SquaredError { target: &target };
                let mut a = init_state(&net, 1);
                let mut b = a.clone();
                let fast = net.prepare(z.clone()).unwrap();
                let plain = net.prepare_plain(z).unwrap();
                let out_a = forward(&net, &mut a, &fast).unwrap();
                let out_b = forward(&net, &mut b, &plain).unwrap();
                assert!((&out_a - &out_b).mapv(f64::abs).sum() < 1e-12);
                let ga = backward(&net, &a, &fast, &loss).unwrap();
                let gb = backward(&net, &b, &plain, &loss).unwrap();
                for (x, y) in ga.weights.iter().zip(&gb.weights) {
                    assert!((x - y).mapv(f64::abs).sum() < 1e-10);
                }
                for (x, y) in ga.coeffs.iter().zip(&gb.coeffs) {
                    match (x, y) {
                        (Some(x), Some(y)) => assert!(x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-10)),
                        (None, None) => {}
                        _ => panic!("coefficient gradients differ in presence"),
                    }
                }
            }
        }
    }

    #[test]
    fn backward_needs_forward() {
        let net = build(&path3(), NetworkSpec::uniform(vec![1, 1], OperatorKind::Adjacency, 1, Fixed, Activation::Relu, OutputHead::Identity));
        let state = init_state(&net, 0);
        let y = Array2::zeros((3, 1));
        let input = net.prepare(Array2::ones((3, 1))).unwrap();
        assert!(matches!(
            backward(&net, &state, &input, &Loss::SquaredError { target: &y }),
            Err(Error::MissingForwardCache)
        ));
    }

    #[test]
    fn non_finite_forward_names_layer() {
        let net = build(&path3(), NetworkSpec::uniform(vec![1, 1, 1], OperatorKind::Adjacency, 1, Fixed, Activation::Identity, OutputHead::Identity));
        let mut state = NetworkState::new(vec![array![[1.0]], array![[f64::INFINITY]]], vec![vec![1.0], vec![1.0]]);
        let input = net.prepare(Array2::ones((3, 1))).unwrap();
        assert!(matches!(forward(&net, &mut state, &input), Err(Error::DivergedForward { layer: 2 })));
    }

    #[test]
    fn rejects_mismatched_input() {
        let net = build(&path3(), NetworkSpec::uniform(vec![2, 1], OperatorKind::Adjacency, 1, Fixed, Activation::Relu, OutputHead::Identity));
        assert!(net.prepare(Array2::zeros((3, 3))).is_err());
        assert!(net.prepare(Array2::zeros((4, 2))).is_err());
    }
}
