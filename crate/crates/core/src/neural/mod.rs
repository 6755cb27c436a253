//! Feed-forward graph networks of the form `X(ℓ) = σ(H(ℓ) X(ℓ−1) Θ(ℓ))`,
//! where `H(ℓ)` is the adjacency/shift operator, a classical polynomial
//! filter or a neighborhood filter, with reverse-mode gradients and a plain
//! full-batch gradient-descent trainer.

mod basis;
mod checkpoint;
mod network;
mod sparse;
mod train;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use basis::{Basis, GraphOperators, HopPairs, HopScaling};
pub use checkpoint::Checkpoint;
pub use network::{backward, forward, Gradients, Network, NetworkState, PreparedInput};
pub use sparse::SparseMatrix;
pub use train::{init_state, train, train_with, Control, TrainConfig, TrainOutcome};

/// Graph-aware linear operator used by a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// The shift operator itself, one hop per layer.
    Adjacency,
    /// `Σ h_k S^k`.
    Classical,
    /// `Σ h_k A(k)` over k-hop adjacency matrices.
    Neighborhood,
}

impl OperatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Adjacency => "adjacency",
            OperatorKind::Classical => "classical",
            OperatorKind::Neighborhood => "neighborhood",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoeffMode {
    Fixed,
    Learnable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub(crate) fn apply(self, x: &mut Array2<f64>) {
        match self {
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by σ'(pre), using the activation output where cheaper.
    /// ReLU's subgradient at zero is zero.
    pub(crate) fn backprop(self, grad: &mut Array2<f64>, out: &Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(out, |g, &y| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => grad.zip_mut_with(out, |g, &y| *g *= 1.0 - y * y),
            Activation::Identity => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputHead {
    Identity,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub operator: OperatorKind,
    /// Number of filter taps K; must be 1 for the adjacency operator.
    pub taps: usize,
    pub coeff_mode: CoeffMode,
    /// Coefficients for fixed layers (or the starting point for learnable
    /// ones). Defaults to `1/K` each, or `[1]` for the adjacency operator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_coeffs: Option<Vec<f64>>,
}

impl LayerSpec {
    pub fn new(operator: OperatorKind, taps: usize, coeff_mode: CoeffMode) -> Self {
        Self {
            operator,
            taps,
            coeff_mode,
            init_coeffs: None,
        }
    }

    pub fn adjacency() -> Self {
        Self::new(OperatorKind::Adjacency, 1, CoeffMode::Fixed)
    }

    pub(crate) fn initial_coeffs(&self) -> Vec<f64> {
        match (&self.init_coeffs, self.operator) {
            (Some(c), _) => c.clone(),
            (None, OperatorKind::Adjacency) => vec![1.0],
            (None, _) => vec![1.0 / self.taps as f64; self.taps],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `[F(0), …, F(L)]`.
    pub feature_dims: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    /// σ for every layer but the last.
    pub activation: Activation,
    /// Non-linearity of the last layer.
    pub head: OutputHead,
}

impl NetworkSpec {
    /// Same operator, tap count and coefficient mode in every layer.
    pub fn uniform(
        feature_dims: Vec<usize>,
        operator: OperatorKind,
        taps: usize,
        coeff_mode: CoeffMode,
        activation: Activation,
        head: OutputHead,
    ) -> Self {
        let taps = if operator == OperatorKind::Adjacency { 1 } else { taps };
        let layers = (1..feature_dims.len())
            .map(|_| LayerSpec::new(operator, taps, coeff_mode))
            .collect();
        Self {
            feature_dims,
            layers,
            activation,
            head,
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        if self.feature_dims.len() != self.layers.len() + 1 {
            return Err(Error::invalid(format!(
                "{} layers need {} feature dimensions, got {}",
                self.layers.len(),
                self.layers.len() + 1,
                self.feature_dims.len()
            )));
        }
        if self.feature_dims.contains(&0) {
            return Err(Error::invalid("feature dimensions must be positive"));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.taps == 0 {
                return Err(Error::invalid(format!("layer {l} needs at least one tap")));
            }
            if layer.operator == OperatorKind::Adjacency && layer.taps != 1 {
                return Err(Error::invalid(format!("adjacency layer {l} must have exactly one tap")));
            }
            if let Some(c) = &layer.init_coeffs {
                if c.len() != layer.taps || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!(
                        "layer {l}: init_coeffs must hold {} finite values",
                        layer.taps
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Training objective.
#[derive(Debug, Clone, Copy)]
pub enum Loss<'a> {
    /// `‖Y − Ŷ‖²_F` summed over all nodes.
    SquaredError { target: &'a Array2<f64> },
    /// Mean negative log-likelihood over the masked nodes.
    CrossEntropy { labels: &'a [usize], mask: &'a [usize] },
}

/// Probability floor applied before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// `‖y − ŷ‖²₂`.
pub fn loss_mse(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    if y_hat.len() != y.len() {
        return Err(Error::dims(y.len(), y_hat.len()));
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum())
}

pub fn loss_cross_entropy(probs: &Array2<f64>, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if labels.len() != probs.nrows() {
        return Err(Error::dims(probs.nrows(), labels.len()));
    }
    let mut total = 0.0;
    for &node in mask {
        let label = labels[node];
        if label >= probs.ncols() {
            return Err(Error::invalid(format!("label {label} out of range for {} classes", probs.ncols())));
        }
        total -= probs[[node, label]].max(PROB_FLOOR).ln();
    }
    Ok(total / mask.len() as f64)
}

impl Loss<'_> {
    pub fn value(&self, out: &Array2<f64>) -> Result<f64> {
        match *self {
            Loss::SquaredError { target } => {
                if target.dim() != out.dim() {
                    return Err(Error::dims(format!("{:?}", out.dim()), format!("{:?}", target.dim())));
                }
                Ok(out.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum())
            }
            Loss::CrossEntropy { labels, mask } => loss_cross_entropy(out, labels, mask),
        }
    }

    /// dL/d(network output).
    pub(crate) fn gradient(&self, out: &Array2<f64>) -> Array2<f64> {
        match *self {
            Loss::SquaredError { target } => (out - target) * 2.0,
            Loss::CrossEntropy { labels, mask } => {
                let mut g = Array2::zeros(out.dim());
                let scale = 1.0 / mask.len() as f64;
                for &node in mask {
                    let p = out[[node, labels[node]]];
                    if p > PROB_FLOOR {
                        g[[node, labels[node]]] -= scale / p;
                    }
                }
                g
            }
        }
    }
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Index of the largest entry of each row.
pub fn argmax_rows(x: &Array2<f64>) -> Vec<usize> {
    x.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}
