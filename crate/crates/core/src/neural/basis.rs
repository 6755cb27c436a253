use std::sync::Arc;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{LayerSpec, OperatorKind};
use crate::error::{Error, Result};
use crate::filters::powers;
use crate::graph::{bfs_distances, gso, DistanceMatrix, Graph, GsoChoice, PowerIteration, UNREACHABLE};
use crate::graph::spectral_radius;
use super::sparse::SparseMatrix;

/// Rescaling applied to each k-hop matrix inside a network layer.
///
/// Scaling `A(k)` by `1/ρ(A(k))` does not change the set of operators a
/// learnable layer can express (the coefficients absorb it); it only evens
/// out the curvature gradient descent sees across taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopScaling {
    #[default]
    None,
    /// Each `A(k)` divided by its own spectral radius.
    SpectralRadius,
    /// All `A(k)` divided by the spectral radius of their sum.
    Joint,
}

/// A layer's operator family `{B_0, …, B_{K-1}}`; the layer operator is `Σ h_k B_k`.
/// Every `B_k` is symmetric.
#[derive(Debug, Clone)]
pub enum Basis {
    /// Dense matrices `mats[start..start + taps]` (powers of the shift operator).
    Powers {
        mats: Arc<Vec<Array2<f64>>>,
        start: usize,
        taps: usize,
        shift: Arc<SparseMatrix>,
    },
    /// `scales[k] · A(k)` read from a hop-distance matrix.
    Hops {
        dist: Arc<DistanceMatrix>,
        scales: Vec<f64>,
        pairs: Arc<HopPairs>,
    },
}

/// Node pairs closer than `K` hops, grouped by row, with their distance.
#[derive(Debug, Clone)]
pub struct HopPairs {
    indptr: Vec<usize>,
    cols: Vec<u32>,
    hops: Vec<u8>,
}

impl HopPairs {
    fn new(dist: &DistanceMatrix, taps: usize) -> Self {
        let mut indptr = vec![0];
        let (mut cols, mut hops) = (Vec::new(), Vec::new());
        for i in 0..dist.n() {
            for (j, &d) in dist.row(i).iter().enumerate() {
                if (d as usize) < taps && d != UNREACHABLE {
                    cols.push(j as u32);
                    hops.push(d as u8);
                }
            }
            indptr.push(cols.len());
        }
        Self { indptr, cols, hops }
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.cols[r.clone()].iter().zip(&self.hops[r]).map(|(&j, &d)| (j as usize, d as usize))
    }
}

impl Basis {
    pub fn taps(&self) -> usize {
        match self {
            Basis::Powers { taps, .. } => *taps,
            Basis::Hops { scales, .. } => scales.len(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Basis::Powers { mats, .. } => mats[0].nrows(),
            Basis::Hops { dist, .. } => dist.n(),
        }
    }

    pub fn assemble(&self, coeffs: &[f64]) -> Array2<f64> {
        debug_assert_eq!(coeffs.len(), self.taps());
        match self {
            Basis::Powers { mats, start, taps, .. } => {
                let mut h = Array2::zeros(mats[0].dim());
                for (m, &c) in mats[*start..start + taps].iter().zip(coeffs) {
                    h.scaled_add(c, m);
                }
                h
            }
            Basis::Hops { dist, scales, .. } => {
                let weights: Vec<f64> = coeffs.iter().zip(scales).map(|(c, s)| c * s).collect();
                let n = dist.n();
                let mut h = Array2::zeros((n, n));
                for (out, &d) in h.iter_mut().zip(dist.as_slice()) {
                    if let Some(&w) = weights.get(d as usize).filter(|_| d != UNREACHABLE) {
                        *out = w;
                    }
                }
                h
            }
        }
    }

    /// `∂/∂h_k ⟨G, Σ h_j B_j⟩ = ⟨G, B_k⟩` for every tap.
    pub fn coeff_grad(&self, g: &Array2<f64>) -> Vec<f64> {
        match self {
            Basis::Powers { mats, start, taps, .. } => mats[*start..start + taps]
                .iter()
                .map(|m| Zip::from(m).and(g).fold(0.0, |acc, &a, &b| acc + a * b))
                .collect(),
            Basis::Hops { dist, scales, .. } => {
                let k = scales.len();
                let mut acc = vec![0.0; k];
                let g = g.as_standard_layout();
                for (&v, &d) in g.iter().zip(dist.as_slice()) {
                    if (d as usize) < k && d != UNREACHABLE {
                        acc[d as usize] += v;
                    }
                }
                acc.iter().zip(scales).map(|(a, s)| a * s).collect()
            }
        }
    }

    /// `[B_0 x, …, B_{K-1} x]`.
    pub fn apply_each(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        match self {
            Basis::Powers { mats, start, taps, shift } => {
                if !shift.is_sparse() {
                    return mats[*start..start + taps].iter().map(|m| m.dot(x)).collect();
                }
                let mut out = Vec::with_capacity(*taps);
                let mut cur = x.to_owned();
                for k in 0..start + taps {
                    if k > 0 {
                        cur = shift.mul(&cur);
                    }
                    if k >= *start {
                        out.push(cur.clone());
                    }
                }
                out
            }
            Basis::Hops { scales, pairs, .. } => {
                let k = scales.len();
                let (n, f) = x.dim();
                let x = x.as_standard_layout();
                let xs = x.as_slice().expect("standard layout");
                let mut out = vec![vec![0.0; n * f]; k];
                for i in 0..n {
                    for (j, d) in pairs.row(i) {
                        let dst = &mut out[d][i * f..(i + 1) * f];
                        for (o, &v) in dst.iter_mut().zip(&xs[j * f..(j + 1) * f]) {
                            *o += v;
                        }
                    }
                }
                out.into_iter()
                    .zip(scales)
                    .map(|(mut m, &s)| {
                        m.iter_mut().for_each(|v| *v *= s);
                        Array2::from_shape_vec((n, f), m).expect("shape")
                    })
                    .collect()
            }
        }
    }

    /// `(Σ h_k B_k) x` without forming the operator.
    pub fn combine(&self, coeffs: &[f64], x: &Array2<f64>) -> Array2<f64> {
        match self {
            Basis::Powers { mats, start, taps, shift } => {
                if !shift.is_sparse() {
                    let mut out = Array2::zeros((mats[0].nrows(), x.ncols()));
                    for (m, &c) in mats[*start..start + taps].iter().zip(coeffs) {
                        ndarray::linalg::general_mat_mul(c, m, x, 1.0, &mut out);
                    }
                    return out;
                }
                let mut acc = x * coeffs[taps - 1];
                for &c in coeffs[..taps - 1].iter().rev() {
                    acc = shift.mul(&acc);
                    acc.scaled_add(c, x);
                }
                for _ in 0..*start {
                    acc = shift.mul(&acc);
                }
                acc
            }
            Basis::Hops { scales, pairs, .. } => {
                let weights: Vec<f64> = coeffs.iter().zip(scales).map(|(c, s)| c * s).collect();
                let (n, f) = x.dim();
                let x = x.as_standard_layout();
                let xs = x.as_slice().expect("standard layout");
                let mut out = vec![0.0; n * f];
                for i in 0..n {
                    let dst = &mut out[i * f..(i + 1) * f];
                    for (j, d) in pairs.row(i) {
                        let w = weights[d];
                        for (o, &v) in dst.iter_mut().zip(&xs[j * f..(j + 1) * f]) {
                            *o += w * v;
                        }
                    }
                }
                Array2::from_shape_vec((n, f), out).expect("shape")
            }
        }
    }

    /// Whether a layer producing `cols` columns is cheaper to evaluate term by
    /// term (`Σ h_k (B_k V)`) than through the assembled operator.
    pub(crate) fn prefers_terms(&self, cols: usize) -> bool {
        match self {
            Basis::Powers { shift, .. } => cols == 1 || shift.is_sparse(),
            Basis::Hops { .. } => true,
        }
    }
}

/// Per-graph operator inputs shared by all layers of a network: powers of
/// the shift operator and hop distances.
#[derive(Debug, Clone)]
pub struct GraphOperators {
    powers: Arc<Vec<Array2<f64>>>,
    shift: Arc<SparseMatrix>,
    hops: Arc<DistanceMatrix>,
    hop_scales: Vec<f64>,
}

impl GraphOperators {
    /// Precomputes `S^0 … S^{classical_taps-1}` (at least `S^1`) and, when
    /// `hop_taps > 0`, the hop distances plus per-hop scales.
    pub fn new(
        g: &Graph,
        gso_choice: GsoChoice,
        classical_taps: usize,
        hop_taps: usize,
        hop_scaling: HopScaling,
    ) -> Result<Self> {
        let s = gso(g, gso_choice)?;
        let powers = powers(&s, classical_taps.max(2))?;
        let hops = if hop_taps > 0 {
            bfs_distances(g)
        } else {
            DistanceMatrix::from_raw(0, Vec::new())?
        };
        let hop_scales = match hop_scaling {
            HopScaling::None => vec![1.0; hop_taps],
            HopScaling::SpectralRadius => {
                let pi = PowerIteration {
                    tolerance: 1e-7,
                    max_iterations: 20_000,
                };
                (0..hop_taps)
                    .map(|k| {
                        let m = crate::filters::ngf_from_distances(&hops, &one_hot(k, k + 1));
                        let rho = pi.run(&m)?;
                        Ok(if rho > 0.0 { 1.0 / rho } else { 1.0 })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            HopScaling::Joint => {
                let rho = spectral_radius(&crate::filters::ngf_from_distances(&hops, &vec![1.0; hop_taps]))?;
                vec![if rho > 0.0 { 1.0 / rho } else { 1.0 }; hop_taps]
            }
        };
        Ok(Self {
            shift: Arc::new(SparseMatrix::from_dense(&powers[1])),
            powers: Arc::new(powers),
            hops: Arc::new(hops),
            hop_scales,
        })
    }

    /// Operators sized for every layer of `spec`.
    pub fn for_network(g: &Graph, gso_choice: GsoChoice, spec: &super::NetworkSpec, hop_scaling: HopScaling) -> Result<Self> {
        let taps_of = |kind| {
            spec.layers
                .iter()
                .filter(|l| l.operator == kind)
                .map(|l| l.taps)
                .max()
                .unwrap_or(0)
        };
        Self::new(
            g,
            gso_choice,
            taps_of(OperatorKind::Classical),
            taps_of(OperatorKind::Neighborhood),
            hop_scaling,
        )
    }

    pub fn n(&self) -> usize {
        self.powers[0].nrows()
    }

    pub fn shift(&self) -> &Array2<f64> {
        &self.powers[1]
    }

    pub fn hop_scales(&self) -> &[f64] {
        &self.hop_scales
    }

    pub fn basis(&self, layer: &LayerSpec) -> Result<Basis> {
        let k = layer.taps;
        match layer.operator {
            OperatorKind::Adjacency => Ok(Basis::Powers {
                mats: Arc::clone(&self.powers),
                start: 1,
                taps: 1,
                shift: Arc::clone(&self.shift),
            }),
            OperatorKind::Classical => {
                if k > self.powers.len() {
                    return Err(Error::invalid(format!(
                        "layer needs {k} powers of the shift operator, only {} precomputed",
                        self.powers.len()
                    )));
                }
                Ok(Basis::Powers {
                    mats: Arc::clone(&self.powers),
                    start: 0,
                    taps: k,
                    shift: Arc::clone(&self.shift),
                })
            }
            OperatorKind::Neighborhood => {
                if k > 256 {
                    return Err(Error::invalid(format!("at most 256 hop matrices per layer, got {k}")));
                }
                if k > self.hop_scales.len() {
                    return Err(Error::invalid(format!(
                        "layer needs {k} hop matrices, only {} precomputed",
                        self.hop_scales.len()
                    )));
                }
                Ok(Basis::Hops {
                    dist: Arc::clone(&self.hops),
                    scales: self.hop_scales[..k].to_vec(),
                    pairs: Arc::new(HopPairs::new(&self.hops, k)),
                })
            }
        }
    }
}

fn one_hot(k: usize, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[k] = 1.0;
    v
}
