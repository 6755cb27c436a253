//! Polynomial graph filters `H = Σ h_k S^k` and neighborhood graph filters
//! `H = Σ h_k A(k)`, where `A(k)` marks node pairs exactly `k` hops apart.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{gso, DistanceMatrix, Graph, GsoChoice, KHopStack, UNREACHABLE};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Classical,
    Neighborhood,
}

impl FilterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Classical => "classical",
            FilterKind::Neighborhood => "neighborhood",
        }
    }
}

/// Filter taps `h_0 … h_{K-1}` plus the shift operator used by classical filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub gso: GsoChoice,
}

impl FilterSpec {
    pub fn classical(coeffs: Vec<f64>, gso: GsoChoice) -> Self {
        Self {
            kind: FilterKind::Classical,
            coeffs,
            gso,
        }
    }

    pub fn neighborhood(coeffs: Vec<f64>) -> Self {
        Self {
            kind: FilterKind::Neighborhood,
            coeffs,
            gso: GsoChoice::default(),
        }
    }

    pub fn taps(&self) -> usize {
        self.coeffs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.is_empty() {
            return Err(Error::invalid("a filter needs at least one tap"));
        }
        if let Some(k) = self.coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("coefficient h_{k} is not finite")));
        }
        Ok(())
    }
}

/// A realized filter together with the [`FilterSpec`] it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterMatrix {
    matrix: Array2<f64>,
    spec: FilterSpec,
}

impl FilterMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.matrix
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Horner evaluation `H = (…(h_{K-1} S + h_{K-2} I) S + …) + h_0 I`.
///
/// Fails with [`Error::FilterOverflow`] naming the highest power present in
/// the accumulator when a non-finite entry appears.
pub fn polynomial(s: &Array2<f64>, coeffs: &[f64]) -> Result<Array2<f64>> {
    let n = s.nrows();
    let k = coeffs.len();
    let mut h = Array2::eye(n) * coeffs[k - 1];
    for (step, &c) in coeffs[..k - 1].iter().rev().enumerate() {
        h = s.dot(&h);
        h.diag_mut().mapv_inplace(|d| d + c);
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::FilterOverflow { power: step + 1 });
        }
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::FilterOverflow { power: 0 });
    }
    Ok(h)
}

/// `[S^0, S^1, …, S^{K-1}]` by repeated multiplication.
pub fn powers(s: &Array2<f64>, k: usize) -> Result<Vec<Array2<f64>>> {
    let mut out: Vec<Array2<f64>> = Vec::with_capacity(k);
    for power in 0..k {
        let next = match out.last() {
            None => Array2::eye(s.nrows()),
            Some(prev) => prev.dot(s),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::FilterOverflow { power });
        }
        out.push(next);
    }
    Ok(out)
}

pub fn build_classical(g: &Graph, spec: &FilterSpec) -> Result<FilterMatrix> {
    if spec.kind != FilterKind::Classical {
        return Err(Error::invalid("build_classical needs a classical filter spec"));
    }
    spec.validate()?;
    let s = gso(g, spec.gso)?;
    Ok(FilterMatrix {
        matrix: polynomial(&s, &spec.coeffs)?,
        spec: spec.clone(),
    })
}

/// Dense `Σ_k h_k A(k)` read straight off the hop distances:
/// entry `(i, j)` is `h[d(i, j)]`, or 0 when the pair is farther than `K−1` hops.
pub fn ngf_from_distances(dist: &DistanceMatrix, coeffs: &[f64]) -> Array2<f64> {
    let n = dist.n();
    let k = coeffs.len();
    let mut h = Array2::zeros((n, n));
    for (out, &d) in h.iter_mut().zip(dist.as_slice()) {
        if d != UNREACHABLE && (d as usize) < k {
            *out = coeffs[d as usize];
        }
    }
    h
}

pub fn build_ngf(stack: &KHopStack, coeffs: &[f64]) -> Result<FilterMatrix> {
    let spec = FilterSpec::neighborhood(coeffs.to_vec());
    spec.validate()?;
    if coeffs.len() > stack.len() {
        return Err(Error::invalid(format!(
            "{} taps requested but the k-hop stack only holds {} matrices",
            coeffs.len(),
            stack.len()
        )));
    }
    Ok(FilterMatrix {
        matrix: ngf_from_distances(stack.distances(), coeffs),
        spec,
    })
}

/// Filters each column of `x` as an independent graph signal.
pub fn apply(f: &FilterMatrix, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.nrows() != f.n() {
        return Err(Error::dims(format!("{} rows", f.n()), format!("{} rows", x.nrows())));
    }
    Ok(f.matrix.dot(x))
}

/// `‖H̄ − H‖²_F / ‖H‖²_F`.
pub fn normalized_error(reference: &FilterMatrix, perturbed: &FilterMatrix) -> Result<f64> {
    normalized_error_dense(&reference.matrix, &perturbed.matrix)
}

pub fn normalized_error_dense(reference: &Array2<f64>, perturbed: &Array2<f64>) -> Result<f64> {
    if reference.dim() != perturbed.dim() {
        return Err(Error::dims(format!("{:?}", reference.dim()), format!("{:?}", perturbed.dim())));
    }
    let norm: f64 = reference.iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let diff: f64 = reference
        .iter()
        .zip(perturbed)
        .map(|(a, b)| (b - a) * (b - a))
        .sum();
    Ok(diff / norm)
}

/// `k` i.i.d. uniform draws on (0, 1], scaled to sum to one.
pub fn random_coeffs(k: usize, seed: u64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("need at least one coefficient"));
    }
    let mut rng = seeded(seed);
    let raw: Vec<f64> = (0..k).map(|_| 1.0 - rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Single-line CSV; values use the shortest representation that round-trips.
pub fn format_coeffs(coeffs: &[f64]) -> String {
    coeffs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_coeffs(line: &str) -> Result<Vec<f64>> {
    let line = line.trim();
    if line.is_empty() {
        return Err(Error::invalid("empty coefficient list"));
    }
    line.split(',')
        .map(|field| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad coefficient {field:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_er, khop_stack};
    use ndarray::array;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn classical_small_cases() {
        let g = path3();
        let id = build_classical(&g, &FilterSpec::classical(vec![1.0], GsoChoice::ADJACENCY)).unwrap();
        assert_eq!(id.matrix(), &Array2::<f64>::eye(3));
        let a = build_classical(&g, &FilterSpec::classical(vec![0.0, 1.0], GsoChoice::ADJACENCY)).unwrap();
        assert_eq!(a.matrix(), &g.adjacency());
        let a2 = build_classical(&g, &FilterSpec::classical(vec![0.0, 0.0, 1.0], GsoChoice::ADJACENCY)).unwrap();
        assert_eq!(a2.matrix(), &array![[1.0, 0.0, 1.0], [0.0, 2.0, 0.0], [1.0, 0.0, 1.0]]);
    }

    #[test]
    fn classical_overflow_names_power() {
        let g = generate_er(20, 1.0, 0).unwrap();
        let mut h = vec![0.0; 400];
        h[399] = 1.0;
        match build_classical(&g, &FilterSpec::classical(h, GsoChoice::ADJACENCY)) {
            // 19^k overflows f64 once k ≥ 241
            Err(Error::FilterOverflow { power }) => assert!((230..=250).contains(&power), "{power}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            powers(&g.adjacency(), 400),
            Err(Error::FilterOverflow { power }) if (230..=250).contains(&power)
        ));
    }

    #[test]
    fn ngf_small_cases() {
        let s = khop_stack(&path3(), 2);
        let f = build_ngf(&s, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.matrix(), &array![[1.0, 2.0, 3.0], [2.0, 1.0, 2.0], [3.0, 2.0, 1.0]]);
        assert_eq!(build_ngf(&s, &[2.5]).unwrap().matrix(), &(Array2::<f64>::eye(3) * 2.5));
        let c = build_ngf(&s, &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(c.matrix(), &Array2::from_elem((3, 3), 0.5));
        assert!(build_ngf(&s, &[1.0; 4]).is_err());
    }

    #[test]
    fn ngf_matches_explicit_sum_of_hop_matrices() {
        let g = generate_er(25, 0.15, 3).unwrap();
        let s = khop_stack(&g, 5);
        let h = [0.3, -1.0, 2.0, 0.25, 7.0, -0.5];
        let mut explicit = Array2::<f64>::zeros((25, 25));
        for (k, &c) in h.iter().enumerate() {
            explicit = explicit + s.layer(k).to_dense() * c;
        }
        assert_eq!(build_ngf(&s, &h).unwrap().matrix(), &explicit);
    }

    #[test]
    fn apply_shifts_and_checks_dims() {
        let s = khop_stack(&path3(), 1);
        let f = build_ngf(&s, &[0.0, 1.0]).unwrap();
        let y = apply(&f, &array![[1.0], [0.0], [0.0]]).unwrap();
        assert_eq!(y, array![[0.0], [1.0], [0.0]]);
        assert_eq!(apply(&f, &Array2::zeros((3, 2))).unwrap(), Array2::<f64>::zeros((3, 2)));
        assert!(apply(&f, &Array2::zeros((4, 1))).is_err());
    }

    #[test]
    fn normalized_error_cases() {
        let s = khop_stack(&path3(), 2);
        let f = build_ngf(&s, &[1.0, 2.0]).unwrap();
        assert_eq!(normalized_error(&f, &f).unwrap(), 0.0);
        let double = build_ngf(&s, &[2.0, 4.0]).unwrap();
        assert!((normalized_error(&f, &double).unwrap() - 1.0).abs() < 1e-15);
        let zero = build_ngf(&s, &[0.0]).unwrap();
        assert!(matches!(normalized_error(&zero, &f), Err(Error::ZeroNormReference)));
    }

    #[test]
    fn random_coeffs_are_normalized() {
        assert_eq!(random_coeffs(1, 5).unwrap(), vec![1.0]);
        for seed in 0..50 {
            let h = random_coeffs(7, seed).unwrap();
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(h.iter().all(|&v| v > 0.0 && v <= 1.0));
        }
        assert!(random_coeffs(0, 1).is_err());
    }

    #[test]
    fn coefficient_csv() {
        let h = vec![0.1, -2.5, 1e-300, 1.0 / 3.0];
        assert_eq!(parse_coeffs(&format_coeffs(&h)).unwrap(), h);
        assert!(parse_coeffs("1,,2").is_err());
        assert!(parse_coeffs("").is_err());
    }
}
