use ndarray::Array2;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &Array2<f64>) -> Self {
        let mut indptr = vec![0];
        let (mut indices, mut values) = (Vec::new(), Vec::new());
        for row in m.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            cols: m.ncols(),
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// At most a quarter of the entries are non-zero.
    pub fn is_sparse(&self) -> bool {
        4 * self.nnz() <= self.rows() * self.cols
    }

    /// `M x`.
    pub fn mul(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.cols, "inner dimensions differ");
        let f = x.ncols();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.rows() * f];
        if f > 0 {
            for (i, dst) in out.chunks_mut(f).enumerate() {
                for p in self.indptr[i]..self.indptr[i + 1] {
                    let (j, w) = (self.indices[p], self.values[p]);
                    for (o, &v) in dst.iter_mut().zip(&xs[j * f..(j + 1) * f]) {
                        *o += w * v;
                    }
                }
            }
        }
        Array2::from_shape_vec((self.rows(), f), out).expect("shape")
    }

    /// `Mᵀ x`.
    pub fn t_mul(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.rows(), "inner dimensions differ");
        let f = x.ncols();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.cols * f];
        for i in 0..self.rows() {
            let src = &xs[i * f..(i + 1) * f];
            for p in self.indptr[i]..self.indptr[i + 1] {
                let (j, w) = (self.indices[p], self.values[p]);
                for (o, &v) in out[j * f..(j + 1) * f].iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
        Array2::from_shape_vec((self.cols, f), out).expect("shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn products_match_dense() {
        let m = array![[0.0, 2.0, 0.0], [1.5, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, -1.0, 3.0]];
        let s = SparseMatrix::from_dense(&m);
        assert_eq!((s.rows(), s.cols(), s.nnz()), (4, 3, 4));
        let x = array![[1.0, -1.0], [0.5, 2.0], [3.0, 0.25]];
        assert_eq!(s.mul(&x), m.dot(&x));
        let y = array![[1.0], [2.0], [-1.0], [0.5]];
        assert_eq!(s.t_mul(&y), m.t().dot(&y));
    }
}
