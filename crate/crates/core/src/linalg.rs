//! Small dense/sparse helpers used on the hot path of the dynamics.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Compressed-row sparse matrix. The two-spin Hamiltonian has O(d²) nonzeros
/// out of d⁴, so repeated application to coherent states is done here rather
/// than through dense products.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &DMatrix<Complex64>, drop_below: f64) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let dim = m.nrows();
        let mut row_start = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..dim {
            row_start.push(cols.len());
            for j in 0..dim {
                let v = m[(i, j)];
                if v.norm() > drop_below {
                    cols.push(j);
                    vals.push(v);
                }
            }
        }
        row_start.push(cols.len());
        SparseMatrix {
            dim,
            row_start,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// out = (A - shift·I) x
    pub fn apply_shifted(&self, x: &[Complex64], shift: f64, out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = -x[i] * shift;
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[i] = acc;
        }
    }

    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        self.apply_shifted(x, 0.0, out)
    }
}

/// ⟨a|b⟩ with the first argument conjugated.
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Largest |A_ij - conj(A_ji)| relative to the largest entry (0 for a zero matrix).
pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}
