use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::grid::Grid2D;
use crate::error::{Error, Result};

/// Relative asymmetry accepted by the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Real sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    #[inline]
    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in lo..hi {
                acc += x[self.cols[k]] * self.vals[k];
            }
            *yi = acc;
        }
    }

    #[inline]
    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += x[self.cols[k]] * self.vals[k];
            }
            *yi = acc;
        }
    }

    /// Principal submatrix on the rows/columns where `mask` is true.
    pub fn restricted(&self, mask: &[bool]) -> Csr {
        let mut map = vec![usize::MAX; self.n];
        let mut m = 0;
        for (i, &keep) in mask.iter().enumerate() {
            if keep {
                map[i] = m;
                m += 1;
            }
        }
        let mut asm = CsrAssembler::new(m);
        let mut row = Vec::new();
        for i in (0..self.n).filter(|&i| mask[i]) {
            row.clear();
            row.extend(
                self.row(i)
                    .filter(|&(c, _)| map[c] != usize::MAX)
                    .map(|(c, v)| (map[c], v)),
            );
            asm.push_row(&mut row);
        }
        asm.finish()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Max over stored entries of `|w_i H_ij − w_j H_ji|`, relative to `max |w_i H_ij|`.
    pub fn weighted_asymmetry(&self, weight: &[f64]) -> f64 {
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let a = weight[i] * v;
                let b = weight[j] * self.get(j, i);
                scale = scale.max(a.abs());
                worst = worst.max((a - b).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

/// Row-by-row CSR assembly. Duplicate columns inside a row are summed.
pub struct CsrAssembler {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrAssembler {
    pub fn new(n: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self {
            n,
            row_ptr,
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: &mut Vec<(usize, f64)>) {
        entries.sort_by_key(|e| e.0);
        let start = self.cols.len();
        for &(c, v) in entries.iter() {
            debug_assert!(c < self.n);
            if self.cols.len() > start && *self.cols.last().unwrap() == c {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn finish(self) -> Csr {
        assert_eq!(self.row_ptr.len(), self.n + 1, "incomplete assembly");
        Csr {
            n: self.n,
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
        }
    }
}

/// Sparse operator on a grid, Hermitian with respect to the grid's weighted
/// inner product. All operators in this crate are real, so Hermitian means
/// `w_i H_ij = w_j H_ji`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    grid: Arc<Grid2D>,
    csr: Csr,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Wraps an assembled matrix, checking its Hermiticity.
    pub fn new(grid: Arc<Grid2D>, csr: Csr) -> Result<Self> {
        if csr.dim() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "matrix dimension {} does not match grid size {}",
                csr.dim(),
                grid.len()
            )));
        }
        let hermitian = csr.weighted_asymmetry(grid.weight()) <= HERMITIAN_TOL;
        Ok(Self { grid, csr, hermitian })
    }

    pub fn diagonal_from(grid: Arc<Grid2D>, diag: &[f64]) -> Result<Self> {
        let mut asm = CsrAssembler::new(diag.len());
        let mut row = Vec::with_capacity(1);
        for (i, &d) in diag.iter().enumerate() {
            row.clear();
            row.push((i, d));
            asm.push_row(&mut row);
        }
        Self::new(grid, asm.finish())
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn dim(&self) -> usize {
        self.csr.dim()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn asymmetry(&self) -> f64 {
        self.csr.weighted_asymmetry(self.grid.weight())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.csr.diagonal()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.csr.apply_complex(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.csr.apply_complex(x, y);
    }

    /// `⟨x, Hx⟩` (real for Hermitian H).
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        self.grid.inner(x, &self.apply(x)).re
    }

    /// `‖Hx‖` in the grid inner product.
    pub fn apply_norm(&self, x: &[Complex64]) -> f64 {
        self.grid.norm_sqr(&self.apply(x)).sqrt()
    }

    /// Infinity-norm bound `max_i Σ_j |H_ij|`.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.csr.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn same_grid(&self, grid: &Arc<Grid2D>) -> bool {
        Arc::ptr_eq(&self.grid, grid) || *self.grid == **grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize) -> Csr {
        let mut asm = CsrAssembler::new(n);
        let mut row = Vec::new();
        for i in 0..n {
            row.clear();
            row.push((i, 2.0));
            if i > 0 {
                row.push((i - 1, -1.0));
            }
            if i + 1 < n {
                row.push((i + 1, -1.0));
            }
            asm.push_row(&mut row);
        }
        asm.finish()
    }

    #[test]
    fn duplicates_are_summed() {
        let mut asm = CsrAssembler::new(2);
        asm.push_row(&mut vec![(1, 1.0), (0, 2.0), (1, 0.5)]);
        asm.push_row(&mut vec![(1, 3.0)]);
        let m = asm.finish();
        assert_eq!(m.get(0, 1), 1.5);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn restriction_keeps_inner_block() {
        let m = path_laplacian(5);
        let r = m.restricted(&[false, true, true, true, false]);
        assert_eq!(r.dim(), 3);
        assert_eq!(r.get(0, 0), 2.0);
        assert_eq!(r.get(0, 1), -1.0);
        assert_eq!(r.nnz(), 7);
    }

    #[test]
    fn asymmetry_detects_nonhermitian() {
        let m = path_laplacian(4);
        assert_eq!(m.weighted_asymmetry(&[1.0; 4]), 0.0);
        let mut asm = CsrAssembler::new(2);
        asm.push_row(&mut vec![(0, 1.0), (1, 1.0)]);
        asm.push_row(&mut vec![(0, 2.0), (1, 1.0)]);
        let bad = asm.finish();
        assert!(bad.weighted_asymmetry(&[1.0, 1.0]) > 0.1);
        // symmetric in the weighted product w = (2, 1)
        assert!(bad.weighted_asymmetry(&[2.0, 1.0]) < 1e-15);
    }
}
