//! Sparse symmetric matrices on a fixed pattern, sparse direct solvers
//! and a row-major dense matrix for Jacobians.
//!
//! Every sparse matrix assembled here is symmetric in pattern and values,
//! so its row-compressed arrays double as the column-compressed arrays
//! handed to the factorizations.

use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Compressed sparsity pattern with sorted column indices, including the
/// diagonal. Symbolic factorizations are cached on first use.
#[derive(Debug)]
pub struct Pattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic_llt: OnceLock<SymbolicLlt<usize>>,
    symbolic_lu: OnceLock<SymbolicLu<usize>>,
}

impl Pattern {
    /// Pattern of P1 couplings between the nodes of each element, after
    /// mapping node `v` to `map(v)`; nodes mapped to `None` are dropped.
    pub fn from_elements<const K: usize>(
        n: usize,
        elements: &[[usize; K]],
        map: impl Fn(usize) -> Option<usize>,
    ) -> Self {
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for e in elements {
            let m = e.map(&map);
            for a in m.iter().flatten() {
                for b in m.iter().flatten() {
                    adj[*a].push(*b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        Pattern {
            n,
            row_ptr,
            col_idx,
            symbolic_llt: OnceLock::new(),
            symbolic_lu: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage slot of entry `(i, j)`. Panics if it is not in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> usize {
        let start = self.row_ptr[i];
        match self.row(i).binary_search(&j) {
            Ok(k) => start + k,
            Err(_) => panic!("entry ({i}, {j}) is outside the sparsity pattern"),
        }
    }

    fn faer_symbolic(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.row_ptr, None, &self.col_idx)
    }
}

/// Symmetric sparse matrix with values on a shared [`Pattern`].
#[derive(Debug, Clone)]
pub struct SparseMatrix<T> {
    pattern: Arc<Pattern>,
    values: Vec<T>,
}

impl<T: Copy + Default + std::ops::AddAssign + std::ops::Mul<Output = T>> SparseMatrix<T> {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![T::default(); pattern.nnz()];
        SparseMatrix { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let s = self.pattern.slot(i, j);
        self.values[s] += v;
    }

    /// Entry `(i, j)`, zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> T {
        let start = self.pattern.row_ptr[i];
        match self.pattern.row(i).binary_search(&j) {
            Ok(k) => self.values[start + k],
            Err(_) => T::default(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.dim());
        (0..self.dim())
            .map(|i| {
                let mut acc = T::default();
                let (a, b) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
                for s in a..b {
                    acc += self.values[s] * x[self.pattern.col_idx[s]];
                }
                acc
            })
            .collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut d = vec![vec![T::default(); n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for s in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                row[self.pattern.col_idx[s]] = self.values[s];
            }
        }
        d
    }

    /// Whether `A == Aᵀ` holds exactly.
    pub fn is_symmetric(&self) -> bool
    where
        T: PartialEq,
    {
        (0..self.dim()).all(|i| {
            self.pattern
                .row(i)
                .iter()
                .all(|&j| self.get(i, j) == self.get(j, i))
        })
    }
}

impl SparseMatrix<f64> {
    pub fn cholesky(&self) -> Result<Cholesky> {
        let p = &self.pattern;
        let sym = p
            .symbolic_llt
            .get_or_init(|| {
                SymbolicLlt::try_new(p.faer_symbolic(), Side::Lower)
                    .expect("symbolic Cholesky of a valid pattern")
            })
            .clone();
        let mat = SparseColMatRef::new(p.faer_symbolic(), &self.values);
        let llt = Llt::try_new_with_symbolic(sym, mat, Side::Lower)
            .map_err(|e| Error::Definiteness(format!("sparse Cholesky failed: {e}")))?;
        Ok(Cholesky { n: p.n, llt })
    }
}

impl SparseMatrix<Complex64> {
    pub fn lu(&self) -> Result<ComplexLu> {
        let p = &self.pattern;
        let sym = p
            .symbolic_lu
            .get_or_init(|| SymbolicLu::try_new(p.faer_symbolic()).expect("symbolic LU of a valid pattern"))
            .clone();
        let mat = SparseColMatRef::new(p.faer_symbolic(), &self.values);
        let lu = Lu::try_new_with_symbolic(sym, mat)
            .map_err(|e| Error::Solver(format!("sparse LU failed: {e}")))?;
        Ok(ComplexLu { n: p.n, lu })
    }

    /// Real part, when every imaginary part is exactly zero.
    pub fn as_real(&self) -> Option<SparseMatrix<f64>> {
        if self.values.iter().any(|v| v.im != 0.0) {
            return None;
        }
        Some(SparseMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| v.re).collect(),
        })
    }

    pub fn conj(&self) -> Self {
        SparseMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }
}

/// Sparse `LLᵀ` factorization of a real SPD matrix.
pub struct Cholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves for every column of the column-major block `rhs` in place.
    pub fn solve_block(&self, rhs: &mut [f64]) {
        if rhs.is_empty() {
            return;
        }
        let k = rhs.len() / self.n;
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(rhs, self.n, k));
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_block(&mut x);
        x
    }
}

/// Sparse LU factorization with partial pivoting of a complex matrix.
pub struct ComplexLu {
    n: usize,
    lu: Lu<usize, Complex64>,
}

impl ComplexLu {
    pub fn solve_block(&self, rhs: &mut [Complex64]) {
        if rhs.is_empty() {
            return;
        }
        let k = rhs.len() / self.n;
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(rhs, self.n, k));
    }
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RowMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        RowMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = RowMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Splits the storage before row `i`.
    pub fn rows_split_mut(&mut self, i: usize) -> (&mut [f64], &mut [f64]) {
        self.data.split_at_mut(i * self.cols)
    }

    pub fn truncate_rows(&mut self, rows: usize) {
        self.rows = self.rows.min(rows);
        self.data.truncate(self.rows * self.cols);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.row(i)) {
                    *o += yi * a;
                }
            }
        }
        out
    }

    pub fn scale_row(&mut self, i: usize, s: f64) {
        for a in self.row_mut(i) {
            *a *= s;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_pattern(n: usize) -> Arc<Pattern> {
        let edges: Vec<[usize; 2]> = (0..n - 1).map(|i| [i, i + 1]).collect();
        Arc::new(Pattern::from_elements(n, &edges, Some))
    }

    #[test]
    fn pattern_contains_diagonal_and_edges() {
        let p = path_pattern(4);
        assert_eq!(p.row(0), &[0, 1]);
        assert_eq!(p.row(2), &[1, 2, 3]);
        assert_eq!(p.nnz(), 10);
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let n = 50;
        let p = path_pattern(n);
        let mut a = SparseMatrix::<f64>::zeros(p);
        for i in 0..n {
            a.add(i, i, 2.5);
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
                a.add(i + 1, i, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let y = a.cholesky().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let p = path_pattern(3);
        let mut a = SparseMatrix::<f64>::zeros(p);
        for i in 0..3 {
            a.add(i, i, -1.0);
        }
        assert!(matches!(a.cholesky(), Err(Error::Definiteness(_))));
    }

    #[test]
    fn complex_lu_solves_symmetric_system() {
        let n = 30;
        let p = path_pattern(n);
        let mut a = SparseMatrix::<Complex64>::zeros(p);
        for i in 0..n {
            a.add(i, i, Complex64::new(2.0, 0.3));
            if i + 1 < n {
                a.add(i, i + 1, Complex64::new(-1.0, 0.0));
                a.add(i + 1, i, Complex64::new(-1.0, 0.0));
            }
        }
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut b = a.mul_vec(&x);
        a.lu().unwrap().solve_block(&mut b);
        for (u, v) in x.iter().zip(&b) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn row_matrix_products() {
        let m = RowMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(m.mul_vec(&[1.0, -1.0]), vec![-1.0, -1.0, -1.0]);
        assert_eq!(m.mul_t_vec(&[1.0, 0.0, 1.0]), vec![6.0, 8.0]);
    }
}
