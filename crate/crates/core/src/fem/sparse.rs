use std::ops::{AddAssign, Mul};

use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};

/// Compressed sparse column matrix with sorted row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

/// Column-sorted sparsity pattern of a square matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pattern {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl Pattern {
    /// Builds the pattern from per-column row lists (duplicates allowed).
    pub fn from_columns(mut cols: Vec<Vec<usize>>) -> Self {
        let n = cols.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        Self { n, col_ptr, row_idx }
    }

    /// Storage position of entry `(r, c)`; panics if it is not in the pattern.
    pub fn position(&self, r: usize, c: usize) -> usize {
        let lo = self.col_ptr[c];
        let hi = self.col_ptr[c + 1];
        lo + self.row_idx[lo..hi]
            .binary_search(&r)
            .expect("entry outside sparsity pattern")
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn with_values<T>(&self, values: Vec<T>) -> SparseMatrix<T> {
        assert_eq!(values.len(), self.nnz());
        SparseMatrix {
            n: self.n,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            values,
        }
    }
}

impl<T: Copy + Default + AddAssign + Mul<Output = T>> SparseMatrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let lo = self.col_ptr[c];
        let hi = self.col_ptr[c + 1];
        match self.row_idx[lo..hi].binary_search(&r) {
            Ok(k) => self.values[lo + k],
            Err(_) => T::default(),
        }
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::default());
        for c in 0..self.n {
            let xc = x[c];
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::default(); self.n];
        self.matvec(x, &mut y);
        y
    }

    pub(crate) fn as_faer(&self) -> SparseColMatRef<'_, usize, T> {
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        SparseColMatRef::new(sym, &self.values)
    }

    pub(crate) fn pattern(&self) -> Pattern {
        Pattern {
            n: self.n,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
        }
    }

    /// Dense copy, for small problems and tests.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::default(); self.n]; self.n];
        for (r, c, v) in self.entries() {
            d[r][c] = v;
        }
        d
    }
}

impl SparseMatrix<f64> {
    pub fn from_dense(d: &[Vec<f64>]) -> Self {
        let n = d.len();
        let cols = (0..n).map(|c| (0..n).filter(|&r| d[r][c] != 0.0).collect()).collect();
        let p = Pattern::from_columns(cols);
        let values = p
            .row_idx
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let c = p.col_ptr.partition_point(|&q| q <= k) - 1;
                d[r][c]
            })
            .collect();
        p.with_values(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_matches_dense() {
        let d = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 0.5], vec![0.0, 0.5, 2.0]];
        let a = SparseMatrix::from_dense(&d);
        assert_eq!(a.nnz(), 7);
        let y = a.apply(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![6.0, 8.5, 7.0]);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.to_dense(), d);
    }
}
