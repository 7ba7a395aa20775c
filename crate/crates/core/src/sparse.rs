//! Minimal CSR matrix used for fixed aggregation operators.

use num_traits::Num;

use crate::dense::{check_dense_size, DenseMatrix};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Num> CsrMatrix<T> {
    /// Assembles a matrix from per-row `(column, value)` lists. Columns within a
    /// row must be strictly increasing.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for row in &rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for &(c, v) in row {
                assert!(c < n_cols, "column out of range");
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| self.row(i).fold(T::zero(), |acc, (j, v)| acc + v * x[j]))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.n_cols];
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        CsrMatrix::from_rows(self.n_rows, rows)
    }

    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        check_dense_size(self.n_rows.max(self.n_cols))?;
        let mut m = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_and_matvec() {
        let m = CsrMatrix::from_rows(3, vec![vec![(0, 1.0), (2, 2.0)], vec![(1, 3.0)]]);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
        let t = m.transpose();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.get(2, 0), 2.0);
        assert_eq!(t.get(2, 1), 0.0);
        assert_eq!(t.to_dense().unwrap(), m.to_dense().unwrap().transpose());
    }
}
