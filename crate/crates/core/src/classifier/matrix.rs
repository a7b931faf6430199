use crate::error::{Error, Result};
use crate::features::{FeatureVector, SparseVector};
use crate::scalar::Scalar;

/// Read access to one feature row.
pub trait FeatureRow<T: Scalar> {
    fn dim(&self) -> usize;

    fn value(&self, column: usize) -> T;

    /// Nonzero `(column, value)` pairs in ascending column order.
    fn nonzeros(&self) -> Vec<(usize, T)> {
        (0..self.dim())
            .map(|j| (j, self.value(j)))
            .filter(|(_, v)| *v != T::zero())
            .collect()
    }
}

impl<T: Scalar> FeatureRow<T> for [T] {
    fn dim(&self) -> usize {
        self.len()
    }

    fn value(&self, column: usize) -> T {
        self[column]
    }
}

impl<T: Scalar> FeatureRow<T> for Vec<T> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn value(&self, column: usize) -> T {
        self[column]
    }
}

impl<T: Scalar> FeatureRow<T> for SparseVector<T> {
    fn dim(&self) -> usize {
        SparseVector::dim(self)
    }

    fn value(&self, column: usize) -> T {
        self.get(column)
    }

    fn nonzeros(&self) -> Vec<(usize, T)> {
        self.entries().to_vec()
    }
}

impl<T: Scalar> FeatureRow<T> for FeatureVector<T> {
    fn dim(&self) -> usize {
        FeatureVector::dim(self)
    }

    fn value(&self, column: usize) -> T {
        self.get(column)
    }

    fn nonzeros(&self) -> Vec<(usize, T)> {
        FeatureVector::nonzeros(self).collect()
    }
}

/// Row-major sparse training matrix (CSR). Missing entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<T>,
}

/// Borrowed view of one matrix row.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a, T> {
    n_cols: usize,
    cols: &'a [usize],
    values: &'a [T],
}

impl<T: Scalar> FeatureRow<T> for RowView<'_, T> {
    fn dim(&self) -> usize {
        self.n_cols
    }

    fn value(&self, column: usize) -> T {
        self.cols
            .binary_search(&column)
            .map(|k| self.values[k])
            .unwrap_or_else(|_| T::zero())
    }

    fn nonzeros(&self) -> Vec<(usize, T)> {
        self.cols.iter().copied().zip(self.values.iter().copied()).collect()
    }
}

impl<T: Scalar> FeatureMatrix<T> {
    /// Builds from rows of any [`FeatureRow`] type, checking that every row
    /// has the same dimension and only finite values.
    pub fn from_rows<R: FeatureRow<T> + ?Sized>(rows: &[&R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("feature matrix has no rows"))?;
        let n_cols = first.dim();
        let mut m = FeatureMatrix {
            n_cols,
            row_ptr: vec![0],
            cols: Vec::new(),
            values: Vec::new(),
        };
        for (r, row) in rows.iter().enumerate() {
            if row.dim() != n_cols {
                return Err(Error::Dimension {
                    expected: n_cols,
                    found: row.dim(),
                });
            }
            for (j, v) in row.nonzeros() {
                if v == T::zero() {
                    continue;
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: r, column: j });
                }
                m.cols.push(j);
                m.values.push(v);
            }
            m.row_ptr.push(m.cols.len());
        }
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Result<Self> {
        let refs: Vec<&Vec<T>> = rows.iter().collect();
        Self::from_rows(&refs)
    }

    pub fn from_features(rows: &[FeatureVector<T>]) -> Result<Self> {
        let refs: Vec<&FeatureVector<T>> = rows.iter().collect();
        Self::from_rows(&refs)
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> RowView<'_, T> {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        RowView {
            n_cols: self.n_cols,
            cols: &self.cols[span.clone()],
            values: &self.values[span],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = RowView<'_, T>> {
        (0..self.n_rows()).map(|r| self.row(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_from_dense() {
        let m = FeatureMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 2.5]]).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (2, 2));
        assert_eq!(m.row(1).value(1), 2.5);
        assert_eq!(m.row(1).value(0), 0.0);
        assert_eq!(m.row(0).nonzeros(), [(0, 1.0)]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            FeatureMatrix::<f64>::from_dense(&[]).unwrap_err(),
            Error::Empty(_)
        ));
        assert!(matches!(
            FeatureMatrix::from_dense(&[vec![1.0], vec![1.0, 2.0]]).unwrap_err(),
            Error::Dimension { expected: 1, found: 2 }
        ));
        assert!(matches!(
            FeatureMatrix::from_dense(&[vec![1.0, f32::INFINITY]]).unwrap_err(),
            Error::NonFinite { row: 0, column: 1 }
        ));
    }
}
