use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse vector with strictly increasing indices and finite nonzero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SparseVector<T> {
    dim: usize,
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseVector<T> {
    pub fn zeros(dim: usize) -> Self {
        SparseVector { dim, entries: Vec::new() }
    }

    /// Checks ordering, range and finiteness; explicit zeros are dropped.
    pub fn new(dim: usize, entries: Vec<(usize, T)>) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for &(i, v) in &entries {
            if i >= dim {
                return Err(Error::InvalidArgument(format!("index {i} outside dimension {dim}")));
            }
            if prev.is_some_and(|p| p >= i) {
                return Err(Error::InvalidArgument("indices must be strictly increasing".into()));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite value at index {i}")));
            }
            prev = Some(i);
        }
        Ok(Self::from_sorted(dim, entries))
    }

    /// Builds from already-sorted entries, dropping zeros.
    pub(crate) fn from_sorted(dim: usize, mut entries: Vec<(usize, T)>) -> Self {
        entries.retain(|&(_, v)| v != T::zero());
        SparseVector { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> T {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|k| self.entries[k].1)
            .unwrap_or_else(|_| T::zero())
    }

    pub fn l2_norm(&self) -> T {
        self.entries.iter().map(|&(_, v)| v * v).sum::<T>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub(crate) fn map_values(&self, mut f: impl FnMut(usize, T) -> T) -> Self {
        let entries = self.entries.iter().map(|&(i, v)| (i, f(i, v))).collect();
        Self::from_sorted(self.dim, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_entries() {
        assert!(SparseVector::<f64>::new(3, vec![(0, 1.0), (2, 2.0)]).is_ok());
        assert!(SparseVector::<f64>::new(3, vec![(2, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::<f64>::new(3, vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::<f64>::new(3, vec![(3, 1.0)]).is_err());
        assert!(SparseVector::<f64>::new(3, vec![(0, f64::NAN)]).is_err());
        assert_eq!(SparseVector::<f32>::new(3, vec![(0, 0.0)]).unwrap().nnz(), 0);
    }

    #[test]
    fn lookups() {
        let v = SparseVector::<f64>::new(4, vec![(1, 3.0), (3, 4.0)]).unwrap();
        assert_eq!(v.get(1), 3.0);
        assert_eq!(v.get(2), 0.0);
        assert_eq!(v.l2_norm(), 5.0);
        assert_eq!(v.to_dense(), [0.0, 3.0, 0.0, 4.0]);
    }
}
