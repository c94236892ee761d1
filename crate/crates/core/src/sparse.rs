use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace::Label;

/// Sparse vector with strictly increasing indices and nonzero finite values.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl SparseVector {
    pub fn empty(dim: usize) -> Self {
        SparseVector {
            entries: Vec::new(),
            dim,
        }
    }

    /// Builds a vector from arbitrary `(index, value)` pairs: sorts, sums
    /// duplicates and drops zeros.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if i >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: i + 1,
                });
            }
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        Ok(SparseVector { entries, dim })
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        SparseVector {
            entries: dense
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
            dim: dense.len(),
        }
    }

    /// Caller guarantees sorted unique in-range indices and nonzero values.
    pub(crate) fn from_sorted_unchecked(dim: usize, entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(i, v)| i < dim && v != 0.0));
        SparseVector { entries, dim }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            d[i] = v;
        }
        d
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Dot product against a dense vector of at least `self.dim` entries.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut acc = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    acc += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        acc
    }

    /// `dense += scale * self`.
    pub fn axpy_into(&self, scale: f64, dense: &mut [f64]) {
        for &(i, v) in &self.entries {
            dense[i] += scale * v;
        }
    }

    /// Applies `f` to every stored value, dropping results equal to zero.
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|&(i, v)| (i, f(i, v)))
                .filter(|&(_, v)| v != 0.0)
                .collect(),
            dim: self.dim,
        }
    }
}

/// Document-term matrix: one sparse row per trace.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: Vec<SparseVector>,
    pub row_ids: Vec<String>,
    pub labels: Option<Vec<Label>>,
    dim: usize,
}

impl FeatureMatrix {
    pub fn new(
        dim: usize,
        rows: Vec<SparseVector>,
        row_ids: Vec<String>,
        labels: Option<Vec<Label>>,
    ) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.dim(),
            });
        }
        if row_ids.len() != rows.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: row_ids.len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::LengthMismatch {
                    left: rows.len(),
                    right: l.len(),
                });
            }
        }
        Ok(FeatureMatrix {
            rows,
            row_ids,
            labels,
            dim,
        })
    }

    /// Matrix without ids or labels, mostly for tests and toy problems.
    pub fn from_rows(dim: usize, rows: Vec<SparseVector>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(dim, rows, ids, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseVector::nnz).sum()
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            dim: self.dim,
        }
    }

    /// Sparse triplet text: header `rows cols nnz`, then one
    /// `row<TAB>col<TAB>value` line per nonzero.
    pub fn to_triplets(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n_rows(), self.dim, self.nnz());
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row.entries() {
                let _ = writeln!(out, "{r}\t{c}\t{v}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_pairs_normalizes() {
        let v = SparseVector::from_pairs(5, vec![(3, 1.0), (1, 2.0), (3, 1.5), (4, 0.0)]).unwrap();
        assert_eq!(v.entries(), &[(1, 2.0), (3, 2.5)]);
        assert!(SparseVector::from_pairs(2, vec![(2, 1.0)]).is_err());
    }

    #[test]
    fn dots() {
        let a = SparseVector::from_pairs(4, vec![(0, 1.0), (2, 3.0)]).unwrap();
        let b = SparseVector::from_pairs(4, vec![(2, 2.0), (3, 5.0)]).unwrap();
        assert_eq!(a.dot(&b), 6.0);
        assert_eq!(a.dot_dense(&[1.0, 1.0, 1.0, 1.0]), 4.0);
        assert_eq!(a.get(2), 3.0);
        assert_eq!(a.get(1), 0.0);
    }

    #[test]
    fn triplets_header() {
        let m = FeatureMatrix::from_rows(
            3,
            vec![
                SparseVector::from_pairs(3, vec![(1, 0.5)]).unwrap(),
                SparseVector::empty(3),
            ],
        )
        .unwrap();
        assert_eq!(m.to_triplets(), "2 3 1\n0\t1\t0.5\n");
    }

    #[test]
    fn matrix_rejects_mixed_dims() {
        assert!(FeatureMatrix::from_rows(3, vec![SparseVector::empty(2)]).is_err());
    }
}
