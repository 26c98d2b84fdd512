use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Coordinate-format sparse matrix with entries sorted by `(row, col)` and no
/// duplicate coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    /// Builds a matrix from unordered triplets. Duplicate coordinates are
    /// summed; explicit zeros are kept.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::dim(
                    "from_triplets",
                    format!("entry ({r}, {c}) outside {rows}x{cols}"),
                ));
            }
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite entry at ({r}, {c})")));
            }
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            entries: (0..n).map(|i| (i, i, 1.0)).collect(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(row, col)))
            .map_or(0.0, |k| self.entries[k].2)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.rows];
        for &(r, _, v) in &self.entries {
            sums[r] += v;
        }
        sums
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && self
                .entries
                .iter()
                .all(|&(r, c, v)| self.get(c, r) == v)
    }

    /// Sparse-dense product `self * b`.
    pub fn spmm(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != b.rows() {
            return Err(Error::dim(
                "spmm",
                format!(
                    "{}x{} sparse times {}x{} dense",
                    self.rows,
                    self.cols,
                    b.rows(),
                    b.cols()
                ),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, b.cols());
        for &(r, c, v) in &self.entries {
            let src = b.row(c);
            for (o, s) in out.row_mut(r).iter_mut().zip(src) {
                *o += v * s;
            }
        }
        Ok(out)
    }

    /// Transposed product `selfᵀ * b`, used for the backward pass of [`spmm`].
    ///
    /// [`spmm`]: SparseMatrix::spmm
    pub fn spmm_transpose(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != b.rows() {
            return Err(Error::dim(
                "spmm_transpose",
                format!(
                    "({}x{})ᵀ sparse times {}x{} dense",
                    self.rows,
                    self.cols,
                    b.rows(),
                    b.cols()
                ),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, b.cols());
        for &(r, c, v) in &self.entries {
            let src = b.row(r);
            for (o, s) in out.row_mut(c).iter_mut().zip(src) {
                *o += v * s;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_times_dense_is_dense() {
        let b = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(SparseMatrix::identity(3).spmm(&b).unwrap(), b);
    }

    #[test]
    fn zero_sparse_gives_zero() {
        let b = DenseMatrix::full(3, 2, 7.0);
        assert_eq!(
            SparseMatrix::zeros(4, 3).spmm(&b).unwrap(),
            DenseMatrix::zeros(4, 2)
        );
    }

    #[test]
    fn swap_permutation() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let b = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(
            a.spmm(&b).unwrap(),
            DenseMatrix::from_rows(&[[3.0, 4.0], [1.0, 2.0]]).unwrap()
        );
    }

    #[test]
    fn shape_mismatch_is_error() {
        let a = SparseMatrix::identity(3);
        assert!(matches!(
            a.spmm(&DenseMatrix::zeros(2, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn duplicates_are_merged_and_sorted() {
        let a =
            SparseMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (0, 1, 2.0), (1, 0, 0.5)]).unwrap();
        assert_eq!(a.entries(), &[(0, 1, 2.0), (1, 0, 1.5)]);
    }

    fn dense_strategy(max: usize) -> impl Strategy<Value = (DenseMatrix, DenseMatrix)> {
        (1..=max, 1..=max, 1..=max).prop_flat_map(|(r, k, c)| {
            (
                proptest::collection::vec(prop_oneof![3 => Just(0i32), 2 => -4i32..=4], r * k),
                proptest::collection::vec(-8i32..=8, k * c),
            )
                .prop_map(move |(a, b)| {
                    (
                        DenseMatrix::from_vec(r, k, a.into_iter().map(f64::from).collect())
                            .unwrap(),
                        DenseMatrix::from_vec(k, c, b.into_iter().map(f64::from).collect())
                            .unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn spmm_matches_dense_matmul((a, b) in dense_strategy(8)) {
            let sparse = SparseMatrix::from_dense(&a);
            prop_assert_eq!(sparse.spmm(&b).unwrap(), a.matmul(&b).unwrap());
            prop_assert_eq!(sparse.to_dense(), a);
        }
    }
}
