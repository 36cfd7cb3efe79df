use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SpcaError};
use crate::par::{self, Parallelism};

/// A `p × n` data matrix whose columns `a_i` are the variables.
///
/// Column norms are cached because the sparsity thresholds, the
/// initialization rule and the cardinality bound all read them.
#[derive(Clone, Debug)]
pub struct DataMatrix {
    a: DMatrix<f64>,
    col_norms: Vec<f64>,
    parallelism: Parallelism,
}

impl DataMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(SpcaError::dims("data matrix must have at least one row and one column"));
        }
        if let Some(idx) = a.iter().position(|v| !v.is_finite()) {
            let (row, col) = (idx % a.nrows(), idx / a.nrows());
            return Err(SpcaError::NonFinite { row, col });
        }
        let col_norms = a.column_iter().map(|c| c.norm()).collect();
        Ok(DataMatrix {
            a,
            col_norms,
            parallelism: Parallelism::default(),
        })
    }

    /// Builds from row-major entries (row = sample).
    pub fn from_row_slice(p: usize, n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != p * n {
            return Err(SpcaError::dims(format!(
                "expected {} entries for a {p}x{n} matrix, got {}",
                p * n,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(p, n, entries))
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn parallelism(&self) -> Parallelism {
        self.parallelism
    }

    /// Number of samples `p`.
    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    /// Number of variables `n`.
    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.a
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.col_norms
    }

    /// Largest column norm and its index; ties go to the lowest index.
    pub fn max_column(&self) -> (usize, f64) {
        let mut best = (0, self.col_norms[0]);
        for (i, &v) in self.col_norms.iter().enumerate().skip(1) {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }

    pub fn is_zero(&self) -> bool {
        self.col_norms.iter().all(|&v| v == 0.0)
    }

    /// `Aᵀx`, length `n`.
    pub fn tr_mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        par::tr_mul_vec(&self.a, x, self.parallelism)
    }

    /// `Aw`, length `p`.
    pub fn mul_vec(&self, w: &DVector<f64>) -> DVector<f64> {
        par::mul_vec(&self.a, w, self.parallelism)
    }

    /// `AᵀX`, shape `n × m`.
    pub fn tr_mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        par::tr_mul_mat(&self.a, x, self.parallelism)
    }

    /// `AW`, shape `p × m`.
    pub fn mul_mat(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        par::mul_mat(&self.a, w, self.parallelism)
    }

    /// Submatrix of the given columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.a.select_columns(idx.iter())
    }

    /// Returns a copy with every column shifted to zero mean.
    pub fn centered(&self) -> DataMatrix {
        let mut a = self.a.clone();
        for mut col in a.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        DataMatrix::new(a)
            .expect("centering preserves finiteness")
            .with_parallelism(self.parallelism)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 2.0]);
        assert!(matches!(
            DataMatrix::new(bad),
            Err(SpcaError::NonFinite { row: 0, col: 1 })
        ));
        assert!(DataMatrix::new(DMatrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn max_column_prefers_lowest_index_on_ties() {
        let a = DataMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(a.max_column(), (0, 1.0));
    }

    #[test]
    fn centering_zeroes_column_means() {
        let a = DataMatrix::from_row_slice(2, 1, &[1.0, 3.0]).unwrap().centered();
        assert_eq!(a.matrix().as_slice(), &[-1.0, 1.0]);
    }
}
