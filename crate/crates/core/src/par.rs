//! Data-parallel kernels with a sequential fallback.
//!
//! Every kernel takes a [`Parallelism`] switch. When the crate is built
//! without the `parallel` feature, or when the work is too small to
//! amortize thread dispatch, the sequential path runs instead. Both paths
//! produce the same values up to floating-point summation order.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many matrix entries the kernels stay sequential.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_WORK: usize = 1 << 15;

/// Execution mode for data-parallel loops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// True when this mode will actually fan out to the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }

    #[cfg(feature = "parallel")]
    fn for_work(self, entries: usize) -> bool {
        self.is_parallel() && entries >= MIN_PARALLEL_WORK
    }
}

#[cfg(feature = "parallel")]
fn column_chunk(ncols: usize) -> usize {
    let threads = rayon::current_num_threads().max(1);
    (ncols / (4 * threads)).max(64)
}

/// `Aᵀx`: one dot product per column of `a`.
pub fn tr_mul_vec(a: &DMatrix<f64>, x: &DVector<f64>, par: Parallelism) -> DVector<f64> {
    debug_assert_eq!(a.nrows(), x.len());
    #[cfg(feature = "parallel")]
    if par.for_work(a.len()) {
        let n = a.ncols();
        let chunk = column_chunk(n);
        let mut out = vec![0.0; n];
        out.par_chunks_mut(chunk).enumerate().for_each(|(c, slot)| {
            for (k, o) in slot.iter_mut().enumerate() {
                *o = a.column(c * chunk + k).dot(x);
            }
        });
        return DVector::from_vec(out);
    }
    let _ = par;
    a.tr_mul(x)
}

/// `Aw`: weighted sum of the columns of `a`.
pub fn mul_vec(a: &DMatrix<f64>, w: &DVector<f64>, par: Parallelism) -> DVector<f64> {
    debug_assert_eq!(a.ncols(), w.len());
    #[cfg(feature = "parallel")]
    if par.for_work(a.len()) {
        let (p, n) = a.shape();
        let chunk = column_chunk(n);
        let chunks = n.div_ceil(chunk);
        return (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * chunk;
                let len = chunk.min(n - start);
                a.columns(start, len) * w.rows(start, len)
            })
            .reduce(|| DVector::zeros(p), |acc, part| acc + part);
    }
    let _ = par;
    a * w
}

/// `AᵀX` for a block of directions; result is `n × m`.
pub fn tr_mul_mat(a: &DMatrix<f64>, x: &DMatrix<f64>, par: Parallelism) -> DMatrix<f64> {
    debug_assert_eq!(a.nrows(), x.nrows());
    #[cfg(feature = "parallel")]
    if par.for_work(a.len() * x.ncols().max(1)) {
        let n = a.ncols();
        let chunk = column_chunk(n);
        let chunks = n.div_ceil(chunk);
        let blocks: Vec<DMatrix<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * chunk;
                let len = chunk.min(n - start);
                a.columns(start, len).tr_mul(x)
            })
            .collect();
        let mut out = DMatrix::zeros(n, x.ncols());
        for (c, block) in blocks.iter().enumerate() {
            out.rows_mut(c * chunk, block.nrows()).copy_from(block);
        }
        return out;
    }
    let _ = par;
    a.tr_mul(x)
}

/// `AW` for a block of weights; result is `p × m`.
pub fn mul_mat(a: &DMatrix<f64>, w: &DMatrix<f64>, par: Parallelism) -> DMatrix<f64> {
    debug_assert_eq!(a.ncols(), w.nrows());
    #[cfg(feature = "parallel")]
    if par.for_work(a.len() * w.ncols().max(1)) {
        let (p, n) = a.shape();
        let m = w.ncols();
        let chunk = column_chunk(n);
        let chunks = n.div_ceil(chunk);
        return (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * chunk;
                let len = chunk.min(n - start);
                a.columns(start, len) * w.rows(start, len)
            })
            .reduce(|| DMatrix::zeros(p, m), |acc, part| acc + part);
    }
    let _ = par;
    a * w
}

/// Evaluates `f(0..len)` and returns the results in index order,
/// regardless of completion order.
pub fn map_indexed<T, F>(len: usize, par: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = par;
    (0..len).map(f).collect()
}
