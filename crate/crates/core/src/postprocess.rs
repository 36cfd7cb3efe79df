//! Filling the active loadings once a sparsity pattern is fixed, deflation
//! for sequential extraction, and variance metrics.

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::error::{Result, SpcaError};
use crate::gradient_scheme::{IterateTrace, StopRule, Termination};
use crate::numerics::{self, PowerOptions};
use crate::pattern::SparsityPattern;
use crate::spca_single::{self, PenaltyConfig, SingleResult};

/// Cap on alternating sweeps regardless of the stop rule.
pub const MAX_FILL_SWEEPS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct FillSingle {
    /// Unit `p`-vector `Az / ‖Az‖` (first basis vector when the fill is zero).
    pub x: DVector<f64>,
    /// Unit `n`-vector supported on the pattern, or zero.
    pub z: DVector<f64>,
    /// Largest singular value of the active columns.
    pub sigma: f64,
}

/// Best unit loading vector supported on a single-column pattern: the
/// dominant right singular vector of the active columns.
pub fn fill_single_l1(data: &DataMatrix, pattern: &SparsityPattern) -> FillSingle {
    fill_single_l1_from(data, pattern, None)
}

/// As [`fill_single_l1`], with the power iteration seeded by an
/// approximate left singular vector (typically the pattern search's final
/// iterate).
pub fn fill_single_l1_from(
    data: &DataMatrix,
    pattern: &SparsityPattern,
    warm: Option<&DVector<f64>>,
) -> FillSingle {
    assert_eq!(pattern.shape(), (data.ncols(), 1), "pattern must be n x 1");
    let active = pattern.active_indices(0);
    let p = data.nrows();
    let mut z = DVector::zeros(data.ncols());
    if active.is_empty() {
        let mut x = DVector::zeros(p);
        x[0] = 1.0;
        return FillSingle { x, z, sigma: 0.0 };
    }
    let sub = data.select_columns(&active);
    let opts = PowerOptions {
        parallelism: data.parallelism(),
        ..PowerOptions::default()
    };
    let svd = numerics::rank_one_svd_with(&sub, warm, &opts);
    // Fix the sign so the loading correlates positively with the seed.
    let flip = match warm {
        Some(w) if svd.u.dot(w) < 0.0 => -1.0,
        _ => 1.0,
    };
    for (k, &i) in active.iter().enumerate() {
        z[i] = flip * svd.v[k];
    }
    FillSingle {
        x: svd.u * flip,
        z,
        sigma: svd.sigma,
    }
}

/// Input of the alternating block fill.
#[derive(Clone, Debug)]
pub struct FillProblem {
    pub pattern: SparsityPattern,
    /// Positive column weights.
    pub mu: Vec<f64>,
    /// Starting point with orthonormal columns.
    pub x0: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct FillResult {
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    /// Columns whose active part of `AᵀXN` vanished.
    pub empty_columns: Vec<bool>,
    /// `trace(XᵀAZN)` after each sweep.
    pub values: Vec<f64>,
    pub sweeps: usize,
}

/// Active part of `AᵀXN`, column-normalized.
fn z_step(data: &DataMatrix, pattern: &SparsityPattern, mu: &[f64], x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<bool>) {
    let mut z = data.tr_mul_mat(x);
    let mut empty = Vec::with_capacity(mu.len());
    for (j, &w) in mu.iter().enumerate() {
        let mut col = z.column_mut(j);
        for i in 0..col.len() {
            if pattern.is_active(i, j) {
                col[i] *= w;
            } else {
                col[i] = 0.0;
            }
        }
        let nc = col.norm();
        if nc > 0.0 {
            col /= nc;
            empty.push(false);
        } else {
            empty.push(true);
        }
    }
    (z, empty)
}

fn scale_columns(mut m: DMatrix<f64>, mu: &[f64]) -> DMatrix<f64> {
    for (j, &w) in mu.iter().enumerate() {
        m.column_mut(j).scale_mut(w);
    }
    m
}

/// Block-coordinate ascent on `trace(XᵀAZN)` over `X` with orthonormal
/// columns and `Z` with unit columns supported on the pattern.
///
/// Each sweep sets `Z` to the column-normalized active part of `AᵀXN`,
/// then `X` to the polar factor of `AZN`. Both updates are exact
/// maximizations, so the objective never decreases. Sweeps stop once the
/// relative change drops to `stop.rel_tol`, or after `stop.max_iter` (at
/// most [`MAX_FILL_SWEEPS`]).
pub fn alternating_fill(data: &DataMatrix, prob: &FillProblem, stop: &StopRule) -> Result<FillResult> {
    let m = prob.mu.len();
    if prob.pattern.shape() != (data.ncols(), m) {
        return Err(SpcaError::dims(format!(
            "pattern is {:?}, expected {}x{m}",
            prob.pattern.shape(),
            data.ncols()
        )));
    }
    if prob.x0.shape() != (data.nrows(), m) {
        return Err(SpcaError::dims(format!(
            "starting point is {:?}, expected {}x{m}",
            prob.x0.shape(),
            data.nrows()
        )));
    }
    if prob.mu.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(SpcaError::invalid("weights must be positive and finite"));
    }
    if !numerics::is_stiefel(&prob.x0, 1e-8) {
        return Err(SpcaError::invalid("starting point must have orthonormal columns"));
    }
    stop.validate()?;

    if prob.pattern.is_empty() {
        return Ok(FillResult {
            x: prob.x0.clone(),
            z: DMatrix::zeros(data.ncols(), m),
            empty_columns: vec![true; m],
            values: vec![0.0],
            sweeps: 0,
        });
    }

    let max_sweeps = stop.max_iter.clamp(1, MAX_FILL_SWEEPS);
    let mut x = prob.x0.clone();
    let mut z;
    let mut empty;
    let mut values: Vec<f64> = Vec::new();
    let mut sweeps = 0;
    loop {
        (z, empty) = z_step(data, &prob.pattern, &prob.mu, &x);
        let azn = scale_columns(data.mul_mat(&z), &prob.mu);
        let polar = numerics::polar_factor(&azn)?;
        x = polar.u;
        sweeps += 1;
        // At the polar factor, trace(XᵀAZN) is the nuclear norm of AZN.
        let f = polar.nuclear_norm;
        let done = match values.last() {
            Some(&prev) => {
                let change = f - prev;
                let rel = if prev.abs() <= f64::MIN_POSITIVE { change } else { change / prev.abs() };
                rel <= stop.rel_tol
            }
            None => false,
        };
        values.push(f);
        if done || sweeps >= max_sweeps {
            break;
        }
    }
    Ok(FillResult {
        x,
        z,
        empty_columns: empty,
        values,
        sweeps,
    })
}

/// Largest deviation of each nonzero column of `Z` from the normalized
/// active part of `AᵀXN`. Zero at a stationary point of the alternating
/// fill.
pub fn fill_stationarity_residual(
    data: &DataMatrix,
    pattern: &SparsityPattern,
    mu: &[f64],
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> f64 {
    let (target, _) = z_step(data, pattern, mu, x);
    (0..z.ncols())
        .map(|j| (z.column(j) - target.column(j)).amax())
        .fold(0.0, f64::max)
}

/// Residual `A − (Az)zᵀ` for a unit-norm `z`.
pub fn deflate(data: &DataMatrix, z: &DVector<f64>) -> Result<DataMatrix> {
    if z.len() != data.ncols() {
        return Err(SpcaError::dims(format!(
            "loading vector has length {}, expected {}",
            z.len(),
            data.ncols()
        )));
    }
    let x = data.mul_vec(z);
    let mut r = data.matrix().clone();
    r.ger(-1.0, &x, z, 1.0);
    Ok(DataMatrix::new(r)?.with_parallelism(data.parallelism()))
}

/// `‖Az‖²`.
pub fn variance(data: &DataMatrix, z: &DVector<f64>) -> f64 {
    data.mul_vec(z).norm_squared()
}

#[derive(Clone, Debug)]
pub struct SequentialResult {
    pub components: Vec<SingleResult>,
    /// Loadings as columns, `n × m`.
    pub z: DMatrix<f64>,
    /// Adjusted variance of `AZ` over the original data.
    pub adjusted_variance: f64,
}

fn zero_component(n: usize, p: usize) -> SingleResult {
    let mut x = DVector::zeros(p);
    x[0] = 1.0;
    SingleResult {
        x_star: x.clone(),
        pattern: SparsityPattern::none_active(n, 1),
        z_star: DVector::zeros(n),
        trace: IterateTrace {
            point: DMatrix::from_column_slice(p, 1, x.as_slice()),
            values: vec![0.0],
            step_norms: Vec::new(),
            optimality: Vec::new(),
            iterations: 0,
            termination: Termination::FullySuppressed,
            rank_deficient_steps: 0,
        },
        fully_suppressed: true,
    }
}

/// Extracts `m` components one at a time, deflating after each. A
/// suppressed component contributes a zero column and extraction goes on.
pub fn sequential_extract(
    data: &DataMatrix,
    penalty: &PenaltyConfig,
    m: usize,
    stop: &StopRule,
) -> Result<SequentialResult> {
    if m == 0 {
        return Err(SpcaError::invalid("number of components must be >= 1"));
    }
    if m > data.nrows() {
        return Err(SpcaError::invalid(format!(
            "cannot extract {m} components from {} samples",
            data.nrows()
        )));
    }
    let mut residual = data.clone();
    let mut components = Vec::with_capacity(m);
    let mut z = DMatrix::zeros(data.ncols(), m);
    for j in 0..m {
        let comp = if residual.is_zero() {
            zero_component(data.ncols(), data.nrows())
        } else {
            let x0 = spca_single::init_column(&residual)?;
            spca_single::solve_single(&residual, penalty, &x0, stop)?
        };
        if !comp.fully_suppressed {
            residual = deflate(&residual, &comp.z_star)?;
        }
        z.set_column(j, &comp.z_star);
        components.push(comp);
    }
    let y = data.mul_mat(&z);
    let adjusted_variance = numerics::adjusted_variance(&y)?;
    Ok(SequentialResult {
        components,
        z,
        adjusted_variance,
    })
}
