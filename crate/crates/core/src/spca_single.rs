//! Single-unit sparse PCA.
//!
//! Both penalties reduce to maximizing a convex function of a unit vector
//! `x ∈ R^p`:
//!
//! * ℓ1: `Σᵢ [|a_iᵀx| − γ]₊²`
//! * ℓ0: `Σᵢ [(a_iᵀx)² − γ]₊`
//!
//! The loading vector `z ∈ R^n` is recovered from the maximizer, and its
//! support is read off the thresholds. Columns with `‖a_i‖ ≤ γ` (ℓ1) or
//! `‖a_i‖² ≤ γ` (ℓ0) can never be active, and the threshold helpers check
//! the cached column norm as well so that this holds exactly in floating
//! point.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::DataMatrix;
use crate::error::{Result, SpcaError};
use crate::gradient_scheme::{self, Domain, IterateTrace, Objective, StopRule, Termination};
use crate::pattern::SparsityPattern;
use crate::postprocess;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    L1,
    L0,
}

impl PenaltyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyKind::L1 => "l1",
            PenaltyKind::L0 => "l0",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    pub gamma: f64,
}

impl PenaltyConfig {
    pub fn l1(gamma: f64) -> Self {
        PenaltyConfig {
            kind: PenaltyKind::L1,
            gamma,
        }
    }

    pub fn l0(gamma: f64) -> Self {
        PenaltyConfig {
            kind: PenaltyKind::L0,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(SpcaError::invalid(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// `[|s| − γ]₊`, forced to zero for columns with `‖a_i‖ ≤ γ`.
#[inline]
pub(crate) fn l1_excess(s: f64, gamma: f64, col_norm: f64) -> f64 {
    if col_norm <= gamma {
        0.0
    } else {
        (s.abs() - gamma).max(0.0)
    }
}

/// `(a_iᵀx)² > γ`, false for columns with `‖a_i‖² ≤ γ`.
#[inline]
pub(crate) fn l0_active(s: f64, gamma: f64, col_norm: f64) -> bool {
    col_norm * col_norm > gamma && s * s > gamma
}

fn check_point(data: &DataMatrix, x: &DVector<f64>) -> Result<()> {
    if x.len() != data.nrows() {
        return Err(SpcaError::dims(format!(
            "point has length {}, data has {} rows",
            x.len(),
            data.nrows()
        )));
    }
    Ok(())
}

pub fn l1_value(data: &DataMatrix, gamma: f64, x: &DVector<f64>) -> f64 {
    let s = data.tr_mul_vec(x);
    s.iter()
        .zip(data.column_norms())
        .map(|(&si, &ni)| l1_excess(si, gamma, ni).powi(2))
        .sum()
}

/// `Σᵢ [|a_iᵀx| − γ]₊ sign(a_iᵀx) a_i`, half the gradient of [`l1_value`].
pub fn l1_subgradient(data: &DataMatrix, gamma: f64, x: &DVector<f64>) -> DVector<f64> {
    let s = data.tr_mul_vec(x);
    data.mul_vec(&l1_weights(data, gamma, &s))
}

fn l1_weights(data: &DataMatrix, gamma: f64, s: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        s.len(),
        s.iter()
            .zip(data.column_norms())
            .map(|(&si, &ni)| l1_excess(si, gamma, ni) * si.signum()),
    )
}

pub fn l0_value(data: &DataMatrix, gamma: f64, x: &DVector<f64>) -> f64 {
    let s = data.tr_mul_vec(x);
    s.iter()
        .zip(data.column_norms())
        .filter(|(&si, &ni)| l0_active(si, gamma, ni))
        .map(|(&si, _)| si * si - gamma)
        .sum()
}

/// `Σ_{active} (a_iᵀx) a_i`, half the gradient of [`l0_value`] away from kinks.
pub fn l0_subgradient(data: &DataMatrix, gamma: f64, x: &DVector<f64>) -> DVector<f64> {
    let s = data.tr_mul_vec(x);
    data.mul_vec(&l0_weights(data, gamma, &s))
}

fn l0_weights(data: &DataMatrix, gamma: f64, s: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        s.len(),
        s.iter()
            .zip(data.column_norms())
            .map(|(&si, &ni)| if l0_active(si, gamma, ni) { si } else { 0.0 }),
    )
}

/// Single-unit objective adapted to the generic scheme (points are `p × 1`).
#[derive(Clone, Copy, Debug)]
pub struct SingleObjective<'a> {
    pub data: &'a DataMatrix,
    pub penalty: PenaltyConfig,
}

impl SingleObjective<'_> {
    fn value_and_weights(&self, x: &DMatrix<f64>) -> (f64, DVector<f64>) {
        let xv = DVector::from_column_slice(x.as_slice());
        let s = self.data.tr_mul_vec(&xv);
        let gamma = self.penalty.gamma;
        match self.penalty.kind {
            PenaltyKind::L1 => {
                let w = l1_weights(self.data, gamma, &s);
                let f = s
                    .iter()
                    .zip(self.data.column_norms())
                    .map(|(&si, &ni)| l1_excess(si, gamma, ni).powi(2))
                    .sum();
                (f, w)
            }
            PenaltyKind::L0 => {
                let w = l0_weights(self.data, gamma, &s);
                let f = s
                    .iter()
                    .zip(w.iter())
                    .filter(|(_, &wi)| wi != 0.0)
                    .map(|(&si, _)| si * si - gamma)
                    .sum();
                (f, w)
            }
        }
    }
}

impl Objective for SingleObjective<'_> {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        self.value_and_weights(x).0
    }

    fn subgradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.evaluate(x).1
    }

    fn evaluate(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let (f, w) = self.value_and_weights(x);
        let g = self.data.mul_vec(&w);
        (f, DMatrix::from_column_slice(g.len(), 1, g.as_slice()))
    }
}

/// Support of `z` implied by `x`: strict inequality, ties are inactive.
pub fn single_pattern(data: &DataMatrix, penalty: &PenaltyConfig, x: &DVector<f64>) -> SparsityPattern {
    let s = data.tr_mul_vec(x);
    let gamma = penalty.gamma;
    let norms = data.column_norms();
    let mask: Vec<bool> = match penalty.kind {
        PenaltyKind::L1 => s
            .iter()
            .zip(norms)
            .map(|(&si, &ni)| ni > gamma && si.abs() > gamma)
            .collect(),
        PenaltyKind::L0 => s
            .iter()
            .zip(norms)
            .map(|(&si, &ni)| l0_active(si, gamma, ni))
            .collect(),
    };
    SparsityPattern::from_mask(&mask)
}

/// Closed-form maximizer `z` of the ℓ1 problem for fixed `x`.
pub fn z_from_x_l1(data: &DataMatrix, gamma: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_point(data, x)?;
    let s = data.tr_mul_vec(x);
    let w = l1_weights(data, gamma, &s);
    let nw = w.norm();
    if nw == 0.0 {
        return Err(SpcaError::EmptySupport);
    }
    Ok(w / nw)
}

/// Closed-form maximizer `z` of the ℓ0 problem for fixed `x`.
pub fn z_from_x_l0(data: &DataMatrix, gamma: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_point(data, x)?;
    let s = data.tr_mul_vec(x);
    let w = l0_weights(data, gamma, &s);
    let nw = w.norm();
    if nw == 0.0 {
        return Err(SpcaError::EmptySupport);
    }
    Ok(w / nw)
}

/// Threshold above which the solution is identically zero:
/// `max ‖a_i‖` for ℓ1, `max ‖a_i‖²` for ℓ0.
pub fn gamma_max(data: &DataMatrix, kind: PenaltyKind) -> f64 {
    let (_, best) = data.max_column();
    match kind {
        PenaltyKind::L1 => best,
        PenaltyKind::L0 => best * best,
    }
}

/// Number of columns that can possibly be active at this `γ`.
pub fn cardinality_upper_bound(data: &DataMatrix, penalty: &PenaltyConfig) -> usize {
    let gamma = penalty.gamma;
    data.column_norms()
        .iter()
        .filter(|&&ni| match penalty.kind {
            PenaltyKind::L1 => ni > gamma,
            PenaltyKind::L0 => ni * ni > gamma,
        })
        .count()
}

/// The largest column of `A`, normalized. Ties go to the lowest index.
pub fn init_column(data: &DataMatrix) -> Result<DVector<f64>> {
    let (i, norm) = data.max_column();
    if norm == 0.0 {
        return Err(SpcaError::DegenerateData("data matrix is zero; no initial direction".into()));
    }
    Ok(data.matrix().column(i) / norm)
}

#[derive(Clone, Debug)]
pub struct SingleResult {
    /// Final iterate of the pattern search.
    pub x_star: DVector<f64>,
    pub pattern: SparsityPattern,
    /// Unit-norm loading vector, or zero when every variable is suppressed.
    pub z_star: DVector<f64>,
    pub trace: IterateTrace,
    pub fully_suppressed: bool,
}

impl SingleResult {
    pub fn cardinality(&self) -> usize {
        self.z_star.iter().filter(|&&v| v != 0.0).count()
    }

    fn suppressed(data: &DataMatrix, x: DVector<f64>, mut trace: IterateTrace) -> Self {
        trace.termination = Termination::FullySuppressed;
        SingleResult {
            x_star: x,
            pattern: SparsityPattern::none_active(data.ncols(), 1),
            z_star: DVector::zeros(data.ncols()),
            trace,
            fully_suppressed: true,
        }
    }
}

/// Pattern search on the unit sphere followed by filling the active loadings.
///
/// ℓ1 fills `z` with the dominant right singular vector of the active
/// columns; ℓ0 uses the closed form, which is already optimal for its
/// pattern.
pub fn solve_single(
    data: &DataMatrix,
    penalty: &PenaltyConfig,
    x0: &DVector<f64>,
    stop: &StopRule,
) -> Result<SingleResult> {
    penalty.validate()?;
    check_point(data, x0)?;
    let oracle = SingleObjective {
        data,
        penalty: *penalty,
    };
    let start = DMatrix::from_column_slice(x0.len(), 1, x0.as_slice());
    let trace = gradient_scheme::maximize(&oracle, &Domain::unit_sphere(data.nrows()), &start, stop)?;
    if trace.termination == Termination::ObjectiveDecrease {
        let n = trace.values.len();
        return Err(SpcaError::NotConvex {
            before: trace.values[n - 2],
            after: trace.values[n - 1],
        });
    }
    let x_star = DVector::from_column_slice(trace.point.as_slice());

    let pattern = single_pattern(data, penalty, &x_star);
    if pattern.is_empty() {
        return Ok(SingleResult::suppressed(data, x_star, trace));
    }

    let z_star = match penalty.kind {
        PenaltyKind::L1 => {
            postprocess::fill_single_l1_from(data, &pattern, Some(&x_star))
                .z
        }
        PenaltyKind::L0 => z_from_x_l0(data, penalty.gamma, &x_star)?,
    };
    Ok(SingleResult {
        x_star,
        pattern,
        z_star,
        trace,
        fully_suppressed: false,
    })
}
