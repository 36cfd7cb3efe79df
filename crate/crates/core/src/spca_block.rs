//! Block sparse PCA over the Stiefel manifold.
//!
//! With `S = AᵀX` and weights `µ_j > 0` the two objectives are
//!
//! * ℓ1: `Σ_j Σ_i [µ_j |s_ij| − γ]₊²`
//! * ℓ0: `Σ_j Σ_i [(µ_j s_ij)² − γ]₊`
//!
//! Column `j` of the search direction is half the gradient of the
//! objective with respect to `x_j`, so it carries a factor `µ_j` (ℓ1) or
//! `µ_j²` (ℓ0). With unit weights this is the plain thresholded update.

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{Result, SpcaError};
use crate::gradient_scheme::{self, Domain, IterateTrace, Objective, StopRule, Termination};
use crate::numerics::{self, STIEFEL_TOL};
use crate::pattern::SparsityPattern;
use crate::postprocess::{self, FillProblem};
use crate::spca_single::{self, l0_active, l1_excess, PenaltyConfig, PenaltyKind};

#[derive(Clone, Debug, PartialEq)]
pub struct BlockConfig {
    pub m: usize,
    pub mu: Vec<f64>,
    pub penalty: PenaltyConfig,
}

impl BlockConfig {
    /// Unit weights.
    pub fn new(m: usize, penalty: PenaltyConfig) -> Self {
        BlockConfig {
            m,
            mu: vec![1.0; m],
            penalty,
        }
    }

    pub fn with_mu(mut self, mu: Vec<f64>) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self, data: &DataMatrix) -> Result<()> {
        self.penalty.validate()?;
        if self.m == 0 {
            return Err(SpcaError::invalid("block size m must be >= 1"));
        }
        if self.mu.len() != self.m {
            return Err(SpcaError::invalid(format!(
                "expected {} weights, got {}",
                self.m,
                self.mu.len()
            )));
        }
        if self.mu.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(SpcaError::invalid("weights must be positive and finite"));
        }
        if self.m > data.nrows() || self.m > data.ncols() {
            return Err(SpcaError::invalid(format!(
                "m = {} exceeds the dimensions of a {}x{} data matrix",
                self.m,
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(())
    }

    /// Smallest `γ` at which every loading is suppressed:
    /// `max_j µ_j · max_i ‖a_i‖` (ℓ1) or its square (ℓ0).
    pub fn gamma_max(&self, data: &DataMatrix) -> f64 {
        let mu_max = self.mu.iter().cloned().fold(0.0, f64::max);
        let t = mu_max * data.max_column().1;
        match self.penalty.kind {
            PenaltyKind::L1 => t,
            PenaltyKind::L0 => t * t,
        }
    }

    /// Number of `(i, j)` pairs that can be active at this `γ`.
    pub fn cardinality_upper_bound(&self, data: &DataMatrix) -> usize {
        let gamma = self.penalty.gamma;
        self.mu
            .iter()
            .map(|&mu| {
                data.column_norms()
                    .iter()
                    .filter(|&&ni| match self.penalty.kind {
                        PenaltyKind::L1 => mu * ni > gamma,
                        PenaltyKind::L0 => (mu * ni).powi(2) > gamma,
                    })
                    .count()
            })
            .sum()
    }
}

fn check_point(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> Result<()> {
    if x.shape() != (data.nrows(), cfg.m) {
        return Err(SpcaError::dims(format!(
            "point is {:?}, expected {}x{}",
            x.shape(),
            data.nrows(),
            cfg.m
        )));
    }
    Ok(())
}

/// Per-entry weights `w_ij` with direction column `j` equal to `A w_j`,
/// plus the objective value.
fn weights(data: &DataMatrix, cfg: &BlockConfig, s: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let gamma = cfg.penalty.gamma;
    let norms = data.column_norms();
    let mut w = DMatrix::zeros(s.nrows(), s.ncols());
    let mut f = 0.0;
    for (j, &mu) in cfg.mu.iter().enumerate() {
        for i in 0..s.nrows() {
            let sij = s[(i, j)];
            match cfg.penalty.kind {
                PenaltyKind::L1 => {
                    let ex = l1_excess(mu * sij, gamma, mu * norms[i]);
                    f += ex * ex;
                    w[(i, j)] = mu * ex * sij.signum();
                }
                PenaltyKind::L0 => {
                    if l0_active(mu * sij, gamma, mu * norms[i]) {
                        f += (mu * sij).powi(2) - gamma;
                        w[(i, j)] = mu * mu * sij;
                    }
                }
            }
        }
    }
    (f, w)
}

fn value_of(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> f64 {
    weights(data, cfg, &data.tr_mul_mat(x)).0
}

fn direction_of(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> DMatrix<f64> {
    let (_, w) = weights(data, cfg, &data.tr_mul_mat(x));
    data.mul_mat(&w)
}

fn with_kind(cfg: &BlockConfig, kind: PenaltyKind) -> BlockConfig {
    let mut c = cfg.clone();
    c.penalty.kind = kind;
    c
}

pub fn block_l1_value(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> f64 {
    value_of(data, &with_kind(cfg, PenaltyKind::L1), x)
}

/// Half the gradient of [`block_l1_value`].
pub fn block_l1_subgradient(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> DMatrix<f64> {
    direction_of(data, &with_kind(cfg, PenaltyKind::L1), x)
}

pub fn block_l0_value(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> f64 {
    value_of(data, &with_kind(cfg, PenaltyKind::L0), x)
}

/// Half the gradient of [`block_l0_value`] away from kinks.
pub fn block_l0_subgradient(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> DMatrix<f64> {
    direction_of(data, &with_kind(cfg, PenaltyKind::L0), x)
}

#[derive(Clone, Copy, Debug)]
pub struct BlockObjective<'a> {
    pub data: &'a DataMatrix,
    pub cfg: &'a BlockConfig,
}

impl Objective for BlockObjective<'_> {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        value_of(self.data, self.cfg, x)
    }

    fn subgradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        direction_of(self.data, self.cfg, x)
    }

    fn evaluate(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let (f, w) = weights(self.data, self.cfg, &self.data.tr_mul_mat(x));
        (f, self.data.mul_mat(&w))
    }
}

/// Active entries implied by `X`: `µ_j|a_iᵀx_j| > γ` (ℓ1) or
/// `(µ_j a_iᵀx_j)² > γ` (ℓ0).
pub fn block_pattern(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> SparsityPattern {
    let s = data.tr_mul_mat(x);
    let gamma = cfg.penalty.gamma;
    let norms = data.column_norms();
    SparsityPattern::from_fn(data.ncols(), cfg.m, |i, j| {
        let mu = cfg.mu[j];
        match cfg.penalty.kind {
            PenaltyKind::L1 => mu * norms[i] > gamma && mu * s[(i, j)].abs() > gamma,
            PenaltyKind::L0 => l0_active(mu * s[(i, j)], gamma, mu * norms[i]),
        }
    })
}

/// Loadings with columns normalized on their support; columns whose
/// support is empty are left at zero and flagged.
#[derive(Clone, Debug)]
pub struct BlockLoadings {
    pub z: DMatrix<f64>,
    pub empty_columns: Vec<bool>,
}

fn normalize_columns(mut w: DMatrix<f64>) -> BlockLoadings {
    let mut empty_columns = Vec::with_capacity(w.ncols());
    for mut col in w.column_iter_mut() {
        let nc = col.norm();
        if nc > 0.0 {
            col /= nc;
            empty_columns.push(false);
        } else {
            empty_columns.push(true);
        }
    }
    BlockLoadings {
        z: w,
        empty_columns,
    }
}

/// Closed-form `Z` for the ℓ1 block problem at fixed `X`.
pub fn z_from_x_block_l1(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> Result<BlockLoadings> {
    check_point(data, cfg, x)?;
    let cfg = with_kind(cfg, PenaltyKind::L1);
    let (_, w) = weights(data, &cfg, &data.tr_mul_mat(x));
    Ok(normalize_columns(w))
}

/// Closed-form `Z` for the ℓ0 block problem at fixed `X`.
pub fn z_from_x_block_l0(data: &DataMatrix, cfg: &BlockConfig, x: &DMatrix<f64>) -> Result<BlockLoadings> {
    check_point(data, cfg, x)?;
    let cfg = with_kind(cfg, PenaltyKind::L0);
    let (_, w) = weights(data, &cfg, &data.tr_mul_mat(x));
    Ok(normalize_columns(w))
}

/// `[x | X⊥]` with `x` the normalized largest column of `A`.
pub fn init_block(data: &DataMatrix, m: usize) -> Result<DMatrix<f64>> {
    if m == 0 || m > data.nrows() {
        return Err(SpcaError::invalid(format!(
            "need 1 <= m <= p = {}, got m = {m}",
            data.nrows()
        )));
    }
    let x = spca_single::init_column(data)?;
    Ok(numerics::householder_completion(&x, m))
}

#[derive(Clone, Debug)]
pub struct BlockResult {
    pub x_star: DMatrix<f64>,
    pub pattern: SparsityPattern,
    pub z_star: DMatrix<f64>,
    pub empty_columns: Vec<bool>,
    pub trace: IterateTrace,
    pub fully_suppressed: bool,
}

impl BlockResult {
    pub fn cardinality(&self) -> usize {
        self.z_star.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Pattern search on the Stiefel manifold, then the ℓ1 loadings are
/// filled by alternating optimization and the ℓ0 loadings by the closed
/// form.
pub fn solve_block(
    data: &DataMatrix,
    cfg: &BlockConfig,
    x0: &DMatrix<f64>,
    stop: &StopRule,
) -> Result<BlockResult> {
    cfg.validate(data)?;
    check_point(data, cfg, x0)?;
    let oracle = BlockObjective { data, cfg };
    let domain = Domain::Stiefel {
        p: data.nrows(),
        m: cfg.m,
    };
    let mut trace = gradient_scheme::maximize(&oracle, &domain, x0, stop)?;
    if trace.termination == Termination::ObjectiveDecrease {
        let n = trace.values.len();
        return Err(SpcaError::NotConvex {
            before: trace.values[n - 2],
            after: trace.values[n - 1],
        });
    }
    let x_star = trace.point.clone();
    debug_assert!(numerics::is_stiefel(&x_star, STIEFEL_TOL * 100.0));

    let pattern = block_pattern(data, cfg, &x_star);
    if pattern.is_empty() {
        trace.termination = Termination::FullySuppressed;
        return Ok(BlockResult {
            x_star,
            pattern,
            z_star: DMatrix::zeros(data.ncols(), cfg.m),
            empty_columns: vec![true; cfg.m],
            trace,
            fully_suppressed: true,
        });
    }

    let (z_star, empty_columns) = match cfg.penalty.kind {
        PenaltyKind::L1 => {
            let prob = FillProblem {
                pattern: pattern.clone(),
                mu: cfg.mu.clone(),
                x0: x_star.clone(),
            };
            let fill = postprocess::alternating_fill(data, &prob, stop)?;
            (fill.z, fill.empty_columns)
        }
        PenaltyKind::L0 => {
            let l = z_from_x_block_l0(data, cfg, &x_star)?;
            (l.z, l.empty_columns)
        }
    };
    Ok(BlockResult {
        x_star,
        pattern,
        z_star,
        empty_columns,
        trace,
        fully_suppressed: false,
    })
}

/// Column `j` of `AZ` for each `j`; a convenience for variance reporting.
pub fn components(data: &DataMatrix, z: &DMatrix<f64>) -> DMatrix<f64> {
    data.mul_mat(z)
}
