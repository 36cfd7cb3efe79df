//! Maximization of a convex function over a compact set by repeatedly
//! maximizing its linearization.
//!
//! Each step solves `max { ⟨f'(x_k), y⟩ : y ∈ Q }` in closed form: on a
//! sphere of radius `r` the maximizer is `r·g/‖g‖`, on the Stiefel manifold
//! it is the polar factor of `g`. For convex `f` the objective sequence is
//! nondecreasing, which is what the termination logic relies on.
//!
//! Points are stored as `p × m` matrices; sphere points use `m = 1`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, SpcaError};
use crate::numerics;

/// Feasible set of the maximization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    /// `{x ∈ R^dim : ‖x‖ = radius}`.
    Sphere { radius: f64, dim: usize },
    /// `{X ∈ R^{p×m} : XᵀX = I_m}`.
    Stiefel { p: usize, m: usize },
}

impl Domain {
    pub fn unit_sphere(dim: usize) -> Self {
        Domain::Sphere { radius: 1.0, dim }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::Sphere { radius, dim } => {
                if !(radius > 0.0 && radius.is_finite()) || dim == 0 {
                    return Err(SpcaError::invalid("sphere needs radius > 0 and dim >= 1"));
                }
            }
            Domain::Stiefel { p, m } => {
                if m == 0 || m > p {
                    return Err(SpcaError::invalid("Stiefel manifold needs p >= m >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        match *self {
            Domain::Sphere { dim, .. } => (dim, 1),
            Domain::Stiefel { p, m } => (p, m),
        }
    }

    /// Whether `x` lies in the set within `tol`.
    pub fn contains(&self, x: &DMatrix<f64>, tol: f64) -> bool {
        if x.shape() != self.shape() {
            return false;
        }
        match *self {
            Domain::Sphere { radius, .. } => (x.norm() - radius).abs() <= tol,
            Domain::Stiefel { .. } => numerics::is_stiefel(x, tol),
        }
    }
}

/// A convex objective together with a subgradient selection.
pub trait Objective {
    fn value(&self, x: &DMatrix<f64>) -> f64;

    /// Any element of `∂f(x)` up to a positive factor (the step only uses
    /// its direction on the sphere; on the Stiefel manifold the factor must
    /// be the same for every column).
    fn subgradient(&self, x: &DMatrix<f64>) -> DMatrix<f64>;

    /// Both at once; override when they share work.
    fn evaluate(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        (self.value(x), self.subgradient(x))
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        (**self).value(x)
    }
    fn subgradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        (**self).subgradient(x)
    }
    fn evaluate(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        (**self).evaluate(x)
    }
}

/// Termination and bookkeeping options.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StopRule {
    /// Stop once `(f(x_{k+1}) − f(x_k)) / f(x_k) ≤ rel_tol`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Stop once `‖x_{k+1} − x_k‖ ≤ step_tol`.
    pub step_tol: f64,
    /// Record `‖x_{k+1} − x_k‖` per iteration.
    pub record_steps: bool,
    /// Record the optimality measure at every iterate (costs one extra
    /// step computation per iteration).
    pub record_optimality: bool,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            rel_tol: 1e-4,
            max_iter: 100_000,
            step_tol: 1e-12,
            record_steps: false,
            record_optimality: false,
        }
    }
}

impl StopRule {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_steps = true;
        self.record_optimality = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_iter == 0 || !(self.step_tol >= 0.0) {
            return Err(SpcaError::invalid("stop rule needs rel_tol > 0 and max_iter >= 1"));
        }
        Ok(())
    }
}

/// Denominators below this switch the stopping test to absolute change.
const ZERO_OBJECTIVE: f64 = 1e-15;

/// Relative decrease that marks an objective as nonconvex.
const DECREASE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    RelativeChange,
    StepTolerance,
    StationaryZeroSubgradient,
    MaxIterations,
    ObjectiveDecrease,
    FullySuppressed,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::RelativeChange => "relative_change",
            Termination::StepTolerance => "step_tolerance",
            Termination::StationaryZeroSubgradient => "stationary_zero_subgradient",
            Termination::MaxIterations => "max_iterations",
            Termination::ObjectiveDecrease => "objective_decrease",
            Termination::FullySuppressed => "fully_suppressed",
        }
    }
}

/// Record of one run.
#[derive(Clone, Debug)]
pub struct IterateTrace {
    pub point: DMatrix<f64>,
    /// `f(x_0), f(x_1), …, f(x_k)`.
    pub values: Vec<f64>,
    /// `‖x_{i+1} − x_i‖`, when requested.
    pub step_norms: Vec<f64>,
    /// `Δ(x_0), …, Δ(x_k)`, when requested.
    pub optimality: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Number of Stiefel steps whose direction was rank deficient.
    pub rank_deficient_steps: usize,
}

impl IterateTrace {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trace holds at least f(x0)")
    }

    /// Largest drop between consecutive objective values (0 if none).
    pub fn max_decrease(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// Maximizer of `⟨g, y⟩` over the domain.
pub fn domain_step(g: &DMatrix<f64>, domain: &Domain) -> Result<DMatrix<f64>> {
    Ok(domain_step_flagged(g, domain)?.0)
}

fn domain_step_flagged(g: &DMatrix<f64>, domain: &Domain) -> Result<(DMatrix<f64>, bool)> {
    if g.shape() != domain.shape() {
        return Err(SpcaError::dims(format!(
            "direction is {:?}, domain expects {:?}",
            g.shape(),
            domain.shape()
        )));
    }
    match *domain {
        Domain::Sphere { radius, .. } => {
            let ng = g.norm();
            if ng == 0.0 || !ng.is_finite() {
                return Err(SpcaError::ZeroDirection);
            }
            Ok((g * (radius / ng), false))
        }
        Domain::Stiefel { .. } => {
            let pf = numerics::polar_factor(g)?;
            Ok((pf.u, pf.rank_deficient))
        }
    }
}

/// `max_{y ∈ Q} ⟨g, y⟩`.
fn support_value(g: &DMatrix<f64>, domain: &Domain) -> f64 {
    match *domain {
        Domain::Sphere { radius, .. } => radius * g.norm(),
        Domain::Stiefel { .. } => numerics::nuclear_norm(g),
    }
}

fn measure_with(g: &DMatrix<f64>, domain: &Domain, x: &DMatrix<f64>) -> f64 {
    (support_value(g, domain) - g.dot(x)).max(0.0)
}

/// First-order optimality measure `Δ(x) = max_{y ∈ Q} ⟨f'(x), y − x⟩`.
pub fn optimality_measure<O: Objective + ?Sized>(
    oracle: &O,
    domain: &Domain,
    x: &DMatrix<f64>,
) -> f64 {
    measure_with(&oracle.subgradient(x), domain, x)
}

/// Runs the gradient scheme from `x0`.
pub fn maximize<O: Objective + ?Sized>(
    oracle: &O,
    domain: &Domain,
    x0: &DMatrix<f64>,
    stop: &StopRule,
) -> Result<IterateTrace> {
    domain.validate()?;
    stop.validate()?;
    if !domain.contains(x0, 1e-8) {
        return Err(SpcaError::invalid("initial point is not in the domain"));
    }

    let mut x = x0.clone();
    let (mut f, mut g) = oracle.evaluate(&x);
    let mut trace = IterateTrace {
        point: x.clone(),
        values: vec![f],
        step_norms: Vec::new(),
        optimality: Vec::new(),
        iterations: 0,
        termination: Termination::MaxIterations,
        rank_deficient_steps: 0,
    };
    if stop.record_optimality {
        trace.optimality.push(measure_with(&g, domain, &x));
    }

    for _ in 0..stop.max_iter {
        if g.iter().all(|&v| v == 0.0) {
            trace.termination = Termination::StationaryZeroSubgradient;
            break;
        }
        let (next, deficient) = domain_step_flagged(&g, domain)?;
        if deficient {
            trace.rank_deficient_steps += 1;
        }
        let step = (&next - &x).norm();
        let (f_next, g_next) = oracle.evaluate(&next);

        trace.iterations += 1;
        trace.values.push(f_next);
        if stop.record_steps {
            trace.step_norms.push(step);
        }
        if stop.record_optimality {
            trace.optimality.push(measure_with(&g_next, domain, &next));
        }

        let change = f_next - f;
        x = next;
        g = g_next;
        let f_prev = f;
        f = f_next;

        if change < -DECREASE_TOL * f_prev.abs().max(1.0) {
            trace.termination = Termination::ObjectiveDecrease;
            break;
        }
        if step <= stop.step_tol {
            trace.termination = Termination::StepTolerance;
            break;
        }
        let rel = if f_prev.abs() <= ZERO_OBJECTIVE {
            change
        } else {
            change / f_prev.abs()
        };
        if rel <= stop.rel_tol {
            trace.termination = Termination::RelativeChange;
            break;
        }
    }
    trace.point = x;
    Ok(trace)
}

/// Checks `min_{i≤k} Δ(x_i) ≤ (f* − f(x_0)) / (k + 1)` for every recorded `k`.
///
/// Returns `false` when the trace carries no optimality record. A slack of
/// `1e-12` absorbs rounding in `Δ`.
pub fn rate_bound_check(trace: &IterateTrace, f_star: f64) -> bool {
    if trace.optimality.is_empty() {
        return false;
    }
    let gap = f_star - trace.values[0];
    let mut best = f64::INFINITY;
    trace.optimality.iter().enumerate().all(|(k, &d)| {
        best = best.min(d);
        best <= gap / (k as f64 + 1.0) + 1e-12
    })
}

/// `f(x) = ½ xᵀCx` on vectors stored as `p × 1` matrices.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub c: DMatrix<f64>,
}

impl Objective for Quadratic {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        0.5 * x.dot(&(&self.c * x))
    }
    fn subgradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.c * x
    }
    fn evaluate(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let cx = &self.c * x;
        (0.5 * x.dot(&cx), cx)
    }
}

fn check_symmetric(c: &DMatrix<f64>) -> Result<()> {
    if !c.is_square() {
        return Err(SpcaError::dims("matrix must be square"));
    }
    if (c - c.transpose()).norm() > 1e-12 * c.norm().max(1.0) {
        return Err(SpcaError::invalid("matrix must be symmetric"));
    }
    Ok(())
}

fn as_column(x: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(x.len(), 1, x.as_slice())
}

/// Power iteration `x ← Cx/‖Cx‖` for symmetric PSD `C`, as the gradient
/// scheme on the unit sphere with `f(x) = ½xᵀCx`.
pub fn power_method(c: &DMatrix<f64>, x0: &DVector<f64>, stop: &StopRule) -> Result<IterateTrace> {
    check_symmetric(c)?;
    let q = Quadratic { c: c.clone() };
    let trace = maximize(&q, &Domain::unit_sphere(c.nrows()), &as_column(x0), stop)?;
    if trace.termination == Termination::ObjectiveDecrease {
        return Err(not_convex(&trace));
    }
    Ok(trace)
}

fn not_convex(trace: &IterateTrace) -> SpcaError {
    let n = trace.values.len();
    SpcaError::NotConvex {
        before: trace.values[n.saturating_sub(2)],
        after: trace.values[n - 1],
    }
}

#[derive(Clone, Debug)]
pub struct ShiftedPowerResult {
    pub trace: IterateTrace,
    /// `x*ᵀCx*` for the unshifted matrix, i.e. `2f̂ − ω`.
    pub eigenvalue: f64,
}

/// Power iteration on `C + ωI` for symmetric, possibly indefinite `C`.
pub fn shifted_power_method(
    c: &DMatrix<f64>,
    omega: f64,
    x0: &DVector<f64>,
    stop: &StopRule,
) -> Result<ShiftedPowerResult> {
    check_symmetric(c)?;
    let p = c.nrows();
    let shifted = c + DMatrix::identity(p, p) * omega;
    let q = Quadratic { c: shifted };
    let trace = maximize(&q, &Domain::unit_sphere(p), &as_column(x0), stop)?;
    if trace.termination == Termination::ObjectiveDecrease {
        return Err(not_convex(&trace));
    }
    let eigenvalue = 2.0 * trace.final_value() - omega;
    Ok(ShiftedPowerResult { trace, eigenvalue })
}

/// `f(X) = ω‖X‖² − ‖DX‖² + 2⟨DᵀC, X⟩`, the shifted form of
/// `−‖C − DX‖² + const` on the Stiefel manifold.
#[derive(Clone, Debug)]
struct ProcrustesObjective {
    omega: f64,
    d: DMatrix<f64>,
    dtd: DMatrix<f64>,
    dtc: DMatrix<f64>,
}

impl Objective for ProcrustesObjective {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        let dx = &self.d * x;
        self.omega * x.norm_squared() - dx.norm_squared() + 2.0 * self.dtc.dot(x)
    }
    fn subgradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        // half the gradient
        x * self.omega - &self.dtd * x + &self.dtc
    }
}

#[derive(Clone, Debug)]
pub struct ProcrustesResult {
    pub trace: IterateTrace,
    pub x: DMatrix<f64>,
    /// `‖C − DX‖²_F` at the returned point.
    pub residual: f64,
}

/// `min ‖C − DX‖²_F` subject to `XᵀX = I` for `C: p × m`, `D: p × p`.
/// `omega` must exceed `λ_max(DᵀD)` for the shifted objective to be convex.
pub fn procrustes(
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    omega: f64,
    x0: &DMatrix<f64>,
    stop: &StopRule,
) -> Result<ProcrustesResult> {
    let (p, m) = c.shape();
    if d.shape() != (p, p) {
        return Err(SpcaError::dims("D must be p x p with p = rows of C"));
    }
    let obj = ProcrustesObjective {
        omega,
        d: d.clone(),
        dtd: d.tr_mul(d),
        dtc: d.tr_mul(c),
    };
    let trace = maximize(&obj, &Domain::Stiefel { p, m }, x0, stop)?;
    if trace.termination == Termination::ObjectiveDecrease {
        return Err(not_convex(&trace));
    }
    let x = trace.point.clone();
    let residual = (c - d * &x).norm_squared();
    Ok(ProcrustesResult { trace, x, residual })
}
