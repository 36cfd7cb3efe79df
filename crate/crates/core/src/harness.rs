//! Experiment engine: loading and generating data, γ sweeps, timing runs
//! and result emission.
//!
//! Grid values are relative: `t ∈ [0, 1)` maps to `γ = t·γ₁` for ℓ1 and
//! `γ = (t·γ₁)²` for ℓ0, where `γ₁ = max_j µ_j · max_i ‖a_i‖`. Every
//! loading vanishes at `t = 1` for both penalties.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{Number, Value};

use crate::data::DataMatrix;
use crate::error::{Result, SpcaError};
use crate::gradient_scheme::StopRule;
use crate::numerics::{self, PowerOptions};
use crate::par::{self, Parallelism};
use crate::postprocess;
use crate::spca_block::{self, BlockConfig};
use crate::spca_single::{self, PenaltyConfig, PenaltyKind};

// ---------------------------------------------------------------- input

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LoadOptions {
    /// Field separator; `None` picks comma when the first data line has
    /// one, whitespace otherwise.
    pub delimiter: Option<char>,
    pub center_columns: bool,
    pub skip_header: bool,
}

/// Parses a delimited numeric table: one row per sample, one column per
/// variable. Blank lines and lines starting with `#` are ignored.
pub fn parse_matrix(text: &str, opts: &LoadOptions) -> Result<DataMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut delimiter = opts.delimiter;
    let mut header_pending = opts.skip_header;
    let mut width = 0;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let delim = *delimiter.get_or_insert(if line.contains(',') { ',' } else { ' ' });
        let fields: Vec<&str> = if delim.is_whitespace() {
            line.split_whitespace().collect()
        } else {
            line.split(delim).map(str::trim).collect()
        };
        let mut row = Vec::with_capacity(fields.len());
        for (c, f) in fields.iter().enumerate() {
            let v = f64::from_str(f).map_err(|_| SpcaError::Parse {
                line: line_no,
                column: c + 1,
                message: format!("not a number: {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(SpcaError::Parse {
                    line: line_no,
                    column: c + 1,
                    message: format!("non-finite value {f:?}"),
                });
            }
            row.push(v);
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(SpcaError::Parse {
                line: line_no,
                column: row.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SpcaError::Parse {
            line: 1,
            column: 1,
            message: "no data rows".into(),
        });
    }
    let flat: Vec<f64> = rows.concat();
    let data = DataMatrix::from_row_slice(rows.len(), width, &flat)?;
    Ok(if opts.center_columns { data.centered() } else { data })
}

pub fn load_matrix(path: &Path, opts: &LoadOptions) -> Result<DataMatrix> {
    parse_matrix(&std::fs::read_to_string(path)?, opts)
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a matrix as comma-separated rows that [`load_matrix`] reads back
/// bit for bit.
pub fn write_matrix(path: &Path, data: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..data.nrows() {
        let row: Vec<String> = data.row(i).iter().map(|&v| format_float(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `p × n` matrix of independent standard normal entries, deterministic in
/// `seed`.
pub fn gen_gaussian(p: usize, n: usize, seed: u64) -> Result<DataMatrix> {
    if p == 0 || n == 0 {
        return Err(SpcaError::invalid("generator needs p, n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fill column by column so a prefix of columns does not depend on n.
    let mut a = DMatrix::zeros(p, n);
    for j in 0..n {
        for i in 0..p {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    DataMatrix::new(a)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputSource {
    File { path: PathBuf, options: LoadOptions },
    Gaussian { p: usize, n: usize, seed: u64 },
}

impl InputSource {
    /// Instance for repetition `rep`: generated inputs use `seed + rep`,
    /// files are the same every time.
    pub fn instance(&self, rep: usize, center: bool) -> Result<DataMatrix> {
        let data = match self {
            InputSource::File { path, options } => {
                let mut o = options.clone();
                o.center_columns |= center;
                return load_matrix(path, &o);
            }
            InputSource::Gaussian { p, n, seed } => gen_gaussian(*p, *n, seed.wrapping_add(rep as u64))?,
        };
        Ok(if center { data.centered() } else { data })
    }
}

// ---------------------------------------------------------------- spec

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Solve,
    Tradeoff,
    Cardsweep,
    Bench,
    Pca,
}

/// Relative γ values in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct GammaGrid(pub Vec<f64>);

impl GammaGrid {
    /// `steps` evenly spaced values from `lo` to `hi` inclusive.
    pub fn linear(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&lo) || !(0.0..1.0).contains(&hi) || lo > hi || steps == 0 {
            return Err(SpcaError::invalid(format!(
                "grid {lo}:{hi}:{steps} must satisfy 0 <= lo <= hi < 1 and steps >= 1"
            )));
        }
        if steps == 1 {
            return Ok(GammaGrid(vec![lo]));
        }
        let h = (hi - lo) / (steps - 1) as f64;
        Ok(GammaGrid((0..steps).map(|k| lo + h * k as f64).collect()))
    }

    /// `0` followed by 50 geometrically spaced values in `[1e-3, 0.999]`.
    pub fn tradeoff_default() -> Self {
        let (lo, hi): (f64, f64) = (1e-3, 0.999);
        let mut v = vec![0.0];
        v.extend((0..50).map(|k| lo * (hi / lo).powf(k as f64 / 49.0)));
        GammaGrid(v)
    }

    /// `k/30` for `k = 0, …, 29`.
    pub fn cardsweep_default() -> Self {
        GammaGrid((0..30).map(|k| k as f64 / 30.0).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() || self.0.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(SpcaError::invalid("relative gamma values must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Converts a relative value to an absolute `γ`.
pub fn absolute_gamma(kind: PenaltyKind, t: f64, scale: f64) -> f64 {
    match kind {
        PenaltyKind::L1 => t * scale,
        PenaltyKind::L0 => (t * scale).powi(2),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub mode: Mode,
    /// One source, or one per size for `bench`.
    pub inputs: Vec<InputSource>,
    pub penalty: PenaltyKind,
    /// Absolute `γ` for `solve`.
    pub gamma: f64,
    /// Relative grid for `tradeoff` and `cardsweep`.
    pub grid: Option<GammaGrid>,
    /// Number of components; block methods run when greater than one.
    pub block: usize,
    pub mu: Option<Vec<f64>>,
    pub center: bool,
    pub eps: f64,
    pub max_iter: usize,
    pub reps: usize,
    pub parallelism: Parallelism,
}

impl ExperimentSpec {
    pub fn new(mode: Mode, input: InputSource) -> Self {
        ExperimentSpec {
            mode,
            inputs: vec![input],
            penalty: PenaltyKind::L1,
            gamma: 0.0,
            grid: None,
            block: 1,
            mu: None,
            center: false,
            eps: StopRule::default().rel_tol,
            max_iter: StopRule::default().max_iter,
            reps: 1,
            parallelism: Parallelism::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(SpcaError::invalid("no input given"));
        }
        if self.inputs.len() > 1 && self.mode != Mode::Bench {
            return Err(SpcaError::invalid("several inputs are only accepted by bench"));
        }
        if self.reps == 0 {
            return Err(SpcaError::invalid("repetitions must be >= 1"));
        }
        if self.block == 0 {
            return Err(SpcaError::invalid("block size must be >= 1"));
        }
        if let Some(mu) = &self.mu {
            if mu.len() != self.block {
                return Err(SpcaError::invalid(format!(
                    "{} weights given for {} components",
                    mu.len(),
                    self.block
                )));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(SpcaError::invalid("gamma must be finite and >= 0"));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        self.stop().validate()
    }

    pub fn stop(&self) -> StopRule {
        StopRule::default()
            .with_rel_tol(self.eps)
            .with_max_iter(self.max_iter)
    }

    fn weights(&self) -> Vec<f64> {
        self.mu.clone().unwrap_or_else(|| vec![1.0; self.block])
    }

    fn grid(&self) -> GammaGrid {
        self.grid.clone().unwrap_or_else(|| match self.mode {
            Mode::Cardsweep => GammaGrid::cardsweep_default(),
            _ => GammaGrid::tradeoff_default(),
        })
    }
}

// ---------------------------------------------------------------- results

/// One solve. The first eight fields form the stable schema; the rest give
/// context and are `null` where they do not apply.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    pub gamma: f64,
    pub cardinality: usize,
    pub variance: f64,
    pub variance_ratio: f64,
    pub avar: f64,
    pub iterations: usize,
    pub time_ms: f64,
    pub termination: String,
    pub rep: usize,
    pub gamma_rel: Option<f64>,
    pub bound: Option<usize>,
    pub p: usize,
    pub n: usize,
    pub component: Option<usize>,
}

const POINT_FIELDS: [&str; 14] = [
    "gamma",
    "cardinality",
    "variance",
    "variance_ratio",
    "avar",
    "iterations",
    "time_ms",
    "termination",
    "rep",
    "gamma_rel",
    "bound",
    "p",
    "n",
    "component",
];

/// Per-γ means over repetitions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragePoint {
    pub gamma_rel: f64,
    pub gamma: f64,
    pub cardinality: f64,
    pub bound: f64,
    pub variance_ratio: f64,
    pub avar: f64,
    pub iterations: f64,
    pub time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub p: usize,
    pub n: usize,
    pub penalty: PenaltyKind,
    pub gamma_rel: f64,
    pub mean_time_ms: f64,
    pub mean_iterations: f64,
    pub reps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub git_describe: String,
    pub points: Vec<Point>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub averages: Vec<AveragePoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<BenchRow>,
}

// ---------------------------------------------------------------- engine

/// Reference variance for ratios: `σ_max(A)²` for one component, the
/// adjusted variance of the leading principal components otherwise.
pub fn variance_denominator(data: &DataMatrix, m: usize) -> Result<f64> {
    if m == 1 {
        let opts = PowerOptions {
            parallelism: data.parallelism(),
            ..PowerOptions::default()
        };
        let s = numerics::rank_one_svd_with(data.matrix(), None, &opts).sigma;
        return Ok(s * s);
    }
    let (z, _) = pca_components(data, m)?;
    numerics::adjusted_variance(&data.mul_mat(&z))
}

/// Leading `m` loading vectors by rank-one power iteration and deflation,
/// with the iteration count of each.
pub fn pca_components(data: &DataMatrix, m: usize) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if m == 0 || m > data.nrows().min(data.ncols()) {
        return Err(SpcaError::invalid(format!(
            "cannot extract {m} components from a {}x{} matrix",
            data.nrows(),
            data.ncols()
        )));
    }
    let opts = PowerOptions {
        parallelism: data.parallelism(),
        ..PowerOptions::default()
    };
    let mut residual = data.clone();
    let mut z = DMatrix::zeros(data.ncols(), m);
    let mut iters = Vec::with_capacity(m);
    for j in 0..m {
        let svd = numerics::rank_one_svd_with(residual.matrix(), None, &opts);
        iters.push(svd.iterations);
        if svd.zero_matrix {
            break;
        }
        z.set_column(j, &svd.v);
        residual = postprocess::deflate(&residual, &svd.v)?;
    }
    Ok((z, iters))
}

/// Outcome of one sparse solve, before it is tagged with its context.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub cardinality: usize,
    pub variance: f64,
    pub avar: f64,
    pub iterations: usize,
    pub termination: String,
    pub bound: usize,
    pub time_ms: f64,
}

/// Scale `γ₁` behind relative grid values.
pub fn gamma_scale(data: &DataMatrix, mu: &[f64]) -> f64 {
    mu.iter().cloned().fold(0.0, f64::max) * data.max_column().1
}

/// Runs the single-unit solver (`mu.len() == 1` with unit weight) or the
/// block solver, timing initialization, the solve and post-processing.
pub fn solve_once(
    data: &DataMatrix,
    kind: PenaltyKind,
    gamma: f64,
    mu: &[f64],
    stop: &StopRule,
) -> Result<Outcome> {
    let penalty = PenaltyConfig { kind, gamma };
    let start = Instant::now();
    if mu.len() == 1 && mu[0] == 1.0 {
        let x0 = spca_single::init_column(data)?;
        let r = spca_single::solve_single(data, &penalty, &x0, stop)?;
        let time_ms = start.elapsed().as_secs_f64() * 1e3;
        let v = postprocess::variance(data, &r.z_star);
        return Ok(Outcome {
            cardinality: r.cardinality(),
            variance: v,
            avar: v,
            iterations: r.trace.iterations,
            termination: r.trace.termination.as_str().into(),
            bound: spca_single::cardinality_upper_bound(data, &penalty),
            time_ms,
        });
    }
    let cfg = BlockConfig::new(mu.len(), penalty).with_mu(mu.to_vec());
    let x0 = spca_block::init_block(data, cfg.m)?;
    let r = spca_block::solve_block(data, &cfg, &x0, stop)?;
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    let y = data.mul_mat(&r.z_star);
    let variance = y.column_iter().map(|c| c.norm_squared()).sum();
    let avar = if cfg.m <= data.nrows() {
        numerics::adjusted_variance(&y)?
    } else {
        f64::NAN
    };
    Ok(Outcome {
        cardinality: r.cardinality(),
        variance,
        avar,
        iterations: r.trace.iterations,
        termination: r.trace.termination.as_str().into(),
        bound: cfg.cardinality_upper_bound(data),
        time_ms,
    })
}

fn point(o: Outcome, gamma: f64, denom: f64, rep: usize, data: &DataMatrix) -> Point {
    Point {
        gamma,
        cardinality: o.cardinality,
        variance: o.variance,
        variance_ratio: if denom > 0.0 { o.avar / denom } else { f64::NAN },
        avar: o.avar,
        iterations: o.iterations,
        time_ms: o.time_ms,
        termination: o.termination,
        rep,
        gamma_rel: None,
        bound: Some(o.bound),
        p: data.nrows(),
        n: data.ncols(),
        component: None,
    }
}

fn fan_out<T: Send>(
    spec: &ExperimentSpec,
    f: impl Fn(usize) -> Result<Vec<T>> + Sync + Send,
) -> Result<Vec<T>> {
    let out = par::map_indexed(spec.reps, spec.parallelism, f);
    let mut flat = Vec::new();
    for r in out {
        flat.extend(r?);
    }
    Ok(flat)
}

fn instance(spec: &ExperimentSpec, input: &InputSource, rep: usize) -> Result<DataMatrix> {
    Ok(input
        .instance(rep, spec.center)?
        .with_parallelism(spec.parallelism))
}

/// `γ` fixed at `spec.gamma`, one point per repetition.
pub fn solve_points(spec: &ExperimentSpec) -> Result<Vec<Point>> {
    let mu = spec.weights();
    let stop = spec.stop();
    let input = &spec.inputs[0];
    fan_out(spec, |rep| {
        let data = instance(spec, input, rep)?;
        let denom = variance_denominator(&data, mu.len())?;
        let o = solve_once(&data, spec.penalty, spec.gamma, &mu, &stop)?;
        Ok(vec![point(o, spec.gamma, denom, rep, &data)])
    })
}

/// One point per relative grid value per repetition. The variance
/// denominator is computed once per instance.
pub fn sweep_points(spec: &ExperimentSpec) -> Result<Vec<Point>> {
    let mu = spec.weights();
    let stop = spec.stop();
    let grid = spec.grid();
    let input = &spec.inputs[0];
    fan_out(spec, |rep| {
        let data = instance(spec, input, rep)?;
        let denom = variance_denominator(&data, mu.len())?;
        let scale = gamma_scale(&data, &mu);
        grid.0
            .iter()
            .map(|&t| {
                let gamma = absolute_gamma(spec.penalty, t, scale);
                let o = solve_once(&data, spec.penalty, gamma, &mu, &stop)?;
                let mut pt = point(o, gamma, denom, rep, &data);
                pt.gamma_rel = Some(t);
                Ok(pt)
            })
            .collect()
    })
}

/// Means over repetitions for each grid value, in grid order.
pub fn average_by_gamma(points: &[Point]) -> Vec<AveragePoint> {
    let mut keys: Vec<f64> = Vec::new();
    for p in points {
        let t = p.gamma_rel.unwrap_or(p.gamma);
        if !keys.contains(&t) {
            keys.push(t);
        }
    }
    keys.into_iter()
        .map(|t| {
            let group: Vec<&Point> = points
                .iter()
                .filter(|p| p.gamma_rel.unwrap_or(p.gamma) == t)
                .collect();
            let k = group.len() as f64;
            let mean = |f: &dyn Fn(&Point) -> f64| group.iter().map(|p| f(p)).sum::<f64>() / k;
            AveragePoint {
                gamma_rel: t,
                gamma: mean(&|p| p.gamma),
                cardinality: mean(&|p| p.cardinality as f64),
                bound: mean(&|p| p.bound.unwrap_or(0) as f64),
                variance_ratio: mean(&|p| p.variance_ratio),
                avar: mean(&|p| p.avar),
                iterations: mean(&|p| p.iterations as f64),
                time_ms: mean(&|p| p.time_ms),
            }
        })
        .collect()
}

/// Relative `γ` used for timing runs: 10% of `γ_max` for ℓ1 and 1% of
/// `γ_max` for ℓ0.
pub const BENCH_GAMMA_REL: f64 = 0.1;

/// Timing runs, one row per input. Repetitions run one after another so
/// that timings do not compete for cores.
pub fn bench_points(spec: &ExperimentSpec) -> Result<(Vec<Point>, Vec<BenchRow>)> {
    let mu = spec.weights();
    let stop = spec.stop();
    let mut points = Vec::new();
    let mut table = Vec::new();
    for input in &spec.inputs {
        let mut rows = Vec::with_capacity(spec.reps);
        for rep in 0..spec.reps {
            let data = instance(spec, input, rep)?;
            let scale = gamma_scale(&data, &mu);
            let gamma = absolute_gamma(spec.penalty, BENCH_GAMMA_REL, scale);
            let o = solve_once(&data, spec.penalty, gamma, &mu, &stop)?;
            // The ratio is not needed for timing; skip the extra SVD.
            let mut pt = point(o, gamma, f64::NAN, rep, &data);
            pt.variance_ratio = f64::NAN;
            pt.gamma_rel = Some(BENCH_GAMMA_REL);
            rows.push(pt);
        }
        let k = rows.len() as f64;
        table.push(BenchRow {
            p: rows[0].p,
            n: rows[0].n,
            penalty: spec.penalty,
            gamma_rel: BENCH_GAMMA_REL,
            mean_time_ms: rows.iter().map(|r| r.time_ms).sum::<f64>() / k,
            mean_iterations: rows.iter().map(|r| r.iterations as f64).sum::<f64>() / k,
            reps: spec.reps,
        });
        points.extend(rows);
    }
    Ok((points, table))
}

/// Plain PCA baseline: one point per component with cumulative adjusted
/// variance and its share of the total variance `‖A‖_F²`.
pub fn pca_points(spec: &ExperimentSpec) -> Result<Vec<Point>> {
    let input = &spec.inputs[0];
    let m = spec.block;
    fan_out(spec, |rep| {
        let data = instance(spec, input, rep)?;
        let start = Instant::now();
        let (z, iters) = pca_components(&data, m)?;
        let time_ms = start.elapsed().as_secs_f64() * 1e3;
        let total = data.matrix().norm_squared();
        let y = data.mul_mat(&z);
        (0..m)
            .map(|j| {
                let avar = numerics::adjusted_variance(&y.columns(0, j + 1).into_owned())?;
                Ok(Point {
                    gamma: 0.0,
                    cardinality: z.column(j).iter().filter(|&&v| v != 0.0).count(),
                    variance: y.column(j).norm_squared(),
                    variance_ratio: avar / total,
                    avar,
                    iterations: iters.get(j).copied().unwrap_or(0),
                    time_ms,
                    termination: "converged".into(),
                    rep,
                    gamma_rel: None,
                    bound: None,
                    p: data.nrows(),
                    n: data.ncols(),
                    component: Some(j),
                })
            })
            .collect()
    })
}

pub fn run(spec: &ExperimentSpec, git_describe: &str) -> Result<Report> {
    spec.validate()?;
    let mut averages = Vec::new();
    let mut table = Vec::new();
    let points = match spec.mode {
        Mode::Solve => solve_points(spec)?,
        Mode::Tradeoff | Mode::Cardsweep => {
            let pts = sweep_points(spec)?;
            averages = average_by_gamma(&pts);
            pts
        }
        Mode::Bench => {
            let (pts, t) = bench_points(spec)?;
            table = t;
            pts
        }
        Mode::Pca => pca_points(spec)?,
    };
    Ok(Report {
        spec: spec.clone(),
        git_describe: git_describe.to_string(),
        points,
        averages,
        table,
    })
}

// ---------------------------------------------------------------- output

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = SpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(SpcaError::invalid(format!("unknown format {other:?}"))),
        }
    }
}

/// Rewrites every non-integer number with 17 significant digits.
fn reformat_floats(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if !(n.is_i64() || n.is_u64()) {
                if let Some(f) = n.as_f64() {
                    *n = Number::from_str(&format_float(f)).expect("formatted float is a JSON number");
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(reformat_floats),
        Value::Object(o) => o.values_mut().for_each(reformat_floats),
        _ => {}
    }
}

pub fn to_json(report: &Report) -> Result<String> {
    let mut v = serde_json::to_value(report).map_err(|e| SpcaError::Serialize(e.to_string()))?;
    reformat_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| SpcaError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Header plus one row per point, columns in schema order.
pub fn to_csv(points: &[Point]) -> Result<String> {
    let mut out = POINT_FIELDS.join(",");
    out.push('\n');
    for p in points {
        let mut v = serde_json::to_value(p).map_err(|e| SpcaError::Serialize(e.to_string()))?;
        reformat_floats(&mut v);
        let row: Vec<String> = POINT_FIELDS.iter().map(|f| csv_cell(&v[*f])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(out)
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json(report),
        Format::Csv => to_csv(&report.points),
    }
}

/// Writes the report to `path`, or to standard output when `path` is `None`.
pub fn emit_results(report: &Report, format: Format, path: Option<&Path>) -> Result<()> {
    let text = render(report, format)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
