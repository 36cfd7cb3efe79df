//! Dense kernels: polar factor, dominant singular pair, adjusted variance,
//! and the strong-convexity constant of level sets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SpcaError};
use crate::par::{self, Parallelism};

/// Tolerance on `UᵀU = I` for points on the Stiefel manifold.
pub const STIEFEL_TOL: f64 = 1e-10;

/// Orthonormal factor of a polar decomposition `C = UP`.
#[derive(Clone, Debug)]
pub struct PolarFactor {
    pub u: DMatrix<f64>,
    /// Sum of the singular values of `C`, equal to `⟨C, U⟩`.
    pub nuclear_norm: f64,
    pub rank: usize,
    /// Set when `C` had numerically zero singular values and part of `U`
    /// was filled in with an arbitrary orthonormal completion.
    pub rank_deficient: bool,
}

/// Maximizer of `⟨C, X⟩` over `p × m` matrices with orthonormal columns.
///
/// Computed from the thin SVD `C = V Σ Wᵀ` as `U = V Wᵀ`. Left singular
/// vectors belonging to numerically zero singular values are replaced with
/// a deterministic orthonormal completion; the objective value is
/// unaffected by that choice.
pub fn polar_factor(c: &DMatrix<f64>) -> Result<PolarFactor> {
    let (p, m) = c.shape();
    if m == 0 || m > p {
        return Err(SpcaError::dims(format!(
            "polar factor needs p >= m >= 1, got {p}x{m}"
        )));
    }
    if let Some(idx) = c.iter().position(|v| !v.is_finite()) {
        return Err(SpcaError::NonFinite {
            row: idx % p,
            col: idx / p,
        });
    }

    let svd = c.clone().svd(true, true);
    let mut left = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = svd.singular_values;

    let smax = sv.max();
    let cutoff = (p.max(m) as f64) * f64::EPSILON * smax;
    let keep: Vec<usize> = (0..m).filter(|&i| smax > 0.0 && sv[i] > cutoff).collect();
    let rank = keep.len();

    if rank < m {
        let kept = left.select_columns(keep.iter());
        let completed = orthonormal_completion(&kept, m);
        let mut extra = rank;
        for i in 0..m {
            if !keep.contains(&i) {
                left.set_column(i, &completed.column(extra));
                extra += 1;
            }
        }
    }

    Ok(PolarFactor {
        u: left * v_t,
        nuclear_norm: sv.sum(),
        rank,
        rank_deficient: rank < m,
    })
}

/// Sum of singular values of `c`.
pub fn nuclear_norm(c: &DMatrix<f64>) -> f64 {
    c.singular_values().sum()
}

/// Extends the orthonormal columns of `basis` (`p × r`) to `p × m`.
///
/// Greedy Gram–Schmidt over the standard basis, taking at each step the
/// coordinate vector with the largest residual. Projections are applied
/// twice to keep orthogonality at machine precision.
pub fn orthonormal_completion(basis: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let p = basis.nrows();
    assert!(m <= p, "cannot complete to more than p columns");
    let mut cols: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    while cols.len() < m {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = -1.0;
        for k in 0..p {
            let mut r = DVector::zeros(p);
            r[k] = 1.0;
            for _ in 0..2 {
                for q in &cols {
                    let d = q.dot(&r);
                    r.axpy(-d, q, 1.0);
                }
            }
            let nr = r.norm();
            if nr > best_norm {
                best_norm = nr;
                best = Some(r);
            }
        }
        let r = best.expect("p >= 1");
        cols.push(r / best_norm);
    }
    DMatrix::from_columns(&cols)
}

/// `p × m` orthonormal matrix whose first column is the unit vector `x`,
/// completed with the columns of the Householder reflector that maps `e₁`
/// onto the line through `x`.
pub fn householder_completion(x: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let p = x.len();
    assert!(m >= 1 && m <= p, "need 1 <= m <= p");
    let s = if x[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = x.clone();
    v[0] += s;
    let vv = v.norm_squared();
    let mut out = DMatrix::zeros(p, m);
    out.set_column(0, x);
    for j in 1..m {
        // column j of H = I - 2vvᵀ/vᵀv
        let mut h = v.clone() * (-2.0 * v[j] / vv);
        h[j] += 1.0;
        out.set_column(j, &h);
    }
    out
}

/// True when `x` has orthonormal columns within `tol` (Frobenius).
pub fn is_stiefel(x: &DMatrix<f64>, tol: f64) -> bool {
    let m = x.ncols();
    (x.tr_mul(x) - DMatrix::identity(m, m)).norm() <= tol
}

/// Dominant singular triple `σ u vᵀ`.
#[derive(Clone, Debug)]
pub struct RankOneSvd {
    pub sigma: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub zero_matrix: bool,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct PowerOptions {
    /// Stop once successive iterates differ by at most this much.
    pub tol: f64,
    pub max_iter: usize,
    pub parallelism: Parallelism,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-12,
            max_iter: 10_000,
            parallelism: Parallelism::default(),
        }
    }
}

/// Dominant singular pair of `a` by power iteration with default options.
pub fn rank_one_svd(a: &DMatrix<f64>) -> RankOneSvd {
    rank_one_svd_with(a, None, &PowerOptions::default())
}

/// Power iteration on `AᵀA` (when `k ≤ p`) or `AAᵀ` (otherwise).
///
/// `start_left` optionally seeds the iteration with an approximate left
/// singular vector; by default the largest column of `a` is used.
pub fn rank_one_svd_with(
    a: &DMatrix<f64>,
    start_left: Option<&DVector<f64>>,
    opts: &PowerOptions,
) -> RankOneSvd {
    let (p, k) = a.shape();
    let par = opts.parallelism;
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, c) in a.column_iter().enumerate() {
        let nc = c.norm();
        if nc > best_norm {
            best = i;
            best_norm = nc;
        }
    }
    if best_norm <= 0.0 {
        let mut u = DVector::zeros(p);
        u[0] = 1.0;
        let mut v = DVector::zeros(k);
        v[0] = 1.0;
        return RankOneSvd {
            sigma: 0.0,
            u,
            v,
            zero_matrix: true,
            converged: true,
            iterations: 0,
        };
    }

    let gram_on_right = k <= p;
    // Iterate on the smaller Gram matrix.
    let mut q: DVector<f64> = if gram_on_right {
        let seeded = start_left
            .map(|u0| par::tr_mul_vec(a, u0, par))
            .filter(|w| w.norm() > 0.0);
        match seeded {
            Some(w) => w.normalize(),
            None => {
                let mut e = DVector::zeros(k);
                e[best] = 1.0;
                e
            }
        }
    } else {
        match start_left.filter(|u0| u0.norm() > 0.0) {
            Some(u0) => u0.normalize(),
            None => a.column(best) / best_norm,
        }
    };

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let w = if gram_on_right {
            par::tr_mul_vec(a, &par::mul_vec(a, &q, par), par)
        } else {
            par::mul_vec(a, &par::tr_mul_vec(a, &q, par), par)
        };
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        let next = w / nw;
        let diff = (&next - &q).norm();
        q = next;
        if diff <= opts.tol {
            converged = true;
            break;
        }
    }

    let (sigma, u, v) = if gram_on_right {
        let y = par::mul_vec(a, &q, par);
        let s = y.norm();
        (s, y / s, q)
    } else {
        let y = par::tr_mul_vec(a, &q, par);
        let s = y.norm();
        (s, q, y / s)
    };
    RankOneSvd {
        sigma,
        u,
        v,
        zero_matrix: false,
        converged,
        iterations,
    }
}

/// Thin QR with `R` normalized to a nonnegative diagonal.
pub fn qr_nonneg(y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (p, m) = y.shape();
    if m == 0 || m > p {
        return Err(SpcaError::dims(format!("QR needs p >= m >= 1, got {p}x{m}")));
    }
    let qr = y.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..m {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    Ok((q, r))
}

/// Adjusted variance `trace(R²)` of the components `Y = QR`.
///
/// For upper-triangular `R` this is the sum of squared diagonal entries:
/// the squared distance of each component from the span of the previous ones.
pub fn adjusted_variance(y: &DMatrix<f64>) -> Result<f64> {
    let (_, r) = qr_nonneg(y)?;
    Ok((&r * &r).trace())
}

/// Strong-convexity parameter `σ_f / √(2ωL_f)` of the level set
/// `{x : f(x) ≤ ω}` of a nonnegative, `σ_f`-strongly convex function with
/// `L_f`-Lipschitz gradient.
pub fn level_set_convexity(sigma_f: f64, lipschitz: f64, omega: f64) -> Result<f64> {
    for (name, v) in [("sigma_f", sigma_f), ("L_f", lipschitz), ("omega", omega)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SpcaError::invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(sigma_f / (2.0 * omega * lipschitz).sqrt())
}
