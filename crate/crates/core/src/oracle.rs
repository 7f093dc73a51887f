//! Ground-truth solver for small systems: multistart Levenberg–Marquardt on
//! `Σ (q_i(x) − α_i)²`, a unit-sphere variant for homogeneous systems, and a
//! brute-force grid for `n ≤ 3`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::symmat::SymMatrix;
use crate::{Error, Result};

const DAMPING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub starts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            starts: 50,
            max_iter: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub best_x: Vec<f64>,
    /// `Σ_i (q_i(best_x) − α_i)²`.
    pub residual: f64,
    /// Starts actually run; the search stops at the first solved start.
    pub starts: usize,
    /// The best start met a stationarity test before the iteration cap.
    pub converged: bool,
    pub solved: bool,
    /// Norm of the (Riemannian, in the homogeneous case) gradient at `best_x`.
    pub gradient_norm: f64,
}

fn check(qs: &[SymMatrix], alpha: &[f64]) -> usize {
    assert!(!qs.is_empty(), "oracle needs at least one form");
    assert_eq!(qs.len(), alpha.len(), "one right-hand side per form");
    let n = qs[0].dim();
    assert!(qs.iter().all(|q| q.dim() == n), "forms must share a dimension");
    n
}

/// Residual vector `r_i = q_i(x) − α_i` and the Jacobian rows `2 Q_i x`.
fn evaluate(qs: &[SymMatrix], alpha: &[f64], x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let xv = DVector::from_column_slice(x);
    let mut r = DVector::zeros(qs.len());
    let mut j = DMatrix::zeros(qs.len(), n);
    for (i, (q, a)) in qs.iter().zip(alpha).enumerate() {
        let qx = q.as_matrix() * &xv;
        r[i] = xv.dot(&qx) - a;
        j.row_mut(i).copy_from(&(qx * 2.0).transpose());
    }
    (r, j)
}

pub fn residual(qs: &[SymMatrix], alpha: &[f64], x: &[f64]) -> f64 {
    qs.iter()
        .zip(alpha)
        .map(|(q, a)| (q.quad_form(x) - a).powi(2))
        .sum()
}

/// Damped step `δ = −Jᵀ (J Jᵀ + μ I)⁻¹ r`.
fn lm_step(j: &DMatrix<f64>, r: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
    let m = j.nrows();
    let mut a = j * j.transpose();
    for i in 0..m {
        a[(i, i)] += mu;
    }
    let sol = a.cholesky()?.solve(r);
    Some(-(j.transpose() * sol))
}

struct LocalRun {
    x: Vec<f64>,
    f: f64,
    grad: f64,
    converged: bool,
}

/// One Levenberg–Marquardt descent. With `sphere`, the Jacobian is projected
/// onto the tangent space and normalization serves as retraction.
fn descend(qs: &[SymMatrix], alpha: &[f64], x0: Vec<f64>, max_iter: usize, sphere: bool) -> LocalRun {
    let n = x0.len();
    let scale = 1.0 + alpha.iter().map(|a| a * a).sum::<f64>();
    let mut x = x0;
    let tangent = |x: &[f64], j: DMatrix<f64>| -> DMatrix<f64> {
        if !sphere {
            return j;
        }
        let xv = DVector::from_column_slice(x);
        let p = DMatrix::identity(n, n) - &xv * xv.transpose();
        j * p
    };
    let (mut r, j) = evaluate(qs, alpha, &x);
    let mut j = tangent(&x, j);
    let mut f = r.norm_squared();
    let mut mu = (1e-3 * (&j * j.transpose()).trace() / qs.len() as f64).max(DAMPING_FLOOR);
    let mut converged = false;

    for _ in 0..max_iter {
        let grad = 2.0 * (j.transpose() * &r).norm();
        if f <= 1e-28 * scale || grad <= 1e-10 * (1.0 + f) {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..60 {
            let Some(delta) = lm_step(&j, &r, mu) else {
                mu *= 4.0;
                continue;
            };
            let mut cand: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            if sphere {
                let norm = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
                cand.iter_mut().for_each(|v| *v /= norm);
            }
            let (cr, cj) = evaluate(qs, alpha, &cand);
            let cf = cr.norm_squared();
            if cf < f {
                x = cand;
                r = cr;
                j = tangent(&x, cj);
                f = cf;
                mu = (mu / 3.0).max(DAMPING_FLOOR);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let grad = 2.0 * (j.transpose() * &r).norm();
    // a stalled run only counts if the gradient test holds where it stopped
    converged |= f <= 1e-28 * scale || grad <= 1e-8 * (1.0 + f);
    LocalRun {
        x,
        f,
        grad,
        converged,
    }
}

fn gaussian_start(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 0.0 {
            return g.into_iter().map(|v| v * norm / len).collect();
        }
    }
}

/// Rescales a unit direction `u` to the radius minimizing
/// `Σ (s² q_i(u) − α_i)²`, which reaches solutions far from the origin.
fn radial_start(qs: &[SymMatrix], alpha: &[f64], u: Vec<f64>) -> Vec<f64> {
    let (num, den) = qs.iter().zip(alpha).fold((0.0, 0.0), |(a, b), (q, al)| {
        let v = q.quad_form(&u);
        (a + al * v, b + v * v)
    });
    let s2 = if den > 0.0 { num / den } else { 0.0 };
    let s = if s2 > 0.0 { s2.sqrt() } else { 1.0 };
    u.into_iter().map(|v| v * s).collect()
}

fn multistart(
    qs: &[SymMatrix],
    alpha: &[f64],
    opts: &OracleOptions,
    sphere: bool,
    solved_at: f64,
) -> OracleResult {
    let n = check(qs, alpha);
    let starts = opts.starts.max(1);
    let norms = [0.5, 1.0, 2.0, (n as f64).sqrt()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<LocalRun> = None;
    let mut used = 0;
    for k in 0..starts {
        used = k + 1;
        let x0 = if sphere {
            gaussian_start(&mut rng, n, 1.0)
        } else if k % 2 == 1 {
            radial_start(qs, alpha, gaussian_start(&mut rng, n, 1.0))
        } else {
            gaussian_start(&mut rng, n, norms[(k / 2) % norms.len()])
        };
        let run = descend(qs, alpha, x0, opts.max_iter, sphere);
        if best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
        if best.as_ref().is_some_and(|b| b.f <= solved_at) {
            break;
        }
    }
    let best = best.expect("at least one start");
    let residual = residual(qs, alpha, &best.x);
    OracleResult {
        solved: residual <= solved_at,
        best_x: best.x,
        residual,
        starts: used,
        converged: best.converged,
        gradient_norm: best.grad,
    }
}

/// Searches for `x` with `q_i(x) = α_i`.
pub fn solve(qs: &[SymMatrix], alpha: &[f64], opts: &OracleOptions) -> OracleResult {
    let scale = 1.0 + alpha.iter().map(|a| a * a).sum::<f64>();
    multistart(qs, alpha, opts, false, 1e-10 * scale)
}

/// Searches for a unit vector with `q_i(x) = 0`.
pub fn solve_homogeneous(qs: &[SymMatrix], opts: &OracleOptions) -> OracleResult {
    let zeros = vec![0.0; qs.len()];
    multistart(qs, &zeros, opts, true, 1e-10)
}

/// Exhaustive minimum of the residual over the grid `[−bound, bound]^n`.
pub fn grid_search(
    qs: &[SymMatrix],
    alpha: &[f64],
    bound: f64,
    step: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = check(qs, alpha);
    if n > 3 {
        return Err(Error::InvalidArgument(format!(
            "grid search is limited to n <= 3, got {n}"
        )));
    }
    if !(step > 0.0 && bound > 0.0) {
        return Err(Error::InvalidArgument("step and bound must be positive".into()));
    }
    let per_axis = (2.0 * bound / step).round() as usize + 1;
    let total = (per_axis as f64).powi(n as i32);
    if total > 2e8 {
        return Err(Error::InvalidArgument(format!(
            "grid of {total:.3e} points is too large"
        )));
    }
    let mut best = (vec![0.0; n], f64::INFINITY);
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        for (xi, &k) in x.iter_mut().zip(&idx) {
            *xi = -bound + k as f64 * step;
        }
        let f = residual(qs, alpha, &x);
        if f < best.1 {
            best = (x.clone(), f);
        }
        let mut axis = 0;
        loop {
            if axis == n {
                return Ok(best);
            }
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}
