//! Positive semidefinite relaxation `tr(Q_i X) = α_i, X ⪰ 0`.
//!
//! Feasibility is decided with Dykstra's alternating projections between the
//! affine slice and the PSD cone. A feasible `X` can then be pushed towards
//! the middle of the feasible set by entropy ascent, factored as `X = T Tᵀ`,
//! and used to rewrite the system as `q̂_i(x) = tr Q̂_i` with `Q̂_i = Tᵀ Q_i T`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::{orthonormalize, DEFAULT_DEP_TOL};
use crate::symmat::{eigendecompose, Spectrum, SymMatrix};
use crate::{Error, Result};

/// Eigenvalues below this fraction of `‖X‖_op` are treated as zero.
pub const RANK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct RelaxOptions {
    pub max_sweeps: usize,
    /// Consecutive stalled sweeps before declaring infeasibility.
    pub stall_sweeps: usize,
    /// Residual tolerance, scaled by `1 + max |α_i|`.
    pub feas_tol: f64,
    /// Gaps at or below this are never read as infeasibility.
    pub gap_floor: f64,
    /// A sweep stalls when the gap changes by at most this fraction.
    pub stall_rel: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 50_000,
            stall_sweeps: 200,
            feas_tol: 1e-6,
            gap_floor: 1e-6,
            stall_rel: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxStatus {
    Feasible,
    /// Alternating projections stalled at a positive gap. This is a numerical
    /// verdict, not a dual certificate.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct RelaxationResult {
    pub status: RelaxStatus,
    pub x: Option<SymMatrix>,
    pub rank: usize,
    /// `max_i |tr(Q_i X) − α_i|`.
    pub residual: f64,
    /// Von Neumann entropy of `X / tr X`.
    pub entropy: f64,
    /// Final HS distance between the cone iterate and the affine slice.
    pub gap: f64,
    pub sweeps: usize,
}

impl RelaxationResult {
    pub fn is_feasible(&self) -> bool {
        self.status == RelaxStatus::Feasible
    }
}

/// The affine slice `{X : tr(Q_i X) = α_i}` with its Gram pseudo-inverse.
#[derive(Debug, Clone)]
struct AffineSlice {
    qs: Vec<SymMatrix>,
    alpha: Vec<f64>,
    gram_pinv: DMatrix<f64>,
}

impl AffineSlice {
    fn new(qs: &[SymMatrix], alpha: &[f64]) -> Result<Self> {
        check_system(qs, alpha)?;
        let m = qs.len();
        let gram = DMatrix::from_fn(m, m, |i, j| qs[i].as_matrix().dot(qs[j].as_matrix()));
        let eig = nalgebra::SymmetricEigen::new(gram);
        let cutoff = 1e-12 * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let inv = eig
            .eigenvalues
            .map(|l| if l > cutoff { 1.0 / l } else { 0.0 });
        let gram_pinv =
            &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
        Ok(Self {
            qs: qs.to_vec(),
            alpha: alpha.to_vec(),
            gram_pinv,
        })
    }

    /// Distance from `α` to the range of `X ↦ (tr Q_i X)_i`.
    fn inconsistency(&self) -> f64 {
        let m = self.qs.len();
        let gram = DMatrix::from_fn(m, m, |i, j| {
            self.qs[i].as_matrix().dot(self.qs[j].as_matrix())
        });
        let a = DVector::from_column_slice(&self.alpha);
        (&a - &gram * (&self.gram_pinv * &a)).amax()
    }

    fn residuals(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.qs.len(),
            self.qs
                .iter()
                .zip(&self.alpha)
                .map(|(q, a)| q.as_matrix().dot(x) - a),
        )
    }

    fn max_residual(&self, x: &DMatrix<f64>) -> f64 {
        self.residuals(x).amax()
    }

    fn subtract_span(&self, x: &mut DMatrix<f64>, r: &DVector<f64>) {
        let c = &self.gram_pinv * r;
        for (q, ci) in self.qs.iter().zip(c.iter()) {
            *x -= q.as_matrix() * *ci;
        }
    }

    fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        let r = self.residuals(x);
        self.subtract_span(&mut out, &r);
        out
    }

    /// Projection onto the direction space `{D : tr(Q_i D) = 0}`.
    fn project_linear(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = d.clone();
        let r = DVector::from_iterator(
            self.qs.len(),
            self.qs.iter().map(|q| q.as_matrix().dot(d)),
        );
        self.subtract_span(&mut out, &r);
        out
    }

    fn scale(&self) -> f64 {
        1.0 + self.alpha.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

fn check_system(qs: &[SymMatrix], alpha: &[f64]) -> Result<()> {
    let first = qs
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty system".into()))?;
    if qs.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: qs.len(),
            found: alpha.len(),
        });
    }
    for q in qs {
        if q.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: q.dim(),
            });
        }
    }
    Ok(())
}

/// Eigenvalue clipping onto the PSD cone.
fn project_psd(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = eigendecompose(&SymMatrix::new(x.clone())?)?;
    let clipped = DVector::from_iterator(s.values.len(), s.values.iter().map(|l| l.max(0.0)));
    Ok(&s.vectors * DMatrix::from_diagonal(&clipped) * s.vectors.transpose())
}

/// Von Neumann entropy `−Σ μ_j ln μ_j` of the normalized positive part.
pub fn entropy_of_eigenvalues(values: &[f64]) -> f64 {
    let total: f64 = values.iter().map(|l| l.max(0.0)).sum();
    if total <= 0.0 {
        return 0.0;
    }
    values
        .iter()
        .map(|l| l.max(0.0) / total)
        .filter(|&mu| mu > 0.0)
        .map(|mu| -mu * mu.ln())
        .sum()
}

pub fn numerical_rank(values: &[f64]) -> usize {
    let op = values.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if op == 0.0 {
        return 0;
    }
    values.iter().filter(|&&l| l > RANK_TOL * op).count()
}

struct DykstraOutcome {
    x: DMatrix<f64>,
    feasible: bool,
    stalled: bool,
    gap: f64,
    sweeps: usize,
}

fn dykstra(
    slice: &AffineSlice,
    start: &DMatrix<f64>,
    opts: &RelaxOptions,
    max_sweeps: usize,
) -> Result<DykstraOutcome> {
    let tol = opts.feas_tol * slice.scale();
    let mut x = slice.project(start);
    let mut p = DMatrix::zeros(x.nrows(), x.ncols());
    let mut prev_gap = f64::INFINITY;
    let mut stall = 0usize;
    let mut y = x.clone();
    let mut gap = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        let shifted = &x + &p;
        y = project_psd(&shifted)?;
        p = shifted - &y;
        let x_next = slice.project(&y);
        gap = (&x_next - &y).norm();
        if slice.max_residual(&y) <= tol {
            return Ok(DykstraOutcome {
                x: y,
                feasible: true,
                stalled: false,
                gap,
                sweeps: sweep,
            });
        }
        if gap > opts.gap_floor && (gap - prev_gap).abs() <= opts.stall_rel * gap {
            stall += 1;
            if stall >= opts.stall_sweeps {
                return Ok(DykstraOutcome {
                    x: y,
                    feasible: false,
                    stalled: true,
                    gap,
                    sweeps: sweep,
                });
            }
        } else {
            stall = 0;
        }
        prev_gap = gap;
        x = x_next;
    }
    Ok(DykstraOutcome {
        x: y,
        feasible: false,
        stalled: false,
        gap,
        sweeps: max_sweeps,
    })
}

/// One exact affine projection, kept only if the result stays PSD. When `x`
/// sits on a proper face the projection is taken inside that face. Interior
/// points then meet the constraints to rounding error instead of `feas_tol`.
fn polish(slice: &AffineSlice, x: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let before = slice.max_residual(&x);
    let z = slice.project(&x);
    let z = (&z + z.transpose()) * 0.5;
    let spec = eigendecompose(&SymMatrix::new(z.clone())?)?;
    if spec.values.last().is_none_or(|&l| l >= 0.0) && slice.max_residual(&z) <= before {
        return Ok(z);
    }

    let spec = eigendecompose(&SymMatrix::new(x.clone())?)?;
    let k = numerical_rank(&spec.values);
    if k == 0 {
        return Ok(x);
    }
    let v = spec.vectors.columns(0, k).into_owned();
    let x = match (k < x.nrows()).then(|| face_projection(slice, &x, &v)).transpose()? {
        Some(Some(z)) => z,
        _ => x,
    };
    let root = DMatrix::from_diagonal(&DVector::from_iterator(
        k,
        spec.values[..k].iter().map(|l| l.max(0.0).sqrt()),
    ));
    Ok(refine_factor(slice, x, &v * root))
}

fn face_projection(
    slice: &AffineSlice,
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<Option<DMatrix<f64>>> {
    let reduced = slice
        .qs
        .iter()
        .map(|q| SymMatrix::new(v.transpose() * q.as_matrix() * v))
        .collect::<Result<Vec<_>>>()?;
    let face = AffineSlice::new(&reduced, &slice.alpha)?;
    let y = face.project(&(v.transpose() * x * v));
    let y = (&y + y.transpose()) * 0.5;
    let y_spec = eigendecompose(&SymMatrix::new(y.clone())?)?;
    if y_spec.values.last().is_some_and(|&l| l < 0.0) {
        return Ok(None);
    }
    let z = v * y * v.transpose();
    let z = (&z + z.transpose()) * 0.5;
    Ok((slice.max_residual(&z) < slice.max_residual(x)).then_some(z))
}

const REFINE_MAX_VARS: usize = 20_000;

/// Levenberg–Marquardt on `tr(Fᵀ Q_i F) = α_i` from `X ≈ F Fᵀ`. Needed when
/// the slice touches the cone tangentially and alternating projections crawl.
fn refine_factor(slice: &AffineSlice, x: DMatrix<f64>, f0: DMatrix<f64>) -> DMatrix<f64> {
    let scale = 1.0 + slice.alpha.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let before = slice.max_residual(&x);
    if before <= 1e-14 * scale || f0.len() > REFINE_MAX_VARS {
        return x;
    }
    let m = slice.qs.len();
    let eval = |f: &DMatrix<f64>| -> (DVector<f64>, Vec<DMatrix<f64>>) {
        let grads: Vec<DMatrix<f64>> = slice.qs.iter().map(|q| q.as_matrix() * f * 2.0).collect();
        let r = DVector::from_iterator(
            m,
            grads.iter().zip(&slice.alpha).map(|(g, a)| 0.5 * g.dot(f) - a),
        );
        (r, grads)
    };
    let mut f = f0;
    let (mut r, mut g) = eval(&f);
    let mut mu = 1e-6;
    for _ in 0..30 {
        if r.amax() <= 1e-14 * scale {
            break;
        }
        let gram = DMatrix::from_fn(m, m, |i, j| g[i].dot(&g[j]));
        let mut stepped = false;
        for _ in 0..30 {
            let mut a = gram.clone();
            for i in 0..m {
                a[(i, i)] += mu;
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let c = chol.solve(&r);
            let mut cand = f.clone();
            for (gi, ci) in g.iter().zip(c.iter()) {
                cand -= gi * *ci;
            }
            let (cr, cg) = eval(&cand);
            if cr.norm() < r.norm() {
                f = cand;
                r = cr;
                g = cg;
                mu = (mu / 10.0).max(1e-15);
                stepped = true;
                break;
            }
            mu *= 10.0;
        }
        if !stepped {
            break;
        }
    }
    let z = &f * f.transpose();
    let z = (&z + z.transpose()) * 0.5;
    if slice.max_residual(&z) < before {
        z
    } else {
        x
    }
}

fn summarize(x: SymMatrix, slice: &AffineSlice) -> Result<RelaxationResult> {
    let values = eigendecompose(&x)?.values;
    Ok(RelaxationResult {
        status: RelaxStatus::Feasible,
        rank: numerical_rank(&values),
        residual: slice.max_residual(x.as_matrix()),
        entropy: entropy_of_eigenvalues(&values),
        x: Some(x),
        gap: 0.0,
        sweeps: 0,
    })
}

/// Decides feasibility of `tr(Q_i X) = α_i, X ⪰ 0`, starting from `X = I`.
pub fn solve_feasibility(
    qs: &[SymMatrix],
    alpha: &[f64],
    opts: &RelaxOptions,
) -> Result<RelaxationResult> {
    let slice = AffineSlice::new(qs, alpha)?;
    let n = qs[0].dim();
    let inconsistency = slice.inconsistency();
    if inconsistency > opts.feas_tol * slice.scale() {
        // no symmetric X at all meets the linear constraints
        return Ok(RelaxationResult {
            status: RelaxStatus::Infeasible,
            x: None,
            rank: 0,
            residual: inconsistency,
            entropy: 0.0,
            gap: f64::INFINITY,
            sweeps: 0,
        });
    }
    let out = dykstra(&slice, &DMatrix::identity(n, n), opts, opts.max_sweeps)?;
    if out.feasible {
        let mut res = summarize(SymMatrix::new(polish(&slice, out.x)?)?, &slice)?;
        res.gap = out.gap;
        res.sweeps = out.sweeps;
        Ok(res)
    } else if let Some(x) = rescue(&slice, &out, opts)? {
        let mut res = summarize(SymMatrix::new(x)?, &slice)?;
        res.gap = out.gap;
        res.sweeps = out.sweeps;
        Ok(res)
    } else if out.stalled {
        Ok(RelaxationResult {
            status: RelaxStatus::Infeasible,
            x: None,
            rank: 0,
            residual: slice.max_residual(&out.x),
            entropy: 0.0,
            gap: out.gap,
            sweeps: out.sweeps,
        })
    } else {
        Err(Error::Indeterminate {
            sweeps: out.sweeps,
            gap: out.gap,
        })
    }
}

/// A crawling run may still end next to a feasible point that the factor
/// refinement can reach.
fn rescue(slice: &AffineSlice, out: &DykstraOutcome, opts: &RelaxOptions) -> Result<Option<DMatrix<f64>>> {
    let x = polish(slice, out.x.clone())?;
    Ok((slice.max_residual(&x) <= opts.feas_tol * slice.scale()).then_some(x))
}

/// Relaxation of the homogeneous system `q_i(x) = 0` with the normalization
/// `tr X = 1`, which excludes the trivial point `X = 0`.
pub fn solve_feasibility_homogeneous(
    qs: &[SymMatrix],
    opts: &RelaxOptions,
) -> Result<RelaxationResult> {
    let (aug, alpha) = with_trace_constraint(qs, &vec![0.0; qs.len()], 1.0)?;
    let mut res = solve_feasibility(&aug, &alpha, opts)?;
    if let Some(x) = &res.x {
        let plain = AffineSlice::new(qs, &vec![0.0; qs.len()])?;
        res.residual = plain.max_residual(x.as_matrix());
    }
    Ok(res)
}

fn with_trace_constraint(
    qs: &[SymMatrix],
    alpha: &[f64],
    trace: f64,
) -> Result<(Vec<SymMatrix>, Vec<f64>)> {
    check_system(qs, alpha)?;
    let mut aug = qs.to_vec();
    aug.push(SymMatrix::identity(qs[0].dim()));
    let mut a = alpha.to_vec();
    a.push(trace);
    Ok((aug, a))
}

#[derive(Debug, Clone)]
pub struct InteriorTrace {
    /// Entropy after each accepted step, starting with the input's entropy.
    pub entropies: Vec<f64>,
    /// Norm of the projected entropy gradient at the returned point.
    pub final_gradient: f64,
}

/// Entropy ascent inside `{X ⪰ 0 : tr(Q_i X) = α_i, tr X = tr X₀}`.
pub fn interiorize(
    result: &RelaxationResult,
    qs: &[SymMatrix],
    alpha: &[f64],
    steps: usize,
) -> Result<RelaxationResult> {
    interiorize_traced(result, qs, alpha, steps).map(|(r, _)| r)
}

pub fn interiorize_traced(
    result: &RelaxationResult,
    qs: &[SymMatrix],
    alpha: &[f64],
    steps: usize,
) -> Result<(RelaxationResult, InteriorTrace)> {
    let x0 = match (&result.status, &result.x) {
        (RelaxStatus::Feasible, Some(x)) => x.clone(),
        _ => {
            return Err(Error::InvalidArgument(
                "interiorize needs a feasible relaxation result".into(),
            ))
        }
    };
    let plain = AffineSlice::new(qs, alpha)?;
    let t0 = x0.trace();
    let n = x0.dim();
    let mut trace = InteriorTrace {
        entropies: vec![],
        final_gradient: 0.0,
    };
    if t0 <= 0.0 {
        trace.entropies.push(result.entropy);
        return Ok((result.clone(), trace));
    }
    let (aug_qs, aug_alpha) = with_trace_constraint(qs, alpha, t0)?;
    let slice = AffineSlice::new(&aug_qs, &aug_alpha)?;
    let opts = RelaxOptions::default();

    let x = x0.into_matrix();
    let spec = eigendecompose(&SymMatrix::new(x.clone())?)?;
    let mut state = Ascent {
        entropy: entropy_of_eigenvalues(&spec.values),
        rank: numerical_rank(&spec.values),
        x,
        spec,
    };
    trace.entropies.push(state.entropy);
    let start = (state.x.clone(), state.entropy, state.rank);
    let used = ascend(&slice, &mut state, steps, &mut trace, &opts)?;
    if state.rank < n && used < steps {
        // the fixed trace level can graze a proper face whose higher-rank
        // neighbours sit at other traces; let the trace move
        ascend(&plain, &mut state, steps - used, &mut trace, &opts)?;
    }
    let Ascent {
        mut x,
        mut entropy,
        mut rank,
        ..
    } = state;

    // Ascent steps are accepted at `feas_tol`; tighten the end point, or fall
    // back to the start when the extra rank was only tolerance slack.
    let polished = polish(&plain, x.clone())?;
    if polished != x {
        let p_spec = eigendecompose(&SymMatrix::new(polished.clone())?)?;
        let p_entropy = entropy_of_eigenvalues(&p_spec.values);
        if p_entropy >= start.1 {
            entropy = p_entropy;
            rank = numerical_rank(&p_spec.values);
            x = polished;
        } else if plain.max_residual(&start.0) < plain.max_residual(&x) {
            (x, entropy, rank) = start;
        }
    }
    let x = SymMatrix::new(x)?;
    let out = RelaxationResult {
        status: RelaxStatus::Feasible,
        rank,
        residual: plain.max_residual(x.as_matrix()),
        entropy,
        x: Some(x),
        gap: 0.0,
        sweeps: result.sweeps,
    };
    Ok((out, trace))
}

struct Ascent {
    x: DMatrix<f64>,
    spec: Spectrum,
    entropy: f64,
    rank: usize,
}

/// Projected ascent on the entropy of `X / tr X` within `slice`. Returns the
/// number of steps taken.
fn ascend(
    slice: &AffineSlice,
    state: &mut Ascent,
    steps: usize,
    trace: &mut InteriorTrace,
    opts: &RelaxOptions,
) -> Result<usize> {
    let n = state.x.nrows();
    let tol = opts.feas_tol * slice.scale();
    for step in 0..steps {
        let t = state.x.trace();
        let floor = 1e-12 * t;
        // ∇S(X) = −(ln(X / t) + S I) / t
        let g_diag = DVector::from_iterator(
            n,
            state
                .spec
                .values
                .iter()
                .map(|l| -((l.max(floor) / t).ln() + state.entropy) / t),
        );
        let grad =
            &state.spec.vectors * DMatrix::from_diagonal(&g_diag) * state.spec.vectors.transpose();
        let dir = slice.project_linear(&grad);
        let gnorm = dir.norm();
        trace.final_gradient = gnorm;
        if gnorm <= 1e-12 / t {
            return Ok(step);
        }
        let dir = dir / gnorm;

        let mut accepted = false;
        let mut s = 0.1;
        for _ in 0..40 {
            let candidate = &state.x + &dir * (s * t);
            let projected = match project_psd_if_needed(&candidate)? {
                Some(c) => c,
                None => {
                    let out = dykstra(slice, &candidate, opts, 2_000)?;
                    if !out.feasible {
                        s *= 0.5;
                        continue;
                    }
                    out.x
                }
            };
            if slice.max_residual(&projected) > tol {
                s *= 0.5;
                continue;
            }
            let cand_spec = eigendecompose(&SymMatrix::new(projected.clone())?)?;
            let cand_entropy = entropy_of_eigenvalues(&cand_spec.values);
            let cand_rank = numerical_rank(&cand_spec.values);
            if cand_entropy > state.entropy && cand_rank >= state.rank {
                *state = Ascent {
                    x: projected,
                    spec: cand_spec,
                    entropy: cand_entropy,
                    rank: cand_rank,
                };
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            return Ok(step);
        }
        trace.entropies.push(state.entropy);
    }
    Ok(steps)
}

/// `Some(candidate)` when it is already PSD, `None` when it needs projecting.
fn project_psd_if_needed(candidate: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
    let values = crate::symmat::eigenvalues(&SymMatrix::new(candidate.clone())?);
    if values.last().copied().unwrap_or(0.0) >= 0.0 {
        Ok(Some(candidate.clone()))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone)]
pub struct TransformedSystem {
    /// `n × r` factor with `X = T Tᵀ`.
    pub t: DMatrix<f64>,
    pub qhat: Vec<SymMatrix>,
    /// `tr Q̂_i`, which equals `α_i` up to the relaxation residual.
    pub alpha: Vec<f64>,
    pub reduced_dim: usize,
    /// `r == n`: the transformed system has a solution iff the original does.
    pub equivalent: bool,
}

impl TransformedSystem {
    /// Maps a solution of the transformed system back, `y = T x̂`.
    pub fn lift(&self, xhat: &[f64]) -> Vec<f64> {
        (&self.t * DVector::from_column_slice(xhat))
            .as_slice()
            .to_vec()
    }
}

/// Factors `X = T Tᵀ` on its numerical range and forms `Q̂_i = Tᵀ Q_i T`.
pub fn factor_and_transform(
    result: &RelaxationResult,
    qs: &[SymMatrix],
) -> Result<TransformedSystem> {
    let x = match (&result.status, &result.x) {
        (RelaxStatus::Feasible, Some(x)) => x,
        _ => {
            return Err(Error::InvalidArgument(
                "factor_and_transform needs a feasible relaxation result".into(),
            ))
        }
    };
    let n = x.dim();
    for q in qs {
        if q.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.dim(),
            });
        }
    }
    let spec = eigendecompose(x)?;
    let r = numerical_rank(&spec.values);
    if r == 0 {
        return Err(Error::TrivialFace);
    }
    let t = if r == n && is_identity(x) {
        DMatrix::identity(n, n)
    } else {
        DMatrix::from_fn(n, r, |i, j| spec.vectors[(i, j)] * spec.values[j].sqrt())
    };
    let qhat = qs
        .iter()
        .map(|q| q.congruence(&t))
        .collect::<Result<Vec<_>>>()?;
    let alpha = qhat.iter().map(SymMatrix::trace).collect();
    Ok(TransformedSystem {
        t,
        qhat,
        alpha,
        reduced_dim: r,
        equivalent: r == n,
    })
}

fn is_identity(x: &SymMatrix) -> bool {
    let n = x.dim();
    (x.as_matrix() - DMatrix::<f64>::identity(n, n)).amax() == 0.0
}

#[derive(Debug, Clone)]
pub struct HomogeneousReduction {
    /// One entry per facial-reduction level; the last one has `r` equal to the
    /// dimension of its input, unless the relaxation became infeasible.
    pub levels: Vec<TransformedSystem>,
    /// No PSD `X ≠ 0` satisfies `tr(Q_i X) = 0`, so there is no `x ≠ 0`.
    pub infeasible: bool,
}

impl HomogeneousReduction {
    pub fn final_system(&self) -> Option<&TransformedSystem> {
        self.levels.last()
    }

    /// Maps a vector of the innermost system back to the original variables.
    pub fn lift(&self, xhat: &[f64]) -> Vec<f64> {
        self.levels
            .iter()
            .rev()
            .fold(xhat.to_vec(), |v, level| level.lift(&v))
    }
}

/// Relax, interiorize and factor until the feasible `X` is invertible in the
/// reduced coordinates. A non-invertible `X` does not make the homogeneous
/// systems equivalent, so each proper face triggers another round.
pub fn reduce_homogeneous(
    qs: &[SymMatrix],
    opts: &RelaxOptions,
    entropy_steps: usize,
) -> Result<HomogeneousReduction> {
    let mut levels: Vec<TransformedSystem> = Vec::new();
    let mut current = qs.to_vec();
    loop {
        let dim = current[0].dim();
        let relaxed = solve_feasibility_homogeneous(&current, opts)?;
        if !relaxed.is_feasible() {
            return Ok(HomogeneousReduction {
                levels,
                infeasible: true,
            });
        }
        let zeros = vec![0.0; current.len()];
        let (aug, alpha) = with_trace_constraint(&current, &zeros, 1.0)?;
        let inner = interiorize(&relaxed, &aug, &alpha, entropy_steps)?;
        let level = factor_and_transform(&inner, &current)?;
        let r = level.reduced_dim;
        let done = r == dim || r <= 1;
        current = level.qhat.clone();
        levels.push(level);
        if done {
            return Ok(HomogeneousReduction {
                levels,
                infeasible: false,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallMDecision {
    Solvable,
    Unsolvable,
}

/// For a span of dimension at most two the relaxation is exact.
pub fn exact_small_m(
    qs: &[SymMatrix],
    alpha: &[f64],
    opts: &RelaxOptions,
) -> Result<SmallMDecision> {
    check_system(qs, alpha)?;
    let m_eff = match orthonormalize(qs, DEFAULT_DEP_TOL) {
        Ok(b) => b.len(),
        Err(Error::EmptySpan) => 0,
        Err(e) => return Err(e),
    };
    if m_eff >= 3 {
        return Err(Error::Hypothesis(format!(
            "relaxation exactness needs span dimension <= 2, got {m_eff}"
        )));
    }
    let res = solve_feasibility(qs, alpha, opts)?;
    Ok(if res.is_feasible() {
        SmallMDecision::Solvable
    } else {
        SmallMDecision::Unsolvable
    })
}

/// Largest `r` with `r(r+1)/2 ≤ m`, i.e. `⌊(√(8m+1) − 1)/2⌋`: every extreme
/// point of the relaxation's feasible set has at most this rank.
pub fn extreme_rank_bound(m: usize) -> usize {
    assert!(m >= 1, "m must be at least 1");
    let mut r = ((((8 * m + 1) as f64).sqrt() - 1.0) / 2.0).floor() as usize;
    while r * (r + 1) / 2 > m {
        r -= 1;
    }
    while (r + 1) * (r + 2) / 2 <= m {
        r += 1;
    }
    r
}
