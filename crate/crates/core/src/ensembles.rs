//! Random instances and the experiment harness.
//!
//! Every stochastic routine takes an explicit seed. Trials run in parallel,
//! trial `t` drawing from `ChaCha8Rng::seed_from_u64(seed + t)`, and results
//! come back in trial order.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{orthonormalize, sample_sphere, sphere_combination, sum_of_squares, OrthoBasis, DEFAULT_DEP_TOL};
use crate::certifier::{certify_inhomogeneous, Decision};
use crate::fourier::{classify, Tameness, WeightedSpectrum};
use crate::oracle::{self, OracleOptions};
use crate::relaxation::{exact_small_m, RelaxOptions, SmallMDecision};
use crate::symmat::{eigenvalues, op_norm, SymMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Goe,
    TracelessGoe,
    PlantedSolvable,
    Blocked,
}

#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// Block size for [`EnsembleKind::Blocked`]; defaults to `n / m`.
    pub block: Option<usize>,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, n: usize, m: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            m,
            seed,
            block: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub matrices: Vec<SymMatrix>,
    /// Right-hand sides; `α_i = q_i(x₀)` for planted instances and `tr Q_i`
    /// otherwise.
    pub alpha: Vec<f64>,
    pub planted: Option<Vec<f64>>,
}

/// GOE matrix: off-diagonal entries `N(0, 1)`, diagonal entries `N(0, 2)`.
pub fn goe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymMatrix {
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        m[(i, i)] = d * std::f64::consts::SQRT_2;
        for j in 0..i {
            let v: f64 = rng.sample(StandardNormal);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymMatrix::new(m).expect("finite GOE sample")
}

pub fn traceless_goe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymMatrix {
    let q = goe(n, rng);
    let shift = q.trace() / n as f64;
    q.axpy(-shift, &SymMatrix::identity(n))
}

pub fn sample(spec: &EnsembleSpec) -> Result<Instance> {
    let EnsembleSpec { kind, n, m, seed, .. } = *spec;
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and m >= 1, got n = {n}, m = {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_traces = |matrices: Vec<SymMatrix>| {
        let alpha = matrices.iter().map(SymMatrix::trace).collect();
        Instance {
            matrices,
            alpha,
            planted: None,
        }
    };
    Ok(match kind {
        EnsembleKind::Goe => with_traces((0..m).map(|_| goe(n, &mut rng)).collect()),
        EnsembleKind::TracelessGoe => {
            with_traces((0..m).map(|_| traceless_goe(n, &mut rng)).collect())
        }
        EnsembleKind::PlantedSolvable => {
            let matrices: Vec<_> = (0..m).map(|_| goe(n, &mut rng)).collect();
            let x0: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let alpha = matrices.iter().map(|q| q.quad_form(&x0)).collect();
            Instance {
                matrices,
                alpha,
                planted: Some(x0),
            }
        }
        EnsembleKind::Blocked => {
            let block = spec.block.unwrap_or(n / m);
            if block == 0 || m * block > n {
                return Err(Error::InvalidArgument(format!(
                    "{m} blocks of size {block} do not fit in n = {n}"
                )));
            }
            let matrices = (0..m)
                .map(|i| {
                    let g = goe(block, &mut rng);
                    let g = g.scale(1.0 / g.hs_norm());
                    let mut full = nalgebra::DMatrix::zeros(n, n);
                    full.view_mut((i * block, i * block), (block, block))
                        .copy_from(g.as_matrix());
                    SymMatrix::new(full).expect("finite block")
                })
                .collect();
            with_traces(matrices)
        }
    })
}

/// Orthonormal basis of the span of `m` GOE samples.
pub fn goe_basis(n: usize, m: usize, seed: u64) -> Result<OrthoBasis> {
    let inst = sample(&EnsembleSpec::new(EnsembleKind::Goe, n, m, seed))?;
    orthonormalize(&inst.matrices, DEFAULT_DEP_TOL)
}

pub fn traceless_goe_basis(n: usize, m: usize, seed: u64) -> Result<OrthoBasis> {
    let inst = sample(&EnsembleSpec::new(EnsembleKind::TracelessGoe, n, m, seed))?;
    orthonormalize(&inst.matrices, DEFAULT_DEP_TOL)
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub m: usize,
    pub trial: usize,
    pub norm_b_op: f64,
    pub ratio_to_4m_over_n: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingSummary {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    pub mean_ratio: f64,
}

/// `‖Σ A_i²‖_op` for orthonormalized GOE samples over a grid of `(n, m)`.
pub fn scaling_experiment(
    n_list: &[usize],
    m_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        for &m in m_list {
            let block: Vec<ScalingRow> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(seed, t);
                    let qs: Vec<_> = (0..m).map(|_| goe(n, &mut rng)).collect();
                    let basis = orthonormalize(&qs, DEFAULT_DEP_TOL)?;
                    let norm_b_op = op_norm(&sum_of_squares(&basis));
                    Ok(ScalingRow {
                        n,
                        m,
                        trial: t,
                        norm_b_op,
                        ratio_to_4m_over_n: norm_b_op / (4.0 * m as f64 / n as f64),
                    })
                })
                .collect::<Result<_>>()?;
            rows.extend(block);
        }
    }
    Ok(rows)
}

pub fn summarize_scaling(rows: &[ScalingRow]) -> Vec<ScalingSummary> {
    let mut keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.n, r.m)).collect();
    keys.dedup();
    keys.into_iter()
        .map(|(n, m)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n && r.m == m)
                .map(|r| r.norm_b_op)
                .collect();
            let (mean, std) = mean_std(&vals);
            ScalingSummary {
                n,
                m,
                trials: vals.len(),
                mean,
                std,
                mean_ratio: mean / (4.0 * m as f64 / n as f64),
            }
        })
        .collect()
}

fn mean_std(vals: &[f64]) -> (f64, f64) {
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let std = if vals.len() > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Writes rows with a header line.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceRow {
    pub trial: usize,
    pub m_effective: usize,
    pub certified: bool,
    pub solved: bool,
    pub oracle_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceReport {
    pub n: usize,
    pub codim: usize,
    pub trials: usize,
    pub eta: f64,
    pub frequency: f64,
    pub certified: usize,
    pub rows: Vec<SliceRow>,
}

/// Random affine slices `{X : tr(A_i X) = tr A_i}` through `I_n`; counts the
/// trials in which the slice contains a rank-one PSD matrix `xxᵀ`, i.e. the
/// system `⟨A_i x, x⟩ = tr A_i` is solvable.
pub fn affine_slice_experiment(
    n: usize,
    codim: usize,
    trials: usize,
    seed: u64,
    eta: f64,
) -> Result<SliceReport> {
    if n == 0 || codim == 0 || codim > n * (n + 1) / 2 {
        return Err(Error::InvalidArgument(format!(
            "codimension must lie in 1..={}, got {codim}",
            n * (n + 1) / 2
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let rows: Vec<SliceRow> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let qs: Vec<_> = (0..codim).map(|_| goe(n, &mut rng)).collect();
            let basis = orthonormalize(&qs, DEFAULT_DEP_TOL)?;
            let mats = basis.matrices().to_vec();
            let alpha: Vec<f64> = mats.iter().map(SymMatrix::trace).collect();
            let m_effective = mats.len();
            let certified = certify_inhomogeneous(&mats, eta)?.decision == Decision::CertifiedSolvable;
            let shortcut = if m_effective <= 2 {
                exact_small_m(&mats, &alpha, &RelaxOptions::default())? == SmallMDecision::Solvable
            } else {
                false
            };
            let res = oracle::solve(
                &mats,
                &alpha,
                &OracleOptions {
                    seed: seed.wrapping_add(t as u64),
                    ..Default::default()
                },
            );
            Ok(SliceRow {
                trial: t,
                m_effective,
                certified,
                solved: shortcut || res.solved,
                oracle_residual: res.residual,
            })
        })
        .collect::<Result<_>>()?;
    let solved = rows.iter().filter(|r| r.solved).count();
    Ok(SliceReport {
        n,
        codim,
        trials,
        eta,
        frequency: solved as f64 / trials as f64,
        certified: rows.iter().filter(|r| r.certified).count(),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub m: usize,
    pub moment: &'static str,
    pub closed_form: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `(mean − closed_form) / stderr`.
    pub z: f64,
}

/// Monte Carlo estimates of the low even moments of Haar measure on
/// `S^{m−1}` against their closed forms.
pub fn haar_moments(m: usize, samples: usize, seed: u64) -> Result<Vec<MomentRow>> {
    if m < 3 || samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "need m >= 3 and samples >= 2, got m = {m}, samples = {samples}"
        )));
    }
    let mf = m as f64;
    let d2 = mf * (mf + 2.0);
    let d3 = d2 * (mf + 4.0);
    type Moment = (&'static str, f64, fn(&[f64]) -> f64);
    let specs: [Moment; 5] = [
        ("w1^2 w2^2", 1.0 / d2, |w| w[0] * w[0] * w[1] * w[1]),
        ("w1^4", 3.0 / d2, |w| w[0].powi(4)),
        ("w1^2 w2^2 w3^2", 1.0 / d3, |w| (w[0] * w[1] * w[2]).powi(2)),
        ("w1^2 w2^4", 3.0 / d3, |w| w[0] * w[0] * w[1].powi(4)),
        ("w1^6", 15.0 / d3, |w| w[0].powi(6)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = [0.0f64; 5];
    let mut sq = [0.0f64; 5];
    for _ in 0..samples {
        let w = sample_sphere(m, &mut rng);
        for (k, (_, _, f)) in specs.iter().enumerate() {
            let v = f(&w);
            sums[k] += v;
            sq[k] += v * v;
        }
    }
    let s = samples as f64;
    Ok(specs
        .iter()
        .enumerate()
        .map(|(k, (name, closed, _))| {
            let mean = sums[k] / s;
            let var = (sq[k] / s - mean * mean) * s / (s - 1.0);
            let stderr = (var / s).sqrt();
            MomentRow {
                m,
                moment: name,
                closed_form: *closed,
                mean,
                stderr,
                z: (mean - closed) / stderr,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralMoments {
    pub samples: usize,
    /// `‖Σ A_i²‖_op`.
    pub norm_b_op: f64,
    /// Sample mean and standard error of `(Σ λ_j³(w))²`.
    pub mean_s3_sq: f64,
    pub stderr_s3_sq: f64,
    /// Sample mean and standard error of `Σ λ_j⁴(w)`.
    pub mean_s4: f64,
    pub stderr_s4: f64,
    /// Largest `‖A(w)‖_op` and `Σ λ_j⁴(w)` seen.
    pub max_op: f64,
    pub max_s4: f64,
}

/// Haar statistics of the spectra of `A(w) = Σ w_i A_i`.
pub fn spectral_moments(basis: &OrthoBasis, samples: usize, seed: u64) -> Result<SpectralMoments> {
    if samples < 2 {
        return Err(Error::InvalidArgument("samples must be at least 2".into()));
    }
    let m = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ws: Vec<Vec<f64>> = (0..samples).map(|_| sample_sphere(m, &mut rng)).collect();
    let stats: Vec<(f64, f64, f64)> = ws
        .par_iter()
        .map(|w| {
            let a = sphere_combination(basis, w)?;
            let l = eigenvalues(&a);
            let s3: f64 = l.iter().map(|x| x.powi(3)).sum();
            let s4: f64 = l.iter().map(|x| x.powi(4)).sum();
            let op = l.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            Ok((s3 * s3, s4, op))
        })
        .collect::<Result<_>>()?;
    let s3: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let s4: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let (m3, sd3) = mean_std(&s3);
    let (m4, sd4) = mean_std(&s4);
    let k = (samples as f64).sqrt();
    Ok(SpectralMoments {
        samples,
        norm_b_op: op_norm(&sum_of_squares(basis)),
        mean_s3_sq: m3,
        stderr_s3_sq: sd3 / k,
        mean_s4: m4,
        stderr_s4: sd4 / k,
        max_op: stats.iter().fold(0.0, |a, s| a.max(s.2)),
        max_s4: s4.iter().fold(0.0, |a, &s| a.max(s)),
    })
}

/// Tameness classification of `A(w)` for one GOE basis.
#[derive(Debug, Clone, Serialize)]
pub struct TamenessRow {
    pub n: usize,
    pub m: usize,
    pub trial: usize,
    pub samples: usize,
    pub norm_b_op: f64,
    pub tame: usize,
    pub wild_cubic: usize,
    pub wild_quartic: usize,
    pub frac_tame: f64,
    pub frac_wild_cubic: f64,
    pub frac_wild_quartic: f64,
}

/// Classifies `samples` Haar directions for each of `trials` GOE bases.
pub fn tameness_experiment(
    n: usize,
    m: usize,
    trials: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<TamenessRow>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    (0..trials)
        .map(|trial| {
            let basis = goe_basis(n, m, seed + trial as u64)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed + trial as u64);
            let ws: Vec<Vec<f64>> = (0..samples).map(|_| sample_sphere(m, &mut rng)).collect();
            let classes: Vec<Tameness> = ws
                .par_iter()
                .map(|w| {
                    let a = sphere_combination(&basis, w)?;
                    Ok(classify(&WeightedSpectrum::simple(eigenvalues(&a)), m).class)
                })
                .collect::<Result<_>>()?;
            let count = |c: Tameness| classes.iter().filter(|&&x| x == c).count();
            let (tame, cubic, quartic) = (
                count(Tameness::Tame),
                count(Tameness::WildCubic),
                count(Tameness::WildQuartic),
            );
            let s = samples as f64;
            Ok(TamenessRow {
                n,
                m,
                trial,
                samples,
                norm_b_op: op_norm(&sum_of_squares(&basis)),
                tame,
                wild_cubic: cubic,
                wild_quartic: quartic,
                frac_tame: tame as f64 / s,
                frac_wild_cubic: cubic as f64 / s,
                frac_wild_quartic: quartic as f64 / s,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::inner;

    #[test]
    fn tameness_counts_sum_to_samples() {
        let rows = tameness_experiment(40, 3, 2, 200, 9).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert_eq!(r.tame + r.wild_cubic + r.wild_quartic, r.samples);
            assert!((r.frac_tame + r.frac_wild_cubic + r.frac_wild_quartic - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn goe_norm_scales_like_two_sqrt_n() {
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<_> = (0..20).map(|_| goe(n, &mut rng)).collect();
        let op = samples.iter().map(|q| op_norm(q) / (n as f64).sqrt()).sum::<f64>() / 20.0;
        assert!((1.8..=2.2).contains(&op), "mean op/√n = {op}");
        let hs = samples
            .iter()
            .map(|q| inner(q, q).unwrap() / (n * n) as f64)
            .sum::<f64>()
            / 20.0;
        assert!((0.9..=1.1).contains(&hs), "mean <Q,Q>/n² = {hs}");
    }

    #[test]
    fn goe_entry_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut off, mut diag) = (Vec::new(), Vec::new());
        while off.len() < 20_000 || diag.len() < 10_000 {
            let q = goe(100, &mut rng);
            for i in 0..100 {
                diag.push(q.get(i, i));
                for j in 0..i {
                    off.push(q.get(i, j));
                }
            }
        }
        let var = |v: &[f64]| mean_std(v).1.powi(2);
        assert!((var(&off) - 1.0).abs() < 0.1);
        assert!((var(&diag) - 2.0).abs() < 0.2);
    }

    #[test]
    fn traceless_and_seeded() {
        let spec = EnsembleSpec::new(EnsembleKind::TracelessGoe, 30, 4, 7);
        let a = sample(&spec).unwrap();
        assert!(a.matrices.iter().all(|q| q.trace().abs() <= 1e-10));
        let b = sample(&spec).unwrap();
        assert_eq!(a.matrices, b.matrices);
    }

    #[test]
    fn planted_alpha_matches_witness() {
        let inst = sample(&EnsembleSpec::new(EnsembleKind::PlantedSolvable, 10, 3, 4)).unwrap();
        let x0 = inst.planted.as_ref().unwrap();
        for (q, a) in inst.matrices.iter().zip(&inst.alpha) {
            assert_eq!(q.quad_form(x0), *a);
        }
    }

    #[test]
    fn blocked_family() {
        let spec = EnsembleSpec {
            block: Some(4),
            ..EnsembleSpec::new(EnsembleKind::Blocked, 12, 3, 5)
        };
        let inst = sample(&spec).unwrap();
        let basis = orthonormalize(&inst.matrices, DEFAULT_DEP_TOL).unwrap();
        let want = inst
            .matrices
            .iter()
            .map(|a| op_norm(a).powi(2))
            .fold(0.0, f64::max);
        assert!((op_norm(&sum_of_squares(&basis)) - want).abs() < 1e-12);
        let bad = EnsembleSpec {
            block: Some(5),
            ..spec
        };
        assert!(sample(&bad).is_err());
    }

    #[test]
    fn goe_span_has_full_dimension() {
        for seed in 0..5 {
            assert_eq!(goe_basis(20, 6, seed).unwrap().len(), 6);
        }
    }

    #[test]
    fn scaling_single_form() {
        let rows = scaling_experiment(&[30], &[1], 3, 0).unwrap();
        for r in &rows {
            let mut rng = trial_rng(0, r.trial);
            let q = goe(30, &mut rng);
            let a = q.scale(1.0 / q.hs_norm());
            assert!((r.norm_b_op - op_norm(&a.square())).abs() < 1e-12);
            assert!((r.norm_b_op - op_norm(&a).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rows = scaling_experiment(&[20], &[2], 4, 3).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n,m,trial,norm_b_op,ratio_to_4m_over_n");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn slice_examples() {
        let r = affine_slice_experiment(20, 1, 20, 0, 1e-6).unwrap();
        assert_eq!(r.frequency, 1.0);
        let r = affine_slice_experiment(3, 6, 3, 0, 1e-6).unwrap();
        assert_eq!(r.frequency, 0.0);
        let r = affine_slice_experiment(1, 1, 2, 0, 1e-6).unwrap();
        assert_eq!(r.frequency, 1.0);
    }

    #[test]
    fn moments_are_close() {
        for row in haar_moments(4, 20_000, 3).unwrap() {
            assert!(row.z.abs() < 4.0, "{row:?}");
        }
    }
}
