//! Numerical evaluation of the determinant integral
//!
//! ```text
//! ∫_{R^m} det^{−1/2}(I − i Σ τ_j A_j) exp(−i Σ α_j τ_j) dt
//! ```
//!
//! in polar form: a Haar average over `w ∈ S^{m−1}` of radial integrals
//! `∫_0^∞ τ^{m−1} det^{−1/2}(I − iτA(w)) exp(−iτ⟨α, w⟩) dτ`. A nonzero value
//! implies the system `½⟨A_j x, x⟩ = α_j` is solvable; with `α = 0` and
//! `m < n` it implies a nonzero solution of the homogeneous system.
//!
//! Forms in this module use the half convention `q(x) = ½⟨Qx, x⟩`; see
//! [`to_half_form`].

pub mod quadrature;

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{sample_sphere, sphere_combination, OrthoBasis};
use crate::symmat::{eigenvalues, SymMatrix};
use crate::{Error, Result};

use quadrature::{adaptive, adaptive_real, composite_rule};

const MAX_PANELS: usize = 4000;

/// `Π_j (1 − iτλ_j)^{−1/2}` on the branch equal to 1 at `τ = 0`.
pub fn det_power(lambdas: &[f64], tau: f64) -> Complex64 {
    let s: Complex64 = lambdas
        .iter()
        .map(|&l| Complex64::new(1.0, -tau * l).ln())
        .sum();
    (-0.5 * s).exp()
}

/// `ln Γ(k/2)` for a positive integer `k`.
pub fn ln_gamma_half(k: usize) -> f64 {
    assert!(k >= 1, "Γ(k/2) needs k >= 1");
    let (mut x, mut acc) = if k.is_multiple_of(2) {
        (1.0, 0.0)
    } else {
        (0.5, 0.5 * PI.ln())
    };
    while 2.0 * x < k as f64 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// `∫_0^∞ τ^{m−1} e^{−τ²/4} dτ = 2^{m−1} Γ(m/2)`.
pub fn benchmark(m: usize) -> f64 {
    ln_benchmark(m).exp()
}

pub fn ln_benchmark(m: usize) -> f64 {
    (m as f64 - 1.0) * 2f64.ln() + ln_gamma_half(m)
}

/// Lower bound `m^{m/2} √(π/m) (2/e)^{m/2}` on the benchmark integral.
pub fn benchmark_lower_bound(m: usize) -> f64 {
    let mf = m as f64;
    (0.5 * mf * mf.ln() + 0.5 * (PI / mf).ln() + 0.5 * mf * (2f64.ln() - 1.0)).exp()
}

/// Upper bound `√(2π/(m−1)) 2^m m^{m/2} e^{−25(m−1)/8}` on the benchmark tail
/// beyond `5√m`, valid for `m ≥ 2`.
pub fn benchmark_tail_upper_bound(m: usize) -> f64 {
    let mf = m as f64;
    (0.5 * (2.0 * PI / (mf - 1.0)).ln() + mf * 2f64.ln() + 0.5 * mf * mf.ln()
        - 25.0 * (mf - 1.0) / 8.0)
        .exp()
}

/// Tail bound `m^{m/2} e^{−3m} / (20m)` for `‖A‖_HS = 1`, `‖A‖_op ≤ 1/(10√m)`.
pub fn admissible_tail_bound(m: usize) -> f64 {
    let mf = m as f64;
    (0.5 * mf * mf.ln() - 3.0 * mf).exp() / (20.0 * mf)
}

/// `∫_a^b τ^{m−1} e^{−τ²/4} dτ` by adaptive quadrature; `b = ∞` is allowed.
pub fn gaussian_radial(m: usize, a: f64, b: f64) -> Result<f64> {
    let far = a.max((2.0 * m as f64).sqrt()) + 60.0;
    let b = b.min(far);
    if b <= a {
        return Ok(0.0);
    }
    let p = (m - 1) as i32;
    let tol = 1e-14 * benchmark(m);
    adaptive_real(|t| t.powi(p) * (-t * t / 4.0).exp(), &[a, b], tol, MAX_PANELS).map(|q| q.0)
}

/// Spectrum with multiplicities; `weights[k]` copies of `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpectrum {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedSpectrum {
    pub fn simple(values: Vec<f64>) -> Self {
        let weights = vec![1.0; values.len()];
        Self { values, weights }
    }

    pub fn power_sum(&self, k: i32) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * l.powi(k))
            .sum()
    }

    pub fn op_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .fold(0.0, |a, (l, _)| a.max(l.abs()))
    }

    pub fn hs_norm(&self) -> f64 {
        self.power_sum(2).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tameness {
    Tame,
    /// Large third moment, small fourth moment.
    WildCubic,
    /// Fourth moment above its threshold.
    WildQuartic,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TamenessReport {
    pub s3: f64,
    pub s4: f64,
    pub class: Tameness,
}

pub fn tameness_thresholds(m: usize) -> (f64, f64) {
    let mf = m as f64;
    (1.0 / (25.0 * mf.powf(1.5)), 1.0 / (625.0 * mf * mf))
}

pub fn classify(spectrum: &WeightedSpectrum, m: usize) -> TamenessReport {
    let s3 = spectrum.power_sum(3);
    let s4 = spectrum.power_sum(4);
    let (b3, b4) = tameness_thresholds(m);
    let class = if s4 > b4 {
        Tameness::WildQuartic
    } else if s3.abs() > b3 {
        Tameness::WildCubic
    } else {
        Tameness::Tame
    };
    TamenessReport { s3, s4, class }
}

/// Radial integrand `τ^{m−1} det^{−1/2}(I − iτA) exp(−iτ·trace_half)`.
#[derive(Debug, Clone)]
pub struct RadialIntegrand {
    pub spectrum: WeightedSpectrum,
    /// Phase coefficient; `½ tr A` for trace-matched systems, 0 for
    /// homogeneous ones, `⟨α, w⟩` in general.
    pub trace_half: f64,
    pub m: usize,
}

impl RadialIntegrand {
    pub fn new(lambdas: Vec<f64>, trace_half: f64, m: usize) -> Self {
        Self::weighted(WeightedSpectrum::simple(lambdas), trace_half, m)
    }

    pub fn weighted(spectrum: WeightedSpectrum, trace_half: f64, m: usize) -> Self {
        assert!(m >= 1, "m must be at least 1");
        Self {
            spectrum,
            trace_half,
            m,
        }
    }

    /// Trace-matched integrand of a matrix: phase `½ tr A`.
    pub fn of_matrix(a: &SymMatrix, m: usize) -> Self {
        Self::new(eigenvalues(a), 0.5 * a.trace(), m)
    }

    /// `ln |integrand(τ)| = (m−1) ln τ − ¼ Σ ln(1 + τ²λ²)`.
    pub fn ln_modulus(&self, tau: f64) -> f64 {
        let damp: f64 = self
            .spectrum
            .values
            .iter()
            .zip(&self.spectrum.weights)
            .map(|(l, w)| w * (tau * tau * l * l).ln_1p())
            .sum();
        (self.m as f64 - 1.0) * tau.ln() - 0.25 * damp
    }

    /// `½ Σ atan(τλ_j) − τ·trace_half`, the continuous argument.
    pub fn phase(&self, tau: f64) -> f64 {
        let s: f64 = self
            .spectrum
            .values
            .iter()
            .zip(&self.spectrum.weights)
            .map(|(l, w)| w * (tau * l).atan())
            .sum();
        0.5 * s - tau * self.trace_half
    }

    pub fn eval(&self, tau: f64) -> Complex64 {
        if tau == 0.0 {
            return if self.m == 1 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        Complex64::from_polar(self.ln_modulus(tau).exp(), self.phase(tau))
    }

    pub fn modulus(&self, tau: f64) -> f64 {
        if tau == 0.0 {
            return if self.m == 1 { 1.0 } else { 0.0 };
        }
        self.ln_modulus(tau).exp()
    }

    fn admissible(&self) -> bool {
        let m = self.m as f64;
        self.m >= 2
            && (self.spectrum.hs_norm() - 1.0).abs() <= 1e-8
            && self.spectrum.op_norm() <= 1.0 / (10.0 * m.sqrt())
    }

    /// Breakpoints on `[0, c]` so that the phase moves at most π/4 per panel.
    fn phase_breaks(&self, c: f64) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut stack = vec![(c, 0)];
        let mut left = 0.0;
        let mut left_phase = self.phase(0.0);
        while let Some((right, depth)) = stack.pop() {
            let mid = 0.5 * (left + right);
            let pr = self.phase(right);
            let pm = self.phase(mid);
            let wiggle = (pr - left_phase).abs().max((pm - left_phase).abs());
            if wiggle > FRAC_PI_4 && depth < 24 {
                stack.push((right, depth + 1));
                stack.push((mid, depth + 1));
            } else {
                out.push(right);
                left = right;
                left_phase = pr;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadialEstimate {
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    pub quadrature_error: f64,
    /// Bound on `∫_c^∞ |integrand|`; infinite when no bound is available.
    pub tail_bound: f64,
    /// The admissible-matrix tail bound was used.
    pub admissible_tail: bool,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Integral of the radial integrand over `[0, cutoff]` with a tail bound for
/// `[cutoff, ∞)`. The default cutoff is `5√m`.
pub fn radial_integral(ri: &RadialIntegrand, cutoff: Option<f64>) -> Result<RadialEstimate> {
    let m = ri.m;
    let c = cutoff.unwrap_or(5.0 * (m as f64).sqrt());
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("cutoff must be positive, got {c}")));
    }
    let tol = 1e-9 * benchmark(m);
    let breaks = ri.phase_breaks(c);
    let q = adaptive(|t| ri.eval(t), &breaks, tol, MAX_PANELS)?;
    let (tail_bound, admissible_tail) = if ri.admissible() && c >= 5.0 * (m as f64).sqrt() {
        (admissible_tail_bound(m), true)
    } else {
        (direct_tail_bound(ri, c)?, false)
    };
    Ok(RadialEstimate {
        value: q.value,
        quadrature_error: q.error,
        tail_bound,
        admissible_tail,
    })
}

/// `∫_a^b |integrand|` by adaptive quadrature, with its error estimate.
pub fn modulus_integral(ri: &RadialIntegrand, a: f64, b: f64) -> Result<(f64, f64)> {
    if b <= a {
        return Ok((0.0, 0.0));
    }
    let f = |t: f64| Complex64::new(ri.modulus(t), 0.0);
    let coarse = quadrature::gk15(&f, a, b).0.re;
    let tol = 1e-12 * benchmark(ri.m).max(coarse);
    adaptive_real(|t| ri.modulus(t), &[a, b], tol, MAX_PANELS)
}

/// Tail bound from numerically integrating the modulus to `R = 50√m` plus the
/// envelope `τ^{m−1} Π_{j∈S} (τ|λ_j|)^{−w_j/2}` beyond `R`.
pub fn direct_tail_bound(ri: &RadialIntegrand, c: f64) -> Result<f64> {
    let m = ri.m as f64;
    let r = (50.0 * m.sqrt()).max(c);
    let far = envelope_remainder(&ri.spectrum, ri.m, r);
    if far.is_infinite() {
        return Ok(far);
    }
    let (near, err) = modulus_integral(ri, c, r)?;
    Ok(near + err + far)
}

/// `∫_R^∞ τ^{m−1} Π_{j∈S} (τ|λ_j|)^{−w_j/2} dτ = R^{m−K/2} / (K/2 − m) · Π |λ_j|^{−w_j/2}`
/// with `K = Σ_S w_j`. `S` holds every eigenvalue with `R|λ| ≥ 1`, extended
/// by the next largest until `K/2 > m`.
pub fn envelope_remainder(spectrum: &WeightedSpectrum, m: usize, r: f64) -> f64 {
    let mut order: Vec<usize> = (0..spectrum.values.len())
        .filter(|&k| spectrum.weights[k] > 0.0 && spectrum.values[k] != 0.0)
        .collect();
    order.sort_by(|&a, &b| spectrum.values[b].abs().total_cmp(&spectrum.values[a].abs()));
    let mf = m as f64;
    let mut k_sum = 0.0;
    let mut ln_prod = 0.0;
    for &k in &order {
        let l = spectrum.values[k].abs();
        if r * l < 1.0 && k_sum / 2.0 > mf {
            break;
        }
        k_sum += spectrum.weights[k];
        ln_prod -= 0.5 * spectrum.weights[k] * l.ln();
    }
    if k_sum / 2.0 <= mf {
        return f64::INFINITY;
    }
    ((mf - k_sum / 2.0) * r.ln() + ln_prod).exp() / (k_sum / 2.0 - mf)
}

/// A family `A(w) = Σ w_i A_i` whose spectra can be computed cheaply.
pub trait SpectralFamily: Sync {
    fn m(&self) -> usize;
    /// Ambient dimension `n` (a count, possibly large).
    fn dim(&self) -> f64;
    fn traces(&self) -> Vec<f64>;
    fn spectrum(&self, w: &[f64]) -> Result<WeightedSpectrum>;
}

impl SpectralFamily for OrthoBasis {
    fn m(&self) -> usize {
        self.len()
    }

    fn dim(&self) -> f64 {
        OrthoBasis::dim(self) as f64
    }

    fn traces(&self) -> Vec<f64> {
        self.matrices().iter().map(SymMatrix::trace).collect()
    }

    fn spectrum(&self, w: &[f64]) -> Result<WeightedSpectrum> {
        let a = sphere_combination(self, w)?;
        Ok(WeightedSpectrum::simple(eigenvalues(&a)))
    }
}

/// Orthonormal diagonal matrices given by rows `a_i` over `k` distinct
/// diagonal values, value `k` repeated `multiplicities[k]` times.
#[derive(Debug, Clone)]
pub struct DiagonalFamily {
    rows: Vec<Vec<f64>>,
    multiplicities: Vec<f64>,
}

impl DiagonalFamily {
    pub fn new(rows: Vec<Vec<f64>>, multiplicities: Vec<u64>) -> Result<Self> {
        let k = multiplicities.len();
        if rows.is_empty() || k == 0 {
            return Err(Error::EmptySpan);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: bad.len(),
            });
        }
        let mult: Vec<f64> = multiplicities.iter().map(|&c| c as f64).collect();
        for (i, ri) in rows.iter().enumerate() {
            for (j, rj) in rows.iter().enumerate() {
                let g: f64 = ri.iter().zip(rj).zip(&mult).map(|((a, b), c)| a * b * c).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (g - want).abs() > 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "diagonal family is not orthonormal: <A_{i}, A_{j}> = {g}"
                    )));
                }
            }
        }
        Ok(Self {
            rows,
            multiplicities: mult,
        })
    }

    /// `A_i = diag(s_i / √n)` over all sign patterns `s ∈ {±1}^m`, each
    /// repeated `multiplicity` times, so `n = 2^m · multiplicity`,
    /// `Σ A_i² = (m/n) I` and every `A_i` is traceless.
    pub fn sign_patterns(m: usize, multiplicity: u64) -> Result<Self> {
        if m == 0 || m > 20 || multiplicity == 0 {
            return Err(Error::InvalidArgument(format!(
                "sign patterns need 1 <= m <= 20 and multiplicity >= 1, got m = {m}"
            )));
        }
        let k = 1usize << m;
        let n = k as f64 * multiplicity as f64;
        let scale = 1.0 / n.sqrt();
        let rows = (0..m)
            .map(|i| {
                (0..k)
                    .map(|s| if (s >> i) & 1 == 1 { scale } else { -scale })
                    .collect()
            })
            .collect();
        Self::new(rows, vec![multiplicity; k])
    }

    /// `‖Σ A_i²‖_op`.
    pub fn sum_of_squares_op(&self) -> f64 {
        (0..self.multiplicities.len())
            .map(|k| self.rows.iter().map(|r| r[k] * r[k]).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl SpectralFamily for DiagonalFamily {
    fn m(&self) -> usize {
        self.rows.len()
    }

    fn dim(&self) -> f64 {
        self.multiplicities.iter().sum()
    }

    fn traces(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(&self.multiplicities).map(|(a, c)| a * c).sum())
            .collect()
    }

    fn spectrum(&self, w: &[f64]) -> Result<WeightedSpectrum> {
        if w.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                found: w.len(),
            });
        }
        let values = (0..self.multiplicities.len())
            .map(|k| self.rows.iter().zip(w).map(|(r, wi)| r[k] * wi).sum())
            .collect();
        Ok(WeightedSpectrum {
            values,
            weights: self.multiplicities.clone(),
        })
    }
}

/// Full-convention right-hand sides to the half convention:
/// `⟨Qx, x⟩ = α ⇔ ½⟨Qx, x⟩ = α/2`, with the matrices unchanged.
pub fn to_half_form(alpha: &[f64]) -> Vec<f64> {
    alpha.iter().map(|a| 0.5 * a).collect()
}

/// Trace-matched half-convention right-hand sides `α_i = ½ tr A_i`.
pub fn trace_matched_alpha<F: SpectralFamily + ?Sized>(family: &F) -> Vec<f64> {
    family.traces().into_iter().map(|t| 0.5 * t).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The real part exceeds the total uncertainty, so the integral is nonzero.
    PositiveReal,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TamenessCounts {
    pub tame: usize,
    pub wild_cubic: usize,
    pub wild_quartic: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralEstimate {
    /// Haar mean of the radial integrals over `[0, 5√m]`.
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    /// Mean per-sample quadrature error estimate.
    pub quadrature_error: f64,
    /// Mean per-sample tail bound.
    pub tail_bound: f64,
    /// Standard error of the real part.
    pub mc_stderr: f64,
    pub samples: usize,
    pub seed: u64,
    pub verdict: Verdict,
    pub tameness: TamenessCounts,
}

impl IntegralEstimate {
    pub fn total_uncertainty(&self) -> f64 {
        self.quadrature_error + self.tail_bound + 3.0 * self.mc_stderr
    }
}

/// Haar Monte Carlo for the polar form of the Fourier integral with
/// phase `⟨α, w⟩`. Directions are drawn sequentially from the seed and
/// evaluated in parallel; the reduction order is fixed.
pub fn verify_inhomogeneous<F: SpectralFamily + ?Sized>(
    family: &F,
    alpha: &[f64],
    opts: &VerifyOptions,
) -> Result<IntegralEstimate> {
    let m = family.m();
    if alpha.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: alpha.len(),
        });
    }
    if opts.samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ws: Vec<Vec<f64>> = (0..opts.samples).map(|_| sample_sphere(m, &mut rng)).collect();
    let outcomes: Vec<(RadialEstimate, Tameness)> = ws
        .par_iter()
        .map(|w| {
            let spectrum = family.spectrum(w)?;
            let class = classify(&spectrum, m).class;
            let shift: f64 = alpha.iter().zip(w).map(|(a, x)| a * x).sum();
            let ri = RadialIntegrand::weighted(spectrum, shift, m);
            Ok((radial_integral(&ri, None)?, class))
        })
        .collect::<Result<_>>()?;

    let count = outcomes.len() as f64;
    let mut value = Complex64::new(0.0, 0.0);
    let mut quad = 0.0;
    let mut tail = 0.0;
    let mut tameness = TamenessCounts::default();
    for (est, class) in &outcomes {
        value += est.value;
        quad += est.quadrature_error;
        tail += est.tail_bound;
        match class {
            Tameness::Tame => tameness.tame += 1,
            Tameness::WildCubic => tameness.wild_cubic += 1,
            Tameness::WildQuartic => tameness.wild_quartic += 1,
        }
    }
    value /= count;
    let mean_re = value.re;
    let mc_stderr = if outcomes.len() > 1 {
        let var = outcomes
            .iter()
            .map(|(e, _)| (e.value.re - mean_re).powi(2))
            .sum::<f64>()
            / (count - 1.0);
        (var / count).sqrt()
    } else {
        f64::INFINITY
    };
    let mut est = IntegralEstimate {
        value,
        quadrature_error: quad / count,
        tail_bound: tail / count,
        mc_stderr,
        samples: outcomes.len(),
        seed: opts.seed,
        verdict: Verdict::Inconclusive,
        tameness,
    };
    if est.value.re > est.total_uncertainty() {
        est.verdict = Verdict::PositiveReal;
    }
    Ok(est)
}

/// Trace-matched check: requires `α_i = ½ tr A_i` within `1e-8`.
pub fn verify_trace_matched<F: SpectralFamily + ?Sized>(
    family: &F,
    alpha: &[f64],
    opts: &VerifyOptions,
) -> Result<IntegralEstimate> {
    let matched = trace_matched_alpha(family);
    if alpha.len() != matched.len() {
        return Err(Error::DimensionMismatch {
            expected: matched.len(),
            found: alpha.len(),
        });
    }
    for (i, (a, t)) in alpha.iter().zip(&matched).enumerate() {
        if (a - t).abs() > 1e-8 {
            return Err(Error::Hypothesis(format!(
                "alpha[{i}] = {a} is not half the trace {t}"
            )));
        }
    }
    verify_inhomogeneous(family, alpha, opts)
}

/// Homogeneous check: traceless members and `m < n`.
pub fn verify_traceless<F: SpectralFamily + ?Sized>(
    family: &F,
    opts: &VerifyOptions,
) -> Result<IntegralEstimate> {
    for (index, trace) in family.traces().into_iter().enumerate() {
        if trace.abs() > 1e-8 {
            return Err(Error::NonzeroTrace { index, trace });
        }
    }
    let m = family.m();
    if m as f64 >= family.dim() {
        return Err(Error::Hypothesis(format!(
            "homogeneous criterion needs m < n (m = {m}, n = {})",
            family.dim()
        )));
    }
    verify_inhomogeneous(family, &vec![0.0; m], opts)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmoothingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

fn small_eigenvalues(q: &[[f64; 2]; 2], n: usize) -> [f64; 2] {
    if n == 1 {
        return [q[0][0], 0.0];
    }
    let mean = 0.5 * (q[0][0] + q[1][1]);
    let half = 0.5 * (q[0][0] - q[1][1]);
    let r = half.hypot(q[0][1]);
    [mean + r, mean - r]
}

/// Both sides of the Gaussian smoothing identity
///
/// ```text
/// (2π)^{−n/2} ∫ exp(−σ²/2 Σ (q_i(x) − α_i)²) e^{−|x|²/2} dx
///   = σ^{−m} (2π)^{−m/2} ∫ det^{−1/2}(I − iΣ τ_i Q_i) e^{−i⟨α, t⟩} e^{−|t|²/2σ²} dt
/// ```
///
/// by tensor Gauss–Legendre quadrature, for half-convention forms with
/// `n ≤ 2` and `m ≤ 2`.
pub fn smoothing_identity_check(qs: &[SymMatrix], alpha: &[f64], sigma: f64) -> Result<SmoothingCheck> {
    let m = qs.len();
    if m == 0 || m > 2 || alpha.len() != m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= m <= 2 forms with matching alpha, got {m} and {}",
            alpha.len()
        )));
    }
    let n = qs[0].dim();
    if n > 2 || qs.iter().any(|q| q.dim() != n) {
        return Err(Error::InvalidArgument(format!("need common n <= 2, got {n}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let mats: Vec<[[f64; 2]; 2]> = qs
        .iter()
        .map(|q| {
            let mut a = [[0.0; 2]; 2];
            for (i, row) in a.iter_mut().enumerate().take(n) {
                for (j, v) in row.iter_mut().enumerate().take(n) {
                    *v = q.get(i, j);
                }
            }
            a
        })
        .collect();

    let (xs, xw) = composite_rule(-12.0, 12.0, 64, 20);
    let lhs_point = |x: [f64; 2]| -> f64 {
        let pen: f64 = mats
            .iter()
            .zip(alpha)
            .map(|(q, a)| {
                let qx = 0.5
                    * (q[0][0] * x[0] * x[0] + 2.0 * q[0][1] * x[0] * x[1] + q[1][1] * x[1] * x[1]);
                (qx - a).powi(2)
            })
            .sum();
        (-0.5 * sigma * sigma * pen - 0.5 * (x[0] * x[0] + x[1] * x[1])).exp()
    };
    let mut lhs = 0.0;
    if n == 1 {
        for (x, w) in xs.iter().zip(&xw) {
            lhs += w * lhs_point([*x, 0.0]);
        }
    } else {
        for (x0, w0) in xs.iter().zip(&xw) {
            for (x1, w1) in xs.iter().zip(&xw) {
                lhs += w0 * w1 * lhs_point([*x0, *x1]);
            }
        }
    }
    lhs /= (2.0 * PI).powf(n as f64 / 2.0);

    let l = 9.5 * sigma;
    let (ts, tw) = composite_rule(-l, l, 96, 20);
    let rhs_point = |t: [f64; 2]| -> f64 {
        let mut comb = [[0.0; 2]; 2];
        for (q, ti) in mats.iter().zip(t) {
            for i in 0..2 {
                for j in 0..2 {
                    comb[i][j] += ti * q[i][j];
                }
            }
        }
        let eig = small_eigenvalues(&comb, n);
        let d = det_power(&eig[..n], 1.0);
        let phase: f64 = alpha.iter().zip(t).map(|(a, ti)| a * ti).sum();
        let gauss = (-(t[0] * t[0] + t[1] * t[1]) / (2.0 * sigma * sigma)).exp();
        (d * Complex64::from_polar(gauss, -phase)).re
    };
    let mut rhs = 0.0;
    if m == 1 {
        for (t, w) in ts.iter().zip(&tw) {
            rhs += w * rhs_point([*t, 0.0]);
        }
    } else {
        for (t0, w0) in ts.iter().zip(&tw) {
            for (t1, w1) in ts.iter().zip(&tw) {
                rhs += w0 * w1 * rhs_point([*t0, *t1]);
            }
        }
    }
    rhs /= sigma.powi(m as i32) * (2.0 * PI).powf(m as f64 / 2.0);
    Ok(SmoothingCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}
