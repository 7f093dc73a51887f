//! Operator-norm solvability certificates.
//!
//! For linearly independent `Q_1..Q_m`, `m ≥ 3`, with an orthonormal basis
//! `A_1..A_m` of their span, `‖Σ A_i²‖_op ≤ η/m` implies that
//! `⟨Q_i x, x⟩ = tr Q_i` has a real solution; for traceless `Q_i` it implies
//! that `⟨Q_i x, x⟩ = 0` has a solution `x ≠ 0`. The test is one-directional,
//! so a failed bound is reported as [`Decision::Inconclusive`], never as
//! unsolvable.

use serde::Serialize;

use crate::basis::{orthonormalize, sum_of_squares, DEFAULT_DEP_TOL};
use crate::symmat::{op_norm, SymMatrix};
use crate::{Error, Result};

/// The constant for which the norm criterion is proven.
pub const DEFAULT_ETA: f64 = 1e-6;

/// Comparisons closer than this to the threshold are flagged instead of decided.
pub const GUARD_BAND: f64 = 1e-9;

/// Relative tolerance on `|tr Q_i| / ‖Q_i‖_HS` for the traceless check.
pub const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    CertifiedSolvable,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub decision: Decision,
    /// `‖Σ A_i²‖_op`.
    pub norm_value: f64,
    /// `η / m_effective`.
    pub threshold: f64,
    pub eta: f64,
    pub m_effective: usize,
    pub n: usize,
    pub homogeneous: bool,
    /// The norm fell within [`GUARD_BAND`] of the threshold.
    pub guard_band: bool,
    pub notes: Vec<String>,
}

/// Certificate for `⟨Q_i x, x⟩ = tr Q_i`.
pub fn certify_inhomogeneous(qs: &[SymMatrix], eta: f64) -> Result<CertificateReport> {
    certify(qs, eta, false)
}

/// Certificate for a nontrivial zero of traceless forms `⟨Q_i x, x⟩ = 0`.
pub fn certify_homogeneous(qs: &[SymMatrix], eta: f64) -> Result<CertificateReport> {
    for (index, q) in qs.iter().enumerate() {
        let trace = q.trace();
        if trace.abs() > TRACE_TOL * q.hs_norm() {
            return Err(Error::NonzeroTrace { index, trace });
        }
    }
    certify(qs, eta, true)
}

fn certify(qs: &[SymMatrix], eta: f64, homogeneous: bool) -> Result<CertificateReport> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let basis = orthonormalize(qs, DEFAULT_DEP_TOL)?;
    let m_effective = basis.len();
    let n = basis.dim();
    let norm_value = op_norm(&sum_of_squares(&basis));
    let threshold = eta / m_effective as f64;

    let mut notes = vec![format!("eta = {eta:e}")];
    if !basis.dropped().is_empty() {
        notes.push(format!(
            "dropped dependent inputs {:?}; span dimension {m_effective} of {} inputs",
            basis.dropped(),
            qs.len()
        ));
    }

    let mut gates_ok = true;
    if m_effective < 3 {
        gates_ok = false;
        notes.push(
            "the norm criterion needs m >= 3; for m <= 2 the relaxation is exact (use the relaxation route)"
                .into(),
        );
    }
    if homogeneous && m_effective >= n {
        gates_ok = false;
        notes.push(format!(
            "homogeneous certificate requires m < n (m = {m_effective}, n = {n})"
        ));
    }

    let guard_band = (norm_value - threshold).abs() <= GUARD_BAND;
    let passes = norm_value < threshold - GUARD_BAND;
    if guard_band {
        notes.push(format!(
            "norm {norm_value:e} within guard band {GUARD_BAND:e} of threshold {threshold:e}; not decided"
        ));
    } else if !passes {
        notes.push(format!("norm {norm_value:e} exceeds threshold {threshold:e}"));
    }

    let decision = if gates_ok && passes {
        Decision::CertifiedSolvable
    } else {
        Decision::Inconclusive
    };
    Ok(CertificateReport {
        decision,
        norm_value,
        threshold,
        eta,
        m_effective,
        n,
        homogeneous,
        guard_band,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::test_util::{random_sym, rng};
    use nalgebra::DMatrix;

    /// `n = 6`, three orthonormal matrices on disjoint 2×2 diagonal blocks.
    fn blocked() -> Vec<SymMatrix> {
        let s = 0.5f64.sqrt();
        let blocks = [
            [s, 0.0, 0.0, s],   // I/√2: A² = I/2
            [0.0, s, s, 0.0],   // swap/√2: A² = I/2
            [1.0, 0.0, 0.0, 0.0], // e1e1ᵀ: A² = A
        ];
        blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let mut m = DMatrix::zeros(6, 6);
                m[(2 * k, 2 * k)] = b[0];
                m[(2 * k, 2 * k + 1)] = b[1];
                m[(2 * k + 1, 2 * k)] = b[2];
                m[(2 * k + 1, 2 * k + 1)] = b[3];
                SymMatrix::new(m).unwrap()
            })
            .collect()
    }

    #[test]
    fn single_equation_is_gated() {
        let r = certify_inhomogeneous(&[SymMatrix::identity(5)], 1e6).unwrap();
        assert_eq!(r.decision, Decision::Inconclusive);
        assert_eq!(r.m_effective, 1);
        assert!(r.notes.iter().any(|n| n.contains("m >= 3")));
    }

    #[test]
    fn blocked_norm_is_max_block_square() {
        let r = certify_inhomogeneous(&blocked(), 10.0).unwrap();
        // block norms: 1/2, 1/2, 1
        assert!((r.norm_value - 1.0).abs() < 1e-12);
        assert!((r.threshold - 10.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.decision, Decision::CertifiedSolvable);
        let r = certify_inhomogeneous(&blocked(), 2.9).unwrap();
        assert_eq!(r.decision, Decision::Inconclusive);
    }

    #[test]
    fn two_by_two_example_is_inconclusive_at_default_eta() {
        let qs = [
            SymMatrix::diagonal(&[1.0, 0.0]).unwrap(),
            SymMatrix::diagonal(&[0.0, 1.0]).unwrap(),
            SymMatrix::unit_pair(2, 0, 1).scale(0.5),
        ];
        let r = certify_inhomogeneous(&qs, DEFAULT_ETA).unwrap();
        assert_eq!(r.decision, Decision::Inconclusive);
        assert!(r.norm_value > r.threshold);
    }

    #[test]
    fn homogeneous_rejects_nonzero_trace() {
        let mut r = rng(3);
        let mut qs: Vec<_> = (0..3)
            .map(|_| {
                let q = random_sym(6, &mut r);
                q.axpy(-q.trace() / 6.0, &SymMatrix::identity(6))
            })
            .collect();
        qs[2] = qs[2].axpy(1.0 / 6.0, &SymMatrix::identity(6));
        match certify_homogeneous(&qs, 1.0) {
            Err(Error::NonzeroTrace { index, trace }) => {
                assert_eq!(index, 2);
                assert!((trace - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn homogeneous_requires_m_below_n() {
        // traceless basis of Sym_2 has dimension 2; use n = 3 with m = 3 inside a
        // 3-dim traceless subspace, then n = m.
        let qs = vec![
            SymMatrix::diagonal(&[1.0, -1.0, 0.0]).unwrap(),
            SymMatrix::diagonal(&[0.0, 1.0, -1.0]).unwrap(),
            SymMatrix::unit_pair(3, 0, 1),
        ];
        let r = certify_homogeneous(&qs, 1e9).unwrap();
        assert_eq!(r.decision, Decision::Inconclusive);
        assert!(r.notes.iter().any(|n| n.contains("m < n")));
    }

    #[test]
    fn guard_band_is_flagged() {
        let qs = blocked();
        // norm is exactly 1; threshold eta/3 == 1 at eta = 3
        let r = certify_inhomogeneous(&qs, 3.0).unwrap();
        assert!(r.guard_band);
        assert_eq!(r.decision, Decision::Inconclusive);
    }

    #[test]
    fn rejects_bad_eta() {
        assert!(certify_inhomogeneous(&blocked(), 0.0).is_err());
        assert!(certify_inhomogeneous(&blocked(), f64::NAN).is_err());
    }
}
