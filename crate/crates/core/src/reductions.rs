//! Homogenization of inhomogeneous quadratic equations.
//!
//! `⟨Qx, x⟩ + ⟨b, x⟩ + c = 0` becomes the form `[[Q, b/2], [bᵀ/2, c]]` in
//! `(x, τ) ∈ R^{n+1}`, together with the extra equation `τ² = 1`.

use nalgebra::DMatrix;

use crate::symmat::SymMatrix;
use crate::{Error, Result};

/// `⟨Qx, x⟩ + ⟨b, x⟩ + c`.
#[derive(Debug, Clone)]
pub struct QuadraticPolynomial {
    pub q: SymMatrix,
    pub b: Vec<f64>,
    pub c: f64,
}

impl QuadraticPolynomial {
    pub fn new(q: SymMatrix, b: Vec<f64>, c: f64) -> Result<Self> {
        if b.len() != q.dim() {
            return Err(Error::DimensionMismatch {
                expected: q.dim(),
                found: b.len(),
            });
        }
        Ok(Self { q, b, c })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.q.quad_form(x) + self.b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>() + self.c
    }
}

#[derive(Debug, Clone)]
pub struct HomogenizedSystem {
    pub original_n: usize,
    /// Lifted forms, one per input polynomial, followed by `τ²`.
    pub lifted: Vec<SymMatrix>,
    /// Right-hand sides: zeros for the lifted forms, 1 for `τ² = 1`.
    pub rhs: Vec<f64>,
    pub tau_index: usize,
    pub warning: &'static str,
}

pub const TAU_ZERO_WARNING: &str =
    "lifted solutions with tau = 0 do not transport back to the original system";

impl HomogenizedSystem {
    pub fn lifted_dim(&self) -> usize {
        self.original_n + 1
    }

    /// `(x, τ) ↦ x/τ`; `None` when `τ` vanishes numerically.
    pub fn transport(&self, lifted: &[f64]) -> Option<Vec<f64>> {
        if lifted.len() != self.lifted_dim() {
            return None;
        }
        let tau = lifted[self.tau_index];
        let scale = lifted.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if tau.abs() <= 1e-12 * scale.max(1.0) {
            return None;
        }
        Some(
            lifted
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != self.tau_index)
                .map(|(_, v)| v / tau)
                .collect(),
        )
    }
}

pub fn homogenize(polys: &[QuadraticPolynomial]) -> Result<HomogenizedSystem> {
    let n = polys
        .first()
        .ok_or_else(|| Error::InvalidArgument("no polynomials given".into()))?
        .q
        .dim();
    let mut lifted = Vec::with_capacity(polys.len() + 1);
    for p in polys {
        if p.q.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.q.dim(),
            });
        }
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(p.q.as_matrix());
        for (i, bi) in p.b.iter().enumerate() {
            m[(i, n)] = 0.5 * bi;
            m[(n, i)] = 0.5 * bi;
        }
        m[(n, n)] = p.c;
        lifted.push(SymMatrix::new(m)?);
    }
    let mut tau = vec![0.0; n + 1];
    tau[n] = 1.0;
    lifted.push(SymMatrix::diagonal(&tau)?);
    let mut rhs = vec![0.0; polys.len()];
    rhs.push(1.0);
    log::warn!("{TAU_ZERO_WARNING}");
    Ok(HomogenizedSystem {
        original_n: n,
        lifted,
        rhs,
        tau_index: n,
        warning: TAU_ZERO_WARNING,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, OracleOptions};
    use crate::symmat::test_util::{random_sym, rng};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_poly(n: usize, seed: u64) -> QuadraticPolynomial {
        let mut r = rng(seed);
        let q = random_sym(n, &mut r);
        let b = (0..n).map(|_| r.sample(StandardNormal)).collect();
        QuadraticPolynomial::new(q, b, r.sample(StandardNormal)).unwrap()
    }

    #[test]
    fn pure_quadratic_is_padded() {
        let q = SymMatrix::from_row_major(2, &[1.0, 2.0, 2.0, -3.0]).unwrap();
        let h = homogenize(&[QuadraticPolynomial::new(q.clone(), vec![0.0; 2], 0.0).unwrap()])
            .unwrap();
        let l = &h.lifted[0];
        for i in 0..3 {
            for j in 0..3 {
                let want = if i < 2 && j < 2 { q.get(i, j) } else { 0.0 };
                assert_eq!(l.get(i, j), want);
            }
        }
        assert_eq!(h.rhs, vec![0.0, 1.0]);
        assert_eq!(h.lifted_dim(), 3);
    }

    #[test]
    fn perfect_square() {
        // x² + 2x + 1 lifts to (x + τ)²
        let p = QuadraticPolynomial::new(SymMatrix::identity(1), vec![2.0], 1.0).unwrap();
        let h = homogenize(&[p]).unwrap();
        assert_eq!(h.lifted[0].to_row_major(), vec![1.0, 1.0, 1.0, 1.0]);
        let sol = [-1.0, 1.0];
        for (f, r) in h.lifted.iter().zip(&h.rhs) {
            assert_eq!(f.quad_form(&sol), *r);
        }
        assert_eq!(h.transport(&sol).unwrap(), vec![-1.0]);
        assert!(h.transport(&[1.0, 0.0]).is_none());
    }

    #[test]
    fn planted_solution_transports_back() {
        let n = 4;
        let mut r = rng(77);
        let x0: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let polys: Vec<_> = (0..2)
            .map(|k| {
                let p = random_poly(n, 100 + k);
                let c = p.c - p.eval(&x0);
                QuadraticPolynomial::new(p.q, p.b, c).unwrap()
            })
            .collect();
        let h = homogenize(&polys).unwrap();
        let sol = oracle::solve(&h.lifted, &h.rhs, &OracleOptions::default());
        assert!(sol.solved);
        let x = h.transport(&sol.best_x).unwrap();
        for p in &polys {
            assert!(p.eval(&x).abs() <= 1e-8, "{}", p.eval(&x));
        }
    }

    proptest! {
        #[test]
        fn lifted_value_and_scale(seed in 0u64..1000, t in -3.0f64..3.0) {
            let n = 3;
            let p = random_poly(n, seed);
            let h = homogenize(std::slice::from_ref(&p)).unwrap();
            let mut r = rng(seed + 1);
            let x: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
            let mut lifted = x.clone();
            lifted.push(1.0);
            let v = p.eval(&x);
            prop_assert!((h.lifted[0].quad_form(&lifted) - v).abs() <= 1e-12 * v.abs().max(1.0));
            let scaled: Vec<f64> = lifted.iter().map(|v| v * t).collect();
            let want = t * t * v;
            prop_assert!((h.lifted[0].quad_form(&scaled) - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}
