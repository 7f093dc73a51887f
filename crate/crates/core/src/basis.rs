//! Orthonormal bases of matrix subspaces and the invariant `B = Σ A_i²`.
//!
//! For an orthonormal basis `A_1..A_m` of a subspace of symmetric matrices
//! (trace inner product), `B = Σ A_i²` depends only on the subspace: any other
//! orthonormal basis is an orthogonal mix of the first and the mixing matrix
//! cancels out of the sum.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::symmat::{inner, SymMatrix};
use crate::{Error, Result};

pub const DEFAULT_DEP_TOL: f64 = 1e-9;
const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct OrthoBasis {
    matrices: Vec<SymMatrix>,
    sum_sq: SymMatrix,
    /// Row `i` expresses `A_i` in the kept inputs: `A_i = Σ_j M_ij Q_j`,
    /// with `j` ranging over all inputs (dropped inputs get zero columns).
    change_of_basis: DMatrix<f64>,
    dropped: Vec<usize>,
}

impl OrthoBasis {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn matrices(&self) -> &[SymMatrix] {
        &self.matrices
    }

    pub fn change_of_basis(&self) -> &DMatrix<f64> {
        &self.change_of_basis
    }

    /// Indices of inputs dropped as zero or linearly dependent.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Transports right-hand sides along the change of basis: if the inputs
    /// satisfy `q_j(x) = α_j`, the basis forms satisfy `a_i(x) = (M α)_i`.
    pub fn transform_rhs(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        if alpha.len() != self.change_of_basis.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.change_of_basis.ncols(),
                found: alpha.len(),
            });
        }
        Ok((0..self.len())
            .map(|i| {
                self.change_of_basis
                    .row(i)
                    .iter()
                    .zip(alpha)
                    .map(|(m, a)| m * a)
                    .sum()
            })
            .collect())
    }

    /// The basis `A'_i = Σ_j R_ij A_j` for an orthogonal `R`.
    pub fn rotate(&self, r: &DMatrix<f64>) -> Result<OrthoBasis> {
        let m = self.len();
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: r.nrows(),
            });
        }
        let defect = (r.transpose() * r - DMatrix::identity(m, m)).norm();
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "rotation is not orthogonal (‖RᵀR − I‖ = {defect:.3e})"
            )));
        }
        let matrices = (0..m)
            .map(|i| {
                let coeffs: Vec<f64> = r.row(i).iter().copied().collect();
                SymMatrix::combination(&coeffs, &self.matrices)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OrthoBasis {
            sum_sq: sum_squares_of(&matrices),
            change_of_basis: r * &self.change_of_basis,
            dropped: self.dropped.clone(),
            matrices,
        })
    }
}

fn sum_squares_of(mats: &[SymMatrix]) -> SymMatrix {
    let n = mats[0].dim();
    let mut acc = DMatrix::zeros(n, n);
    for a in mats {
        let m = a.as_matrix();
        acc.gemm(1.0, m, m, 1.0);
    }
    SymMatrix::new(acc).expect("sum of squares is finite and square")
}

/// Classical Gram–Schmidt with one re-orthogonalization pass.
///
/// An input is dropped when its residual after projection has HS-norm at most
/// `dep_tol` times its own HS-norm; exact zeros are always dropped.
pub fn orthonormalize(qs: &[SymMatrix], dep_tol: f64) -> Result<OrthoBasis> {
    let first = qs
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty matrix list".into()))?;
    if dep_tol <= 0.0 || !dep_tol.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dependence tolerance must be positive, got {dep_tol}"
        )));
    }
    let n = first.dim();
    let k = qs.len();
    let mut basis: Vec<SymMatrix> = Vec::with_capacity(k);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut dropped = Vec::new();

    for (idx, q) in qs.iter().enumerate() {
        if q.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.dim(),
            });
        }
        let norm0 = q.hs_norm();
        if norm0 == 0.0 {
            dropped.push(idx);
            continue;
        }
        let mut v = q.clone();
        let mut row = vec![0.0; k];
        row[idx] = 1.0;
        for _pass in 0..2 {
            let coeffs: Vec<f64> = basis.iter().map(|a| inner(a, &v).unwrap()).collect();
            for ((a, r), c) in basis.iter().zip(&rows).zip(&coeffs) {
                v = v.axpy(-c, a);
                for (dst, src) in row.iter_mut().zip(r) {
                    *dst -= c * src;
                }
            }
        }
        let rnorm = v.hs_norm();
        if rnorm <= dep_tol * norm0 {
            dropped.push(idx);
            continue;
        }
        basis.push(v.scale(1.0 / rnorm));
        rows.push(row.into_iter().map(|x| x / rnorm).collect());
    }

    if basis.is_empty() {
        return Err(Error::EmptySpan);
    }
    let change_of_basis = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    Ok(OrthoBasis {
        sum_sq: sum_squares_of(&basis),
        matrices: basis,
        change_of_basis,
        dropped,
    })
}

/// `B = Σ A_i²`.
pub fn sum_of_squares(basis: &OrthoBasis) -> SymMatrix {
    basis.sum_sq.clone()
}

/// `A(w) = Σ ω_i A_i` for a unit vector `w`.
pub fn sphere_combination(basis: &OrthoBasis, w: &[f64]) -> Result<SymMatrix> {
    if w.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: w.len(),
        });
    }
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnitVector { norm });
    }
    SymMatrix::combination(w, &basis.matrices)
}

/// Haar-distributed point on `S^{m-1}`: a normalized standard Gaussian vector.
pub fn sample_sphere<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return g.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Haar-random orthogonal matrix (QR of a Gaussian matrix with the sign of
/// `diag R` fixed positive).
pub fn random_orthogonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::test_util::{random_sym, rng};
    use crate::symmat::{eigenvalues, norms};

    fn gram(b: &OrthoBasis) -> DMatrix<f64> {
        let m = b.len();
        DMatrix::from_fn(m, m, |i, j| inner(&b.matrices()[i], &b.matrices()[j]).unwrap())
    }

    fn random_basis(n: usize, m: usize, seed: u64) -> OrthoBasis {
        let mut r = rng(seed);
        let qs: Vec<_> = (0..m).map(|_| random_sym(n, &mut r)).collect();
        orthonormalize(&qs, DEFAULT_DEP_TOL).unwrap()
    }

    #[test]
    fn diagonal_pair() {
        let qs = [
            SymMatrix::diagonal(&[1.0, 0.0]).unwrap(),
            SymMatrix::diagonal(&[1.0, 1.0]).unwrap(),
        ];
        let b = orthonormalize(&qs, DEFAULT_DEP_TOL).unwrap();
        assert_eq!(b.len(), 2);
        assert!(inner(&b.matrices()[0], &b.matrices()[1]).unwrap().abs() <= 1e-10);
        for a in b.matrices() {
            assert!(a.get(0, 1) == 0.0);
        }
    }

    #[test]
    fn exact_dependence_is_dropped() {
        let a = random_sym(4, &mut rng(2));
        let b = orthonormalize(&[a.clone(), a.scale(2.0)], DEFAULT_DEP_TOL).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.dropped(), &[1]);
    }

    #[test]
    fn zero_inputs_give_empty_span() {
        let z = SymMatrix::zeros(3);
        assert_eq!(
            orthonormalize(&[z.clone(), z], DEFAULT_DEP_TOL).unwrap_err(),
            Error::EmptySpan
        );
        assert!(orthonormalize(&[], DEFAULT_DEP_TOL).is_err());
        assert!(orthonormalize(&[SymMatrix::identity(2)], 0.0).is_err());
    }

    #[test]
    fn random_gram_is_identity() {
        let b = random_basis(6, 4, 5);
        let g = gram(&b);
        assert!((g - DMatrix::identity(4, 4)).amax() <= 1e-8);
    }

    #[test]
    fn span_is_preserved() {
        let mut r = rng(8);
        let qs: Vec<_> = (0..5).map(|_| random_sym(5, &mut r)).collect();
        let b = orthonormalize(&qs, DEFAULT_DEP_TOL).unwrap();
        for q in &qs {
            let coeffs: Vec<f64> = b.matrices().iter().map(|a| inner(a, q).unwrap()).collect();
            let rec = SymMatrix::combination(&coeffs, b.matrices()).unwrap();
            assert!((&rec - q).hs_norm() <= 1e-7 * q.hs_norm());
        }
        // the change of basis reproduces each A_i from the inputs
        for (i, a) in b.matrices().iter().enumerate() {
            let row: Vec<f64> = b.change_of_basis().row(i).iter().copied().collect();
            let rec = SymMatrix::combination(&row, &qs).unwrap();
            assert!((&rec - a).hs_norm() <= 1e-8);
        }
    }

    #[test]
    fn sum_of_squares_examples() {
        let n = 4;
        let b = orthonormalize(&[SymMatrix::identity(n)], DEFAULT_DEP_TOL).unwrap();
        let bb = sum_of_squares(&b);
        assert!((&bb - &SymMatrix::identity(n).scale(1.0 / n as f64)).hs_norm() < 1e-15);

        for seed in 0..5 {
            let basis = random_basis(7, 4, 100 + seed);
            let bb = sum_of_squares(&basis);
            assert!((bb.trace() - 4.0).abs() <= 1e-8);
            let ev = eigenvalues(&bb);
            assert!(*ev.last().unwrap() >= -1e-10);
            let nm = norms(&bb);
            assert!(nm.hs * nm.hs <= 4.0 * nm.op + 1e-8);
            // invariance under an orthogonal remix
            let rot = random_orthogonal(4, &mut rng(seed));
            let remixed = basis.rotate(&rot).unwrap();
            assert!((&sum_of_squares(&remixed) - &bb).hs_norm() <= 1e-8);
            assert!((gram(&remixed) - DMatrix::identity(4, 4)).amax() <= 1e-8);
        }
    }

    #[test]
    fn sphere_combination_examples() {
        let basis = random_basis(8, 3, 21);
        let a1 = sphere_combination(&basis, &[1.0, 0.0, 0.0]).unwrap();
        assert!((&a1 - &basis.matrices()[0]).hs_norm() < 1e-15);
        assert!(matches!(
            sphere_combination(&basis, &[1.0, 1.0, 0.0]),
            Err(Error::NotUnitVector { .. })
        ));
        assert!(sphere_combination(&basis, &[1.0, 0.0]).is_err());

        let b_op = norms(&sum_of_squares(&basis)).op;
        let mut r = rng(4);
        for _ in 0..200 {
            let w = sample_sphere(3, &mut r);
            let a = sphere_combination(&basis, &w).unwrap();
            let ev = eigenvalues(&a);
            let nm = crate::symmat::Norms::from_eigenvalues(&ev);
            assert!((nm.hs - 1.0).abs() <= 1e-8);
            assert!(nm.op <= b_op.sqrt() + 1e-8);
            let s4: f64 = ev.iter().map(|l| l.powi(4)).sum();
            assert!(s4 <= b_op + 1e-8);
        }
    }

    #[test]
    fn projection_bound() {
        let basis = random_basis(6, 4, 31);
        let mut r = rng(32);
        for _ in 0..20 {
            // not necessarily symmetric
            let c = DMatrix::from_fn(6, 6, |_, _| r.sample::<f64, _>(StandardNormal));
            let proj: f64 = basis
                .matrices()
                .iter()
                .map(|a| a.as_matrix().dot(&c).powi(2))
                .sum();
            assert!(proj <= c.norm_squared() + 1e-8);
        }
    }

    #[test]
    fn transform_rhs_follows_change_of_basis() {
        let mut r = rng(41);
        let qs: Vec<_> = (0..3).map(|_| random_sym(4, &mut r)).collect();
        let basis = orthonormalize(&qs, DEFAULT_DEP_TOL).unwrap();
        let x = [0.3, -1.2, 0.5, 2.0];
        let alpha: Vec<f64> = qs.iter().map(|q| q.quad_form(&x)).collect();
        let beta = basis.transform_rhs(&alpha).unwrap();
        for (a, b) in basis.matrices().iter().zip(beta) {
            assert!((a.quad_form(&x) - b).abs() < 1e-10);
        }
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let q = random_orthogonal(5, &mut rng(1));
        assert!((q.transpose() * &q - DMatrix::identity(5, 5)).amax() < 1e-12);
    }
}
