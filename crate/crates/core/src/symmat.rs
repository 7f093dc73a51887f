//! Dense real symmetric matrices with the trace inner product.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Dense `n × n` real symmetric matrix.
///
/// Construction averages the input with its transpose, so `a[(i, j)] ==
/// a[(j, i)]` holds bit-for-bit for every value of this type.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.inner)
    }
}

impl SymMatrix {
    /// Symmetrizes a square matrix, `(M + Mᵀ) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        if m.ncols() != n {
            return Err(Error::InvalidMatrix(format!(
                "matrix is {}x{}, expected square",
                n,
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Self { inner: m }
    }

    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    /// The elementary symmetric matrix with ones at `(i, j)` and `(j, i)`.
    pub fn unit_pair(n: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
        Self { inner: m }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.inner.transpose().as_slice().to_vec()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn hs_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: &self.inner * s,
        }
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: f64, other: &SymMatrix) -> Self {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Self {
            inner: &self.inner + &other.inner * s,
        }
    }

    pub fn square(&self) -> Self {
        Self::symmetrized(&self.inner * &self.inner)
    }

    /// `⟨A x, x⟩`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        let n = self.dim();
        let mut acc = 0.0;
        for j in 0..n {
            let col = self.inner.column(j);
            let mut s = 0.0;
            for i in 0..n {
                s += col[i] * x[i];
            }
            acc += s * x[j];
        }
        acc
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        let v = &self.inner * nalgebra::DVector::from_column_slice(x);
        v.as_slice().to_vec()
    }

    /// `Tᵀ A T` for an `n × r` matrix `T`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> Result<Self> {
        if t.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: t.nrows(),
            });
        }
        Ok(Self::symmetrized(t.transpose() * &self.inner * t))
    }

    /// Linear combination `Σ c_i M_i`; all matrices must share one dimension.
    pub fn combination(coeffs: &[f64], mats: &[SymMatrix]) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty matrix list".into()))?;
        if coeffs.len() != mats.len() {
            return Err(Error::DimensionMismatch {
                expected: mats.len(),
                found: coeffs.len(),
            });
        }
        let n = first.dim();
        let mut acc = DMatrix::zeros(n, n);
        for (c, m) in coeffs.iter().zip(mats) {
            if m.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.dim(),
                });
            }
            acc += &m.inner * *c;
        }
        Ok(Self::symmetrized(acc))
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

/// Trace inner product `⟨A, B⟩ = tr AB = Σ_ij a_ij b_ij`.
pub fn inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.inner.dot(&b.inner))
}

/// Eigenvalues in descending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.values));
        SymMatrix::symmetrized(&self.vectors * lambda * self.vectors.transpose())
    }
}

const EIGEN_SWEEPS_PER_DIM: usize = 1000;

pub fn eigendecompose(a: &SymMatrix) -> Result<Spectrum> {
    let n = a.dim();
    let eig = SymmetricEigen::try_new(
        a.inner.clone(),
        f64::EPSILON,
        EIGEN_SWEEPS_PER_DIM * n.max(1),
    )
    .ok_or_else(|| Error::EigenNoConvergence {
        residual: off_diagonal_norm(&a.inner),
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum { values, vectors })
}

/// Eigenvalues only, descending.
pub fn eigenvalues(a: &SymMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = a.inner.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Operator, Hilbert–Schmidt and 4-Schatten norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub op: f64,
    pub hs: f64,
    pub s4: f64,
}

impl Norms {
    pub fn from_eigenvalues(values: &[f64]) -> Self {
        let mut op = 0.0f64;
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for &l in values {
            op = op.max(l.abs());
            let l2 = l * l;
            s2 += l2;
            s4 += l2 * l2;
        }
        Self {
            op,
            hs: s2.sqrt(),
            s4: s4.sqrt().sqrt(),
        }
    }
}

pub fn norms(a: &SymMatrix) -> Norms {
    Norms::from_eigenvalues(&eigenvalues(a))
}

/// Largest eigenvalue magnitude.
pub fn op_norm(a: &SymMatrix) -> f64 {
    norms(a).op
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_sym(n: usize, rng: &mut impl Rng) -> SymMatrix {
        SymMatrix::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)).unwrap()
    }

    /// `Gᵀ G` for a random square `G`.
    pub fn random_psd(n: usize, rng: &mut impl Rng) -> SymMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        SymMatrix::new(g.transpose() * g).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn construction_symmetrizes() {
        let a = SymMatrix::from_row_major(2, &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 0), 3.0);
        assert!(SymMatrix::from_row_major(2, &[1.0, 2.0, 3.0]).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(0, 0)).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn inner_examples() {
        let i2 = SymMatrix::identity(2);
        assert_eq!(inner(&i2, &i2).unwrap(), 2.0);
        let d = SymMatrix::diagonal(&[1.0, -1.0]).unwrap();
        assert_eq!(inner(&d, &i2).unwrap(), 0.0);
        assert!(inner(&i2, &SymMatrix::identity(3)).is_err());
    }

    #[test]
    fn inner_self_matches_eigenvalue_squares() {
        let mut r = rng(1);
        for n in [1, 3, 7] {
            let a = random_sym(n, &mut r);
            let via_eig: f64 = eigenvalues(&a).iter().map(|l| l * l).sum();
            let direct = inner(&a, &a).unwrap();
            assert!((direct - via_eig).abs() <= 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn eigendecompose_examples() {
        let d = SymMatrix::diagonal(&[3.0, 1.0, 2.0]).unwrap();
        let s = eigendecompose(&d).unwrap();
        assert_eq!(s.values, vec![3.0, 2.0, 1.0]);

        let s = eigendecompose(&SymMatrix::identity(4)).unwrap();
        assert!(s.values.iter().all(|&l| (l - 1.0).abs() < 1e-15));

        let a = random_sym(5, &mut rng(7));
        let s = eigendecompose(&a).unwrap();
        let sum: f64 = s.values.iter().sum();
        assert!((sum - a.trace()).abs() <= 1e-10);
    }

    #[test]
    fn spectrum_invariants() {
        let mut r = rng(3);
        for n in [1, 2, 6, 15] {
            let a = random_sym(n, &mut r);
            let s = eigendecompose(&a).unwrap();
            assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
            let err = (&s.reconstruct() - &a).hs_norm();
            assert!(err <= 1e-10 * a.hs_norm().max(1.0), "reconstruction {err}");
            let gram = s.vectors.transpose() * &s.vectors;
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - want).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn eigendecompose_is_deterministic() {
        let a = random_sym(8, &mut rng(11));
        let s1 = eigendecompose(&a).unwrap();
        let s2 = eigendecompose(&a).unwrap();
        assert_eq!(s1.values, s2.values);
        assert_eq!(s1.vectors, s2.vectors);
    }

    #[test]
    fn norm_examples() {
        let a = SymMatrix::diagonal(&[1.0, -1.0]).unwrap().scale(1.0 / 2f64.sqrt());
        let nm = norms(&a);
        assert!((nm.op - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((nm.hs - 1.0).abs() < 1e-15);
        assert!((nm.s4 - 2f64.powf(-0.25)).abs() < 1e-15);

        // rank-one projector onto a unit vector
        let v = [0.6, 0.0, 0.8];
        let p = SymMatrix::from_fn(3, |i, j| v[i] * v[j]).unwrap();
        let nm = norms(&p);
        for x in [nm.op, nm.hs, nm.s4] {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quad_form_and_congruence() {
        let a = SymMatrix::from_row_major(2, &[2.0, 1.0, 1.0, -1.0]).unwrap();
        assert_eq!(a.quad_form(&[1.0, 2.0]), 2.0 + 4.0 - 4.0);
        let t = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let c = a.congruence(&t).unwrap();
        assert_eq!(c.dim(), 1);
        assert_eq!(c.get(0, 0), 2.0);
    }

    fn sym_strategy(n: usize) -> impl Strategy<Value = SymMatrix> {
        proptest::collection::vec(-5.0f64..5.0, n * n)
            .prop_map(move |d| SymMatrix::from_row_major(n, &d).unwrap())
    }

    fn sym_pair() -> impl Strategy<Value = (SymMatrix, SymMatrix)> {
        (1usize..8).prop_flat_map(|n| (sym_strategy(n), sym_strategy(n)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norm_ordering((a, _) in sym_pair()) {
            let nm = norms(&a);
            let n = a.dim() as f64;
            let tol = 1e-10 * nm.hs.max(1.0);
            prop_assert!(nm.op <= nm.hs + tol);
            prop_assert!(nm.hs <= n.sqrt() * nm.op + tol);
            prop_assert!(nm.s4 <= (nm.op * nm.hs).sqrt() + 1e-12 * nm.hs.max(1.0));
            prop_assert!(nm.op >= 0.0 && nm.s4 >= 0.0);
        }

        #[test]
        fn schatten4_triangle((a, b) in sym_pair()) {
            let lhs = norms(&(&a + &b)).s4;
            let rhs = norms(&a).s4 + norms(&b).s4;
            prop_assert!(lhs <= rhs + 1e-10 * rhs.max(1.0));
        }

        #[test]
        fn inner_symmetric((a, b) in sym_pair()) {
            prop_assert_eq!(inner(&a, &b).unwrap(), inner(&b, &a).unwrap());
        }

        #[test]
        fn psd_pairs_have_nonnegative_inner(n in 1usize..8, seed in any::<u64>()) {
            let mut r = rng(seed);
            let a = random_psd(n, &mut r);
            let b = random_psd(n, &mut r);
            prop_assert!(inner(&a, &b).unwrap() >= -1e-12);
        }
    }
}
