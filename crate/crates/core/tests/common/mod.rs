#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use quadcert::SymMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_sym<R: Rng>(n: usize, r: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) * 0.5
}

pub fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::new(m).unwrap()
}

pub fn random_forms<R: Rng>(n: usize, m: usize, r: &mut R) -> Vec<SymMatrix> {
    (0..m).map(|_| sym(gaussian_sym(n, r))).collect()
}

pub fn gaussian_vec<R: Rng>(k: usize, r: &mut R) -> Vec<f64> {
    (0..k).map(|_| r.sample(StandardNormal)).collect()
}

pub fn unit_vec<R: Rng>(k: usize, r: &mut R) -> Vec<f64> {
    let v = gaussian_vec(k, r);
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / s).collect()
}

pub fn eigvals(m: &DMatrix<f64>) -> Vec<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect()
}

pub fn op(m: &DMatrix<f64>) -> f64 {
    eigvals(m).iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn hs(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// `Σ (G⁻¹)_{ij} Q_i Q_j` with `G_{ij} = tr(Q_i Q_j)`; equals `Σ A_k²` for
/// any orthonormal basis `A` of the span of independent `Q_i`.
pub fn sum_of_squares_from_gram(qs: &[SymMatrix]) -> DMatrix<f64> {
    let m = qs.len();
    let g = DMatrix::from_fn(m, m, |i, j| {
        qs[i].as_matrix().component_mul(qs[j].as_matrix()).sum()
    });
    let gi = g.try_inverse().expect("independent forms");
    let n = qs[0].dim();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..m {
        for j in 0..m {
            b += qs[i].as_matrix() * qs[j].as_matrix() * gi[(i, j)];
        }
    }
    (&b + b.transpose()) * 0.5
}

pub fn recombine(qs: &[SymMatrix], mix: &DMatrix<f64>) -> Vec<SymMatrix> {
    (0..mix.nrows())
        .map(|i| {
            let mut acc = DMatrix::zeros(qs[0].dim(), qs[0].dim());
            for (j, q) in qs.iter().enumerate() {
                acc += q.as_matrix() * mix[(i, j)];
            }
            sym(acc)
        })
        .collect()
}

/// `Γ(k/2)` by the half-integer recurrence.
pub fn gamma_half(k: usize) -> f64 {
    let (mut x, mut g) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Composite Simpson rule with `2k` intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `1 − iτλ` product to the power `−1/2`, straight from complex arithmetic.
pub fn naive_det_power(lambdas: &[f64], tau: f64) -> num_complex::Complex64 {
    use num_complex::Complex64;
    let mut z = Complex64::new(1.0, 0.0);
    for &l in lambdas {
        // principal square root is continuous here: Re(1 − iτλ) = 1 > 0
        z *= Complex64::new(1.0, -tau * l).sqrt();
    }
    1.0 / z
}
