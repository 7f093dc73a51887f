mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use quadcert::certifier::{certify_homogeneous, certify_inhomogeneous, Decision};
use quadcert::ensembles::{self, EnsembleKind, EnsembleSpec};
use quadcert::oracle::{self, OracleOptions};
use quadcert::reductions::{homogenize, QuadraticPolynomial};
use quadcert::relaxation::{
    factor_and_transform, interiorize, reduce_homogeneous, solve_feasibility, RelaxOptions,
};
use quadcert::SymMatrix;
use rand::Rng;

use common::*;

fn invertible_mix<R: Rng>(m: usize, r: &mut R) -> DMatrix<f64> {
    loop {
        let mm = DMatrix::<f64>::from_fn(m, m, |_, _| r.random_range(-1.0..1.0));
        if mm.determinant().abs() > 0.05 {
            return mm;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn recombination_keeps_norm_and_decision(seed in any::<u64>(), blocks in 3usize..5, size in 3usize..8) {
        let mut r = rng(seed);
        let qs = ensembles::sample(&EnsembleSpec::new(EnsembleKind::Blocked, blocks * size, blocks, seed))
            .unwrap()
            .matrices;
        let mixed = recombine(&qs, &invertible_mix(blocks, &mut r));
        for eta in [1e-6, 0.1, 1.0, 10.0] {
            let a = certify_inhomogeneous(&qs, eta).unwrap();
            let b = certify_inhomogeneous(&mixed, eta).unwrap();
            prop_assert!((a.norm_value - b.norm_value).abs() <= 1e-7);
            prop_assert!(a.guard_band || b.guard_band || a.decision == b.decision);
        }
    }

    #[test]
    fn certificate_is_monotone_in_eta(seed in any::<u64>(), n in 4usize..16, m in 3usize..6) {
        let qs = random_forms(n, m, &mut rng(seed));
        let nu = certify_inhomogeneous(&qs, 1.0).unwrap().norm_value;
        let mut certified = false;
        for s in [0.01, 0.5, 0.99, 1.01, 2.0, 100.0] {
            let rep = certify_inhomogeneous(&qs, s * m as f64 * nu).unwrap();
            let now = rep.decision == Decision::CertifiedSolvable;
            prop_assert!(!(certified && !now));
            certified |= now;
        }
        prop_assert!(certified);
    }

    #[test]
    fn certified_instances_are_solvable(seed in 0u64..10_000, blocks in 3usize..5, size in 4usize..10) {
        let inst = ensembles::sample(&EnsembleSpec::new(EnsembleKind::Blocked, blocks * size, blocks, seed))
            .unwrap();
        let rep = certify_inhomogeneous(&inst.matrices, 10.0).unwrap();
        if rep.decision == Decision::CertifiedSolvable {
            let sol = oracle::solve(&inst.matrices, &inst.alpha, &OracleOptions { seed, ..Default::default() });
            prop_assert!(sol.residual < 1e-6, "residual {}", sol.residual);
        }
    }

    #[test]
    fn strictly_feasible_relaxation_converges(seed in any::<u64>(), n in 3usize..12, m in 1usize..6) {
        let mut r = rng(seed);
        let qs = random_forms(n, m, &mut r);
        // interior point X₀ = I + small symmetric perturbation
        let x0 = DMatrix::identity(n, n) + gaussian_sym(n, &mut r) * (0.2 / n as f64);
        let alpha: Vec<f64> = qs.iter().map(|q| q.as_matrix().component_mul(&x0).sum()).collect();
        let res = solve_feasibility(&qs, &alpha, &RelaxOptions::default()).unwrap();
        prop_assert!(res.is_feasible());
        let scale = alpha.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        prop_assert!(res.residual <= 1e-6 * scale);
        prop_assert!(eigvals(res.x.as_ref().unwrap().as_matrix()).iter().all(|&l| l >= -1e-9));
    }

    #[test]
    fn transformed_solutions_lift(seed in 0u64..10_000, n in 3usize..10, m in 1usize..5) {
        let inst = ensembles::sample(&EnsembleSpec::new(EnsembleKind::PlantedSolvable, n, m, seed)).unwrap();
        let relaxed = solve_feasibility(&inst.matrices, &inst.alpha, &RelaxOptions::default()).unwrap();
        prop_assert!(relaxed.is_feasible());
        let inner = interiorize(&relaxed, &inst.matrices, &inst.alpha, 50).unwrap();
        let sys = factor_and_transform(&inner, &inst.matrices).unwrap();
        let scale = inst.alpha.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        // a full-rank X keeps the planted solution; a proper face need not
        if sys.equivalent {
            let x0 = nalgebra::DVector::from_vec(inst.planted.clone().unwrap());
            let xhat = sys.t.clone().try_inverse().unwrap() * x0;
            for (q, a) in sys.qhat.iter().zip(&sys.alpha) {
                prop_assert!((q.quad_form(xhat.as_slice()) - a).abs() <= 1e-6 * scale);
            }
        }
        let sol = oracle::solve(&sys.qhat, &sys.alpha, &OracleOptions { seed, starts: 500, ..Default::default() });
        if sys.equivalent {
            prop_assert!(sol.solved);
        }
        prop_assume!(sol.solved);
        let y = sys.lift(&sol.best_x);
        // an approximate witness carries its own per-equation error of √residual
        let tol = 1e-6 * scale + sol.residual.sqrt();
        for (q, a) in inst.matrices.iter().zip(&inst.alpha) {
            prop_assert!((q.quad_form(&y) - a).abs() <= tol, "{} vs {a}, tol {tol}", q.quad_form(&y));
        }
    }

    #[test]
    fn oracle_minimum_is_stationary_and_seeded(seed in any::<u64>(), n in 2usize..6, m in 2usize..6) {
        let mut r = rng(seed);
        let qs = random_forms(n, m, &mut r);
        let alpha = gaussian_vec(m, &mut r);
        let opts = OracleOptions { starts: 10, seed, ..Default::default() };
        let a = oracle::solve(&qs, &alpha, &opts);
        let b = oracle::solve(&qs, &alpha, &opts);
        prop_assert_eq!(&a.best_x, &b.best_x);
        prop_assert_eq!(a.residual.to_bits(), b.residual.to_bits());
        if a.converged && !a.solved {
            prop_assert!(a.gradient_norm <= 1e-8 * (1.0 + a.residual));
        }
        // residual is even in x
        let neg: Vec<f64> = a.best_x.iter().map(|v| -v).collect();
        prop_assert_eq!(oracle::residual(&qs, &alpha, &neg), oracle::residual(&qs, &alpha, &a.best_x));
    }

    #[test]
    fn homogenized_values(seed in any::<u64>(), n in 1usize..6, t in -4.0f64..4.0) {
        let mut r = rng(seed);
        let p = QuadraticPolynomial::new(sym(gaussian_sym(n, &mut r)), gaussian_vec(n, &mut r), gaussian_vec(1, &mut r)[0]).unwrap();
        let h = homogenize(std::slice::from_ref(&p)).unwrap();
        let x = gaussian_vec(n, &mut r);
        let mut lifted: Vec<f64> = x.iter().map(|v| v * t).collect();
        lifted.push(t);
        let v = p.eval(&x);
        prop_assert!((h.lifted[0].quad_form(&lifted) - t * t * v).abs() <= 1e-12 * (1.0 + t * t) * (1.0 + v.abs()));
    }
}

#[test]
fn homogeneous_reduction_recurses_on_proper_faces() {
    // tr(Q_1 X) = 0 with Q_1 = diag(1, 1, 0, 0) ⪰ 0 pushes X onto span(e_3, e_4)
    let q1 = SymMatrix::diagonal(&[1.0, 1.0, 0.0, 0.0]).unwrap();
    let q2 = SymMatrix::from_row_major(
        4,
        &[
            0.0, 0.0, 1.0, 0.0, //
            0.0, 3.0, 0.0, 0.0, //
            1.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, -1.0,
        ],
    )
    .unwrap();
    let qs = vec![q1, q2];
    let red = reduce_homogeneous(&qs, &RelaxOptions::default(), 100).unwrap();
    assert!(!red.infeasible);
    assert!(red.levels.len() >= 2, "levels: {}", red.levels.len());
    assert!(!red.levels[0].equivalent);
    assert_eq!(red.levels[0].reduced_dim, 2);
    let last = red.final_system().unwrap();
    assert!(last.equivalent || last.reduced_dim <= 1);
    let sol = oracle::solve_homogeneous(&last.qhat, &OracleOptions::default());
    assert!(sol.solved);
    let y = red.lift(&sol.best_x);
    assert!(y.iter().map(|v| v * v).sum::<f64>() > 1e-6);
    for q in &qs {
        assert!(q.quad_form(&y).abs() <= 1e-6, "{}", q.quad_form(&y));
    }
}

#[test]
fn homogeneous_certificate_on_traceless_blocks() {
    let inst = ensembles::sample(&EnsembleSpec::new(EnsembleKind::Blocked, 60, 3, 4)).unwrap();
    let traceless: Vec<SymMatrix> = inst
        .matrices
        .iter()
        .map(|q| q.axpy(-q.trace() / 60.0, &SymMatrix::identity(60)))
        .collect();
    let rep = certify_homogeneous(&traceless, 10.0).unwrap();
    assert_eq!(rep.decision, Decision::CertifiedSolvable);
    let sol = oracle::solve_homogeneous(&traceless, &OracleOptions::default());
    assert!(sol.solved && sol.residual < 1e-6);
}
