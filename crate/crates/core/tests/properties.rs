//! Randomized invariants across modules.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use specflow::cayley::{cayley, graph_projection, inv_cayley};
use specflow::matcore::{
    eig_unitary, expm_skew, identity, op_norm, principal_angle, schatten_norm, unitarity_defect, ComplexMatrix,
};
use specflow::quad::QuadSpec;
use specflow::rdet::{det_p, det_p_reduced};
use specflow::sampling::{random_skew_hermitian, random_unitary};
use specflow::scatter::{
    phase_shifts_3d, phase_shifts_numerov, smatrix_1d, Potential1D, RadialPotential,
};
use specflow::sflow::{sf_alpha, sf_beta, sf_det, sf_phillips, PhillipsSpec};
use specflow::upath::{Interval, UnitaryPath};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `t ↦ e^{sin(πt) Y} · model_loop(k, n)(t)`: closed, with flow `k`.
fn dressed_loop(seed: u64, k: usize, n: usize, scale: f64) -> UnitaryPath {
    let y = random_skew_hermitian(&mut rng(seed), n, scale);
    let base = UnitaryPath::model_loop(k, n).unwrap();
    UnitaryPath::new(Interval::Unit, n, move |t| expm_skew(&(&y * Complex64::new((PI * t).sin(), 0.0))) * base.sample(t))
        .with_closed(true)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..8) {
        let u = random_unitary(&mut rng(seed), n);
        let e = eig_unitary(&u).unwrap();
        prop_assert!(op_norm(&(e.reconstruct() - &u)) < 1e-10);
        prop_assert!(e.angles.iter().all(|&a| a > -PI && a <= PI));
    }

    #[test]
    fn principal_angle_is_canonical(theta in -50.0f64..50.0) {
        let a = principal_angle(theta);
        prop_assert!(a > -PI && a <= PI);
        let k = (theta - a) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn schatten_norms_decrease_in_p(seed in any::<u64>(), n in 1usize..7) {
        let u = random_unitary(&mut rng(seed), n);
        let a = &u - identity(n);
        let norms: Vec<f64> = [1.0, 1.5, 2.0, 4.0].iter().map(|&p| schatten_norm(&a, p).unwrap()).collect();
        prop_assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        prop_assert!((norms[3] - op_norm(&a)).abs() <= op_norm(&a) * (n as f64).powf(0.25));
    }

    #[test]
    fn reduced_determinant_matches_definition(seed in any::<u64>(), n in 1usize..7, p in 1u32..5) {
        let u = random_unitary(&mut rng(seed), n);
        let a = det_p(&u, p).unwrap().value;
        let b = det_p_reduced(&u, p).unwrap().value;
        prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn cayley_round_trip_and_graph_projection(seed in any::<u64>(), n in 1usize..7) {
        let u = random_unitary(&mut rng(seed), n);
        let t = cayley(&u).unwrap();
        prop_assert!(op_norm(&(inv_cayley(&t) - &u)) < 1e-10);
        prop_assert!(t.invariant_defects().iter().all(|&d| d < 1e-10));
        let q = graph_projection(&t);
        prop_assert!(op_norm(&(&q * &q - &q)) < 1e-10);
        prop_assert!(op_norm(&(&q - q.adjoint())) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn methods_agree_on_dressed_loops(seed in any::<u64>(), k in 1usize..3, extra in 0usize..2) {
        let n = k + extra;
        let path = dressed_loop(seed, k, n, 0.8);
        let quad = QuadSpec::with_abs_tol(1e-8);
        let ph = sf_phillips(&path, &PhillipsSpec::default()).unwrap();
        prop_assert_eq!(ph.value, k as i64);
        prop_assert_eq!(sf_alpha(&path, 1, &quad).unwrap().value, k as i64);
        prop_assert_eq!(sf_beta(&path, 1.0, &quad).unwrap().value, k as i64);
        prop_assert_eq!(sf_det(&path, 2, &quad).unwrap().value, k as i64);
    }

    #[test]
    fn conjugation_preserves_flow(seed in any::<u64>(), k in 1usize..3) {
        let path = dressed_loop(seed, k, k + 1, 1.0);
        let w = random_unitary(&mut rng(seed ^ 0x5eed), k + 1);
        let spec = PhillipsSpec::default();
        prop_assert_eq!(sf_phillips(&path.conjugate(&w), &spec).unwrap().value, sf_phillips(&path, &spec).unwrap().value);
    }

    #[test]
    fn concatenation_adds_and_reversal_negates(seed in any::<u64>()) {
        let a = dressed_loop(seed, 1, 2, 0.7);
        let b = dressed_loop(seed.wrapping_add(1), 2, 2, 0.7);
        let spec = PhillipsSpec::default();
        let ab = UnitaryPath::concatenate(&a, &b).unwrap();
        prop_assert_eq!(sf_phillips(&ab, &spec).unwrap().value, 3);
        prop_assert_eq!(sf_phillips(&a.reverse().unwrap(), &spec).unwrap().value, -1);
    }
}

fn well(depth: f64, halfwidth: f64) -> Potential1D {
    Potential1D::square_well(depth, halfwidth).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn line_smatrix_is_unitary_and_symmetric(depth in -10.0f64..30.0, halfwidth in 0.2f64..2.0, lambda in 1e-3f64..1e3) {
        prop_assume!(depth.abs() > 1e-3);
        let s = smatrix_1d(&well(depth, halfwidth), lambda).unwrap();
        prop_assert!(unitarity_defect(&s) < 1e-9);
        // even potential: both reflection amplitudes coincide
        prop_assert!((s[(0, 1)] - s[(1, 0)]).norm() < 1e-8);
    }

    #[test]
    fn ball_phases_match_numerov(depth in -5.0f64..5.0, radius in 0.3f64..2.0, lambda in 1e-2f64..1e2) {
        prop_assume!(depth.abs() > 1e-3);
        let v = RadialPotential::ball(depth, radius).unwrap();
        let closed = phase_shifts_3d(&v, lambda, 4).unwrap();
        let numerov = phase_shifts_numerov(&v, lambda, 4).unwrap();
        for (a, b) in closed.iter().zip(&numerov) {
            // phase shifts are defined modulo π
            let d = (a - b) / PI;
            prop_assert!((d - d.round()).abs() < 1e-5, "closed {a} numerov {b}");
        }
    }

    #[test]
    fn trace_of_log_derivative_is_phase_derivative(depth in 0.5f64..20.0, lambda in 0.1f64..50.0) {
        // Tr(S*S') = d/dλ log Det S
        let v = well(depth, 1.0);
        let h = 1e-4 * lambda;
        let s = smatrix_1d(&v, lambda).unwrap();
        let ds: ComplexMatrix = (smatrix_1d(&v, lambda + h).unwrap() - smatrix_1d(&v, lambda - h).unwrap())
            / Complex64::new(2.0 * h, 0.0);
        let lhs = (s.adjoint() * ds).trace();
        let det = |x: f64| smatrix_1d(&v, x).unwrap().determinant();
        let rhs = (det(lambda + h) / det(lambda - h)).ln() / (2.0 * h);
        prop_assert!((lhs - rhs).norm() < 1e-5 * (1.0 + rhs.norm()));
    }
}

#[test]
fn smatrix_approaches_identity_at_high_energy() {
    let v = well(5.0, 1.0);
    let norms: Vec<f64> = [1e2, 1e3, 1e4, 1e5]
        .iter()
        .map(|&e| op_norm(&(smatrix_1d(&v, e).unwrap() - identity(2))))
        .collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]));
    assert!(norms[3] < 0.02);
}
