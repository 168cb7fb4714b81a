//! Seeded random operators for tests, the self-test and benchmarks.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::matcore::{expm_skew, ComplexMatrix};

/// Box–Muller draw.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of `R` divided out.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let qr = ginibre(rng, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Skew-Hermitian matrix with operator norm roughly `scale`.
pub fn random_skew_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> ComplexMatrix {
    let g = ginibre(rng, n);
    let y = (&g - g.adjoint()) * Complex64::new(0.5, 0.0);
    let norm = crate::matcore::op_norm(&y).max(1e-300);
    y * Complex64::new(scale / norm, 0.0)
}

/// Unitary `e^{Y}` with `‖Y‖_op = scale`.
pub fn random_unitary_near_identity<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> ComplexMatrix {
    expm_skew(&random_skew_hermitian(rng, n, scale))
}

/// Hermitian positive definite matrix with spectrum drawn log-uniformly from `[lo, hi]`.
pub fn random_positive<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> ComplexMatrix {
    let w = random_unitary(rng, n);
    let spec: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new((rng.gen_range(lo.ln()..hi.ln())).exp(), 0.0))
        .collect();
    let d = ComplexMatrix::from_diagonal(&DVector::from_vec(spec));
    &w * d * w.adjoint()
}
