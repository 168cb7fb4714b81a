//! High-energy polynomials `P_d` and the endpoint sums `H_d`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ScatterError;
use crate::matcore::{identity, ComplexMatrix};

/// `P_d(λ) = Σ c_j λ^{e_j}` with half-integer powers allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighEnergyPoly {
    pub dimension: u32,
    /// `(exponent, coefficient)` pairs.
    pub terms: Vec<(f64, Complex64)>,
}

impl HighEnergyPoly {
    pub fn eval(&self, lambda: f64) -> Complex64 {
        self.terms.iter().map(|(e, c)| c * pow(lambda, *e)).sum()
    }

    /// `p_d = P_d'`, for `λ > 0`.
    pub fn derivative(&self, lambda: f64) -> Complex64 {
        self.terms.iter().filter(|(e, _)| *e != 0.0).map(|(e, c)| c * (*e * lambda.powf(e - 1.0))).sum()
    }

    pub fn at_zero(&self) -> Complex64 {
        self.eval(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == Complex64::new(0.0, 0.0))
    }
}

fn pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

/// `P_d` from the moments `∫V` and `∫V²` over `ℝ^d`, for `d ≤ 4`.
pub fn high_energy_poly(d: u32, int_v: f64, int_v2: f64) -> Result<HighEnergyPoly, ScatterError> {
    let i = Complex64::new(0.0, 1.0);
    let terms = match d {
        1 => Vec::new(),
        2 => vec![(0.0, -i * 0.5 * int_v)],
        3 => vec![(0.5, -i * int_v / (2.0 * PI))],
        4 => vec![(1.0, -i * int_v / (8.0 * PI)), (0.0, i * int_v2 / (16.0 * PI))],
        _ => return Err(ScatterError::UnsupportedDimension(d)),
    };
    Ok(HighEnergyPoly { dimension: d, terms })
}

/// `H_d = Σ_{ℓ=1}^{d−1} (−1)^ℓ/ℓ Tr((S − Id)^ℓ)`.
pub fn h_correction(s: &ComplexMatrix, d: u32) -> Complex64 {
    let n = s.nrows();
    let w = s - identity(n);
    let mut power = identity(n);
    let mut sum = Complex64::new(0.0, 0.0);
    for l in 1..d {
        power = &power * &w;
        let tr: Complex64 = (0..n).map(|k| power[(k, k)]).sum();
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        sum += tr * (sign / l as f64);
    }
    sum
}

/// `H_d` from eigenvalues with multiplicities.
pub fn h_correction_spectrum(eigs: &[(Complex64, usize)], d: u32) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for &(z, m) in eigs {
        let w = z - 1.0;
        for l in 1..d {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            sum += w.powu(l) * (sign * m as f64 / l as f64);
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{c, diag};
    use approx::assert_relative_eq;

    #[test]
    fn line_polynomial_vanishes() {
        let p = high_energy_poly(1, 3.0, 2.0).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.eval(10.0), c(0.0, 0.0));
    }

    #[test]
    fn three_dimensional_polynomial() {
        // ∫V = −4π: P₃ = 2πi√λ·4π·4π / (2(2π)³)
        let p = high_energy_poly(3, -4.0 * PI, 0.0).unwrap();
        let lam: f64 = 2.5;
        let expect = c(0.0, 2.0 * PI * lam.sqrt() * 16.0 * PI * PI / (2.0 * 8.0 * PI.powi(3)));
        assert!((p.eval(lam) - expect).norm() < 1e-14);
        assert_eq!(p.at_zero(), c(0.0, 0.0));
        let h = 1e-6;
        let fd = (p.eval(lam + h) - p.eval(lam - h)) / (2.0 * h);
        assert!((p.derivative(lam) - fd).norm() < 1e-8);
    }

    #[test]
    fn two_and_four() {
        assert!(high_energy_poly(2, 0.0, 5.0).unwrap().eval(3.0).norm() == 0.0);
        let p4 = high_energy_poly(4, 1.0, 1.0).unwrap();
        assert_relative_eq!(p4.at_zero().im, 1.0 / (16.0 * PI));
        assert!(matches!(high_energy_poly(5, 1.0, 1.0), Err(ScatterError::UnsupportedDimension(5))));
    }

    #[test]
    fn h_at_resonant_threshold() {
        let s0 = diag(&[c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert!((h_correction(&s0, 3) - c(4.0, 0.0)).norm() < 1e-14);
        assert_eq!(h_correction(&identity(3), 3), c(0.0, 0.0));
        let spec = [(c(-1.0, 0.0), 1), (c(1.0, 0.0), 2)];
        assert!((h_correction_spectrum(&spec, 3) - c(4.0, 0.0)).norm() < 1e-14);
    }
}
