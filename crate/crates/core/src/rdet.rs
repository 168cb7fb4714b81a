//! Fredholm and regularized determinants.
//!
//! `Det_p(U) = Det(U exp(Σ_{ℓ=1}^{p−1} (−1)^ℓ/ℓ (U − Id)^ℓ))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcore::{self, expm, identity, matrix_power, trace, trace_product, ComplexMatrix, MatError};
use crate::upath::{PathError, UnitaryPath};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RdetError {
    #[error("determinant order must be a positive integer")]
    InvalidOrder,
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetValue {
    pub value: Complex64,
    /// Principal branch, imaginary part in `(−π, π]`.
    pub log_value: Complex64,
    /// Smallest `|1 + λ_i|` over the eigenvalues of the perturbation.
    pub conditioning: f64,
}

impl DetValue {
    fn from_value(value: Complex64, conditioning: f64) -> Self {
        DetValue { value, log_value: principal_log(value), conditioning }
    }
}

/// Logarithm with argument in `(−π, π]`; the negative real axis maps to `+iπ`.
pub fn principal_log(z: Complex64) -> Complex64 {
    let mut arg = z.arg();
    if arg <= -PI + 1e-15 {
        arg = PI;
    }
    Complex64::new(z.norm().ln(), arg)
}

fn eigenvalues(a: &ComplexMatrix) -> Option<Vec<Complex64>> {
    if a.is_empty() {
        return Some(Vec::new());
    }
    let t = a.clone().try_schur(f64::EPSILON, 200 * a.nrows().max(10))?.unpack().1;
    Some((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// `Det(Id + A) = Π (1 + λ_i(A))`.
///
/// If the Schur iteration stalls the value comes from an LU factorization
/// and `conditioning` from the smallest singular value of `Id + A`, which
/// bounds the smallest `|1 + λ_i|` from below.
pub fn fredholm_det(a: &ComplexMatrix) -> DetValue {
    let Some(eigs) = eigenvalues(a) else {
        let m = a + identity(a.nrows());
        let cond = matcore::singular_values(&m).into_iter().fold(f64::INFINITY, f64::min);
        return DetValue::from_value(m.determinant(), cond);
    };
    let mut value = Complex64::new(1.0, 0.0);
    let mut cond = f64::INFINITY;
    for l in eigs {
        let f = Complex64::new(1.0, 0.0) + l;
        cond = cond.min(f.norm());
        value *= f;
    }
    DetValue::from_value(value, cond)
}

/// `Σ_{ℓ=1}^{p−1} (−1)^ℓ/ℓ (U − Id)^ℓ`.
fn counterterm(u: &ComplexMatrix, p: u32) -> ComplexMatrix {
    let n = u.nrows();
    let w = u - identity(n);
    let mut power = identity(n);
    let mut sum = ComplexMatrix::zeros(n, n);
    for l in 1..p {
        power = &power * &w;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        sum += &power * Complex64::new(sign / l as f64, 0.0);
    }
    sum
}

/// Regularized determinant from its definition, with a general matrix exponential.
pub fn det_p(u: &ComplexMatrix, p: u32) -> Result<DetValue, RdetError> {
    if p == 0 {
        return Err(RdetError::InvalidOrder);
    }
    matcore::check_unitary(u, matcore::UNITARY_TOL)?;
    let n = u.nrows();
    let m = u * expm(&counterterm(u, p));
    Ok(fredholm_det(&(m - identity(n))))
}

/// `Tr((U − Id)^ℓ)` for `ℓ = 1..=max`.
fn power_traces(u: &ComplexMatrix, max: u32) -> Vec<Complex64> {
    let n = u.nrows();
    let w = u - identity(n);
    let mut power = identity(n);
    (1..=max)
        .map(|_| {
            power = &power * &w;
            trace(&power)
        })
        .collect()
}

/// `Det(U) · exp(Σ_{ℓ=1}^{p−1} (−1)^ℓ/ℓ Tr((U − Id)^ℓ))`.
pub fn det_p_reduced(u: &ComplexMatrix, p: u32) -> Result<DetValue, RdetError> {
    if p == 0 {
        return Err(RdetError::InvalidOrder);
    }
    let n = u.nrows();
    let base = fredholm_det(&(u - identity(n)));
    let traces = power_traces(u, p.saturating_sub(1));
    let mut exponent = Complex64::new(0.0, 0.0);
    for (i, tr) in traces.iter().enumerate() {
        let l = i + 1;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        exponent += tr * (sign / l as f64);
    }
    Ok(DetValue::from_value(base.value * exponent.exp(), base.conditioning))
}

/// One step of the recursion in `p`: `Det_p = Det_{p−1} · exp((−1)^{p−1}/(p−1) Tr((U−Id)^{p−1}))`.
pub fn det_p_recursion_factor(u: &ComplexMatrix, p: u32) -> Result<Complex64, RdetError> {
    if p < 2 {
        return Err(RdetError::InvalidOrder);
    }
    let l = p - 1;
    let tr = *power_traces(u, l).last().expect("l ≥ 1");
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    Ok((tr * (sign / l as f64)).exp())
}

/// `(−1)^{p−1} Tr(U*U̇ (U − Id)^{p−1})`, the log-derivative of `Det_p` along the path.
pub fn logderiv_det_p(path: &UnitaryPath, t: f64, p: u32) -> Result<Complex64, RdetError> {
    if p == 0 {
        return Err(RdetError::InvalidOrder);
    }
    let u = path.sample_checked(t)?;
    let du = path.derivative(t, None)?;
    Ok(logderiv_from(&u, &du, p))
}

pub(crate) fn logderiv_from(u: &ComplexMatrix, du: &ComplexMatrix, p: u32) -> Complex64 {
    let n = u.nrows();
    let a = u.adjoint() * du;
    let w = matrix_power(&(u - identity(n)), p - 1);
    let sign = if (p - 1) % 2 == 0 { 1.0 } else { -1.0 };
    trace_product(&a, &w) * sign
}

/// Both sides of `d log Det_p = d log Det + d/dt Σ_{ℓ=1}^{p−1} (−1)^ℓ/ℓ Tr((U − Id)^ℓ)`.
///
/// The right side uses `d/dt Tr((U−Id)^ℓ) = ℓ Tr((U−Id)^{ℓ−1} U̇)`.
pub fn logdet_p_vs_logdet(path: &UnitaryPath, t: f64, p: u32) -> Result<(Complex64, Complex64), RdetError> {
    let lhs = logderiv_det_p(path, t, p)?;
    let u = path.sample_checked(t)?;
    let du = path.derivative(t, None)?;
    let n = u.nrows();
    let mut rhs = trace_product(&u.adjoint(), &du);
    let w = &u - identity(n);
    let mut power = identity(n);
    for l in 1..p {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        rhs += trace_product(&power, &du) * sign;
        power = &power * &w;
    }
    Ok((lhs, rhs))
}

/// Continuous continuation of principal logs: successive values are shifted
/// by multiples of `2πi` to remove jumps.
#[derive(Debug, Clone, Default)]
pub struct LogUnwinder {
    last: Option<Complex64>,
}

impl LogUnwinder {
    pub fn new() -> Self {
        LogUnwinder { last: None }
    }

    pub fn push(&mut self, log_value: Complex64) -> Complex64 {
        let out = match self.last {
            None => log_value,
            Some(prev) => {
                let k = ((prev.im - log_value.im) / (2.0 * PI)).round();
                log_value + Complex64::new(0.0, 2.0 * PI * k)
            }
        };
        self.last = Some(out);
        out
    }
}

pub fn unwrap_logs(values: &[Complex64]) -> Vec<Complex64> {
    let mut u = LogUnwinder::new();
    values.iter().map(|&v| u.push(v)).collect()
}
