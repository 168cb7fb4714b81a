//! Nyström discretization of `K_± = q₁ R₀(λ ± i0) q₂` on the line and its regularized determinants.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::potential::Potential1D;
use super::ScatterError;
use crate::quad::gauss_legendre;
use crate::rdet::{principal_log, DetValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryValue {
    /// `λ + i0`
    Plus,
    /// `λ − i0`
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NystromSpec {
    pub nodes_per_panel: usize,
    pub initial_panels: usize,
    pub max_panels: usize,
    /// Relative change between successive refinements accepted as converged.
    pub tol: f64,
}

impl Default for NystromSpec {
    fn default() -> Self {
        NystromSpec { nodes_per_panel: 8, initial_panels: 2, max_panels: 512, tol: 1e-6 }
    }
}

/// Symmetrized Nyström matrix `√w_i q₁(x_i) G(x_i, x_j) q₂(x_j) √w_j`.
fn nystrom_matrix(v: &Potential1D, k: f64, side: BoundaryValue, panels: usize, q: usize) -> DMatrix<Complex64> {
    let (gx, gw) = gauss_legendre(q);
    let mut x = Vec::new();
    let mut w = Vec::new();
    for pair in v.knots().windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * h;
            for (xi, wi) in gx.iter().zip(&gw) {
                x.push(c + 0.5 * h * xi);
                w.push(0.5 * h * wi);
            }
        }
    }
    let vals: Vec<f64> = x.iter().map(|&t| v.value(t)).collect();
    let left: Vec<f64> = vals.iter().zip(&w).map(|(vv, ww)| (vv.abs() * ww).sqrt()).collect();
    let right: Vec<f64> = vals.iter().zip(&w).map(|(vv, ww)| vv.signum() * (vv.abs() * ww).sqrt()).collect();
    // outgoing kernel i e^{ik|x−y|}/(2k) and its conjugate
    let (s, pref) = match side {
        BoundaryValue::Plus => (1.0, Complex64::new(0.0, 0.5 / k)),
        BoundaryValue::Minus => (-1.0, Complex64::new(0.0, -0.5 / k)),
    };
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        pref * Complex64::from_polar(1.0, s * k * (x[i] - x[j]).abs()) * (left[i] * right[j])
    })
}

/// `(Det_p(Id + A), [Tr A^ℓ for ℓ = 1..p−1])`.
fn det_with_traces(a: &DMatrix<Complex64>, p: u32) -> (Complex64, Vec<Complex64>) {
    let n = a.nrows();
    let base = (DMatrix::<Complex64>::identity(n, n) + a).lu().determinant();
    let mut traces = Vec::new();
    let mut power: Option<DMatrix<Complex64>> = None;
    for l in 1..p {
        let tr = match l {
            1 => a.trace(),
            // Tr(A·B) without forming the product
            _ => {
                let prev = power.take().unwrap_or_else(|| a.clone());
                let tr = prev.component_mul(&a.transpose()).sum();
                if l + 1 < p {
                    power = Some(&prev * a);
                }
                tr
            }
        };
        traces.push(tr);
    }
    let mut exponent = Complex64::new(0.0, 0.0);
    for (i, tr) in traces.iter().enumerate() {
        let l = i + 1;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        exponent += tr * (sign / l as f64);
    }
    (base * exponent.exp(), traces)
}

fn refined(
    v: &Potential1D,
    lambda: f64,
    side: BoundaryValue,
    p: u32,
    spec: &NystromSpec,
) -> Result<(Complex64, Vec<Complex64>), ScatterError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ScatterError::EnergyNonpositive(lambda));
    }
    if p == 0 {
        return Err(ScatterError::Determinant(crate::rdet::RdetError::InvalidOrder));
    }
    if v.is_zero() {
        return Ok((Complex64::new(1.0, 0.0), vec![Complex64::new(0.0, 0.0); p as usize - 1]));
    }
    let k = lambda.sqrt();
    // resolve the oscillation scale as well as the support
    let osc = (k * 2.0 * v.support() / 4.0).ceil() as usize;
    let mut panels = spec.initial_panels.max(osc).max(1);
    let level = |panels: usize| det_with_traces(&nystrom_matrix(v, k, side, panels, spec.nodes_per_panel), p);
    // the kink of e^{ik|x−y|} on the diagonal leaves an O(h²) error that is
    // removed by one Richardson step between doublings
    let richardson = |fine: &(Complex64, Vec<Complex64>), coarse: &(Complex64, Vec<Complex64>)| {
        let ex = |a: Complex64, b: Complex64| (a * 4.0 - b) / 3.0;
        (ex(fine.0, coarse.0), fine.1.iter().zip(&coarse.1).map(|(a, b)| ex(*a, *b)).collect::<Vec<_>>())
    };
    let mut coarse = level(panels);
    panels *= 2;
    let mut fine = level(panels);
    let mut prev = richardson(&fine, &coarse);
    loop {
        panels *= 2;
        if panels > spec.max_panels {
            let change = (fine.0 - coarse.0).norm() / fine.0.norm().max(1.0);
            return Err(ScatterError::QuadratureNotConverged { change });
        }
        coarse = fine;
        fine = level(panels);
        let next = richardson(&fine, &coarse);
        let change = (next.0 - prev.0).norm() / next.0.norm().max(1.0);
        if change < spec.tol {
            return Ok(next);
        }
        prev = next;
    }
}

/// `Det_p(Id + q₁ R₀(λ ± i0) q₂)` with `q₁ = |V|^{1/2}`, `q₂ = sign(V)|V|^{1/2}`.
pub fn birman_schwinger_det_1d(
    v: &Potential1D,
    lambda: f64,
    side: BoundaryValue,
    p: u32,
    spec: &NystromSpec,
) -> Result<DetValue, ScatterError> {
    let (value, _) = refined(v, lambda, side, p, spec)?;
    Ok(DetValue { value, log_value: principal_log(value), conditioning: value.norm() })
}

/// `D_p(λ − i0)/D_p(λ + i0) · exp(Σ_{ℓ=1}^{p−1} (−1)^ℓ/ℓ (Tr K₊^ℓ − Tr K₋^ℓ))`, which should equal `Det S(λ)`.
pub fn guillope_ratio(v: &Potential1D, lambda: f64, p: u32, spec: &NystromSpec) -> Result<Complex64, ScatterError> {
    let (dm, tm) = refined(v, lambda, BoundaryValue::Minus, p, spec)?;
    let (dp, tp) = refined(v, lambda, BoundaryValue::Plus, p, spec)?;
    let mut exponent = Complex64::new(0.0, 0.0);
    for (i, (a, b)) in tp.iter().zip(&tm).enumerate() {
        let l = i + 1;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        exponent += (a - b) * (sign / l as f64);
    }
    Ok(dm / dp * exponent.exp())
}
