//! Transfer matrices, bound states and threshold behaviour on the line.

use nalgebra::Matrix2;
use num_complex::Complex64;

use super::potential::Potential1D;
use super::ScatterError;
use crate::matcore::{self, c, ComplexMatrix};
use crate::upath::{Interval, UnitaryPath};

type Real2 = [[f64; 2]; 2];

fn mul(a: &Real2, b: &Real2) -> Real2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

const ID2: Real2 = [[1.0, 0.0], [0.0, 1.0]];

/// Exact propagator of `ψ'' = q ψ` across a length `len` for constant `q`.
fn constant_step(q: f64, len: f64) -> Real2 {
    if q > 0.0 {
        let kappa = q.sqrt();
        let (s, ch) = ((kappa * len).sinh(), (kappa * len).cosh());
        [[ch, s / kappa], [kappa * s, ch]]
    } else if q < 0.0 {
        let k = (-q).sqrt();
        let (s, co) = (k * len).sin_cos();
        [[co, s / k], [-k * s, co]]
    } else {
        [[1.0, len], [0.0, 1.0]]
    }
}

/// One RK4 step of `Y' = [[0, 1], [V − λ, 0]] Y`.
fn rk4_step(v: &Potential1D, lambda: f64, x: f64, h: f64, y: &Real2) -> Real2 {
    let f = |x: f64, y: &Real2| -> Real2 {
        let q = v.value(x) - lambda;
        [[y[1][0], y[1][1]], [q * y[0][0], q * y[0][1]]]
    };
    let add = |a: &Real2, b: &Real2, s: f64| -> Real2 {
        [[a[0][0] + s * b[0][0], a[0][1] + s * b[0][1]], [a[1][0] + s * b[1][0], a[1][1] + s * b[1][1]]]
    };
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, &add(y, &k1, 0.5 * h));
    let k3 = f(x + 0.5 * h, &add(y, &k2, 0.5 * h));
    let k4 = f(x + h, &add(y, &k3, h));
    let mut out = *y;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] += h / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
        }
    }
    out
}

/// Step size for smooth profiles.
fn ode_step(lambda: f64) -> f64 {
    if lambda > 0.0 {
        (1.0 / (50.0 * lambda.sqrt())).min(1e-3)
    } else {
        1e-3
    }
}

/// Propagates `(ψ, ψ')` from `−a` to `a`. `observe` sees the fundamental
/// matrix after every step; `fine` forces steps small enough to resolve
/// every node of an oscillating solution.
fn propagate<F: FnMut(&Real2)>(v: &Potential1D, lambda: f64, fine: bool, mut observe: F) -> Real2 {
    let a = v.support();
    let mut knots = v.knots();
    knots.insert(0, -a);
    knots.push(a);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut m = ID2;
    for w in knots.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let len = x1 - x0;
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (x0 + x1);
        match v.segments() {
            Some(_) => {
                let q = v.value(mid) - lambda;
                let steps = if fine { ((len * q.abs().sqrt() / 0.1).ceil() as usize).max(1) } else { 1 };
                let p = constant_step(q, len / steps as f64);
                for _ in 0..steps {
                    m = mul(&p, &m);
                    observe(&m);
                }
            }
            None => {
                let steps = ((len / ode_step(lambda)).ceil() as usize).max(1);
                let h = len / steps as f64;
                for i in 0..steps {
                    m = rk4_step(v, lambda, x0 + i as f64 * h, h, &m);
                    observe(&m);
                }
            }
        }
    }
    m
}

/// Plane-wave matrix `(A, B) ↦ (ψ, ψ')(x)` for `ψ = A e^{ikx} + B e^{−ikx}`.
fn plane(k: f64, x: f64) -> Matrix2<Complex64> {
    let e = Complex64::from_polar(1.0, k * x);
    let ik = c(0.0, k);
    Matrix2::new(e, e.conj(), ik * e, -ik * e.conj())
}

/// `S(λ) = [[t, r₊], [r₋, t]]`; `r₋` is reflection back to the left of a wave
/// incident from the left and `r₊` its mirror image.
pub fn smatrix_1d(v: &Potential1D, lambda: f64) -> Result<ComplexMatrix, ScatterError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ScatterError::EnergyNonpositive(lambda));
    }
    let a = v.support();
    let m = propagate(v, lambda, false, |_| {});
    let k = lambda.sqrt();
    let mc = Matrix2::new(c(m[0][0], 0.0), c(m[0][1], 0.0), c(m[1][0], 0.0), c(m[1][1], 0.0));
    let right = plane(k, a).try_inverse().ok_or_else(|| ScatterError::IntegrationFailure("singular plane-wave basis".into()))?;
    let t = right * mc * plane(k, -a);
    let inv = Complex64::new(1.0, 0.0) / t[(1, 1)];
    let trans = inv;
    let r_left = -t[(1, 0)] * inv;
    let r_right = t[(0, 1)] * inv;
    let s = ComplexMatrix::from_row_slice(2, 2, &[trans, r_right, r_left, trans]);
    let defect = matcore::unitarity_defect(&s);
    if !defect.is_finite() || defect > 1e-9 {
        return Err(ScatterError::IntegrationFailure(format!("S({lambda}) has unitarity defect {defect:.2e}")));
    }
    Ok(s)
}

/// Zero-energy solution starting as the constant `1` left of the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroEnergySolution {
    pub psi: f64,
    pub dpsi: f64,
    /// Sign changes inside the support plus one if the linear exterior continuation crosses zero.
    pub nodes: usize,
    pub support: f64,
}

pub fn zero_energy_1d(v: &Potential1D) -> ZeroEnergySolution {
    let mut prev = 1.0f64;
    let mut nodes = 0;
    let m = propagate(v, 0.0, true, |m| {
        let psi = m[0][0];
        if psi != 0.0 && prev != 0.0 && psi.signum() != prev.signum() {
            nodes += 1;
        }
        if psi != 0.0 {
            prev = psi;
        }
    });
    let (psi, dpsi) = (m[0][0], m[1][0]);
    if psi * dpsi < 0.0 {
        nodes += 1;
    }
    ZeroEnergySolution { psi, dpsi, nodes, support: v.support() }
}

/// Normalized Wronskian of the two zero-energy Jost solutions, `|ψ'(a)| a / ‖(ψ(a), aψ'(a))‖`.
pub fn resonance_statistic_1d(v: &Potential1D) -> Result<f64, ScatterError> {
    let z = zero_energy_1d(v);
    let a = z.support.max(1.0);
    let norm = z.psi.hypot(a * z.dpsi);
    if !norm.is_finite() || norm == 0.0 {
        return Err(ScatterError::IntegrationFailure("zero-energy solution degenerated".into()));
    }
    Ok((a * z.dpsi).abs() / norm)
}

/// Number of negative eigenvalues of the tridiagonal `−Δ_h + V` (Sylvester's law on `LDLᵀ`).
pub(crate) fn sturm_count(diag: &[f64], off: f64) -> usize {
    let mut count = 0;
    let mut pivot = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        pivot = if i == 0 { d } else { d - off * off / pivot };
        if pivot == 0.0 {
            pivot = -f64::EPSILON * d.abs().max(1.0);
        }
        if pivot < 0.0 {
            count += 1;
        }
    }
    count
}

/// Bound states by finite differences on `[−L, L]` (4096 points, `L = max(40, 20a)`),
/// cross-checked against the node count of the zero-energy solution.
pub fn bound_states_1d(v: &Potential1D) -> Result<usize, ScatterError> {
    let n = 4096;
    let l = (20.0 * v.support()).max(40.0);
    let h = 2.0 * l / (n + 1) as f64;
    let diag: Vec<f64> = (1..=n)
        .map(|i| {
            let x = -l + i as f64 * h;
            2.0 / (h * h) + v.cell_average(x - 0.5 * h, x + 0.5 * h)
        })
        .collect();
    let fd = sturm_count(&diag, -1.0 / (h * h));
    let nodes = zero_energy_1d(v).nodes;
    if fd != nodes {
        return Err(ScatterError::OracleDisagreement { diagonalization: fd, nodes });
    }
    Ok(fd)
}

/// `S(0)`: the generic matrix `[[0, −1], [−1, 0]]`, or the limit from tiny energies when resonant.
pub fn smatrix_1d_threshold(v: &Potential1D, resonant: bool) -> Result<ComplexMatrix, ScatterError> {
    if resonant {
        smatrix_1d(v, 1e-14)
    } else {
        Ok(ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]))
    }
}

/// `λ ↦ S(λ)` on `[0, ∞)` with `S(0)` given by its threshold value.
pub fn spath_1d(v: &Potential1D, s0: ComplexMatrix) -> UnitaryPath {
    let v = v.clone();
    UnitaryPath::new(Interval::HalfLine, 2, move |lambda| {
        if lambda <= 0.0 {
            return s0.clone();
        }
        smatrix_1d(&v, lambda).unwrap_or_else(|_| ComplexMatrix::from_element(2, 2, c(f64::NAN, 0.0)))
    })
    .with_schatten_order(1.0)
    .with_unitary_tol(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn free_line_has_trivial_s() {
        let s = smatrix_1d(&Potential1D::zero(), 2.5).unwrap();
        assert!((s - matcore::identity(2)).norm() < 1e-14);
        assert!(matches!(smatrix_1d(&Potential1D::zero(), 0.0), Err(ScatterError::EnergyNonpositive(_))));
    }

    #[test]
    fn rectangular_barrier_transmission() {
        // |t|² = 1 / (1 + v² sinh²(κL) / (4E(v−E)))  for E < v, and the sin form above
        for &(v0, e) in &[(1.0, 0.5), (1.0, 1.0), (2.0, 3.0)] {
            let s = smatrix_1d(&Potential1D::barrier(v0, 0.0, 1.0).unwrap(), e).unwrap();
            let t2 = s[(0, 0)].norm_sqr();
            let expect = if e < v0 {
                let kappa = (v0 - e).sqrt();
                1.0 / (1.0 + v0 * v0 * kappa.sinh().powi(2) / (4.0 * e * (v0 - e)))
            } else if e == v0 {
                1.0 / (1.0 + v0 / 4.0)
            } else {
                let q = (e - v0).sqrt();
                1.0 / (1.0 + v0 * v0 * q.sin().powi(2) / (4.0 * e * (e - v0)))
            };
            assert_relative_eq!(t2, expect, epsilon = 1e-12);
            assert_relative_eq!(t2 + s[(1, 0)].norm_sqr(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn smooth_and_segment_engines_agree() {
        let seg = Potential1D::barrier(1.5, -0.5, 0.5).unwrap();
        let smooth = Potential1D::smooth(-0.5, 0.5, "flat", |_| 1.5).unwrap();
        let a = smatrix_1d(&seg, 2.0).unwrap();
        let b = smatrix_1d(&smooth, 2.0).unwrap();
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn generic_threshold_limit() {
        let w = Potential1D::square_well(1.0, 1.0).unwrap();
        let s = smatrix_1d(&w, 1e-12).unwrap();
        let s0 = smatrix_1d_threshold(&w, false).unwrap();
        assert!((s - s0).norm() < 1e-4);
    }

    #[test]
    fn square_well_counts() {
        // half-width 1: N = ⌊2√v/π⌋ + 1
        for &(depth, n) in &[(1.0, 1), (5.0, 2), (20.0, 3), (0.0, 0)] {
            let w = Potential1D::square_well(depth, 1.0).unwrap();
            assert_eq!(bound_states_1d(&w).unwrap(), n, "depth {depth}");
        }
        assert_eq!(bound_states_1d(&Potential1D::barrier(3.0, 0.0, 1.0).unwrap()).unwrap(), 0);
    }

    #[test]
    fn sturm_on_diagonal() {
        assert_eq!(sturm_count(&[-1.0, 2.0, -3.0], 0.0), 2);
    }
}
