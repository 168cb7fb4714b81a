//! Dense complex linear algebra shared by every engine.
//!
//! Unitary eigendecompositions go through the complex Schur form, which for a
//! normal matrix is diagonal with a unitary basis. The eigenvalue `-1` is
//! always reported with angle `+π`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

pub type ComplexMatrix = DMatrix<Complex64>;

/// Default tolerance for `‖U*U − Id‖_op`.
pub const UNITARY_TOL: f64 = 1e-10;

/// Angles within this distance of `-π` are snapped to `+π`.
const BRANCH_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("matrix is not unitary: ‖U*U − Id‖ = {defect:.3e} exceeds {tol:.1e}")]
    NonUnitary { defect: f64, tol: f64 },
    #[error("invalid Schatten order {0}; need p ≥ 1")]
    InvalidOrder(f64),
    #[error("matrix is not square ({rows}×{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn diag(entries: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries))
}

/// `diag(e^{iθ_j})`.
pub fn diag_phases(angles: &[f64]) -> ComplexMatrix {
    let e: Vec<Complex64> = angles.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
    diag(&e)
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// `Tr(AB)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

pub fn matrix_power(a: &ComplexMatrix, n: u32) -> ComplexMatrix {
    let mut out = identity(a.nrows());
    let mut base = a.clone();
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    out
}

pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.clone().singular_values().iter().copied().collect()
}

/// Largest singular value.
pub fn op_norm(a: &ComplexMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

/// `‖U*U − Id‖_op`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    op_norm(&(u.adjoint() * u - identity(n)))
}

pub fn check_unitary(u: &ComplexMatrix, tol: f64) -> Result<(), MatError> {
    if !u.is_square() {
        return Err(MatError::NotSquare { rows: u.nrows(), cols: u.ncols() });
    }
    if !is_finite(u) {
        return Err(MatError::NonFinite);
    }
    let defect = unitarity_defect(u);
    if defect > tol {
        return Err(MatError::NonUnitary { defect, tol });
    }
    Ok(())
}

/// Schatten `p`-norm; `p = f64::INFINITY` gives the operator norm.
pub fn schatten_norm(a: &ComplexMatrix, p: f64) -> Result<f64, MatError> {
    if p.is_nan() || p < 1.0 {
        return Err(MatError::InvalidOrder(p));
    }
    let s = singular_values(a);
    if p.is_infinite() {
        return Ok(s.into_iter().fold(0.0, f64::max));
    }
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0.0);
    }
    // scale to avoid overflow in σ^p
    let sum: f64 = s.iter().map(|x| (x / smax).powf(p)).sum();
    Ok(smax * sum.powf(1.0 / p))
}

/// Maps an angle into `(−π, π]`, sending values at or numerically next to `−π` to `+π`.
pub fn principal_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t <= -PI {
        t += 2.0 * PI;
    }
    if t < -PI + BRANCH_SNAP {
        t = PI;
    }
    t
}

/// Eigenangles and an orthonormal eigenbasis of a unitary.
#[derive(Debug, Clone)]
pub struct EigenAngleSet {
    /// Ascending, each in `(−π, π]`.
    pub angles: Vec<f64>,
    /// Column `j` is the eigenvector for `angles[j]`.
    pub vectors: ComplexMatrix,
}

impl EigenAngleSet {
    pub fn dim(&self) -> usize {
        self.angles.len()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.angles.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
    }

    /// `Q f(e^{iθ}) Q*` with `f` applied per eigenangle.
    pub fn apply<F: Fn(f64) -> Complex64>(&self, f: F) -> ComplexMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.angles[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|t| Complex64::from_polar(1.0, t))
    }

    /// Groups angles closer than `tol` and reports `(mean angle, multiplicity)`.
    pub fn clusters(&self, tol: f64) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        let mut start = 0;
        for j in 1..=self.angles.len() {
            if j == self.angles.len() || self.angles[j] - self.angles[j - 1] > tol {
                let block = &self.angles[start..j];
                if !block.is_empty() {
                    out.push((block.iter().sum::<f64>() / block.len() as f64, block.len()));
                }
                start = j;
            }
        }
        out
    }
}

pub fn eig_unitary(u: &ComplexMatrix) -> Result<EigenAngleSet, MatError> {
    eig_unitary_tol(u, UNITARY_TOL)
}

pub fn eig_unitary_tol(u: &ComplexMatrix, tol: f64) -> Result<EigenAngleSet, MatError> {
    check_unitary(u, tol)?;
    let n = u.nrows();
    if n == 0 {
        return Ok(EigenAngleSet { angles: Vec::new(), vectors: ComplexMatrix::zeros(0, 0) });
    }
    let (q, raw) = match u.clone().try_schur(f64::EPSILON, 200 * n.max(10)) {
        Some(schur) => {
            let (q, t) = schur.unpack();
            let raw: Vec<f64> = (0..n).map(|j| t[(j, j)].arg()).collect();
            (q, raw)
        }
        None => eig_via_cayley(u)?,
    };
    let mut idx: Vec<(f64, usize)> = raw.iter().enumerate().map(|(j, &a)| (principal_angle(a), j)).collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let angles = idx.iter().map(|p| p.0).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (k, &(_, j)) in idx.iter().enumerate() {
        vectors.set_column(k, &q.column(j));
    }
    Ok(EigenAngleSet { angles, vectors })
}

/// Fallback for when the Schur iteration stalls, which happens on matrices
/// within rounding of a multiple of the identity. Rotates `U` so that `−1` is
/// well separated from the spectrum, then diagonalizes the Hermitian
/// `i(Id − W)(Id + W)^{−1}`, whose eigenvalues are `tan(θ/2)`.
fn eig_via_cayley(u: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>), MatError> {
    let n = u.nrows();
    let rotation = (0..8)
        .map(|j| j as f64 * PI / 4.0)
        .map(|phi| {
            let plus = identity(n) + u * Complex64::from_polar(1.0, phi);
            let gap = singular_values(&plus).into_iter().fold(f64::INFINITY, f64::min);
            (phi, gap)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("eight candidates");
    let w = u * Complex64::from_polar(1.0, rotation.0);
    let inv = (identity(n) + &w).try_inverse().ok_or(MatError::NonFinite)?;
    let a = (identity(n) - &w) * inv * Complex64::new(0.0, 1.0);
    let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = a.try_symmetric_eigen(f64::EPSILON, 1000 * n.max(10)).ok_or(MatError::NonFinite)?;
    let angles = eig.eigenvalues.iter().map(|&x| 2.0 * x.atan() - rotation.0).collect();
    Ok((eig.eigenvectors, angles))
}

/// Matches the angles of `next` to those of `prev` by greedy nearest-angle
/// pairing on the circle, breaking near-ties with eigenvector overlap.
/// Returns `perm` with `next.angles[perm[j]]` continuing `prev.angles[j]`.
pub fn match_angles(prev: &EigenAngleSet, next: &EigenAngleSet) -> Vec<usize> {
    let n = prev.dim();
    let overlap = prev.vectors.adjoint() * &next.vectors;
    let mut pairs: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let d = principal_angle(next.angles[j] - prev.angles[i]).abs();
            // quantize so that nearly equal distances fall back to overlap
            let key = (d / 1e-8).round();
            pairs.push((key, -overlap[(i, j)].norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (_, _, i, j) in pairs {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
        }
    }
    perm
}

/// `|A|^{2s} = (A*A)^s`, computed from the SVD. `0^0` is taken as `1`.
pub fn abs_power(a: &ComplexMatrix, s: f64) -> ComplexMatrix {
    let n = a.ncols();
    if n == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut scaled = v_t.adjoint();
    for (j, &sigma) in svd.singular_values.iter().enumerate() {
        let w = if s == 0.0 { 1.0 } else { sigma.powf(2.0 * s) };
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    let mut out = scaled * v_t;
    hermitize(&mut out);
    out
}

fn hermitize(a: &mut ComplexMatrix) {
    let h = (a.clone() + a.adjoint()) * Complex64::new(0.5, 0.0);
    *a = h;
}

/// Skew-Hermitian `Y` with `e^Y = U` and spectrum `iθ`, `θ ∈ (−π, π]`.
pub fn principal_log_unitary(u: &ComplexMatrix) -> Result<ComplexMatrix, MatError> {
    let eig = eig_unitary(u)?;
    Ok(principal_log_from(&eig))
}

pub fn principal_log_from(eig: &EigenAngleSet) -> ComplexMatrix {
    let mut y = eig.apply(|t| Complex64::new(0.0, t));
    let yh = y.adjoint();
    y = (y - yh) * Complex64::new(0.5, 0.0);
    y
}

/// Exponential of a skew-Hermitian matrix through the Hermitian eigenproblem of `−iY`.
pub fn expm_skew(y: &ComplexMatrix) -> ComplexMatrix {
    let n = y.nrows();
    if n == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    let mut h = y * Complex64::new(0.0, -1.0);
    hermitize(&mut h);
    let eig = SymmetricEigen::new(h);
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let e = Complex64::from_polar(1.0, lam);
        for i in 0..n {
            scaled[(i, j)] *= e;
        }
    }
    scaled * eig.eigenvectors.adjoint()
}

/// General matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    if norm1 > 0.5 {
        squarings = (norm1 / 0.5).log2().ceil() as u32;
    }
    let scaled = a * Complex64::new(0.5f64.powi(squarings as i32), 0.0);
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=20 {
        term = &term * &scaled * Complex64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `C_x = Γ(x+1) / (√π Γ(x+1/2))`.
pub fn gamma_constant(x: f64) -> f64 {
    (ln_gamma(x + 1.0) - ln_gamma(x + 0.5)).exp() / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_angles_are_zero() {
        let e = eig_unitary(&identity(3)).unwrap();
        assert_eq!(e.angles, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn cayley_fallback_matches_schur() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let u = crate::sampling::random_unitary(&mut rng, 5);
        let (vecs, raw) = eig_via_cayley(&u).unwrap();
        let mut fallback: Vec<f64> = raw.into_iter().map(principal_angle).collect();
        fallback.sort_by(f64::total_cmp);
        let reference = eig_unitary(&u).unwrap().angles;
        for (a, b) in fallback.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(unitarity_defect(&vecs) < 1e-12);
    }

    #[test]
    fn near_identity_sample_terminates() {
        // a geodesic cap evaluated at t = 0 leaves rounding-level off-diagonal noise
        let y = ComplexMatrix::from_fn(3, 3, |i, j| if i == j { c(0.0, 1e-16 * i as f64) } else { c(1e-17, 0.0) });
        let y = (&y - y.adjoint()) * c(0.5, 0.0);
        let e = eig_unitary(&expm_skew(&y)).unwrap();
        assert!(e.angles.iter().all(|a| a.abs() < 1e-14));
    }

    #[test]
    fn minus_one_is_plus_pi() {
        let u = diag(&[c(-1.0, 0.0), c(1.0, 0.0)]);
        let e = eig_unitary(&u).unwrap();
        assert_eq!(e.angles.len(), 2);
        assert_relative_eq!(e.angles[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(e.angles[1], PI, epsilon = 1e-14);
        // negative zero imaginary part must not flip the branch
        let u = diag(&[c(-1.0, -0.0)]);
        assert_eq!(eig_unitary(&u).unwrap().angles[0], PI);
    }

    #[test]
    fn quarter_turns() {
        let u = diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
        let e = eig_unitary(&u).unwrap();
        assert_relative_eq!(e.angles[0], -PI / 2.0, epsilon = 1e-14);
        assert_relative_eq!(e.angles[1], PI / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn non_unitary_is_rejected() {
        let u = diag(&[c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(eig_unitary(&u), Err(MatError::NonUnitary { .. })));
    }

    #[test]
    fn schatten_examples() {
        let z = ComplexMatrix::zeros(3, 3);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(schatten_norm(&z, p).unwrap(), 0.0);
        }
        let d = diag(&[c(3.0, 0.0), c(4.0, 0.0)]);
        assert_relative_eq!(schatten_norm(&d, 2.0).unwrap(), 5.0, epsilon = 1e-14);
        assert_relative_eq!(schatten_norm(&d, f64::INFINITY).unwrap(), 4.0, epsilon = 1e-14);
        let p = diag(&[c(1.0, 0.0), c(0.0, 0.0)]);
        assert_relative_eq!(schatten_norm(&p, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(schatten_norm(&p, 0.5), Err(MatError::InvalidOrder(0.5)));
    }

    #[test]
    fn abs_power_of_model_loop_difference() {
        let t: f64 = 0.3;
        let u = diag_phases(&[2.0 * PI * t, 0.0]);
        let a = &u - identity(2);
        let p = abs_power(&a, 1.0);
        assert_relative_eq!(p[(0, 0)].re, 4.0 * (PI * t).sin().powi(2), epsilon = 1e-13);
        assert!(p[(1, 1)].norm() < 1e-14);
        assert!(abs_power(&ComplexMatrix::zeros(2, 2), 1.3).norm() < 1e-15);
    }

    #[test]
    fn logs_on_branch() {
        assert!(principal_log_unitary(&identity(2)).unwrap().norm() < 1e-15);
        let y = principal_log_unitary(&diag(&[c(-1.0, 0.0), c(1.0, 0.0)])).unwrap();
        assert_relative_eq!(y[(0, 0)].im, PI, epsilon = 1e-14);
        assert!(y[(1, 1)].norm() < 1e-14);

        let s0 = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let y = principal_log_unitary(&s0).unwrap();
        let q = ComplexMatrix::from_element(2, 2, c(0.5, 0.0));
        assert!((&y - q * c(0.0, PI)).norm() < 1e-13);
        assert!((expm_skew(&y) - s0).norm() < 1e-13);
    }

    #[test]
    fn gamma_constant_values() {
        assert_relative_eq!(gamma_constant(0.0), 1.0 / PI, max_relative = 1e-12);
        assert_relative_eq!(gamma_constant(1.0), 2.0 / PI, max_relative = 1e-12);
        assert_relative_eq!(gamma_constant(1.5), 0.75, max_relative = 1e-12);
    }

    #[test]
    fn expm_agrees_with_skew_route() {
        let y = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.7), c(1.2, -0.4), c(-1.2, -0.4), c(0.0, -2.1)]);
        assert!((expm(&y) - expm_skew(&y)).norm() < 1e-12);
    }

    #[test]
    fn matching_follows_small_moves() {
        let a = eig_unitary(&diag_phases(&[0.1, 1.0, -2.0])).unwrap();
        let b = eig_unitary(&diag_phases(&[0.12, 0.98, -2.03])).unwrap();
        let perm = match_angles(&a, &b);
        for (i, &j) in perm.iter().enumerate() {
            assert!((a.angles[i] - b.angles[j]).abs() < 0.05);
        }
    }

    #[test]
    fn clusters_count_multiplicity() {
        let e = eig_unitary(&diag_phases(&[0.5, 0.5, PI, -1.0])).unwrap();
        let cl = e.clusters(1e-8);
        assert_eq!(cl.len(), 3);
        assert_eq!(cl[1].1, 2);
    }
}
