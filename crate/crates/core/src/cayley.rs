//! Cayley transform between unitaries and self-adjoint operators on subspaces.
//!
//! `C(U) = i(U + Id)(U − Id)^{−1}` on `V = range(U − Id)`, with inverse
//! `(T + i)(T − i)^{−1}` on `V` and `Id` on `V^⊥`. Operators are stored
//! through the extended resolvent `R = (T − i)^{−1} P_V = (U − Id)/(2i)`, so
//! large eigenvalues `cot(θ/2)` for `θ` near zero never appear explicitly.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use thiserror::Error;

use crate::matcore::{
    abs_power, eig_unitary, gamma_constant, identity, matrix_power, op_norm, schatten_norm, trace_product,
    ComplexMatrix, MatError,
};
use crate::sflow::{sf_phillips, PhillipsSpec, SflowError, SpectralFlowReport};
use crate::upath::{Interval, UnitaryPath};

/// Eigenangles with `|θ|` at most this are treated as the eigenvalue `1`.
pub const KERNEL_ANGLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CayleyError {
    #[error("ambient dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid subspace operator: {0}")]
    InvalidOperator(String),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

#[derive(Debug, Clone)]
pub struct SubspaceOperator {
    ambient_dim: usize,
    projection: ComplexMatrix,
    resolvent: ComplexMatrix,
    /// Orthonormal basis of `V`, one column per dimension.
    basis: ComplexMatrix,
}

fn j2() -> Complex64 {
    Complex64::new(0.0, 2.0)
}

impl SubspaceOperator {
    /// The zero operator on the zero subspace.
    pub fn zero(n: usize) -> Self {
        SubspaceOperator {
            ambient_dim: n,
            projection: ComplexMatrix::zeros(n, n),
            resolvent: ComplexMatrix::zeros(n, n),
            basis: ComplexMatrix::zeros(n, 0),
        }
    }

    /// Operator whose matrix in the orthonormal columns of `basis` is the Hermitian `t`.
    pub fn from_hermitian(basis: &ComplexMatrix, t: &ComplexMatrix) -> Result<Self, CayleyError> {
        let (n, m) = basis.shape();
        if t.nrows() != m || t.ncols() != m {
            return Err(CayleyError::DimensionMismatch(t.nrows(), m));
        }
        let gram = basis.adjoint() * basis;
        if op_norm(&(gram - identity(m))) > 1e-10 {
            return Err(CayleyError::InvalidOperator("basis is not orthonormal".into()));
        }
        if op_norm(&(t - t.adjoint())) > 1e-10 * (1.0 + op_norm(t)) {
            return Err(CayleyError::InvalidOperator("operator is not Hermitian".into()));
        }
        let shifted = t - identity(m) * Complex64::new(0.0, 1.0);
        let inv = shifted
            .try_inverse()
            .ok_or_else(|| CayleyError::InvalidOperator("T − i is singular".into()))?;
        Ok(SubspaceOperator {
            ambient_dim: n,
            projection: basis * basis.adjoint(),
            resolvent: basis * inv * basis.adjoint(),
            basis: basis.clone(),
        })
    }

    /// Real diagonal operator `Σ t_j e_j e_j*` on the span of the listed coordinate vectors.
    pub fn diagonal(n: usize, entries: &[(usize, f64)]) -> Result<Self, CayleyError> {
        let mut basis = ComplexMatrix::zeros(n, entries.len());
        let mut t = ComplexMatrix::zeros(entries.len(), entries.len());
        for (k, &(i, v)) in entries.iter().enumerate() {
            basis[(i, k)] = Complex64::new(1.0, 0.0);
            t[(k, k)] = Complex64::new(v, 0.0);
        }
        SubspaceOperator::from_hermitian(&basis, &t)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn subspace_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projection(&self) -> &ComplexMatrix {
        &self.projection
    }

    pub fn resolvent(&self) -> &ComplexMatrix {
        &self.resolvent
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    /// Matrix of `T` in [`Self::basis`], recovered as `(B*RB)^{−1} + i`.
    pub fn matrix_on_subspace(&self) -> Option<ComplexMatrix> {
        let m = self.subspace_dim();
        let rv = self.basis.adjoint() * &self.resolvent * &self.basis;
        rv.try_inverse().map(|inv| inv + identity(m) * Complex64::new(0.0, 1.0))
    }

    /// Sorted eigenvalues of `T`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.matrix_on_subspace() {
            Some(t) if t.nrows() > 0 => {
                let h = (&t + t.adjoint()) * Complex64::new(0.5, 0.0);
                let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                ev
            }
            _ => Vec::new(),
        }
    }

    /// `(T − λ)^{−1} P_V` for non-real `λ`, computed on the subspace.
    pub fn resolvent_at(&self, lambda: Complex64) -> Option<ComplexMatrix> {
        let t = self.matrix_on_subspace()?;
        let m = t.nrows();
        let inv = (t - identity(m) * lambda).try_inverse()?;
        Some(&self.basis * inv * self.basis.adjoint())
    }

    /// Residuals of `P² = P = P*`, `RP = PR = R`, `R − R* = 2iR*R`.
    pub fn invariant_defects(&self) -> [f64; 3] {
        let p = &self.projection;
        let r = &self.resolvent;
        let proj = op_norm(&(p * p - p)).max(op_norm(&(p - p.adjoint())));
        let support = op_norm(&(r * p - r)).max(op_norm(&(p * r - r)));
        let resolvent = op_norm(&(r - r.adjoint() - r.adjoint() * r * j2()));
        [proj, support, resolvent]
    }
}

/// Subspace of eigenvectors with angle away from zero and the operator `cot(θ/2)` there.
pub fn cayley(u: &ComplexMatrix) -> Result<SubspaceOperator, CayleyError> {
    let n = u.nrows();
    let eig = eig_unitary(u)?;
    let keep: Vec<usize> = (0..n).filter(|&j| eig.angles[j].abs() > KERNEL_ANGLE_TOL).collect();
    let mut basis = ComplexMatrix::zeros(n, keep.len());
    for (k, &j) in keep.iter().enumerate() {
        basis.set_column(k, &eig.vectors.column(j));
    }
    let mut scaled = basis.clone();
    for (k, &j) in keep.iter().enumerate() {
        let f = (Complex64::from_polar(1.0, eig.angles[j]) - 1.0) / j2();
        for i in 0..n {
            scaled[(i, k)] *= f;
        }
    }
    Ok(SubspaceOperator {
        ambient_dim: n,
        projection: &basis * basis.adjoint(),
        resolvent: scaled * basis.adjoint(),
        basis,
    })
}

/// `U = Id + 2iR`.
pub fn inv_cayley(t: &SubspaceOperator) -> ComplexMatrix {
    identity(t.ambient_dim) + &t.resolvent * j2()
}

/// Projection onto the graph of `T` in the doubled space, plus `0 ⊕ Id` on `V^⊥`.
///
/// Blocks: `A = (Id + T²)^{−1} P_V = (R − R*)/(2i)` and `B = T(Id + T²)^{−1} P_V = (R + R*)/2`.
pub fn graph_projection(t: &SubspaceOperator) -> ComplexMatrix {
    let n = t.ambient_dim;
    let r = &t.resolvent;
    let a = (r - r.adjoint()) / j2();
    let b = (r + r.adjoint()) * Complex64::new(0.5, 0.0);
    let mut out = ComplexMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&a);
    out.view_mut((0, n), (n, n)).copy_from(&b);
    out.view_mut((n, 0), (n, n)).copy_from(&b);
    out.view_mut((n, n), (n, n)).copy_from(&(identity(n) - a));
    out
}

/// `‖(T₁ − i)^{−1} P_{V₁} − (T₂ − i)^{−1} P_{V₂}‖_p`.
pub fn fp_distance(a: &SubspaceOperator, b: &SubspaceOperator, p: f64) -> Result<f64, CayleyError> {
    if a.ambient_dim != b.ambient_dim {
        return Err(CayleyError::DimensionMismatch(a.ambient_dim, b.ambient_dim));
    }
    Ok(schatten_norm(&(&a.resolvent - &b.resolvent), p)?)
}

/// Unitary path `t ↦ C^{−1}(T_t)` on `[0, 1]`.
pub fn cayley_path<F>(dim: usize, family: F) -> UnitaryPath
where
    F: Fn(f64) -> SubspaceOperator + Send + Sync + 'static,
{
    UnitaryPath::new(Interval::Unit, dim, move |t| inv_cayley(&family(t)))
}

/// Spectral flow of a path of subspace operators through its inverse Cayley transform.
pub fn sf_fp_path<F>(dim: usize, family: F, spec: &PhillipsSpec) -> Result<SpectralFlowReport, SflowError>
where
    F: Fn(f64) -> SubspaceOperator + Send + Sync + 'static,
{
    sf_phillips(&cayley_path(dim, family), spec)
}

/// `(T_V − i)` in the eigenbasis of `U` on `V`, together with that basis.
fn shifted_operator_on_subspace(u: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), CayleyError> {
    let n = u.nrows();
    let eig = eig_unitary(u)?;
    let keep: Vec<usize> = (0..n).filter(|&j| eig.angles[j].abs() > KERNEL_ANGLE_TOL).collect();
    let m = keep.len();
    let mut basis = ComplexMatrix::zeros(n, m);
    let mut shifted = ComplexMatrix::zeros(m, m);
    for (k, &j) in keep.iter().enumerate() {
        basis.set_column(k, &eig.vectors.column(j));
        let cot = 1.0 / (eig.angles[j] / 2.0).tan();
        shifted[(k, k)] = Complex64::new(cot, -1.0);
    }
    Ok((basis, shifted))
}

/// Both sides of `C_{n/2}(1/2i) Tr_V(X (C(U) − i)^{−n}) = C_{n/2}(1/2i)^{n+1} Tr(X (U − Id)^n)`.
pub fn cayley_form_identity(
    u: &ComplexMatrix,
    x: &ComplexMatrix,
    n: u32,
) -> Result<(Complex64, Complex64), CayleyError> {
    let c = gamma_constant(n as f64 / 2.0);
    let (basis, shifted) = shifted_operator_on_subspace(u)?;
    let lhs = if basis.ncols() == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        let inv = shifted
            .try_inverse()
            .ok_or_else(|| CayleyError::InvalidOperator("T − i is singular".into()))?;
        let xv = basis.adjoint() * x * &basis;
        trace_product(&xv, &matrix_power(&inv, n)) * c / j2()
    };
    let w = matrix_power(&(u - identity(u.nrows())), n);
    let rhs = trace_product(x, &w) * c / j2().powu(n + 1);
    Ok((lhs, rhs))
}

/// Both sides of `−i C_r/2 Tr_V(X |C(U) − i|^{−2r}) = −i C_r (1/2)^{2r+1} Tr(X |U − Id|^{2r})`.
pub fn cayley_beta_form_identity(
    u: &ComplexMatrix,
    x: &ComplexMatrix,
    r: f64,
) -> Result<(Complex64, Complex64), CayleyError> {
    let norm = Complex64::new(0.0, -gamma_constant(r));
    let (basis, shifted) = shifted_operator_on_subspace(u)?;
    let lhs = if basis.ncols() == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        let inv = shifted
            .try_inverse()
            .ok_or_else(|| CayleyError::InvalidOperator("T − i is singular".into()))?;
        let xv = basis.adjoint() * x * &basis;
        trace_product(&xv, &abs_power(&inv, r)) * norm * 0.5
    };
    let w = abs_power(&(u - identity(u.nrows())), r);
    let rhs = trace_product(x, &w) * norm * 0.5f64.powf(2.0 * r + 1.0);
    Ok((lhs, rhs))
}

/// Lipschitz bound for `U ↦ (C(U) − λ)^{−1} P_V` between two unitaries.
///
/// With `D_U = (i − λ)U + (i + λ)` one has
/// `f(U) − f(W) = 2i D_U^{−1}(U − W)D_W^{−1}`, so the Schatten distance of the
/// resolvents is at most the returned factor times `‖U − W‖_p`.
pub fn resolvent_lipschitz_factor(u: &ComplexMatrix, w: &ComplexMatrix, lambda: Complex64) -> Result<f64, CayleyError> {
    let i = Complex64::new(0.0, 1.0);
    let shift = (i + lambda) / (i - lambda);
    let gap = |m: &ComplexMatrix| -> Result<f64, CayleyError> {
        Ok(eig_unitary(m)?
            .eigenvalues()
            .into_iter()
            .map(|z| (z + shift).norm())
            .fold(f64::INFINITY, f64::min))
    };
    Ok(2.0 / ((i - lambda).norm_sqr() * gap(u)? * gap(w)?))
}

/// Angle-to-spectrum map `e^{iθ} ↦ cot(θ/2)`.
pub fn cayley_eigenvalue(theta: f64) -> f64 {
    if (theta - PI).abs() < 1e-15 {
        0.0
    } else {
        1.0 / (theta / 2.0).tan()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{c, diag};

    #[test]
    fn identity_gives_zero_subspace() {
        let t = cayley(&identity(3)).unwrap();
        assert_eq!(t.subspace_dim(), 0);
        assert_eq!(inv_cayley(&t), identity(3));
        assert_eq!(inv_cayley(&SubspaceOperator::zero(2)), identity(2));
    }

    #[test]
    fn quarter_turn_maps_to_one() {
        let t = cayley(&diag(&[c(0.0, 1.0), c(1.0, 0.0)])).unwrap();
        assert_eq!(t.subspace_dim(), 1);
        let ev = t.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-13);
        let t = cayley(&diag(&[c(-1.0, 0.0), c(1.0, 0.0)])).unwrap();
        assert!(t.eigenvalues()[0].abs() < 1e-13);
    }

    #[test]
    fn zero_operator_inverts_to_reflection() {
        let t = SubspaceOperator::diagonal(2, &[(0, 0.0)]).unwrap();
        assert!((inv_cayley(&t) - diag(&[c(-1.0, 0.0), c(1.0, 0.0)])).norm() < 1e-15);
    }

    #[test]
    fn graph_projection_extremes() {
        let z = graph_projection(&SubspaceOperator::zero(2));
        let mut expect = ComplexMatrix::zeros(4, 4);
        expect.view_mut((2, 2), (2, 2)).copy_from(&identity(2));
        assert_eq!(z, expect);
        let t = SubspaceOperator::diagonal(2, &[(0, 0.0), (1, 0.0)]).unwrap();
        let g = graph_projection(&t);
        let mut expect = ComplexMatrix::zeros(4, 4);
        expect.view_mut((0, 0), (2, 2)).copy_from(&identity(2));
        assert!((g - expect).norm() < 1e-15);
    }

    #[test]
    fn form_identities_on_scalar_example() {
        let u = diag(&[c(0.0, 1.0), c(1.0, 0.0)]);
        let x = diag(&[c(0.0, 0.01), c(0.0, 0.0)]);
        for n in 1..4 {
            let (l, r) = cayley_form_identity(&u, &x, n).unwrap();
            assert!((l - r).norm() < 1e-10);
        }
        let (l, r) = cayley_beta_form_identity(&u, &x, 0.8).unwrap();
        assert!((l - r).norm() < 1e-10);
        let (l, r) = cayley_form_identity(&identity(2), &x, 2).unwrap();
        assert_eq!((l, r), (c(0.0, 0.0), c(0.0, 0.0)));
    }

    #[test]
    fn moving_domain_sweeps() {
        let sweep = |sign: f64| {
            move |t: f64| {
                if t <= 0.0 || t >= 1.0 {
                    SubspaceOperator::zero(2)
                } else {
                    SubspaceOperator::diagonal(2, &[(0, sign * (PI * (t - 0.5)).tan())]).unwrap()
                }
            }
        };
        // a decreasing eigenvalue is the Cayley image of the model loop
        assert_eq!(sf_fp_path(2, sweep(-1.0), &PhillipsSpec::default()).unwrap().value, 1);
        assert_eq!(sf_fp_path(2, sweep(1.0), &PhillipsSpec::default()).unwrap().value, -1);
    }
}
