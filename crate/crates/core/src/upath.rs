//! Parameterized families of unitaries.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcore::{self, identity, op_norm, schatten_norm, ComplexMatrix, MatError};

pub type Sampler = Arc<dyn Fn(f64) -> ComplexMatrix + Send + Sync>;

/// Tolerance for matching endpoints and for the closed flag.
pub const ENDPOINT_TOL: f64 = 1e-8;

/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("rank {k} projection does not fit in dimension {dim}")]
    DimensionTooSmall { k: usize, dim: usize },
    #[error("parameter {t} lies outside the path interval")]
    OutsideInterval { t: f64 },
    #[error("tail norms {norms:?} do not decrease towards the identity")]
    NoLimitAtInfinity { norms: Vec<f64> },
    #[error("endpoints differ by {gap:.3e} in operator norm")]
    EndpointMismatch { gap: f64 },
    #[error("operation needs a path on [0,1], found {0:?}")]
    NotUnitInterval(Interval),
    #[error("operation needs a path on an unbounded interval")]
    BoundedInterval,
    #[error(transparent)]
    Matrix(#[from] MatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interval {
    /// `[0, 1]`
    Unit,
    /// `[0, ∞)`
    HalfLine,
    /// `ℝ`
    Line,
}

impl Interval {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Interval::Unit => (0.0, 1.0),
            Interval::HalfLine => (0.0, f64::INFINITY),
            Interval::Line => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn contains(self, t: f64) -> bool {
        let (lo, hi) = self.bounds();
        t >= lo && t <= hi && !t.is_nan()
    }
}

#[derive(Clone)]
pub struct UnitaryPath {
    interval: Interval,
    dim: usize,
    sampler: Sampler,
    derivative_sampler: Option<Sampler>,
    schatten_order: f64,
    closed: bool,
    joints: Vec<f64>,
    unitary_tol: f64,
}

impl fmt::Debug for UnitaryPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryPath")
            .field("interval", &self.interval)
            .field("dim", &self.dim)
            .field("analytic_derivative", &self.derivative_sampler.is_some())
            .field("schatten_order", &self.schatten_order)
            .field("closed", &self.closed)
            .field("joints", &self.joints)
            .finish()
    }
}

impl UnitaryPath {
    pub fn new<F>(interval: Interval, dim: usize, sampler: F) -> Self
    where
        F: Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    {
        UnitaryPath {
            interval,
            dim,
            sampler: Arc::new(sampler),
            derivative_sampler: None,
            schatten_order: 1.0,
            closed: false,
            joints: Vec::new(),
            unitary_tol: matcore::UNITARY_TOL,
        }
    }

    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    {
        self.derivative_sampler = Some(Arc::new(d));
        self
    }

    pub fn with_schatten_order(mut self, p: f64) -> Self {
        self.schatten_order = p;
        self
    }

    pub fn with_closed(mut self, closed: bool) -> Self {
        self.closed = closed;
        self
    }

    pub fn with_joints(mut self, joints: Vec<f64>) -> Self {
        self.joints = joints;
        self
    }

    pub fn with_unitary_tol(mut self, tol: f64) -> Self {
        self.unitary_tol = tol;
        self
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn schatten_order(&self) -> f64 {
        self.schatten_order
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn joints(&self) -> &[f64] {
        &self.joints
    }

    pub fn unitary_tol(&self) -> f64 {
        self.unitary_tol
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative_sampler.is_some()
    }

    pub fn sample(&self, t: f64) -> ComplexMatrix {
        (self.sampler)(t)
    }

    /// Sample with the unitarity check applied.
    pub fn sample_checked(&self, t: f64) -> Result<ComplexMatrix, PathError> {
        if !self.interval.contains(t) {
            return Err(PathError::OutsideInterval { t });
        }
        let u = self.sample(t);
        matcore::check_unitary(&u, self.unitary_tol)?;
        Ok(u)
    }

    pub fn start(&self) -> ComplexMatrix {
        self.sample(self.interval.bounds().0)
    }

    pub fn end(&self) -> ComplexMatrix {
        self.sample(self.interval.bounds().1)
    }

    /// Largest of `‖U_0 − Id‖_op` and `‖U_1 − Id‖_op` on `[0, 1]`.
    pub fn endpoint_defect(&self) -> Result<f64, PathError> {
        if self.interval != Interval::Unit {
            return Err(PathError::NotUnitInterval(self.interval));
        }
        let id = identity(self.dim);
        Ok(op_norm(&(self.start() - &id)).max(op_norm(&(self.end() - id))))
    }

    /// Step used when `derivative` is called without one.
    pub fn default_step(&self, t: f64) -> f64 {
        match self.interval {
            Interval::Unit => FD_STEP,
            _ => FD_STEP * t.abs().max(1.0),
        }
    }

    /// `U̇_t`: the analytic derivative when known, else a fourth-order difference.
    pub fn derivative(&self, t: f64, h: Option<f64>) -> Result<ComplexMatrix, PathError> {
        if !self.interval.contains(t) {
            return Err(PathError::OutsideInterval { t });
        }
        if let Some(d) = &self.derivative_sampler {
            return Ok(d(t));
        }
        let h = h.unwrap_or_else(|| self.default_step(t));
        Ok(finite_difference(&self.sampler, self.interval, t, h))
    }

    /// Derivative closure usable inside other samplers.
    fn derivative_fn(&self) -> Sampler {
        match &self.derivative_sampler {
            Some(d) => d.clone(),
            None => {
                let s = self.sampler.clone();
                let interval = self.interval;
                Arc::new(move |t| {
                    let h = match interval {
                        Interval::Unit => FD_STEP,
                        _ => FD_STEP * t.abs().max(1.0),
                    };
                    finite_difference(&s, interval, t, h)
                })
            }
        }
    }

    pub fn model_loop(k: usize, dim: usize) -> Result<Self, PathError> {
        if k == 0 || k > dim {
            return Err(PathError::DimensionTooSmall { k, dim });
        }
        let path = UnitaryPath::new(Interval::Unit, dim, move |t| {
            let e = Complex64::from_polar(1.0, 2.0 * PI * t);
            let mut u = identity(dim);
            for j in 0..k {
                u[(j, j)] = e;
            }
            u
        })
        .with_derivative(move |t| {
            let e = Complex64::new(0.0, 2.0 * PI) * Complex64::from_polar(1.0, 2.0 * PI * t);
            let mut d = ComplexMatrix::zeros(dim, dim);
            for j in 0..k {
                d[(j, j)] = e;
            }
            d
        })
        .with_closed(true);
        Ok(path)
    }

    pub fn constant(u: ComplexMatrix) -> Self {
        let dim = u.nrows();
        let closed = op_norm(&(&u - identity(dim))) <= ENDPOINT_TOL;
        let u = Arc::new(u);
        UnitaryPath::new(Interval::Unit, dim, move |_| (*u).clone())
            .with_derivative(move |_| ComplexMatrix::zeros(dim, dim))
            .with_closed(closed)
    }

    pub fn identity_path(dim: usize) -> Self {
        UnitaryPath::constant(identity(dim))
    }

    /// `t ↦ e^{tY}` on `[0, 1]` for skew-Hermitian `Y`.
    pub fn geodesic(y: &ComplexMatrix) -> Self {
        let dim = y.nrows();
        let h = y * Complex64::new(0.0, -1.0);
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let q = Arc::new(eig.eigenvectors);
        let lam: Arc<Vec<f64>> = Arc::new(eig.eigenvalues.iter().copied().collect());
        let (q2, lam2) = (q.clone(), lam.clone());
        let exp_at = move |q: &ComplexMatrix, lam: &[f64], t: f64, deriv: bool| {
            let mut scaled = q.clone();
            for (j, &l) in lam.iter().enumerate() {
                let mut f = Complex64::from_polar(1.0, t * l);
                if deriv {
                    f *= Complex64::new(0.0, l);
                }
                for i in 0..q.nrows() {
                    scaled[(i, j)] *= f;
                }
            }
            scaled * q.adjoint()
        };
        UnitaryPath::new(Interval::Unit, dim, move |t| exp_at(&q, &lam, t, false))
            .with_derivative(move |t| exp_at(&q2, &lam2, t, true))
            .with_closed(op_norm(y) <= ENDPOINT_TOL)
    }

    /// `t ↦ W U_t W*`.
    pub fn conjugate(&self, w: &ComplexMatrix) -> Self {
        let w = Arc::new(w.clone());
        let (w1, w2) = (w.clone(), w);
        let s = self.sampler.clone();
        let d = self.derivative_fn();
        UnitaryPath {
            sampler: Arc::new(move |t| &*w1 * s(t) * w1.adjoint()),
            derivative_sampler: Some(Arc::new(move |t| &*w2 * d(t) * w2.adjoint())),
            ..self.clone()
        }
    }

    /// `t ↦ U_{1−t}` on `[0, 1]`.
    pub fn reverse(&self) -> Result<Self, PathError> {
        if self.interval != Interval::Unit {
            return Err(PathError::NotUnitInterval(self.interval));
        }
        let s = self.sampler.clone();
        let d = self.derivative_fn();
        Ok(UnitaryPath {
            sampler: Arc::new(move |t| s(1.0 - t)),
            derivative_sampler: Some(Arc::new(move |t| -d(1.0 - t))),
            joints: self.joints.iter().rev().map(|j| 1.0 - j).collect(),
            ..self.clone()
        })
    }

    /// `t ↦ U_{a + t(b−a)}` on `[0, 1]`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self, PathError> {
        if self.interval != Interval::Unit {
            return Err(PathError::NotUnitInterval(self.interval));
        }
        for t in [a, b] {
            if !self.interval.contains(t) {
                return Err(PathError::OutsideInterval { t });
            }
        }
        let s = self.sampler.clone();
        let d = self.derivative_fn();
        let len = b - a;
        let mut out = UnitaryPath {
            sampler: Arc::new(move |t| s(a + t * len)),
            derivative_sampler: Some(Arc::new(move |t| d(a + t * len) * Complex64::new(len, 0.0))),
            joints: self
                .joints
                .iter()
                .filter(|&&j| j > a.min(b) && j < a.max(b))
                .map(|j| (j - a) / len)
                .collect(),
            closed: false,
            ..self.clone()
        };
        out.closed = out.endpoint_defect()? <= ENDPOINT_TOL;
        Ok(out)
    }

    /// `a` then `b`, each at double speed.
    pub fn concatenate(a: &UnitaryPath, b: &UnitaryPath) -> Result<Self, PathError> {
        for p in [a, b] {
            if p.interval != Interval::Unit {
                return Err(PathError::NotUnitInterval(p.interval));
            }
        }
        if a.dim != b.dim {
            return Err(PathError::EndpointMismatch { gap: f64::INFINITY });
        }
        let gap = op_norm(&(a.end() - b.start()));
        if gap > ENDPOINT_TOL {
            return Err(PathError::EndpointMismatch { gap });
        }
        let (sa, sb) = (a.sampler.clone(), b.sampler.clone());
        let (da, db) = (a.derivative_fn(), b.derivative_fn());
        let two = Complex64::new(2.0, 0.0);
        let mut joints: Vec<f64> = a.joints.iter().map(|j| 0.5 * j).collect();
        joints.push(0.5);
        joints.extend(b.joints.iter().map(|j| 0.5 + 0.5 * j));
        let mut out = UnitaryPath {
            interval: Interval::Unit,
            dim: a.dim,
            sampler: Arc::new(move |t| if t <= 0.5 { sa(2.0 * t) } else { sb(2.0 * t - 1.0) }),
            derivative_sampler: Some(Arc::new(move |t| {
                if t <= 0.5 {
                    da(2.0 * t) * two
                } else {
                    db(2.0 * t - 1.0) * two
                }
            })),
            schatten_order: a.schatten_order.max(b.schatten_order),
            closed: false,
            joints,
            unitary_tol: a.unitary_tol.max(b.unitary_tol),
        };
        out.closed = out.endpoint_defect()? <= ENDPOINT_TOL;
        Ok(out)
    }

    /// Schatten distances `‖U_s − Id‖_p` at the tail probes.
    pub fn tail_norms(&self) -> Result<Vec<f64>, PathError> {
        let probes = [1e2, 1e3, 1e4];
        let id = identity(self.dim);
        let mut out = Vec::new();
        let sides: &[f64] = match self.interval {
            Interval::Unit => return Err(PathError::BoundedInterval),
            Interval::HalfLine => &[1.0],
            Interval::Line => &[-1.0, 1.0],
        };
        for &side in sides {
            for &s in &probes {
                out.push(schatten_norm(&(self.sample(side * s) - &id), self.schatten_order)?);
            }
        }
        Ok(out)
    }

    /// Reparameterizes a path on `[0, ∞)` or `ℝ` onto `[0, 1]`.
    ///
    /// The half line uses `t = 1 − (1+s)^{−α/2}`, the line `t = 1/(1+e^{−s})`.
    /// Endpoints at infinity are sampled as the identity.
    pub fn compactify(&self, alpha: f64) -> Result<Self, PathError> {
        let norms = self.tail_norms()?;
        for side in norms.chunks(3) {
            let slack = |x: f64| x * (1.0 + 1e-9) + 1e-14;
            let monotone = side[1] <= slack(side[0]) && side[2] <= slack(side[1]);
            let approaching = side[2] < side[0] || side[2] < 1e-12;
            if !(monotone && approaching) {
                return Err(PathError::NoLimitAtInfinity { norms });
            }
        }
        let s = self.sampler.clone();
        let d = self.derivative_fn();
        let dim = self.dim;
        let (sampler, deriv): (Sampler, Sampler) = match self.interval {
            Interval::HalfLine => {
                let e = 2.0 / alpha;
                (
                    Arc::new(move |t| if t >= 1.0 { identity(dim) } else { s((1.0 - t).powf(-e) - 1.0) }),
                    Arc::new(move |t| {
                        if t >= 1.0 {
                            return ComplexMatrix::zeros(dim, dim);
                        }
                        let jac = e * (1.0 - t).powf(-e - 1.0);
                        d((1.0 - t).powf(-e) - 1.0) * Complex64::new(jac, 0.0)
                    }),
                )
            }
            Interval::Line => (
                Arc::new(move |t| if t <= 0.0 || t >= 1.0 { identity(dim) } else { s((t / (1.0 - t)).ln()) }),
                Arc::new(move |t| {
                    if t <= 0.0 || t >= 1.0 {
                        return ComplexMatrix::zeros(dim, dim);
                    }
                    d((t / (1.0 - t)).ln()) * Complex64::new(1.0 / (t * (1.0 - t)), 0.0)
                }),
            ),
            Interval::Unit => return Err(PathError::BoundedInterval),
        };
        let to_unit = |x: f64| match self.interval {
            Interval::HalfLine => 1.0 - (1.0 + x).powf(-alpha / 2.0),
            _ => 1.0 / (1.0 + (-x).exp()),
        };
        Ok(UnitaryPath {
            interval: Interval::Unit,
            dim,
            sampler,
            derivative_sampler: Some(deriv),
            schatten_order: self.schatten_order,
            closed: self.closed,
            joints: self.joints.iter().map(|&j| to_unit(j)).collect(),
            unitary_tol: self.unitary_tol,
        })
    }
}

fn finite_difference(s: &Sampler, interval: Interval, t: f64, h: f64) -> ComplexMatrix {
    let (lo, hi) = interval.bounds();
    let f = |x: f64| s(x);
    let scale = |m: ComplexMatrix, c: f64| m * Complex64::new(c, 0.0);
    if t - 2.0 * h >= lo && t + 2.0 * h <= hi {
        let num = f(t - 2.0 * h) - f(t - h) * Complex64::new(8.0, 0.0) + f(t + h) * Complex64::new(8.0, 0.0)
            - f(t + 2.0 * h);
        return scale(num, 1.0 / (12.0 * h));
    }
    // one-sided fourth-order stencil pointing into the interval
    let sign = if t - 2.0 * h < lo { 1.0 } else { -1.0 };
    let g = |k: f64| f(t + sign * k * h);
    let num = g(0.0) * Complex64::new(-25.0, 0.0) + g(1.0) * Complex64::new(48.0, 0.0)
        - g(2.0) * Complex64::new(36.0, 0.0)
        + g(3.0) * Complex64::new(16.0, 0.0)
        - g(4.0) * Complex64::new(3.0, 0.0);
    scale(num, sign / (12.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{c, diag};
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn model_loop_samples() {
        let p = UnitaryPath::model_loop(1, 2).unwrap();
        assert!((p.sample(0.5) - diag(&[c(-1.0, 0.0), c(1.0, 0.0)])).norm() < 1e-15);
        assert!((p.sample(0.25) - diag(&[c(0.0, 1.0), c(1.0, 0.0)])).norm() < 1e-15);
        let p = UnitaryPath::model_loop(2, 3).unwrap();
        assert!((p.sample(0.0) - identity(3)).norm() < 1e-15);
        assert!(p.is_closed());
        assert_eq!(UnitaryPath::model_loop(3, 2).unwrap_err(), PathError::DimensionTooSmall { k: 3, dim: 2 });
    }

    #[test]
    fn model_loop_derivative() {
        let p = UnitaryPath::model_loop(1, 2).unwrap();
        let t = 0.37;
        let expect = c(0.0, 2.0 * PI) * Complex64::from_polar(1.0, 2.0 * PI * t);
        let d = p.derivative(t, None).unwrap();
        assert!((d[(0, 0)] - expect).norm() < 1e-13);
        assert!(d[(1, 1)].norm() < 1e-15);
        assert!(matches!(p.derivative(1.5, None), Err(PathError::OutsideInterval { .. })));
    }

    #[test]
    fn constant_path_has_zero_derivative() {
        let p = UnitaryPath::identity_path(3);
        assert!(p.derivative(0.4, None).unwrap().norm() == 0.0);
        let q = UnitaryPath::new(Interval::Unit, 3, |_| identity(3));
        assert!(q.derivative(0.4, None).unwrap().norm() < 1e-12);
    }

    #[test]
    fn geodesic_derivative_against_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = sampling::random_skew_hermitian(&mut rng, 4, 2.0);
        let g = UnitaryPath::geodesic(&y);
        let fd = UnitaryPath::new(Interval::Unit, 4, {
            let g = g.clone();
            move |t| g.sample(t)
        });
        for t in [0.0, 0.3, 0.99, 1.0] {
            let exact = &y * g.sample(t);
            assert!((g.derivative(t, None).unwrap() - &exact).norm() < 1e-12);
            assert!((fd.derivative(t, None).unwrap() - &exact).norm() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn concatenation_checks_endpoints() {
        let a = UnitaryPath::model_loop(1, 2).unwrap();
        let b = UnitaryPath::geodesic(&diag(&[c(0.0, 1.0), c(0.0, 0.0)]));
        let ab = UnitaryPath::concatenate(&a, &b).unwrap();
        assert_eq!(ab.joints(), &[0.5]);
        assert!(!ab.is_closed());
        assert!(matches!(UnitaryPath::concatenate(&b, &a), Err(PathError::EndpointMismatch { .. })));
    }

    #[test]
    fn compactify_constant_identity() {
        let p = UnitaryPath::new(Interval::HalfLine, 2, |_| identity(2));
        let q = p.compactify(1.0).unwrap();
        for t in [0.0, 0.5, 0.999, 1.0] {
            assert!((q.sample(t) - identity(2)).norm() < 1e-15);
        }
    }

    #[test]
    fn compactify_rejects_non_decaying_tail() {
        let p = UnitaryPath::new(Interval::HalfLine, 1, |s| diag(&[Complex64::from_polar(1.0, s.sin())]));
        assert!(matches!(p.compactify(1.0), Err(PathError::NoLimitAtInfinity { .. })));
    }

    #[test]
    fn line_compactification_uses_logistic_map() {
        let p = UnitaryPath::new(Interval::Line, 1, |s| diag(&[Complex64::from_polar(1.0, PI / (1.0 + s * s))]));
        let q = p.compactify(1.0).unwrap();
        let t: f64 = 0.7;
        let s = (t / (1.0 - t)).ln();
        assert!((q.sample(t) - p.sample(s)).norm() < 1e-15);
    }
}
