//! Spectral flow through `−1` of unitary paths.
//!
//! The reference count is the partition definition: on each subinterval pick
//! `ε` with no eigenvalue on the arcs `e^{i(π±ε)}` and add
//! `k(t_j, ε) − k(t_{j−1}, ε)`, where `k(t, ε)` counts eigenvalues
//! `e^{i(π+θ)}`, `0 ≤ θ < ε`. An interval `[a, b]` with midpoint `m` is
//! certified when every arc point is farther than
//! `ρ = safety · max(‖U_a − U_m‖, ‖U_m − U_b‖)` from the spectrum of `U_m`:
//! by the Neumann series no `U_t` with `‖U_t − U_m‖ ≤ ρ` can have an
//! eigenvalue there.
//!
//! The integral engines evaluate the winding forms
//! `(−1)^n/(2πi) Tr(U*U̇(U−Id)^n)` and
//! `−i C_r/2^{2r+1} Tr(U*U̇|U−Id|^{2r})` and the log-derivative of `Det_p`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcore::{
    self, abs_power, eig_unitary, eig_unitary_tol, expm_skew, gamma_constant, identity, match_angles, matrix_power,
    op_norm, principal_log_from, trace_product, ComplexMatrix, MatError,
};
use crate::quad::{integrate, QuadResult, QuadSpec};
use crate::rdet::logderiv_from;
use crate::upath::{Interval, PathError, UnitaryPath};

/// Residual below which a rounded value is accepted silently.
pub const ACCEPT_RESIDUAL: f64 = 0.1;
/// Residual at and above which rounding is refused.
pub const REJECT_RESIDUAL: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SflowError {
    #[error("integral {raw} is {residual:.3} away from the nearest integer")]
    NonConvergent { raw: Complex64, residual: f64 },
    #[error("path is not closed: endpoint distance to the identity is {defect:.3e}")]
    NotClosed { defect: f64 },
    #[error("could not isolate eigenvalue-free arcs near t = {t} (width {width:.1e}); increase the resolution")]
    PartitionFailure { t: f64, width: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("principal log does not reproduce the endpoint (defect {defect:.3e})")]
    CapMismatch { defect: f64 },
    #[error("path lives on an unbounded interval; compactify it first")]
    UnboundedInterval,
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Phillips,
    Alpha,
    Beta,
    Det,
    OpenPath,
    /// Integral of `Tr(S*S′) − p_d` with threshold and polynomial corrections.
    Subtracted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub n: Option<u32>,
    pub r: Option<f64>,
    pub p: Option<u32>,
    pub quad: Option<QuadSpec>,
    pub phillips: Option<PhillipsSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCertificate {
    pub breakpoints: Vec<f64>,
    /// `epsilons[j]` serves `[breakpoints[j], breakpoints[j+1]]`.
    pub epsilons: Vec<f64>,
    /// Certified clearance `ρ` of each arc from the spectrum.
    pub clearances: Vec<f64>,
    /// `(k(t_{j−1}, ε_j), k(t_j, ε_j))` per interval.
    pub counts: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFlowReport {
    pub value: i64,
    pub raw: Complex64,
    pub residual: f64,
    pub method: Method,
    pub parameters: MethodParams,
    pub warnings: Vec<String>,
    pub certificate: Option<PartitionCertificate>,
    pub quadrature: Option<QuadResult>,
    /// Named pieces of a decomposed value (open paths, Levinson routes).
    pub components: Vec<(String, Complex64)>,
}

impl SpectralFlowReport {
    /// Rounds `raw` under the acceptance policy.
    pub fn from_raw(raw: Complex64, method: Method, parameters: MethodParams) -> Result<Self, SflowError> {
        let value = raw.re.round();
        let residual = (raw - Complex64::new(value, 0.0)).norm();
        if residual >= REJECT_RESIDUAL || !residual.is_finite() {
            return Err(SflowError::NonConvergent { raw, residual });
        }
        let mut warnings = Vec::new();
        if residual >= ACCEPT_RESIDUAL {
            warnings.push(format!("residual {residual:.3} exceeds {ACCEPT_RESIDUAL}"));
        }
        if raw.im.abs() > 1e-6 * (1.0 + raw.norm()) {
            warnings.push(format!("imaginary part {:.3e} is not negligible", raw.im));
        }
        Ok(SpectralFlowReport {
            value: value as i64,
            raw,
            residual,
            method,
            parameters,
            warnings,
            certificate: None,
            quadrature: None,
            components: Vec::new(),
        })
    }

    pub fn is_accepted(&self) -> bool {
        self.residual < ACCEPT_RESIDUAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhillipsSpec {
    pub initial_intervals: usize,
    /// Multiplier on the sampled distance bound.
    pub safety: f64,
    pub min_width: f64,
    pub max_intervals: usize,
}

impl Default for PhillipsSpec {
    fn default() -> Self {
        PhillipsSpec { initial_intervals: 32, safety: 1.5, min_width: 1e-10, max_intervals: 200_000 }
    }
}

/// What the partition engine needs from a path.
pub trait SpectralPath: Sync {
    type Data: Send + Sync;

    fn domain(&self) -> (f64, f64);

    /// Parameters that must be breakpoints (kinks).
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Sample data plus principal eigenangles with multiplicities.
    fn probe(&self, t: f64) -> Result<(Self::Data, Vec<(f64, usize)>), SflowError>;

    /// Operator-norm distance between two samples.
    fn distance(&self, a: &Self::Data, b: &Self::Data) -> f64;
}

impl SpectralPath for UnitaryPath {
    type Data = ComplexMatrix;

    fn domain(&self) -> (f64, f64) {
        self.interval().bounds()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.joints().to_vec()
    }

    fn probe(&self, t: f64) -> Result<(ComplexMatrix, Vec<(f64, usize)>), SflowError> {
        let u = self.sample(t);
        let eig = eig_unitary_tol(&u, self.unitary_tol())?;
        Ok((u, eig.angles.into_iter().map(|a| (a, 1)).collect()))
    }

    fn distance(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        op_norm(&(a - b))
    }
}

struct Probe<D> {
    t: f64,
    data: D,
    angles: Vec<(f64, usize)>,
}

/// `k(t, ε)`: eigenvalues `e^{i(π+θ)}` with `0 ≤ θ < ε`, i.e. principal angle `+π` or below `−π + ε`.
pub fn count_near_minus_one(angles: &[(f64, usize)], eps: f64) -> usize {
    angles
        .iter()
        .filter(|(a, _)| *a >= PI - 1e-12 || *a < -PI + eps)
        .map(|(_, m)| m)
        .sum()
}

fn chord(x: f64) -> f64 {
    2.0 * (x.min(PI) / 2.0).sin()
}

/// Picks `ε ∈ (0, π)` whose arcs clear the spectrum by more than `rho`.
///
/// Prefers half the distance from `−1` to the nearest eigenvalue; otherwise
/// the midpoint of the widest gap between eigenvalue distances that works.
fn choose_eps(angles: &[(f64, usize)], rho: f64) -> Option<f64> {
    let mut d: Vec<f64> = angles.iter().map(|(a, _)| PI - a.abs()).map(|x| x.max(0.0)).collect();
    if d.is_empty() {
        return Some(PI / 2.0);
    }
    d.sort_by(f64::total_cmp);
    if d[0] > 0.0 && chord(d[0] / 2.0) > rho {
        return Some(d[0] / 2.0);
    }
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |eps: f64, clearance: f64| {
        if eps > 0.0 && eps < PI && chord(clearance) > rho && best.is_none_or(|(_, c)| clearance > c) {
            best = Some((eps, clearance));
        }
    };
    for w in d.windows(2) {
        consider(0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
    }
    let top = *d.last().expect("non-empty");
    consider(0.5 * (top + PI), 0.5 * (PI - top));
    best.map(|(e, _)| e)
}

/// Partition-based spectral flow on a bounded parameter interval.
pub fn sf_phillips_generic<P: SpectralPath>(path: &P, spec: &PhillipsSpec) -> Result<SpectralFlowReport, SflowError> {
    let (lo, hi) = path.domain();
    if !lo.is_finite() || !hi.is_finite() {
        return Err(SflowError::UnboundedInterval);
    }
    let n = spec.initial_intervals.max(1);
    let mut ts: Vec<f64> = (0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect();
    ts.extend(path.breakpoints().into_iter().filter(|&t| t > lo && t < hi));
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let probes: Vec<Probe<P::Data>> = ts
        .par_iter()
        .map(|&t| path.probe(t).map(|(data, angles)| Probe { t, data, angles }))
        .collect::<Result<_, _>>()?;

    let mut cert = PartitionCertificate {
        breakpoints: vec![probes[0].t],
        epsilons: Vec::new(),
        clearances: Vec::new(),
        counts: Vec::new(),
    };
    let mut total: i64 = 0;
    for w in probes.windows(2) {
        refine(path, spec, &w[0], &w[1], &mut cert, &mut total)?;
    }
    let mut report = SpectralFlowReport::from_raw(
        Complex64::new(total as f64, 0.0),
        Method::Phillips,
        MethodParams { phillips: Some(*spec), ..Default::default() },
    )?;
    report.certificate = Some(cert);
    Ok(report)
}

fn refine<P: SpectralPath>(
    path: &P,
    spec: &PhillipsSpec,
    a: &Probe<P::Data>,
    b: &Probe<P::Data>,
    cert: &mut PartitionCertificate,
    total: &mut i64,
) -> Result<(), SflowError> {
    let tm = 0.5 * (a.t + b.t);
    let (data, angles) = path.probe(tm)?;
    let m = Probe { t: tm, data, angles };
    let rho = spec.safety * path.distance(&a.data, &m.data).max(path.distance(&m.data, &b.data));
    if let Some(eps) = choose_eps(&m.angles, rho) {
        let ka = count_near_minus_one(&a.angles, eps);
        let kb = count_near_minus_one(&b.angles, eps);
        *total += kb as i64 - ka as i64;
        cert.breakpoints.push(b.t);
        cert.epsilons.push(eps);
        cert.clearances.push(rho);
        cert.counts.push((ka, kb));
        return Ok(());
    }
    let width = b.t - a.t;
    if width < spec.min_width || cert.epsilons.len() >= spec.max_intervals {
        return Err(SflowError::PartitionFailure { t: tm, width });
    }
    refine(path, spec, a, &m, cert, total)?;
    refine(path, spec, &m, b, cert, total)
}

pub fn sf_phillips(path: &UnitaryPath, spec: &PhillipsSpec) -> Result<SpectralFlowReport, SflowError> {
    if path.interval() != Interval::Unit {
        return Err(SflowError::UnboundedInterval);
    }
    sf_phillips_generic(path, spec)
}

fn require_closed(path: &UnitaryPath) -> Result<(), SflowError> {
    if path.interval() != Interval::Unit {
        return Err(SflowError::UnboundedInterval);
    }
    let defect = path.endpoint_defect()?;
    if defect > crate::upath::ENDPOINT_TOL {
        return Err(SflowError::NotClosed { defect });
    }
    Ok(())
}

fn sign(n: u32) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Integrates `f(U_t, U̇_t)` over `[0, 1]` with joints as panel boundaries.
pub fn integrate_along<F>(path: &UnitaryPath, quad: &QuadSpec, f: F) -> Result<QuadResult, SflowError>
where
    F: Fn(&ComplexMatrix, &ComplexMatrix) -> Complex64,
{
    if path.interval() != Interval::Unit {
        return Err(SflowError::UnboundedInterval);
    }
    integrate(
        |t| {
            let u = path.sample_checked(t)?;
            let du = path.derivative(t, None)?;
            Ok::<_, SflowError>(f(&u, &du))
        },
        0.0,
        1.0,
        path.joints(),
        quad,
    )
}

/// `(−1)^n/(2πi) Tr(U*U̇(U−Id)^n)`.
pub fn alpha_density(u: &ComplexMatrix, du: &ComplexMatrix, n: u32) -> Complex64 {
    let w = matrix_power(&(u - identity(u.nrows())), n);
    trace_product(&(u.adjoint() * du), &w) * sign(n) / Complex64::new(0.0, 2.0 * PI)
}

/// `−i C_r/2^{2r+1} Tr(U*U̇|U−Id|^{2r})`.
pub fn beta_density(u: &ComplexMatrix, du: &ComplexMatrix, r: f64) -> Complex64 {
    let w = abs_power(&(u - identity(u.nrows())), r);
    trace_product(&(u.adjoint() * du), &w) * beta_normalization(r)
}

/// `−i C_r / 2^{2r+1}`.
pub fn beta_normalization(r: f64) -> Complex64 {
    Complex64::new(0.0, -gamma_constant(r) / 2f64.powf(2.0 * r + 1.0))
}

fn check_n(path: &UnitaryPath, n: u32) -> Result<(), SflowError> {
    let p = path.schatten_order();
    if (n as f64) < p - 1.0 {
        return Err(SflowError::InvalidParameter(format!("n = {n} < p − 1 = {}", p - 1.0)));
    }
    Ok(())
}

fn check_r(path: &UnitaryPath, r: f64) -> Result<(), SflowError> {
    let p = path.schatten_order();
    if !(r >= (p - 1.0) / 2.0) {
        return Err(SflowError::InvalidParameter(format!("r = {r} < (p − 1)/2 = {}", (p - 1.0) / 2.0)));
    }
    Ok(())
}

fn finish(raw: QuadResult, method: Method, params: MethodParams) -> Result<SpectralFlowReport, SflowError> {
    let mut report = SpectralFlowReport::from_raw(raw.value, method, params)?;
    if !raw.converged {
        report.warnings.push(format!("quadrature stopped at error estimate {:.2e}", raw.error));
    }
    report.quadrature = Some(raw);
    Ok(report)
}

/// The α integral over a path, without any closure requirement.
pub fn alpha_integral(path: &UnitaryPath, n: u32, quad: &QuadSpec) -> Result<QuadResult, SflowError> {
    integrate_along(path, quad, |u, du| alpha_density(u, du, n))
}

pub fn beta_integral(path: &UnitaryPath, r: f64, quad: &QuadSpec) -> Result<QuadResult, SflowError> {
    integrate_along(path, quad, |u, du| beta_density(u, du, r))
}

pub fn sf_alpha(path: &UnitaryPath, n: u32, quad: &QuadSpec) -> Result<SpectralFlowReport, SflowError> {
    check_n(path, n)?;
    require_closed(path)?;
    let raw = alpha_integral(path, n, quad)?;
    finish(raw, Method::Alpha, MethodParams { n: Some(n), quad: Some(*quad), ..Default::default() })
}

pub fn sf_beta(path: &UnitaryPath, r: f64, quad: &QuadSpec) -> Result<SpectralFlowReport, SflowError> {
    check_r(path, r)?;
    require_closed(path)?;
    let raw = beta_integral(path, r, quad)?;
    finish(raw, Method::Beta, MethodParams { r: Some(r), quad: Some(*quad), ..Default::default() })
}

/// Winding of `Det_p` along a closed path.
pub fn sf_det(path: &UnitaryPath, p: u32, quad: &QuadSpec) -> Result<SpectralFlowReport, SflowError> {
    if p == 0 || (p as f64) < path.schatten_order() {
        return Err(SflowError::InvalidParameter(format!(
            "determinant order {p} below the Schatten order {}",
            path.schatten_order()
        )));
    }
    require_closed(path)?;
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let raw = integrate_along(path, quad, |u, du| logderiv_from(u, du, p) / two_pi_i)?;
    finish(raw, Method::Det, MethodParams { p: Some(p), quad: Some(*quad), ..Default::default() })
}

/// `Θ(U) = (−1)^n/(2πi) ∫_0^1 Tr(Y(e^{tY} − Id)^n) dt` with `Y` the principal log.
pub fn theta_endpoint(u: &ComplexMatrix, n: u32, quad: &QuadSpec) -> Result<Complex64, SflowError> {
    let eig = eig_unitary(u)?;
    let s = sign(n) / Complex64::new(0.0, 2.0 * PI);
    let r = crate::quad::integrate_ok(
        |t| {
            eig.angles
                .iter()
                .map(|&th| Complex64::new(0.0, th) * (Complex64::from_polar(1.0, t * th) - 1.0).powu(n))
                .sum::<Complex64>()
                * s
        },
        0.0,
        1.0,
        &[],
        quad,
    );
    Ok(r.value)
}

/// `Ξ(U) = ∫_0^1 Tr(Y|e^{tY} − Id|^{2r}) dt`; multiply by [`beta_normalization`] to pair with β.
pub fn xi_endpoint(u: &ComplexMatrix, r: f64, quad: &QuadSpec) -> Result<Complex64, SflowError> {
    let eig = eig_unitary(u)?;
    let res = crate::quad::integrate_ok(
        |t| {
            eig.angles
                .iter()
                .map(|&th| {
                    let m = (Complex64::from_polar(1.0, t * th) - 1.0).norm();
                    let w = if r == 0.0 { 1.0 } else { m.powf(2.0 * r) };
                    Complex64::new(0.0, th * w)
                })
                .sum::<Complex64>()
        },
        0.0,
        1.0,
        &[],
        quad,
    );
    Ok(res.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    Alpha(u32),
    Beta(f64),
}

/// Geodesic caps `e^{tY}` into the start and `e^{(1−t)Z}` out of the end.
pub fn capped_path(path: &UnitaryPath) -> Result<UnitaryPath, SflowError> {
    if path.interval() != Interval::Unit {
        return Err(SflowError::UnboundedInterval);
    }
    let (u0, u1) = (path.start(), path.end());
    let y = principal_log_from(&eig_unitary_tol(&u0, path.unitary_tol())?);
    let z = principal_log_from(&eig_unitary_tol(&u1, path.unitary_tol())?);
    for (log, u) in [(&y, &u0), (&z, &u1)] {
        let defect = op_norm(&(expm_skew(log) - u));
        if defect > 1e-9 {
            return Err(SflowError::CapMismatch { defect });
        }
    }
    let v = UnitaryPath::geodesic(&y).with_schatten_order(path.schatten_order());
    let w = UnitaryPath::geodesic(&z).reverse()?;
    let vu = UnitaryPath::concatenate(&v, path)?;
    Ok(UnitaryPath::concatenate(&vu, &w)?)
}

/// Spectral flow of an open path closed by principal-log geodesic caps.
///
/// `value` is the partition count of the capped loop; `raw` is the integral
/// of the chosen form over the path plus the endpoint corrections. The
/// result depends on the matrix representing each endpoint when that
/// endpoint has `−1` as an eigenvalue.
pub fn sf_open_path(
    path: &UnitaryPath,
    reg: Regularization,
    quad: &QuadSpec,
    phillips: &PhillipsSpec,
) -> Result<SpectralFlowReport, SflowError> {
    match reg {
        Regularization::Alpha(n) => check_n(path, n)?,
        Regularization::Beta(r) => check_r(path, r)?,
    }
    let capped = capped_path(path)?;
    let count = sf_phillips(&capped, phillips)?;
    let (u0, u1) = (path.start(), path.end());
    let (integral, c0, c1) = match reg {
        Regularization::Alpha(n) => {
            (alpha_integral(path, n, quad)?, theta_endpoint(&u0, n, quad)?, theta_endpoint(&u1, n, quad)?)
        }
        Regularization::Beta(r) => {
            let norm = beta_normalization(r);
            (beta_integral(path, r, quad)?, xi_endpoint(&u0, r, quad)? * norm, xi_endpoint(&u1, r, quad)? * norm)
        }
    };
    let raw = integral.value + c0 - c1;
    let residual = (raw - Complex64::new(count.value as f64, 0.0)).norm();
    if residual >= REJECT_RESIDUAL {
        return Err(SflowError::NonConvergent { raw, residual });
    }
    let mut warnings = count.warnings.clone();
    if residual >= ACCEPT_RESIDUAL {
        warnings.push(format!("integral route is {residual:.3} from the partition count"));
    }
    if !integral.converged {
        warnings.push(format!("quadrature stopped at error estimate {:.2e}", integral.error));
    }
    let (n, r) = match reg {
        Regularization::Alpha(n) => (Some(n), None),
        Regularization::Beta(r) => (None, Some(r)),
    };
    Ok(SpectralFlowReport {
        value: count.value,
        raw,
        residual,
        method: Method::OpenPath,
        parameters: MethodParams { n, r, quad: Some(*quad), phillips: Some(*phillips), ..Default::default() },
        warnings,
        certificate: count.certificate,
        quadrature: Some(integral),
        components: vec![
            ("integral".into(), integral.value),
            ("start_correction".into(), c0),
            ("end_correction".into(), c1),
        ],
    })
}

/// Eigenangle curves on a uniform grid, continued across samples by nearest matching.
pub fn track_angles(path: &UnitaryPath, samples: usize) -> Result<Vec<(f64, Vec<f64>)>, SflowError> {
    let (lo, hi) = path.interval().bounds();
    if !hi.is_finite() || !lo.is_finite() {
        return Err(SflowError::UnboundedInterval);
    }
    let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(samples + 1);
    let mut prev: Option<matcore::EigenAngleSet> = None;
    for j in 0..=samples {
        let t = lo + (hi - lo) * j as f64 / samples.max(1) as f64;
        let eig = eig_unitary_tol(&path.sample(t), path.unitary_tol())?;
        let ordered = match &prev {
            None => eig.clone(),
            Some(p) => {
                let perm = match_angles(p, &eig);
                let angles = perm.iter().map(|&k| eig.angles[k]).collect();
                let mut vectors = eig.vectors.clone();
                for (i, &k) in perm.iter().enumerate() {
                    vectors.set_column(i, &eig.vectors.column(k));
                }
                matcore::EigenAngleSet { angles, vectors }
            }
        };
        out.push((t, ordered.angles.clone()));
        prev = Some(ordered);
    }
    Ok(out)
}
