//! Partial-wave scattering for radial potentials in three dimensions.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bessel::{modified_i_ratios, riccati_log_derivative, spherical_j, spherical_y, LogVal};
use super::oned::sturm_count;
use super::potential::RadialPotential;
use super::ScatterError;
use crate::matcore::principal_angle;
use crate::sflow::{SflowError, SpectralPath};

/// Phase shifts below this are treated as zero when truncating the partial-wave sum.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// `δ_ℓ ∈ (−π/2, π/2]` from the exterior Riccati data and the interior log-derivative `g = R u'/u`.
fn match_exterior(jx: &[LogVal], yx: &[LogVal], x: f64, l: usize, g: f64) -> f64 {
    let a = riccati_log_derivative(l, x, jx[l + 1].ratio(jx[l]));
    let b = riccati_log_derivative(l, x, yx[l + 1].ratio(yx[l]));
    let jy = jx[l].ratio(yx[l]);
    if !g.is_finite() {
        // node of the interior solution at R
        return (jy).atan();
    }
    let tan = jy * (a - g) / (b - g);
    if tan.is_finite() {
        tan.atan()
    } else {
        PI / 2.0
    }
}

/// Closed form for a constant ball `V = −depth` on `r < R`.
fn ball_phases(depth: f64, radius: f64, lambda: f64, lmax: usize) -> Vec<f64> {
    let k = lambda.sqrt();
    let x = k * radius;
    let jx = spherical_j(x, lmax + 1);
    let yx = spherical_y(x, lmax + 1);
    let q2 = lambda + depth;
    let interior: Vec<f64> = if q2 > 0.0 {
        let z = q2.sqrt() * radius;
        let jz = spherical_j(z, lmax + 1);
        (0..=lmax).map(|l| riccati_log_derivative(l, z, jz[l + 1].ratio(jz[l]))).collect()
    } else if q2 < 0.0 {
        let z = (-q2).sqrt() * radius;
        modified_i_ratios(z, lmax).iter().enumerate().map(|(l, rho)| (l + 1) as f64 + z * rho).collect()
    } else {
        (0..=lmax).map(|l| (l + 1) as f64).collect()
    };
    (0..=lmax).map(|l| match_exterior(&jx, &yx, x, l, interior[l])).collect()
}

/// Numerov step for energy `λ`: `min(1e−3, 1/(50√λ))`.
pub fn numerov_step(lambda: f64) -> f64 {
    if lambda > 0.0 {
        (1.0 / (50.0 * lambda.sqrt())).min(1e-3)
    } else {
        1e-3
    }
}

/// Phase shifts by Numerov integration of `u'' = (ℓ(ℓ+1)/r² + V − λ) u`.
pub fn phase_shifts_numerov(v: &RadialPotential, lambda: f64, lmax: usize) -> Result<Vec<f64>, ScatterError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ScatterError::EnergyNonpositive(lambda));
    }
    let radius = v.radius();
    if radius == 0.0 {
        return Ok(vec![0.0; lmax + 1]);
    }
    let h0 = numerov_step(lambda);
    let n_in = (radius / h0).ceil() as usize;
    let h = radius / n_in as f64;
    let n = n_in + 3;
    let pot: Vec<f64> = (0..=n)
        .map(|i| {
            let r = i as f64 * h;
            if i == 0 {
                v.value(0.0)
            } else {
                v.cell_average(r - 0.5 * h, r + 0.5 * h)
            }
        })
        .collect();
    let k = lambda.sqrt();
    let (r1, r2) = ((n - 1) as f64 * h, n as f64 * h);
    let (j1, y1) = (spherical_j(k * r1, lmax), spherical_y(k * r1, lmax));
    let (j2, y2) = (spherical_j(k * r2, lmax), spherical_y(k * r2, lmax));
    let h2 = h * h;
    let mut out = Vec::with_capacity(lmax + 1);
    for l in 0..=lmax {
        let cent = (l * (l + 1)) as f64;
        let f = |i: usize| cent / ((i as f64 * h).powi(2)) + pot[i] - lambda;
        // series start u ≈ r^{ℓ+1}(1 + c r²), scaled by (2h)^{−(ℓ+1)}
        let c = (pot[0] - lambda) / (2.0 * (2 * l + 3) as f64);
        let mut prev = 0.5f64.powi((l + 1) as i32) * (1.0 + c * h2);
        let mut cur = 1.0 + 4.0 * c * h2;
        let mut u_r1 = 0.0;
        for i in 2..n {
            let (fm, f0, fp) = (f(i - 1), f(i), f(i + 1));
            let next = (2.0 * cur * (1.0 + 5.0 * h2 * f0 / 12.0) - prev * (1.0 - h2 * fm / 12.0)) / (1.0 - h2 * fp / 12.0);
            prev = cur;
            cur = next;
            if cur.abs() > 1e200 {
                prev *= 1e-200;
                cur *= 1e-200;
                u_r1 *= 1e-200;
            }
            if i + 1 == n - 1 {
                u_r1 = cur;
            }
        }
        if !cur.is_finite() || u_r1 == 0.0 {
            return Err(ScatterError::IntegrationFailure(format!("Numerov solution degenerated for ℓ = {l}")));
        }
        let kk = cur / u_r1;
        // riccati values are x·j, x·y; the common x factors cancel in the ratios below
        let jr = kk * (r1 / r2) * j1[l].ratio(j2[l]) - 1.0;
        let yr = kk * (r1 / r2) * y1[l].ratio(y2[l]) - 1.0;
        let tan = j2[l].ratio(y2[l]) * jr / yr;
        out.push(if tan.is_finite() { tan.atan() } else { PI / 2.0 });
    }
    Ok(out)
}

/// Principal phase shifts `δ_ℓ(λ) ∈ (−π/2, π/2]`, `ℓ = 0..=lmax`.
///
/// Constant balls use the exact Riccati–Bessel matching; every other profile is integrated by Numerov.
pub fn phase_shifts_3d(v: &RadialPotential, lambda: f64, lmax: usize) -> Result<Vec<f64>, ScatterError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ScatterError::EnergyNonpositive(lambda));
    }
    if v.is_zero() {
        return Ok(vec![0.0; lmax + 1]);
    }
    match v.as_ball() {
        Some((depth, radius)) => Ok(ball_phases(depth, radius, lambda, lmax)),
        None => phase_shifts_numerov(v, lambda, lmax),
    }
}

/// Truncation order at one energy: past the turning point, the first `ℓ` with `|δ_ℓ| < 1e−8`, plus 2.
fn auto_lmax(v: &RadialPotential, lambda: f64) -> Result<(usize, Vec<f64>), ScatterError> {
    let radius = v.radius();
    let depth = v.as_ball().map_or(0.0, |(d, _)| d.max(0.0));
    let turning = ((lambda + depth).sqrt() * radius).ceil() as usize;
    // the decay past the turning point sets in over a width ~ turning^{1/3}
    let mut guess = turning + 20 + 10 * (turning as f64).cbrt().ceil() as usize;
    loop {
        let phases = phase_shifts_3d(v, lambda, guess)?;
        if let Some(l) = (turning..=guess).find(|&l| phases[l].abs() < TRUNCATION_TOL) {
            let lmax = l + 2;
            if lmax <= guess {
                return Ok((lmax, phases[..=lmax].to_vec()));
            }
        }
        if guess > 200_000 {
            return Err(ScatterError::IntegrationFailure("partial-wave sum does not truncate".into()));
        }
        guess *= 2;
    }
}

/// `S(λ)` restricted to `ℓ ≤ lmax`: eigenvalues `e^{2iδ_ℓ}` with multiplicity `2ℓ + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSMatrix {
    pub lambda: f64,
    pub phases: Vec<f64>,
}

impl RadialSMatrix {
    pub fn lmax(&self) -> usize {
        self.phases.len().saturating_sub(1)
    }

    pub fn multiplicity(l: usize) -> usize {
        2 * l + 1
    }

    /// `Σ_ℓ (2ℓ+1) f(e^{2iδ_ℓ})`.
    pub fn trace_fn<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Complex64 {
        self.phases
            .iter()
            .enumerate()
            .map(|(l, d)| f(Complex64::from_polar(1.0, 2.0 * d)) * (2 * l + 1) as f64)
            .sum()
    }

    /// `‖S − Id‖₁`.
    pub fn trace_norm_minus_id(&self) -> f64 {
        self.phases.iter().enumerate().map(|(l, d)| (2 * l + 1) as f64 * 2.0 * d.sin().abs()).sum()
    }

    /// Dimension of the truncated harmonic space.
    pub fn dim(&self) -> usize {
        self.phases.len().pow(2)
    }

    /// Dense block-diagonal matrix; only sensible for small `lmax`.
    pub fn to_matrix(&self) -> crate::matcore::ComplexMatrix {
        let entries: Vec<Complex64> = self
            .phases
            .iter()
            .enumerate()
            .flat_map(|(l, d)| std::iter::repeat_n(Complex64::from_polar(1.0, 2.0 * d), 2 * l + 1))
            .collect();
        crate::matcore::diag(&entries)
    }
}

/// Radial `S(λ)`; `lmax = None` picks the truncation automatically.
pub fn smatrix_radial(v: &RadialPotential, lambda: f64, lmax: Option<usize>) -> Result<RadialSMatrix, ScatterError> {
    let phases = match lmax {
        Some(l) => phase_shifts_3d(v, lambda, l)?,
        None => auto_lmax(v, lambda)?.1,
    };
    Ok(RadialSMatrix { lambda, phases })
}

/// Phase shifts on an energy grid, unwound in `λ` from the top energy down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftTable {
    pub energies: Vec<f64>,
    pub lmax: usize,
    /// `phases[k][ℓ] = δ_ℓ(energies[k])`, continuous in `k`.
    pub phases: Vec<Vec<f64>>,
}

impl PhaseShiftTable {
    /// Builds the table; `energies` must be increasing and positive.
    pub fn build(v: &RadialPotential, energies: &[f64], lmax: Option<usize>) -> Result<Self, ScatterError> {
        if energies.windows(2).any(|w| w[1] <= w[0]) || energies.first().is_some_and(|&e| !(e > 0.0)) {
            return Err(ScatterError::InvalidPotential("energy grid must be positive and increasing".into()));
        }
        let lmax = match lmax {
            Some(l) => l,
            None => energies
                .par_iter()
                .map(|&e| auto_lmax(v, e).map(|(l, _)| l))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .max()
                .unwrap_or(0),
        };
        let mut phases: Vec<Vec<f64>> =
            energies.par_iter().map(|&e| phase_shifts_3d(v, e, lmax)).collect::<Result<_, _>>()?;
        unwind_down(&mut phases);
        Ok(PhaseShiftTable { energies: energies.to_vec(), lmax, phases })
    }

    /// Geometric grid `[lo, hi]` with `per_decade` points per decade.
    pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
        let decades = (hi / lo).log10();
        let n = ((decades * per_decade as f64).ceil() as usize).max(1);
        (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect()
    }

    pub fn column(&self, l: usize) -> Vec<f64> {
        self.phases.iter().map(|row| row[l]).collect()
    }

    /// Largest `|δ_ℓ|` at the top order over the grid.
    pub fn truncation_residual(&self) -> f64 {
        self.phases.iter().map(|row| row[self.lmax].abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda");
        for l in 0..=self.lmax {
            let _ = write!(s, ",delta_{l}");
        }
        s.push('\n');
        for (e, row) in self.energies.iter().zip(&self.phases) {
            let _ = write!(s, "{e:.12e}");
            for d in row {
                let _ = write!(s, ",{d:.12e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Shifts each column by multiples of `π`, anchored at the last row.
fn unwind_down(phases: &mut [Vec<f64>]) {
    for k in (0..phases.len().saturating_sub(1)).rev() {
        let (lo, hi) = phases.split_at_mut(k + 1);
        for (d, above) in lo[k].iter_mut().zip(&hi[0]) {
            *d += PI * ((above - *d) / PI).round();
        }
    }
}

/// `δ_ℓ(0⁺) − δ_ℓ(∞)`, unwinding along a geometric grid from `λ_hi` down to `λ_lo`.
pub(crate) fn phase_drop(v: &RadialPotential, lmax: usize, lambda_lo: f64, lambda_hi: f64) -> Result<Vec<f64>, ScatterError> {
    let grid = PhaseShiftTable::geometric_grid(lambda_lo, lambda_hi, 40);
    let t = PhaseShiftTable::build(v, &grid, Some(lmax))?;
    // the top row sits on the branch with δ(∞) = 0, so the first row is the full drop
    Ok(t.phases[0].clone())
}

/// Regular zero-energy solution: `(u(R), u'(R), nodes in (0, R])`, with `u` rescaled freely.
fn zero_energy_radial(v: &RadialPotential, l: usize) -> (f64, f64, usize) {
    let radius = v.radius();
    let cent = (l * (l + 1)) as f64;
    let rhs = |r: f64, y: [f64; 2]| [y[1], (cent / (r * r) + v.value(r)) * y[0]];
    let mut r = 1e-6 * radius;
    // u = r^{ℓ+1} scaled by r^{−ℓ}
    let mut y = [r, (l + 1) as f64];
    let mut knots: Vec<f64> = v.knots().into_iter().filter(|&k| k > r).collect();
    knots.push(radius);
    knots.dedup();
    let mut nodes = 0;
    let mut sign = 1.0;
    for &stop in &knots {
        while r < stop {
            let h = (0.02 * r).min(1e-3 * radius.max(1.0)).min(stop - r);
            let k1 = rhs(r, y);
            let k2 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            // evaluate V inside the step so a knot at `stop` is seen from the left
            y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            r = if stop - r - h < 1e-15 * stop { stop } else { r + h };
            if y[0] != 0.0 && y[0].signum() != sign {
                nodes += 1;
                sign = y[0].signum();
            }
            let m = y[0].abs().max(y[1].abs());
            if m > 1e150 {
                y = [y[0] / m, y[1] / m];
            }
        }
    }
    (y[0], y[1], nodes)
}

/// Exterior continuation `a r^{ℓ+1} + b r^{−ℓ}`: the sign of `a` equals that of `ℓu/R + u'`.
fn growth_coefficient(l: usize, radius: f64, u: f64, du: f64) -> f64 {
    l as f64 * u / radius + du
}

/// Normalized `|ℓu(R)/R + u'(R)| R / ‖(u, Ru')‖` for `ℓ = 0..=lmax`.
pub fn resonance_statistics_3d(v: &RadialPotential, lmax: usize) -> Result<Vec<f64>, ScatterError> {
    let radius = v.radius();
    if radius == 0.0 {
        // free space: u = r^{ℓ+1} always grows, so nothing is at threshold
        return Ok(vec![1.0; lmax + 1]);
    }
    (0..=lmax)
        .map(|l| {
            let (u, du) = {
                let (u, du, _) = zero_energy_radial(v, l);
                (u, du)
            };
            let norm = u.hypot(radius * du);
            if !norm.is_finite() || norm == 0.0 {
                return Err(ScatterError::IntegrationFailure("zero-energy solution degenerated".into()));
            }
            Ok((growth_coefficient(l, radius, u, du) * radius).abs() / norm)
        })
        .collect()
}

fn fd_count(v: &RadialPotential, l: usize) -> usize {
    let n = 4096;
    let len = (20.0 * v.radius()).max(40.0);
    let h = len / (n + 1) as f64;
    let cent = (l * (l + 1)) as f64;
    let diag: Vec<f64> = (1..=n)
        .map(|i| {
            let r = i as f64 * h;
            2.0 / (h * h) + cent / (r * r) + v.cell_average(r - 0.5 * h, r + 0.5 * h)
        })
        .collect();
    sturm_count(&diag, -1.0 / (h * h))
}

/// `N_ℓ` for `ℓ = 0, 1, …` until a partial wave has no bound state (at most `lmax`).
pub fn bound_states_radial_per_l(v: &RadialPotential, lmax: usize) -> Result<Vec<usize>, ScatterError> {
    let mut out = Vec::new();
    if v.is_zero() {
        return Ok(out);
    }
    for l in 0..=lmax {
        let fd = fd_count(v, l);
        let (u, du, mut nodes) = zero_energy_radial(v, l);
        if u * growth_coefficient(l, v.radius(), u, du) < 0.0 {
            nodes += 1;
        }
        if fd != nodes {
            return Err(ScatterError::OracleDisagreement { diagonalization: fd, nodes });
        }
        if fd == 0 {
            break;
        }
        out.push(fd);
    }
    Ok(out)
}

/// `N = Σ_ℓ (2ℓ+1) N_ℓ`.
pub fn bound_states_radial(v: &RadialPotential, lmax: usize) -> Result<usize, ScatterError> {
    Ok(bound_states_radial_per_l(v, lmax)?.iter().enumerate().map(|(l, n)| (2 * l + 1) * n).sum())
}

/// `λ ↦ S(λ)` compactified by `λ = (1−s)^{−2} − 1`, optionally preceded by a
/// cap `e^{s Y}` from the identity to `S(0)` on the first half of `[0, 1]`.
pub struct RadialSPath {
    potential: RadialPotential,
    /// Principal angles of `S(0)` per partial wave.
    threshold: Vec<f64>,
    capped: bool,
}

impl RadialSPath {
    /// `threshold[ℓ]` is the principal angle of `e^{2iδ_ℓ(0⁺)}`.
    pub fn new(potential: RadialPotential, threshold: Vec<f64>) -> Self {
        let capped = threshold.iter().any(|a| *a != 0.0);
        RadialSPath { potential, threshold, capped }
    }

    pub fn is_capped(&self) -> bool {
        self.capped
    }

    pub fn energy(s: f64) -> f64 {
        (1.0 - s).powi(-2) - 1.0
    }

    fn split(&self, t: f64) -> (Option<f64>, Option<f64>) {
        if !self.capped {
            return (None, Some(t));
        }
        if t < 0.5 {
            (Some(2.0 * t), None)
        } else {
            (None, Some(2.0 * t - 1.0))
        }
    }

    /// Doubled phases `2δ_ℓ` at parameter `t`.
    pub fn angles(&self, t: f64) -> Result<Vec<f64>, ScatterError> {
        match self.split(t) {
            (Some(s), _) => Ok(self.threshold.iter().map(|a| s * a).collect()),
            (_, Some(s)) if s <= 0.0 => Ok(self.threshold.clone()),
            (_, Some(s)) if s >= 1.0 => Ok(Vec::new()),
            (_, Some(s)) => Ok(smatrix_radial(&self.potential, Self::energy(s), None)?.phases.iter().map(|d| 2.0 * d).collect()),
            _ => unreachable!("split always yields one side"),
        }
    }
}

impl SpectralPath for RadialSPath {
    type Data = Vec<f64>;

    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        if self.capped {
            vec![0.5]
        } else {
            Vec::new()
        }
    }

    fn probe(&self, t: f64) -> Result<(Vec<f64>, Vec<(f64, usize)>), SflowError> {
        let a = self.angles(t).map_err(|e| SflowError::Sampling(e.to_string()))?;
        let eig = a.iter().enumerate().map(|(l, x)| (principal_angle(*x), 2 * l + 1)).collect();
        Ok((a, eig))
    }

    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        let n = a.len().max(b.len());
        (0..n)
            .map(|l| {
                let x = a.get(l).copied().unwrap_or(0.0);
                let y = b.get(l).copied().unwrap_or(0.0);
                (Complex64::from_polar(1.0, x) - Complex64::from_polar(1.0, y)).norm()
            })
            .fold(0.0, f64::max)
    }
}
