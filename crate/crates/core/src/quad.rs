//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex integrands,
//! plus Gauss–Legendre rules for Nyström discretizations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { abs_tol: 1e-9, rel_tol: 0.0, max_subdivisions: 10_000 }
    }
}

impl QuadSpec {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        QuadSpec { abs_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
    pub converged: bool,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<E, F>(f: &mut F, a: f64, b: f64) -> Result<Panel, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [Complex64::new(0.0, 0.0); 15];
    fv[7] = f(center)?;
    for j in 0..7 {
        let dx = half * XGK[j];
        fv[j] = f(center - dx)?;
        fv[14 - j] = f(center + dx)?;
    }
    let mut k = fv[7] * WGK[7];
    let mut g = fv[7] * WG[3];
    for j in 0..7 {
        let pair = fv[j] + fv[14 - j];
        k += pair * WGK[j];
        if j % 2 == 1 {
            g += pair * WG[j / 2];
        }
    }
    // error model of QUADPACK's qk15, applied to the complex modulus
    let mean = k * 0.5;
    let mut resasc = WGK[7] * (fv[7] - mean).norm();
    let mut resabs = WGK[7] * fv[7].norm();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[j] - mean).norm() + (fv[14 - j] - mean).norm());
        resabs += WGK[j] * (fv[j].norm() + fv[14 - j].norm());
    }
    let half_abs = half.abs();
    resasc *= half_abs;
    resabs *= half_abs;
    let mut error = ((k - g) * half).norm();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(floor);
    }
    let value = k * half;
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[a, b]`. Each entry of `breakpoints` strictly inside
/// the interval starts a new panel, so integrable kinks there cost nothing.
pub fn integrate<E, F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], spec: &QuadSpec) -> Result<QuadResult, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    let mut cuts: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breakpoints.iter().copied().filter(|&t| t > a && t < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod(&mut f, w[0], w[1])?);
            evaluations += 15;
        }
    }
    let mut subdivisions = 0;
    // panels too narrow to split stay here, their error still counts
    let mut frozen: Vec<Panel> = Vec::new();
    let mut value: Complex64 = heap.iter().map(|p| p.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        if subdivisions % 64 == 0 {
            // refresh running sums against drift
            value = heap.iter().chain(frozen.iter()).map(|p| p.value).sum();
            error = heap.iter().chain(frozen.iter()).map(|p| p.error).sum();
        }
        let target = spec.abs_tol.max(spec.rel_tol * value.norm());
        if error <= target || subdivisions >= spec.max_subdivisions || heap.is_empty() {
            value = heap.iter().chain(frozen.iter()).map(|p| p.value).sum();
            error = heap.iter().chain(frozen.iter()).map(|p| p.error).sum();
            return Ok(QuadResult {
                value,
                error,
                evaluations,
                subdivisions,
                converged: error <= target,
            });
        }
        let worst = heap.pop().expect("heap checked non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-14 * (b - a).abs() {
            frozen.push(worst);
            if heap.is_empty() {
                subdivisions = spec.max_subdivisions;
            }
            continue;
        }
        let left = kronrod(&mut f, worst.a, mid)?;
        let right = kronrod(&mut f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        evaluations += 30;
        subdivisions += 1;
    }
}

/// Convenience wrapper for infallible integrands.
pub fn integrate_ok<F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], spec: &QuadSpec) -> QuadResult
where
    F: FnMut(f64) -> Complex64,
{
    match integrate::<std::convert::Infallible, _>(|t| Ok(f(t)), a, b, breakpoints, spec) {
        Ok(r) => r,
        Err(e) => match e {},
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` via Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate_ok(|t| Complex64::new(t.powi(5), 3.0 * t * t), 0.0, 2.0, &[], &QuadSpec::default());
        assert_relative_eq!(r.value.re, 64.0 / 6.0, epsilon = 1e-13);
        assert_relative_eq!(r.value.im, 8.0, epsilon = 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn kink_at_breakpoint() {
        let f = |t: f64| Complex64::new((t - 0.3).abs(), 0.0);
        let r = integrate_ok(f, 0.0, 1.0, &[0.3], &QuadSpec::default());
        assert_relative_eq!(r.value.re, 0.5 * (0.09 + 0.49), epsilon = 1e-14);
        assert_eq!(r.subdivisions, 0);
    }

    #[test]
    fn oscillatory_phase_integral() {
        let r = integrate_ok(|t| Complex64::from_polar(1.0, 2.0 * PI * 7.0 * t), 0.0, 1.0, &[], &QuadSpec::default());
        assert!(r.value.norm() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_is_approached() {
        // no extrapolation: bisection alone gets within the width floor
        let r = integrate_ok(|t| Complex64::new(1.0 / t.sqrt(), 0.0), 0.0, 1.0, &[], &QuadSpec::default());
        assert_relative_eq!(r.value.re, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn legendre_rules() {
        for n in [1, 2, 5, 16, 40] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            // exact for degree 2n-1
            let deg = 2 * n - 2;
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            assert_relative_eq!(s, 2.0 / (deg as f64 + 1.0), epsilon = 1e-13);
        }
    }
}
