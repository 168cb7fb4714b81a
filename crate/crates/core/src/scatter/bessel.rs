//! Spherical Bessel functions in sign/log form, so that very high and very
//! low orders neither overflow nor underflow.

/// `sign · e^{ln}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LogVal {
    pub sign: f64,
    pub ln: f64,
}

impl LogVal {
    fn new(x: f64, scale: f64) -> Self {
        LogVal { sign: x.signum(), ln: x.abs().ln() + scale }
    }

    #[cfg(test)]
    pub fn value(self) -> f64 {
        self.sign * self.ln.exp()
    }

    /// `self / other` as a plain number.
    pub fn ratio(self, other: LogVal) -> f64 {
        self.sign * other.sign * (self.ln - other.ln).exp()
    }
}

const RESCALE: f64 = 1e200;

/// `j_ℓ(x)` for `ℓ = 0..=lmax` by normalized downward (Miller) recurrence.
pub(crate) fn spherical_j(x: f64, lmax: usize) -> Vec<LogVal> {
    debug_assert!(x > 0.0);
    let top = lmax.max(x.ceil() as usize) + 30 + (10.0 * x.max(1.0)).sqrt() as usize;
    let mut out = vec![LogVal { sign: 1.0, ln: f64::NEG_INFINITY }; lmax + 1];
    let (mut above, mut cur, mut scale) = (0.0f64, 1e-30f64, 0.0f64);
    let mut raw = vec![(0.0, 0.0); lmax.min(top) + 1];
    for l in (0..=top).rev() {
        if l <= lmax {
            raw[l] = (cur, scale);
        }
        if l == 0 {
            break;
        }
        let below = (2 * l + 1) as f64 / x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > RESCALE {
            above /= RESCALE;
            cur /= RESCALE;
            scale += RESCALE.ln();
        }
    }
    // normalize against whichever of j_0, j_1 is larger
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let (reference, idx) = if j0.abs() >= j1.abs() || lmax == 0 { (j0, 0) } else { (j1, 1) };
    let r = LogVal::new(raw[idx].0, raw[idx].1);
    let target = LogVal::new(reference, 0.0);
    for (l, &(m, s)) in raw.iter().enumerate() {
        let v = LogVal::new(m, s);
        out[l] = LogVal { sign: v.sign * r.sign * target.sign, ln: v.ln - r.ln + target.ln };
    }
    out
}

/// `y_ℓ(x)` for `ℓ = 0..=lmax` by upward recurrence, which is stable for this solution.
pub(crate) fn spherical_y(x: f64, lmax: usize) -> Vec<LogVal> {
    debug_assert!(x > 0.0);
    let y0 = -x.cos() / x;
    let y1 = -x.cos() / (x * x) - x.sin() / x;
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(LogVal::new(y0, 0.0));
    if lmax == 0 {
        return out;
    }
    out.push(LogVal::new(y1, 0.0));
    let (mut prev, mut cur, mut scale) = (y0, y1, 0.0f64);
    for l in 1..lmax {
        let next = (2 * l + 1) as f64 / x * cur - prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            scale += RESCALE.ln();
        }
        out.push(LogVal::new(cur, scale));
    }
    out
}

/// `x ĵ'_ℓ(x)/ĵ_ℓ(x)` for the Riccati function `ĵ_ℓ = x j_ℓ`, from `j_{ℓ+1}/j_ℓ`.
pub(crate) fn riccati_log_derivative(l: usize, x: f64, ratio_next: f64) -> f64 {
    (l + 1) as f64 - x * ratio_next
}

/// `i_{ℓ+1}(x)/i_ℓ(x)` for `ℓ = 0..=lmax`, modified spherical Bessel functions of the first kind.
pub(crate) fn modified_i_ratios(x: f64, lmax: usize) -> Vec<f64> {
    let top = lmax.max(x.ceil() as usize) + 40 + (10.0 * x.max(1.0)).sqrt() as usize;
    let mut rho = 0.0;
    let mut out = vec![0.0; lmax + 1];
    for l in (0..=top).rev() {
        // ρ_l = i_{l+1}/i_l = 1 / ((2l+3)/x + ρ_{l+1})
        rho = 1.0 / ((2 * l + 3) as f64 / x + rho);
        if l <= lmax {
            out[l] = rho;
        }
    }
    out
}
