//! Compactly supported real potentials and their file format.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::ScatterError;
use crate::quad::gauss_legendre;

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Constant value `v` on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub v: f64,
}

/// Piecewise constant, or smooth through a callable on `[lo, hi]`.
#[derive(Clone)]
enum Shape {
    Segments(Vec<Segment>),
    Smooth { lo: f64, hi: f64, f: Profile, label: String },
}

impl Shape {
    fn value(&self, x: f64) -> f64 {
        match self {
            Shape::Segments(s) => s.iter().find(|g| x >= g.start && x < g.end).map_or(0.0, |g| g.v),
            Shape::Smooth { lo, hi, f, .. } => {
                if x < *lo || x > *hi {
                    0.0
                } else {
                    f(x)
                }
            }
        }
    }

    /// Points where `V` may be non-smooth, sorted, spanning the support.
    fn knots(&self) -> Vec<f64> {
        let mut k = match self {
            Shape::Segments(s) => s.iter().flat_map(|g| [g.start, g.end]).collect::<Vec<_>>(),
            Shape::Smooth { lo, hi, .. } => vec![*lo, *hi],
        };
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    /// `∫ w(x) g(V(x)) dx` over the support; exact for segments.
    fn moment<W: Fn(f64) -> f64, G: Fn(f64) -> f64>(&self, w: W, g: G) -> f64 {
        let (x, wt) = gauss_legendre(24);
        let mut total = 0.0;
        for pair in self.knots().windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let pieces = match self {
                Shape::Segments(_) => 1,
                Shape::Smooth { .. } => 64,
            };
            let h = (b - a) / pieces as f64;
            for p in 0..pieces {
                let c = a + (p as f64 + 0.5) * h;
                for (xi, wi) in x.iter().zip(&wt) {
                    let y = c + 0.5 * h * xi;
                    total += 0.5 * h * wi * w(y) * g(self.value(y));
                }
            }
        }
        total
    }

    fn validate(&self, lower: f64) -> Result<(), ScatterError> {
        match self {
            Shape::Segments(s) => {
                let mut prev = lower;
                for g in s {
                    if !(g.start.is_finite() && g.end.is_finite() && g.v.is_finite()) {
                        return Err(ScatterError::InvalidPotential("non-finite segment".into()));
                    }
                    if g.end <= g.start || g.start < prev {
                        return Err(ScatterError::InvalidPotential(format!(
                            "segments must be ordered and disjoint, got [{}, {}]",
                            g.start, g.end
                        )));
                    }
                    prev = g.end;
                }
                Ok(())
            }
            Shape::Smooth { lo, hi, .. } => {
                if lo < &lower || hi <= lo || !hi.is_finite() {
                    return Err(ScatterError::InvalidPotential(format!("bad support [{lo}, {hi}]")));
                }
                Ok(())
            }
        }
    }
}

/// Real potential on the line vanishing outside `[−a, a]`.
#[derive(Clone)]
pub struct Potential1D {
    shape: Shape,
}

impl fmt::Debug for Potential1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Segments(s) => f.debug_struct("Potential1D").field("segments", s).finish(),
            Shape::Smooth { lo, hi, label, .. } => {
                f.debug_struct("Potential1D").field("support", &(lo, hi)).field("profile", label).finish()
            }
        }
    }
}

impl Potential1D {
    pub fn zero() -> Self {
        Potential1D { shape: Shape::Segments(Vec::new()) }
    }

    pub fn from_segments(mut segments: Vec<Segment>) -> Result<Self, ScatterError> {
        segments.retain(|s| s.v != 0.0);
        let shape = Shape::Segments(segments);
        shape.validate(f64::NEG_INFINITY)?;
        Ok(Potential1D { shape })
    }

    /// `V = −depth` on `[−halfwidth, halfwidth]`.
    pub fn square_well(depth: f64, halfwidth: f64) -> Result<Self, ScatterError> {
        Self::from_segments(vec![Segment { start: -halfwidth, end: halfwidth, v: -depth }])
    }

    pub fn barrier(height: f64, start: f64, end: f64) -> Result<Self, ScatterError> {
        Self::from_segments(vec![Segment { start, end, v: height }])
    }

    /// Smooth profile on `[lo, hi]`, zero outside.
    pub fn smooth<F>(lo: f64, hi: f64, label: &str, f: F) -> Result<Self, ScatterError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let shape = Shape::Smooth { lo, hi, f: Arc::new(f), label: label.to_string() };
        shape.validate(f64::NEG_INFINITY)?;
        Ok(Potential1D { shape })
    }

    /// Linear interpolation of samples `(x_i, v_i)`.
    pub fn from_grid(x: Vec<f64>, v: Vec<f64>) -> Result<Self, ScatterError> {
        let f = interpolant(&x, &v)?;
        Self::smooth(x[0], x[x.len() - 1], "grid", f)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.shape.value(x)
    }

    /// Smallest `a` with the support inside `[−a, a]`.
    pub fn support(&self) -> f64 {
        self.shape.knots().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.shape, Shape::Segments(s) if s.is_empty())
    }

    pub fn segments(&self) -> Option<&[Segment]> {
        match &self.shape {
            Shape::Segments(s) => Some(s),
            Shape::Smooth { .. } => None,
        }
    }

    /// Points where `V` may jump, sorted.
    pub fn knots(&self) -> Vec<f64> {
        self.shape.knots()
    }

    /// `∫ V dx`.
    pub fn integral(&self) -> f64 {
        self.shape.moment(|_| 1.0, |v| v)
    }

    /// `∫ V² dx`.
    pub fn integral_sq(&self) -> f64 {
        self.shape.moment(|_| 1.0, |v| v * v)
    }

    /// Mean of `V` over `[x0, x1]`.
    pub fn cell_average(&self, x0: f64, x1: f64) -> f64 {
        cell_average(&self.shape, x0, x1)
    }
}

/// Real radial potential on `ℝ³` vanishing for `r > R`.
#[derive(Clone)]
pub struct RadialPotential {
    shape: Shape,
}

impl fmt::Debug for RadialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Segments(s) => f.debug_struct("RadialPotential").field("shells", s).finish(),
            Shape::Smooth { hi, label, .. } => {
                f.debug_struct("RadialPotential").field("radius", hi).field("profile", label).finish()
            }
        }
    }
}

impl RadialPotential {
    pub fn zero() -> Self {
        RadialPotential { shape: Shape::Segments(Vec::new()) }
    }

    /// Shells `(r0, r1, v)` with `0 ≤ r0 < r1`.
    pub fn from_shells(mut shells: Vec<Segment>) -> Result<Self, ScatterError> {
        shells.retain(|s| s.v != 0.0);
        let shape = Shape::Segments(shells);
        shape.validate(0.0)?;
        Ok(RadialPotential { shape })
    }

    /// `V = −depth` for `r < radius`.
    pub fn ball(depth: f64, radius: f64) -> Result<Self, ScatterError> {
        Self::from_shells(vec![Segment { start: 0.0, end: radius, v: -depth }])
    }

    pub fn smooth<F>(radius: f64, label: &str, f: F) -> Result<Self, ScatterError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let shape = Shape::Smooth { lo: 0.0, hi: radius, f: Arc::new(f), label: label.to_string() };
        shape.validate(0.0)?;
        Ok(RadialPotential { shape })
    }

    pub fn from_grid(r: Vec<f64>, v: Vec<f64>) -> Result<Self, ScatterError> {
        if r.first().is_some_and(|&r0| r0 > 0.0) {
            return Err(ScatterError::InvalidPotential("radial grid must start at r = 0".into()));
        }
        let f = interpolant(&r, &v)?;
        Self::smooth(r[r.len() - 1], "grid", f)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.shape.value(r)
    }

    pub fn radius(&self) -> f64 {
        self.shape.knots().last().copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.shape, Shape::Segments(s) if s.is_empty())
    }

    /// Depth and radius when the potential is a single constant ball.
    pub fn as_ball(&self) -> Option<(f64, f64)> {
        match &self.shape {
            Shape::Segments(s) if s.len() == 1 && s[0].start == 0.0 => Some((-s[0].v, s[0].end)),
            _ => None,
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        self.shape.knots()
    }

    /// `∫_{ℝ³} V`.
    pub fn integral(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.shape.moment(|r| r * r, |v| v)
    }

    /// `∫_{ℝ³} V²`.
    pub fn integral_sq(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.shape.moment(|r| r * r, |v| v * v)
    }

    pub fn cell_average(&self, r0: f64, r1: f64) -> f64 {
        cell_average(&self.shape, r0, r1)
    }
}

fn cell_average(shape: &Shape, x0: f64, x1: f64) -> f64 {
    match shape {
        Shape::Segments(s) => {
            let overlap: f64 =
                s.iter().map(|g| (g.end.min(x1) - g.start.max(x0)).max(0.0) * g.v).sum();
            overlap / (x1 - x0)
        }
        Shape::Smooth { .. } => {
            // Simpson on the cell
            (shape.value(x0) + 4.0 * shape.value(0.5 * (x0 + x1)) + shape.value(x1)) / 6.0
        }
    }
}

fn interpolant(x: &[f64], v: &[f64]) -> Result<impl Fn(f64) -> f64 + Send + Sync + 'static, ScatterError> {
    if x.len() != v.len() || x.len() < 2 {
        return Err(ScatterError::InvalidPotential("grid needs matching x and v with at least two points".into()));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) || x.iter().chain(v).any(|z| !z.is_finite()) {
        return Err(ScatterError::InvalidPotential("grid must be finite and strictly increasing".into()));
    }
    let (x, v) = (x.to_vec(), v.to_vec());
    Ok(move |t: f64| {
        let i = x.partition_point(|&xi| xi <= t).clamp(1, x.len() - 1);
        let s = (t - x[i - 1]) / (x[i] - x[i - 1]);
        v[i - 1] + s * (v[i] - v[i - 1])
    })
}

/// A potential read from a specification file.
#[derive(Debug, Clone)]
pub enum PotentialSpec {
    Line(Potential1D),
    Radial(RadialPotential),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridTable {
    x: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    dimension: u32,
    support: Option<f64>,
    segments: Option<Vec<[f64; 3]>>,
    grid: Option<GridTable>,
}

impl PotentialSpec {
    /// Parses the TOML form:
    ///
    /// ```toml
    /// dimension = 1
    /// support = 1.0
    /// segments = [[-1.0, 1.0, -20.0]]
    /// ```
    ///
    /// or a `[grid]` table with arrays `x` and `v`. For `dimension = 3` the
    /// first coordinate is the radius.
    pub fn parse(text: &str) -> Result<Self, ScatterError> {
        let raw: SpecFile = toml::from_str(text).map_err(|e| ScatterError::Parse(e.to_string()))?;
        let segs = raw
            .segments
            .map(|s| s.into_iter().map(|[start, end, v]| Segment { start, end, v }).collect::<Vec<_>>());
        let spec = match (raw.dimension, segs, raw.grid) {
            (1, Some(s), None) => PotentialSpec::Line(Potential1D::from_segments(s)?),
            (1, None, Some(g)) => PotentialSpec::Line(Potential1D::from_grid(g.x, g.v)?),
            (3, Some(s), None) => PotentialSpec::Radial(RadialPotential::from_shells(s)?),
            (3, None, Some(g)) => PotentialSpec::Radial(RadialPotential::from_grid(g.x, g.v)?),
            (1 | 3, _, _) => {
                return Err(ScatterError::Parse("give exactly one of `segments` or `grid`".into()));
            }
            (d, _, _) => return Err(ScatterError::UnsupportedDimension(d)),
        };
        if let Some(a) = raw.support {
            let actual = match &spec {
                PotentialSpec::Line(p) => p.support(),
                PotentialSpec::Radial(p) => p.radius(),
            };
            if actual > a * (1.0 + 1e-12) {
                return Err(ScatterError::InvalidPotential(format!(
                    "data reach {actual}, beyond the declared support {a}"
                )));
            }
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ScatterError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScatterError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn dimension(&self) -> u32 {
        match self {
            PotentialSpec::Line(_) => 1,
            PotentialSpec::Radial(_) => 3,
        }
    }
}
