//! Analytic and tabulated one-dimensional profiles, used both for initial
//! data and for the growth rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

/// A function of one space variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { value: f64 },
    /// `peak - curvature * (x - center)^2`; `-x^2` is curvature 1, center 0, peak 0.
    Quadratic { curvature: f64, center: f64, peak: f64 },
    Linear { slope: f64, intercept: f64 },
    /// `base + amplitude * sin(frequency * x)`.
    Sine { base: f64, amplitude: f64, frequency: f64 },
    /// Sorted `(x, value)` samples, linearly interpolated and clamped outside.
    Table { points: Vec<(f64, f64)> },
}

/// Rates use the same representation as profiles.
pub type RateSpec = ProfileSpec;

impl ProfileSpec {
    /// `-x^2`.
    pub fn neg_square() -> Self {
        ProfileSpec::Quadratic { curvature: 1.0, center: 0.0, peak: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        ProfileSpec::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidProfile(format!("{what} is not finite")))
            }
        };
        match self {
            ProfileSpec::Constant { value } => finite(*value, "value"),
            ProfileSpec::Quadratic { curvature, center, peak } => {
                finite(*curvature, "curvature")?;
                finite(*center, "center")?;
                finite(*peak, "peak")
            }
            ProfileSpec::Linear { slope, intercept } => {
                finite(*slope, "slope")?;
                finite(*intercept, "intercept")
            }
            ProfileSpec::Sine { base, amplitude, frequency } => {
                finite(*base, "base")?;
                finite(*amplitude, "amplitude")?;
                finite(*frequency, "frequency")
            }
            ProfileSpec::Table { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidProfile("empty table".into()));
                }
                if points.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
                    return Err(Error::InvalidProfile("non-finite table sample".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidProfile("table abscissae must be strictly increasing".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ProfileSpec::Constant { value } => *value,
            ProfileSpec::Quadratic { curvature, center, peak } => peak - curvature * (x - center) * (x - center),
            ProfileSpec::Linear { slope, intercept } => slope * x + intercept,
            ProfileSpec::Sine { base, amplitude, frequency } => base + amplitude * (frequency * x).sin(),
            ProfileSpec::Table { points } => interpolate(points, x),
        }
    }

    /// Values at the grid nodes.
    pub fn sample(&self, grid: &Grid) -> Result<ScalarField> {
        self.validate()?;
        Ok(ScalarField::from_fn(*grid, |x| self.eval(x)))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ProfileSpec::Constant { value } => Some(*value),
            ProfileSpec::Table { points } if points.iter().all(|p| p.1 == points[0].1) => Some(points[0].1),
            _ => None,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, ProfileSpec::Table { .. })
    }

    /// Lipschitz constant of the exact profile on `[a, b]`.
    pub fn lipschitz_on(&self, a: f64, b: f64) -> f64 {
        match self {
            ProfileSpec::Constant { .. } => 0.0,
            ProfileSpec::Quadratic { curvature, center, .. } => {
                2.0 * curvature.abs() * (a - center).abs().max((b - center).abs())
            }
            ProfileSpec::Linear { slope, .. } => slope.abs(),
            ProfileSpec::Sine { amplitude, frequency, .. } => (amplitude * frequency).abs(),
            ProfileSpec::Table { points } => points
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Maximal intervals of `[lo, hi]` where the profile is above `level`
    /// (`>` when `strict`, `>=` otherwise). Endpoints are returned closed.
    pub fn superlevel_intervals(&self, level: f64, strict: bool, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let above = |v: f64| if strict { v > level } else { v >= level };
        match self {
            ProfileSpec::Constant { value } => {
                if above(*value) {
                    vec![(lo, hi)]
                } else {
                    vec![]
                }
            }
            ProfileSpec::Quadratic { curvature, center, peak } if *curvature > 0.0 => {
                let gap = peak - level;
                if gap < 0.0 || (strict && gap == 0.0) {
                    return vec![];
                }
                let half = (gap / curvature).sqrt();
                let (a, b) = ((center - half).max(lo), (center + half).min(hi));
                if a <= b {
                    vec![(a, b)]
                } else {
                    vec![]
                }
            }
            _ => scan_intervals(|x| self.eval(x), &above, lo, hi),
        }
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let j = points.partition_point(|p| p.0 <= x);
    let (x0, v0) = points[j - 1];
    let (x1, v1) = points[j];
    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
}

const SCAN_POINTS: usize = 4096;

fn scan_intervals(f: impl Fn(f64) -> f64, above: &dyn Fn(f64) -> bool, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let h = (hi - lo) / SCAN_POINTS as f64;
    let xs: Vec<f64> = (0..=SCAN_POINTS).map(|k| lo + k as f64 * h).collect();
    let inside: Vec<bool> = xs.iter().map(|&x| above(f(x))).collect();
    // refine a transition between an outside and an inside abscissa
    let edge = |out: f64, inn: f64| {
        let (mut a, mut b) = (out, inn);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if above(f(m)) {
                b = m;
            } else {
                a = m;
            }
        }
        b
    };
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    for k in 0..xs.len() {
        match (inside[k], start) {
            (true, None) => start = Some(if k == 0 { xs[0] } else { edge(xs[k - 1], xs[k]) }),
            (false, Some(s)) => {
                out.push((s, edge(xs[k], xs[k - 1])));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, hi));
    }
    out
}
