//! Exact solutions for a constant growth rate and the explicit family built
//! on `u0 = -x^2`, `R = 1`. Extinct values are `None`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hj_solver::golden_section_max;
use crate::profile::ProfileSpec;

/// Half-width used when no bounded domain is supplied.
const DEFAULT_HALF_WIDTH: f64 = 50.0;
const SCAN_POINTS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstRateProblem {
    pub rate: f64,
    pub u0: ProfileSpec,
    pub u_m: f64,
    /// Interval on which supports are computed.
    pub domain: (f64, f64),
}

impl ConstRateProblem {
    pub fn new(rate: f64, u0: ProfileSpec, u_m: f64) -> Result<Self> {
        Self::on_domain(rate, u0, u_m, (-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH))
    }

    pub fn on_domain(rate: f64, u0: ProfileSpec, u_m: f64, domain: (f64, f64)) -> Result<Self> {
        if !(u_m < 0.0) {
            return Err(Error::InvalidParameter(format!("u_m = {u_m} must be negative")));
        }
        if !rate.is_finite() || !(domain.0 < domain.1) {
            return Err(Error::InvalidParameter("rate must be finite and the domain non-empty".into()));
        }
        u0.validate()?;
        Ok(ConstRateProblem { rate, u0, u_m, domain })
    }

    /// The support `{u0 > u_m}` as closed intervals.
    pub fn support(&self) -> Vec<(f64, f64)> {
        self.u0.superlevel_intervals(self.u_m, true, self.domain.0, self.domain.1)
    }

    /// Checks that `{u0 >= u_m}` is the closure of `{u0 > u_m}` at grid
    /// resolution: every node with `u0 >= u_m` is within `dx` of one with
    /// `u0 > u_m`.
    pub fn check_closure(&self, grid: &Grid) -> Result<()> {
        let vals: Vec<f64> = grid.nodes().iter().map(|&x| self.u0.eval(x)).collect();
        for (i, &v) in vals.iter().enumerate() {
            if v < self.u_m {
                continue;
            }
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(vals.len() - 1);
            if !(lo..=hi).any(|j| vals[j] > self.u_m) {
                return Err(Error::Validation(format!(
                    "u0 touches u_m at x = {} without exceeding it nearby",
                    grid.node(i)
                )));
            }
        }
        Ok(())
    }

    /// `sup_{y in intervals} { u0(y) - |x-y|^2/(4t) } + R t`.
    fn sup_over(&self, intervals: &[(f64, f64)], x: f64, t: f64) -> Option<f64> {
        let objective = |y: f64| self.u0.eval(y) - (x - y) * (x - y) / (4.0 * t);
        let best = intervals
            .iter()
            .map(|&(a, b)| match self.u0 {
                ProfileSpec::Quadratic { curvature, center, .. } if curvature >= 0.0 => {
                    let y = ((x + 4.0 * t * curvature * center) / (1.0 + 4.0 * t * curvature)).clamp(a, b);
                    objective(y)
                }
                _ => interval_sup(&objective, a, b),
            })
            .fold(f64::NEG_INFINITY, f64::max);
        best.is_finite().then_some(best + self.rate * t)
    }
}

fn interval_sup(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        return f(a);
    }
    let h = (b - a) / SCAN_POINTS as f64;
    let (k, _) = (0..=SCAN_POINTS)
        .map(|k| (k, f(a + k as f64 * h)))
        .fold((0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    let lo = a + k.saturating_sub(1) as f64 * h;
    let hi = (a + (k + 1) as f64 * h).min(b);
    let (_, v) = golden_section_max(f, lo, hi);
    v.max(f(a)).max(f(b))
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time t = {t} must be positive")))
    }
}

/// Value after one constrained iteration at threshold margin `delta`:
/// the Hopf-Lax supremum over `{u0 > u_m - delta}`, kept where it exceeds
/// `u_m - delta`.
pub fn const_rate_u_delta(p: &ConstRateProblem, delta: f64, x: f64, t: f64) -> Result<Option<f64>> {
    check_time(t)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    let level = p.u_m - delta;
    let intervals = p.u0.superlevel_intervals(level, true, p.domain.0, p.domain.1);
    Ok(p.sup_over(&intervals, x, t).filter(|&v| v > level))
}

/// Limit value: the Hopf-Lax supremum over `{u0 >= u_m}`, kept where it is
/// at least `u_m`.
pub fn const_rate_u(p: &ConstRateProblem, x: f64, t: f64) -> Result<Option<f64>> {
    check_time(t)?;
    let intervals = p.u0.superlevel_intervals(p.u_m, false, p.domain.0, p.domain.1);
    Ok(p.sup_over(&intervals, x, t).filter(|&v| v >= p.u_m))
}

/// `t - x^2/(1+4t)`: the unconstrained solution for `u0 = -x^2`, `R = 1`.
pub fn u1_neg_square(x: f64, t: f64) -> f64 {
    t - x * x / (1.0 + 4.0 * t)
}

/// `u1_neg_square` truncated to `{u1 >= u_m}`.
pub fn tilde_u(x: f64, t: f64, u_m: f64) -> Result<Option<f64>> {
    check_time(t)?;
    let v = u1_neg_square(x, t);
    Ok((v >= u_m).then_some(v))
}

/// The constrained solution for `u0 = -x^2`, `R = 1`, in explicit form.
pub fn breve_u(x: f64, t: f64, u_m: f64) -> Result<Option<f64>> {
    check_time(t)?;
    let s = 1.0 + 4.0 * t;
    if -x * x / (s * s) >= u_m {
        let v = u1_neg_square(x, t);
        return Ok((v >= u_m).then_some(v));
    }
    // maximizer pinned to the edge of the support on the side of x
    let edge = (-u_m).sqrt();
    let d = if x > 0.0 { x - edge } else { x + edge };
    let reach = d * d / (4.0 * t);
    Ok((t >= reach).then(|| t - reach + u_m))
}

/// `u1_neg_square` truncated to `{u1 >= eta}`; requires `eta >= u_m`.
pub fn w_eta(x: f64, t: f64, eta: f64, u_m: f64) -> Result<Option<f64>> {
    check_time(t)?;
    if eta < u_m {
        return Err(Error::InvalidParameter(format!("truncation level {eta} lies below u_m = {u_m}")));
    }
    let v = u1_neg_square(x, t);
    Ok((v >= eta).then_some(v))
}
