//! Exponential-scale helpers: the Hopf-Cole transform and a stable
//! `eps * ln(exp(u/eps) + exp(v/eps))`.

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;

/// `eps * ln(exp(u/eps) + exp(v/eps))` without overflow.
#[inline]
pub fn stable_logsum(u: f64, v: f64, eps: f64) -> f64 {
    let m = u.max(v);
    m + eps * (-(u - v).abs() / eps).exp().ln_1p()
}

/// `u = eps ln n`; densities below `exp(floor/eps)` map to `floor`.
pub fn hopf_cole(n: &SpaceTimeField, eps: f64, floor: f64) -> Result<SpaceTimeField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {eps} must be positive")));
    }
    let nx = n.grid.nx;
    let mut rows = Vec::with_capacity(n.grid.nt + 1);
    for k in 0..=n.grid.nt {
        let mut row = Vec::with_capacity(nx);
        for (i, &d) in n.row(k).iter().enumerate() {
            if d < 0.0 || d.is_nan() {
                return Err(Error::NegativeDensity { index: k * nx + i, value: d });
            }
            let u = if d == 0.0 { floor } else { eps * d.ln() };
            row.push(u.max(floor));
        }
        rows.push(row);
    }
    SpaceTimeField::from_rows(n.grid, floor, rows)
}

/// `n = exp(u/eps)`, extinct values map to zero.
pub fn hopf_cole_inverse(u: &SpaceTimeField, eps: f64) -> SpaceTimeField {
    let floor = u.floor;
    let rows = (0..=u.grid.nt)
        .map(|k| {
            u.row(k)
                .iter()
                .map(|&v| if v <= floor { 0.0 } else { (v / eps).exp() })
                .collect()
        })
        .collect();
    // densities carry no extinction floor
    SpaceTimeField::from_rows(u.grid, f64::NEG_INFINITY, rows).expect("same layout")
}
