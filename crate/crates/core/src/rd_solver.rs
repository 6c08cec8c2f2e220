//! Solvers for the scaled reaction-diffusion problem.
//!
//! The default path works in Hopf-Cole variables, `u = eps ln n`, and splits
//! each time step into a monotone Hamiltonian substep for `|Du|^2` (a local
//! semi-Lagrangian step over the two neighbouring cells), a diffusion
//! substep, the rate substep and an exactly integrated singular sink. A direct density solver is kept for
//! cross-validation at moderate `eps`.
//!
//! Extinct nodes (at the floor) are absorbing. Next to an extinct node or a
//! domain edge only the other side is used, and diffusion sees a zero-flux
//! ghost.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{is_extinct, SpaceTimeField};
use crate::grid::Grid;
use crate::logexp::stable_logsum;
use crate::problem::{ProblemSpec, ReactionForm};

/// Upper bound on substeps per run before the solver gives up.
pub const MAX_SUBSTEPS: usize = 1_000_000;

/// Cells more than this many `eps` below the threshold are about to be
/// removed by the sink and do not enter the substep estimate.
const DYING_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionTreatment {
    Explicit,
    #[default]
    ImplicitTridiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSchemeConfig {
    pub cfl_safety: f64,
    pub diffusion_treatment: DiffusionTreatment,
    /// Lower bound for the per-step `max |Du|` estimate. Two runs sharing a
    /// bound that dominates both gradients use identical substeps.
    pub gradient_floor: f64,
}

impl Default for SplitSchemeConfig {
    fn default() -> Self {
        SplitSchemeConfig {
            cfl_safety: 0.4,
            diffusion_treatment: DiffusionTreatment::ImplicitTridiagonal,
            gradient_floor: 0.0,
        }
    }
}

impl SplitSchemeConfig {
    fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        Ok(())
    }
}

/// Exact flow of `u' = -E(u)` over `dt`, with `E` the singular sink.
///
/// Returns `floor` once the flow reaches `-inf` (finite-time extinction).
pub fn reaction_substep(
    u: f64,
    dt: f64,
    eps: f64,
    u_m: f64,
    gamma: f64,
    form: ReactionForm,
    floor: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    Ok(sink_flow(u, dt, eps, u_m, gamma, form, floor))
}

#[inline]
fn sink_flow(u: f64, dt: f64, eps: f64, u_m: f64, gamma: f64, form: ReactionForm, floor: f64) -> f64 {
    if is_extinct(u, floor) {
        return floor;
    }
    let beta = 1.0 - gamma;
    // E(u) = exp((a u_m - beta u)/eps); both forms share this expression so
    // that they coincide bit-for-bit at gamma = 1/2.
    let a = match form {
        ReactionForm::ThresholdPreserving => beta,
        ReactionForm::DensityPower => gamma,
    };
    let k = beta / eps;
    // w = exp(beta u/eps) decreases linearly; r is the fraction consumed.
    let r = k * dt * ((a * u_m - beta * u) / eps).exp();
    if r >= 1.0 {
        return floor;
    }
    (u + (-r).ln_1p() / k).max(floor)
}

/// Output of a Hopf-Cole solve with per-step diagnostics.
#[derive(Debug, Clone)]
pub struct RdRun {
    pub field: SpaceTimeField,
    /// CFL substeps used for each grid step.
    pub substeps: Vec<usize>,
    /// Extinct nodes after each grid step.
    pub extinct_cells: Vec<usize>,
}

/// Solves the Hopf-Cole form of the singular reaction-diffusion equation.
pub fn solve_viscous_hj(problem: &ProblemSpec, grid: &Grid, scheme: &SplitSchemeConfig) -> Result<RdRun> {
    run_split(problem, grid, scheme, true)
}

/// Same scheme with the singular sink switched off.
pub fn solve_simplified(problem: &ProblemSpec, grid: &Grid, scheme: &SplitSchemeConfig) -> Result<RdRun> {
    run_split(problem, grid, scheme, false)
}

fn run_split(problem: &ProblemSpec, grid: &Grid, scheme: &SplitSchemeConfig, with_sink: bool) -> Result<RdRun> {
    problem.validate(grid)?;
    scheme.validate()?;
    let floor = problem.u_floor;
    let eps = problem.epsilon;
    let dx = grid.dx();
    let rate = problem.rate.sample(grid)?.values;
    let mut u = problem.u0.sample(grid)?.values;
    for v in &mut u {
        *v = v.max(floor);
    }

    let mut field = SpaceTimeField::filled(*grid, floor, floor);
    field.set_row(0, &u);
    let mut substeps = Vec::with_capacity(grid.nt);
    let mut extinct_cells = Vec::with_capacity(grid.nt);
    let mut total = 0usize;

    for k in 1..=grid.nt {
        let cutoff = if with_sink { problem.u_m - DYING_MARGIN * eps } else { f64::NEG_INFINITY };
        let g = max_gradient(&u, dx, floor, cutoff).max(scheme.gradient_floor);
        let mut n = (grid.dt() * 2.0 * g / dx / scheme.cfl_safety).ceil().max(1.0);
        if scheme.diffusion_treatment == DiffusionTreatment::Explicit {
            n = n.max((eps * grid.dt() / (dx * dx) / (0.5 * scheme.cfl_safety)).ceil());
        }
        if !n.is_finite() || n as usize > MAX_SUBSTEPS || total + n as usize > MAX_SUBSTEPS {
            return Err(Error::CflExceeded { needed: total.saturating_add(n as usize), limit: MAX_SUBSTEPS });
        }
        let n = n as usize;
        total += n;
        let h = grid.dt() / n as f64;
        for _ in 0..n {
            gradient_substep(&mut u, h, dx, floor);
            match scheme.diffusion_treatment {
                DiffusionTreatment::Explicit => explicit_diffusion(&mut u, eps * h / (dx * dx), floor),
                DiffusionTreatment::ImplicitTridiagonal => implicit_diffusion(&mut u, eps * h / (dx * dx), floor),
            }
            u.par_iter_mut().zip(rate.par_iter()).for_each(|(v, r)| {
                if !is_extinct(*v, floor) {
                    *v = (*v + h * r).max(floor);
                }
            });
            if with_sink {
                let (u_m, gamma, form) = (problem.u_m, problem.gamma, problem.reaction_form);
                u.par_iter_mut().for_each(|v| *v = sink_flow(*v, h, eps, u_m, gamma, form, floor));
            }
        }
        field.set_row(k, &u);
        substeps.push(n);
        extinct_cells.push(field.extinct_count(k));
    }
    Ok(RdRun { field, substeps, extinct_cells })
}

/// Largest difference quotient between live neighbours that are both above
/// `cutoff`.
fn max_gradient(u: &[f64], dx: f64, floor: f64, cutoff: f64) -> f64 {
    u.windows(2)
        .filter(|w| !is_extinct(w[0], floor) && !is_extinct(w[1], floor) && w[0].min(w[1]) >= cutoff)
        .map(|w| ((w[1] - w[0]) / dx).abs())
        .fold(0.0, f64::max)
}

/// `max_y { u(y) - |x_i - y|^2/(4h) }` over the cell between node `i` and a
/// neighbour at value `side`, on the linear interpolant.
#[inline]
pub(crate) fn cell_hopf_lax(center: f64, side: f64, h: f64, dx: f64) -> f64 {
    let slope = (side - center) / dx;
    // distance from x_i towards the neighbour, clamped to the cell
    let s = (2.0 * h * slope).clamp(0.0, dx);
    center + slope * s - s * s / (4.0 * h)
}

/// One step of `u_t = |Du|^2`: upwind when `2 h max|Du| <= dx`, monotone
/// for every `h`.
fn gradient_substep(u: &mut [f64], h: f64, dx: f64, floor: f64) {
    let old = u.to_vec();
    let n = old.len();
    u.par_iter_mut().enumerate().for_each(|(i, v)| {
        if is_extinct(old[i], floor) {
            return;
        }
        let mut best = old[i];
        for j in [i.wrapping_sub(1), i + 1] {
            if j < n && !is_extinct(old[j], floor) {
                best = best.max(cell_hopf_lax(old[i], old[j], h, dx));
            }
        }
        *v = best;
    });
}

/// Largest downhill difference a diffusion link transmits. Extinct
/// neighbours count as a full drop, which is the limit of a neighbour whose
/// density vanishes, so the step stays monotone across extinction.
const LINK_DROP: f64 = 1.0;

#[inline]
fn link(d: f64) -> f64 {
    d.max(-LINK_DROP)
}

fn explicit_diffusion(u: &mut [f64], lambda: f64, floor: f64) {
    let old = u.to_vec();
    let n = old.len();
    u.par_iter_mut().enumerate().for_each(|(i, v)| {
        if is_extinct(old[i], floor) {
            return;
        }
        let mut flux = 0.0;
        for j in [i.wrapping_sub(1), i + 1] {
            if j < n {
                flux += if is_extinct(old[j], floor) { -LINK_DROP } else { link(old[j] - old[i]) };
            }
        }
        *v = (old[i] + lambda * flux).max(floor);
    });
}

/// Backward Euler for the capped diffusion `u - lambda sum link(u_j - u_i) = u_old`,
/// solved exactly by policy iteration (each link is either linear or at
/// its cap). Domain edges are zero-flux; extinct rows are identity rows.
fn implicit_diffusion(u: &mut [f64], lambda: f64, floor: f64) {
    let n = u.len();
    let alive: Vec<bool> = u.iter().map(|&v| !is_extinct(v, floor)).collect();
    let old = u.to_vec();
    let capped = |x: &[f64]| -> Vec<[bool; 2]> {
        (0..n)
            .map(|i| {
                let side = |j: usize| j < n && alive[j] && alive[i] && x[j] - x[i] <= -LINK_DROP;
                [side(i.wrapping_sub(1)), side(i + 1)]
            })
            .collect()
    };
    let mut policy = capped(&old);
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    let mut x = old.clone();
    for _ in 0..4 * n + 8 {
        x.copy_from_slice(&old);
        for i in 0..n {
            lower[i] = 0.0;
            upper[i] = 0.0;
            diag[i] = 1.0;
            if !alive[i] {
                continue;
            }
            for (side, j) in [(0, i.wrapping_sub(1)), (1, i + 1)] {
                if j >= n {
                    continue;
                }
                if !alive[j] || policy[i][side] {
                    x[i] -= lambda * LINK_DROP;
                } else {
                    diag[i] += lambda;
                    if side == 0 {
                        lower[i] = -lambda;
                    } else {
                        upper[i] = -lambda;
                    }
                }
            }
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut x);
        let next = capped(&x);
        if next == policy {
            break;
        }
        policy = next;
    }
    for i in 0..n {
        u[i] = if alive[i] { x[i].max(floor) } else { old[i] };
    }
}

/// Thomas algorithm; `rhs` is overwritten with the solution.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    rhs[0] /= beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / beta;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// `v = eps ln(exp(u/eps) + exp(-A/eps))` pointwise.
pub fn aux_field_va(u: &SpaceTimeField, a: f64, eps: f64) -> Result<SpaceTimeField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {eps} must be positive")));
    }
    let floor = u.floor;
    let rows = (0..=u.grid.nt)
        .map(|k| u.row(k).iter().map(|&v| stable_logsum(v.max(floor), -a, eps)).collect())
        .collect();
    SpaceTimeField::from_rows(u.grid, floor, rows)
}

/// Direct explicit solve in density variables with reflecting boundaries.
///
/// Diffusion is explicit, the linear rate term implicit, and the square-root
/// sink integrated exactly per node.
pub fn solve_density(problem: &ProblemSpec, grid: &Grid) -> Result<SpaceTimeField> {
    problem.validate(grid)?;
    let eps = problem.epsilon;
    let u0 = problem.u0.sample(grid)?;
    let (lo, hi) = u0
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi / eps >= f64::MAX.ln() || hi / eps <= f64::MIN_POSITIVE.ln() {
        return Err(Error::Validation(format!(
            "exp(u0/eps) is not representable for max u0 = {hi}, eps = {eps}"
        )));
    }
    let _ = lo;
    let dx = grid.dx();
    let rate = problem.rate.sample(grid)?.values;
    let r_max = rate.iter().copied().fold(0.0, f64::max);

    let mut n_sub = (eps * grid.dt() / (dx * dx) / 0.4).ceil().max(1.0);
    n_sub = n_sub.max((grid.dt() * r_max / eps / 0.5).ceil());
    if n_sub as usize * grid.nt > MAX_SUBSTEPS {
        return Err(Error::CflExceeded { needed: n_sub as usize * grid.nt, limit: MAX_SUBSTEPS });
    }
    let n_sub = n_sub as usize;
    let h = grid.dt() / n_sub as f64;
    let lambda = eps * h / (dx * dx);
    let sink_speed = h * (problem.u_m / (2.0 * eps)).exp() / (2.0 * eps);

    let mut n: Vec<f64> = u0.values.iter().map(|&v| (v / eps).exp()).collect();
    let mut field = SpaceTimeField::filled(*grid, f64::NEG_INFINITY, 0.0);
    field.set_row(0, &n);
    let last = n.len() - 1;
    for k in 1..=grid.nt {
        for _ in 0..n_sub {
            let old = n.clone();
            for i in 0..=last {
                let l = if i == 0 { old[0] } else { old[i - 1] };
                let r = if i == last { old[last] } else { old[i + 1] };
                n[i] = old[i] + lambda * (l - 2.0 * old[i] + r);
            }
            for (v, r) in n.iter_mut().zip(&rate) {
                *v /= 1.0 - h * r / eps;
                let root = (v.max(0.0).sqrt() - sink_speed).max(0.0);
                *v = root * root;
            }
        }
        field.set_row(k, &n);
    }
    Ok(field)
}
