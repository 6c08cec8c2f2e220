//! State-constrained dynamic programming on shrinking space-time sets:
//! iterates, fixpoints, the small-margin limit, shifted lower bounds and the
//! delay inequality.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{is_extinct, ScalarField, SpaceTimeField, SpaceTimeMask};
use crate::grid::Grid;
use crate::hj_solver::{hopf_lax_constant_r, region_above, solve_u1, CandidateMode, U1Options};
use crate::problem::ProblemSpec;

/// One stage of the iteration.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub index: usize,
    pub delta: f64,
    pub u: SpaceTimeField,
    pub reachable: SpaceTimeMask,
    pub omega: SpaceTimeMask,
    /// Downward shift applied to the initial data.
    pub mu: f64,
    /// Departure node per row `k >= 1` (index `k-1`); empty for the first stage.
    pub argmax: Vec<Vec<Option<usize>>>,
}

pub fn init_iteration(u1: SpaceTimeField, delta: f64, u_m: f64, mu: f64) -> Result<IterationState> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    let grid = u1.grid;
    let omega = region_above(&u1, u_m - delta);
    Ok(IterationState {
        index: 1,
        delta,
        u: u1,
        reachable: SpaceTimeMask::filled(grid, true),
        omega,
        mu,
        argmax: Vec::new(),
    })
}

/// Node checked for the segment from node `from` on row `k` to node `to` on
/// row `k + 1`: the midpoint snapped to the later row and, on a tie in
/// space, towards the arrival node.
#[inline]
pub fn segment_midpoint(from: usize, to: usize, k: usize) -> (usize, usize) {
    let sum = from + to;
    let idx = if sum % 2 == 0 || to < from { sum / 2 } else { sum / 2 + 1 };
    (k + 1, idx)
}

/// Whether the transition `(from, k) -> (to, k + 1)` stays in `mask`.
#[inline]
pub fn transition_allowed(mask: &SpaceTimeMask, from: usize, to: usize, k: usize) -> bool {
    let (mk, mi) = segment_midpoint(from, to, k);
    mask.get(k, from) && mask.get(k + 1, to) && mask.get(mk, mi)
}

/// `(value - |x-y|^2/(4 dt))`: the transition cost shared by the DP and
/// path enumeration so both use the same arithmetic.
#[inline]
pub fn transition_value(value: f64, x_from: f64, x_to: f64, dt: f64) -> f64 {
    let d = x_to - x_from;
    value - d * d / (4.0 * dt)
}

/// DP forward in time restricted to `state.omega`.
pub fn constrained_value_step(
    state: &IterationState,
    u0: &ScalarField,
    rate: &ScalarField,
    u_m: f64,
) -> Result<IterationState> {
    let grid = state.u.grid;
    if !grid.same_space(&u0.grid) || !grid.same_space(&rate.grid) {
        return Err(Error::GridMismatch("initial data or rate sampled on another grid".into()));
    }
    let floor = state.u.floor;
    let omega = &state.omega;
    let dt = grid.dt();
    let nodes = grid.nodes();
    let mut u = SpaceTimeField::filled(grid, floor, floor);
    let row0: Vec<f64> = (0..grid.nx).map(|i| if omega.get(0, i) { u0.values[i].max(floor) } else { floor }).collect();
    u.set_row(0, &row0);
    let mut argmax = Vec::with_capacity(grid.nt);
    for k in 0..grid.nt {
        let prev = u.row(k).to_vec();
        let sources: Vec<usize> = (0..grid.nx).filter(|&j| omega.get(k, j) && !is_extinct(prev[j], floor)).collect();
        let (row, arg): (Vec<f64>, Vec<Option<usize>>) = (0..grid.nx)
            .into_par_iter()
            .map(|i| {
                if !omega.get(k + 1, i) {
                    return (floor, None);
                }
                let mut best = f64::NEG_INFINITY;
                let mut best_j = None;
                for &j in &sources {
                    if !transition_allowed(omega, j, i, k) {
                        continue;
                    }
                    let c = transition_value(prev[j], nodes[j], nodes[i], dt);
                    if c > best {
                        best = c;
                        best_j = Some(j);
                    }
                }
                match best_j {
                    Some(j) => ((best + rate.values[i] * dt).max(floor), Some(j)),
                    None => (floor, None),
                }
            })
            .unzip();
        u.set_row(k + 1, &row);
        argmax.push(arg);
    }
    let reachable = SpaceTimeMask::from_fn(grid, |k, i| !u.is_extinct_at(k, i));
    let omega_new = region_above(&u, u_m - state.delta).intersect(omega)?;
    Ok(IterationState {
        index: state.index + 1,
        delta: state.delta,
        u,
        reachable,
        omega: omega_new,
        mu: state.mu,
        argmax,
    })
}

/// First iterate for data `u0 - mu`: node Hopf-Lax for a constant rate,
/// node-candidate stepping otherwise. Both are maxima over node polylines
/// containing every constrained chain, so later iterates never exceed it.
pub fn first_iterate(problem: &ProblemSpec, grid: &Grid, mu: f64) -> Result<(SpaceTimeField, ScalarField, ScalarField)> {
    problem.validate(grid)?;
    let u0 = problem.u0.sample(grid)?.shifted(-mu);
    let rate = problem.rate.sample(grid)?;
    let u1 = match problem.constant_rate() {
        Some(r) => hopf_lax_constant_r(&u0, r, None, problem.u_floor).field,
        None => {
            let opts = U1Options { mode: CandidateMode::Nodes, force_stepping: true, radius: None };
            let run = solve_u1(problem, grid, &opts)?.field;
            // the dynamics commute with a constant shift of the data
            run.map(|v| if is_extinct(v, problem.u_floor) { v } else { (v - mu).max(problem.u_floor) })
        }
    };
    Ok((u1, u0, rate))
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationSummary {
    pub index: usize,
    pub omega_count: usize,
    pub reachable_count: usize,
}

#[derive(Debug, Clone)]
pub struct Fixpoint {
    pub u: SpaceTimeField,
    pub omega: SpaceTimeMask,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationSummary>,
    /// Omega mask of every stage, first stage included.
    pub masks: Vec<SpaceTimeMask>,
}

fn summary(s: &IterationState) -> IterationSummary {
    IterationSummary { index: s.index, omega_count: s.omega.count(), reachable_count: s.reachable.count() }
}

/// Iterates until the omega mask repeats or `max_iter` stages exist.
pub fn iterate_fixpoint(problem: &ProblemSpec, grid: &Grid, delta: f64, mu: f64, max_iter: usize) -> Result<Fixpoint> {
    if max_iter < 2 {
        return Err(Error::InvalidParameter("max_iter must be at least 2".into()));
    }
    let (u1, u0, rate) = first_iterate(problem, grid, mu)?;
    let mut state = init_iteration(u1, delta, problem.u_m, mu)?;
    let mut history = vec![summary(&state)];
    let mut masks = vec![state.omega.clone()];
    let mut converged = false;
    while state.index < max_iter {
        let next = constrained_value_step(&state, &u0, &rate, problem.u_m)?;
        let same = next.omega == state.omega;
        state = next;
        history.push(summary(&state));
        masks.push(state.omega.clone());
        if same {
            converged = true;
            break;
        }
    }
    Ok(Fixpoint { u: state.u, omega: state.omega, iterations: state.index, converged, history, masks })
}

/// Largest `(b - a)^+` over nodes, with extinct values as `-inf`.
fn excess(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| {
            match (is_extinct(x, a.floor), is_extinct(y, b.floor)) {
                (_, true) => 0.0,
                (true, false) => f64::INFINITY,
                (false, false) => (y - x).max(0.0),
            }
        })
        .fold(0.0, f64::max)
}

/// Largest `|a - b|` over nodes where both are alive.
fn alive_gap(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .filter(|(&x, &y)| !is_extinct(x, a.floor) && !is_extinct(y, b.floor))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    /// Largest increase of the value when the margin shrinks.
    pub max_increase: f64,
    /// Gap between the two smallest-margin results where both are alive.
    pub last_gap: f64,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LimitRun {
    pub u: SpaceTimeField,
    pub omega: SpaceTimeMask,
    pub report: MonotonicityReport,
}

/// Runs the fixpoint for each margin in `deltas` (strictly descending);
/// the value is the smallest-margin result, the set the intersection.
pub fn compute_u(problem: &ProblemSpec, grid: &Grid, deltas: &[f64], mu: f64, max_iter: usize) -> Result<LimitRun> {
    if deltas.is_empty() || deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("margins must be non-empty and strictly descending".into()));
    }
    let runs: Vec<Fixpoint> = deltas
        .iter()
        .map(|&d| iterate_fixpoint(problem, grid, d, mu, max_iter))
        .collect::<Result<_>>()?;
    let tolerance = 3.0 * grid.dx();
    let mut max_increase: f64 = 0.0;
    for w in runs.windows(2) {
        max_increase = max_increase.max(excess(&w[0].u, &w[1].u));
    }
    if max_increase > tolerance {
        return Err(Error::Monotonicity { what: "value in the margin".into(), gap: max_increase, tolerance });
    }
    let last_gap = match runs.len() {
        1 => 0.0,
        n => alive_gap(&runs[n - 2].u, &runs[n - 1].u),
    };
    let mut omega = runs[0].omega.clone();
    for r in &runs[1..] {
        omega = omega.intersect(&r.omega)?;
    }
    let report = MonotonicityReport {
        max_increase,
        last_gap,
        iterations: runs.iter().map(|r| r.iterations).collect(),
        converged: runs.iter().map(|r| r.converged).collect(),
    };
    let last = runs.into_iter().last().expect("at least one margin");
    Ok(LimitRun { u: last.u, omega, report })
}

#[derive(Debug, Clone)]
pub struct Sandwich {
    /// Shifted-data limit plus the shift, on its own set.
    pub lower: SpaceTimeField,
    pub upper: SpaceTimeField,
    /// Set of the shifted-data limit.
    pub mask: SpaceTimeMask,
}

pub fn sandwich_bounds(problem: &ProblemSpec, grid: &Grid, mu: f64, deltas: &[f64], max_iter: usize) -> Result<Sandwich> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("shift mu = {mu} must be positive")));
    }
    if let Some(&d) = deltas.first() {
        if !(mu > 2.0 * d) {
            return Err(Error::InvalidParameter(format!("shift mu = {mu} must exceed twice the margin {d}")));
        }
    }
    let upper = compute_u(problem, grid, deltas, 0.0, max_iter)?;
    let shifted = compute_u(problem, grid, deltas, mu, max_iter)?;
    let floor = problem.u_floor;
    let lower = SpaceTimeField::from_rows(
        *grid,
        floor,
        (0..=grid.nt)
            .map(|k| {
                (0..grid.nx)
                    .map(|i| if shifted.omega.get(k, i) { shifted.u.get(k, i) + mu } else { floor })
                    .collect()
            })
            .collect(),
    )?;
    Ok(Sandwich { lower, upper: upper.u, mask: shifted.omega })
}

/// Smallest `rho = m dx` such that every node with `u0 > u_m - delta` sees
/// a value above `u_m - delta + mu` within distance `rho`; `None` when no
/// radius inside the grid works.
pub fn estimate_rho(u0: &ScalarField, u_m: f64, delta: f64, mu: f64) -> Result<Option<f64>> {
    if !(mu > delta && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("need mu > delta > 0, got mu = {mu}, delta = {delta}")));
    }
    let base = u_m - delta;
    let bar = base + mu;
    let v = &u0.values;
    let n = v.len();
    let mut worst = 0usize;
    for y in (0..n).filter(|&y| v[y] > base) {
        let found = (0..n).find(|&m| {
            let lo = y.saturating_sub(m);
            let hi = (y + m).min(n - 1);
            v[lo] > bar || v[hi] > bar
        });
        match found {
            Some(m) => worst = worst.max(m),
            None => return Ok(None),
        }
    }
    Ok(Some(worst as f64 * u0.grid.dx()))
}

/// `mu/(2a) + sqrt(mu^2/a^2 + rho^2/a)/2`.
pub fn hbar(mu: f64, a: f64, rho: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("rate lower bound a = {a} must be positive")));
    }
    Ok(mu / (2.0 * a) + 0.5 * (mu * mu / (a * a) + rho * rho / a).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct DelayReport {
    pub holds: bool,
    pub worst_gap: f64,
    /// Gap per iterate, starting at the first.
    pub gaps: Vec<f64>,
    /// Delay actually used (a multiple of `dt`).
    pub h: f64,
    pub snapped: bool,
}

/// Measures `max (u_i[u0](x,t) - u_i[u0 - mu](x, t + h))` for `i <= i_max`.
pub fn check_delay(problem: &ProblemSpec, grid: &Grid, delta: f64, mu: f64, h: f64, i_max: usize) -> Result<DelayReport> {
    if i_max < 1 || !(h >= 0.0) {
        return Err(Error::InvalidParameter("need i_max >= 1 and h >= 0".into()));
    }
    let dt = grid.dt();
    let ratio = h / dt;
    let shift = (ratio - 1e-9).ceil().max(0.0) as usize;
    let snapped = (ratio - shift as f64).abs() > 1e-9;
    if shift > grid.nt {
        return Err(Error::InvalidParameter(format!("delay {h} does not fit in t_final = {}", grid.t_final)));
    }
    let (u1, u0, rate) = first_iterate(problem, grid, 0.0)?;
    let (v1, v0, _) = first_iterate(problem, grid, mu)?;
    let mut upper = init_iteration(u1, delta, problem.u_m, 0.0)?;
    let mut lower = init_iteration(v1, delta, problem.u_m, mu)?;
    let floor = problem.u_floor;
    let gap_of = |a: &SpaceTimeField, b: &SpaceTimeField| {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..=grid.nt - shift {
            for i in 0..grid.nx {
                let x = a.get(k, i);
                if is_extinct(x, floor) {
                    continue;
                }
                let y = b.get(k + shift, i);
                let g = if is_extinct(y, floor) { f64::INFINITY } else { x - y };
                worst = worst.max(g);
            }
        }
        worst
    };
    let mut gaps = vec![gap_of(&upper.u, &lower.u)];
    for _ in 1..i_max {
        upper = constrained_value_step(&upper, &u0, &rate, problem.u_m)?;
        lower = constrained_value_step(&lower, &v0, &rate, problem.u_m)?;
        gaps.push(gap_of(&upper.u, &lower.u));
    }
    let worst_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DelayReport { holds: worst_gap <= 3.0 * grid.dx(), worst_gap, gaps, h: shift as f64 * dt, snapped })
}
