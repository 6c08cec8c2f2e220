//! The first-order limit `u_t = |Du|^2 + R`: Hopf-Lax evaluation for a
//! constant rate, Lax-Oleinik stepping for variable rates, the obstacle
//! problem, superlevel regions and trajectory backtracking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{is_extinct, ScalarField, SpaceTimeField, SpaceTimeMask};
use crate::grid::Grid;
use crate::problem::ProblemSpec;
use crate::profile::ProfileSpec;

/// Candidate set for the maximization in one dynamic-programming step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// Grid nodes only: the restricted DP over node polylines.
    Nodes,
    /// Continuous departure points on the piecewise-linear interpolant.
    #[default]
    Interpolated,
}

/// Where the maximizer of each node came from.
#[derive(Debug, Clone)]
pub enum Argmax {
    /// Departure node on the previous row, per row `k >= 1` (index `k-1`).
    Stepwise(Vec<Vec<Option<usize>>>),
    /// Departure point at `t = 0` of a straight optimal line, per row.
    Direct(Vec<Vec<Option<f64>>>),
    /// No record (interpolated stepping).
    None,
}

/// A dynamic-programming solve together with its argmax record.
#[derive(Debug, Clone)]
pub struct DpRun {
    pub field: SpaceTimeField,
    pub argmax: Argmax,
    pub rate: Vec<f64>,
}

#[inline]
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= rel_tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let best = [(a, f(a)), (b, f(b)), (c, fc), (d, fd)]
        .into_iter()
        .fold((a, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    best
}

/// Golden-section maximization on `[a, b]`, returning `(argmax, max)`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    golden_max(f, a, b, 1e-12)
}

/// `u(x,t) = max_y { u0(y) - |x-y|^2/(4t) } + R t` over grid nodes `y`.
///
/// With `refine` set to the analytic profile behind `u0`, the node argmax is
/// refined by golden section on its two neighbouring cells.
pub fn hopf_lax_constant_r(u0: &ScalarField, rate: f64, refine: Option<&ProfileSpec>, floor: f64) -> DpRun {
    let grid = u0.grid;
    let nodes = grid.nodes();
    let mut field = SpaceTimeField::filled(grid, floor, floor);
    field.set_row(0, &u0.values.iter().map(|v| v.max(floor)).collect::<Vec<_>>());
    let mut argmax = Vec::with_capacity(grid.nt);
    for k in 1..=grid.nt {
        let t = grid.time(k);
        let (row, arg): (Vec<f64>, Vec<Option<f64>>) = nodes
            .par_iter()
            .map(|&x| {
                let mut best = f64::NEG_INFINITY;
                let mut best_j = None;
                for (j, &y) in nodes.iter().enumerate() {
                    let v = u0.values[j];
                    if is_extinct(v, floor) {
                        continue;
                    }
                    let c = v - (x - y) * (x - y) / (4.0 * t);
                    if c > best {
                        best = c;
                        best_j = Some(j);
                    }
                }
                let Some(j) = best_j else { return (floor, None) };
                let mut y_best = nodes[j];
                if let Some(p) = refine {
                    let a = nodes[j.saturating_sub(1)];
                    let b = nodes[(j + 1).min(nodes.len() - 1)];
                    let (y, v) = golden_section_max(|y| p.eval(y) - (x - y) * (x - y) / (4.0 * t), a, b);
                    if v > best {
                        best = v;
                        y_best = y;
                    }
                }
                ((best + rate * t).max(floor), Some(y_best))
            })
            .unzip();
        field.set_row(k, &row);
        argmax.push(arg);
    }
    DpRun { field, argmax: Argmax::Direct(argmax), rate: vec![rate; grid.nx] }
}

/// Result of one Lax-Oleinik step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub values: Vec<f64>,
    /// Departure node (nearest node for interpolated candidates).
    pub argmax: Vec<Option<usize>>,
}

/// Default search radius `4 dt (1 + max|Du|)`.
pub fn default_radius(u: &ScalarField, dt: f64, floor: f64) -> f64 {
    4.0 * dt * (1.0 + u.lipschitz(floor))
}

/// One dynamic-programming step
/// `u(x, t+dt) = max_{|y-x| <= radius} { u(y,t) - |x-y|^2/(4 dt) } + R(x) dt`.
///
/// Extinct values never win. Fails when the maximizer sits on a window edge
/// that was cut by the radius while the next node outside is finite.
pub fn lax_oleinik_step(
    u: &ScalarField,
    rate: &ScalarField,
    dt: f64,
    radius: f64,
    mode: CandidateMode,
    floor: f64,
) -> Result<StepOutput> {
    let grid = u.grid;
    if !grid.same_space(&rate.grid) {
        return Err(Error::GridMismatch("rate and field differ in space".into()));
    }
    let dx = grid.dx();
    let nx = grid.nx;
    let reach = (radius / dx).floor().max(1.0) as usize;
    let vals = &u.values;
    let alive = |j: usize| !is_extinct(vals[j], floor);
    let out: Vec<Result<(f64, Option<usize>)>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(nx - 1);
            let mut best = f64::NEG_INFINITY;
            let mut best_y = f64::NAN;
            let mut best_j = None;
            let mut consider = |y: f64, v: f64, j: usize| {
                let c = v - (x - y) * (x - y) / (4.0 * dt);
                if c > best {
                    best = c;
                    best_y = y;
                    best_j = Some(j);
                }
            };
            match mode {
                CandidateMode::Nodes => {
                    for j in lo..=hi {
                        if alive(j) {
                            consider(grid.node(j), vals[j], j);
                        }
                    }
                }
                CandidateMode::Interpolated => {
                    for j in lo..=hi {
                        if !alive(j) {
                            continue;
                        }
                        consider(grid.node(j), vals[j], j);
                        if j < hi && alive(j + 1) {
                            let (xa, xb) = (grid.node(j), grid.node(j + 1));
                            let s = (vals[j + 1] - vals[j]) / dx;
                            let y = (x + 2.0 * s * dt).clamp(xa, xb);
                            let near = if y - xa <= xb - y { j } else { j + 1 };
                            consider(y, vals[j] + s * (y - xa), near);
                        }
                    }
                }
            }
            let Some(j) = best_j else { return Ok((floor, None)) };
            let cut_low = lo > 0 && (best_y - grid.node(lo)).abs() <= 1e-12 * dx.max(1.0) && alive(lo - 1);
            let cut_high = hi + 1 < nx && (best_y - grid.node(hi)).abs() <= 1e-12 * dx.max(1.0) && alive(hi + 1);
            if cut_low || cut_high {
                return Err(Error::SearchRadius { node: i, row: 0 });
            }
            Ok(((best + rate.values[i] * dt).max(floor), Some(j)))
        })
        .collect();
    let mut values = Vec::with_capacity(nx);
    let mut argmax = Vec::with_capacity(nx);
    for r in out {
        let (v, a) = r?;
        values.push(v);
        argmax.push(a);
    }
    Ok(StepOutput { values, argmax })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct U1Options {
    pub mode: CandidateMode,
    /// Step with Lax-Oleinik even for a constant rate.
    pub force_stepping: bool,
    /// Fixed search radius; the default is re-estimated every step.
    pub radius: Option<f64>,
}

/// Solves `u_t = |Du|^2 + R`, `u(.,0) = u0` on the grid.
pub fn solve_u1(problem: &ProblemSpec, grid: &Grid, opts: &U1Options) -> Result<DpRun> {
    problem.validate(grid)?;
    let u0 = problem.u0.sample(grid)?;
    if let (Some(r), false) = (problem.constant_rate(), opts.force_stepping) {
        let refine = problem.u0.is_analytic().then_some(&problem.u0);
        return Ok(hopf_lax_constant_r(&u0, r, refine, problem.u_floor));
    }
    let rate = problem.rate.sample(grid)?;
    step_from(&u0, &rate, grid, opts, problem.u_floor, None)
}

/// Lax-Oleinik stepping from `u0`, optionally projected onto `u >= obstacle`.
fn step_from(
    u0: &ScalarField,
    rate: &ScalarField,
    grid: &Grid,
    opts: &U1Options,
    floor: f64,
    obstacle: Option<f64>,
) -> Result<DpRun> {
    let dt = grid.dt();
    let mut field = SpaceTimeField::filled(*grid, floor, floor);
    let project = |v: f64| obstacle.map_or(v, |o| v.max(o));
    let mut cur = ScalarField::new(*grid, u0.values.iter().map(|&v| project(v.max(floor))).collect())?;
    field.set_row(0, &cur.values);
    let mut argmax = Vec::with_capacity(grid.nt);
    for k in 1..=grid.nt {
        let radius = opts.radius.unwrap_or_else(|| default_radius(&cur, dt, floor));
        let step = lax_oleinik_step(&cur, rate, dt, radius, opts.mode, floor).map_err(|e| match e {
            Error::SearchRadius { node, .. } => Error::SearchRadius { node, row: k },
            other => other,
        })?;
        cur.values = step.values.into_iter().map(project).collect();
        field.set_row(k, &cur.values);
        argmax.push(step.argmax);
    }
    let argmax = match opts.mode {
        CandidateMode::Nodes => Argmax::Stepwise(argmax),
        CandidateMode::Interpolated => Argmax::None,
    };
    Ok(DpRun { field, argmax, rate: rate.values.clone() })
}

/// Obstacle problem `min(v + A, v_t - |Dv|^2 - R) = 0`, `v(.,0) = max(u0, -A)`.
///
/// Returns the projected scheme `v <- max(step(v), -A)` after checking it
/// against `max(u1, -A)` to within `3 dx`.
pub fn solve_obstacle(problem: &ProblemSpec, grid: &Grid, a: f64) -> Result<SpaceTimeField> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("obstacle level A = {a} must be positive")));
    }
    let u1 = solve_u1(problem, grid, &U1Options::default())?;
    let reference = u1.field.map(|v| v.max(-a));
    let u0 = problem.u0.sample(grid)?;
    let rate = problem.rate.sample(grid)?;
    let projected = step_from(&u0, &rate, grid, &U1Options::default(), problem.u_floor, Some(-a))?.field;
    let gap = projected
        .values()
        .iter()
        .zip(reference.values())
        .map(|(p, r)| (p - r).abs())
        .fold(0.0, f64::max);
    let tolerance = 3.0 * grid.dx();
    if gap > tolerance {
        return Err(Error::ObstacleDisagreement { gap, tolerance });
    }
    Ok(projected)
}

/// `{u > level}` at the nodes; extinct values are never inside.
pub fn region_above(u: &SpaceTimeField, level: f64) -> SpaceTimeMask {
    SpaceTimeMask::from_fn(u.grid, |k, i| {
        let v = u.get(k, i);
        !is_extinct(v, u.floor) && v > level
    })
}

/// Nodes within `cells` spatial cells (same or adjacent rows) of a node on
/// the other side of `level`. Extinct values count as below.
pub fn level_collar(u: &SpaceTimeField, level: f64, cells: usize) -> SpaceTimeMask {
    let grid = u.grid;
    let above = |k: usize, i: usize| !u.is_extinct_at(k, i) && u.get(k, i) >= level;
    SpaceTimeMask::from_fn(grid, |k, i| {
        let side = above(k, i);
        let rows = k.saturating_sub(1)..=(k + 1).min(grid.nt);
        rows.into_iter().any(|kk| {
            (i.saturating_sub(cells)..=(i + cells).min(grid.nx - 1)).any(|ii| above(kk, ii) != side)
        })
    })
}

/// A time-ordered polyline `(x(s), s)` with its accumulated value.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(x, t)` samples with strictly increasing `t`.
    pub samples: Vec<(f64, f64)>,
    /// Cost-to-come at each sample.
    pub running_value: Vec<f64>,
}

impl Trajectory {
    pub fn value(&self) -> f64 {
        *self.running_value.last().expect("trajectory is never empty")
    }

    pub fn start(&self) -> (f64, f64) {
        self.samples[0]
    }

    /// Straight line from `(y, 0)` to `(x, t)` sampled on the grid rows,
    /// with running values for the rate `rate` and initial data `u0`.
    pub fn straight_line(grid: &Grid, y: f64, x: f64, t: f64, u0: &ProfileSpec, rate: &ProfileSpec) -> Self {
        let k_end = grid.nearest_row(t);
        let dt = grid.dt();
        let mut samples = Vec::with_capacity(k_end + 1);
        let mut running = Vec::with_capacity(k_end + 1);
        let mut acc = u0.eval(y);
        let mut prev = y;
        for k in 0..=k_end {
            let s = grid.time(k);
            let pos = y + (x - y) * s / grid.time(k_end).max(f64::MIN_POSITIVE);
            if k > 0 {
                acc += -(pos - prev) * (pos - prev) / (4.0 * dt) + rate.eval(pos) * dt;
            }
            samples.push((pos, s));
            running.push(acc);
            prev = pos;
        }
        Trajectory { samples, running_value: running }
    }
}

/// Follows the argmax record from node `(x, t)` back to `t = 0`.
pub fn backtrack_trajectory(run: &DpRun, x: f64, t: f64) -> Result<Trajectory> {
    let grid = run.field.grid;
    let i = grid.nearest_node(x);
    let k = grid.nearest_row(t);
    if run.field.is_extinct_at(k, i) {
        return Err(Error::InvalidParameter(format!("no finite value at ({x}, {t})")));
    }
    let dt = grid.dt();
    match &run.argmax {
        Argmax::Stepwise(rows) => {
            let mut chain = vec![i];
            let mut cur = i;
            for kk in (1..=k).rev() {
                cur = rows[kk - 1][cur].ok_or(Error::MissingArgmax { node: cur, row: kk })?;
                chain.push(cur);
            }
            chain.reverse();
            let mut samples = Vec::with_capacity(chain.len());
            let mut running = Vec::with_capacity(chain.len());
            let mut acc = run.field.get(0, chain[0]);
            for (kk, &j) in chain.iter().enumerate() {
                if kk > 0 {
                    let d = grid.node(j) - grid.node(chain[kk - 1]);
                    acc = (acc - d * d / (4.0 * dt)) + run.rate[j] * dt;
                }
                samples.push((grid.node(j), grid.time(kk)));
                running.push(acc);
            }
            Ok(Trajectory { samples, running_value: running })
        }
        Argmax::Direct(rows) => {
            if k == 0 {
                return Ok(Trajectory { samples: vec![(grid.node(i), 0.0)], running_value: vec![run.field.get(0, i)] });
            }
            let y = rows[k - 1][i].ok_or(Error::MissingArgmax { node: i, row: k })?;
            let x_end = grid.node(i);
            let t_end = grid.time(k);
            let rate = run.rate[i];
            let total = run.field.get(k, i);
            let start = total + (x_end - y) * (x_end - y) / (4.0 * t_end) - rate * t_end;
            let mut samples = Vec::with_capacity(k + 1);
            let mut running = Vec::with_capacity(k + 1);
            let step_cost = -(x_end - y) * (x_end - y) / (4.0 * t_end * t_end) * dt + rate * dt;
            for kk in 0..=k {
                let s = grid.time(kk);
                samples.push((y + (x_end - y) * s / t_end, s));
                running.push(start + kk as f64 * step_cost);
            }
            Ok(Trajectory { samples, running_value: running })
        }
        Argmax::None => Err(Error::MissingArgmax { node: i, row: k }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub admissible: bool,
    /// First `(x, t)` (in time order) whose snapped node is outside the mask.
    pub first_violation: Option<(f64, f64)>,
    pub checked: usize,
}

/// Checks that every sample, and the snapped midpoint of every segment,
/// lies in `mask`.
pub fn state_constraint_audit(traj: &Trajectory, mask: &SpaceTimeMask) -> Result<AuditReport> {
    let grid = mask.grid;
    let dx = grid.dx();
    let snap = |x: f64, t: f64| -> Result<(usize, usize)> {
        if x < grid.x_min - 0.5 * dx || x > grid.x_max + 0.5 * dx || t < -1e-9 || t > grid.t_final + 1e-9 {
            return Err(Error::GridMismatch(format!("trajectory point ({x}, {t}) lies outside the grid")));
        }
        Ok((grid.nearest_node(x), grid.nearest_row(t)))
    };
    for &(_, t) in &traj.samples {
        let k = grid.nearest_row(t);
        if (grid.time(k) - t).abs() > 1e-9 * grid.dt().max(1.0) {
            return Err(Error::GridMismatch(format!("sample time {t} is not a grid time")));
        }
    }
    let mut checked = 0;
    let mut points = Vec::with_capacity(2 * traj.samples.len());
    for (n, &(x, t)) in traj.samples.iter().enumerate() {
        if n > 0 {
            let (xp, tp) = traj.samples[n - 1];
            points.push((0.5 * (x + xp), 0.5 * (t + tp)));
        }
        points.push((x, t));
    }
    for (x, t) in points {
        let (i, k) = snap(x, t)?;
        checked += 1;
        if !mask.get(k, i) {
            return Ok(AuditReport { admissible: false, first_violation: Some((x, t)), checked });
        }
    }
    Ok(AuditReport { admissible: true, first_violation: None, checked })
}
