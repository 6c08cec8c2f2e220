//! Command-line experiment driver.
//!
//! Every subcommand reads one JSON configuration, writes CSV tables (and
//! optionally SVG heatmaps) into the output directory, and finishes with
//! `manifest.json`. Exit codes: 0 success, 2 configuration error, 3 scheme
//! assertion failure, 4 non-convergence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::closed_forms::{breve_u, const_rate_u, tilde_u, u1_neg_square, ConstRateProblem};
use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, SpaceTimeMask};
use crate::grid::Grid;
use crate::hj_solver::{
    backtrack_trajectory, level_collar, solve_obstacle, solve_u1, state_constraint_audit, Trajectory, U1Options,
};
use crate::iterator::{check_delay, compute_u, estimate_rho, hbar};
use crate::output::{field_table, flag, heatmap_svg, num, significant6, snapshot_rows, ArtifactWriter, Table};
use crate::problem::ProblemSpec;
use crate::profile::ProfileSpec;
use crate::rd_solver::{solve_simplified, solve_viscous_hj, RdRun, SplitSchemeConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SCHEME: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "survival-hj", version, about = "Reaction-diffusion with a survival threshold and its Hamilton-Jacobi limits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for the solvers (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write SVG heatmaps.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the scaled equation for every epsilon in the list.
    Simulate(RunArgs),
    /// Solve the first-order limit `u_t = |Du|^2 + R`.
    Eikonal(RunArgs),
    /// Solve the obstacle problem at level `-A`.
    Obstacle(RunArgs),
    /// Run the state-constrained iteration.
    Iterate(RunArgs),
    /// Evaluate the constant-rate closed forms at points.
    ClosedForm(RunArgs),
    /// Convergence table of the scaled solutions against a limit.
    Compare(RunArgs),
    /// Measure the delay estimate between shifted initial data.
    Delay(RunArgs),
    /// Check a trajectory against a constraint set.
    Audit(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Eikonal(_) => "eikonal",
            Command::Obstacle(_) => "obstacle",
            Command::Iterate(_) => "iterate",
            Command::ClosedForm(_) => "closed-form",
            Command::Compare(_) => "compare",
            Command::Delay(_) => "delay",
            Command::Audit(_) => "audit",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::Eikonal(a)
            | Command::Obstacle(a)
            | Command::Iterate(a)
            | Command::ClosedForm(a)
            | Command::Compare(a)
            | Command::Delay(a)
            | Command::Audit(a) => a,
        }
    }
}

fn default_snapshots() -> usize {
    11
}

fn default_max_iter() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Full equation with the survival sink.
    #[default]
    Viscous,
    /// Sink switched off.
    Simplified,
}

/// Limit object a scaled solution is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    U1,
    Obstacle,
    #[serde(alias = "iterated_U")]
    IteratedU,
    Breve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    /// The obstacle sits at `-level`.
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateConfig {
    /// Decreasing margins; the last one is the reported limit.
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    pub delta: f64,
    pub mu: f64,
    /// Defaults to the bound computed from `rho` and the rate minimum.
    #[serde(default)]
    pub h: Option<f64>,
    pub i_max: usize,
}

/// `[x_min, x_max, t_min, t_max]`.
pub type Window = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub target: Target,
    pub window: Window,
    #[serde(default)]
    pub exterior: Option<Window>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedFormConfig {
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// End point `(x, t)`.
    pub point: (f64, f64),
    /// Start of a straight line; without it the optimal path of the
    /// unconstrained problem is backtracked.
    #[serde(default)]
    pub start: Option<f64>,
    /// The set `{target >= u_m}` the path must stay in.
    pub constraint: Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub grid: Grid,
    /// Scales to run; empty means `problem.epsilon` alone.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Exponents to sweep in `compare`; empty means `problem.gamma` alone.
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub scheme: SplitSchemeConfig,
    #[serde(default)]
    pub u1: U1Options,
    /// Time rows written per field.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub obstacle: Option<ObstacleConfig>,
    #[serde(default)]
    pub iterate: Option<IterateConfig>,
    #[serde(default)]
    pub delay: Option<DelayConfig>,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub closed_form: Option<ClosedFormConfig>,
    #[serde(default)]
    pub audit: Option<AuditConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.grid.validate()?;
        cfg.problem.validate(&cfg.grid)?;
        for &e in &cfg.epsilons {
            cfg.problem.with_epsilon(e).validate_parameters()?;
        }
        for &g in &cfg.gammas {
            cfg.problem.with_gamma(g).validate_parameters()?;
        }
        if cfg.snapshots == 0 {
            return Err(Error::Config("snapshots must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn epsilons(&self) -> Vec<f64> {
        if self.epsilons.is_empty() {
            vec![self.problem.epsilon]
        } else {
            self.epsilons.clone()
        }
    }

    fn gammas(&self) -> Vec<f64> {
        if self.gammas.is_empty() {
            vec![self.problem.gamma]
        } else {
            self.gammas.clone()
        }
    }

    fn section<'a, T>(&self, value: &'a Option<T>, key: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::Config(format!("missing field `{key}` required by this command")))
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidGrid(_)
        | Error::InvalidProfile(_)
        | Error::InvalidParameter(_)
        | Error::Validation(_)
        | Error::Config(_)
        | Error::Json(_)
        | Error::Io(_) => EXIT_CONFIG,
        Error::NegativeDensity { .. }
        | Error::CflExceeded { .. }
        | Error::SearchRadius { .. }
        | Error::MissingArgmax { .. }
        | Error::GridMismatch(_)
        | Error::ObstacleDisagreement { .. }
        | Error::Monotonicity { .. } => EXIT_SCHEME,
    }
}

/// What a command reports besides its files.
struct Outcome {
    converged: bool,
    lines: Vec<String>,
    diagnostics: serde_json::Value,
}

impl Outcome {
    fn ok(lines: Vec<String>, diagnostics: serde_json::Value) -> Self {
        Outcome { converged: true, lines, diagnostics }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: &Command) -> Result<i32> {
    let args = command.args();
    let cfg = ExperimentConfig::load(&args.config)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut out = ArtifactWriter::create(&args.out)?;

    let outcome = pool.install(|| match command {
        Command::Simulate(_) => simulate(&cfg, &mut out, args.svg),
        Command::Eikonal(_) => eikonal(&cfg, &mut out, args.svg),
        Command::Obstacle(_) => obstacle(&cfg, &mut out, args.svg),
        Command::Iterate(_) => iterate(&cfg, &mut out, args.svg),
        Command::ClosedForm(_) => closed_form(&cfg, &mut out),
        Command::Compare(_) => compare(&cfg, &mut out),
        Command::Delay(_) => delay(&cfg, &mut out),
        Command::Audit(_) => audit(&cfg, &mut out),
    })?;

    for line in &outcome.lines {
        println!("{line}");
    }
    out.finish(command.name(), serde_json::to_value(&cfg)?, outcome.diagnostics)?;
    Ok(if outcome.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn write_field(
    out: &mut ArtifactWriter,
    cfg: &ExperimentConfig,
    stem: &str,
    field: &SpaceTimeField,
    svg: bool,
) -> Result<()> {
    let rows = snapshot_rows(field.grid.nt, cfg.snapshots);
    out.write_table(&format!("{stem}.csv"), &field_table(field, &rows))?;
    if svg {
        out.write(&format!("{stem}.svg"), &heatmap_svg(field, cfg.problem.u_m, stem))?;
    }
    Ok(())
}

fn scaled_run(cfg: &ExperimentConfig, problem: &ProblemSpec) -> Result<RdRun> {
    match cfg.model {
        Model::Viscous => solve_viscous_hj(problem, &cfg.grid, &cfg.scheme),
        Model::Simplified => solve_simplified(problem, &cfg.grid, &cfg.scheme),
    }
}

fn simulate(cfg: &ExperimentConfig, out: &mut ArtifactWriter, svg: bool) -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut diagnostics = Vec::new();
    for (j, eps) in cfg.epsilons().into_iter().enumerate() {
        let problem = cfg.problem.with_epsilon(eps);
        let run = out.timed(&format!("simulate eps={eps}"), || scaled_run(cfg, &problem))?;
        let stem = format!("simulate_{j}_eps{eps}");
        write_field(out, cfg, &stem, &run.field, svg)?;
        let mut steps = Table::new(&["step", "t", "substeps", "extinct_cells"]);
        for (k, (s, e)) in run.substeps.iter().zip(&run.extinct_cells).enumerate() {
            steps.push(vec![(k + 1).to_string(), num(cfg.grid.time(k + 1)), s.to_string(), e.to_string()]);
        }
        out.write_table(&format!("{stem}_steps.csv"), &steps)?;
        let total: usize = run.substeps.iter().sum();
        lines.push(format!("eps={eps} substeps={total} extinct_at_end={}", run.extinct_cells.last().unwrap_or(&0)));
        diagnostics.push(json!({ "epsilon": eps, "substeps": total, "max_substeps": run.substeps.iter().max() }));
    }
    Ok(Outcome::ok(lines, json!({ "runs": diagnostics })))
}

fn eikonal(cfg: &ExperimentConfig, out: &mut ArtifactWriter, svg: bool) -> Result<Outcome> {
    let run = out.timed("solve_u1", || solve_u1(&cfg.problem, &cfg.grid, &cfg.u1))?;
    write_field(out, cfg, "eikonal_u1", &run.field, svg)?;
    let last = cfg.grid.nt;
    let max = run.field.row(last).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome::ok(vec![format!("max u1 at t={} is {max}", cfg.grid.t_final)], json!({ "options": cfg.u1 })))
}

fn obstacle(cfg: &ExperimentConfig, out: &mut ArtifactWriter, svg: bool) -> Result<Outcome> {
    let level = cfg.section(&cfg.obstacle, "obstacle")?.level;
    let field = out.timed("solve_obstacle", || solve_obstacle(&cfg.problem, &cfg.grid, level))?;
    write_field(out, cfg, "obstacle", &field, svg)?;
    Ok(Outcome::ok(vec![format!("obstacle at -{level} solved")], json!({ "level": level })))
}

fn iterate(cfg: &ExperimentConfig, out: &mut ArtifactWriter, svg: bool) -> Result<Outcome> {
    let it = cfg.section(&cfg.iterate, "iterate")?;
    let limit = out.timed("compute_u", || compute_u(&cfg.problem, &cfg.grid, &it.deltas, it.mu, it.max_iter))?;
    write_field(out, cfg, "iterate_u", &limit.u, svg)?;

    let rows = snapshot_rows(cfg.grid.nt, cfg.snapshots);
    out.write_table("iterate_omega.csv", &mask_table(&limit.omega, &rows))?;
    let mut history = Table::new(&["delta", "iterations", "converged"]);
    let report = &limit.report;
    for ((d, n), c) in it.deltas.iter().zip(&report.iterations).zip(&report.converged) {
        history.push(vec![num(*d), n.to_string(), flag(*c)]);
    }
    out.write_table("iterate_history.csv", &history)?;

    let converged = report.converged.iter().all(|&c| c);
    let lines = vec![format!(
        "iterations={:?} converged={converged} max_increase={} last_gap={}",
        report.iterations, report.max_increase, report.last_gap
    )];
    let diagnostics = json!({
        "iterations": report.iterations,
        "converged": report.converged,
        "max_increase": report.max_increase,
        "last_gap": report.last_gap,
    });
    Ok(Outcome { converged, lines, diagnostics })
}

fn mask_table(mask: &SpaceTimeMask, rows: &[usize]) -> Table {
    let grid = mask.grid;
    let mut t = Table::new(&["t", "x", "inside"]);
    for &k in rows {
        for i in 0..grid.nx {
            t.push(vec![num(grid.time(k)), num(grid.node(i)), flag(mask.get(k, i))]);
        }
    }
    t
}

fn closed_form(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<Outcome> {
    let points = &cfg.section(&cfg.closed_form, "closed_form")?.points;
    let u_m = cfg.problem.u_m;
    let general = match cfg.problem.constant_rate() {
        Some(r) => Some(ConstRateProblem::new(r, cfg.problem.u0.clone(), u_m)?),
        None => None,
    };
    let mut table = Table::new(&["x", "t", "u1", "tilde", "breve", "const_rate_u"]);
    let mut lines = Vec::new();
    for &(x, t) in points {
        let tilde = tilde_u(x, t, u_m)?;
        let breve = breve_u(x, t, u_m)?;
        let general = general.as_ref().map(|p| const_rate_u(p, x, t)).transpose()?;
        let general = general.map_or_else(String::new, significant6);
        lines.push(format!("x={x} t={t} tilde={} breve={}", significant6(tilde), significant6(breve)));
        table.push(vec![
            num(x),
            num(t),
            significant6(Some(u1_neg_square(x, t))),
            significant6(tilde),
            significant6(breve),
            general,
        ]);
    }
    out.write_table("closed_form.csv", &table)?;
    Ok(Outcome::ok(lines, json!({})))
}

/// The limit object on the configured grid.
fn target_field(cfg: &ExperimentConfig, target: Target) -> Result<SpaceTimeField> {
    let (p, grid) = (&cfg.problem, &cfg.grid);
    match target {
        Target::U1 => Ok(solve_u1(p, grid, &cfg.u1)?.field),
        Target::Obstacle => solve_obstacle(p, grid, cfg.section(&cfg.obstacle, "obstacle")?.level),
        Target::IteratedU => {
            let it = cfg.section(&cfg.iterate, "iterate")?;
            Ok(compute_u(p, grid, &it.deltas, it.mu, it.max_iter)?.u)
        }
        Target::Breve => {
            if p.constant_rate() != Some(1.0) || p.u0 != ProfileSpec::neg_square() {
                return Err(Error::Config("target `breve` needs rate 1 and u0 = -x^2".into()));
            }
            let mut f = SpaceTimeField::filled(*grid, p.u_floor, p.u_floor);
            for k in 0..=grid.nt {
                for i in 0..grid.nx {
                    if let Some(v) = breve_u(grid.node(i), grid.time(k), p.u_m)? {
                        f.set(k, i, v);
                    }
                }
            }
            Ok(f)
        }
    }
}

/// Node indices `(k, i)` inside a window.
fn window_nodes(grid: &Grid, w: &Window, name: &str) -> Result<Vec<(usize, usize)>> {
    let nodes: Vec<(usize, usize)> = (0..=grid.nt)
        .filter(|&k| (w[2]..=w[3]).contains(&grid.time(k)))
        .flat_map(|k| (0..grid.nx).filter(|&i| (w[0]..=w[1]).contains(&grid.node(i))).map(move |i| (k, i)))
        .collect();
    if nodes.is_empty() {
        return Err(Error::Config(format!("{name} window {w:?} contains no grid node")));
    }
    Ok(nodes)
}

fn compare(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<Outcome> {
    let cmp = cfg.section(&cfg.compare, "compare")?;
    let grid = cfg.grid;
    let eps = cfg.epsilons();
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("epsilons must be strictly decreasing for compare".into()));
    }
    let target = out.timed("target", || target_field(cfg, cmp.target))?;
    let window = window_nodes(&grid, &cmp.window, "comparison")?;
    let collar = level_collar(&target, cfg.problem.u_m, 2);
    if let Some(&(k, i)) = window.iter().find(|&&(k, i)| collar.get(k, i) || target.is_extinct_at(k, i)) {
        return Err(Error::Config(format!(
            "comparison window reaches ({}, {}), within 2 dx of {{target = u_m}}",
            grid.node(i),
            grid.time(k)
        )));
    }
    let exterior = cmp.exterior.as_ref().map(|w| window_nodes(&grid, w, "exterior")).transpose()?;

    let gammas = cfg.gammas();
    let mut table = Table::new(&["epsilon", "gamma", "window_gap", "exterior_max", "gap_decreasing", "exterior_decreasing"]);
    let mut runs: Vec<Vec<SpaceTimeField>> = Vec::new();
    let mut converged = true;
    let mut lines = Vec::new();
    let mut substeps = Vec::new();
    for &g in &gammas {
        let mut previous: Option<(f64, Option<f64>)> = None;
        let mut per_eps = Vec::new();
        for &e in &eps {
            let problem = cfg.problem.with_epsilon(e).with_gamma(g);
            let run = out.timed("scaled runs", || scaled_run(cfg, &problem))?;
            substeps.push(run.substeps.iter().sum::<usize>());
            let gap = window.iter().map(|&(k, i)| (run.field.get(k, i) - target.get(k, i)).abs()).fold(0.0, f64::max);
            let ext = exterior
                .as_ref()
                .map(|nodes| nodes.iter().map(|&(k, i)| run.field.get(k, i)).fold(f64::NEG_INFINITY, f64::max));
            let (gap_flag, ext_flag) = match previous {
                None => ("na".to_string(), "na".to_string()),
                Some((pg, pe)) => {
                    let gd = gap < pg;
                    let ed = match (ext, pe) {
                        (Some(a), Some(b)) => Some(a <= b),
                        _ => None,
                    };
                    converged &= gd && ed.unwrap_or(true);
                    (flag(gd), ed.map_or_else(|| "na".to_string(), flag))
                }
            };
            table.push(vec![
                num(e),
                num(g),
                num(gap),
                ext.map_or_else(|| "na".to_string(), num),
                gap_flag,
                ext_flag,
            ]);
            lines.push(format!("eps={e} gamma={g} gap={gap:.6} exterior_max={}", ext.map_or("na".into(), |v| format!("{v:.6}"))));
            previous = Some((gap, ext));
            per_eps.push(run.field);
        }
        runs.push(per_eps);
    }
    out.write_table("compare_gaps.csv", &table)?;

    if gammas.len() > 1 {
        let mut spread = Table::new(&["epsilon", "max_pairwise_gap", "shrinking"]);
        let mut previous: Option<f64> = None;
        for (j, &e) in eps.iter().enumerate() {
            let mut worst = 0.0f64;
            for a in 0..gammas.len() {
                for b in a + 1..gammas.len() {
                    let (fa, fb) = (&runs[a][j], &runs[b][j]);
                    for &(k, i) in &window {
                        worst = worst.max((fa.get(k, i) - fb.get(k, i)).abs());
                    }
                }
            }
            let shrinking = previous.map(|p| worst < p);
            converged &= shrinking.unwrap_or(true);
            spread.push(vec![num(e), num(worst), shrinking.map_or_else(|| "na".to_string(), flag)]);
            lines.push(format!("eps={e} max pairwise gamma gap={worst:.6}"));
            previous = Some(worst);
        }
        out.write_table("compare_gamma_spread.csv", &spread)?;
    }
    Ok(Outcome { converged, lines, diagnostics: json!({ "substeps": substeps, "window_nodes": window.len() }) })
}

fn delay(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<Outcome> {
    let d = cfg.section(&cfg.delay, "delay")?;
    let u0 = cfg.problem.u0.sample(&cfg.grid)?;
    let rho = estimate_rho(&u0, cfg.problem.u_m, d.delta, d.mu)?;
    let a = cfg.problem.rate.sample(&cfg.grid)?.values.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = match rho {
        Some(r) if a > 0.0 => Some(hbar(d.mu, a, r)?),
        _ => None,
    };
    let h = d
        .h
        .or(bound)
        .ok_or_else(|| Error::Config("delay.h is required when the rate is not positive or rho does not exist".into()))?;
    let report = out.timed("check_delay", || check_delay(&cfg.problem, &cfg.grid, d.delta, d.mu, h, d.i_max))?;
    let mut table = Table::new(&["iterate", "gap"]);
    for (j, g) in report.gaps.iter().enumerate() {
        table.push(vec![(j + 1).to_string(), num(*g)]);
    }
    out.write_table("delay_gaps.csv", &table)?;
    let lines = vec![format!(
        "holds={} worst_gap={} h={} snapped={} rho={} hbar={}",
        report.holds,
        report.worst_gap,
        report.h,
        report.snapped,
        rho.map_or("none".into(), num),
        bound.map_or("none".into(), num)
    )];
    Ok(Outcome::ok(lines, json!({ "report": report, "rho": rho, "hbar": bound })))
}

fn audit(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<Outcome> {
    let a = cfg.section(&cfg.audit, "audit")?;
    let (x, t) = a.point;
    let traj = match a.start {
        Some(y) => Trajectory::straight_line(&cfg.grid, y, x, t, &cfg.problem.u0, &cfg.problem.rate),
        None => backtrack_trajectory(&solve_u1(&cfg.problem, &cfg.grid, &cfg.u1)?, x, t)?,
    };
    let target = target_field(cfg, a.constraint)?;
    let u_m = cfg.problem.u_m;
    let mask = SpaceTimeMask::from_fn(cfg.grid, |k, i| !target.is_extinct_at(k, i) && target.get(k, i) >= u_m);
    let report = state_constraint_audit(&traj, &mask)?;

    let mut table = Table::new(&["t", "x", "running_value"]);
    for (&(px, pt), v) in traj.samples.iter().zip(&traj.running_value) {
        table.push(vec![num(pt), num(px), num(*v)]);
    }
    out.write_table("audit_trajectory.csv", &table)?;
    let violation = report.first_violation.map_or("none".to_string(), |(vx, vt)| format!("({vx:.6}, {vt:.6})"));
    let lines = vec![format!(
        "admissible={} first_violation={violation} value={} start={:?}",
        report.admissible,
        traj.value(),
        traj.start()
    )];
    Ok(Outcome::ok(lines, json!({ "admissible": report.admissible, "checked": report.checked })))
}
