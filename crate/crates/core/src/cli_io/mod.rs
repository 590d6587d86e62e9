//! Command-line surface: configuration, table builders and file output.
//!
//! Exit codes: 0 success, 1 runtime failure or (with `--require-convergence`) a
//! divergence-only outcome, 2 usage error.

pub mod config;
pub mod svg;
pub mod table;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;

use crate::error::EosError;
use crate::fixed_point::toy::{toy_run, Schedule, ToyParams};
use crate::fixed_point::{
    aux_stationary_points, aux_two_periodic, composed_residual, fixed_points, jacobian_spectrum, two_periodic_points,
    MapParams, PeriodicKind, PeriodicPair,
};
use crate::model::{generate_dataset, Dataset, HyperParams, Termination};
use crate::regime::{simulate, sweep_alpha, sweep_eta, ClassifyConfig, Outcome, Regime, RegimeReport, RunContext};
use crate::reparam::{diagnostics, project_to_quadruplet, reduce};

pub use config::{Flags, Format, GridSpec, Mode, RunConfig};
use svg::{Panel, Style};
pub use table::{Cell, Table};

pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "t",
    "r",
    "loss",
    "sharpness",
    "eta_times_sharpness",
    "beta_1",
    "beta_2",
    "a",
    "a_prime",
    "b",
    "b_prime",
    "alpha_diag",
    "s",
];
pub const REPORT_COLUMNS: [&str; 10] =
    ["regime", "termination", "steps", "tau", "t0", "frak_t", "eos_crossing", "max_eta_sharpness", "rate", "error_norm"];
pub const PHASE_COLUMNS: [&str; 6] = ["axis1", "axis2", "regime", "error_norm", "t0", "frak_t"];
pub const TOY_COLUMNS: [&str; 4] = ["t", "r", "alpha", "beta"];
pub const ANALYSIS_COLUMNS: [&str; 12] = [
    "kind",
    "index",
    "r",
    "s",
    "real_flag",
    "composed_residual",
    "lambda1_re",
    "lambda1_im",
    "lambda2_re",
    "lambda2_im",
    "spectral_radius",
    "trace",
];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn usage(e: EosError) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// The files a command produced and whether the outcome was divergence only.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub divergence_only: bool,
}

pub fn dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    match cfg.generated {
        Some((d, n, k)) => generate_dataset(d, n, k, cfg.seed).map_err(usage),
        None => Ok(Dataset::two_dim(cfg.x, cfg.mu)),
    }
}

fn hyper(cfg: &RunConfig, eta: f64, alpha: f64) -> HyperParams {
    let mut hp = HyperParams::new(eta, alpha).with_max_steps(cfg.steps);
    hp.rng_seed = cfg.seed;
    hp
}

fn diverged(t: Termination) -> bool {
    matches!(t, Termination::Diverged | Termination::NonFinite)
}

/// One row per recorded step. `r` is the residual of the first sample.
pub fn trajectory_table(out: &Outcome, data: &Dataset) -> Table {
    let log = &out.log;
    let basis = RunContext::for_dataset(data, log.eta).basis;
    let mut t = Table::new("trajectory", TRAJECTORY_COLUMNS.to_vec());
    t.meta.push(("regime".into(), out.report.regime().label()));
    t.meta.push(("termination".into(), log.termination.as_str().into()));
    for step in 0..log.len() {
        let w = log.weights_at(step);
        let beta = w.map(|w| w.beta());
        let coord = |i: usize| Cell::opt(beta.as_ref().and_then(|b| b.get(i).copied()));
        let quad = match (&basis, w) {
            (Some(ctx), Some(w)) => project_to_quadruplet(w, ctx).ok().map(|q| (q, ctx)),
            _ => None,
        };
        let sh = log.sharpness[step];
        let mut row = vec![
            Cell::Int(step as i64),
            Cell::Num(log.residuals_at(step)[0]),
            Cell::Num(log.loss[step]),
            Cell::opt(sh),
            Cell::opt(sh.map(|s| s * log.eta)),
            coord(0),
            coord(1),
        ];
        match quad {
            Some((q, ctx)) => row.extend([
                Cell::Num(q.a),
                Cell::Num(q.a_prime),
                Cell::Num(q.b),
                Cell::Num(q.b_prime),
                Cell::Num(diagnostics(&q, ctx).alpha),
                Cell::Num(reduce(&q, ctx).s),
            ]),
            None => row.extend(std::iter::repeat_n(Cell::Empty, 6)),
        }
        t.push(row);
    }
    t
}

fn report_cells(r: &RegimeReport) -> Vec<Cell> {
    vec![
        Cell::Text(r.regime().label()),
        Cell::Text(r.termination.as_str().into()),
        Cell::Int(r.steps as i64),
        Cell::opt_int(r.tau),
        Cell::opt_int(r.t0),
        Cell::opt_int(r.frak_t),
        Cell::opt_int(r.eos_crossing),
        Cell::opt(r.max_eta_sharpness),
        Cell::opt(r.rate),
        Cell::opt(r.error_norm),
    ]
}

pub fn report_table(kind: &'static str, axis: &'static str, values: &[f64], reports: &[RegimeReport]) -> Table {
    let mut cols = vec![axis];
    cols.extend(REPORT_COLUMNS);
    let mut t = Table::new(kind, cols);
    for (v, r) in values.iter().zip(reports) {
        let mut row = vec![Cell::Num(*v)];
        row.extend(report_cells(r));
        t.push(row);
    }
    t
}

/// Regime labels over `eta x axis2`, where `axis2` is the input coordinate `x` or `alpha`.
pub fn phase_diagram_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let etas = cfg.grid_eta.as_ref().map(GridSpec::values).unwrap_or_default();
    let (axis2, second) = match (&cfg.grid_x, &cfg.grid_alpha) {
        (Some(g), _) => ("x", g.values()),
        (None, Some(g)) => ("alpha", g.values()),
        _ => return Err(CliError::Usage("phase-diagram needs a second axis".into())),
    };
    let cells = etas.len() * second.len();
    if cells > cfg.grid_budget {
        return Err(CliError::Usage(format!(
            "grid of {} x {} = {cells} runs exceeds the budget of {} (raise --grid-budget)",
            etas.len(),
            second.len(),
            cfg.grid_budget
        )));
    }
    let base = dataset(cfg)?;
    let ccfg = ClassifyConfig::default();
    let reports = (0..cells)
        .into_par_iter()
        .map(|i| {
            let (eta, v) = (etas[i / second.len()], second[i % second.len()]);
            let (data, alpha) = if axis2 == "x" { (Dataset::two_dim(v, cfg.mu), cfg.alpha) } else { (base.clone(), v) };
            simulate(&data, cfg.init, &hyper(cfg, eta, alpha), &ccfg).map(|o| o.report)
        })
        .collect::<crate::Result<Vec<_>>>()
        .map_err(runtime)?;
    let mut t = Table::new("phase_diagram", PHASE_COLUMNS.to_vec());
    t.meta.push(("axis1".into(), "eta".into()));
    t.meta.push(("axis2".into(), axis2.into()));
    for (i, r) in reports.iter().enumerate() {
        t.push(vec![
            Cell::Num(etas[i / second.len()]),
            Cell::Num(second[i % second.len()]),
            Cell::Text(r.regime().label()),
            Cell::opt(r.error_norm),
            Cell::opt_int(r.t0),
            Cell::opt_int(r.frak_t),
        ]);
    }
    Ok(t)
}

/// `steps` rows starting at `r_0`, so zero steps leaves only the header.
pub fn toy_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = ToyParams {
        alpha: Schedule::parse(&cfg.toy_alpha).map_err(usage)?,
        beta: Schedule::parse(&cfg.toy_beta).map_err(usage)?,
        r0: cfg.toy_r0,
    };
    let run = toy_run(&p, cfg.steps).map_err(usage)?;
    let mut t = Table::new("toy", TOY_COLUMNS.to_vec());
    if let Some(l) = run.limits {
        t.meta.push(("even_limit".into(), format!("{:?}", l.even)));
        t.meta.push(("odd_limit".into(), format!("{:?}", l.odd)));
    }
    for i in 0..cfg.steps {
        t.push(vec![Cell::Int(i as i64), Cell::Num(run.r[i]), Cell::Num(run.alpha[i]), Cell::Num(run.beta[i])]);
    }
    Ok(t)
}

/// Closed-form periodic points of the reduced map and their spectra.
pub fn analysis_table(mu: f64, eta: f64, x: f64) -> Result<Table, CliError> {
    let p = MapParams::new(mu, eta, x);
    let mut t = Table::new("analysis", ANALYSIS_COLUMNS.to_vec());
    t.meta.push(("mu_eta".into(), format!("{:?}", p.mu_eta())));
    t.meta.push(("bucket".into(), format!("{:?}", p.bucket())));
    let mut sets: Vec<(&str, PeriodicPair)> = Vec::new();
    sets.push(("fixed", fixed_points(&p).map_err(usage)?));
    sets.push(("two_cycle", two_periodic_points(&p).map_err(usage)?));
    let (lo, hi) = aux_stationary_points(&p);
    sets.push((
        "aux_fixed",
        PeriodicPair { kind: PeriodicKind::Fixed, points: vec![(lo, 0.0), (hi, 0.0)], real_flag: true },
    ));
    if let Some((a, b)) = aux_two_periodic(&p) {
        sets.push((
            "aux_two_cycle",
            PeriodicPair { kind: PeriodicKind::TwoCycle, points: vec![(a, 0.0), (b, 0.0)], real_flag: true },
        ));
    }
    for (kind, set) in &sets {
        let cyc = composed_residual(set, &p);
        for (i, &(r, s)) in set.points.iter().enumerate() {
            let sp = jacobian_spectrum((r, s), &p);
            t.push(vec![
                Cell::Text((*kind).into()),
                Cell::Int(i as i64),
                Cell::Num(r),
                Cell::Num(s),
                Cell::Text(set.real_flag.to_string()),
                Cell::Num(cyc),
                Cell::Num(sp.lambda1.0),
                Cell::Num(sp.lambda1.1),
                Cell::Num(sp.lambda2.0),
                Cell::Num(sp.lambda2.1),
                Cell::Num(sp.spectral_radius),
                Cell::Num(sp.trace),
            ]);
        }
    }
    Ok(t)
}

fn series(t: &Table, x: &str, y: &str) -> Vec<(f64, f64)> {
    let (Some(cx), Some(cy)) = (t.column(x), t.column(y)) else { return vec![] };
    t.rows
        .iter()
        .filter_map(|r| {
            let num = |c: &Cell| match c {
                Cell::Num(v) => Some(*v),
                Cell::Int(v) => Some(*v as f64),
                _ => None,
            };
            Some((num(&r[cx])?, num(&r[cy])?))
        })
        .collect()
}

fn regime_rank_series(t: &Table, x: &str, y: Option<&str>) -> Vec<(String, Vec<(f64, f64)>)> {
    let cr = t.column("regime").unwrap_or(0);
    let cx = t.column(x).unwrap_or(0);
    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in &t.rows {
        let Cell::Text(label) = &row[cr] else { continue };
        let Cell::Num(xv) = row[cx] else { continue };
        let yv = match y.and_then(|c| t.column(c)) {
            Some(c) => match row[c] {
                Cell::Num(v) => v,
                _ => continue,
            },
            None => Regime::parse(label).and_then(|r| r.ladder_rank()).map_or(-1.0, f64::from),
        };
        match groups.iter_mut().find(|g| &g.0 == label) {
            Some(g) => g.1.push((xv, yv)),
            None => groups.push((label.clone(), vec![(xv, yv)])),
        }
    }
    groups
}

/// Charts derived only from the table.
pub fn svg_panels(t: &Table) -> Vec<Panel> {
    match t.kind {
        "trajectory" => {
            let beta = Panel::new("regression weights", "t")
                .with("beta_1", series(t, "t", "beta_1"), Style::Line)
                .with("beta_2", series(t, "t", "beta_2"), Style::Line);
            let mut loss = Panel::new("loss", "t").with("loss", series(t, "t", "loss"), Style::Line);
            loss.log_y = true;
            let mut sharp =
                Panel::new("eta * sharpness", "t").with("eta*S", series(t, "t", "eta_times_sharpness"), Style::Line);
            sharp.hlines.push(2.0);
            vec![beta, loss, sharp]
        }
        "toy" => {
            let r = Panel::new("r_t", "t").with("r", series(t, "t", "r"), Style::Line);
            let abs: Vec<(f64, f64)> = series(t, "t", "r").into_iter().map(|(a, b)| (a, b.abs())).collect();
            let mut env = Panel::new("|r_t|", "t").with("|r|", abs, Style::Line);
            env.log_y = true;
            let a = Panel::new("schedules", "t")
                .with("alpha", series(t, "t", "alpha"), Style::Line)
                .with("beta", series(t, "t", "beta"), Style::Line);
            vec![r, env, a]
        }
        "phase_diagram" => {
            let axis2 = t.meta.iter().find(|m| m.0 == "axis2").map_or("axis2", |m| m.1.as_str()).to_string();
            let mut p = Panel::new(&format!("regimes over (eta, {axis2})"), "eta");
            for (label, pts) in regime_rank_series(t, "axis1", Some("axis2")) {
                p = p.with(&label, pts, Style::Dots);
            }
            vec![p]
        }
        "sweep" | "classify" => {
            let axis = t.columns[0];
            let mut p = Panel::new("ladder rank", axis);
            p.log_x = true;
            for (label, pts) in regime_rank_series(t, axis, None) {
                p = p.with(&label, pts, Style::Dots);
            }
            let mut e = Panel::new("error norm", axis).with("error", series(t, axis, "error_norm"), Style::Dots);
            e.log_x = true;
            e.log_y = true;
            vec![p, e]
        }
        _ => {
            let mut p = Panel::new("periodic points", "r");
            for (label, pts) in kind_series(t) {
                p = p.with(&label, pts, Style::Dots);
            }
            vec![p]
        }
    }
}

fn kind_series(t: &Table) -> Vec<(String, Vec<(f64, f64)>)> {
    let (Some(ck), Some(cr), Some(cs)) = (t.column("kind"), t.column("r"), t.column("s")) else { return vec![] };
    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in &t.rows {
        let (Cell::Text(k), Cell::Num(r), Cell::Num(s)) = (&row[ck], &row[cr], &row[cs]) else { continue };
        match groups.iter_mut().find(|g| &g.0 == k) {
            Some(g) => g.1.push((*r, *s)),
            None => groups.push((k.clone(), vec![(*r, *s)])),
        }
    }
    groups
}

fn write_outputs(cfg: &RunConfig, stem: &str, t: &Table, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| runtime(format!("cannot create {}: {e}", cfg.out.display())))?;
    let entries = cfg.entries();
    let text = match cfg.format {
        Format::Csv => t.to_csv(&entries),
        Format::Json => t.to_json(&entries),
    };
    let path = cfg.out.join(format!("{stem}.{}", cfg.format.extension()));
    write_file(&path, &text)?;
    files.push(path);
    if cfg.svg {
        let mut comments = vec![table::GENERATOR.to_string()];
        comments.extend(entries.iter().map(|(k, v)| format!("config: {k} = {v}")));
        let path = cfg.out.join(format!("{stem}.svg"));
        write_file(&path, &svg::render(&svg_panels(t), &comments))?;
        files.push(path);
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

/// Runs the configured mode and writes its files.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut files = Vec::new();
    let mut summary = Vec::new();
    let ccfg = ClassifyConfig::default();
    let mut divergence_only = false;
    match cfg.mode {
        Mode::Run | Mode::Classify => {
            let eta = cfg.eta.expect("checked on resolve");
            let data = dataset(cfg)?;
            let out = simulate(&data, cfg.init, &hyper(cfg, eta, cfg.alpha), &ccfg).map_err(runtime)?;
            divergence_only = diverged(out.log.termination);
            summary.push(format!(
                "eta={eta:?} regime={} termination={} steps={}",
                out.report.regime().label(),
                out.log.termination.as_str(),
                out.report.steps
            ));
            let (t, stem) = if cfg.mode == Mode::Run {
                (trajectory_table(&out, &data), format!("trajectory_eta{eta:?}"))
            } else {
                (report_table("classify", "eta", &[eta], &[out.report]), format!("classify_eta{eta:?}"))
            };
            write_outputs(cfg, &stem, &t, &mut files)?;
        }
        Mode::Sweep => {
            let data = dataset(cfg)?;
            let base = hyper(cfg, cfg.eta.unwrap_or(1.0), cfg.alpha);
            let sweep = match (&cfg.grid_eta, &cfg.grid_alpha) {
                (Some(g), _) => sweep_eta(&data, cfg.init, &base, &g.values(), &ccfg),
                (None, Some(g)) => sweep_alpha(&data, cfg.init, &base, &g.values(), &ccfg),
                _ => unreachable!("checked on resolve"),
            }
            .map_err(runtime)?;
            let axis: &'static str = if sweep.axis_name == "eta" { "eta" } else { "alpha" };
            divergence_only = sweep.reports.iter().all(|r| diverged(r.termination));
            let t = report_table("sweep", axis, &sweep.axis, &sweep.reports);
            for (v, r) in sweep.axis.iter().zip(&sweep.reports) {
                summary.push(format!("{axis}={v:?} regime={}", r.regime().label()));
            }
            write_outputs(cfg, &format!("sweep_{axis}"), &t, &mut files)?;
        }
        Mode::PhaseDiagram => {
            let t = phase_diagram_table(cfg)?;
            let c = t.column("regime").expect("column exists");
            divergence_only = t.rows.iter().all(|r| r[c] == Cell::Text(Regime::Divergent.label()));
            summary.push(format!("{} cells", t.rows.len()));
            write_outputs(cfg, "phase_diagram", &t, &mut files)?;
        }
        Mode::Toy => {
            let t = toy_table(cfg)?;
            summary.push(format!("{} steps", t.rows.len()));
            write_outputs(cfg, "toy", &t, &mut files)?;
        }
        Mode::Analyze => {
            let eta = cfg.eta.expect("checked on resolve");
            let t = analysis_table(cfg.mu, eta, cfg.x)?;
            summary.push(format!("{} periodic points", t.rows.len()));
            write_outputs(cfg, &format!("analysis_eta{eta:?}"), &t, &mut files)?;
        }
    }
    Ok(Report { files, summary, divergence_only })
}

/// Parses flags (and `--config`) into a resolved configuration.
pub fn resolve_args<I, T>(args: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = Flags::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    let merged = match &flags.config {
        Some(path) => config::load_config_file(path).map_err(usage)?.overlay(&flags),
        None => flags,
    };
    RunConfig::resolve(&merged).map_err(usage)
}

/// Entry point for the binary; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    // --help and --version print through clap and exit 0
    if let Err(e) = Flags::try_parse_from(&args) {
        if !e.use_stderr() {
            let _ = e.print();
            return 0;
        }
    }
    let cfg = match resolve_args(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    match execute(&cfg) {
        Ok(rep) => {
            for line in &rep.summary {
                println!("{line}");
            }
            for f in &rep.files {
                println!("wrote {}", f.display());
            }
            if cfg.require_convergence && rep.divergence_only {
                eprintln!("error: every run diverged");
                return 1;
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
