//! Regime classification, phase markers, rate and limit estimates, sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EosError, Result};
use crate::model::{run_gd, generate_dataset, Dataset, HyperParams, InitScheme, Recording, Termination, TrajectoryLog};
use crate::reparam::{diagnostics, project_to_quadruplet, BasisContext};
use crate::sharpness::eos_flag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    GradientFlow,
    EosSub,
    EosSuper,
    Periodic(usize),
    Chaotic,
    Divergent,
    /// The run ended before the tail could be read.
    Inconclusive,
}

impl Regime {
    pub fn label(&self) -> String {
        match self {
            Regime::GradientFlow => "gradient_flow".into(),
            Regime::EosSub => "eos_sub".into(),
            Regime::EosSuper => "eos_super".into(),
            Regime::Periodic(k) => format!("periodic_{k}"),
            Regime::Chaotic => "chaotic".into(),
            Regime::Divergent => "divergent".into(),
            Regime::Inconclusive => "inconclusive".into(),
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        Some(match label {
            "gradient_flow" => Regime::GradientFlow,
            "eos_sub" => Regime::EosSub,
            "eos_super" => Regime::EosSuper,
            "chaotic" => Regime::Chaotic,
            "divergent" => Regime::Divergent,
            "inconclusive" => Regime::Inconclusive,
            other => Regime::Periodic(other.strip_prefix("periodic_")?.parse().ok()?),
        })
    }

    pub fn is_eos(&self) -> bool {
        matches!(self, Regime::EosSub | Regime::EosSuper)
    }

    /// Position along the step-size ladder; periodic and chaotic share a rung.
    pub fn ladder_rank(&self) -> Option<u8> {
        match self {
            Regime::GradientFlow => Some(0),
            Regime::EosSub => Some(1),
            Regime::EosSuper => Some(2),
            Regime::Periodic(_) | Regime::Chaotic => Some(3),
            Regime::Divergent => Some(4),
            Regime::Inconclusive => None,
        }
    }
}

impl Serialize for RegimeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.label())
    }
}

/// Serializes a regime as its text label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeLabel(pub Regime);

/// Tunables of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Persistence window for `t0` and `frak_t`.
    pub window: usize,
    /// Residual pairs are counted toward alternation only above this size.
    pub sign_floor: f64,
    pub tail_len: usize,
    pub burn_fraction: f64,
    pub max_period: usize,
    pub period_tol: f64,
    /// Points below this are treated as rounding noise by the rate fit.
    pub rate_floor: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            window: 20,
            sign_floor: 1e-10,
            tail_len: 512,
            burn_fraction: 0.8,
            max_period: 64,
            period_tol: 1e-7,
            rate_floor: 1e-13,
        }
    }
}

/// What the classifier knows about the problem besides the log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunContext {
    pub eta: f64,
    /// Target size `|y|` for a single sample.
    pub mu: Option<f64>,
    /// Sign of `y`, so that `tau` is read on `sign(y) * r`.
    pub target_sign: f64,
    /// Present for one sample with `x = (1, x)`.
    pub basis: Option<BasisContext>,
}

impl RunContext {
    pub fn for_dataset(data: &Dataset, eta: f64) -> Self {
        let mut ctx = Self { eta, mu: None, target_sign: 1.0, basis: None };
        if data.n() == 1 {
            let s = &data.samples()[0];
            ctx.mu = Some(s.y.abs());
            ctx.target_sign = if s.y < 0.0 { -1.0 } else { 1.0 };
            if data.d() == 2 && s.x[0] == 1.0 {
                ctx.basis = Some(BasisContext::new(s.x[1], s.y, eta));
            }
        }
        ctx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseMarkers {
    /// First `t` with `r_t >= -mu / 2`.
    pub tau: Option<usize>,
    /// Start of `window` consecutive sign-alternating residual pairs.
    pub t0: Option<usize>,
    /// Start of `window` consecutive steps with `alpha_t > 0`.
    pub frak_t: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Least-squares slope of `ln |r_t|` per step.
    pub log_slope: f64,
    /// `exp(2 * log_slope)`.
    pub two_step_factor: f64,
    pub points: usize,
    pub converging: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: RegimeLabel,
    pub termination: Termination,
    pub steps: usize,
    pub tau: Option<usize>,
    pub t0: Option<usize>,
    pub frak_t: Option<usize>,
    pub eos_crossing: Option<usize>,
    pub max_eta_sharpness: Option<f64>,
    pub rate: Option<f64>,
    pub beta_inf: Option<Vec<f64>>,
    pub error_norm: Option<f64>,
}

impl RegimeReport {
    pub fn regime(&self) -> Regime {
        self.regime.0
    }
}

/// `r_t . r_{t+1} < 0` with both residual vectors above the floor.
fn alternates(log: &TrajectoryLog, t: usize, floor: f64) -> bool {
    let a = log.residuals_at(t);
    let b = log.residuals_at(t + 1);
    let dot: f64 = a.iter().zip(b).map(|(u, v)| u * v).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    dot < 0.0 && na.min(nb) > floor
}

fn first_persistent(n: usize, window: usize, pred: impl Fn(usize) -> bool) -> Option<usize> {
    let mut run = 0usize;
    for t in 0..n {
        if pred(t) {
            run += 1;
            if run >= window {
                return Some(t + 1 - window);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// `alpha_t` of the compact residual update along a two-dimensional run.
pub fn alpha_series(log: &TrajectoryLog, basis: &BasisContext) -> Option<Vec<f64>> {
    if log.weights.len() != log.len() {
        return None;
    }
    log.weights
        .iter()
        .map(|(_, w)| project_to_quadruplet(w, basis).ok().map(|q| diagnostics(&q, basis).alpha))
        .collect()
}

pub fn detect_phase_markers(log: &TrajectoryLog, ctx: &RunContext, cfg: &ClassifyConfig) -> PhaseMarkers {
    let len = log.len();
    let tau = match (ctx.mu, log.n) {
        (Some(mu), 1) => (0..len).find(|&t| ctx.target_sign * log.residuals[t] >= -mu / 2.0),
        _ => None,
    };
    let t0 = if len >= 2 { first_persistent(len - 1, cfg.window, |t| alternates(log, t, cfg.sign_floor)) } else { None };
    let frak_t = ctx
        .basis
        .as_ref()
        .and_then(|b| alpha_series(log, b))
        .and_then(|a| first_persistent(a.len(), cfg.window, |t| a[t] > 0.0));
    PhaseMarkers { tau, t0, frak_t }
}

/// Norm of the residual vector at each step (`|r_t|` for one sample).
pub fn residual_norms(log: &TrajectoryLog) -> Vec<f64> {
    (0..log.len()).map(|t| log.residuals_at(t).iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
}

/// Least-squares slope of `ln |r_t|` over even `t >= from`, excluding the last ten
/// steps and points under `cfg.rate_floor`.
pub fn estimate_rate(log: &TrajectoryLog, from: usize, cfg: &ClassifyConfig) -> Result<RateEstimate> {
    let norms = residual_norms(log);
    let end = norms.len().saturating_sub(10);
    let pts: Vec<(f64, f64)> = (from..end)
        .filter(|t| t % 2 == 0 && norms[*t] > cfg.rate_floor && norms[*t].is_finite())
        .map(|t| (t as f64, norms[t].ln()))
        .collect();
    if pts.len() < 10 {
        return Err(EosError::TooFewPoints(pts.len()));
    }
    let (slope, _, _) = linear_fit(&pts);
    Ok(RateEstimate {
        log_slope: slope,
        two_step_factor: (2.0 * slope).exp(),
        points: pts.len(),
        converging: slope < -1e-12,
    })
}

/// Ordinary least squares; returns `(slope, intercept, r_squared)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Limit {
    pub beta_inf: Vec<f64>,
    pub error_norm: f64,
}

/// Final regression weight and its distance to the prior.
pub fn limit_and_error(log: &TrajectoryLog, data: &Dataset) -> Result<Limit> {
    if log.termination != Termination::Converged {
        return Err(EosError::NotConverged);
    }
    let beta = log.final_state.beta();
    for (i, s) in data.samples().iter().enumerate() {
        let r: f64 = s.x.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() - s.y;
        if r.abs() >= 1e-8 {
            return Err(EosError::NotInterpolating { index: i, residual: r });
        }
    }
    let error_norm = beta.iter().zip(data.beta_star()).map(|(b, s)| (b - s).powi(2)).sum::<f64>().sqrt();
    Ok(Limit { beta_inf: beta, error_norm })
}

/// Outcome of reading the tail of a bounded run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailVerdict {
    Period(usize),
    Aperiodic,
    Decaying,
    Growing,
    TooShort,
}

/// Smallest lag `k <= max_period` with the tail repeating to `period_tol` relative.
pub fn analyse_tail(log: &TrajectoryLog, burn_in: usize, cfg: &ClassifyConfig) -> TailVerdict {
    let len = log.len();
    let start = burn_in.max(len.saturating_sub(cfg.tail_len));
    if len < start + 2 * cfg.max_period + 8 {
        return TailVerdict::TooShort;
    }
    let n = log.n;
    let tail = &log.residuals[start * n..len * n];
    let steps = len - start;
    let scale = tail.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for k in 1..=cfg.max_period {
        let mut worst = 0.0f64;
        for t in 0..steps - k {
            for i in 0..n {
                worst = worst.max((tail[(t + k) * n + i] - tail[t * n + i]).abs());
            }
        }
        if worst <= cfg.period_tol * scale {
            return TailVerdict::Period(k);
        }
    }
    let blocks = 8;
    let bl = steps / blocks;
    let maxima: Vec<f64> = (0..blocks)
        .map(|b| tail[b * bl * n..(b + 1) * bl * n].iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    if maxima.windows(2).all(|w| w[1] < w[0]) {
        TailVerdict::Decaying
    } else if maxima.windows(2).all(|w| w[1] > w[0]) {
        TailVerdict::Growing
    } else {
        TailVerdict::Aperiodic
    }
}

/// Whether `|r_{t+2}| < |r_t|` at every negative `r_t` (first sample) from `from` on, above `floor`.
pub fn envelope_contracts_after(series: &[f64], from: usize, floor: f64) -> bool {
    (from..series.len().saturating_sub(2))
        .filter(|&t| series[t] < -floor)
        .all(|t| series[t + 2].abs() < series[t].abs())
}

/// Whether `|r_{t+2}| > |r_t|` holds somewhere in `[from, until)`.
pub fn envelope_expands_between(series: &[f64], from: usize, until: usize) -> bool {
    let end = until.min(series.len().saturating_sub(2));
    (from..end).any(|t| series[t + 2].abs() > series[t].abs())
}

pub fn classify(log: &TrajectoryLog, data: &Dataset, ctx: &RunContext, cfg: &ClassifyConfig) -> RegimeReport {
    let markers = detect_phase_markers(log, ctx, cfg);
    let crossing = eos_flag(log, ctx.eta).ok().and_then(|(_, t)| t);
    let max_eta_sharpness = log
        .sharpness
        .iter()
        .flatten()
        .map(|s| s * ctx.eta)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let mut report = RegimeReport {
        regime: RegimeLabel(Regime::Inconclusive),
        termination: log.termination,
        steps: log.len(),
        tau: markers.tau,
        t0: None,
        frak_t: None,
        eos_crossing: crossing,
        max_eta_sharpness,
        rate: None,
        beta_inf: None,
        error_norm: None,
    };
    let regime = match log.termination {
        Termination::Diverged | Termination::NonFinite => Regime::Divergent,
        Termination::Converged => {
            if let Ok(lim) = limit_and_error(log, data) {
                report.beta_inf = Some(lim.beta_inf);
                report.error_norm = Some(lim.error_norm);
            }
            match (markers.t0, crossing) {
                (Some(t0), Some(_)) => {
                    report.t0 = Some(t0);
                    report.frak_t = markers.frak_t;
                    let from = markers.frak_t.map_or(t0, |f| f.max(t0));
                    report.rate = estimate_rate(log, from, cfg).ok().map(|r| r.two_step_factor);
                    let super_step = match ctx.mu {
                        Some(mu) => mu * ctx.eta > 1.0,
                        None => envelope_expands_between(&log.residual_series(0), t0, log.len()),
                    };
                    if super_step {
                        Regime::EosSuper
                    } else {
                        Regime::EosSub
                    }
                }
                _ => {
                    report.rate = estimate_rate(log, markers.tau.unwrap_or(0), cfg).ok().map(|r| r.two_step_factor);
                    Regime::GradientFlow
                }
            }
        }
        Termination::MaxSteps => {
            report.t0 = markers.t0;
            report.frak_t = markers.frak_t;
            let burn = ((log.len() as f64) * cfg.burn_fraction) as usize;
            let burn = markers.frak_t.map_or(burn, |f| f.max(burn));
            match analyse_tail(log, burn, cfg) {
                TailVerdict::Period(k) if k >= 2 => Regime::Periodic(k),
                TailVerdict::Aperiodic => Regime::Chaotic,
                _ => Regime::Inconclusive,
            }
        }
    };
    report.regime = RegimeLabel(regime);
    report
}

/// A run together with its classification.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub log: TrajectoryLog,
    pub report: RegimeReport,
}

pub fn simulate(data: &Dataset, init: InitScheme, hp: &HyperParams, cfg: &ClassifyConfig) -> Result<Outcome> {
    let w0 = init.build(data.d(), hp.alpha);
    let log = run_gd(&w0, data, hp, Recording::for_dim(data.d(), true))?;
    let ctx = RunContext::for_dataset(data, hp.eta);
    let report = classify(&log, data, &ctx, cfg);
    Ok(Outcome { log, report })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis_name: String,
    pub axis: Vec<f64>,
    pub reports: Vec<RegimeReport>,
}

impl SweepResult {
    pub fn labels(&self) -> Vec<Regime> {
        self.reports.iter().map(|r| r.regime()).collect()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(EosError::InvalidArgument("grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(EosError::InvalidArgument("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `per_decade` points per factor of ten from `lo` up to `hi` (inclusive within rounding).
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let mut out = Vec::new();
    if !(lo > 0.0 && hi >= lo && per_decade > 0) {
        return out;
    }
    let step = 10f64.powf(1.0 / per_decade as f64);
    let mut i = 0i32;
    loop {
        let v = lo * step.powi(i);
        if v > hi * (1.0 + 1e-12) {
            break;
        }
        out.push(v);
        i += 1;
    }
    out
}

/// One classified run per step size.
pub fn sweep_eta(
    data: &Dataset,
    init: InitScheme,
    base: &HyperParams,
    grid: &[f64],
    cfg: &ClassifyConfig,
) -> Result<SweepResult> {
    check_grid(grid)?;
    let reports = grid
        .par_iter()
        .map(|&eta| simulate(data, init, &HyperParams { eta, ..*base }, cfg).map(|o| o.report))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis_name: "eta".into(), axis: grid.to_vec(), reports })
}

/// One classified run per initialization scale.
pub fn sweep_alpha(
    data: &Dataset,
    init: InitScheme,
    base: &HyperParams,
    grid: &[f64],
    cfg: &ClassifyConfig,
) -> Result<SweepResult> {
    check_grid(grid)?;
    let reports = grid
        .par_iter()
        .map(|&alpha| simulate(data, init, &HyperParams { alpha, ..*base }, cfg).map(|o| o.report))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis_name: "alpha".into(), axis: grid.to_vec(), reports })
}

/// Labels follow the ladder order, ignoring inconclusive points.
pub fn ladder_ordered(labels: &[Regime]) -> bool {
    let ranks: Vec<u8> = labels.iter().filter_map(|r| r.ladder_rank()).collect();
    ranks.windows(2).all(|w| w[1] >= w[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiSamplePoint {
    pub eta: f64,
    pub crossed: bool,
    pub converged: bool,
    pub eos: bool,
    pub regime: RegimeLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiSampleReport {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub points: Vec<MultiSamplePoint>,
    pub any_eos: bool,
}

/// EoS convergence here means a `2 / eta` crossing followed by convergence.
pub fn multi_sample_eos_experiment(
    d: usize,
    n: usize,
    k: usize,
    grid: &[f64],
    seed: u64,
    base: &HyperParams,
    cfg: &ClassifyConfig,
) -> Result<MultiSampleReport> {
    let data = generate_dataset(d, n, k, seed)?;
    let sweep = sweep_eta(&data, InitScheme::Symmetric, base, grid, cfg)?;
    let points: Vec<MultiSamplePoint> = sweep
        .axis
        .iter()
        .zip(&sweep.reports)
        .map(|(&eta, r)| {
            let crossed = r.eos_crossing.is_some();
            let converged = r.termination == Termination::Converged;
            MultiSamplePoint { eta, crossed, converged, eos: crossed && converged, regime: r.regime }
        })
        .collect();
    let any_eos = points.iter().any(|p| p.eos);
    Ok(MultiSampleReport { d, n, k, seed, points, any_eos })
}
