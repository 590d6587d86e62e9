//! Weight-space model: data, quadratic loss, analytic gradient and GD iteration.
//!
//! The regression weight is `beta = w_plus^2 - w_minus^2` (coordinate-wise)
//! and the per-sample loss is `l(r) = r^2 / 4` on the residual
//! `r = <beta, x> - y`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{EosError, Result};
use crate::sharpness;

/// Default convergence tolerance on `max_i |r_i|`.
pub const CONVERGENCE_TOL: f64 = 1e-10;
/// Number of consecutive steps the tolerance must hold.
pub const CONVERGENCE_WINDOW: usize = 20;
/// Default divergence threshold on `|r|` and on every weight coordinate.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;
/// Default step budget.
pub const MAX_STEPS: usize = 100_000;

/// Per-sample loss with its first two derivatives.
pub trait Loss: Sync {
    fn value(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;
}

/// `l(r) = r^2 / 4`, so that `2 l'(r) = r`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quadratic;

impl Loss for Quadratic {
    fn value(&self, r: f64) -> f64 {
        0.25 * r * r
    }
    fn d1(&self, r: f64) -> f64 {
        0.5 * r
    }
    fn d2(&self, _r: f64) -> f64 {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Samples plus the sparse vector that generated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    beta_star: Vec<f64>,
    d: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, beta_star: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(EosError::InvalidArgument("dataset needs at least one sample".into()));
        }
        let d = beta_star.len();
        if d == 0 {
            return Err(EosError::InvalidArgument("dimension must be positive".into()));
        }
        for s in &samples {
            if s.x.len() != d {
                return Err(EosError::DimensionMismatch { expected: d, got: s.x.len() });
            }
            if !s.y.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
                return Err(EosError::InvalidArgument("non-finite sample".into()));
            }
        }
        Ok(Self { samples, beta_star, d })
    }

    /// One sample `(x, y)` with a user-supplied prior.
    pub fn single(x: Vec<f64>, y: f64, beta_star: Vec<f64>) -> Result<Self> {
        Self::new(vec![Sample { x, y }], beta_star)
    }

    /// The two-dimensional setting `x = (1, x2)`, `y = mu`, `beta* = (mu, 0)`.
    pub fn two_dim(x2: f64, mu: f64) -> Self {
        Self::single(vec![1.0, x2], mu, vec![mu, 0.0]).expect("valid two-dimensional data")
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
    pub fn beta_star(&self) -> &[f64] {
        &self.beta_star
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

/// The trainable pair `(w_plus, w_minus)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightState {
    pub w_plus: Vec<f64>,
    pub w_minus: Vec<f64>,
}

impl WeightState {
    pub fn new(w_plus: Vec<f64>, w_minus: Vec<f64>) -> Result<Self> {
        if w_plus.len() != w_minus.len() {
            return Err(EosError::DimensionMismatch { expected: w_plus.len(), got: w_minus.len() });
        }
        Ok(Self { w_plus, w_minus })
    }

    /// `w_plus = w_minus = alpha * 1`.
    pub fn symmetric(d: usize, alpha: f64) -> Self {
        Self { w_plus: vec![alpha; d], w_minus: vec![alpha; d] }
    }

    pub fn d(&self) -> usize {
        self.w_plus.len()
    }

    pub fn beta(&self) -> Vec<f64> {
        self.w_plus.iter().zip(&self.w_minus).map(|(p, m)| p * p - m * m).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.w_plus.iter().chain(&self.w_minus).all(|v| v.is_finite())
    }

    fn max_abs(&self) -> f64 {
        self.w_plus.iter().chain(&self.w_minus).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// How the initial weights are built from `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitScheme {
    /// `w_plus = w_minus = alpha * 1`.
    Symmetric,
    /// `w_plus = plus * alpha * 1`, `w_minus = minus * alpha * 1`.
    Scaled { plus: f64, minus: f64 },
}

impl InitScheme {
    /// The modified start used when `y = 0`: `w_plus = 2 alpha`, `w_minus = alpha`.
    pub const ZERO_TARGET: InitScheme = InitScheme::Scaled { plus: 2.0, minus: 1.0 };

    pub fn build(&self, d: usize, alpha: f64) -> WeightState {
        match *self {
            InitScheme::Symmetric => WeightState::symmetric(d, alpha),
            InitScheme::Scaled { plus, minus } => WeightState {
                w_plus: vec![plus * alpha; d],
                w_minus: vec![minus * alpha; d],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub eta: f64,
    pub alpha: f64,
    pub max_steps: usize,
    pub divergence_threshold: f64,
    pub rng_seed: u64,
    pub convergence_tol: f64,
    pub convergence_window: usize,
}

impl HyperParams {
    pub fn new(eta: f64, alpha: f64) -> Self {
        Self {
            eta,
            alpha,
            max_steps: MAX_STEPS,
            divergence_threshold: DIVERGENCE_THRESHOLD,
            rng_seed: 0,
            convergence_tol: CONVERGENCE_TOL,
            convergence_window: CONVERGENCE_WINDOW,
        }
    }

    pub fn with_max_steps(mut self, steps: usize) -> Self {
        self.max_steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(EosError::InvalidArgument(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(EosError::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(EosError::InvalidArgument("divergence threshold must be positive".into()));
        }
        if self.convergence_window == 0 {
            return Err(EosError::InvalidArgument("convergence window must be positive".into()));
        }
        Ok(())
    }
}

/// What to store besides the per-step residuals and loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub sharpness: bool,
    pub sharpness_stride: usize,
    pub weight_stride: usize,
}

impl Recording {
    /// Stride 1 for `d <= 4`, 10 otherwise.
    pub fn for_dim(d: usize, sharpness: bool) -> Self {
        let stride = if d <= 4 { 1 } else { 10 };
        Self { sharpness, sharpness_stride: stride, weight_stride: stride }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    Converged,
    Diverged,
    NonFinite,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::MaxSteps => "max_steps",
            Termination::Converged => "converged",
            Termination::Diverged => "diverged",
            Termination::NonFinite => "non_finite",
        }
    }
}

/// Per-step record of a GD run. Entry `t` describes the iterate `w_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub n: usize,
    pub eta: f64,
    /// Row-major `steps x n`.
    pub residuals: Vec<f64>,
    pub loss: Vec<f64>,
    pub sharpness: Vec<Option<f64>>,
    pub weights: Vec<(usize, WeightState)>,
    pub final_state: WeightState,
    pub termination: Termination,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.is_empty()
    }

    pub fn residuals_at(&self, t: usize) -> &[f64] {
        &self.residuals[t * self.n..(t + 1) * self.n]
    }

    /// Residual series of one sample.
    pub fn residual_series(&self, sample: usize) -> Vec<f64> {
        (0..self.len()).map(|t| self.residuals[t * self.n + sample]).collect()
    }

    pub fn max_abs_residual(&self, t: usize) -> f64 {
        self.residuals_at(t).iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    /// Weights at `t` if a snapshot exists.
    pub fn weights_at(&self, t: usize) -> Option<&WeightState> {
        self.weights.binary_search_by_key(&t, |(s, _)| *s).ok().map(|i| &self.weights[i].1)
    }

    pub fn has_sharpness(&self) -> bool {
        self.sharpness.iter().any(|s| s.is_some())
    }
}

fn check_dim(w: &WeightState, d: usize) -> Result<()> {
    if w.w_plus.len() != d || w.w_minus.len() != d {
        return Err(EosError::DimensionMismatch { expected: d, got: w.w_plus.len().min(w.w_minus.len()) });
    }
    Ok(())
}

pub(crate) fn residual_raw(w: &WeightState, s: &Sample) -> f64 {
    let mut acc = 0.0;
    for i in 0..s.x.len() {
        let p = w.w_plus[i];
        let m = w.w_minus[i];
        acc += (p * p - m * m) * s.x[i];
    }
    acc - s.y
}

/// `<w_plus^2 - w_minus^2, x> - y`.
pub fn residual(w: &WeightState, sample: &Sample) -> Result<f64> {
    check_dim(w, sample.x.len())?;
    Ok(residual_raw(w, sample))
}

pub fn residuals(w: &WeightState, data: &Dataset) -> Result<Vec<f64>> {
    check_dim(w, data.d)?;
    Ok(data.samples.iter().map(|s| residual_raw(w, s)).collect())
}

pub fn loss(w: &WeightState, data: &Dataset) -> Result<f64> {
    loss_with(w, data, &Quadratic)
}

pub fn loss_with(w: &WeightState, data: &Dataset, l: &dyn Loss) -> Result<f64> {
    check_dim(w, data.d)?;
    let n = data.n() as f64;
    Ok(data.samples.iter().map(|s| l.value(residual_raw(w, s))).sum::<f64>() / n)
}

pub(crate) fn gradient_raw(w: &WeightState, data: &Dataset, l: &dyn Loss, out: &mut [f64]) {
    let d = data.d;
    out.iter_mut().for_each(|v| *v = 0.0);
    let inv_n = 1.0 / data.n() as f64;
    for s in &data.samples {
        let c = 2.0 * l.d1(residual_raw(w, s)) * inv_n;
        for i in 0..d {
            out[i] += c * s.x[i] * w.w_plus[i];
            out[d + i] -= c * s.x[i] * w.w_minus[i];
        }
    }
}

/// Gradient of the empirical risk, stacked as `[d/dw_plus; d/dw_minus]`.
pub fn gradient(w: &WeightState, data: &Dataset) -> Result<Vec<f64>> {
    gradient_with(w, data, &Quadratic)
}

pub fn gradient_with(w: &WeightState, data: &Dataset, l: &dyn Loss) -> Result<Vec<f64>> {
    check_dim(w, data.d)?;
    let mut g = vec![0.0; 2 * data.d];
    gradient_raw(w, data, l, &mut g);
    Ok(g)
}

/// One step `w - eta * grad`. Non-finite output is reported as `Termination::NonFinite`.
pub fn gd_step(w: &WeightState, data: &Dataset, eta: f64) -> std::result::Result<WeightState, Termination> {
    if check_dim(w, data.d).is_err() {
        return Err(Termination::NonFinite);
    }
    let mut g = vec![0.0; 2 * data.d];
    let mut next = w.clone();
    step_in_place(&mut next, data, eta, &mut g);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Termination::NonFinite)
    }
}

fn step_in_place(w: &mut WeightState, data: &Dataset, eta: f64, g: &mut [f64]) {
    let d = data.d;
    gradient_raw(w, data, &Quadratic, g);
    for i in 0..d {
        w.w_plus[i] -= eta * g[i];
        w.w_minus[i] -= eta * g[d + i];
    }
}

/// Iterate GD until convergence, divergence or the step budget.
pub fn run_gd(init: &WeightState, data: &Dataset, hp: &HyperParams, rec: Recording) -> Result<TrajectoryLog> {
    hp.validate()?;
    check_dim(init, data.d)?;
    let n = data.n();
    let mut w = init.clone();
    let mut g = vec![0.0; 2 * data.d];
    let mut log = TrajectoryLog {
        n,
        eta: hp.eta,
        residuals: Vec::new(),
        loss: Vec::new(),
        sharpness: Vec::new(),
        weights: Vec::new(),
        final_state: w.clone(),
        termination: Termination::MaxSteps,
    };
    let sharp_stride = rec.sharpness_stride.max(1);
    let weight_stride = rec.weight_stride.max(1);
    let mut calm = 0usize;
    let mut t = 0usize;
    loop {
        let mut max_r = 0.0f64;
        let mut lsum = 0.0;
        let mut finite = w.is_finite();
        for s in &data.samples {
            let r = residual_raw(&w, s);
            finite &= r.is_finite();
            max_r = max_r.max(r.abs());
            lsum += Quadratic.value(r);
            log.residuals.push(r);
        }
        log.loss.push(lsum / n as f64);
        let sh = if rec.sharpness && t.is_multiple_of(sharp_stride) && finite {
            sharpness::sharpness(&w, data).ok()
        } else {
            None
        };
        log.sharpness.push(sh);
        if t.is_multiple_of(weight_stride) {
            log.weights.push((t, w.clone()));
        }

        let outcome = if !finite {
            Some(Termination::NonFinite)
        } else if max_r > hp.divergence_threshold || w.max_abs() > hp.divergence_threshold {
            Some(Termination::Diverged)
        } else {
            calm = if max_r < hp.convergence_tol { calm + 1 } else { 0 };
            if calm >= hp.convergence_window {
                Some(Termination::Converged)
            } else if t >= hp.max_steps {
                Some(Termination::MaxSteps)
            } else {
                None
            }
        };
        if let Some(reason) = outcome {
            if log.weights.last().map(|(s, _)| *s) != Some(t) {
                log.weights.push((t, w.clone()));
            }
            log.final_state = w;
            log.termination = reason;
            return Ok(log);
        }
        step_in_place(&mut w, data, hp.eta, &mut g);
        t += 1;
    }
}

/// `n` Gaussian samples in `R^d` labelled by a random k-sparse sign vector scaled `1/sqrt(k)`.
///
/// Uses ChaCha8 seeded with `seed_from_u64(rng_seed)` and the ziggurat normal sampler
/// of `rand_distr`.
pub fn generate_dataset(d: usize, n: usize, k: usize, rng_seed: u64) -> Result<Dataset> {
    if d == 0 || n == 0 {
        return Err(EosError::InvalidArgument("d and n must be positive".into()));
    }
    if k == 0 || k > d {
        return Err(EosError::InvalidArgument(format!("k must lie in 1..={d}, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut beta_star = vec![0.0; d];
    let scale = 1.0 / (k as f64).sqrt();
    for i in index::sample(&mut rng, d, k).into_iter() {
        beta_star[i] = if rng.random::<bool>() { scale } else { -scale };
    }
    let samples = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y = x.iter().zip(&beta_star).map(|(a, b)| a * b).sum();
            Sample { x, y }
        })
        .collect();
    Dataset::new(samples, beta_star)
}
