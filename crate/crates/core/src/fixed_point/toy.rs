//! The scalar oscillator `r' = -(1 - alpha_t) r - beta_t r^2`.

use serde::{Deserialize, Serialize};

use crate::error::{EosError, Result};

/// A time-dependent input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Constant(f64),
    /// `amp * tanh((t - mid) / width)`
    Tanh { amp: f64, mid: f64, width: f64 },
    /// `(t_start, value)` pairs sorted by `t_start`; each value holds until the next start.
    Piecewise(Vec<(usize, f64)>),
}

impl Schedule {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Tanh { amp, mid, width } => amp * ((t as f64 - mid) / width).tanh(),
            Schedule::Piecewise(parts) => {
                let mut v = parts.first().map(|p| p.1).unwrap_or(0.0);
                for &(start, value) in parts {
                    if start <= t {
                        v = value;
                    } else {
                        break;
                    }
                }
                v
            }
        }
    }

    /// Parses `const:V`, `tanh:AMP,MID,WIDTH` or `piecewise:T0:V0,T1:V1,...`.
    /// A bare number is a constant.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = |m: &str| EosError::Schedule(format!("{m}: '{text}'"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
        if let Ok(v) = text.parse::<f64>() {
            return Ok(Schedule::Constant(v));
        }
        let (kind, body) = text.split_once(':').ok_or_else(|| bad("missing kind"))?;
        match kind.trim() {
            "const" | "constant" => Ok(Schedule::Constant(num(body)?)),
            "tanh" => {
                let parts: Vec<&str> = body.split(',').collect();
                if parts.len() != 3 {
                    return Err(bad("tanh needs AMP,MID,WIDTH"));
                }
                let width = num(parts[2])?;
                if width == 0.0 {
                    return Err(bad("tanh width must be nonzero"));
                }
                Ok(Schedule::Tanh { amp: num(parts[0])?, mid: num(parts[1])?, width })
            }
            "piecewise" => {
                let mut out = Vec::new();
                for item in body.split(',') {
                    let (t, v) = item.split_once(':').ok_or_else(|| bad("piecewise item needs T:V"))?;
                    let t = t.trim().parse::<usize>().map_err(|_| bad("bad start step"))?;
                    out.push((t, num(v)?));
                }
                if out.is_empty() || out.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(bad("piecewise starts must be strictly increasing"));
                }
                Ok(Schedule::Piecewise(out))
            }
            _ => Err(bad("unknown schedule kind")),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Schedule::Constant(v) => format!("const:{v}"),
            Schedule::Tanh { amp, mid, width } => format!("tanh:{amp},{mid},{width}"),
            Schedule::Piecewise(parts) => {
                let items: Vec<String> = parts.iter().map(|(t, v)| format!("{t}:{v}")).collect();
                format!("piecewise:{}", items.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub alpha: Schedule,
    pub beta: Schedule,
    pub r0: f64,
}

/// Means of the iterates over the final window, split by parity and by sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceLimits {
    pub even: f64,
    pub odd: f64,
    pub positive: Option<f64>,
    pub negative: Option<f64>,
    /// Largest deviation from the parity mean inside the window.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRun {
    pub r: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub limits: Option<SubsequenceLimits>,
}

pub fn toy_step(r: f64, t: usize, p: &ToyParams) -> f64 {
    let a = p.alpha.at(t);
    let b = p.beta.at(t);
    -(1.0 - a) * r - b * r * r
}

/// Runs `steps` iterations; the trajectory has `steps + 1` entries.
pub fn toy_run(p: &ToyParams, steps: usize) -> Result<ToyRun> {
    let mut r = Vec::with_capacity(steps + 1);
    let mut alpha = Vec::with_capacity(steps + 1);
    let mut beta = Vec::with_capacity(steps + 1);
    let mut cur = p.r0;
    for t in 0..=steps {
        let a = p.alpha.at(t);
        if a.abs() > 1.0 {
            return Err(EosError::Schedule(format!("|alpha_{t}| = {} exceeds 1", a.abs())));
        }
        r.push(cur);
        alpha.push(a);
        beta.push(p.beta.at(t));
        if t < steps {
            cur = toy_step(cur, t, p);
        }
    }
    let limits = subsequence_limits(&r);
    Ok(ToyRun { r, alpha, beta, limits })
}

/// Limits over the final 10% of the trajectory (at least four points).
pub fn subsequence_limits(r: &[f64]) -> Option<SubsequenceLimits> {
    if r.len() < 4 {
        return None;
    }
    let w = (r.len() / 10).max(4).min(r.len());
    let start = r.len() - w;
    let mean = |it: Vec<f64>| if it.is_empty() { None } else { Some(it.iter().sum::<f64>() / it.len() as f64) };
    let even: Vec<f64> = (start..r.len()).filter(|t| t % 2 == 0).map(|t| r[t]).collect();
    let odd: Vec<f64> = (start..r.len()).filter(|t| t % 2 == 1).map(|t| r[t]).collect();
    let (me, mo) = (mean(even.clone())?, mean(odd.clone())?);
    let spread = even
        .iter()
        .map(|v| (v - me).abs())
        .chain(odd.iter().map(|v| (v - mo).abs()))
        .fold(0.0, f64::max);
    let tail = &r[start..];
    Some(SubsequenceLimits {
        even: me,
        odd: mo,
        positive: mean(tail.iter().copied().filter(|v| *v > 0.0).collect()),
        negative: mean(tail.iter().copied().filter(|v| *v < 0.0).collect()),
        spread,
    })
}

/// `(r_plus, r_minus) = (sqrt(a^2 + 4a) - a, -sqrt(a^2 + 4a) - a) / 2` for constant `alpha = -a`, `beta = 1`.
pub fn negative_alpha_limits(a: f64) -> (f64, f64) {
    let sq = (a * a + 4.0 * a).sqrt();
    (0.5 * (sq - a), 0.5 * (-sq - a))
}

/// Step at which `|r_t|` peaks.
pub fn envelope_turnover(r: &[f64]) -> Option<usize> {
    r.iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(t, _)| t)
}

/// First step at which the schedule crosses from negative to non-negative or back.
pub fn sign_change(s: &Schedule, horizon: usize) -> Option<usize> {
    let first = s.at(0);
    (1..=horizon).find(|&t| (s.at(t) >= 0.0) != (first >= 0.0))
}
