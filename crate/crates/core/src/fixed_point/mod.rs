//! Closed-form objects of the reduced map `(g, h)`: fixed points, 2-cycles,
//! Jacobian spectra and the auxiliary map `rho -> g(rho, 0)`.

pub mod toy;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{EosError, Result};
use crate::reparam::{g_map, h_map};

/// `(3 sqrt 2 - 2) / 2`, upper end of the monotone window of the auxiliary map.
pub const MONOTONE_LIMIT: f64 = 1.121_320_343_559_642_6;
/// Residual tolerance used to certify closed-form points.
pub const CERT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub mu: f64,
    pub eta: f64,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepBucket {
    /// `mu eta < 1`
    Small,
    /// `1 <= mu eta <= MONOTONE_LIMIT`
    Large,
    /// `mu eta > MONOTONE_LIMIT`
    EvenLarger,
}

impl MapParams {
    pub fn new(mu: f64, eta: f64, x: f64) -> Self {
        Self { mu, eta, x }
    }

    pub fn mu_eta(&self) -> f64 {
        self.mu * self.eta
    }

    pub fn bucket(&self) -> StepBucket {
        let m = self.mu_eta();
        if m < 1.0 {
            StepBucket::Small
        } else if m <= MONOTONE_LIMIT {
            StepBucket::Large
        } else {
            StepBucket::EvenLarger
        }
    }

    /// Whether `|x| < 1 / (mu eta)`.
    pub fn x_below_inverse(&self) -> bool {
        self.x.abs() * self.mu_eta() < 1.0
    }

    pub fn g(&self, r: f64, s: f64) -> f64 {
        g_map(r, s, self.mu, self.eta, self.x)
    }

    pub fn h(&self, r: f64, s: f64) -> f64 {
        h_map(r, s, self.eta, self.x)
    }

    pub fn step(&self, p: (f64, f64)) -> (f64, f64) {
        (self.g(p.0, p.1), self.h(p.0, p.1))
    }

    /// Analytic Jacobian `[[g_r, g_s], [h_r, h_s]]`.
    pub fn jacobian(&self, r: f64, s: f64) -> [[f64; 2]; 2] {
        let (mu, eta, x) = (self.mu, self.eta, self.x);
        let g_r = -(2.0 * mu * eta - 1.0) - 2.0 * (2.0 * eta - mu * eta * eta) * r + 3.0 * eta * eta * r * r + 2.0 * s
            - 2.0 * (1.0 + x) * eta * r * s;
        let g_s = 2.0 * r - (1.0 + x) * eta * r * r;
        let h_r = -2.0 * x * eta * s + 2.0 * x * x * eta * eta * r * s;
        let h_s = (1.0 - x * eta * r).powi(2);
        [[g_r, g_s], [h_r, h_s]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodicKind {
    Fixed,
    TwoCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPair {
    pub kind: PeriodicKind,
    pub points: Vec<(f64, f64)>,
    pub real_flag: bool,
}

/// `g(rho, 0)`.
pub fn aux_map(rho: f64, p: &MapParams) -> f64 {
    p.g(rho, 0.0)
}

/// Local extremum locations `(1 / eta, -(2 mu eta - 1) / (3 eta))` of `g(., 0)`.
pub fn aux_stationary_points(p: &MapParams) -> (f64, f64) {
    (1.0 / p.eta, -(2.0 * p.mu_eta() - 1.0) / (3.0 * p.eta))
}

/// `mu^2 eta^2 + 2 mu eta - 3`, zero exactly at `mu eta = 1`.
pub fn aux_discriminant(p: &MapParams) -> f64 {
    let m = p.mu_eta();
    m * m + 2.0 * m - 3.0
}

/// `(rho_plus, rho_minus) = (1 - mu eta +- sqrt(disc)) / (2 eta)`, the 2-periodic points of `g(., 0)`.
pub fn aux_two_periodic(p: &MapParams) -> Option<(f64, f64)> {
    let disc = aux_discriminant(p);
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let base = 1.0 - p.mu_eta();
    Some(((base + sq) / (2.0 * p.eta), (base - sq) / (2.0 * p.eta)))
}

fn require_x(p: &MapParams) -> Result<()> {
    if p.x == 0.0 {
        return Err(EosError::DegenerateX);
    }
    Ok(())
}

/// The line `{0} x R` is fixed; the returned point is the isolated one
/// `(2 / (eta x), (1 - x)(2 + x mu eta) / x)`.
pub fn fixed_points(p: &MapParams) -> Result<PeriodicPair> {
    require_x(p)?;
    let r = 2.0 / (p.eta * p.x);
    let s = (1.0 - p.x) * (2.0 + p.x * p.mu_eta()) / p.x;
    Ok(PeriodicPair { kind: PeriodicKind::Fixed, points: vec![(r, s)], real_flag: true })
}

/// `(mu eta x + 1)^2 - 4`.
pub fn two_cycle_discriminant(p: &MapParams) -> f64 {
    let m = p.mu_eta() * p.x;
    (m + 1.0).powi(2) - 4.0
}

/// The 2-cycle of `(g, h)`. Each `r` root is paired with the `s` root that
/// takes the same sign of the square root; the returned points are swapped
/// by one application of the map. When the discriminant is negative the
/// points are left empty.
pub fn two_periodic_points(p: &MapParams) -> Result<PeriodicPair> {
    require_x(p)?;
    let disc = two_cycle_discriminant(p);
    if disc < 0.0 {
        return Ok(PeriodicPair { kind: PeriodicKind::TwoCycle, points: vec![], real_flag: false });
    }
    let m = p.mu_eta() * p.x;
    let sq = disc.sqrt();
    let x = p.x;
    let point = |sign: f64| {
        let r = (1.0 - m + sign * sq) / (2.0 * p.eta * x);
        let s = (1.0 - x) * (m + 1.0 + sign * sq) / (2.0 * x);
        (r, s)
    };
    Ok(PeriodicPair { kind: PeriodicKind::TwoCycle, points: vec![point(-1.0), point(1.0)], real_flag: true })
}

/// `max |F^k(p) - p|` over the points, `k` = 1 for fixed points, 2 for a 2-cycle.
pub fn composed_residual(pair: &PeriodicPair, p: &MapParams) -> f64 {
    let k = match pair.kind {
        PeriodicKind::Fixed => 1,
        PeriodicKind::TwoCycle => 2,
    };
    pair.points
        .iter()
        .map(|&pt| {
            let mut q = pt;
            for _ in 0..k {
                q = p.step(q);
            }
            (q.0 - pt.0).abs().max((q.1 - pt.1).abs())
        })
        .fold(0.0, f64::max)
}

/// Eigenvalues of a real 2x2 matrix.
pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> (Complex<f64>, Complex<f64>) {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        (Complex::new(tr / 2.0 + sq, 0.0), Complex::new(tr / 2.0 - sq, 0.0))
    } else {
        let sq = (-disc).sqrt();
        (Complex::new(tr / 2.0, sq), Complex::new(tr / 2.0, -sq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub lambda1: (f64, f64),
    pub lambda2: (f64, f64),
    pub trace: f64,
    pub det: f64,
    pub spectral_radius: f64,
}

pub fn jacobian_spectrum(point: (f64, f64), p: &MapParams) -> Spectrum {
    let j = p.jacobian(point.0, point.1);
    let (l1, l2) = eigenvalues_2x2(j);
    Spectrum {
        lambda1: (l1.re, l1.im),
        lambda2: (l2.re, l2.im),
        trace: j[0][0] + j[1][1],
        det: j[0][0] * j[1][1] - j[0][1] * j[1][0],
        spectral_radius: l1.norm().max(l2.norm()),
    }
}

/// Central-difference Jacobian of `(g, h)`.
pub fn jacobian_fd(point: (f64, f64), p: &MapParams, h: f64) -> [[f64; 2]; 2] {
    let (r, s) = point;
    let dr_p = p.step((r + h, s));
    let dr_m = p.step((r - h, s));
    let ds_p = p.step((r, s + h));
    let ds_m = p.step((r, s - h));
    [
        [(dr_p.0 - dr_m.0) / (2.0 * h), (ds_p.0 - ds_m.0) / (2.0 * h)],
        [(dr_p.1 - dr_m.1) / (2.0 * h), (ds_p.1 - ds_m.1) / (2.0 * h)],
    ]
}

/// The trace expression quoted for the isolated fixed point,
/// `5 + 4/x^2 - 4/x + 2 x mu eta`.
pub fn quoted_fixed_point_trace(p: &MapParams) -> f64 {
    let x = p.x;
    5.0 + 4.0 / (x * x) - 4.0 / x + 2.0 * x * p.mu_eta()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCandidate {
    pub family: String,
    pub r: Option<f64>,
    pub s: Option<f64>,
    /// `max |F^2(p) - p|` when the candidate is real.
    pub cycle_residual: Option<f64>,
    pub rejected: bool,
    pub reason: String,
}

/// The other root families met while solving `F^2(p) = p`, each with the
/// reason it does not give an admissible 2-cycle.
pub fn rejected_root_families(p: &MapParams) -> Vec<RootCandidate> {
    let (eta, x) = (p.eta, p.x);
    let me = p.mu_eta();
    let mut out = Vec::new();
    let upper = me - 1.0;
    let mut push = |family: &str, r: Option<f64>, s: Option<f64>| {
        let (cycle_residual, rejected, reason) = match (r, s) {
            (Some(r), Some(s)) if r.is_finite() && s.is_finite() => {
                let pair = PeriodicPair { kind: PeriodicKind::TwoCycle, points: vec![(r, s)], real_flag: true };
                let res = composed_residual(&pair, p);
                if res > CERT_TOL.max(1e-8 * (1.0 + r.abs() + s.abs())) {
                    (Some(res), true, "not a 2-periodic point of (g, h)".to_string())
                } else if !(s > 0.0 && s < upper) {
                    (Some(res), true, format!("s = {s:.6} outside (0, mu eta - 1)"))
                } else {
                    (Some(res), false, "admissible".to_string())
                }
            }
            (Some(r), Some(s)) => (None, true, format!("non-finite candidate ({r}, {s})")),
            _ => (None, true, "complex root".to_string()),
        };
        out.push(RootCandidate { family: family.to_string(), r, s, cycle_residual, rejected, reason });
    };
    let real_sqrt = |v: f64| if v >= 0.0 { Some(v.sqrt()) } else { None };

    // family 4
    let sq = (x * x + 1.0).sqrt();
    for sign in [1.0, -1.0] {
        let r = (x + 1.0 - sign * sq) / (eta * x);
        let s = (me * x + x * x + x + 2.0) * (1.0 / x + sign / sq);
        push(&format!("r24{}", if sign > 0.0 { "+" } else { "-" }), Some(r), Some(s));
    }
    // family 5
    match real_sqrt(x * x - 2.0 * x + 2.0) {
        Some(sq) => {
            for sign in [1.0, -1.0] {
                let r = (x - sign * sq) / (eta * x - eta);
                let s = (me * (x - 1.0) + x * x - x + 2.0) * (x * x - x + 1.0 + sign * x * eta * sq) / (x - 1.0).powi(3);
                push(&format!("r25{}", if sign > 0.0 { "+" } else { "-" }), Some(r), Some(s));
            }
        }
        None => {
            push("r25+", None, None);
            push("r25-", None, None);
        }
    }
    // family 6 is the admissible 2-cycle itself
    let m = me * x;
    match real_sqrt((m + 1.0).powi(2) - 4.0) {
        Some(sq) => {
            for sign in [-1.0, 1.0] {
                let r = (1.0 - m + sign * sq) / (2.0 * eta * x);
                let s = (1.0 - x) * (m + 1.0 + sign * sq) / (2.0 * x);
                push(&format!("r26{}", if sign < 0.0 { "+" } else { "-" }), Some(r), Some(s));
            }
        }
        None => {
            push("r26+", None, None);
            push("r26-", None, None);
        }
    }
    // family 7
    let inner7 = 1.0 + 2.0 * x - 2.0 * x * x;
    match (real_sqrt(2.0 * x * x - 2.0 * x + 1.0), real_sqrt(inner7)) {
        (Some(sr), Some(ss)) => {
            for sign in [1.0, -1.0] {
                let r = (1.0 + sign * sr) / (eta * (1.0 - x) * x);
                let s = (inner7 - sign * x * ss) * (x * (1.0 - x) * (me - 1.0) + 2.0) / ((1.0 - x).powi(3) * x);
                push(&format!("r27{}", if sign > 0.0 { "+" } else { "-" }), Some(r), Some(s));
            }
        }
        _ => {
            push("r27+", None, None);
            push("r27-", None, None);
        }
    }
    out
}
