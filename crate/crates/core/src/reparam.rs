//! Two-dimensional coordinates for the single sample `x = (1, x)`, `y = mu`.
//!
//! `w_plus^2 - beta*/2 = p0 b0 + p1 b1` and `w_minus^2 + beta*/2 = q0 b0 + q1 b1`
//! with `b0 = (1, x)`, `b1 = (x, -1)`, `beta* = (mu, 0)`. In the eigenbasis
//! `v1 = (1, x)`, `v2 = (x, -1)` of the coupling matrices the coefficients are
//! the quadruplet `(a, a', b, b')`.
//!
//! For the symmetric start `w = alpha * 1` the projection gives
//! `a = a' = b = b' = alpha^2 / (1 + x^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{EosError, Result};
use crate::model::{gd_step, residual, Dataset, WeightState};

pub type Mat2 = [[f64; 2]; 2];

fn mat_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisContext {
    pub x: f64,
    pub mu: f64,
    pub eta: f64,
}

impl BasisContext {
    pub fn new(x: f64, mu: f64, eta: f64) -> Self {
        Self { x, mu, eta }
    }

    /// The analysis assumes `0 < x < 1`; the simulator does not.
    pub fn outside_analysed_range(&self) -> bool {
        !(self.x > 0.0 && self.x < 1.0)
    }

    pub fn norm2(&self) -> f64 {
        1.0 + self.x * self.x
    }
    pub fn beta0(&self) -> [f64; 2] {
        [1.0, self.x]
    }
    pub fn beta1(&self) -> [f64; 2] {
        [self.x, -1.0]
    }
    pub fn v1(&self) -> [f64; 2] {
        [1.0, self.x]
    }
    pub fn v2(&self) -> [f64; 2] {
        [self.x, -1.0]
    }
    pub fn beta_star(&self) -> [f64; 2] {
        [self.mu, 0.0]
    }
    pub fn c_x(&self) -> f64 {
        let x = self.x;
        x * (1.0 - x) * (1.0 + x * x)
    }
    pub fn c_x_prime(&self) -> f64 {
        let x = self.x;
        x * (1.0 - x * x) * (1.0 + x * x)
    }

    pub fn a_matrix(&self) -> Mat2 {
        let x = self.x;
        let k = 1.0 / self.norm2();
        [
            [k * (1.0 + x * x * x), k * x * (1.0 - x)],
            [k * x * (1.0 - x), k * x * (1.0 + x)],
        ]
    }

    pub fn b_matrix(&self) -> Mat2 {
        let x = self.x;
        let k = 1.0 / self.norm2();
        [
            [k * (1.0 + x.powi(4)), k * x * (1.0 - x * x)],
            [k * x * (1.0 - x * x), k * 2.0 * x * x],
        ]
    }

    fn offset(&self) -> f64 {
        self.mu / (2.0 * self.norm2())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PQState {
    pub p: [f64; 2],
    pub q: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadruplet {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl Quadruplet {
    pub fn is_nonnegative(&self) -> bool {
        self.a >= 0.0 && self.a_prime >= 0.0 && self.b >= 0.0 && self.b_prime >= 0.0
    }
}

/// Compact-form coefficients of the residual update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub r: f64,
    pub s: f64,
}

fn require_d2(w: &WeightState) -> Result<()> {
    if w.d() != 2 || w.w_minus.len() != 2 {
        return Err(EosError::DimensionMismatch { expected: 2, got: w.d() });
    }
    Ok(())
}

/// `p = P(w_plus^2 - beta*/2)`, `q = P(w_minus^2 + beta*/2)` with `P` the projection onto `(b0, b1)`.
pub fn project_to_pq(w: &WeightState, ctx: &BasisContext) -> Result<PQState> {
    require_d2(w)?;
    let n2 = ctx.norm2();
    let (b0, b1, bs) = (ctx.beta0(), ctx.beta1(), ctx.beta_star());
    let coeffs = |u: [f64; 2]| [(u[0] * b0[0] + u[1] * b0[1]) / n2, (u[0] * b1[0] + u[1] * b1[1]) / n2];
    let up = [w.w_plus[0].powi(2) - 0.5 * bs[0], w.w_plus[1].powi(2) - 0.5 * bs[1]];
    let um = [w.w_minus[0].powi(2) + 0.5 * bs[0], w.w_minus[1].powi(2) + 0.5 * bs[1]];
    Ok(PQState { p: coeffs(up), q: coeffs(um) })
}

/// Squared weights `(w_plus^2, w_minus^2)` rebuilt from `(p, q)`.
pub fn pq_to_squares(pq: &PQState, ctx: &BasisContext) -> ([f64; 2], [f64; 2]) {
    let (b0, b1, bs) = (ctx.beta0(), ctx.beta1(), ctx.beta_star());
    let plus = [
        pq.p[0] * b0[0] + pq.p[1] * b1[0] + 0.5 * bs[0],
        pq.p[0] * b0[1] + pq.p[1] * b1[1] + 0.5 * bs[1],
    ];
    let minus = [
        pq.q[0] * b0[0] + pq.q[1] * b1[0] - 0.5 * bs[0],
        pq.q[0] * b0[1] + pq.q[1] * b1[1] - 0.5 * bs[1],
    ];
    (plus, minus)
}

pub fn pq_to_quadruplet(pq: &PQState, ctx: &BasisContext) -> Quadruplet {
    let n2 = ctx.norm2();
    let (v1, v2) = (ctx.v1(), ctx.v2());
    let dot = |u: [f64; 2], v: [f64; 2]| (u[0] * v[0] + u[1] * v[1]) / n2;
    Quadruplet {
        a: dot(pq.p, v1) + ctx.offset(),
        b: dot(pq.p, v2),
        a_prime: dot(pq.q, v1) - ctx.offset(),
        b_prime: dot(pq.q, v2),
    }
}

pub fn quadruplet_to_pq(q: &Quadruplet, ctx: &BasisContext) -> PQState {
    let (v1, v2) = (ctx.v1(), ctx.v2());
    let c = ctx.offset();
    let ap = q.a - c;
    let am = q.a_prime + c;
    PQState {
        p: [ap * v1[0] + q.b * v2[0], ap * v1[1] + q.b * v2[1]],
        q: [am * v1[0] + q.b_prime * v2[0], am * v1[1] + q.b_prime * v2[1]],
    }
}

/// Same coefficients as `pq_to_quadruplet(project_to_pq(w))`, which simplify to
/// `a = w_plus[0]^2 / (1 + x^2)` and so on. The simplified form avoids the
/// cancellation against `mu / 2` and keeps tiny `a'`, `b'` accurate.
pub fn project_to_quadruplet(w: &WeightState, ctx: &BasisContext) -> Result<Quadruplet> {
    require_d2(w)?;
    let n2 = ctx.norm2();
    Ok(Quadruplet {
        a: w.w_plus[0].powi(2) / n2,
        b: w.w_plus[1].powi(2) / n2,
        a_prime: w.w_minus[0].powi(2) / n2,
        b_prime: w.w_minus[1].powi(2) / n2,
    })
}

pub fn pq_residual(pq: &PQState, ctx: &BasisContext) -> f64 {
    ctx.norm2() * (pq.p[0] - pq.q[0])
}

/// `r = (1 + x^2)((a - a') + x (b - b')) - mu`.
pub fn quadruplet_residual(q: &Quadruplet, ctx: &BasisContext) -> f64 {
    ctx.norm2() * ((q.a - q.a_prime) + ctx.x * (q.b - q.b_prime)) - ctx.mu
}

/// One GD step in `(p, q)` coordinates.
pub fn pq_step(state: &PQState, ctx: &BasisContext) -> PQState {
    let r = pq_residual(state, ctx);
    let (a, b) = (ctx.a_matrix(), ctx.b_matrix());
    let er = ctx.eta * r;
    let e2 = er * er;
    let force = ctx.mu / (2.0 * ctx.norm2());
    let b0 = ctx.beta0();
    let ap = mat_vec(&a, state.p);
    let bp = mat_vec(&b, state.p);
    let aq = mat_vec(&a, state.q);
    let bq = mat_vec(&b, state.q);
    let fp = (2.0 * er - e2) * force;
    let fq = (2.0 * er + e2) * force;
    let mut p = [0.0; 2];
    let mut q = [0.0; 2];
    for i in 0..2 {
        p[i] = state.p[i] - 2.0 * er * ap[i] + e2 * bp[i] - fp * b0[i];
        q[i] = state.q[i] + 2.0 * er * aq[i] + e2 * bq[i] - fq * b0[i];
    }
    PQState { p, q }
}

pub fn quadruplet_step(q: &Quadruplet, ctx: &BasisContext) -> Quadruplet {
    let er = ctx.eta * quadruplet_residual(q, ctx);
    let xer = ctx.x * er;
    Quadruplet {
        a: (1.0 - er).powi(2) * q.a,
        a_prime: (1.0 + er).powi(2) * q.a_prime,
        b: (1.0 - xer).powi(2) * q.b,
        b_prime: (1.0 + xer).powi(2) * q.b_prime,
    }
}

/// Closed-form next residual from the current quadruplet.
pub fn r_update_full(q: &Quadruplet, ctx: &BasisContext) -> f64 {
    let r = quadruplet_residual(q, ctx);
    let (eta, mu, x) = (ctx.eta, ctx.mu, ctx.x);
    let db = q.b - q.b_prime;
    (1.0 - 2.0 * eta * (mu + r - ctx.c_x() * db)) * r + eta * eta * r * r * (mu + r - ctx.c_x_prime() * db)
        - ctx.norm2() * 4.0 * eta * r * (q.a_prime + x * x * q.b_prime)
}

pub fn diagnostics(q: &Quadruplet, ctx: &BasisContext) -> Diagnostics {
    let r = quadruplet_residual(q, ctx);
    let (eta, mu, x) = (ctx.eta, ctx.mu, ctx.x);
    let db = q.b - q.b_prime;
    Diagnostics {
        alpha: 2.0 - 2.0 * eta * (mu - ctx.c_x() * db),
        beta: 2.0 * eta - eta * eta * (mu + r - ctx.c_x_prime() * db),
        gamma: ctx.norm2() * 4.0 * eta * (q.a_prime + x * x * q.b_prime),
    }
}

/// `r' = -(1 - alpha + gamma) r - beta r^2`.
pub fn r_update_compact(r: f64, diag: &Diagnostics) -> f64 {
    -(1.0 - diag.alpha + diag.gamma) * r - diag.beta * r * r
}

/// `(r, s)` attached to a running quadruplet; `s = eta c_x b`.
pub fn reduce(q: &Quadruplet, ctx: &BasisContext) -> ReducedState {
    ReducedState { r: quadruplet_residual(q, ctx), s: ctx.eta * ctx.c_x() * q.b }
}

/// The quadruplet with `a' = b' = 0` that reduces to `state`.
pub fn lift(state: &ReducedState, ctx: &BasisContext) -> Quadruplet {
    let b = state.s / (ctx.eta * ctx.c_x());
    let a = (state.r + ctx.mu) / ctx.norm2() - ctx.x * b;
    Quadruplet { a, a_prime: 0.0, b, b_prime: 0.0 }
}

/// `g(r,s) = -(2 mu eta - 1) r - (2 eta - mu eta^2) r^2 + eta^2 r^3 + 2 r s - (1 + x) eta r^2 s`.
pub fn g_map(r: f64, s: f64, mu: f64, eta: f64, x: f64) -> f64 {
    -(2.0 * mu * eta - 1.0) * r - (2.0 * eta - mu * eta * eta) * r * r + eta * eta * r * r * r + 2.0 * r * s
        - (1.0 + x) * eta * r * r * s
}

/// `h(r,s) = s (1 - x eta r)^2`.
pub fn h_map(r: f64, s: f64, eta: f64, x: f64) -> f64 {
    s - 2.0 * x * eta * r * s + x * x * eta * eta * r * r * s
}

/// Detached step of the reduced map `(g, h)`.
pub fn reduced_step(state: &ReducedState, ctx: &BasisContext) -> ReducedState {
    ReducedState {
        r: g_map(state.r, state.s, ctx.mu, ctx.eta, ctx.x),
        s: h_map(state.r, state.s, ctx.eta, ctx.x),
    }
}

/// `alpha = 2 - 2 eta mu + 2 s` on the reduced state.
pub fn reduced_alpha(state: &ReducedState, ctx: &BasisContext) -> f64 {
    2.0 - 2.0 * ctx.eta * ctx.mu + 2.0 * state.s
}

/// Residual sequences of `steps` GD steps from `init`, computed in weight
/// space, through `(p, q)` and through the quadruplet.
pub fn residual_paths(init: &WeightState, ctx: &BasisContext, steps: usize) -> Result<[Vec<f64>; 3]> {
    require_d2(init)?;
    let data = Dataset::two_dim(ctx.x, ctx.mu);
    let mut w = init.clone();
    let mut pq = project_to_pq(init, ctx)?;
    let mut q = project_to_quadruplet(init, ctx)?;
    let mut out = [Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1)];
    for t in 0..=steps {
        out[0].push(residual(&w, &data.samples()[0])?);
        out[1].push(pq_residual(&pq, ctx));
        out[2].push(quadruplet_residual(&q, ctx));
        if t < steps {
            w = gd_step(&w, &data, ctx.eta).map_err(|_| EosError::InvalidArgument("non-finite weights".into()))?;
            pq = pq_step(&pq, ctx);
            q = quadruplet_step(&q, ctx);
        }
    }
    Ok(out)
}
