//! Exact Hessian of the empirical risk and its largest (signed) eigenvalue.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{EosError, Result};
use crate::model::{residual_raw, Dataset, Loss, Quadratic, TrajectoryLog, WeightState};

/// Dense `2d x 2d` Hessian over `(w_plus, w_minus)`.
pub type HessianMatrix = DMatrix<f64>;

/// Dense eigen-solve up to this size, shifted power iteration beyond.
pub const DENSE_LIMIT: usize = 64;
pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

pub fn hessian(w: &WeightState, data: &Dataset) -> Result<HessianMatrix> {
    hessian_with(w, data, &Quadratic)
}

/// Per sample: `l''(r) g g^T + l'(r) * 2 diag(x, -x)` with `g = 2 [x*w_plus; -x*w_minus]`.
pub fn hessian_with(w: &WeightState, data: &Dataset, l: &dyn Loss) -> Result<HessianMatrix> {
    let d = data.d();
    if w.d() != d || w.w_minus.len() != d {
        return Err(EosError::DimensionMismatch { expected: d, got: w.d() });
    }
    let inv_n = 1.0 / data.n() as f64;
    let mut h = DMatrix::<f64>::zeros(2 * d, 2 * d);
    let mut g = vec![0.0; 2 * d];
    for s in data.samples() {
        let r = residual_raw(w, s);
        for i in 0..d {
            g[i] = 2.0 * s.x[i] * w.w_plus[i];
            g[d + i] = -2.0 * s.x[i] * w.w_minus[i];
        }
        let c2 = l.d2(r) * inv_n;
        for i in 0..2 * d {
            for j in i..2 * d {
                let v = c2 * (g[i] * g[j]);
                h[(i, j)] += v;
                if j != i {
                    h[(j, i)] += v;
                }
            }
        }
        let c1 = 2.0 * l.d1(r) * inv_n;
        for i in 0..d {
            h[(i, i)] += c1 * s.x[i];
            h[(d + i, d + i)] -= c1 * s.x[i];
        }
    }
    Ok(h)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn largest_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(EosError::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    if m.nrows() <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(m.clone());
        Ok(eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    } else {
        power_iteration(m, POWER_TOL, POWER_MAX_ITER)
    }
}

/// Power iteration on `M + c I` with `c` a Gershgorin bound, so the dominant
/// eigenvalue of the shifted matrix is `lambda_max(M) + c`.
pub fn power_iteration(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = m.nrows();
    let shift = (0..n).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    if shift == 0.0 {
        return Ok(0.0);
    }
    let shifted = m + DMatrix::<f64>::identity(n, n) * shift;
    // fixed, non-symmetric start vector so that no eigenvector is missed by symmetry
    let mut v = DVector::<f64>::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64);
    v /= v.norm();
    let mut lambda;
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let u = &shifted * &v;
        lambda = v.dot(&u);
        // residual of the eigen-equation, not the change in lambda: slow
        // convergence can make consecutive estimates agree long before they are right
        change = (&u - &v * lambda).norm();
        if change <= tol * lambda.abs().max(1.0) {
            return Ok(lambda - shift);
        }
        let norm = u.norm();
        if norm == 0.0 {
            return Ok(-shift);
        }
        v = u / norm;
    }
    Err(EosError::PowerIterationNoConvergence { iterations: max_iter, last_change: change })
}

/// `lambda_max` of the loss Hessian at `w`.
pub fn sharpness(w: &WeightState, data: &Dataset) -> Result<f64> {
    largest_eigenvalue(&hessian(w, data)?)
}

/// Whether `S_t > 2 / eta` at some recorded step, and the first such step.
pub fn eos_flag(log: &TrajectoryLog, eta: f64) -> Result<(bool, Option<usize>)> {
    if !log.has_sharpness() {
        return Err(EosError::SharpnessNotRecorded);
    }
    let threshold = 2.0 / eta;
    let first = log
        .sharpness
        .iter()
        .position(|s| matches!(s, Some(v) if *v > threshold));
    Ok((first.is_some(), first))
}
