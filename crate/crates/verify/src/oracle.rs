//! Reference computations that share no code with the library under test.
#![allow(dead_code)]

use eos_lab::model::{loss, Dataset, WeightState};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i][i]).collect()
}

fn flat(w: &WeightState) -> Vec<f64> {
    w.w_plus.iter().chain(&w.w_minus).copied().collect()
}

fn unflat(v: &[f64]) -> WeightState {
    let d = v.len() / 2;
    WeightState { w_plus: v[..d].to_vec(), w_minus: v[d..].to_vec() }
}

/// Central-difference gradient of the loss.
pub fn fd_gradient(w: &WeightState, data: &Dataset, h: f64) -> Vec<f64> {
    let base = flat(w);
    (0..base.len())
        .map(|i| {
            let mut up = base.clone();
            let mut dn = base.clone();
            up[i] += h;
            dn[i] -= h;
            (loss(&unflat(&up), data).unwrap() - loss(&unflat(&dn), data).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Central differences of a gradient function, symmetrized.
pub fn fd_hessian(w: &WeightState, h: f64, grad: impl Fn(&WeightState) -> Vec<f64>) -> Vec<Vec<f64>> {
    let base = flat(w);
    let n = base.len();
    let mut out = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut up = base.clone();
        let mut dn = base.clone();
        up[j] += h;
        dn[j] -= h;
        let gu = grad(&unflat(&up));
        let gd = grad(&unflat(&dn));
        for i in 0..n {
            out[i][j] = (gu[i] - gd[i]) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// `||a - b||_2 / max(||b||_2, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(floor)
}
