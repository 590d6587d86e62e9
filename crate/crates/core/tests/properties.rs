#[path = "../../verify/src/oracle.rs"]
mod oracle;

use eos_lab::fixed_point::toy::{toy_run, Schedule, ToyParams};
use eos_lab::fixed_point::{aux_map, aux_two_periodic, MapParams, MONOTONE_LIMIT};
use eos_lab::model::{
    gd_step, generate_dataset, gradient, loss, residuals, run_gd, Dataset, HyperParams, InitScheme, Recording, Sample,
    Termination, WeightState,
};
use eos_lab::regime::{
    detect_phase_markers, envelope_contracts_after, envelope_expands_between, geometric_grid, simulate, sweep_eta,
    ClassifyConfig, Regime, RunContext,
};
use eos_lab::reparam::{diagnostics, project_to_quadruplet, quadruplet_step, reduce, reduced_step, BasisContext};
use eos_lab::sharpness::{hessian, largest_eigenvalue, sharpness};
use proptest::prelude::*;

fn weights(d: usize) -> impl Strategy<Value = WeightState> {
    (prop::collection::vec(-1.5f64..1.5, d), prop::collection::vec(-1.5f64..1.5, d))
        .prop_map(|(p, m)| WeightState { w_plus: p, w_minus: m })
}

fn data_and_weights() -> impl Strategy<Value = (Dataset, WeightState)> {
    (1usize..6, 1usize..4, any::<u64>()).prop_flat_map(|(d, n, seed)| {
        (Just(generate_dataset(d, n, 1, seed).unwrap()), weights(d))
    })
}

/// Iterates the quadruplet until the residual first reaches `-mu / 2` (with `mu = 1`).
fn until_tau(x: f64, me: f64, alpha: f64) -> (eos_lab::reparam::Quadruplet, usize) {
    let ctx = BasisContext::new(x, 1.0, me);
    let mut q = project_to_quadruplet(&WeightState::symmetric(2, alpha), &ctx).unwrap();
    let mut t = 0;
    while eos_lab::reparam::quadruplet_residual(&q, &ctx) < -0.5 {
        q = quadruplet_step(&q, &ctx);
        t += 1;
        assert!(t < 200_000);
    }
    (q, t)
}

fn run_single(x: f64, mu: f64, eta: f64, alpha: f64) -> eos_lab::regime::Outcome {
    simulate(&Dataset::two_dim(x, mu), InitScheme::Symmetric, &HyperParams::new(eta, alpha), &ClassifyConfig::default())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences((data, w) in data_and_weights()) {
        let g = gradient(&w, &data).unwrap();
        let fd = oracle::fd_gradient(&w, &data, 1e-6);
        prop_assert!(oracle::rel_err(&g, &fd, 1e-12) <= 1e-6);
    }

    #[test]
    fn interpolator_is_a_fixed_point(w in weights(3), x in prop::collection::vec(-2.0f64..2.0, 3)) {
        let beta = w.beta();
        let y: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let data = Dataset::single(x, y, beta).unwrap();
        // y is summed in the same order as the residual; skip draws where rounding still leaves r != 0
        let r = residuals(&w, &data).unwrap()[0];
        prop_assume!(r == 0.0);
        prop_assert_eq!(gd_step(&w, &data, 0.7).unwrap(), w);
    }

    #[test]
    fn loss_symmetric_under_swap(w in weights(3), x in prop::collection::vec(-2.0f64..2.0, 3), y in -2.0f64..2.0) {
        let bs = vec![0.5, -0.25, 0.0];
        let a = Dataset::single(x.clone(), y, bs.clone()).unwrap();
        let b = Dataset::single(x, -y, bs.iter().map(|v| -v).collect()).unwrap();
        let swapped = WeightState { w_plus: w.w_minus.clone(), w_minus: w.w_plus.clone() };
        prop_assert_eq!(loss(&w, &a).unwrap(), loss(&swapped, &b).unwrap());
    }

    #[test]
    fn trajectories_are_deterministic(seed in any::<u64>(), eta in 0.05f64..1.5) {
        let data = generate_dataset(4, 2, 2, seed).unwrap();
        let hp = HyperParams::new(eta, 0.05).with_max_steps(300);
        let w0 = WeightState::symmetric(4, 0.05);
        let a = run_gd(&w0, &data, &hp, Recording::for_dim(4, true)).unwrap();
        let b = run_gd(&w0, &data, &hp, Recording::for_dim(4, true)).unwrap();
        prop_assert!(a.residuals.iter().zip(&b.residuals).all(|(p, q)| p.to_bits() == q.to_bits()));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sign_flip_of_second_coordinate(x in 0.05f64..0.95, eta in 0.2f64..1.8, p2 in 0.005f64..0.05, m2 in 0.005f64..0.05) {
        let pos = Dataset::single(vec![1.0, x], 1.0, vec![1.0, 0.0]).unwrap();
        let neg = Dataset::single(vec![1.0, -x], 1.0, vec![1.0, 0.0]).unwrap();
        let a0 = WeightState { w_plus: vec![0.01, p2], w_minus: vec![0.01, m2] };
        let b0 = WeightState { w_plus: vec![0.01, m2], w_minus: vec![0.01, p2] };
        let hp = HyperParams::new(eta, 0.01).with_max_steps(500);
        let a = run_gd(&a0, &pos, &hp, Recording::for_dim(2, false)).unwrap();
        let b = run_gd(&b0, &neg, &hp, Recording::for_dim(2, false)).unwrap();
        prop_assert_eq!(a.residuals.len(), b.residuals.len());
        for (p, q) in a.residuals.iter().zip(&b.residuals) {
            prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn hessian_symmetric_and_matches_fd((data, w) in data_and_weights()) {
        let h = hessian(&w, &data).unwrap();
        let m = h.nrows();
        for i in 0..m {
            for j in 0..m {
                prop_assert_eq!(h[(i, j)], h[(j, i)]);
            }
        }
        let fd = oracle::fd_hessian(&w, 1e-6, |u| gradient(u, &data).unwrap());
        let a: Vec<f64> = (0..m * m).map(|k| h[(k / m, k % m)]).collect();
        let f: Vec<f64> = fd.iter().flatten().copied().collect();
        prop_assert!(oracle::rel_err(&a, &f, 1e-12) <= 1e-6);
    }

    #[test]
    fn sharpness_is_homogeneous((data, w) in data_and_weights(), c in 0.01f64..100.0) {
        let h = hessian(&w, &data).unwrap();
        let s = largest_eigenvalue(&h).unwrap();
        let sc = largest_eigenvalue(&(&h * c)).unwrap();
        prop_assert!((sc - c * s).abs() <= 1e-10 * (c * s).abs().max(1.0));
        prop_assert!((sharpness(&w, &data).unwrap() - s).abs() <= 1e-12 * s.abs().max(1.0));
    }

    #[test]
    fn quadruplets_stay_nonnegative(x in 0.05f64..0.95, mu in 0.3f64..2.0, me in 0.2f64..1.9, alpha in 1e-3f64..0.1) {
        let ctx = BasisContext::new(x, mu, me / mu);
        let mut q = project_to_quadruplet(&WeightState::symmetric(2, alpha), &ctx).unwrap();
        for _ in 0..1000 {
            prop_assert!(q.is_nonnegative());
            q = quadruplet_step(&q, &ctx);
            if !q.a.is_finite() {
                break;
            }
        }
    }

    #[test]
    fn a_and_b_grow_while_residual_negative(x in 0.05f64..0.95, mu in 0.3f64..2.0, me in 0.2f64..1.9, alpha in 1e-3f64..0.1) {
        let ctx = BasisContext::new(x, mu, me / mu);
        let mut q = project_to_quadruplet(&WeightState::symmetric(2, alpha), &ctx).unwrap();
        for _ in 0..500 {
            let r = eos_lab::reparam::quadruplet_residual(&q, &ctx);
            let next = quadruplet_step(&q, &ctx);
            // closer to zero the growth factor rounds to one
            if r > -mu && r < -1e-12 {
                prop_assert!(next.a > q.a && next.b > q.b);
            }
            q = next;
        }
    }

    #[test]
    fn initial_phase_decay(x in 0.05f64..0.95, me in 0.3f64..1.4, alpha in 1e-4f64..1e-2) {
        let (q, _) = until_tau(x, me, alpha);
        prop_assert!(q.a_prime <= 10.0 * alpha.powi(4), "a' = {}", q.a_prime);
    }

    #[test]
    fn initial_phase_b_prime_ratio(x in 0.3f64..0.95, me in 0.3f64..1.9, alpha in 1e-4f64..1e-2) {
        let (q, _) = until_tau(x, me, alpha);
        prop_assert!(q.b_prime < alpha * q.b, "b'/b = {}", q.b_prime / q.b);
    }

    #[test]
    fn two_step_lower_bound(x in 0.05f64..0.95, me in 0.5f64..1.9, alpha in 1e-3f64..1e-2) {
        let ctx = BasisContext::new(x, 1.0, me);
        let mut q = project_to_quadruplet(&WeightState::symmetric(2, alpha), &ctx).unwrap();
        let mut path = Vec::new();
        for _ in 0..3000 {
            path.push((eos_lab::reparam::quadruplet_residual(&q, &ctx), diagnostics(&q, &ctx).alpha));
            q = quadruplet_step(&q, &ctx);
        }
        for w in path.windows(3) {
            let ((r0, a0), (r1, a1), (r2, _)) = (w[0], w[1], w[2]);
            // the bound needs a nonnegative contraction coefficient at t
            if r0 < 0.0 && r1 > 0.0 && a0 >= 0.0 {
                prop_assert!(r2 >= (1.0 - a1) * (1.0 - a0) * r0 - 1e-10);
            }
        }
    }

    #[test]
    fn auxiliary_map_monotone_window(me in 1.0001f64..MONOTONE_LIMIT, mu in 0.5f64..2.0) {
        let eta = me / mu;
        let p = MapParams::new(mu, eta, 0.5);
        let (lo, hi) = (-(2.0 * me - 1.0) / (3.0 * eta), 1.0 / eta);
        let n = 10_000;
        let mut prev = f64::INFINITY;
        for i in 0..=n {
            let rho = lo + (hi - lo) * i as f64 / n as f64;
            let g = aux_map(rho, &p);
            prop_assert!(g < prev);
            prop_assert!(rho * g <= 1e-15);
            prev = g;
        }
    }

    #[test]
    fn toy_contraction(a in 0.01f64..0.99, r0 in -0.9f64..-0.01) {
        let run = toy_run(&ToyParams { alpha: Schedule::Constant(a), beta: Schedule::Constant(1.0), r0 }, 400).unwrap();
        prop_assume!(run.r.windows(2).all(|w| w[0] * w[1] < 0.0 || w[0].abs() < 1e-300));
        for t in 0..run.r.len() - 2 {
            if run.r[t] < -1e-12 {
                prop_assert!(run.r[t + 2].abs() < (1.0 - a).powi(2) * run.r[t].abs());
            }
        }
    }

    #[test]
    fn converged_limits_interpolate(seed in any::<u64>(), eta in 0.1f64..1.0) {
        let data = generate_dataset(6, 2, 2, seed).unwrap();
        let out = simulate(&data, InitScheme::Symmetric, &HyperParams::new(eta, 0.1).with_max_steps(20_000), &ClassifyConfig::default()).unwrap();
        if out.log.termination == Termination::Converged {
            let beta = out.report.beta_inf.clone().unwrap();
            for s in data.samples() {
                let fit: f64 = s.x.iter().zip(&beta).map(|(a, b)| a * b).sum();
                prop_assert!((fit - s.y).abs() <= 1e-8);
            }
        }
    }
}

// Envelope, containment and crossing checks on the reduced map with s = 0 as reference.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduced_orbit_dominated_by_auxiliary(me in 1.001f64..MONOTONE_LIMIT, xf in 0.05f64..0.95, r0 in -0.5f64..-0.001, s0 in 0.0f64..0.05) {
        let p = MapParams::new(1.0, me, xf / me);
        let Some(path) = alternating_orbit(&p, r0, s0) else { return Ok(()) };
        for (r, rho) in path {
            prop_assert!(r * rho >= 0.0);
            prop_assert!(r.abs() <= rho.abs() + 1e-15);
        }
    }

    #[test]
    fn orbit_contained_in_two_cycle_bounds(me in 1.001f64..MONOTONE_LIMIT, xf in 0.05f64..0.95, frac in 0.001f64..1.0, s0 in 0.0f64..0.05) {
        let p = MapParams::new(1.0, me, xf / me);
        let (hi, lo) = aux_two_periodic(&p).unwrap();
        // start inside the bounds; outside them the containment need not hold
        let r0 = lo.max(-0.5) * frac;
        let Some(path) = alternating_orbit(&p, r0, s0) else { return Ok(()) };
        for (r, rho) in path {
            prop_assert!(lo - 1e-12 <= r && r <= hi + 1e-12);
            prop_assert!(lo - 1e-12 <= rho && rho <= hi + 1e-12);
        }
    }
}

/// `(r_t, rho_t)` for 2000 steps, or `None` when `r` stops alternating in sign.
fn alternating_orbit(p: &MapParams, r0: f64, s0: f64) -> Option<Vec<(f64, f64)>> {
    let (mut r, mut s, mut rho) = (r0, s0, r0);
    let mut path = Vec::new();
    for _ in 0..2000 {
        path.push((r, rho));
        let (nr, ns) = p.step((r, s));
        if nr * r > 0.0 && r.abs() > 1e-300 {
            return None;
        }
        r = nr;
        s = ns;
        rho = aux_map(rho, p);
    }
    Some(path)
}

fn reduced_path(x: f64, me: f64, alpha: f64) -> (Vec<(f64, f64, f64)>, eos_lab::regime::PhaseMarkers) {
    let out = run_single(x, 1.0, me, alpha);
    let ctx = BasisContext::new(x, 1.0, me);
    let path = (0..out.log.len())
        .map(|t| {
            let q = project_to_quadruplet(out.log.weights_at(t).unwrap(), &ctx).unwrap();
            let st = reduce(&q, &ctx);
            (st.r, st.s, diagnostics(&q, &ctx).alpha)
        })
        .collect();
    let m = detect_phase_markers(&out.log, &RunContext::for_dataset(&Dataset::two_dim(x, 1.0), me), &ClassifyConfig::default());
    (path, m)
}

#[test]
fn b_prime_ratio_fails_for_small_x() {
    // b'/b at tau is about (alpha^2)^(2x), so the ratio bound needs x above roughly 1/4
    let (q, _) = until_tau(0.05, 0.8, 1e-3);
    assert!(q.b_prime > 1e-3 * q.b);
}

#[test]
fn a_prime_bound_fails_for_large_steps() {
    // a * a' shrinks by (1 - eta^2 r^2)^2 per step, which exceeds one once eta |r| > sqrt(2)
    let (q, _) = until_tau(0.05, 1.8, 1e-4);
    assert!(q.a_prime > 10.0 * 1e-4f64.powi(4));
}

#[test]
fn crossing_step_bound() {
    for me in [1.02, 1.05, 1.08, 1.11] {
        for x in [0.1, 0.3, 0.5, 0.7] {
            if x >= 1.0 / me {
                continue;
            }
            let (path, m) = reduced_path(x, me, 0.01);
            let ft = m.frak_t.expect("transition detected");
            let (r, s, _) = path[ft];
            assert!(r > 0.0, "mu*eta {me}, x {x}: r = {r}");
            assert!(s <= 4.0 * (me - 1.0), "mu*eta {me}, x {x}: s = {s}");
        }
    }
}

#[test]
fn product_bound() {
    for me in [1.02, 1.05, 1.1, 1.5] {
        for x in [0.1, 0.3, 0.6] {
            if x >= 1.0 / me {
                continue;
            }
            let (path, _) = reduced_path(x, me, 0.01);
            for w in path.windows(2) {
                let ((r0, s0, a0), (r1, _, _)) = (w[0], w[1]);
                if a0 > 0.0 && s0 > 0.0 && r0 < 0.0 {
                    let prod = (1.0 - x * me * r0) * (1.0 - x * me * r1);
                    assert!(prod >= 1.0 - 1e-12, "mu*eta {me}, x {x}: {prod}");
                }
            }
        }
    }
}

#[test]
fn reduced_system_tracks_full_after_tau() {
    for me in [0.6, 0.9, 1.05, 1.1] {
        for x in [0.2, 0.5] {
            let alpha = 0.01;
            let out = run_single(x, 1.0, me, alpha);
            let ctx = BasisContext::new(x, 1.0, me);
            let m = detect_phase_markers(&out.log, &RunContext::for_dataset(&Dataset::two_dim(x, 1.0), me), &ClassifyConfig::default());
            let tau = m.tau.unwrap();
            let q = project_to_quadruplet(out.log.weights_at(tau).unwrap(), &ctx).unwrap();
            let bound = 10.0 * (q.a_prime + q.b_prime) * (1.0 + x * x);
            let mut st = reduce(&q, &ctx);
            for t in tau..(tau + 1000).min(out.log.len()) {
                let full = out.log.residuals_at(t)[0];
                assert!((st.r - full).abs() <= bound, "mu*eta {me}, x {x}, t {t}: {} vs {full}", st.r);
                st = reduced_step(&st, &ctx);
            }
        }
    }
}

#[test]
fn phase_transition_iff_x_below_inverse() {
    for me in [1.02, 1.06, 1.1] {
        for x in [0.1, 0.4, 0.8, 0.95] {
            let out = run_single(x, 1.0, me, 0.01);
            if x < 1.0 / me {
                assert!(out.report.frak_t.is_some(), "mu*eta {me}, x {x}");
                assert_eq!(out.log.termination, Termination::Converged);
            } else {
                assert!(out.report.frak_t.is_none(), "mu*eta {me}, x {x}");
                assert_eq!(out.report.regime(), Regime::Periodic(2), "mu*eta {me}, x {x}");
            }
        }
    }
}

#[test]
fn envelope_split_between_eos_bands() {
    let grid = geometric_grid(0.85, 1.8, 40);
    let mut seen = (0, 0);
    for &eta in &grid {
        let out = run_single(0.5, 1.0, eta, 0.01);
        let r = out.log.residual_series(0);
        match out.report.regime() {
            Regime::EosSub => {
                seen.0 += 1;
                assert!(envelope_contracts_after(&r, out.report.t0.unwrap(), 1e-12), "eta {eta}");
            }
            Regime::EosSuper => {
                seen.1 += 1;
                let (t0, ft) = (out.report.t0.unwrap(), out.report.frak_t.unwrap());
                assert!(envelope_expands_between(&r, t0, ft), "eta {eta}");
            }
            _ => {}
        }
    }
    assert!(seen.0 > 0 && seen.1 > 0);
}

#[test]
fn generic_two_dimensional_data_reach_eos() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let grid = geometric_grid(0.01, 100.0, 20);
    for i in 0..20 {
        let (x1, x2): (f64, f64) = loop {
            let a = rng.random_range(-2.0..2.0);
            let b = rng.random_range(-2.0..2.0);
            if f64::abs(a) > 0.1 && f64::abs(b) > 0.1 && f64::abs(a - b) > 0.1 { break (a, b) }
        };
        let y = loop {
            let v: f64 = rng.random_range(-2.0..2.0);
            if v.abs() > 0.1 { break v }
        };
        let data = Dataset::new(vec![Sample { x: vec![x1, x2], y }], vec![0.0, 0.0]).unwrap();
        let sweep = sweep_eta(&data, InitScheme::Symmetric, &HyperParams::new(1.0, 0.01), &grid, &ClassifyConfig::default()).unwrap();
        let labels = sweep.labels();
        assert!(labels.iter().any(Regime::is_eos), "dataset {i}: x = ({x1}, {x2}), y = {y}");
    }
}
