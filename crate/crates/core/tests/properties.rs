mod common;

use common::{kkt_minimizer, random_matrix, random_spd};
use nalgebra::{DMatrix, DVector};
use oedctl_core::barrier::{
    active_set, design_p2, xi_finite, xi_jacobian_finite, xi_jacobian_limit, xi_limit,
};
use oedctl_core::controller::{assemble_rr, constrained_system_terms, eta, oed_control};
use oedctl_core::examples::{
    portfolio_synthetic, sclqr_paper, synthetic_family, QMode, QuadraticProblem, M1,
};
use oedctl_core::ipiter::{ip_step, stack, stacked_ip_step, unstack};
use oedctl_core::linalg::{factor_spd, max_row_sum_norm, wpinv_build};
use oedctl_core::metrics::{accuracy_from_series, emulate_delayed, fit_cube_trend};
use oedctl_core::problem::{check_derivatives, eval_bundle};
use oedctl_core::rng::SplitMix64;
use oedctl_core::sclqr::{build_projectors, sclqr_control, solve_sclqr, CostForm};
use oedctl_core::BarrierConfig;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn random_vector(rng: &mut SplitMix64, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.next_signed())
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn spd_solve_roundtrip(seed in any::<u64>(), n in 1usize..=64) {
        let mut rng = SplitMix64::new(seed);
        let m = random_spd(&mut rng, n);
        let b = random_vector(&mut rng, n);
        let f = factor_spd(&m, false).unwrap();
        let x = f.solve_vec(&b).unwrap();
        prop_assert!((&m * x - &b).norm() <= 1e-9 * b.norm().max(1e-300));
        let r = f.reconstruct();
        prop_assert!((&r - r.transpose()).amax() <= 1e-12 * r.amax());
        prop_assert!((&r - &m).amax() <= 1e-10 * m.amax());
    }

    #[test]
    fn diagonal_path_matches_dense(seed in any::<u64>(), n in 1usize..=48) {
        let mut rng = SplitMix64::new(seed);
        let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.next_range(0.1, 10.0)));
        let b = random_vector(&mut rng, n);
        let fast = factor_spd(&d, true).unwrap();
        let dense = factor_spd(&d, false).unwrap();
        prop_assert!(fast.is_diagonal() && !dense.is_diagonal());
        let (a, c) = (fast.solve_vec(&b).unwrap(), dense.solve_vec(&b).unwrap());
        prop_assert!((&a - &c).amax() <= 1e-12 * c.amax().max(1e-300));
    }

    #[test]
    fn weighted_pinv_identities(seed in any::<u64>(), dx in 1usize..=32, frac in 0.0f64..1.0) {
        let dy = 1 + ((dx - 1) as f64 * frac) as usize;
        let mut rng = SplitMix64::new(seed);
        let h = random_matrix(&mut rng, dy, dx);
        let w = factor_spd(&random_spd(&mut rng, dx), false).unwrap();
        let pinv = wpinv_build(&h, &w).unwrap();
        let right = &h * pinv.matrix();
        prop_assert!((right - DMatrix::identity(dy, dy)).amax() <= 1e-9);
        let p = pinv.null_projector();
        prop_assert!((&p * &p - &p).amax() <= 1e-9);
        prop_assert!((&h * &p).amax() <= 1e-9);
        let v = random_vector(&mut rng, dx);
        let once = pinv.null_project(&v).unwrap();
        prop_assert!((pinv.null_project(&once).unwrap() - &once).amax() <= 1e-9);
    }

    #[test]
    fn barrier_limits_at_finite_p1(
        p1_exp in 2u32..=4,
        s in prop::sample::select(vec![-1.0f64, -0.1, 0.1, 1.0]),
        p2 in 0.1f64..10.0,
    ) {
        let p1 = 10f64.powi(p1_exp as i32);
        let bound = 10.0 * p2 * p2 * (-p1 * s.abs()).exp() + 1e-8;
        prop_assert!((xi_finite(s, p1, p2) - xi_limit(s, p2)).abs() <= bound);
        prop_assert!((xi_jacobian_finite(s, p1, p2) - xi_jacobian_limit(s, p2)).abs() <= bound);
    }

    #[test]
    fn xi_jacobian_limit_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0, p2 in 0.1f64..100.0) {
        prop_assume!(a != 0.0 && b != 0.0);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(xi_jacobian_limit(lo, p2) <= xi_jacobian_limit(hi, p2));
        prop_assert!(xi_limit(lo, p2) <= xi_limit(hi, p2));
        prop_assert!(xi_limit(1e-12, p2) <= p2 * p2 * 1e-12 * (1.0 + 1e-15));
    }

    #[test]
    fn designed_p2_hits_ratio(seed in any::<u64>(), n in 2usize..=12, rows in 1usize..=4, k_exp in 3.0f64..6.0) {
        let mut rng = SplitMix64::new(seed);
        let q = random_spd(&mut rng, n);
        let g = random_matrix(&mut rng, rows, n);
        let k_rq = 10f64.powf(k_exp);
        let p2 = design_p2(&q, &g, k_rq).unwrap();
        let ratio = p2 * p2 * max_row_sum_norm(&(g.transpose() * &g)) / max_row_sum_norm(&q);
        prop_assert!((ratio - (k_rq - 1.0)).abs() <= 1e-12 * k_rq);
    }

    #[test]
    fn active_set_is_strict(seed in any::<u64>(), n in 1usize..=10, rows in 0usize..=12) {
        let mut rng = SplitMix64::new(seed);
        let g = random_matrix(&mut rng, rows, n);
        let c = random_vector(&mut rng, rows);
        let x = random_vector(&mut rng, n);
        let a = active_set(&g, &c, &x).unwrap();
        let full = &g * &x + &c;
        for i in 0..rows {
            prop_assert_eq!(a.indices.contains(&i), full[i] > 0.0);
        }
        prop_assert!((&a.gbar_mat * &x + c.select_rows(a.indices.iter()) - &a.gbar).amax() <= 1e-12);
    }
}

/// Quadratic problem with random data, `d_y` outputs and `d_c` box-like
/// inequality rows.
fn random_quadratic(rng: &mut SplitMix64, dx: usize, dy: usize, dc: usize) -> QuadraticProblem {
    let mut p = QuadraticProblem::new(
        random_spd(rng, dx),
        random_matrix(rng, dy, dx),
        random_vector(rng, dy),
    );
    p.center = random_vector(rng, dx);
    p.g = random_matrix(rng, dc, dx);
    p.c = random_vector(rng, dc);
    p
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn augmented_hessian_branches(seed in any::<u64>(), dx in 2usize..=10, dc in 1usize..=6) {
        let mut rng = SplitMix64::new(seed);
        let p = random_quadratic(&mut rng, dx, 1, dc);
        let x = random_vector(&mut rng, dx) * 2.0;
        let b = eval_bundle(&p, 0.0, &x).unwrap();
        let aug = assemble_rr(&b, &BarrierConfig::default()).unwrap();
        if aug.active.is_empty() {
            prop_assert_eq!(&aug.r, &b.cost_gradient);
            prop_assert_eq!(&aug.hessian, &b.cost_hessian);
        } else {
            let w = aug.p2_used * aug.p2_used;
            let want = aug.active.gbar_mat.transpose() * &aug.active.gbar_mat * w;
            let got = &aug.hessian - &b.cost_hessian;
            prop_assert!((got - &want).amax() <= 1e-9 * want.amax());
        }
    }

    #[test]
    fn one_step_exactness(seed in any::<u64>(), dx in 1usize..=16, dy_frac in 0.0f64..1.0) {
        let dy = 1 + ((dx.min(4) - 1) as f64 * dy_frac) as usize;
        let mut rng = SplitMix64::new(seed);
        let p = random_quadratic(&mut rng, dx, dy, 0);
        let x = random_vector(&mut rng, dx);
        let next = ip_step(&p, &BarrierConfig::default(), 0.0, &x).unwrap();
        let want = kkt_minimizer(&p.q, &p.center, &p.h, &p.ybar);
        prop_assert!((next - &want).amax() <= 1e-8 * want.amax().max(1.0));
    }

    #[test]
    fn constrained_projector_identities(seed in any::<u64>(), dx in 3usize..=10, dc in 0usize..=2) {
        let mut rng = SplitMix64::new(seed);
        let p = random_quadratic(&mut rng, dx, 1, dc);
        let x = random_vector(&mut rng, dx);
        let b = eval_bundle(&p, 0.0, &x).unwrap();
        let (_, omega_b) = constrained_system_terms(&b).unwrap();
        prop_assert!((&omega_b * &omega_b - &omega_b).amax() <= 1e-9);
        prop_assert!((&p.h * &omega_b).amax() <= 1e-9);
        let a = active_set(&p.g, &p.c, &x).unwrap();
        if !a.is_empty() {
            prop_assert!((&a.gbar_mat * &omega_b).amax() <= 1e-9);
        }
    }

    /// Crossing a constraint boundary moves the augmented gradient `r`
    /// only by `p2²·ḡ`, which vanishes on the boundary. The Hessian `R`
    /// jumps by `p2²ḠᵀḠ`, so `η` itself is not continuous there.
    #[test]
    fn augmented_gradient_continuous_at_boundary(seed in any::<u64>(), dx in 2usize..=8) {
        let mut rng = SplitMix64::new(seed);
        let mut p = random_quadratic(&mut rng, dx, 1, 1);
        let x = random_vector(&mut rng, dx);
        let gx = (&p.g * &x)[0];
        let cfg = BarrierConfig::default();
        let mut side = |offset: f64| {
            p.c[0] = offset - gx;
            let b = eval_bundle(&p, 0.0, &x).unwrap();
            let aug = assemble_rr(&b, &cfg).unwrap();
            (aug.r, aug.p2_used, aug.active.len())
        };
        let (inside, _, n_in) = side(-1e-9);
        let (outside, p2, n_out) = side(1e-9);
        prop_assert_eq!((n_in, n_out), (0, 1));
        let row = p.g.row(0).norm();
        prop_assert!((outside - inside).norm() <= 2e-9 * p2 * p2 * row);
    }

    #[test]
    fn oed_realizes_scaled_eta(seed in any::<u64>(), t in 0.0f64..20.0, k_x in 1.0f64..1000.0) {
        let mut rng = SplitMix64::new(seed);
        let x = random_vector(&mut rng, 2) * 0.8;
        let b = eval_bundle(&M1, t, &x).unwrap();
        let aug = assemble_rr(&b, &BarrierConfig::default()).unwrap();
        let e = eta(&b, &aug).unwrap();
        let u = oed_control(&b, &e, k_x).unwrap();
        let realized = &b.input_matrix * u + &b.drift;
        let target = &e * k_x;
        prop_assert!((realized - &target).amax() <= 1e-9 * target.amax().max(1.0));
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn stacked_step_matches_instants(seed in any::<u64>(), n in 1usize..=32) {
        let mut rng = SplitMix64::new(seed);
        let cfg = BarrierConfig::default();
        let mut times: Vec<f64> = (0..n).map(|_| rng.next_range(0.0, 20.0)).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let states: Vec<DVector<f64>> = (0..n).map(|_| random_vector(&mut rng, 2) * 0.6).collect();
        let step = unstack(&stacked_ip_step(&M1, &cfg, &times, &stack(&states)).unwrap(), 2);
        for ((t, x), s) in times.iter().zip(&states).zip(&step) {
            let single = ip_step(&M1, &cfg, *t, x).unwrap();
            prop_assert!((single - s).amax() <= 1e-12);
        }
    }

    #[test]
    fn packaged_derivatives(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let t = rng.next_range(0.0, 20.0);
        let x2 = random_vector(&mut rng, 2) * 0.8;
        prop_assert!(check_derivatives(&M1, t, &x2, 1e-5).unwrap().max_error() <= 1e-4);
        let syn = synthetic_family(8, seed % 7, QMode::Spd);
        let x8 = random_vector(&mut rng, 8);
        prop_assert!(check_derivatives(&syn, t, &x8, 1e-5).unwrap().max_error() <= 1e-4);
        let port = portfolio_synthetic(6, seed % 5);
        let x6 = random_vector(&mut rng, 6).abs() / 6.0;
        prop_assert!(check_derivatives(&port, t, &x6, 1e-5).unwrap().max_error() <= 1e-4);
    }

    #[test]
    fn sclqr_exact_reduction(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let m = sclqr_paper();
        let (_, sol) = solve_sclqr(&m, CostForm::Exact).unwrap();
        let (omega_a, omega_b) = build_projectors(&m).unwrap();
        let x = random_vector(&mut rng, 3);
        let u = sclqr_control(&m, &sol, &x).unwrap();
        let original = &m.a * &x + &m.b * u;
        let transformed = &omega_a * &x - &omega_b * (&sol.gain * &x);
        prop_assert!((original - &transformed).amax() <= 1e-9 * transformed.amax().max(1.0));
    }

    #[test]
    fn accuracy_of_identical_series(seed in any::<u64>(), n in 2usize..=50) {
        let mut rng = SplitMix64::new(seed);
        let times: Vec<f64> = (0..n).map(|i| 0.01 * i as f64).collect();
        let states: Vec<DVector<f64>> = (0..n).map(|_| random_vector(&mut rng, 3)).collect();
        let sigma: Vec<f64> = (0..n).map(|_| rng.next_range(0.1, 2.0)).collect();
        let acc = accuracy_from_series(&times, &states, &sigma, &states, &sigma, &[]).unwrap();
        prop_assert_eq!(acc.e_x, 0.0);
        prop_assert_eq!(acc.e_sigma, 1.0);
    }

    /// Slowly varying series: a longer delay never brings the held value
    /// closer to the current one.
    #[test]
    fn delayed_error_grows_with_delay(seed in any::<u64>(), freq in 0.1f64..1.0, amp in 0.1f64..2.0) {
        let mut rng = SplitMix64::new(seed);
        let phase = rng.next_range(0.0, 6.0);
        let n = 400;
        let times: Vec<f64> = (0..n).map(|i| 0.01 * i as f64).collect();
        let chi: Vec<DVector<f64>> = times
            .iter()
            .map(|t| DVector::from_vec(vec![amp * (freq * t + phase).sin(), amp * t]))
            .collect();
        let fast = vec![1.0; n];
        let ones = vec![1.0; n];
        let mut prev = 0.0;
        for ratio in [1.0, 3.0, 10.0] {
            let out = emulate_delayed(&vec![ratio; n], &fast, &chi).unwrap();
            let e = accuracy_from_series(&times, &out, &ones, &chi, &ones, &[]).unwrap().e_x;
            prop_assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn trend_fit_scale_invariant(seed in any::<u64>(), scale_exp in -6.0f64..6.0) {
        let mut rng = SplitMix64::new(seed);
        let dims = [32.0f64, 64.0, 128.0, 256.0, 512.0];
        let times: Vec<f64> = dims
            .iter()
            .map(|d| (1e-3 * d + 0.01).powi(3) * rng.next_range(0.7, 1.3))
            .collect();
        let c = 10f64.powf(scale_exp);
        let scaled: Vec<f64> = times.iter().map(|t| t * c).collect();
        let a = fit_cube_trend(&dims, &times).unwrap();
        let b = fit_cube_trend(&dims, &scaled).unwrap();
        prop_assert!((a.r_squared - b.r_squared).abs() <= 1e-12);
        prop_assert!((b.p1 - a.p1 * c.cbrt()).abs() <= 1e-9 * b.p1.abs());
    }
}
