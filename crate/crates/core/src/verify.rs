//! Quick property suite behind `oedctl verify`.

use nalgebra::{DMatrix, DVector};

use crate::barrier::{xi_limit, BarrierConfig};
use crate::error::Result;
use crate::examples::{Frozen, QuadraticProblem, M1};
use crate::ipiter::{
    ip_step, solve_instant, stack, stacked_ip_step, unstack, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::linalg::{factor_spd, solve_general, wpinv_build};
use crate::metrics::{accuracy_from_series, emulate_delayed, fit_cube_trend};
use crate::problem::{check_derivatives, ProblemDef};
use crate::rng::SplitMix64;
use crate::sim::{rk4_step, simulate_closed_loop, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value against `bound`.
    pub observed: f64,
    pub bound: f64,
}

fn check(name: &'static str, observed: Result<f64>, bound: f64) -> PropertyResult {
    let observed = observed.unwrap_or(f64::INFINITY);
    PropertyResult {
        name,
        passed: observed <= bound,
        observed,
        bound,
    }
}

pub(crate) fn random_matrix(rng: &mut SplitMix64, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.next_signed())
}

pub(crate) fn random_spd(rng: &mut SplitMix64, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    a.transpose() * &a / n as f64 + DMatrix::identity(n, n)
}

/// Worst violation of `H H^# = I`, `P² = P` and `H P = 0` over random
/// instances.
pub fn pinv_identities(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = 3 + (rng.next_u64() % 6) as usize;
        let m = 1 + (rng.next_u64() % (n as u64 - 1)) as usize;
        let h = random_matrix(&mut rng, m, n);
        let w = if rng.next_unit() < 0.5 {
            DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| 0.5 + rng.next_unit()))
        } else {
            random_spd(&mut rng, n)
        };
        let f = factor_spd(&w, false)?;
        let pinv = wpinv_build(&h, &f)?;
        let hs = pinv.matrix();
        let p = pinv.null_projector();
        worst = worst
            .max((&h * &hs - DMatrix::identity(m, m)).amax())
            .max((&p * &p - &p).amax())
            .max((&h * &p).amax());
    }
    Ok(worst)
}

/// One interior-point step from a random start against the KKT solution
/// of random equality-constrained quadratics.
pub fn newton_exactness(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = SplitMix64::new(seed);
    let cfg = BarrierConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = 3 + (rng.next_u64() % 5) as usize;
        let m = 1 + (rng.next_u64() % (n as u64 - 1)) as usize;
        let q = random_spd(&mut rng, n);
        let h = random_matrix(&mut rng, m, n);
        let ybar = DVector::from_fn(m, |_, _| rng.next_signed());
        let center = DVector::from_fn(n, |_, _| rng.next_signed());
        let mut p = QuadraticProblem::new(q.clone(), h.clone(), ybar.clone());
        p.center = center.clone();
        // [Q Hᵀ; H 0] [x; λ] = [Q a; ȳ]
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&q);
        kkt.view_mut((0, n), (n, m)).copy_from(&h.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&h);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(&q * &center));
        rhs.rows_mut(n, m).copy_from(&ybar);
        let sol = solve_general(&kkt, &rhs)?;
        let x0 = DVector::from_fn(n, |_, _| 3.0 * rng.next_signed());
        let x1 = ip_step(&p, &cfg, 0.0, &x0)?;
        worst = worst.max((x1 - sol.rows(0, n)).amax());
    }
    Ok(worst)
}

/// Relative RK4 error on `ẋ = −x` with `dt = 0.01`.
pub fn rk4_exponential() -> Result<f64> {
    let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let next = rk4_step(|_, x: &DVector<f64>| Ok(-x), 0.0, &x, 0.01)?;
    Ok((next - &x * (-0.01f64).exp()).amax() / x.amax())
}

/// Largest relative derivative mismatch on M1 at random points.
pub fn m1_derivatives(points: usize, seed: u64) -> Result<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let t = rng.next_range(0.0, 20.0);
        let x = DVector::from_vec(vec![rng.next_signed(), rng.next_signed()]);
        worst = worst.max(check_derivatives(&M1, t, &x, 1e-6)?.max_error());
    }
    Ok(worst)
}

/// Relative deviation of `|y(t) − ȳ|` from `|y(0) − ȳ|e^{−K_x t}` on
/// frozen M1 over `[0, 5/K_x]`.
pub fn output_decay(k_x: f64) -> Result<f64> {
    let p = Frozen { inner: M1, t: 1.0 };
    let cfg = SimConfig {
        t0: 0.0,
        t_final: 5.0 / k_x,
        dt: 5.0 / k_x / 500.0,
        k_x,
        ..SimConfig::default()
    };
    let x0 = DVector::from_vec(vec![0.5, 0.3]);
    let traj = simulate_closed_loop(&p, &cfg, &BarrierConfig::default(), &x0)?;
    let ybar = p.reference(0.0)[0];
    let e0 = (traj.outputs[0][0] - ybar).abs();
    let mut worst = if traj.is_complete() {
        0.0f64
    } else {
        f64::INFINITY
    };
    for (t, y) in traj.times.iter().zip(&traj.outputs) {
        let expect = e0 * (-k_x * t).exp();
        worst = worst.max(((y[0] - ybar).abs() - expect).abs() / expect);
    }
    Ok(worst)
}

/// Elementwise gap between one stacked step over `n` instants of M1 and
/// the per-instant steps.
pub fn stacked_equivalence(n: usize) -> Result<f64> {
    let cfg = BarrierConfig::default();
    let times: Vec<f64> = (0..n).map(|i| 0.5 * i as f64).collect();
    let states: Vec<DVector<f64>> = (0..n)
        .map(|i| DVector::from_vec(vec![0.4 - 0.05 * i as f64, 0.3 + 0.02 * i as f64]))
        .collect();
    let phi1 = stacked_ip_step(&M1, &cfg, &times, &stack(&states))?;
    let mut worst = 0.0f64;
    for ((t, x), y) in times.iter().zip(&states).zip(unstack(&phi1, 2)) {
        worst = worst.max((ip_step(&M1, &cfg, *t, x)? - y).amax());
    }
    Ok(worst)
}

/// Largest decrease of the delayed-emulation error as the slow/fast ratio
/// grows through 1, 3, 10 (zero when monotone).
pub fn delayed_monotonicity() -> Result<f64> {
    let cfg = BarrierConfig::default();
    let times: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
    let mut chi = Vec::with_capacity(times.len());
    let mut x = DVector::from_vec(vec![0.5, 0.3]);
    for &t in &times {
        x = solve_instant(&M1, &cfg, t, &x, DEFAULT_TOL, DEFAULT_MAX_ITER)?.chi_star;
        chi.push(x.clone());
    }
    let fast = vec![1.0; times.len()];
    let zeros = vec![0.0; times.len()];
    let mut prev = 0.0f64;
    let mut worst = 0.0f64;
    for ratio in [1.0, 3.0, 10.0] {
        let slow = vec![ratio; times.len()];
        let out = emulate_delayed(&slow, &fast, &chi)?;
        let e = accuracy_from_series(&times, &out, &zeros, &chi, &fast, &[])?.e_x;
        worst = worst.max(prev - e);
        prev = e;
    }
    Ok(worst)
}

/// `r²` change of the cube-root trend under a change of time unit.
pub fn trend_scale_invariance() -> Result<f64> {
    let dims = [32.0f64, 64.0, 128.0, 256.0];
    let times: Vec<f64> = dims
        .iter()
        .enumerate()
        .map(|(i, d)| (1e-3 * d + 0.01).powi(3) * (1.0 + 0.03 * (i as f64).sin()))
        .collect();
    let scaled: Vec<f64> = times.iter().map(|t| t * 1e6).collect();
    let a = fit_cube_trend(&dims, &times)?;
    let b = fit_cube_trend(&dims, &scaled)?;
    Ok((a.r_squared - b.r_squared).abs())
}

/// Barrier limit vanishes on the boundary.
pub fn barrier_boundary() -> Result<f64> {
    Ok(xi_limit(0.0, 7.0).abs())
}

/// One entry of the property suite.
#[derive(Debug, Clone, Copy)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub bound: f64,
    run: fn() -> Result<f64>,
}

impl PropertyCheck {
    pub fn evaluate(&self) -> PropertyResult {
        check(self.name, (self.run)(), self.bound)
    }
}

pub fn property_checks() -> Vec<PropertyCheck> {
    let c = |name, run, bound| PropertyCheck { name, bound, run };
    vec![
        c(
            "pseudoinverse and projector identities",
            || pinv_identities(100, 1),
            1e-9,
        ),
        c(
            "one-step exactness on equality-constrained quadratics",
            || newton_exactness(20, 2),
            1e-8,
        ),
        c("rk4 exponential oracle", rk4_exponential, 1e-10),
        c("m1 analytic derivatives", || m1_derivatives(20, 3), 1e-5),
        c(
            "exponential output decay on frozen m1",
            || output_decay(100.0),
            1e-6,
        ),
        c(
            "stacked step equals per-instant steps",
            || stacked_equivalence(8),
            1e-12,
        ),
        c(
            "delayed emulation error monotone in delay",
            delayed_monotonicity,
            0.0,
        ),
        c(
            "trend fit invariant to time unit",
            trend_scale_invariance,
            1e-12,
        ),
        c("barrier limit zero on boundary", barrier_boundary, 0.0),
    ]
}

pub fn run_all() -> Vec<PropertyResult> {
    property_checks()
        .iter()
        .map(PropertyCheck::evaluate)
        .collect()
}
