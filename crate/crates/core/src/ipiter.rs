//! Interior-point iteration `χ ← χ + η(t, χ, ȳ)` used as the minimizer
//! oracle, with multiplier/KKT diagnostics and the stacked trajectory form.

use nalgebra::{DMatrix, DVector};

use crate::barrier::BarrierConfig;
use crate::controller::{assemble_rr, eta_with};
use crate::error::{Error, Result};
use crate::linalg::{solve_general, wpinv_build};
use crate::problem::{eval_bundle, EvalBundle, ProblemDef};
use crate::sim::rk4_step;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Half-width of the exclusion window placed around a detected jump.
pub const JUMP_WINDOW: f64 = 0.05;
/// Near a solution a full step is kept when it shrinks `‖η‖∞` by this
/// factor.
pub const FULL_STEP_CONTRACTION: f64 = 0.9;
/// `‖η‖∞` below which the iterate counts as near a solution.
pub const NEAR_RADIUS: f64 = 1e-3;
/// Initial pseudo-time step of the RK4 step along `χ̇ = η`. The step is
/// then chosen by step doubling so that the local error stays below
/// [`FLOW_ERROR_TOL`], within `[FLOW_STEP_MIN, FLOW_STEP_MAX]`.
pub const FLOW_STEP: f64 = 0.05;
pub const FLOW_STEP_MIN: f64 = 1e-4;
pub const FLOW_STEP_MAX: f64 = 4.0;
pub const FLOW_ERROR_TOL: f64 = 1e-5;

const RATE_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub chi_star: DVector<f64>,
    pub iterations: usize,
    pub final_eta_norm: f64,
    /// Up to five tail ratios `‖χ[k+1] − χ*‖ / ‖χ[k] − χ*‖`.
    pub rate_samples: Vec<f64>,
    pub converged: bool,
    /// Iterations that took the full step `χ + η`.
    pub full_steps: usize,
    /// Iterations that took a damped Newton step on `η = 0`.
    pub newton_steps: usize,
    /// Iterations that took an RK4 step along `χ̇ = η`.
    pub flow_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeMultiplier {
    pub zeta: DVector<f64>,
}

pub(crate) fn step_at<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    t: f64,
    chi: &DVector<f64>,
) -> Result<DVector<f64>> {
    let b = eval_bundle(p, t, chi)?;
    let aug = assemble_rr(&b, cfg)?;
    let pinv = wpinv_build(&b.output_jacobian, &aug.r_factor)?;
    eta_with(&pinv, &b, &aug)
}

/// One iteration `χ′ = χ + η(t, χ, ȳ(t))`.
pub fn ip_step<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    t: f64,
    chi: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(chi + step_at(p, cfg, t, chi)?)
}

/// Iterate until `‖η‖∞ ≤ tol`.
///
/// The plain step `χ + η` contracts only when the curvature of `h` weighted
/// by the multiplier is small next to `R`; on strongly curved outputs it can
/// diverge even from close by. Each iteration therefore takes, in order of
/// preference:
///
/// 1. near a solution, when the full step shrinks `‖η‖∞` by less than a
///    factor of four, a backtracked Newton step on `η(χ) = 0` with a
///    central-difference Jacobian, if it does better than the full step;
/// 2. near a solution, the full step, if it shrinks `‖η‖∞` by
///    [`FULL_STEP_CONTRACTION`];
/// 3. an RK4 step along `χ̇ = η` with an adaptive length starting at
///    [`FLOW_STEP`]. This is the flow the closed loop follows, so far-away
///    starts reach the same minimizer the controller converges to. Far from
///    a solution only this step is taken: on outputs with several
///    minimizers, full or Newton steps can land in another basin.
///
/// Failure to converge returns the iterate with the smallest `‖η‖∞`
/// inside [`Error::MaxIterationsExceeded`].
pub fn solve_instant<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    t: f64,
    chi0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let dx = chi0.len();
    safeguarded_root(|x| step_at(p, cfg, t, x), dx, chi0, tol, max_iter)
}

// Root finder for a map `x ↦ η(x)` whose Jacobian is block diagonal with
// blocks of size `block`.
fn safeguarded_root<F>(
    eta: F,
    block: usize,
    x0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut x = x0.clone();
    let mut e = eta(&x)?;
    let mut history = vec![x.clone()];
    let mut best = (f64::INFINITY, x.clone());
    let (mut iterations, mut full_steps, mut newton_steps, mut flow_steps) = (0, 0, 0, 0);
    let mut h = FLOW_STEP;
    loop {
        let norm = e.amax();
        if norm < best.0 {
            best = (norm, x.clone());
        }
        if norm <= tol {
            let rate_samples = tail_ratios(&history, &x, e.norm());
            return Ok(SolveReport {
                chi_star: x,
                iterations,
                final_eta_norm: norm,
                rate_samples,
                converged: true,
                full_steps,
                newton_steps,
                flow_steps,
            });
        }
        if iterations >= max_iter {
            let report = SolveReport {
                chi_star: best.1,
                iterations,
                final_eta_norm: best.0,
                rate_samples: Vec::new(),
                converged: false,
                full_steps,
                newton_steps,
                flow_steps,
            };
            return Err(Error::MaxIterationsExceeded {
                report: Box::new(report),
            });
        }
        iterations += 1;
        if norm <= NEAR_RADIUS {
            let trial = &x + &e;
            let full = eta(&trial).ok().map(|next| (trial, next));
            let full_ratio = full
                .as_ref()
                .map_or(f64::INFINITY, |(_, n)| n.amax() / norm);
            // Newton is also tried when the full step contracts only weakly.
            if full_ratio > 0.25 {
                if let Some((y, ey)) = newton_step(&eta, block, &x, &e) {
                    if ey.amax() < full_ratio * norm {
                        x = y;
                        e = ey;
                        newton_steps += 1;
                        history.push(x.clone());
                        continue;
                    }
                }
            }
            if full_ratio <= FULL_STEP_CONTRACTION {
                let (y, ey) = full.expect("finite ratio");
                x = y;
                e = ey;
                full_steps += 1;
                history.push(x.clone());
                continue;
            }
        }
        let whole = rk4_step(|_, y| eta(y), 0.0, &x, h)?;
        let half = rk4_step(|_, y| eta(y), 0.0, &x, 0.5 * h)?;
        let y = rk4_step(|_, y| eta(y), 0.0, &half, 0.5 * h)?;
        let err = (&y - &whole).amax() / 15.0;
        flow_steps += 1;
        let scale = if err > 0.0 {
            (0.9 * (FLOW_ERROR_TOL / err).powf(0.2)).clamp(0.2, 2.0)
        } else {
            2.0
        };
        if err <= FLOW_ERROR_TOL || h <= FLOW_STEP_MIN {
            e = eta(&y)?;
            x = y;
            history.push(x.clone());
        }
        h = (h * scale).clamp(FLOW_STEP_MIN, FLOW_STEP_MAX);
    }
}

// Backtracked Newton step on `η(x) = 0`; `None` when the Jacobian is
// singular or no step length decreases `‖η‖₂`.
fn newton_step<F>(
    eta: &F,
    block: usize,
    x: &DVector<f64>,
    e: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = x.len();
    let blocks = n / block;
    let mut jac = vec![DMatrix::zeros(block, block); blocks];
    // Coordinate j of every block is perturbed at once: blocks do not
    // interact.
    for j in 0..block {
        let mut xp = x.clone();
        let mut xm = x.clone();
        let mut steps = vec![0.0; blocks];
        for (b, s) in steps.iter_mut().enumerate() {
            *s = 1e-7 * (1.0 + x[b * block + j].abs());
            xp[b * block + j] += *s;
            xm[b * block + j] -= *s;
        }
        let (ep, em) = (eta(&xp).ok()?, eta(&xm).ok()?);
        for (b, s) in steps.iter().enumerate() {
            let col = (ep.rows(b * block, block) - em.rows(b * block, block)) / (2.0 * s);
            jac[b].set_column(j, &col);
        }
    }
    let mut d = DVector::zeros(n);
    for (b, jb) in jac.iter().enumerate() {
        let db = solve_general(jb, &(-e.rows(b * block, block).clone_owned())).ok()?;
        d.rows_mut(b * block, block).copy_from(&db);
    }
    let n0 = e.norm();
    // A step shorter than 1/8 is not worth taking: near a fold `‖η‖` can
    // have a nonzero local minimum, and tiny steps would stall there.
    let mut alpha = 1.0;
    while alpha >= 0.125 {
        let y = x + &d * alpha;
        if let Ok(ey) = eta(&y) {
            if ey.norm() <= (1.0 - 0.5 * alpha) * n0 {
                return Some((y, ey));
            }
        }
        alpha *= 0.5;
    }
    None
}

// Ratios are only kept while the error is well above what the final
// iterate can resolve; the last five of those are returned.
fn tail_ratios(history: &[DVector<f64>], chi_star: &DVector<f64>, last_step: f64) -> Vec<f64> {
    let floor = 100.0 * last_step + 1e-13 * (1.0 + chi_star.norm());
    let errs: Vec<f64> = history.iter().map(|c| (c - chi_star).norm()).collect();
    let ratios: Vec<f64> = errs
        .windows(2)
        .filter(|w| w[1] > floor && w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let start = ratios.len().saturating_sub(RATE_SAMPLES);
    ratios[start..].to_vec()
}

/// `ζ = (H R⁻¹ Hᵀ)⁻¹ (ȳ − h + H R⁻¹ r)`.
pub fn lagrange_multiplier<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    t: f64,
    chi: &DVector<f64>,
) -> Result<LagrangeMultiplier> {
    let b = eval_bundle(p, t, chi)?;
    let aug = assemble_rr(&b, cfg)?;
    let pinv = wpinv_build(&b.output_jacobian, &aug.r_factor)?;
    let rinv_r = aug.r_factor.solve_vec(&aug.r)?;
    let rhs = b.output_error() + &b.output_jacobian * rinv_r;
    Ok(LagrangeMultiplier {
        zeta: pinv.gram_solve(&rhs)?,
    })
}

/// `‖[r − Hᵀζ; ȳ − h]‖∞`.
pub fn kkt_residual<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    t: f64,
    chi: &DVector<f64>,
    zeta: &LagrangeMultiplier,
) -> Result<f64> {
    let b = eval_bundle(p, t, chi)?;
    let aug = assemble_rr(&b, cfg)?;
    if zeta.zeta.len() != b.output.len() {
        return Err(Error::DimensionMismatch {
            context: "kkt_residual",
            expected: b.output.len(),
            actual: zeta.zeta.len(),
        });
    }
    let stat = &aug.r - b.output_jacobian.transpose() * &zeta.zeta;
    Ok(stat.amax().max(b.output_error().amax()))
}

fn check_stacked(dx: usize, times: &[f64], phi: &DVector<f64>) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Empty);
    }
    if phi.len() != dx * times.len() {
        return Err(Error::DimensionMismatch {
            context: "stacked trajectory",
            expected: dx * times.len(),
            actual: phi.len(),
        });
    }
    Ok(())
}

fn stacked_eta<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    times: &[f64],
    phi: &DVector<f64>,
) -> Result<DVector<f64>> {
    let dx = p.dims().dx;
    check_stacked(dx, times, phi)?;
    let mut out = DVector::zeros(phi.len());
    for (i, &t) in times.iter().enumerate() {
        let block = phi.rows(i * dx, dx).clone_owned();
        out.rows_mut(i * dx, dx)
            .copy_from(&step_at(p, cfg, t, &block)?);
    }
    Ok(out)
}

/// One interior-point step on the sampled trajectory problem. The stacked
/// pseudoinverse and Hessian are block diagonal, so the step is assembled
/// block by block.
pub fn stacked_ip_step<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    times: &[f64],
    phi: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(phi + stacked_eta(p, cfg, times, phi)?)
}

/// Drive the stacked step to zero with the same safeguards as
/// [`solve_instant`], using the block-diagonal structure of the stacked
/// Jacobian. Returns the stacked solution and the iteration count.
pub fn stacked_solve<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    times: &[f64],
    phi0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize)> {
    let dx = p.dims().dx;
    let rep = safeguarded_root(
        |phi| stacked_eta(p, cfg, times, phi),
        dx,
        phi0,
        tol,
        max_iter,
    )?;
    Ok((rep.chi_star, rep.iterations))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub t: f64,
    pub chi: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the step from the previous sample is abnormally large.
    pub jump: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub samples: Vec<ReferenceSample>,
}

impl ReferenceTrajectory {
    pub fn states(&self) -> Vec<DVector<f64>> {
        self.samples.iter().map(|s| s.chi.clone()).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.samples.iter().all(|s| s.converged)
    }

    /// Merged `[t − w, t + w]` windows around flagged jumps and samples
    /// that did not converge (these sit at folds, where the minimizer
    /// disappears).
    pub fn jump_windows(&self, half_width: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for s in self.samples.iter().filter(|s| s.jump || !s.converged) {
            let (a, b) = (s.t - half_width, s.t + half_width);
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        out
    }
}

/// Solve every sample in turn, warm-starting from the previous solution.
/// Non-converged samples are kept (best iterate, `converged = false`).
pub fn reference_trajectory<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    times: &[f64],
    chi_init: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<ReferenceTrajectory> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig(
            "sample times must be strictly increasing".into(),
        ));
    }
    let mut samples = Vec::with_capacity(times.len());
    let mut warm = chi_init.clone();
    for &t in times {
        let (chi, iterations, converged) = match solve_instant(p, cfg, t, &warm, tol, max_iter) {
            Ok(r) => (r.chi_star, r.iterations, true),
            Err(Error::MaxIterationsExceeded { report }) => {
                (report.chi_star, report.iterations, false)
            }
            Err(e) => return Err(e),
        };
        warm = chi.clone();
        samples.push(ReferenceSample {
            t,
            chi,
            iterations,
            converged,
            jump: false,
        });
    }
    flag_jumps(&mut samples, tol);
    Ok(ReferenceTrajectory { samples })
}

fn flag_jumps(samples: &mut [ReferenceSample], tol: f64) {
    if samples.len() < 2 {
        return;
    }
    let steps: Vec<f64> = samples
        .windows(2)
        .map(|w| (&w[1].chi - &w[0].chi).norm())
        .collect();
    let mut sorted = steps.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let threshold = (10.0 * median).max(100.0 * tol);
    for (k, d) in steps.iter().enumerate() {
        if *d > threshold {
            samples[k + 1].jump = true;
        }
    }
}

/// Solve `B u = −f_A + K_χ (χ* − x)`.
pub fn tracking_control_from_solution(
    b: &EvalBundle,
    chi_star: &DVector<f64>,
    k_chi: f64,
) -> Result<DVector<f64>> {
    let rhs = (chi_star - &b.x) * k_chi - &b.drift;
    solve_general(&b.input_matrix, &rhs)
}

/// Stack per-sample states into one `N·d_x` vector.
pub fn stack(states: &[DVector<f64>]) -> DVector<f64> {
    let dx = states.first().map_or(0, |s| s.len());
    let mut out = DVector::zeros(dx * states.len());
    for (i, s) in states.iter().enumerate() {
        out.rows_mut(i * dx, dx).copy_from(s);
    }
    out
}

/// Inverse of [`stack`].
pub fn unstack(phi: &DVector<f64>, dx: usize) -> Vec<DVector<f64>> {
    (0..phi.len() / dx)
        .map(|i| phi.rows(i * dx, dx).clone_owned())
        .collect()
}
