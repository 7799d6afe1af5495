//! The closed-form tracking controller `u = B⁻¹(−f_A + K_x η)` and the
//! state-constrained variant `u = B⁻¹(−f_A + K_x ω_A + Ω_B v)`.

use web_time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::barrier::{active_set, ActiveSet, BarrierConfig, P2Mode};
use crate::error::Result;
use crate::linalg::{
    factor_spd, max_row_sum_norm, solve_general, wpinv_build, SpdFactor, WeightedPinv,
};
use crate::problem::{eval_bundle, EvalBundle, ProblemDef};

/// Gradient `r` and factored Hessian `R` of the augmented cost, in the
/// `p1 → ∞` limit.
#[derive(Debug, Clone)]
pub struct AugmentedDerivatives {
    pub r: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub r_factor: SpdFactor,
    pub active: ActiveSet,
    /// `p2` applied to the active rows, zero when none are active.
    pub p2_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlDiagnostics {
    pub active_count: usize,
    pub eta_norm: f64,
    pub p2_used: f64,
    /// Wall-clock seconds spent evaluating the control.
    pub duration: f64,
}

/// Assemble `(r, R)`:
/// `r = q + p2² Ḡᵀ ḡ`, `R = Q + p2² Ḡᵀ Ḡ` over the active rows, or `(q, Q)`
/// when no row is active.
pub fn assemble_rr(b: &EvalBundle, cfg: &BarrierConfig) -> Result<AugmentedDerivatives> {
    let active = active_set(&b.ineq_matrix, &b.ineq_offset, &b.x)?;
    let (r, hessian, p2_used) = if active.is_empty() {
        (b.cost_gradient.clone(), b.cost_hessian.clone(), 0.0)
    } else {
        let gt = active.gbar_mat.transpose();
        let gram = &gt * &active.gbar_mat;
        let p2 = match cfg.p2_mode {
            P2Mode::Fixed(p2) => p2,
            P2Mode::Designed { k_rq } => {
                ((k_rq - 1.0) * max_row_sum_norm(&b.cost_hessian) / max_row_sum_norm(&gram)).sqrt()
            }
        };
        let w = p2 * p2;
        let r = &b.cost_gradient + (&gt * &active.gbar) * w;
        let hessian = &b.cost_hessian + gram * w;
        (r, hessian, p2)
    };
    let r_factor = factor_spd(&hessian, b.diagonal_hint)?;
    Ok(AugmentedDerivatives {
        r,
        hessian,
        r_factor,
        active,
        p2_used,
    })
}

/// `η = H^#_R (ȳ − h) − (I − H^#_R H) R⁻¹ r`, sharing one pseudoinverse
/// factor between both terms.
pub fn eta(b: &EvalBundle, aug: &AugmentedDerivatives) -> Result<DVector<f64>> {
    let pinv = wpinv_build(&b.output_jacobian, &aug.r_factor)?;
    eta_with(&pinv, b, aug)
}

pub(crate) fn eta_with(
    pinv: &WeightedPinv,
    b: &EvalBundle,
    aug: &AugmentedDerivatives,
) -> Result<DVector<f64>> {
    let toward_output = pinv.apply(&b.output_error())?;
    let newton = aug.r_factor.solve_vec(&aug.r)?;
    Ok(toward_output - pinv.null_project(&newton)?)
}

/// Solve `B u = −f_A + K_x η`.
pub fn oed_control(b: &EvalBundle, eta: &DVector<f64>, k_x: f64) -> Result<DVector<f64>> {
    let rhs = eta * k_x - &b.drift;
    solve_general(&b.input_matrix, &rhs)
}

/// Evaluate the tracking controller at `(t, x)` and time the evaluation.
pub fn evaluate_oed<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &BarrierConfig,
    t: f64,
    x: &DVector<f64>,
    k_x: f64,
) -> Result<(DVector<f64>, ControlDiagnostics)> {
    let start = Instant::now();
    let b = eval_bundle(p, t, x)?;
    let aug = assemble_rr(&b, cfg)?;
    let e = eta(&b, &aug)?;
    let u = oed_control(&b, &e, k_x)?;
    let duration = start.elapsed().as_secs_f64();
    Ok((
        u,
        ControlDiagnostics {
            active_count: aug.active.len(),
            eta_norm: e.amax(),
            p2_used: aug.p2_used,
            duration,
        },
    ))
}

/// Drift term `ω_A` and input projector `Ω_B` of the state-constrained
/// controller (identity-weighted pseudoinverses, `σ` unused).
///
/// The output target is `ȳ − h`, which reduces to `−h` for `ȳ = 0`. For
/// active rows the correction uses the minimum-norm step `Ḡ⁺ ḡ`.
pub fn constrained_system_terms(b: &EvalBundle) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dx = b.x.len();
    let ident = SpdFactor::identity(dx);
    let hp = wpinv_build(&b.output_jacobian, &ident)?;
    let mut omega_a = hp.apply(&b.output_error())?;
    let active = active_set(&b.ineq_matrix, &b.ineq_offset, &b.x)?;
    let omega_b = if active.is_empty() {
        hp.null_projector()
    } else {
        let gp = wpinv_build(&active.gbar_mat, &ident)?;
        let step = gp.apply(&active.gbar)?;
        omega_a -= hp.null_project(&step)?;
        let na = active.len();
        let dy = b.output_jacobian.nrows();
        let mut stacked = DMatrix::zeros(na + dy, dx);
        stacked.rows_mut(0, na).copy_from(&active.gbar_mat);
        stacked.rows_mut(na, dy).copy_from(&b.output_jacobian);
        wpinv_build(&stacked, &ident)?.null_projector()
    };
    Ok((omega_a, omega_b))
}

/// Solve `B u = −f_A + K_x ω_A + Ω_B v`.
pub fn constrained_control(
    b: &EvalBundle,
    omega_a: &DVector<f64>,
    omega_b: &DMatrix<f64>,
    v: &DVector<f64>,
    k_x: f64,
) -> Result<DVector<f64>> {
    let rhs = omega_a * k_x + omega_b * v - &b.drift;
    solve_general(&b.input_matrix, &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::examples::QuadraticProblem;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn inactive_branch_is_plain_cost() {
        let mut p = QuadraticProblem::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            v(&[0.0]),
        );
        p.g = DMatrix::identity(2, 2);
        p.c = v(&[-5.0, -5.0]);
        let b = eval_bundle(&p, 0.0, &v(&[1.0, 2.0])).unwrap();
        let aug = assemble_rr(&b, &BarrierConfig::default()).unwrap();
        assert_eq!(aug.r, b.cost_gradient);
        assert_eq!(aug.hessian, b.cost_hessian);
        assert_eq!(aug.p2_used, 0.0);
    }

    #[test]
    fn active_branch_by_hand() {
        let mut p = QuadraticProblem::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            v(&[0.0]),
        );
        p.g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        p.c = v(&[-0.5]);
        // x = (1, 0): g = 0.5, q = x
        let mut b = eval_bundle(&p, 0.0, &v(&[1.0, 0.0])).unwrap();
        b.cost_gradient = DVector::zeros(2);
        let aug = assemble_rr(&b, &BarrierConfig::fixed(10.0)).unwrap();
        assert_eq!(
            aug.hessian,
            DMatrix::from_row_slice(2, 2, &[101.0, 0.0, 0.0, 1.0])
        );
        assert_eq!(aug.r.as_slice(), &[50.0, 0.0]);
        let diff = &aug.hessian - &b.cost_hessian;
        let expected = aug.active.gbar_mat.transpose() * &aug.active.gbar_mat * 100.0;
        assert!((diff - expected).amax() <= 1e-9 * 100.0);
    }

    #[test]
    fn eta_lands_on_equality_minimizer() {
        // σ = ½‖x‖², h = x₁, ȳ = 0, x = (1, 1): minimizer (0, 0)
        let p = QuadraticProblem::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            v(&[0.0]),
        );
        let b = eval_bundle(&p, 0.0, &v(&[1.0, 1.0])).unwrap();
        let aug = assemble_rr(&b, &BarrierConfig::default()).unwrap();
        let e = eta(&b, &aug).unwrap();
        assert_relative_eq!(e, v(&[-1.0, -1.0]), epsilon = 1e-15);

        let b = eval_bundle(&p, 0.0, &v(&[0.0, 0.0])).unwrap();
        let aug = assemble_rr(&b, &BarrierConfig::default()).unwrap();
        assert_eq!(eta(&b, &aug).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn control_with_identity_input() {
        let p = QuadraticProblem::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            v(&[0.0]),
        );
        let b = eval_bundle(&p, 0.0, &v(&[1.0, 1.0])).unwrap();
        let u = oed_control(&b, &v(&[-1.0, -1.0]), 3.0).unwrap();
        assert_eq!(u.as_slice(), &[-3.0, -3.0]);
    }

    #[test]
    fn singular_input_matrix() {
        let mut p = QuadraticProblem::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            v(&[0.0]),
        );
        p.b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = eval_bundle(&p, 0.0, &v(&[1.0, 1.0])).unwrap();
        assert!(matches!(
            oed_control(&b, &v(&[1.0, 0.0]), 1.0),
            Err(Error::SingularInputMatrix)
        ));
    }

    #[test]
    fn constrained_terms_coordinate_case() {
        let p = QuadraticProblem::new(
            DMatrix::identity(3, 3),
            DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            v(&[0.0]),
        );
        let b = eval_bundle(&p, 0.0, &v(&[0.0, 0.4, -0.2])).unwrap();
        let (wa, ob) = constrained_system_terms(&b).unwrap();
        assert_eq!(wa, DVector::zeros(3));
        assert_relative_eq!(
            ob,
            DMatrix::from_diagonal(&v(&[0.0, 1.0, 1.0])),
            epsilon = 1e-15
        );
    }

    #[test]
    fn constrained_terms_projector_identities() {
        let mut p = QuadraticProblem::new(
            DMatrix::identity(4, 4),
            DMatrix::from_row_slice(1, 4, &[1.0, -0.5, 0.25, 2.0]),
            v(&[0.3]),
        );
        p.g = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        p.c = v(&[-0.5, -0.1]);
        let x = v(&[0.2, 0.9, 0.3, 0.4]);
        let b = eval_bundle(&p, 0.0, &x).unwrap();
        let (_wa, ob) = constrained_system_terms(&b).unwrap();
        assert!((&ob * &ob - &ob).amax() <= 1e-9);
        assert!((&b.output_jacobian * &ob).amax() <= 1e-9);
        assert!((&p.g * &ob).amax() <= 1e-9);
    }
}
