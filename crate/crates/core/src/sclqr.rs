//! State-constrained LQR: the admissible input transformation, the reduced
//! unconstrained LQ problem and its Riccati gain.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{factor_spd, solve_spd, wpinv_build, SpdFactor};

pub const RICCATI_STEP: f64 = 1e-3;
pub const SETTLE_TOL: f64 = 1e-8;
pub const DEFAULT_HORIZON_MAX: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SclqrModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub qxx: DMatrix<f64>,
    pub quu: DMatrix<f64>,
    pub k_x: f64,
}

impl SclqrModel {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Which transformed cost to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostForm {
    /// Substitute `u = B⁻¹((Ω_A − A)x + Ω_B v)` exactly.
    #[default]
    Exact,
    /// `Q_xx + Ω_AᵀQ_uuΩ_A`, `Ω_BᵀQ_uuΩ_B`, `Ω_AᵀQ_uuΩ_B`, which agrees with
    /// the exact form only when `B = I` and `A = 0`.
    Printed,
}

/// Unconstrained LQ problem `ẋ = A_t x + B_t v` with running cost
/// `xᵀQxx x + vᵀQvv v + 2 xᵀN v`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedLq {
    pub a_t: DMatrix<f64>,
    pub b_t: DMatrix<f64>,
    pub qxx_t: DMatrix<f64>,
    pub qvv_t: DMatrix<f64>,
    pub n_t: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    /// `v = −gain · x`.
    pub gain: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// Backward horizon integrated before the gain settled.
    pub settle_time: f64,
    pub regularization_eps: f64,
    pub settled: bool,
}

/// `Ω_A = −K_x H^#H`, `Ω_B = I − H^#H` with the identity-weighted
/// pseudoinverse.
pub fn build_projectors(m: &SclqrModel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = m.dim();
    let pinv = wpinv_build(&m.h, &SpdFactor::identity(n))?;
    let omega_b = pinv.null_projector();
    let omega_a = (DMatrix::identity(n, n) - &omega_b) * -m.k_x;
    Ok((omega_a, omega_b))
}

fn inverse(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    b.clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularInputMatrix)
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn transformed_lq(m: &SclqrModel, form: CostForm) -> Result<TransformedLq> {
    let (omega_a, omega_b) = build_projectors(m)?;
    let (k, mb) = match form {
        CostForm::Exact => {
            let minv = inverse(&m.b)?;
            (&minv * (&omega_a - &m.a), &minv * &omega_b)
        }
        CostForm::Printed => (omega_a.clone(), omega_b.clone()),
    };
    let qk = &m.quu * &k;
    let qxx_t = sym(&m.qxx + k.transpose() * &qk);
    let qvv_t = sym(mb.transpose() * &m.quu * &mb);
    let n_t = k.transpose() * &m.quu * &mb;
    Ok(TransformedLq {
        a_t: omega_a,
        b_t: omega_b,
        qxx_t,
        qvv_t,
        n_t,
    })
}

/// Default regularization `1e-9 · trace(Q_vv) / d_x`.
pub fn default_eps(lq: &TransformedLq) -> f64 {
    1e-9 * lq.qvv_t.trace() / lq.qvv_t.nrows() as f64
}

fn riccati_rhs(lq: &TransformedLq, rf: &SpdFactor, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let pb_n = p * &lq.b_t + &lq.n_t;
    let k = solve_spd(rf, &pb_n.transpose())?;
    let atp = lq.a_t.transpose() * p;
    Ok(sym(&atp + atp.transpose() - &pb_n * k + &lq.qxx_t))
}

fn gain_of(lq: &TransformedLq, rf: &SpdFactor, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rhs = lq.b_t.transpose() * p + lq.n_t.transpose();
    solve_spd(rf, &rhs)
}

/// Integrate the Riccati differential equation backward from `P(T) = 0`
/// with RK4 until the gain settles.
pub fn riccati_backward(lq: &TransformedLq, eps: f64, horizon_max: f64) -> Result<RiccatiSolution> {
    let n = lq.a_t.nrows();
    let m = lq.qvv_t.nrows();
    let r = &lq.qvv_t + DMatrix::identity(m, m) * eps;
    let rf = factor_spd(&r, false)?;
    let h = RICCATI_STEP;
    let mut p = DMatrix::zeros(n, n);
    let mut gain = gain_of(lq, &rf, &p)?;
    let mut tau = 0.0;
    let steps = (horizon_max / h).ceil() as usize;
    for _ in 0..steps {
        let k1 = riccati_rhs(lq, &rf, &p)?;
        let k2 = riccati_rhs(lq, &rf, &(&p + &k1 * (0.5 * h)))?;
        let k3 = riccati_rhs(lq, &rf, &(&p + &k2 * (0.5 * h)))?;
        let k4 = riccati_rhs(lq, &rf, &(&p + &k3 * h))?;
        p += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteEvaluation {
                evaluator: "Riccati integration",
            });
        }
        tau += h;
        let next = gain_of(lq, &rf, &p)?;
        let change = (&next - &gain).norm();
        gain = next;
        if change <= SETTLE_TOL * gain.norm() {
            return Ok(RiccatiSolution {
                gain,
                p,
                settle_time: tau,
                regularization_eps: eps,
                settled: true,
            });
        }
    }
    Err(Error::NoSettle {
        solution: Box::new(RiccatiSolution {
            gain,
            p,
            settle_time: tau,
            regularization_eps: eps,
            settled: false,
        }),
    })
}

/// Transformed problem and settled gain with the default regularization.
pub fn solve_sclqr(m: &SclqrModel, form: CostForm) -> Result<(TransformedLq, RiccatiSolution)> {
    let lq = transformed_lq(m, form)?;
    let eps = default_eps(&lq);
    let sol = riccati_backward(&lq, eps, DEFAULT_HORIZON_MAX)?;
    Ok((lq, sol))
}

/// `u = B⁻¹(−A x − K_x H^#H x + (I − H^#H) v)` with `v = −gain · x`.
pub fn sclqr_control(
    m: &SclqrModel,
    sol: &RiccatiSolution,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (omega_a, omega_b) = build_projectors(m)?;
    let v = -(&sol.gain * x);
    let rhs = &omega_a * x + &omega_b * v - &m.a * x;
    m.b.clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularInputMatrix)
}

/// Basis of `{x : H x = 0}`. The leading `(d_x − d_y)` rows form the
/// identity when the trailing `d_y × d_y` block of `H` is invertible;
/// otherwise an orthonormal basis is returned and `normalized` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct NullBasis {
    pub psi: DMatrix<f64>,
    pub normalized: bool,
}

pub fn null_param(h: &DMatrix<f64>) -> Result<NullBasis> {
    let (dy, dx) = h.shape();
    let k = dx.checked_sub(dy).ok_or(Error::DimensionMismatch {
        context: "null_param (rows <= cols)",
        expected: dx,
        actual: dy,
    })?;
    let pinv = wpinv_build(h, &SpdFactor::identity(dx))?;
    match normalized_basis(h, k) {
        Ok(psi) => Ok(NullBasis {
            psi,
            normalized: true,
        }),
        Err(Error::NormalizationUnavailable) => {
            let eig = SymmetricEigen::new(pinv.null_projector());
            let mut order: Vec<usize> = (0..dx).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            let mut cols: Vec<DVector<f64>> = order[..k]
                .iter()
                .map(|&i| eig.eigenvectors.column(i).clone_owned())
                .collect();
            for c in cols.iter_mut() {
                if c[c.iamax()] < 0.0 {
                    c.neg_mut();
                }
            }
            cols.sort_by_key(|c| c.iamax());
            let psi = DMatrix::from_columns(&cols);
            Ok(NullBasis {
                psi,
                normalized: false,
            })
        }
        Err(e) => Err(e),
    }
}

fn normalized_basis(h: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let (dy, dx) = h.shape();
    let lead = h.columns(0, k).clone_owned();
    let trail = h.columns(k, dy).clone_owned();
    let scale = trail.amax().max(lead.amax());
    let lu = trail.lu();
    let det = lu.determinant();
    if !(det.abs() > 1e-12 * scale.powi(dy as i32)) {
        return Err(Error::NormalizationUnavailable);
    }
    let tail = -lu.solve(&lead).ok_or(Error::NormalizationUnavailable)?;
    let mut psi = DMatrix::zeros(dx, k);
    psi.rows_mut(0, k).fill_with_identity();
    psi.rows_mut(k, dy).copy_from(&tail);
    Ok(psi)
}

/// Closed-loop samples of the original system under [`sclqr_control`].
#[derive(Debug, Clone, PartialEq)]
pub struct SclqrTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Accumulated `∫ xᵀQ_xx x + uᵀQ_uu u dt`, integrated with the state.
    pub running_cost: Vec<f64>,
}

/// RK4 integration of `ẋ = A x + B u` with the running cost carried as an
/// extra state.
pub fn simulate_sclqr(
    m: &SclqrModel,
    sol: &RiccatiSolution,
    x0: &DVector<f64>,
    dt: f64,
    t_final: f64,
) -> Result<SclqrTrajectory> {
    let n = m.dim();
    let steps = (t_final / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidConfig(
            "t_final must be a positive multiple of dt".into(),
        ));
    }
    let (omega_a, omega_b) = build_projectors(m)?;
    let minv = inverse(&m.b)?;
    // u = F x with F = B⁻¹(Ω_A − A − Ω_B·gain).
    let f = &minv * (&omega_a - &m.a - &omega_b * &sol.gain);
    let acl = &m.a + &m.b * &f;
    let wcl = &m.qxx + f.transpose() * &m.quu * &f;
    let field = |z: &DVector<f64>| -> DVector<f64> {
        let x = z.rows(0, n);
        let mut out = DVector::zeros(n + 1);
        out.rows_mut(0, n).copy_from(&(&acl * x));
        out[n] = (x.transpose() * &wcl * x)[(0, 0)];
        out
    };
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(x0);
    let mut traj = SclqrTrajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        running_cost: vec![0.0],
    };
    for k in 0..steps {
        let k1 = field(&z);
        let k2 = field(&(&z + &k1 * (0.5 * dt)));
        let k3 = field(&(&z + &k2 * (0.5 * dt)));
        let k4 = field(&(&z + &k3 * dt));
        z += (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
        traj.times.push((k + 1) as f64 * dt);
        traj.states.push(z.rows(0, n).clone_owned());
        traj.running_cost.push(z[n]);
    }
    Ok(traj)
}

/// Least-squares slope of `−ln y` against `t`, over samples with `y > floor`.
pub fn fitted_decay_rate(times: &[f64], values: &[f64], floor: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > floor)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateFit(
            "fewer than three samples above the floor",
        ));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("zero time variance"));
    }
    Ok(-sxy / sxx)
}
