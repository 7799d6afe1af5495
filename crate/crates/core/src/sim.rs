//! Fixed-step RK4 closed-loop integration of `ẋ = f_A + B u`.

use web_time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::barrier::BarrierConfig;
use crate::controller::{
    assemble_rr, constrained_control, constrained_system_terms, eta, oed_control,
};
use crate::error::{Error, Result};
use crate::ipiter::{solve_instant, tracking_control_from_solution, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::problem::{eval_bundle, ProblemDef};

/// Free input `v` of the state-constrained controller.
#[derive(Debug, Clone, PartialEq)]
pub enum VLaw {
    Zero,
    /// `v = −K x`.
    Gain(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlLaw {
    Oed,
    /// `u = B⁻¹(−f_A + K_χ(χ* − x))`, with `χ*(t)` re-solved at every
    /// evaluation (warm-started).
    TrackingFromSolution {
        k_chi: f64,
    },
    Constrained(VLaw),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t0: f64,
    pub t_final: f64,
    pub dt: f64,
    pub k_x: f64,
    pub control_law: ControlLaw,
    /// Hold the control computed at the first stage over the whole step.
    pub zoh: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t_final: 1.0,
            dt: 1.0 / 2000.0,
            k_x: 100.0,
            control_law: ControlLaw::Oed,
            zoh: false,
        }
    }
}

impl SimConfig {
    /// Number of steps; the span must be an integer multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.k_x > 0.0) {
            return Err(Error::InvalidConfig("dt and K_x must be positive".into()));
        }
        let ratio = (self.t_final - self.t0) / self.dt;
        let n = ratio.round();
        if !(n >= 1.0) || (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "(t_final - t0)/dt = {ratio} is not a positive integer"
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimFailure {
    pub t: f64,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub sigma_values: Vec<f64>,
    /// Seconds spent evaluating the control at each step's first stage.
    pub tau_c: Vec<f64>,
    /// Set when integration stopped early.
    pub failure: Option<SimFailure>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Classical four-stage Runge-Kutta step.
pub fn rk4_step<F>(mut f: F, t: f64, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut stage = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>> {
        let k = f(t, x)?;
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(Error::NonFiniteEvaluation {
                evaluator: "vector field",
            })
        }
    };
    let h2 = 0.5 * dt;
    let k1 = stage(t, x)?;
    let k2 = stage(t + h2, &(x + &k1 * h2))?;
    let k3 = stage(t + h2, &(x + &k2 * h2))?;
    let k4 = stage(t + dt, &(x + &k3 * dt))?;
    Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

struct LawState {
    warm: Option<DVector<f64>>,
}

fn evaluate_control<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &SimConfig,
    barrier: &BarrierConfig,
    st: &mut LawState,
    t: f64,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DMatrix<f64>)> {
    let b = eval_bundle(p, t, x)?;
    let u = match &cfg.control_law {
        ControlLaw::Oed => {
            let aug = assemble_rr(&b, barrier)?;
            let e = eta(&b, &aug)?;
            oed_control(&b, &e, cfg.k_x)?
        }
        ControlLaw::TrackingFromSolution { k_chi } => {
            let start = st.warm.clone().unwrap_or_else(|| x.clone());
            let rep = solve_instant(p, barrier, t, &start, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let u = tracking_control_from_solution(&b, &rep.chi_star, *k_chi)?;
            st.warm = Some(rep.chi_star);
            u
        }
        ControlLaw::Constrained(vlaw) => {
            let (omega_a, omega_b) = constrained_system_terms(&b)?;
            let v = match vlaw {
                VLaw::Zero => DVector::zeros(x.len()),
                VLaw::Gain(k) => -(k * x),
            };
            constrained_control(&b, &omega_a, &omega_b, &v, cfg.k_x)?
        }
    };
    Ok((u, b.drift, b.input_matrix))
}

/// Integrate the closed loop from `x0`. Numerical failures stop the
/// integration and are reported in [`Trajectory::failure`] together with
/// the samples recorded so far.
pub fn simulate_closed_loop<P: ProblemDef + ?Sized>(
    p: &P,
    cfg: &SimConfig,
    barrier: &BarrierConfig,
    x0: &DVector<f64>,
) -> Result<Trajectory> {
    let n = cfg.steps()?;
    barrier.validate()?;
    if x0.len() != p.dims().dx {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: p.dims().dx,
            actual: x0.len(),
        });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteEvaluation {
            evaluator: "initial state",
        });
    }
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        outputs: Vec::with_capacity(n + 1),
        sigma_values: Vec::with_capacity(n + 1),
        tau_c: Vec::with_capacity(n),
        failure: None,
    };
    let record = |traj: &mut Trajectory, t: f64, x: &DVector<f64>| {
        traj.times.push(t);
        traj.outputs.push(p.output(t, x));
        traj.sigma_values.push(p.cost(t, x));
        traj.states.push(x.clone());
    };
    let mut st = LawState { warm: None };
    let mut x = x0.clone();
    record(&mut traj, cfg.t0, &x);
    for k in 0..n {
        let t = cfg.t0 + k as f64 * cfg.dt;
        let mut first = true;
        let mut held: Option<DVector<f64>> = None;
        let mut tau = 0.0;
        let step = rk4_step(
            |ts, xs| {
                if cfg.zoh && !first {
                    let u = held.as_ref().expect("held after first stage");
                    return Ok(p.drift(ts, xs) + p.input_matrix(ts, xs) * u);
                }
                let start = Instant::now();
                let (u, drift, bm) = evaluate_control(p, cfg, barrier, &mut st, ts, xs)?;
                if first {
                    tau = start.elapsed().as_secs_f64();
                    first = false;
                }
                let xdot = drift + bm * &u;
                if cfg.zoh {
                    held = Some(u);
                }
                Ok(xdot)
            },
            t,
            &x,
            cfg.dt,
        );
        match step {
            Ok(next) => {
                x = next;
                traj.tau_c.push(tau);
                record(&mut traj, cfg.t0 + (k + 1) as f64 * cfg.dt, &x);
            }
            Err(e) => {
                traj.failure = Some(SimFailure {
                    t,
                    kind: e.kind(),
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(traj)
}
