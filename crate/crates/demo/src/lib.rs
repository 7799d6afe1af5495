//! Browser bindings for the demo page in `www/`. Every function returns a
//! flat `Float64Array`, one fixed-width record per sample.

use nalgebra::DVector;
use oedctl_core::examples::{sclqr_paper, M1};
use oedctl_core::ipiter::{reference_trajectory, DEFAULT_MAX_ITER, DEFAULT_TOL};
use oedctl_core::sclqr::{simulate_sclqr, solve_sclqr, CostForm};
use oedctl_core::sim::simulate_closed_loop;
use oedctl_core::{BarrierConfig, ControlLaw, SimConfig};
use wasm_bindgen::prelude::*;

fn js_err(e: oedctl_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Closed loop on the two-state example from `(x1, x2)`, recorded every
/// `every` steps: `[t, x1, x2, y − ȳ, σ]` per record.
#[wasm_bindgen]
pub fn m1_closed_loop(
    x1: f64,
    x2: f64,
    k_x: f64,
    t_final: f64,
    dt: f64,
    every: usize,
) -> Result<Vec<f64>, JsError> {
    let cfg = SimConfig {
        t0: 0.0,
        t_final,
        dt,
        k_x,
        control_law: ControlLaw::Oed,
        zoh: false,
    };
    let x0 = DVector::from_vec(vec![x1, x2]);
    let traj = simulate_closed_loop(&M1, &cfg, &BarrierConfig::default(), &x0).map_err(js_err)?;
    let mut out = Vec::with_capacity(5 * (traj.len() / every.max(1) + 1));
    for k in (0..traj.len()).step_by(every.max(1)) {
        let t = traj.times[k];
        let err = traj.outputs[k][0] - oedctl_core::ProblemDef::reference(&M1, t)[0];
        out.extend([
            t,
            traj.states[k][0],
            traj.states[k][1],
            err,
            traj.sigma_values[k],
        ]);
    }
    if let Some(f) = traj.failure {
        return Err(JsError::new(&format!(
            "stopped at t={}: {}",
            f.t, f.message
        )));
    }
    Ok(out)
}

/// Warm-started minimizers of the instantaneous problem at spacing
/// `spacing`, starting from `(x1, x2)`: `[t, χ1, χ2, jump]` per sample.
#[wasm_bindgen]
pub fn m1_reference(x1: f64, x2: f64, t_final: f64, spacing: f64) -> Result<Vec<f64>, JsError> {
    let n = (t_final / spacing).round() as usize;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * spacing).collect();
    let start = DVector::from_vec(vec![x1, x2]);
    let r = reference_trajectory(
        &M1,
        &BarrierConfig::default(),
        &times,
        &start,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )
    .map_err(js_err)?;
    Ok(r.samples
        .iter()
        .flat_map(|s| [s.t, s.chi[0], s.chi[1], if s.jump { 1.0 } else { 0.0 }])
        .collect())
}

/// The 3-D state-constrained LQ example from `x0`: `[t, y, cost]` per
/// record.
#[wasm_bindgen]
pub fn lq_outputs(
    x1: f64,
    x2: f64,
    x3: f64,
    t_final: f64,
    every: usize,
) -> Result<Vec<f64>, JsError> {
    let m = sclqr_paper();
    let (_, sol) = solve_sclqr(&m, CostForm::Exact).map_err(js_err)?;
    let x0 = DVector::from_vec(vec![x1, x2, x3]);
    let traj = simulate_sclqr(&m, &sol, &x0, 1e-4, t_final).map_err(js_err)?;
    Ok((0..traj.times.len())
        .step_by(every.max(1))
        .flat_map(|k| {
            [
                traj.times[k],
                (&m.h * &traj.states[k])[0],
                traj.running_cost[k],
            ]
        })
        .collect())
}
