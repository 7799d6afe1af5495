//! Timing runs of the controller on the synthetic family.

use std::sync::{Mutex, MutexGuard};

use nalgebra::DVector;

use crate::barrier::BarrierConfig;
use crate::error::{Error, Result};
use crate::examples::{synthetic_family, QMode};
use crate::metrics::{fit_cube_trend, timing_summary, TimingSummary, TrendFit};
use crate::sim::{simulate_closed_loop, ControlLaw, SimConfig};

static SLOT: Mutex<()> = Mutex::new(());

/// Exclusive execution slot for timed runs. Hold the guard for the whole
/// measurement so no other timed run in this process overlaps it.
pub fn exclusive_slot() -> MutexGuard<'static, ()> {
    SLOT.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub mode: QMode,
    pub seed: u64,
    /// Timed steps per dimension.
    pub samples: usize,
    /// Untimed steps run first at each dimension.
    pub warmup: usize,
    pub k_x: f64,
    pub dt: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![32, 64, 128, 256],
            mode: QMode::Identity,
            seed: 1,
            samples: 60,
            warmup: 5,
            k_x: 500.0,
            dt: 1.0 / 2000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimTiming {
    pub d_x: usize,
    pub summary: TimingSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub dims: Vec<usize>,
    pub mode: QMode,
    pub per_dim: Vec<DimTiming>,
    /// Fitted on per-dimension medians.
    pub trend: TrendFit,
}

/// Per-sample control-evaluation times of a zero-order-hold closed loop
/// started at the origin.
pub fn time_dimension(cfg: &BenchConfig, dx: usize) -> Result<Vec<f64>> {
    let p = synthetic_family(dx, cfg.seed, cfg.mode);
    let barrier = BarrierConfig::default();
    let sim = SimConfig {
        t0: 0.0,
        t_final: (cfg.samples + cfg.warmup) as f64 * cfg.dt,
        dt: cfg.dt,
        k_x: cfg.k_x,
        control_law: ControlLaw::Oed,
        zoh: true,
    };
    let traj = {
        let _slot = exclusive_slot();
        simulate_closed_loop(&p, &sim, &barrier, &DVector::zeros(dx))?
    };
    if let Some(f) = traj.failure {
        return Err(Error::InvalidConfig(format!(
            "benchmark run at d_x={dx} failed at t={}: {}",
            f.t, f.message
        )));
    }
    Ok(traj.tau_c[cfg.warmup.min(traj.tau_c.len())..].to_vec())
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    for &d in &cfg.dims {
        if d < 4 || d % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "dimension {d} must be even and at least 4"
            )));
        }
    }
    let mut per_dim = Vec::with_capacity(cfg.dims.len());
    for &d in &cfg.dims {
        let tau = time_dimension(cfg, d)?;
        per_dim.push(DimTiming {
            d_x: d,
            summary: timing_summary(&tau)?,
        });
    }
    let xs: Vec<f64> = per_dim.iter().map(|d| d.d_x as f64).collect();
    let ys: Vec<f64> = per_dim.iter().map(|d| d.summary.median).collect();
    let trend = fit_cube_trend(&xs, &ys)?;
    Ok(BenchReport {
        dims: cfg.dims.clone(),
        mode: cfg.mode,
        per_dim,
        trend,
    })
}
