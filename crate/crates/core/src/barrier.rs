//! Softplus barrier, its `p1 → ∞` derivative limits, active-set extraction
//! and the `p2` sizing rule.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::max_row_sum_norm;

/// Smallest `K_R/Q` that does not raise the low-ratio diagnostic flag.
pub const MIN_RECOMMENDED_KRQ: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum P2Mode {
    Fixed(f64),
    /// Size `p2` from `‖R‖/‖Q‖ = K_R/Q` at every evaluation.
    Designed {
        k_rq: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConfig {
    pub p2_mode: P2Mode,
    /// Finite `p1` used only by reference (non-limit) evaluations.
    pub p1_ref: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            p2_mode: P2Mode::Designed { k_rq: 1e4 },
            p1_ref: 1e3,
        }
    }
}

impl BarrierConfig {
    pub fn designed(k_rq: f64) -> Self {
        Self {
            p2_mode: P2Mode::Designed { k_rq },
            ..Self::default()
        }
    }

    pub fn fixed(p2: f64) -> Self {
        Self {
            p2_mode: P2Mode::Fixed(p2),
            ..Self::default()
        }
    }

    /// True when a designed `K_R/Q` is below the recommended 1000.
    pub fn low_ratio_warning(&self) -> bool {
        matches!(self.p2_mode, P2Mode::Designed { k_rq } if k_rq < MIN_RECOMMENDED_KRQ)
    }

    pub fn validate(&self) -> Result<()> {
        match self.p2_mode {
            P2Mode::Fixed(p2) if !(p2 > 0.0) => Err(Error::InvalidConfig(format!(
                "p2 must be positive, got {p2}"
            ))),
            P2Mode::Designed { k_rq } if !(k_rq > 1.0) => Err(Error::InvalidConfig(format!(
                "K_R/Q must exceed 1, got {k_rq}"
            ))),
            _ if !(self.p1_ref > 0.0) => Err(Error::InvalidConfig("p1 must be positive".into())),
            _ => Ok(()),
        }
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `(p2/p1)·ln(1 + exp(p1·s))`, evaluated without overflow.
pub fn beta_ref(s: f64, p1: f64, p2: f64) -> f64 {
    p2 / p1 * softplus(p1 * s)
}

/// `β′(s)·β(s)` at finite `p1`.
pub fn xi_finite(s: f64, p1: f64, p2: f64) -> f64 {
    p2 * logistic(p1 * s) * beta_ref(s, p1, p2)
}

/// `β″(s)·β(s) + β′(s)²` at finite `p1`.
pub fn xi_jacobian_finite(s: f64, p1: f64, p2: f64) -> f64 {
    let z = p1 * s;
    let e = (-z.abs()).exp();
    let curv = p2 * p1 * e / ((1.0 + e) * (1.0 + e));
    let slope = p2 * logistic(z);
    curv * beta_ref(s, p1, p2) + slope * slope
}

/// Limit of `ξ` as `p1 → ∞`.
pub fn xi_limit(s: f64, p2: f64) -> f64 {
    if s > 0.0 {
        p2 * p2 * s
    } else {
        0.0
    }
}

/// Limit of `Ξ` as `p1 → ∞`, including the isolated value at `s = 0`.
pub fn xi_jacobian_limit(s: f64, p2: f64) -> f64 {
    if s > 0.0 {
        p2 * p2
    } else if s == 0.0 {
        0.25 * (std::f64::consts::LN_2 + 1.0) * p2 * p2
    } else {
        0.0
    }
}

/// `p2 = sqrt((K_R/Q − 1)·‖Q‖ / ‖Ḡᵀ Ḡ‖)` with the max-row-sum norm.
pub fn design_p2(q: &DMatrix<f64>, gbar: &DMatrix<f64>, k_rq: f64) -> Result<f64> {
    if gbar.nrows() == 0 {
        return Err(Error::EmptyActiveSet);
    }
    let gtg = gbar.transpose() * gbar;
    let denom = max_row_sum_norm(&gtg);
    if !(denom > 0.0) {
        return Err(Error::InvalidConfig(
            "active constraint rows are all zero".into(),
        ));
    }
    Ok(((k_rq - 1.0) * max_row_sum_norm(q) / denom).sqrt())
}

/// Rows of `g = G x + c` with strictly positive residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
    /// Extracted rows of `G`, `|A| × d_x`.
    pub gbar_mat: DMatrix<f64>,
    /// Positive residuals `Ḡ x + c̄`.
    pub gbar: DVector<f64>,
}

impl ActiveSet {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

pub fn active_set(g_mat: &DMatrix<f64>, c: &DVector<f64>, x: &DVector<f64>) -> Result<ActiveSet> {
    if g_mat.nrows() != c.len() || g_mat.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "active_set",
            expected: g_mat.nrows(),
            actual: c.len(),
        });
    }
    let g = g_mat * x + c;
    let indices: Vec<usize> = (0..g.len()).filter(|&i| g[i] > 0.0).collect();
    let gbar_mat = g_mat.select_rows(indices.iter());
    let gbar = DVector::from_iterator(indices.len(), indices.iter().map(|&i| g[i]));
    Ok(ActiveSet {
        indices,
        gbar_mat,
        gbar,
    })
}
