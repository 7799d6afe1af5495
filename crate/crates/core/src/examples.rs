//! Problem constructors: the two-dimensional nonlinear example, scalable
//! synthetic families, a synthetic mean-variance portfolio and the 3-D
//! state-constrained LQ example.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::problem::{Dims, ProblemDef};
use crate::rng::SplitMix64;
use crate::sclqr::SclqrModel;

const TAU: f64 = 2.0 * PI;

/// `σ = ½ (x−a)ᵀ Q (x−a)`, `h = H x`, `G x + c ≤ 0`, constant `f_A` and `B`
/// (zero and identity by default).
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    pub q: DMatrix<f64>,
    pub center: DVector<f64>,
    pub h: DMatrix<f64>,
    pub ybar: DVector<f64>,
    pub g: DMatrix<f64>,
    pub c: DVector<f64>,
    pub b: DMatrix<f64>,
    pub drift: DVector<f64>,
}

impl QuadraticProblem {
    pub fn new(q: DMatrix<f64>, h: DMatrix<f64>, ybar: DVector<f64>) -> Self {
        let dx = q.nrows();
        Self {
            center: DVector::zeros(dx),
            g: DMatrix::zeros(0, dx),
            c: DVector::zeros(0),
            b: DMatrix::identity(dx, dx),
            drift: DVector::zeros(dx),
            q,
            h,
            ybar,
        }
    }
}

impl ProblemDef for QuadraticProblem {
    fn dims(&self) -> Dims {
        Dims {
            dx: self.q.nrows(),
            dy: self.h.nrows(),
            dc: self.g.nrows(),
        }
    }
    fn drift(&self, _t: f64, _x: &DVector<f64>) -> DVector<f64> {
        self.drift.clone()
    }
    fn input_matrix(&self, _t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        self.b.clone()
    }
    fn output(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x
    }
    fn output_jacobian(&self, _t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        self.h.clone()
    }
    fn reference(&self, _t: f64) -> DVector<f64> {
        self.ybar.clone()
    }
    fn cost(&self, _t: f64, x: &DVector<f64>) -> f64 {
        let d = x - &self.center;
        0.5 * d.dot(&(&self.q * &d))
    }
    fn cost_gradient(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        &self.q * (x - &self.center)
    }
    fn cost_hessian(&self, _t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }
    fn ineq_matrix(&self, _t: f64) -> DMatrix<f64> {
        self.g.clone()
    }
    fn ineq_offset(&self, _t: f64) -> DVector<f64> {
        self.c.clone()
    }
}

/// Evaluate `inner` at a fixed time regardless of the requested `t`.
#[derive(Debug, Clone)]
pub struct Frozen<P> {
    pub inner: P,
    pub t: f64,
}

impl<P: ProblemDef> ProblemDef for Frozen<P> {
    fn dims(&self) -> Dims {
        self.inner.dims()
    }
    fn drift(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.inner.drift(self.t, x)
    }
    fn input_matrix(&self, _t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner.input_matrix(self.t, x)
    }
    fn output(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.inner.output(self.t, x)
    }
    fn output_jacobian(&self, _t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner.output_jacobian(self.t, x)
    }
    fn reference(&self, _t: f64) -> DVector<f64> {
        self.inner.reference(self.t)
    }
    fn cost(&self, _t: f64, x: &DVector<f64>) -> f64 {
        self.inner.cost(self.t, x)
    }
    fn cost_gradient(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.inner.cost_gradient(self.t, x)
    }
    fn cost_hessian(&self, _t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner.cost_hessian(self.t, x)
    }
    fn ineq_matrix(&self, _t: f64) -> DMatrix<f64> {
        self.inner.ineq_matrix(self.t)
    }
    fn ineq_offset(&self, _t: f64) -> DVector<f64> {
        self.inner.ineq_offset(self.t)
    }
    fn diagonal_hessian_hint(&self) -> bool {
        self.inner.diagonal_hessian_hint()
    }
    fn name(&self) -> String {
        format!("{} frozen at t={}", self.inner.name(), self.t)
    }
}

/// Two-state example with strongly nonlinear drift, output and cost:
///
/// ```text
/// f_A = 1/(xᵀx + 0.001)·(1, 1),   B = (xᵀx + 1) I
/// h   = −6t + a² + b² − 1,   a = 5x₁ + 25x₂² − 7,   b = 25x₁² + 5x₂ − 11
/// σ   = √(eᵀP(t)e + 0.001) + 0.001 eᵀe,   e = x − p(t)
/// ```
///
/// with eight time-varying linear inequality rows and `ȳ = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct M1;

/// Default initial states, chosen inside the feasible set at `t = 0`.
/// They are not taken from any published figure.
pub const M1_INITIAL_STATES: [[f64; 2]; 4] = [[0.5, 0.3], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]];

pub fn m1() -> M1 {
    M1
}

impl M1 {
    /// Entries `(P₁₁, P₁₂, P₂₂)` of the symmetric cost weight.
    pub fn weight(t: f64) -> (f64, f64, f64) {
        let th = 4.0 * PI * PI * (PI * t / 100.0).sin();
        let p11 = (9.0 * t + 9.0 * t * th.cos() + 40.0) / (18.0 * t + 40.0);
        let p12 = 9.0 * t * th.sin() / (18.0 * t + 40.0);
        let s = (0.5 * th).sin();
        let p22 = (9.0 * t * s * s + 20.0) / (9.0 * t + 20.0);
        (p11, p12, p22)
    }

    /// Moving cost centre `p(t)`.
    pub fn center(t: f64) -> (f64, f64) {
        let a = PI * t / 5.0;
        let b = 3.0 * PI * t / 10.0;
        (
            -2.0 * a.sin() / 3.0 - 10.0 * b.sin() / 27.0,
            2.0 * a.cos() / 3.0 - 10.0 * b.cos() / 27.0,
        )
    }

    // e, P e and s = √(eᵀPe + 0.001)
    fn cost_parts(t: f64, x: &DVector<f64>) -> ([f64; 2], [f64; 2], f64) {
        let (p11, p12, p22) = Self::weight(t);
        let (c1, c2) = Self::center(t);
        let e = [x[0] - c1, x[1] - c2];
        let pe = [p11 * e[0] + p12 * e[1], p12 * e[0] + p22 * e[1]];
        let s = (e[0] * pe[0] + e[1] * pe[1] + 0.001).sqrt();
        (e, pe, s)
    }

    fn output_parts(x: &DVector<f64>) -> (f64, f64) {
        let a = 5.0 * x[0] + 25.0 * x[1] * x[1] - 7.0;
        let b = 25.0 * x[0] * x[0] + 5.0 * x[1] - 11.0;
        (a, b)
    }
}

impl ProblemDef for M1 {
    fn dims(&self) -> Dims {
        Dims {
            dx: 2,
            dy: 1,
            dc: 8,
        }
    }

    fn drift(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(2, 1.0 / (x.dot(x) + 0.001))
    }

    fn input_matrix(&self, _t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(2, 2) * (x.dot(x) + 1.0)
    }

    fn output(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let (a, b) = Self::output_parts(x);
        DVector::from_element(1, -6.0 * t + a * a + b * b - 1.0)
    }

    // ∂h/∂x₁ = 2a·5 + 2b·50x₁,  ∂h/∂x₂ = 2a·50x₂ + 2b·5
    fn output_jacobian(&self, _t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        let (a, b) = Self::output_parts(x);
        DMatrix::from_row_slice(
            1,
            2,
            &[10.0 * a + 100.0 * b * x[0], 100.0 * a * x[1] + 10.0 * b],
        )
    }

    fn reference(&self, _t: f64) -> DVector<f64> {
        DVector::zeros(1)
    }

    fn cost(&self, t: f64, x: &DVector<f64>) -> f64 {
        let (e, _, s) = Self::cost_parts(t, x);
        s + 0.001 * (e[0] * e[0] + e[1] * e[1])
    }

    // q = P e / s + 0.002 e
    fn cost_gradient(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let (e, pe, s) = Self::cost_parts(t, x);
        DVector::from_vec(vec![pe[0] / s + 0.002 * e[0], pe[1] / s + 0.002 * e[1]])
    }

    // Q = P/s − (Pe)(Pe)ᵀ/s³ + 0.002 I
    fn cost_hessian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        let (p11, p12, p22) = Self::weight(t);
        let (_, pe, s) = Self::cost_parts(t, x);
        let s3 = s * s * s;
        let q11 = p11 / s - pe[0] * pe[0] / s3 + 0.002;
        let q12 = p12 / s - pe[0] * pe[1] / s3;
        let q22 = p22 / s - pe[1] * pe[1] / s3 + 0.002;
        DMatrix::from_row_slice(2, 2, &[q11, q12, q12, q22])
    }

    fn ineq_matrix(&self, t: f64) -> DMatrix<f64> {
        let s = (PI * t / 10.0).sin();
        DMatrix::from_row_slice(
            8,
            2,
            &[
                1.0,
                0.0,
                -1.0,
                0.0,
                0.0,
                1.0,
                0.0,
                -1.0,
                209.0 / (100.0 * s - 143.0),
                1.0,
                s / 2.0 + 73.0 / 75.0,
                1.0,
                77.0 / (8.0 * (5.0 * s + 7.0)),
                -1.0,
                15.0 * s / 38.0 - 67.0 / 152.0,
                -1.0,
            ],
        )
    }

    fn ineq_offset(&self, t: f64) -> DVector<f64> {
        let s = (PI * t / 10.0).sin();
        DVector::from_vec(vec![
            -19.0 / 20.0,
            -19.0 / 20.0,
            -19.0 / 20.0,
            -19.0 / 20.0,
            -209.0 * (3.0 * s - 10.0) / (10.0 * (100.0 * s - 143.0)),
            -3.0 * s / 10.0 - 1.0,
            -77.0 * (s + 5.0) / (40.0 * (5.0 * s + 7.0)),
            3.0 * s / 10.0 - 1.0,
        ])
    }

    fn name(&self) -> String {
        "m1".into()
    }
}

/// Structure of the cost weight in the synthetic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QMode {
    Identity,
    Diagonal,
    /// Dense `AᵀA/d_x + I`.
    Spd,
}

impl QMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            QMode::Identity => "identity",
            QMode::Diagonal => "diagonal",
            QMode::Spd => "spd",
        }
    }
}

impl std::str::FromStr for QMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(QMode::Identity),
            "diagonal" => Ok(QMode::Diagonal),
            "spd" => Ok(QMode::Spd),
            _ => Err(format!("unknown mode `{s}` (identity|diagonal|spd)")),
        }
    }
}

/// Output count of the synthetic family, `min(6, d_x/2)`.
pub fn synthetic_dy(dx: usize) -> usize {
    6.min(dx / 2)
}

/// Scalable problem with `f_A = −100x`, `B = 100 I`, `σ = ½xᵀQx`,
/// `h = H(t)x + b(t)` with `min(6, d_x/2)` rows, `ȳ = 0` and the box
/// `−1 ≤ x ≤ 1`.
///
/// ```text
/// H(t)ᵢⱼ = H0ᵢⱼ + 0.1·H1ᵢⱼ·sin(ωᵢ t + φᵢ)
/// b(t)ᵢ  = 0.08·d_x·(mᵢ + 0.5·sin(νᵢ t + ψᵢ))
/// ```
///
/// All coefficients come from one SplitMix64 stream, drawn in the order
/// H0 (row-major), H1, (ωᵢ, φᵢ) per row, (mᵢ, νᵢ, ψᵢ) per row, then the
/// cost data (diagonal entries or `A` row-major).
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub dx: usize,
    pub dy: usize,
    pub mode: QMode,
    pub h0: DMatrix<f64>,
    pub h1: DMatrix<f64>,
    pub h_freq: Vec<f64>,
    pub h_phase: Vec<f64>,
    pub b_mean: Vec<f64>,
    pub b_freq: Vec<f64>,
    pub b_phase: Vec<f64>,
    pub b_scale: f64,
    pub q: DMatrix<f64>,
}

/// Panics unless `d_x ≥ 4` and even.
pub fn synthetic_family(dx: usize, seed: u64, mode: QMode) -> SyntheticProblem {
    assert!(
        dx >= 4 && dx.is_multiple_of(2),
        "synthetic d_x must be even and at least 4"
    );
    let dy = synthetic_dy(dx);
    let mut rng = SplitMix64::new(seed);
    let draw = |rows: usize, cols: usize, rng: &mut SplitMix64| {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = rng.next_signed();
            }
        }
        m
    };
    let h0 = draw(dy, dx, &mut rng);
    let h1 = draw(dy, dx, &mut rng);
    let (mut h_freq, mut h_phase) = (Vec::new(), Vec::new());
    for _ in 0..dy {
        h_freq.push(0.5 + rng.next_unit());
        h_phase.push(TAU * rng.next_unit());
    }
    let (mut b_mean, mut b_freq, mut b_phase) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..dy {
        b_mean.push(rng.next_signed());
        b_freq.push(0.5 + rng.next_unit());
        b_phase.push(TAU * rng.next_unit());
    }
    let q = match mode {
        QMode::Identity => DMatrix::identity(dx, dx),
        QMode::Diagonal => {
            DMatrix::from_diagonal(&DVector::from_fn(dx, |_, _| 0.5 + 1.5 * rng.next_unit()))
        }
        QMode::Spd => {
            let a = draw(dx, dx, &mut rng);
            let mut q = a.transpose() * &a / dx as f64;
            for i in 0..dx {
                q[(i, i)] += 1.0;
            }
            q
        }
    };
    SyntheticProblem {
        dx,
        dy,
        mode,
        h0,
        h1,
        h_freq,
        h_phase,
        b_mean,
        b_freq,
        b_phase,
        b_scale: 0.08 * dx as f64,
        q,
    }
}

impl SyntheticProblem {
    pub fn output_matrix(&self, t: f64) -> DMatrix<f64> {
        let mut h = self.h0.clone();
        for i in 0..self.dy {
            let w = 0.1 * (self.h_freq[i] * t + self.h_phase[i]).sin();
            for j in 0..self.dx {
                h[(i, j)] += w * self.h1[(i, j)];
            }
        }
        h
    }

    pub fn output_offset(&self, t: f64) -> DVector<f64> {
        DVector::from_fn(self.dy, |i, _| {
            self.b_scale * (self.b_mean[i] + 0.5 * (self.b_freq[i] * t + self.b_phase[i]).sin())
        })
    }
}

impl ProblemDef for SyntheticProblem {
    fn dims(&self) -> Dims {
        Dims {
            dx: self.dx,
            dy: self.dy,
            dc: 2 * self.dx,
        }
    }
    fn drift(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        x * -100.0
    }
    fn input_matrix(&self, _t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dx, self.dx) * 100.0
    }
    fn output(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.output_matrix(t) * x + self.output_offset(t)
    }
    fn output_jacobian(&self, t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        self.output_matrix(t)
    }
    fn reference(&self, _t: f64) -> DVector<f64> {
        DVector::zeros(self.dy)
    }
    fn cost(&self, _t: f64, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x))
    }
    fn cost_gradient(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x
    }
    fn cost_hessian(&self, _t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }
    fn ineq_matrix(&self, _t: f64) -> DMatrix<f64> {
        box_rows(self.dx)
    }
    fn ineq_offset(&self, _t: f64) -> DVector<f64> {
        DVector::from_element(2 * self.dx, -1.0)
    }
    fn diagonal_hessian_hint(&self) -> bool {
        self.mode != QMode::Spd
    }
    fn name(&self) -> String {
        format!("synthetic(d_x={}, {})", self.dx, self.mode.as_str())
    }
}

// [I; −I]
fn box_rows(dx: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(2 * dx, dx);
    for i in 0..dx {
        g[(i, i)] = 1.0;
        g[(dx + i, i)] = -1.0;
    }
    g
}

/// Mean-variance allocation with prescribed reward on synthetic data:
/// `h = [p(t)ᵀx; Σxᵢ]`, `ȳ = [p_am(t); 1]` (zero when no return is
/// positive), `σ = xᵀQ(t)x`, `0 ≤ x ≤ 1`, `f_A = −100x`, `B = 100 I`.
///
/// ```text
/// pᵢ(t)  = offset + μᵢ + ρᵢ·sin(νᵢ t + ψᵢ)
/// Q(t)   = AᵀA/d_x + diag(δᵢ·(1 + 0.5·sin(ωᵢ t + φᵢ)))
/// ```
#[derive(Debug, Clone)]
pub struct PortfolioProblem {
    pub dx: usize,
    pub cov: DMatrix<f64>,
    pub delta: Vec<f64>,
    pub q_freq: Vec<f64>,
    pub q_phase: Vec<f64>,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    pub p_freq: Vec<f64>,
    pub p_phase: Vec<f64>,
    pub offset: f64,
}

/// Panics unless `d_x ≥ 4`.
pub fn portfolio_synthetic(dx: usize, seed: u64) -> PortfolioProblem {
    assert!(dx >= 4, "portfolio needs at least 4 assets");
    let mut rng = SplitMix64::new(seed);
    let mut a = DMatrix::zeros(dx, dx);
    for i in 0..dx {
        for j in 0..dx {
            a[(i, j)] = rng.next_signed();
        }
    }
    let mut out = PortfolioProblem {
        dx,
        cov: a.transpose() * &a / dx as f64,
        delta: Vec::new(),
        q_freq: Vec::new(),
        q_phase: Vec::new(),
        mu: Vec::new(),
        rho: Vec::new(),
        p_freq: Vec::new(),
        p_phase: Vec::new(),
        offset: 0.0,
    };
    for _ in 0..dx {
        out.delta.push(0.5 + rng.next_unit());
        out.q_freq.push(0.5 + rng.next_unit());
        out.q_phase.push(TAU * rng.next_unit());
        out.mu.push(-0.02 + 0.1 * rng.next_unit());
        out.rho.push(0.05 * rng.next_unit());
        out.p_freq.push(0.5 + rng.next_unit());
        out.p_phase.push(TAU * rng.next_unit());
    }
    out
}

impl PortfolioProblem {
    /// Shift every expected return by a constant.
    pub fn with_return_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn returns(&self, t: f64) -> DVector<f64> {
        DVector::from_fn(self.dx, |i, _| {
            self.offset + self.mu[i] + self.rho[i] * (self.p_freq[i] * t + self.p_phase[i]).sin()
        })
    }

    pub fn covariance(&self, t: f64) -> DMatrix<f64> {
        let mut q = self.cov.clone();
        for i in 0..self.dx {
            q[(i, i)] += self.delta[i] * (1.0 + 0.5 * (self.q_freq[i] * t + self.q_phase[i]).sin());
        }
        q
    }
}

/// `[p_am; 1]` with `p_am` the mean of the positive entries, or zero when
/// there are none.
pub fn prescribed_reward(p: &DVector<f64>) -> DVector<f64> {
    let pos: Vec<f64> = p.iter().copied().filter(|v| *v > 0.0).collect();
    if pos.is_empty() {
        DVector::zeros(2)
    } else {
        DVector::from_vec(vec![pos.iter().sum::<f64>() / pos.len() as f64, 1.0])
    }
}

impl ProblemDef for PortfolioProblem {
    fn dims(&self) -> Dims {
        Dims {
            dx: self.dx,
            dy: 2,
            dc: 2 * self.dx,
        }
    }
    fn drift(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        x * -100.0
    }
    fn input_matrix(&self, _t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dx, self.dx) * 100.0
    }
    fn output(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![self.returns(t).dot(x), x.sum()])
    }
    fn output_jacobian(&self, t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::from_element(2, self.dx, 1.0);
        h.row_mut(0).copy_from(&self.returns(t).transpose());
        h
    }
    fn reference(&self, t: f64) -> DVector<f64> {
        prescribed_reward(&self.returns(t))
    }
    fn cost(&self, t: f64, x: &DVector<f64>) -> f64 {
        x.dot(&(self.covariance(t) * x))
    }
    fn cost_gradient(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.covariance(t) * x * 2.0
    }
    fn cost_hessian(&self, t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        self.covariance(t) * 2.0
    }
    // x − 1 ≤ 0 and −x ≤ 0
    fn ineq_matrix(&self, _t: f64) -> DMatrix<f64> {
        box_rows(self.dx)
    }
    fn ineq_offset(&self, _t: f64) -> DVector<f64> {
        DVector::from_fn(2 * self.dx, |i, _| if i < self.dx { -1.0 } else { 0.0 })
    }
    fn name(&self) -> String {
        format!("portfolio(d_x={})", self.dx)
    }
}

/// The 3-D state-constrained LQ example, with `K_x = 500`.
pub fn sclqr_paper() -> SclqrModel {
    SclqrModel {
        qxx: DMatrix::from_row_slice(
            3,
            3,
            &[
                1.04, -0.01695, 0.2303, -0.01695, 0.7284, 0.2473, 0.2303, 0.2473, 1.898,
            ],
        ),
        quu: DMatrix::from_row_slice(
            3,
            3,
            &[
                7.331, 0.1877, 2.067, 0.1877, 2.328, -0.6628, 2.067, -0.6628, 3.956,
            ],
        ) * 1e-5,
        a: DMatrix::from_row_slice(
            3,
            3,
            &[
                0.1086, -0.2032, -0.02073, 0.1763, 0.6136, 0.5626, -0.5076, -0.3963, -0.1000,
            ],
        ),
        b: DMatrix::from_row_slice(
            3,
            3,
            &[
                0.6665, 0.9614, -0.8088, 0.3533, 0.1329, -0.875, -0.8267, -0.5846, -0.9484,
            ],
        ),
        h: DMatrix::from_row_slice(1, 3, &[-0.3317, 0.1136, 0.6919]),
        k_x: 500.0,
    }
}

/// Initial states for the 3-D example (not taken from a published figure;
/// both are off the constraint plane).
pub const SCLQR_INITIAL_STATES: [[f64; 3]; 2] = [[1.0, -1.0, 0.5], [-0.5, 1.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExampleId {
    M1,
    Synthetic { dx: usize, seed: u64, mode: QMode },
    Portfolio { dx: usize, seed: u64 },
    SclqrPaper,
}

impl ExampleId {
    /// The problem definition, or `None` for the LQ example.
    pub fn problem(&self) -> Option<Box<dyn ProblemDef>> {
        match *self {
            ExampleId::M1 => Some(Box::new(M1)),
            ExampleId::Synthetic { dx, seed, mode } => {
                Some(Box::new(synthetic_family(dx, seed, mode)))
            }
            ExampleId::Portfolio { dx, seed } => Some(Box::new(portfolio_synthetic(dx, seed))),
            ExampleId::SclqrPaper => None,
        }
    }
}
