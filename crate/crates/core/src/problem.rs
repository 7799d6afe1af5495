//! Problem-definition contract for the control-affine tracking class
//!
//! ```text
//! ẋ = f_A(x) + B(x) u,   y = h(t, x)
//! min σ(t, χ)  s.t.  h(t, χ) = ȳ(t),  G(t) χ + c(t) ≤ 0
//! ```
//!
//! Implementations supply analytic derivatives; [`check_derivatives`]
//! compares them against central differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub dx: usize,
    pub dy: usize,
    pub dc: usize,
}

/// Evaluators of one problem instance. All methods must be pure and
/// deterministic; a single instance may be shared across threads.
pub trait ProblemDef: Send + Sync {
    fn dims(&self) -> Dims;

    /// Drift `f_A`.
    fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;
    /// Square input matrix `B`.
    fn input_matrix(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64>;
    /// Output `h`.
    fn output(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;
    /// Output Jacobian `H = ∂h/∂x`.
    fn output_jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64>;
    /// Output reference `ȳ`.
    fn reference(&self, t: f64) -> DVector<f64>;

    fn cost(&self, t: f64, x: &DVector<f64>) -> f64;
    /// `q = (∂σ/∂x)ᵀ`.
    fn cost_gradient(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;
    /// `Q = ∂²σ/∂x²`.
    fn cost_hessian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64>;

    /// `G(t)` of the linear inequality `G χ + c ≤ 0`.
    fn ineq_matrix(&self, t: f64) -> DMatrix<f64>;
    fn ineq_offset(&self, t: f64) -> DVector<f64>;

    /// Caller hint that `Q` is diagonal; enables the reciprocal fast path
    /// whenever the assembled Hessian is exactly diagonal.
    fn diagonal_hessian_hint(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        "problem".to_string()
    }
}

/// All evaluator outputs at one `(t, x)`.
#[derive(Debug, Clone)]
pub struct EvalBundle {
    pub t: f64,
    pub x: DVector<f64>,
    pub drift: DVector<f64>,
    pub input_matrix: DMatrix<f64>,
    pub output: DVector<f64>,
    pub output_jacobian: DMatrix<f64>,
    pub reference: DVector<f64>,
    pub cost: f64,
    pub cost_gradient: DVector<f64>,
    pub cost_hessian: DMatrix<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_offset: DVector<f64>,
    pub diagonal_hint: bool,
}

impl EvalBundle {
    pub fn dims(&self) -> Dims {
        Dims {
            dx: self.x.len(),
            dy: self.output.len(),
            dc: self.ineq_offset.len(),
        }
    }

    /// `ȳ − h`.
    pub fn output_error(&self) -> DVector<f64> {
        &self.reference - &self.output
    }
}

fn finite_vec(v: &DVector<f64>, name: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteEvaluation { evaluator: name })
    }
}

fn finite_mat(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteEvaluation { evaluator: name })
    }
}

fn expect_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}

/// Evaluate every function of `p` once at `(t, x)` and validate shapes and
/// finiteness.
pub fn eval_bundle<P: ProblemDef + ?Sized>(p: &P, t: f64, x: &DVector<f64>) -> Result<EvalBundle> {
    let d = p.dims();
    expect_len("state", d.dx, x.len())?;
    finite_vec(x, "state")?;

    let drift = p.drift(t, x);
    expect_len("drift", d.dx, drift.len())?;
    finite_vec(&drift, "drift")?;
    let input_matrix = p.input_matrix(t, x);
    expect_len("input_matrix rows", d.dx, input_matrix.nrows())?;
    expect_len("input_matrix cols", d.dx, input_matrix.ncols())?;
    finite_mat(&input_matrix, "input_matrix")?;
    let output = p.output(t, x);
    expect_len("output", d.dy, output.len())?;
    finite_vec(&output, "output")?;
    let output_jacobian = p.output_jacobian(t, x);
    expect_len("output_jacobian rows", d.dy, output_jacobian.nrows())?;
    expect_len("output_jacobian cols", d.dx, output_jacobian.ncols())?;
    finite_mat(&output_jacobian, "output_jacobian")?;
    let reference = p.reference(t);
    expect_len("reference", d.dy, reference.len())?;
    finite_vec(&reference, "reference")?;
    let cost = p.cost(t, x);
    if !cost.is_finite() {
        return Err(Error::NonFiniteEvaluation { evaluator: "cost" });
    }
    let cost_gradient = p.cost_gradient(t, x);
    expect_len("cost_gradient", d.dx, cost_gradient.len())?;
    finite_vec(&cost_gradient, "cost_gradient")?;
    let cost_hessian = p.cost_hessian(t, x);
    expect_len("cost_hessian rows", d.dx, cost_hessian.nrows())?;
    expect_len("cost_hessian cols", d.dx, cost_hessian.ncols())?;
    finite_mat(&cost_hessian, "cost_hessian")?;
    let ineq_matrix = p.ineq_matrix(t);
    expect_len("ineq_matrix rows", d.dc, ineq_matrix.nrows())?;
    expect_len("ineq_matrix cols", d.dx, ineq_matrix.ncols())?;
    finite_mat(&ineq_matrix, "ineq_matrix")?;
    let ineq_offset = p.ineq_offset(t);
    expect_len("ineq_offset", d.dc, ineq_offset.len())?;
    finite_vec(&ineq_offset, "ineq_offset")?;

    Ok(EvalBundle {
        t,
        x: x.clone(),
        drift,
        input_matrix,
        output,
        output_jacobian,
        reference,
        cost,
        cost_gradient,
        cost_hessian,
        ineq_matrix,
        ineq_offset,
        diagonal_hint: p.diagonal_hessian_hint(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivCheckReport {
    /// `q` against central differences of `σ`.
    pub gradient_error: f64,
    /// `Q` against central differences of `q`.
    pub hessian_error: f64,
    /// `H` against central differences of `h`.
    pub jacobian_error: f64,
    pub step: f64,
}

impl DerivCheckReport {
    pub fn max_error(&self) -> f64 {
        self.gradient_error
            .max(self.hessian_error)
            .max(self.jacobian_error)
    }
}

/// Compare analytic `q`, `Q`, `H` against central differences of `σ`, `q`
/// and `h`. Errors are `max |analytic − fd| / (1 + ‖analytic‖∞)`.
pub fn check_derivatives<P: ProblemDef + ?Sized>(
    p: &P,
    t: f64,
    x: &DVector<f64>,
    fd_step: f64,
) -> Result<DerivCheckReport> {
    if !(1e-8..=1e-3).contains(&fd_step) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step {fd_step} outside [1e-8, 1e-3]"
        )));
    }
    let b = eval_bundle(p, t, x)?;
    let d = b.dims();
    let mut fd_grad = DVector::zeros(d.dx);
    let mut fd_hess = DMatrix::zeros(d.dx, d.dx);
    let mut fd_jac = DMatrix::zeros(d.dy, d.dx);
    for j in 0..d.dx {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += fd_step;
        xm[j] -= fd_step;
        let denom = 2.0 * fd_step;
        let (sp, sm) = (p.cost(t, &xp), p.cost(t, &xm));
        if !sp.is_finite() || !sm.is_finite() {
            return Err(Error::NonFiniteEvaluation { evaluator: "cost" });
        }
        fd_grad[j] = (sp - sm) / denom;
        let (gp, gm) = (p.cost_gradient(t, &xp), p.cost_gradient(t, &xm));
        finite_vec(&gp, "cost_gradient")?;
        finite_vec(&gm, "cost_gradient")?;
        fd_hess.set_column(j, &((gp - gm) / denom));
        let (hp, hm) = (p.output(t, &xp), p.output(t, &xm));
        finite_vec(&hp, "output")?;
        finite_vec(&hm, "output")?;
        fd_jac.set_column(j, &((hp - hm) / denom));
    }
    let rel = |a: f64, diff: f64| diff / (1.0 + a);
    Ok(DerivCheckReport {
        gradient_error: rel(b.cost_gradient.amax(), (&b.cost_gradient - fd_grad).amax()),
        hessian_error: rel(b.cost_hessian.amax(), (&b.cost_hessian - fd_hess).amax()),
        jacobian_error: rel(
            b.output_jacobian.amax(),
            (&b.output_jacobian - fd_jac).amax(),
        ),
        step: fd_step,
    })
}
