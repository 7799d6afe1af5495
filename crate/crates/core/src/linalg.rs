//! Dense SPD factorization and weighted right pseudoinverses.
//!
//! Every `R⁻¹` and `(H W⁻¹ Hᵀ)⁻¹` in the controller goes through an
//! [`SpdFactor`]; nothing here forms an explicit inverse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted by [`factor_spd`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Pivots at or below this fraction of the largest diagonal entry are
/// treated as non-positive.
const PIVOT_REL_TOL: f64 = 1e-14;

/// Factored symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum SpdFactor {
    /// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
    Dense { lower: DMatrix<f64> },
    /// Reciprocals of the diagonal of a diagonal `M`.
    Diagonal { recip: DVector<f64> },
}

/// Factor `m`, taking the reciprocal-diagonal path when `diagonal_hint` is
/// set and every off-diagonal entry is exactly zero.
///
/// The input is symmetrized as `(M + Mᵀ)/2` before the dense factorization.
pub fn factor_spd(m: &DMatrix<f64>, diagonal_hint: bool) -> Result<SpdFactor> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "factor_spd (square)",
            expected: n,
            actual: m.ncols(),
        });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut asym = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asym / scale,
        });
    }

    if diagonal_hint && is_exactly_diagonal(m) {
        let max_diag = m.diagonal().amax();
        let mut recip = DVector::zeros(n);
        for i in 0..n {
            let d = m[(i, i)];
            if !(d > PIVOT_REL_TOL * max_diag) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: i, value: d });
            }
            recip[i] = 1.0 / d;
        }
        return Ok(SpdFactor::Diagonal { recip });
    }

    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        a[(j, j)] = m[(j, j)];
        for i in (j + 1)..n {
            a[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    cholesky_in_place(&mut a)?;
    Ok(SpdFactor::Dense { lower: a })
}

/// Column-oriented Cholesky on the lower triangle of `a`; the strict upper
/// triangle is left zero.
fn cholesky_in_place(a: &mut DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tol = PIVOT_REL_TOL * max_diag;
    let data = a.as_mut_slice();
    for j in 0..n {
        let (head, tail) = data.split_at_mut(j * n);
        let col_j = &mut tail[..n];
        for k in 0..j {
            let col_k = &head[k * n..(k + 1) * n];
            let ljk = col_k[j];
            if ljk != 0.0 {
                for i in j..n {
                    col_j[i] -= col_k[i] * ljk;
                }
            }
        }
        let d = col_j[j];
        if !(d > tol) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let s = d.sqrt();
        col_j[j] = s;
        let inv = 1.0 / s;
        for v in &mut col_j[(j + 1)..n] {
            *v *= inv;
        }
    }
    Ok(())
}

pub fn is_exactly_diagonal(m: &DMatrix<f64>) -> bool {
    let (r, c) = m.shape();
    (0..c).all(|j| (0..r).all(|i| i == j || m[(i, j)] == 0.0))
}

impl SpdFactor {
    pub fn identity(n: usize) -> Self {
        SpdFactor::Diagonal {
            recip: DVector::from_element(n, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpdFactor::Dense { lower } => lower.nrows(),
            SpdFactor::Diagonal { recip } => recip.len(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, SpdFactor::Diagonal { .. })
    }

    /// `M⁻¹ b` for a single right-hand side.
    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_rows(b.len())?;
        let mut x = b.clone();
        self.solve_slice(x.as_mut_slice());
        Ok(x)
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "SpdFactor::solve",
                expected: self.dim(),
                actual: rows,
            });
        }
        Ok(())
    }

    fn solve_slice(&self, y: &mut [f64]) {
        match self {
            SpdFactor::Diagonal { recip } => {
                for (v, r) in y.iter_mut().zip(recip.iter()) {
                    *v *= r;
                }
            }
            SpdFactor::Dense { lower } => {
                let n = lower.nrows();
                let l = lower.as_slice();
                // L z = b
                for j in 0..n {
                    let col = &l[j * n..(j + 1) * n];
                    let zj = y[j] / col[j];
                    y[j] = zj;
                    if zj != 0.0 {
                        for i in (j + 1)..n {
                            y[i] -= col[i] * zj;
                        }
                    }
                }
                // Lᵀ x = z
                for j in (0..n).rev() {
                    let col = &l[j * n..(j + 1) * n];
                    let mut acc = y[j];
                    for i in (j + 1)..n {
                        acc -= col[i] * y[i];
                    }
                    y[j] = acc / col[j];
                }
            }
        }
    }

    /// Rebuild `M` from the factor.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        match self {
            SpdFactor::Dense { lower } => lower * lower.transpose(),
            SpdFactor::Diagonal { recip } => DMatrix::from_diagonal(&recip.map(|r| 1.0 / r)),
        }
    }
}

/// `M⁻¹ B` column by column.
pub fn solve_spd(f: &SpdFactor, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    f.check_rows(b.nrows())?;
    let mut x = b.clone();
    let n = b.nrows();
    for col in x.as_mut_slice().chunks_mut(n.max(1)) {
        if n > 0 {
            f.solve_slice(col);
        }
    }
    Ok(x)
}

/// Options for building a weighted pseudoinverse.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PinvOptions {
    /// Ridge `ε` added to the diagonal of `H W⁻¹ Hᵀ`; zero disables it.
    pub ridge: f64,
}

/// Factored `H^#_W = W⁻¹Hᵀ(HW⁻¹Hᵀ)⁻¹`.
#[derive(Debug, Clone)]
pub struct WeightedPinv {
    h: DMatrix<f64>,
    /// `W⁻¹ Hᵀ`, `d_x × d_y`.
    z: DMatrix<f64>,
    s: SpdFactor,
}

pub fn wpinv_build(h: &DMatrix<f64>, w: &SpdFactor) -> Result<WeightedPinv> {
    wpinv_build_with(h, w, PinvOptions::default())
}

pub fn wpinv_build_with(
    h: &DMatrix<f64>,
    w: &SpdFactor,
    opts: PinvOptions,
) -> Result<WeightedPinv> {
    let (dy, dx) = h.shape();
    if w.dim() != dx {
        return Err(Error::DimensionMismatch {
            context: "wpinv_build (weight)",
            expected: dx,
            actual: w.dim(),
        });
    }
    if dy > dx {
        return Err(Error::DimensionMismatch {
            context: "wpinv_build (rows <= cols)",
            expected: dx,
            actual: dy,
        });
    }
    let z = solve_spd(w, &h.transpose())?;
    let mut s = h * &z;
    for i in 0..dy {
        s[(i, i)] += opts.ridge;
        for j in (i + 1)..dy {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    let s = match factor_spd(&s, false) {
        Ok(f) => f,
        Err(Error::NotPositiveDefinite { pivot, value }) => {
            return Err(Error::RankDeficient { pivot, value })
        }
        Err(e) => return Err(e),
    };
    Ok(WeightedPinv { h: h.clone(), z, s })
}

impl WeightedPinv {
    pub fn rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn cols(&self) -> usize {
        self.h.ncols()
    }

    /// `H^#_W v`.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.rows() {
            return Err(Error::DimensionMismatch {
                context: "wpinv_apply",
                expected: self.rows(),
                actual: v.len(),
            });
        }
        let w = self.s.solve_vec(v)?;
        Ok(&self.z * w)
    }

    /// `(H W⁻¹ Hᵀ)⁻¹ v`.
    pub fn gram_solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.s.solve_vec(v)
    }

    /// `(I − H^#_W H) v`.
    pub fn null_project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                context: "null_project",
                expected: self.cols(),
                actual: v.len(),
            });
        }
        let hv = &self.h * v;
        Ok(v - self.apply(&hv)?)
    }

    /// Explicit `H^#_W`, for diagnostics and small problems.
    pub fn matrix(&self) -> DMatrix<f64> {
        let st = solve_spd(&self.s, &self.z.transpose()).expect("dimensions fixed at build");
        st.transpose()
    }

    /// Explicit projector `I − H^#_W H`.
    pub fn null_projector(&self) -> DMatrix<f64> {
        DMatrix::identity(self.cols(), self.cols()) - self.matrix() * &self.h
    }
}

/// Maximum absolute row sum.
pub fn max_row_sum_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solve a general square system `A x = b` (partial-pivot LU, with a
/// reciprocal fast path for exactly diagonal `A`).
pub fn solve_general(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_general",
            expected: n,
            actual: b.len(),
        });
    }
    let scale = a.amax();
    if !(scale > 0.0) {
        return Err(Error::SingularInputMatrix);
    }
    if is_exactly_diagonal(a) {
        let mut x = b.clone();
        for i in 0..n {
            let d = a[(i, i)];
            if d.abs() <= 1e-14 * scale {
                return Err(Error::SingularInputMatrix);
            }
            x[i] /= d;
        }
        return Ok(x);
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let min_piv = u
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min_piv <= 1e-14 * scale {
        return Err(Error::SingularInputMatrix);
    }
    lu.solve(b).ok_or(Error::SingularInputMatrix)
}
