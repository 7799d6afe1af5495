//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver paths under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use oedctl_core::rng::SplitMix64;
use oedctl_core::sclqr::TransformedLq;

pub fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.next_signed())
}

/// `AᵀA/n + I`, comfortably positive definite.
pub fn random_spd(rng: &mut SplitMix64, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    a.transpose() * &a / n as f64 + DMatrix::identity(n, n)
}

/// Minimizer of `½(x−a)ᵀQ(x−a)` subject to `Hx = ȳ`, from the full KKT
/// system solved by full-pivot LU.
pub fn kkt_minimizer(
    q: &DMatrix<f64>,
    a: &DVector<f64>,
    h: &DMatrix<f64>,
    ybar: &DVector<f64>,
) -> DVector<f64> {
    let (m, n) = h.shape();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(q);
    k.view_mut((0, n), (n, m)).copy_from(&h.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(h);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(q * a));
    rhs.rows_mut(n, m).copy_from(ybar);
    let sol = k.full_piv_lu().solve(&rhs).expect("KKT matrix is regular");
    sol.rows(0, n).clone_owned()
}

/// Minimizer of `½‖x−a‖²` over `{1ᵀx = 1, x ≤ cap}` by growing the set of
/// clamped coordinates until every free one is below the cap.
pub fn capped_simplex_projection(a: &DVector<f64>, cap: f64) -> DVector<f64> {
    let n = a.len();
    let mut clamped = vec![false; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| !clamped[i]).collect();
        let fixed = (n - free.len()) as f64 * cap;
        let shift = (1.0 - fixed - free.iter().map(|&i| a[i]).sum::<f64>()) / free.len() as f64;
        let x = DVector::from_fn(n, |i, _| if clamped[i] { cap } else { a[i] + shift });
        let over: Vec<usize> = free.iter().copied().filter(|&i| x[i] > cap).collect();
        if over.is_empty() {
            return x;
        }
        for i in over {
            clamped[i] = true;
        }
    }
}

/// `n` intervals on `[0, t_final]` whose lengths grow geometrically from
/// `first`.
pub fn geometric_grid(t_final: f64, n: usize, first: f64) -> Vec<f64> {
    let total = |r: f64| first * (r.powi(n as i32) - 1.0) / (r - 1.0);
    let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > t_final {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let mut t = vec![0.0];
    let mut h = first;
    for _ in 0..n {
        let next = t.last().unwrap() + h;
        t.push(next);
        h *= r;
    }
    *t.last_mut().unwrap() = t_final;
    t
}

/// Transition `Φ = e^{Fh}` and exact cost matrix `∫₀ʰ e^{Fᵀs} W e^{Fs} ds`
/// (Van Loan), with the interval split so each exponential stays well
/// conditioned.
pub fn van_loan(f: &DMatrix<f64>, w: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = f.nrows();
    let norm = f.abs().row_sum().max();
    let pieces = ((h * norm) / 0.5).ceil().max(1.0) as usize;
    let tau = h / pieces as f64;
    let mut c = DMatrix::zeros(2 * n, 2 * n);
    c.view_mut((0, 0), (n, n)).copy_from(&(-f.transpose()));
    c.view_mut((0, n), (n, n)).copy_from(w);
    c.view_mut((n, n), (n, n)).copy_from(f);
    let e = (c * tau).exp();
    let phi_tau = e.view((n, n), (n, n)).clone_owned();
    let w_tau = phi_tau.transpose() * e.view((0, n), (n, n));
    let mut phi = DMatrix::identity(n, n);
    let mut wd = DMatrix::zeros(n, n);
    for _ in 0..pieces {
        wd += phi.transpose() * &w_tau * &phi;
        phi = &phi_tau * phi;
    }
    (phi, (&wd + wd.transpose()) * 0.5)
}

/// Orthonormal basis of `{x : Hx = 0}` from the eigenvectors of `HᵀH`.
pub fn null_basis(h: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(h.transpose() * h);
    let top = eig.eigenvalues.amax();
    let cols: Vec<DVector<f64>> = (0..h.ncols())
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-12 * top)
        .map(|i| eig.eigenvectors.column(i).clone_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// Jacobi-preconditioned conjugate gradients on an SPD system.
pub fn conjugate_gradient(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let diag = a.diagonal();
    let precond = |r: &DVector<f64>| r.component_div(&diag);
    let mut x = DVector::zeros(b.len());
    let mut r = b.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let b_norm = b.norm();
    for _ in 0..20 * b.len() {
        if r.norm() <= rel_tol * b_norm {
            break;
        }
        let ap = a * &p;
        let alpha = rz / p.dot(&ap);
        x += &p * alpha;
        r -= &ap * alpha;
        z = precond(&r);
        let rz_next = r.dot(&z);
        p = &z + &p * (rz_next / rz);
        rz = rz_next;
    }
    assert!(
        r.norm() <= rel_tol * b_norm * 10.0,
        "CG stalled at {:e}",
        r.norm() / b_norm
    );
    x
}

/// Optimal cost over `[0, t_final]` of the transformed LQ problem with `v`
/// piecewise constant on a geometric grid of `n` intervals and restricted
/// to the null space of `h` (the only directions that reach the state).
/// Each interval's state map and running cost are exact; the reduced
/// quadratic in the stacked inputs is minimized by conjugate gradients.
pub fn sclqr_oracle_cost(
    lq: &TransformedLq,
    h: &DMatrix<f64>,
    x0: &DVector<f64>,
    t_final: f64,
    n: usize,
) -> f64 {
    let d = lq.a_t.nrows();
    let psi = null_basis(h);
    let k = psi.ncols();
    let bw = &lq.b_t * &psi;
    let mut f = DMatrix::zeros(d + k, d + k);
    f.view_mut((0, 0), (d, d)).copy_from(&lq.a_t);
    f.view_mut((0, d), (d, k)).copy_from(&bw);
    let mut w = DMatrix::zeros(d + k, d + k);
    w.view_mut((0, 0), (d, d)).copy_from(&lq.qxx_t);
    let cross = &lq.n_t * &psi;
    w.view_mut((0, d), (d, k)).copy_from(&cross);
    w.view_mut((d, 0), (k, d)).copy_from(&cross.transpose());
    w.view_mut((d, d), (k, k))
        .copy_from(&(psi.transpose() * &lq.qvv_t * &psi));

    // Decision vector ξ = [s; w₀; …; w_{n−1}] with x(0) = s·x0.
    let dim = 1 + k * n;
    let mut x_map = DMatrix::zeros(d, dim);
    x_map.set_column(0, x0);
    let mut m = DMatrix::zeros(dim, dim);
    let grid = geometric_grid(t_final, n, 1e-4);
    for i in 0..n {
        let (phi, wd) = van_loan(&f, &w, grid[i + 1] - grid[i]);
        let mut z_map = DMatrix::zeros(d + k, dim);
        z_map.view_mut((0, 0), (d, dim)).copy_from(&x_map);
        for j in 0..k {
            z_map[(d + j, 1 + k * i + j)] = 1.0;
        }
        m += z_map.transpose() * wd * &z_map;
        x_map = phi.view((0, 0), (d, d + k)) * z_map;
    }
    let m_vv = m.view((1, 1), (dim - 1, dim - 1)).clone_owned();
    let m_v1 = m.view((1, 0), (dim - 1, 1)).column(0).clone_owned();
    let v = conjugate_gradient(&m_vv, &(-&m_v1), 1e-12);
    m[(0, 0)] + 2.0 * m_v1.dot(&v) + v.dot(&(&m_vv * &v))
}
