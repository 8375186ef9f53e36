//! Lowest eigenpairs of real symmetric operators.
//!
//! [`lanczos_ground`] runs explicitly restarted Lanczos with full
//! reorthogonalization of the Krylov basis. The tridiagonal projection is
//! solved by Sturm bisection for the lowest Ritz value and pivoted inverse
//! iteration for its vector. [`dense_eigmin`] is the direct route.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::Sector;
use crate::error::{Error, Result};
use crate::hamiltonian::SparseHamiltonian;
use crate::sparse::{CsrMatrix, LinearOperator};

/// Projected matrices up to this size go to the dense solver.
pub const DENSE_CUTOFF: usize = 400;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Target for `||A v - lambda v||`.
    pub tol: f64,
    /// Total matrix-vector products allowed; `None` means `10 sqrt(dim) + 200`.
    pub max_iter: Option<usize>,
    pub seed: u64,
    /// Krylov vectors kept before an explicit restart.
    pub krylov_dim: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: DEFAULT_TOL, max_iter: None, seed: 0, krylov_dim: 120 }
    }
}

impl LanczosOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn iteration_cap(&self, dim: usize) -> usize {
        self.max_iter.unwrap_or(10 * (dim as f64).sqrt().ceil() as usize + 200)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub value: f64,
    pub vector: Option<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Makes the first largest-magnitude component positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Number of eigenvalues of the tridiagonal `(d, e)` strictly below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let coupling = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] / q };
        q = d[i] - x - coupling;
        if q == 0.0 {
            q = -f64::EPSILON * (x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn lowest_tridiag_value(d: &[f64], e: &[f64]) -> f64 {
    let m = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < m { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
            break;
        }
        if sturm_count(d, e, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - shift) y = b` in place with partial pivoting.
fn solve_shifted_tridiag(d: &[f64], e: &[f64], shift: f64, b: &mut [f64]) {
    let n = d.len();
    if n == 1 {
        let p = d[0] - shift;
        b[0] /= if p == 0.0 { f64::EPSILON } else { p };
        return;
    }
    let tiny = f64::EPSILON * d.iter().chain(e).fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    let mut diag: Vec<f64> = d.iter().map(|x| x - shift).collect();
    let mut sub = e.to_vec();
    let mut sup = e.to_vec();
    let mut sup2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n - 1];
    for i in 0..n - 1 {
        if diag[i].abs() >= sub[i].abs() {
            if diag[i] == 0.0 {
                diag[i] = tiny;
            }
            let f = sub[i] / diag[i];
            sub[i] = f;
            diag[i + 1] -= f * sup[i];
        } else {
            let f = diag[i] / sub[i];
            diag[i] = sub[i];
            sub[i] = f;
            let tmp = sup[i];
            sup[i] = diag[i + 1];
            diag[i + 1] = tmp - f * diag[i + 1];
            if i + 2 < n {
                sup2[i] = sup[i + 1];
                sup[i + 1] *= -f;
            }
            swapped[i] = true;
        }
    }
    if diag[n - 1] == 0.0 {
        diag[n - 1] = tiny;
    }
    for i in 0..n - 1 {
        if swapped[i] {
            let tmp = b[i] - sub[i] * b[i + 1];
            b[i] = b[i + 1];
            b[i + 1] = tmp;
        } else {
            b[i + 1] -= sub[i] * b[i];
        }
    }
    b[n - 1] /= diag[n - 1];
    b[n - 2] = (b[n - 2] - sup[n - 2] * b[n - 1]) / diag[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - sup[i] * b[i + 1] - sup2[i] * b[i + 2]) / diag[i];
    }
}

/// Lowest eigenpair of a symmetric tridiagonal matrix; the vector is unit norm.
pub(crate) fn tridiag_ground(d: &[f64], e: &[f64]) -> (f64, Vec<f64>) {
    let theta = lowest_tridiag_value(d, e);
    let m = d.len();
    let mut y = vec![1.0 / (m as f64).sqrt(); m];
    for _ in 0..3 {
        solve_shifted_tridiag(d, e, theta, &mut y);
        let n = norm(&y);
        if !n.is_finite() || n == 0.0 {
            break;
        }
        y.iter_mut().for_each(|x| *x /= n);
    }
    (theta, y)
}

fn random_unit(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Lowest eigenpair of a symmetric operator.
///
/// The returned vector is unit norm with its first largest-magnitude entry
/// positive. Identical `(operator, options)` give bitwise-identical output.
pub fn lanczos_ground<O: LinearOperator + ?Sized>(op: &O, opts: &LanczosOptions) -> Result<EigenResult> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidMatrix("empty operator".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidMatrix(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let cap = opts.iteration_cap(n);
    let krylov = opts.krylov_dim.clamp(2, n.max(2));
    let mut start = random_unit(n, opts.seed);
    let mut w = vec![0.0; n];
    let mut total = 0usize;
    let mut best_residual = f64::INFINITY;

    loop {
        let mut basis: Vec<Vec<f64>> = vec![start];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let j = alpha.len();
            op.apply_into(&basis[j], &mut w);
            total += 1;
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            axpy(-a, &basis[j], &mut w);
            if j > 0 {
                axpy(-beta[j - 1], &basis[j - 1], &mut w);
            }
            // two passes of classical Gram-Schmidt
            for _ in 0..2 {
                for v in &basis {
                    let p = dot(&w, v);
                    axpy(-p, v, &mut w);
                }
            }
            let b = norm(&w);
            let (_, s) = tridiag_ground(&alpha, &beta);
            let estimate = (b * s[s.len() - 1]).abs();
            let scale = alpha.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(beta.iter().fold(0.0, |acc: f64, x| acc.max(*x)));
            let breakdown = b <= 1e-13 * scale.max(1e-300) || basis.len() == n;
            if estimate < 0.1 * opts.tol || breakdown || basis.len() >= krylov || total >= cap {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }

        let (_, s) = tridiag_ground(&alpha, &beta);
        let mut x = vec![0.0; n];
        for (coef, v) in s.iter().zip(&basis) {
            axpy(*coef, v, &mut x);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        op.apply_into(&x, &mut w);
        let value = dot(&x, &w);
        axpy(-value, &x, &mut w);
        let residual = norm(&w);
        best_residual = best_residual.min(residual);

        if residual <= opts.tol {
            fix_sign(&mut x);
            return Ok(EigenResult { value, vector: Some(x), iterations: total, residual });
        }
        if total >= cap {
            return Err(Error::Convergence { iterations: total, best_residual });
        }
        start = x;
    }
}

/// Lowest eigenvalue of a dense symmetric matrix via a direct eigensolver.
pub fn dense_eigmin(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::InvalidMatrix(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 {
        return Err(Error::InvalidMatrix(format!("asymmetry {asym:e} exceeds 1e-10")));
    }
    Ok(m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
}

/// Lowest eigenvalue of a projected matrix: dense up to [`DENSE_CUTOFF`],
/// Lanczos above.
pub fn projected_ground_energy(m: &CsrMatrix, opts: &LanczosOptions) -> Result<f64> {
    if m.n() <= DENSE_CUTOFF {
        dense_eigmin(&m.to_dense())
    } else {
        Ok(lanczos_ground(m, opts)?.value)
    }
}

/// Lanczos inside one symmetry sector, with the eigenvector scattered back
/// to full-space coordinates.
pub fn sector_ground(h: &SparseHamiltonian, sector: Sector, opts: &LanczosOptions) -> Result<EigenResult> {
    let op = h.sector_operator(sector)?;
    let result = lanczos_ground(&op, opts)?;
    let mut full = vec![0.0; h.dimension() as usize];
    if let Some(v) = &result.vector {
        for (&state, &amp) in op.basis().states().iter().zip(v) {
            full[state as usize] = amp;
        }
    }
    Ok(EigenResult { vector: Some(full), ..result })
}
