//! Dense complex linear algebra used by the transceiver designs.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`, stored column-major. `vec`
//! stacks columns top to bottom, so `vec(X·Y·Z) = (Zᵀ ⊗ X)·vec(Y)`.
//!
//! Numerical rank uses the cutoff `rtol · σ_max · max(rows, cols)`; singular
//! values at or below the cutoff count as zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default relative rank tolerance (machine epsilon).
pub const DEFAULT_RTOL: f64 = f64::EPSILON;

const SVD_MAX_ITER: usize = 10_000;
// the backend's own default; a bare machine epsilon can stall on exactly
// rank-deficient input and return a wrong factorization
const SVD_EPS: f64 = 5.0 * f64::EPSILON;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Thin SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × p` with orthonormal columns, `p = min(rows, cols)`.
    pub left_vectors: CMatrix,
    pub singular_values: Vec<f64>,
    /// `cols × p` with orthonormal columns.
    pub right_vectors: CMatrix,
}

impl SvdResult {
    pub fn cutoff(&self, rows: usize, cols: usize, rtol: f64) -> f64 {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        rtol * smax * rows.max(cols) as f64
    }

    pub fn rank(&self, rows: usize, cols: usize, rtol: f64) -> usize {
        let cut = self.cutoff(rows, cols, rtol);
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let p = self.singular_values.len();
        let mut us = self.left_vectors.clone();
        for j in 0..p {
            let s = self.singular_values[j];
            us.column_mut(j).scale_mut(s);
        }
        us * self.right_vectors.adjoint()
    }
}

pub fn ensure_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn svd(a: &CMatrix) -> Result<SvdResult> {
    ensure_finite(a)?;
    let (m, n) = a.shape();
    let p = m.min(n);
    if p == 0 {
        return Ok(SvdResult {
            left_vectors: CMatrix::zeros(m, 0),
            singular_values: Vec::new(),
            right_vectors: CMatrix::zeros(n, 0),
        });
    }
    if let Some(out) = backend_svd(a) {
        if factorization_holds(a, &out) {
            return Ok(out);
        }
    }
    log::debug!("backend SVD of a {m}×{n} matrix failed its check; using Jacobi");
    let out = jacobi_svd(a)?;
    if !factorization_holds(a, &out) {
        return Err(Error::SvdNoConvergence);
    }
    Ok(out)
}

fn backend_svd(a: &CMatrix) -> Option<SvdResult> {
    let p = a.nrows().min(a.ncols());
    let raw = nalgebra::SVD::try_new_unordered(a.clone(), true, true, SVD_EPS, SVD_MAX_ITER)?;
    let (u, v_t) = (raw.u?, raw.v_t?);
    let cols: Vec<(f64, CVector, CVector)> = (0..p)
        .map(|k| (raw.singular_values[k], u.column(k).into_owned(), v_t.row(k).adjoint()))
        .collect();
    Some(sorted(a.nrows(), a.ncols(), cols))
}

/// Sorts triplets by descending singular value; the sort is stable, so ties
/// keep their input order.
fn sorted(m: usize, n: usize, mut cols: Vec<(f64, CVector, CVector)>) -> SvdResult {
    cols.sort_by(|x, y| y.0.total_cmp(&x.0));
    let p = cols.len();
    let mut left = CMatrix::zeros(m, p);
    let mut right = CMatrix::zeros(n, p);
    let mut values = Vec::with_capacity(p);
    for (k, (s, u, v)) in cols.into_iter().enumerate() {
        values.push(s);
        left.set_column(k, &u);
        right.set_column(k, &v);
    }
    SvdResult {
        left_vectors: left,
        singular_values: values,
        right_vectors: right,
    }
}

/// The backend occasionally returns a wrong factorization for exactly
/// rank-deficient complex input, so every result is checked.
fn factorization_holds(a: &CMatrix, d: &SvdResult) -> bool {
    let (m, n) = a.shape();
    let p = d.singular_values.len();
    let tol = 1e3 * f64::EPSILON * (m.max(n) as f64);
    let eye = CMatrix::identity(p, p);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    d.singular_values.iter().all(|s| s.is_finite() && *s >= 0.0)
        && (d.reconstruct() - a).norm() <= tol * scale
        && (d.left_vectors.adjoint() * &d.left_vectors - &eye).norm() <= tol
        && (d.right_vectors.adjoint() * &d.right_vectors - &eye).norm() <= tol
}

/// One-sided (Hestenes) Jacobi SVD for `m ≥ n`; wide input goes through `Aᴴ`.
fn jacobi_svd(a: &CMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    if m < n {
        let t = jacobi_svd(&a.adjoint())?;
        return Ok(SvdResult {
            left_vectors: t.right_vectors,
            singular_values: t.singular_values,
            right_vectors: t.left_vectors,
        });
    }
    let mut g = a.clone();
    let mut v = CMatrix::identity(n, n);
    let mut rotated = true;
    let mut sweeps = 0;
    while rotated {
        if sweeps == 100 {
            return Err(Error::SvdNoConvergence);
        }
        sweeps += 1;
        rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = g.column(i).norm_squared();
                let beta = g.column(j).norm_squared();
                let gamma = g.column(i).dotc(&g.column(j));
                let mag = gamma.norm();
                if mag <= f64::EPSILON * (alpha * beta).sqrt() || mag == 0.0 {
                    continue;
                }
                rotated = true;
                // rotate column j's phase so the coupling is real, then apply
                // the real Jacobi rotation that zeroes it
                let phase = gamma / mag;
                let zeta = (beta - alpha) / (2.0 * mag);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut g, &mut v] {
                    for r in 0..mat.nrows() {
                        let x = mat[(r, i)];
                        let y = mat[(r, j)] * phase.conj();
                        mat[(r, i)] = x * c - y * s;
                        mat[(r, j)] = x * s + y * c;
                    }
                }
            }
        }
    }

    let smax = (0..n).map(|k| g.column(k).norm()).fold(0.0, f64::max);
    let mut cols = Vec::with_capacity(n);
    let mut basis: Vec<CVector> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for k in 0..n {
        let s = g.column(k).norm();
        if s > f64::EPSILON * smax * m as f64 && s > 0.0 {
            let u = g.column(k) / c64(s, 0.0);
            basis.push(u.clone());
            cols.push((s, u, v.column(k).into_owned()));
        } else {
            pending.push((s, k));
        }
    }
    // left vectors of (numerically) zero singular values: complete the basis
    let mut e = 0;
    for (s, k) in pending {
        let u = loop {
            if e == m {
                return Err(Error::SvdNoConvergence);
            }
            let mut w = CVector::zeros(m);
            w[e] = c64(1.0, 0.0);
            e += 1;
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dotc(&w);
                    w -= b * proj;
                }
            }
            let nw = w.norm();
            if nw > 0.5 {
                break w / c64(nw, 0.0);
            }
        };
        basis.push(u.clone());
        cols.push((s, u, v.column(k).into_owned()));
    }
    Ok(sorted(m, n, cols))
}

pub fn rank(a: &CMatrix, rtol: f64) -> Result<usize> {
    let (m, n) = a.shape();
    Ok(svd(a)?.rank(m, n, rtol))
}

/// Moore–Penrose pseudo-inverse; singular values at or below the relative
/// cutoff are treated as zero.
pub fn pinv(a: &CMatrix, rtol: f64) -> Result<CMatrix> {
    let (m, n) = a.shape();
    let d = svd(a)?;
    let cut = d.cutoff(m, n, rtol);
    let mut v = d.right_vectors.clone();
    for (j, &s) in d.singular_values.iter().enumerate() {
        let inv = if s > cut { 1.0 / s } else { 0.0 };
        v.column_mut(j).scale_mut(inv);
    }
    Ok(v * d.left_vectors.adjoint())
}

/// Orthonormal basis (as columns) for the null space of `a`. Returns a
/// `cols × 0` matrix when `a` has full column rank.
pub fn null_space(a: &CMatrix, rtol: f64) -> Result<CMatrix> {
    let (m, n) = a.shape();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    // Wide matrices are padded with zero rows so the SVD returns a full
    // right basis.
    let padded;
    let work = if m < n {
        padded = {
            let mut p = CMatrix::zeros(n, n);
            p.view_mut((0, 0), (m, n)).copy_from(a);
            p
        };
        &padded
    } else {
        a
    };
    let d = svd(work)?;
    let cut = d.cutoff(m, n, rtol);
    let cols: Vec<usize> = d
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(j, _)| j)
        .collect();
    let mut out = CMatrix::zeros(n, cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        out.set_column(dst, &d.right_vectors.column(src));
    }
    Ok(out)
}

fn hermitian_part_checked(p: &CMatrix) -> Result<CMatrix> {
    let (m, n) = p.shape();
    if m != n {
        return Err(Error::Dimension(format!("expected square matrix, got {m}x{n}")));
    }
    ensure_finite(p)?;
    let scale = p.norm().max(1.0);
    let skew = (p - p.adjoint()).norm();
    if skew > 1e-9 * scale {
        return Err(Error::NotHermitian(skew));
    }
    Ok((p + p.adjoint()).scale(0.5))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Slightly negative eigenvalues (above `-1e-9·max(1, ‖p‖)`) are clamped, and
/// eigenvalues at or below `ε·n·λ_max` count as zero.
pub fn hermitian_sqrt(p: &CMatrix) -> Result<CMatrix> {
    hermitian_map(p, f64::sqrt)
}

/// Inverse principal square root of a Hermitian positive definite matrix.
pub fn hermitian_inv_sqrt(p: &CMatrix) -> Result<CMatrix> {
    let h = hermitian_part_checked(p)?;
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if eig.eigenvalues.iter().any(|&l| l <= lmax * 1e-14) {
        return Err(Error::Singular("hermitian_inv_sqrt of a singular matrix".into()));
    }
    let mut qs = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        qs.column_mut(j).scale_mut(1.0 / lam.sqrt());
    }
    Ok(qs * eig.eigenvectors.adjoint())
}

/// `Q·diag(f(λ))·Qᴴ` for a Hermitian PSD matrix `p = Q·diag(λ)·Qᴴ`.
pub fn hermitian_map(p: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let h = hermitian_part_checked(p)?;
    if h.nrows() == 0 {
        return Ok(h);
    }
    let scale = h.norm().max(1.0);
    let n = h.nrows() as f64;
    let eig = nalgebra::SymmetricEigen::new(h);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    // eigenvalues at rounding level are zero, as in the rank cutoff
    let floor = DEFAULT_RTOL * n * lmax;
    let mut q = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-9 * scale {
            return Err(Error::NotPsd(lam));
        }
        q.column_mut(j).scale_mut(f(if lam > floor { lam } else { 0.0 }));
    }
    Ok(q * eig.eigenvectors.adjoint())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (am, an) = a.shape();
    let (bm, bn) = b.shape();
    let mut out = CMatrix::zeros(am * bm, an * bn);
    for j in 0..an {
        for i in 0..am {
            let s = a[(i, j)];
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            out.view_mut((i * bm, j * bn), (bm, bn)).copy_from(&b.scale_complex(s));
        }
    }
    out
}

trait ScaleComplex {
    fn scale_complex(&self, s: Complex64) -> CMatrix;
}

impl ScaleComplex for CMatrix {
    fn scale_complex(&self, s: Complex64) -> CMatrix {
        self.map(|z| z * s)
    }
}

/// Column-by-column vectorization, returned as an `(rows·cols) × 1` matrix.
pub fn vec(a: &CMatrix) -> CMatrix {
    CMatrix::from_column_slice(a.len(), 1, a.as_slice())
}

pub fn unvec(v: &CMatrix, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.ncols() != 1 || v.nrows() != rows * cols {
        return Err(Error::Dimension(format!(
            "cannot unvec {}x{} into {rows}x{cols}",
            v.nrows(),
            v.ncols()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Plain transpose (no conjugation), as used for reciprocal channels.
#[inline]
pub fn transpose(a: &CMatrix) -> CMatrix {
    a.transpose()
}

/// Squared Euclidean norm of a complex slice.
#[inline]
pub fn norm_sqr(v: impl IntoIterator<Item = Complex64>) -> f64 {
    v.into_iter().map(|z| z.norm_sqr()).sum()
}

/// `diag(d)` as a square complex matrix.
pub fn diag(d: &[Complex64]) -> CMatrix {
    let n = d.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, &z) in d.iter().enumerate() {
        m[(i, i)] = z;
    }
    m
}

/// Relative Frobenius distance `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Solves `c · x = rhs` for Hermitian positive definite `c`.
pub fn solve_hpd(c: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    let chol = nalgebra::Cholesky::new(c.clone())
        .ok_or_else(|| Error::Singular("covariance is not positive definite".into()))?;
    Ok(chol.solve(rhs))
}
