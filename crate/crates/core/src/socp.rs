//! Second-order cone feasibility via margin maximization.
//!
//! For cones `‖A_i x + b_i‖ ≤ c_i·x + d_i` the solver maximizes `t` subject
//! to `‖A_i x + b_i‖ ≤ c_i·x + d_i − t`. The problem is feasible iff the
//! optimal margin `t*` is nonnegative. A log-barrier path-following method
//! starts from `x = 0` with `t` low enough to be strictly inside every cone,
//! so no phase-one problem is needed.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;

/// `‖a_map·x + b_off‖ ≤ c_row·x + d_off`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub a_map: DMatrix<f64>,
    pub b_off: DVector<f64>,
    pub c_row: DVector<f64>,
    pub d_off: f64,
}

impl SocConstraint {
    /// `c·x + d − ‖A x + b‖`.
    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        self.c_row.dot(x) + self.d_off - (&self.a_map * x + &self.b_off).norm()
    }

    /// Multiplies every coefficient by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            a_map: &self.a_map * s,
            b_off: &self.b_off * s,
            c_row: &self.c_row * s,
            d_off: self.d_off * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocpProblem {
    pub n: usize,
    pub constraints: Vec<SocConstraint>,
}

impl SocpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Dimension("SOCP decision dimension must be at least 1".into()));
        }
        if self.constraints.is_empty() {
            return Err(Error::Dimension("SOCP needs at least one constraint".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.a_map.ncols() != self.n || c.c_row.len() != self.n || c.b_off.len() != c.a_map.nrows() {
                return Err(Error::Dimension(format!(
                    "cone {i}: A is {}x{}, b has {}, c has {}, n = {}",
                    c.a_map.nrows(),
                    c.a_map.ncols(),
                    c.b_off.len(),
                    c.c_row.len(),
                    self.n
                )));
            }
            let finite = c
                .a_map
                .iter()
                .chain(c.b_off.iter())
                .chain(c.c_row.iter())
                .all(|v| v.is_finite());
            if !finite || !c.d_off.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    /// Smallest slack over all cones at `x`.
    pub fn min_slack(&self, x: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.slack(x))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocpStatus {
    Feasible,
    Infeasible,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocpOutcome {
    pub status: SocpStatus,
    /// Point with every slack at least `-tol`; present only when feasible.
    pub point: Option<DVector<f64>>,
    /// Best margin found. Equals `t*` within `tol` unless the solve stopped
    /// early on a certificate.
    pub margin: f64,
    /// Newton steps taken.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    /// Budget of Newton steps over the whole barrier path.
    pub max_iter: usize,
    /// Stop as soon as an iterate reaches this margin, or as soon as the
    /// duality gap certifies that the margin is below `-tol`.
    pub early_exit_margin: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            early_exit_margin: None,
        }
    }
}

/// Maximizes the common margin `t` over all cones.
pub fn solve_margin(p: &SocpProblem, tol: f64, max_iter: usize) -> Result<SocpOutcome> {
    solve_margin_with(
        p,
        &SolverSettings {
            tol,
            max_iter,
            early_exit_margin: None,
        },
    )
}

/// Per-cone data in the lifted variable `z = (x, t)`.
struct Cone<'a> {
    c: &'a SocConstraint,
    /// `Mᵀ J M` with `J = diag(1, −I)`, `(n+1)²`.
    k: DMatrix<f64>,
}

struct Eval {
    s: f64,
    w: DVector<f64>,
    d: f64,
}

impl Cone<'_> {
    fn eval(&self, x: &DVector<f64>, t: f64) -> Option<Eval> {
        let s = self.c.c_row.dot(x) + self.c.d_off - t;
        if s <= 0.0 {
            return None;
        }
        let w = &self.c.a_map * x + &self.c.b_off;
        let wn = w.norm();
        if s <= wn {
            return None;
        }
        Some(Eval {
            s,
            d: (s - wn) * (s + wn),
            w,
        })
    }
}

fn barrier(cones: &[Cone], x: &DVector<f64>, t: f64, tau: f64) -> Option<f64> {
    let mut f = -tau * t;
    for c in cones {
        f -= c.eval(x, t)?.d.ln();
    }
    Some(f)
}

pub fn solve_margin_with(p: &SocpProblem, settings: &SolverSettings) -> Result<SocpOutcome> {
    p.validate()?;
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidConfig("SOCP tolerance must be positive".into()));
    }
    let n = p.n;
    let nz = n + 1;
    let cones: Vec<Cone> = p
        .constraints
        .iter()
        .map(|c| {
            // M = [[c, -1], [A, 0]]
            let mut head = DVector::zeros(nz);
            head.rows_mut(0, n).copy_from(&c.c_row);
            head[n] = -1.0;
            let mut k = &head * head.transpose();
            let ata = c.a_map.transpose() * &c.a_map;
            let mut block = k.view_mut((0, 0), (n, n));
            block -= ata;
            Cone { c, k }
        })
        .collect();

    let scale = p
        .constraints
        .iter()
        .map(|c| c.d_off.abs() + c.b_off.norm() + c.c_row.norm() + c.a_map.norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let t_cap = 1e12 * scale;
    let nu = 2.0 * cones.len() as f64;

    let mut x = DVector::zeros(n);
    let mut t = p
        .constraints
        .iter()
        .map(|c| c.d_off - c.b_off.norm())
        .fold(f64::INFINITY, f64::min)
        - 0.1 * scale;
    let mut tau = nu / scale;
    let mut iterations = 0;

    let feasible = |x: &DVector<f64>, t: f64, iterations: usize| SocpOutcome {
        status: SocpStatus::Feasible,
        point: Some(x.clone()),
        margin: t,
        iterations,
    };

    loop {
        // centering at the current barrier weight
        loop {
            if let Some(m) = settings.early_exit_margin {
                if t >= m {
                    return Ok(feasible(&x, t, iterations));
                }
            }
            if t > t_cap {
                return Ok(feasible(&x, t, iterations));
            }
            if iterations >= settings.max_iter {
                let status = if t >= -settings.tol {
                    SocpStatus::Feasible
                } else {
                    SocpStatus::Indeterminate
                };
                return Ok(SocpOutcome {
                    point: (status == SocpStatus::Feasible).then(|| x.clone()),
                    status,
                    margin: t,
                    iterations,
                });
            }
            iterations += 1;

            let mut grad = DVector::zeros(nz);
            grad[n] = -tau;
            let mut hess = DMatrix::zeros(nz, nz);
            for c in &cones {
                let e = c.eval(&x, t).expect("iterate left the cone interior");
                // q = Mᵀ J u = [c s − Aᵀ w; −s]
                let mut q = DVector::zeros(nz);
                let atw = c.c.a_map.transpose() * &e.w;
                q.rows_mut(0, n).copy_from(&(&c.c.c_row * e.s - atw));
                q[n] = -e.s;
                grad.axpy(-2.0 / e.d, &q, 1.0);
                hess += &c.k * (-2.0 / e.d);
                hess.ger(4.0 / (e.d * e.d), &q, &q, 1.0);
            }

            let step = newton_step(&hess, &grad);
            let Some(dz) = step else {
                break;
            };
            let f0 = barrier(&cones, &x, t, tau).expect("iterate left the cone interior");
            let decrement = -grad.dot(&dz);
            // below this the Armijo test only sees rounding in f
            if !(decrement > 0.0) || decrement / 2.0 < 1e-10 + 64.0 * f64::EPSILON * f0.abs() {
                break;
            }

            let dx = dz.rows(0, n).clone_owned();
            let dt = dz[n];
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-12 {
                let xn = &x + &dx * alpha;
                let tn = t + dt * alpha;
                if tn == t && xn == x {
                    break;
                }
                if let Some(f) = barrier(&cones, &xn, tn, tau) {
                    if f <= f0 - 0.25 * alpha * decrement {
                        x = xn;
                        t = tn;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }

        let gap = nu / tau;
        if t >= -settings.tol && (settings.early_exit_margin.is_some() || gap < settings.tol) {
            return Ok(feasible(&x, t, iterations));
        }
        if settings.early_exit_margin.is_some() && t + 1.01 * gap < -settings.tol {
            return Ok(SocpOutcome {
                status: SocpStatus::Infeasible,
                point: None,
                margin: t,
                iterations,
            });
        }
        if gap < settings.tol {
            // t* lies within [t, t + gap] and t < -tol
            let status = if t >= -settings.tol {
                SocpStatus::Feasible
            } else {
                SocpStatus::Infeasible
            };
            return Ok(SocpOutcome {
                point: (status == SocpStatus::Feasible).then(|| x.clone()),
                status,
                margin: t,
                iterations,
            });
        }
        tau *= 10.0;
    }
}

/// Solves `H dz = −g` with a growing ridge when `H` is numerically singular.
fn newton_step(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let diag_max = hess.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut h = hess.clone();
        if ridge > 0.0 {
            for i in 0..h.nrows() {
                h[(i, i)] += ridge;
            }
        }
        if let Some(ch) = Cholesky::new(h) {
            let dz = ch.solve(&(-grad));
            if dz.iter().all(|v| v.is_finite()) {
                return Some(dz);
            }
        }
        ridge = if ridge == 0.0 { 1e-14 * diag_max } else { ridge * 100.0 };
    }
    None
}

/// Real form of `‖a z + b‖ ≤ Re(c z) + d` for complex `z ∈ Cⁿ`, with decision
/// vector `x = [Re z; Im z]`. The norm side is lifted exactly; the linear
/// side keeps the real part of `c z`.
pub fn lift_complex(a_cplx: &CMatrix, b_cplx: &CMatrix, c_cplx: &CMatrix, d_real: f64) -> Result<SocConstraint> {
    let (m, n) = a_cplx.shape();
    if b_cplx.shape() != (m, 1) || c_cplx.shape() != (1, n) {
        return Err(Error::Dimension(format!(
            "lift_complex: A is {m}x{n}, b is {:?}, c is {:?}",
            b_cplx.shape(),
            c_cplx.shape()
        )));
    }
    let mut a = DMatrix::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let z = a_cplx[(i, j)];
            a[(i, j)] = z.re;
            a[(i, j + n)] = -z.im;
            a[(i + m, j)] = z.im;
            a[(i + m, j + n)] = z.re;
        }
    }
    let mut b = DVector::zeros(2 * m);
    for i in 0..m {
        b[i] = b_cplx[(i, 0)].re;
        b[i + m] = b_cplx[(i, 0)].im;
    }
    let mut c = DVector::zeros(2 * n);
    for j in 0..n {
        c[j] = c_cplx[(0, j)].re;
        c[j + n] = -c_cplx[(0, j)].im;
    }
    Ok(SocConstraint {
        a_map: a,
        b_off: b,
        c_row: c,
        d_off: d_real,
    })
}

/// `[Re z; Im z]` for a complex column.
pub fn to_real(z: &CMatrix) -> DVector<f64> {
    let n = z.nrows();
    DVector::from_fn(2 * n, |i, _| if i < n { z[(i, 0)].re } else { z[(i - n, 0)].im })
}

/// Inverse of [`to_real`].
pub fn from_real(x: &DVector<f64>) -> CMatrix {
    let n = x.len() / 2;
    CMatrix::from_fn(n, 1, |i, _| num_complex::Complex64::new(x[i], x[i + n]))
}
