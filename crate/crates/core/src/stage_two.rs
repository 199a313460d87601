//! Stage two: relay precoder `F_R` by bisection over SOCP feasibility
//! problems, MMSE equalizers, and the alternating loop between them.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};
use crate::model::{
    decomposed_with, relay_power_decomposed, AlignedRelay, ChannelSet, RelaySplit, StreamId, StreamSinrs, SystemConfig,
    TransceiverSet,
};
use crate::socp::{self, SocConstraint, SocpProblem, SocpStatus, SolverSettings};
use crate::stage_one::StageOneResult;

/// `ρ = ((G^{1/2})ᵀ ⊗ I) vec F_R` with `G = ΦΦᴴ + ΨΨᴴ + N0 A_R A_Rᴴ`; the
/// relay power constraint reads `‖ρ‖ ≤ budget`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerConeTerms {
    pub rho_map: CMatrix,
    pub budget: f64,
}

/// Tightened SINR constraint of one stream: `Re(alpha_coeff · vec F_R) ≥
/// ‖[beta_map · vec F_R; delta_const]‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrConeTerms {
    pub stream: StreamId,
    /// `1 × N_R L`.
    pub alpha_coeff: CMatrix,
    /// `L × N_R L`.
    pub beta_map: CMatrix,
    pub delta_const: f64,
}

impl SinrConeTerms {
    /// `α̃`, the real-part form used in the cone.
    pub fn alpha(&self, vec_f: &CMatrix) -> f64 {
        (&self.alpha_coeff * vec_f)[(0, 0)].re
    }

    /// `α`, the modulus form that `α̃` lower-bounds.
    pub fn alpha_modulus(&self, vec_f: &CMatrix) -> f64 {
        (&self.alpha_coeff * vec_f)[(0, 0)].norm()
    }

    /// `α̃ − ‖[β; δ]‖`.
    pub fn slack(&self, vec_f: &CMatrix) -> f64 {
        let beta = (&self.beta_map * vec_f).norm_squared();
        self.alpha(vec_f) - (beta + self.delta_const * self.delta_const).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionConfig {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub rel_tol: f64,
    pub max_halvings: usize,
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_min >= 0.0 && self.gamma_min <= self.gamma_max && self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bisection needs 0 ≤ γ_min ≤ γ_max and rel_tol > 0, got [{}, {}], {}",
                self.gamma_min, self.gamma_max, self.rel_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTwoOptions {
    /// Relative improvement below which the alternating loop stops.
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub bisection_rel_tol: f64,
    pub max_halvings: usize,
    /// Cap on `γ_max` doublings before bisection starts.
    pub max_doublings: usize,
    pub solver: SolverSettings,
}

impl Default for StageTwoOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            max_iterations: 30,
            bisection_rel_tol: 1e-3,
            max_halvings: 60,
            max_doublings: 20,
            solver: SolverSettings {
                early_exit_margin: Some(0.0),
                ..SolverSettings::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    pub f_r: CMatrix,
    /// Achieved min weighted SINR of `f_r` under the fixed equalizers.
    pub gamma0: f64,
    /// `(lo, hi)` after each feasibility test.
    pub intervals: Vec<(f64, f64)>,
    pub solves: usize,
    /// False when no target was feasible and the incumbent came back.
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTwoResult {
    pub transceivers: TransceiverSet,
    pub gamma0: f64,
    /// Min weighted SINR at initialization, then after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_aligned(aligned: &AlignedRelay, config: &SystemConfig) -> Result<()> {
    let l = config.total_streams();
    if aligned.a_r.shape() != (l, config.n_r) || aligned.phi.len() != l || aligned.psi.len() != l {
        return Err(Error::Dimension(format!(
            "A_R is {:?} with {} UL and {} DL gains, expected {}x{} and {l}",
            aligned.a_r.shape(),
            aligned.phi.len(),
            aligned.psi.len(),
            l,
            config.n_r
        )));
    }
    Ok(())
}

fn noise_gram(a_r: &CMatrix, n0: f64) -> CMatrix {
    a_r * a_r.adjoint() * c64(n0, 0.0)
}

/// `ΦΦᴴ + ΨΨᴴ + N0 A_R A_Rᴴ`.
pub fn power_gram(aligned: &AlignedRelay, n0: f64) -> CMatrix {
    let phi = aligned.phi_matrix();
    let psi = aligned.psi_matrix();
    &phi * phi.adjoint() + &psi * psi.adjoint() + noise_gram(&aligned.a_r, n0)
}

pub fn assemble_power_cone(aligned: &AlignedRelay, n0: f64, p_r: f64) -> Result<PowerConeTerms> {
    let n_r = aligned.a_r.ncols();
    let root = linalg::hermitian_sqrt(&power_gram(aligned, n0))?;
    Ok(PowerConeTerms {
        rho_map: linalg::kron(&root.transpose(), &CMatrix::identity(n_r, n_r)),
        budget: p_r.sqrt(),
    })
}

/// Row `r = v Hᵀ` placed in block `j` of a `1 × N_R L` functional.
fn block_row(r: &CMatrix, j: usize, l: usize) -> CMatrix {
    let n_r = r.ncols();
    let mut out = CMatrix::zeros(1, n_r * l);
    out.columns_mut(j * n_r, n_r).copy_from(r);
    out
}

/// One tightened SINR cone per stream and direction, UL streams first.
pub fn assemble_sinr_cones(
    gamma0: f64,
    v_b: &CMatrix,
    v_ms: &[CMatrix],
    channels: &ChannelSet,
    aligned: &AlignedRelay,
    config: &SystemConfig,
) -> Result<Vec<SinrConeTerms>> {
    if !(gamma0 > 0.0) || !gamma0.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "target SINR must be positive, got {gamma0}"
        )));
    }
    check_aligned(aligned, config)?;
    let l = config.total_streams();
    let n0 = config.n0;
    let noise = noise_gram(&aligned.a_r, n0);
    let phi = aligned.phi_matrix();
    let psi = aligned.psi_matrix();
    let mut cones = Vec::with_capacity(2 * l);

    let ul_root = linalg::hermitian_sqrt(&(&phi * phi.adjoint() + &noise))?.transpose();
    let h_rb_t = channels.h_rb.transpose();
    for (j, &(k, s)) in config.stream_pairs().iter().enumerate() {
        let v = v_b.rows(j, 1).clone_owned();
        let r = &v * &h_rb_t;
        let id = StreamId::ul(k, s);
        let scale = (1.0 + 1.0 / (config.weight(id) * gamma0)).sqrt();
        cones.push(SinrConeTerms {
            stream: id,
            alpha_coeff: block_row(&r, j, l) * (aligned.phi[j] * scale),
            beta_map: linalg::kron(&ul_root, &r),
            delta_const: (n0 * v.norm_squared()).sqrt(),
        });
    }

    for (k, h) in channels.h_rk.iter().enumerate() {
        let tilde = aligned.phi_tilde(config, k);
        let root = linalg::hermitian_sqrt(&(&psi * psi.adjoint() + &tilde * tilde.adjoint() + &noise))?.transpose();
        let h_t = h.transpose();
        for s in 0..config.l_k[k] {
            let j = config.global_index(k, s);
            let v = v_ms[k].rows(s, 1).clone_owned();
            let r = &v * &h_t;
            let id = StreamId::dl(k, s);
            let scale = (1.0 + 1.0 / (config.weight(id) * gamma0)).sqrt();
            cones.push(SinrConeTerms {
                stream: id,
                alpha_coeff: block_row(&r, j, l) * (aligned.psi[j] * scale),
                beta_map: linalg::kron(&root, &r),
                delta_const: (n0 * v.norm_squared()).sqrt(),
            });
        }
    }
    Ok(cones)
}

/// Real cone `‖A z + b‖ ≤ Re(c z) + d` in `z`, divided by its coefficient scale.
fn normalized(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: f64) -> Result<SocConstraint> {
    let cone = socp::lift_complex(a, b, c, d)?;
    let s = [cone.a_map.norm(), cone.b_off.norm(), cone.c_row.norm(), d.abs()]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(if s > 0.0 { cone.scaled(1.0 / s) } else { cone })
}

/// Problem B̃_R at target `gamma0`: returns a relay precoder meeting every
/// tightened cone and the power budget, or `None`.
///
/// The decision is whitened, `vec F_R = √P_R ((G^{-1/2})ᵀ ⊗ I) y`, which turns
/// the power cone into `‖y‖ ≤ 1`. Only strictly nonnegative margins are
/// accepted; an indeterminate solve counts as infeasible.
pub fn solve_relay_precoder_feasibility(
    gamma0: f64,
    v_b: &CMatrix,
    v_ms: &[CMatrix],
    channels: &ChannelSet,
    aligned: &AlignedRelay,
    config: &SystemConfig,
    settings: &SolverSettings,
) -> Result<Option<CMatrix>> {
    let cones = assemble_sinr_cones(gamma0, v_b, v_ms, channels, aligned, config)?;
    let l = config.total_streams();
    let n_r = config.n_r;
    let dim = n_r * l;
    let inv_root = linalg::hermitian_inv_sqrt(&power_gram(aligned, config.n0))?;
    let t = linalg::kron(&inv_root.transpose(), &CMatrix::identity(n_r, n_r)) * c64(config.p_r.sqrt(), 0.0);

    let mut constraints = Vec::with_capacity(cones.len() + 1);
    constraints.push(socp::lift_complex(
        &CMatrix::identity(dim, dim),
        &CMatrix::zeros(dim, 1),
        &CMatrix::zeros(1, dim),
        1.0,
    )?);
    for cone in &cones {
        let mut a = CMatrix::zeros(l + 1, dim);
        a.rows_mut(0, l).copy_from(&(&cone.beta_map * &t));
        let mut b = CMatrix::zeros(l + 1, 1);
        b[(l, 0)] = c64(cone.delta_const, 0.0);
        constraints.push(normalized(&a, &b, &(&cone.alpha_coeff * &t), 0.0)?);
    }
    let problem = SocpProblem {
        n: 2 * dim,
        constraints,
    };
    let outcome = socp::solve_margin_with(&problem, settings)?;
    match outcome.status {
        SocpStatus::Feasible if outcome.margin >= 0.0 => {}
        SocpStatus::Indeterminate => {
            log::warn!("relay precoder SOCP indeterminate at target {gamma0}; treated as infeasible");
            return Ok(None);
        }
        _ => return Ok(None),
    }
    let y = socp::from_real(outcome.point.as_ref().expect("feasible outcome carries a point"));
    let mut f = linalg::unvec(&(&t * y), n_r, l)?;
    // guard against round-off above the budget
    let power = relay_power_decomposed(&f, aligned, config.n0);
    if power > config.p_r {
        f *= c64((config.p_r / power).sqrt(), 0.0);
    }
    Ok(Some(f))
}

/// Weighted SINRs of the aligned design `(f_r, aligned, v_b, v_ms)`.
pub fn aligned_sinrs(
    f_r: &CMatrix,
    aligned: &AlignedRelay,
    v_b: &CMatrix,
    v_ms: &[CMatrix],
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<StreamSinrs> {
    decomposed_with(f_r, aligned, v_b, v_ms, channels, config)
}

/// Bisection over the target `γ₀` with the equalizers held fixed.
///
/// `γ_max` is doubled while the problem stays feasible there, then the
/// interval is halved until `hi − lo ≤ rel_tol · hi`. The best precoder found
/// is returned with its achieved min weighted SINR; when no target is
/// feasible the incumbent comes back unchanged.
#[allow(clippy::too_many_arguments)]
pub fn bisect_relay_precoder(
    incumbent: &CMatrix,
    aligned: &AlignedRelay,
    v_b: &CMatrix,
    v_ms: &[CMatrix],
    channels: &ChannelSet,
    config: &SystemConfig,
    bcfg: &BisectionConfig,
    opts: &StageTwoOptions,
) -> Result<BisectionOutcome> {
    bcfg.validate()?;
    let incumbent_gamma = aligned_sinrs(incumbent, aligned, v_b, v_ms, channels, config)?.min_weighted(config);
    let mut best = (incumbent.clone(), incumbent_gamma);
    let mut improved = false;
    let mut solves = 0;
    let mut intervals = Vec::new();

    let mut test = |target: f64, best: &mut (CMatrix, f64), improved: &mut bool| -> Result<bool> {
        if !(target > 0.0) {
            return Ok(true);
        }
        solves += 1;
        let Some(f) = solve_relay_precoder_feasibility(target, v_b, v_ms, channels, aligned, config, &opts.solver)?
        else {
            return Ok(false);
        };
        let achieved = aligned_sinrs(&f, aligned, v_b, v_ms, channels, config)?.min_weighted(config);
        if achieved < target * (1.0 - 1e-6) {
            log::warn!("SOCP point reaches {achieved} below target {target}; treated as infeasible");
            return Ok(false);
        }
        if achieved > best.1 {
            *best = (f, achieved);
            *improved = true;
        }
        Ok(true)
    };

    let mut lo = bcfg.gamma_min;
    let mut hi = bcfg.gamma_max.max(bcfg.gamma_min);
    if hi <= 0.0 {
        hi = 1.0;
    }
    let mut doublings = 0;
    while test(hi, &mut best, &mut improved)? {
        lo = hi;
        intervals.push((lo, hi));
        if doublings == opts.max_doublings {
            break;
        }
        hi *= 2.0;
        doublings += 1;
    }
    let mut halvings = 0;
    while hi - lo > bcfg.rel_tol * hi && halvings < bcfg.max_halvings {
        let mid = 0.5 * (lo + hi);
        if test(mid, &mut best, &mut improved)? {
            lo = mid;
        } else {
            hi = mid;
        }
        intervals.push((lo, hi));
        halvings += 1;
    }
    Ok(BisectionOutcome {
        f_r: best.0,
        gamma0: best.1,
        intervals,
        solves,
        improved,
    })
}

/// `V_B = Gᴴ (G Gᴴ + Ω_B)⁻¹` with `G = H_RBᵀ F_R Φ` and
/// `Ω_B = N0 (H_RBᵀ F_R A_R)(·)ᴴ + N0 I`.
pub fn mmse_bs_equalizer(f_r: &CMatrix, aligned: &AlignedRelay, h_rb: &CMatrix, n0: f64) -> Result<CMatrix> {
    let h_t = h_rb.transpose();
    let hf = &h_t * f_r;
    let g = &hf * aligned.phi_matrix();
    let na = &hf * &aligned.a_r;
    let n_b = h_rb.ncols();
    let cov = &g * g.adjoint() + (&na * na.adjoint() + CMatrix::identity(n_b, n_b)) * c64(n0, 0.0);
    Ok(linalg::solve_hpd(&cov, &g)?.adjoint())
}

/// `V_k = G_kᴴ (H_kᵀ F_R [Ψ, Φ̃_k](·)ᴴ + Ω_k)⁻¹` with
/// `G_k = H_kᵀ F_R^(k) diag(ψ_k)` and `Ω_k = N0 (H_kᵀ F_R A_R)(·)ᴴ + N0 I`.
pub fn mmse_ms_equalizer(
    f_r: &CMatrix,
    aligned: &AlignedRelay,
    h_rk: &CMatrix,
    k: usize,
    config: &SystemConfig,
) -> Result<CMatrix> {
    let n0 = config.n0;
    let hf = h_rk.transpose() * f_r;
    let off = config.offset(k);
    let lk = config.l_k[k];
    let psi_k: Vec<Complex64> = aligned.psi[off..off + lk].to_vec();
    let g = hf.columns(off, lk) * linalg::diag(&psi_k);
    let desired_dl = &hf * aligned.psi_matrix();
    let other_ul = &hf * aligned.phi_tilde(config, k);
    let na = &hf * &aligned.a_r;
    let n_k = h_rk.ncols();
    let cov = &desired_dl * desired_dl.adjoint()
        + &other_ul * other_ul.adjoint()
        + (&na * na.adjoint() + CMatrix::identity(n_k, n_k)) * c64(n0, 0.0);
    Ok(linalg::solve_hpd(&cov, &g)?.adjoint())
}

/// `c · pinv(A_R)` scaled so the relay power budget holds with equality.
pub fn initial_relay_precoder(aligned: &AlignedRelay, config: &SystemConfig) -> Result<CMatrix> {
    let f = linalg::pinv(&aligned.a_r, linalg::DEFAULT_RTOL)?;
    let p = relay_power_decomposed(&f, aligned, config.n0);
    if !(p > 0.0) {
        return Err(Error::ZeroGain("initial relay precoder has zero power".into()));
    }
    Ok(f * c64((config.p_r / p).sqrt(), 0.0))
}

fn mmse_all(
    f_r: &CMatrix,
    aligned: &AlignedRelay,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<(CMatrix, Vec<CMatrix>)> {
    let v_b = mmse_bs_equalizer(f_r, aligned, &channels.h_rb, config.n0)?;
    let v_ms = channels
        .h_rk
        .iter()
        .enumerate()
        .map(|(k, h)| mmse_ms_equalizer(f_r, aligned, h, k, config))
        .collect::<Result<Vec<_>>>()?;
    Ok((v_b, v_ms))
}

/// Alternates between the relay precoder bisection and the MMSE equalizers,
/// starting from `V_B = W_Bᵀ`, `V_k = W_kᵀ` and the scaled pseudo-inverse
/// precoder, until the min weighted SINR gains less than `rel_tol`.
pub fn alternating_optimization(
    stage1: &StageOneResult,
    config: &SystemConfig,
    channels: &ChannelSet,
    opts: &StageTwoOptions,
) -> Result<StageTwoResult> {
    config.validate()?;
    channels.check(config)?;
    let aligned = &stage1.aligned;
    check_aligned(aligned, config)?;

    let mut f_r = initial_relay_precoder(aligned, config)?;
    let mut v_b = stage1.w_b.transpose();
    let mut v_ms: Vec<CMatrix> = stage1.w_ms.iter().map(|w| w.transpose()).collect();
    let mut sinrs = aligned_sinrs(&f_r, aligned, &v_b, &v_ms, channels, config)?;
    let mut gamma = sinrs.min_weighted(config);
    let mut trace = vec![gamma];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let bcfg = BisectionConfig {
            gamma_min: gamma.max(0.0),
            gamma_max: sinrs.max_weighted(config).max(gamma),
            rel_tol: opts.bisection_rel_tol,
            max_halvings: opts.max_halvings,
        };
        let out = bisect_relay_precoder(&f_r, aligned, &v_b, &v_ms, channels, config, &bcfg, opts)?;
        f_r = out.f_r;
        (v_b, v_ms) = mmse_all(&f_r, aligned, channels, config)?;
        sinrs = aligned_sinrs(&f_r, aligned, &v_b, &v_ms, channels, config)?;
        let next = sinrs.min_weighted(config);
        trace.push(next);
        let gain = next - gamma;
        gamma = next;
        if gain < opts.rel_tol * gamma.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let w_r = &f_r * &aligned.a_r;
    Ok(StageTwoResult {
        transceivers: TransceiverSet {
            w_b: stage1.w_b.clone(),
            w_ms: stage1.w_ms.clone(),
            w_r,
            v_b,
            v_ms,
            split: Some(RelaySplit {
                aligned: aligned.clone(),
                f_r,
            }),
        },
        gamma0: gamma,
        trace,
        iterations,
        converged,
    })
}

/// Real vector of a complex `vec F`, used by tests and diagnostics.
pub fn vec_real(f: &CMatrix) -> DVector<f64> {
    socp::to_real(&linalg::vec(f))
}
