use num_complex::Complex64;

use super::channels::ChannelSet;
use super::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Relay equalizer and the effective gains it produces on aligned streams.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRelay {
    /// `L × N_R`, row block `k` belongs to user `k`.
    pub a_r: CMatrix,
    /// UL effective gains, stacked over users (`L` entries).
    pub phi: Vec<Complex64>,
    /// DL effective gains, stacked over users (`L` entries).
    pub psi: Vec<Complex64>,
}

impl AlignedRelay {
    pub fn phi_matrix(&self) -> CMatrix {
        linalg::diag(&self.phi)
    }

    pub fn psi_matrix(&self) -> CMatrix {
        linalg::diag(&self.psi)
    }

    /// `Φ̃_k`: `Φ` with user `k`'s entries zeroed.
    pub fn phi_tilde(&self, config: &SystemConfig, k: usize) -> CMatrix {
        let owner = config.stream_owner();
        let d: Vec<Complex64> = self
            .phi
            .iter()
            .zip(&owner)
            .map(|(&p, &o)| if o == k { Complex64::new(0.0, 0.0) } else { p })
            .collect();
        linalg::diag(&d)
    }
}

/// All design variables of one two-way relaying link.
#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverSet {
    /// BS precoder, `N_B × L`, column block `k` serves user `k`.
    pub w_b: CMatrix,
    /// MS precoders, `N_k × L_k`.
    pub w_ms: Vec<CMatrix>,
    /// Relay transformation, `N_R × N_R`.
    pub w_r: CMatrix,
    /// BS equalizer, `L × N_B`.
    pub v_b: CMatrix,
    /// MS equalizers, `L_k × N_k`.
    pub v_ms: Vec<CMatrix>,
    /// Present when `w_r = f_r · a_r` with aligned streams.
    pub split: Option<RelaySplit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaySplit {
    pub aligned: AlignedRelay,
    /// `N_R × L`, column block `k` serves user `k`.
    pub f_r: CMatrix,
}

impl TransceiverSet {
    /// `W_B` column block of user `k`.
    pub fn w_b_block(&self, config: &SystemConfig, k: usize) -> CMatrix {
        self.w_b.columns(config.offset(k), config.l_k[k]).clone_owned()
    }

    /// `[H_R1 W_1, …, H_RK W_K]`, `N_R × L`.
    pub fn ul_effective(&self, channels: &ChannelSet) -> CMatrix {
        let cols: Vec<CMatrix> = channels.h_rk.iter().zip(&self.w_ms).map(|(h, w)| h * w).collect();
        hstack(&cols)
    }

    /// `H_RB W_B`, `N_R × L`.
    pub fn dl_effective(&self, channels: &ChannelSet) -> CMatrix {
        &channels.h_rb * &self.w_b
    }

    pub fn check(&self, config: &SystemConfig) -> Result<()> {
        let l = config.total_streams();
        let dims = |name: &str, m: &CMatrix, want: (usize, usize)| {
            if m.shape() != want {
                Err(Error::Dimension(format!(
                    "{name} is {:?}, expected {want:?}",
                    m.shape()
                )))
            } else {
                Ok(())
            }
        };
        dims("W_B", &self.w_b, (config.n_b, l))?;
        dims("W_R", &self.w_r, (config.n_r, config.n_r))?;
        dims("V_B", &self.v_b, (l, config.n_b))?;
        if self.w_ms.len() != config.num_users() || self.v_ms.len() != config.num_users() {
            return Err(Error::Dimension("per-user precoder/equalizer count".into()));
        }
        for k in 0..config.num_users() {
            dims("W_k", &self.w_ms[k], (config.n_k[k], config.l_k[k]))?;
            dims("V_k", &self.v_ms[k], (config.l_k[k], config.n_k[k]))?;
        }
        Ok(())
    }

    /// Precoder power budgets with `1e-9` relative slack.
    pub fn within_budgets(&self, config: &SystemConfig) -> bool {
        let ok = |w: &CMatrix, p: f64| w.norm_squared() <= p * (1.0 + 1e-9);
        ok(&self.w_b, config.p_b) && self.w_ms.iter().zip(&config.p_k).all(|(w, &p)| ok(w, p))
    }
}

/// Horizontal concatenation of equally tall blocks.
pub fn hstack(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.columns_mut(c, b.ncols()).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Vertical concatenation of equally wide blocks.
pub fn vstack(blocks: &[CMatrix]) -> CMatrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.rows_mut(r, b.nrows()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Largest relative residual of the alignment conditions: for every pair of
/// users, `A_R^(k) H_Rm W_m` and `A_R^(k) H_RB W_B,m` must be diagonal when
/// `m = k` and zero otherwise. Each block residual is measured against the
/// norm of the full product it belongs to.
pub fn alignment_residual(
    a_r: &CMatrix,
    w_b: &CMatrix,
    w_ms: &[CMatrix],
    channels: &ChannelSet,
    config: &SystemConfig,
) -> f64 {
    let ul = hstack(&channels.h_rk.iter().zip(w_ms).map(|(h, w)| h * w).collect::<Vec<_>>());
    let dl = &channels.h_rb * w_b;
    let owner = config.stream_owner();
    let mut worst: f64 = 0.0;
    for prod in [a_r * ul, a_r * dl] {
        let scale = prod.norm().max(f64::MIN_POSITIVE);
        let mut off = 0.0;
        for i in 0..prod.nrows() {
            for j in 0..prod.ncols() {
                if i != j || owner[i] != owner[j] {
                    off += prod[(i, j)].norm_sqr();
                }
            }
        }
        worst = worst.max(off.sqrt() / scale);
    }
    worst
}
