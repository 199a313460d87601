//! Reference schemes: bidirectional channel inversion and SDMA-only relaying.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, DEFAULT_RTOL};
use crate::model::{check_sdma_feasibility, hstack, relay_tx_power, vstack, ChannelSet, SystemConfig, TransceiverSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    ChannelInversionNaive,
    SdmaZf,
}

/// Top-`count` right singular vectors of `h`, scaled to `√(power/count)` each.
fn principal_beams(h: &CMatrix, count: usize, power: f64) -> Result<CMatrix> {
    let d = linalg::svd(h)?;
    if d.right_vectors.ncols() < count {
        return Err(Error::Infeasible(format!(
            "channel with {} right singular vectors cannot carry {count} streams",
            d.right_vectors.ncols()
        )));
    }
    Ok(d.right_vectors.columns(0, count) * c64((power / count as f64).sqrt(), 0.0))
}

/// Equal-power principal-mode precoders `W_k` and `V_k = W_kᵀ`.
pub fn ms_default_transceivers(channels: &ChannelSet, config: &SystemConfig) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    channels.check(config)?;
    let w = channels
        .h_rk
        .iter()
        .enumerate()
        .map(|(k, h)| principal_beams(h, config.l_k[k], config.p_k[k]))
        .collect::<Result<Vec<_>>>()?;
    let v = w.iter().map(|w| w.transpose()).collect();
    Ok((w, v))
}

fn full_column_rank(m: &CMatrix, what: &str) -> Result<()> {
    let r = linalg::rank(m, DEFAULT_RTOL)?;
    if r < m.ncols() {
        return Err(Error::RankDeficient(format!("{what} has rank {r} < {}", m.ncols())));
    }
    Ok(())
}

/// Scales `w_r` so the relay power budget holds with equality.
fn scale_relay(mut t: TransceiverSet, channels: &ChannelSet, config: &SystemConfig) -> Result<TransceiverSet> {
    let p = relay_tx_power(&t, channels, config);
    if !(p > 0.0) {
        return Err(Error::ZeroGain("relay transformation forwards no power".into()));
    }
    t.w_r *= c64((config.p_r / p).sqrt(), 0.0);
    Ok(t)
}

fn scale_to(m: CMatrix, power: f64) -> Result<CMatrix> {
    let p = m.norm_squared();
    if !(p > 0.0) {
        return Err(Error::ZeroGain("precoder is zero".into()));
    }
    Ok(m * c64((power / p).sqrt(), 0.0))
}

/// Naive bidirectional channel inversion (reconstruction).
///
/// With `H_U = [H_R1 W_1, …, H_RK W_K]`:
/// `W_R ∝ pinv(H_Uᵀ) pinv(H_U)`, so every MS sees only its own UL streams
/// (cancelled) plus its DL streams; `W_B ∝ pinv(H_RB) H_U`, so the DL
/// arrives at the relay along `H_U`; `V_B = pinv(H_RBᵀ pinv(H_Uᵀ))` inverts
/// the UL cascade at the BS. Needs `N_B ≥ N_R` for the BS to reproduce any
/// relay-side direction.
pub fn baseline_channel_inversion(config: &SystemConfig, channels: &ChannelSet) -> Result<TransceiverSet> {
    config.validate_basic()?;
    if config.n_b < config.n_r {
        return Err(Error::Infeasible(format!(
            "channel inversion requires N_B ≥ N_R, got N_B = {} and N_R = {}",
            config.n_b, config.n_r
        )));
    }
    let (w_ms, v_ms) = ms_default_transceivers(channels, config)?;
    let h_u = hstack(&channels.h_rk.iter().zip(&w_ms).map(|(h, w)| h * w).collect::<Vec<_>>());
    full_column_rank(&h_u, "UL effective channel")?;
    full_column_rank(&channels.h_rb.transpose(), "BS channel transpose")?;

    let h_u_t_pinv = linalg::pinv(&h_u.transpose(), DEFAULT_RTOL)?;
    let w_r = &h_u_t_pinv * linalg::pinv(&h_u, DEFAULT_RTOL)?;
    let w_b = scale_to(linalg::pinv(&channels.h_rb, DEFAULT_RTOL)? * &h_u, config.p_b)?;
    let v_b = linalg::pinv(&(channels.h_rb.transpose() * &h_u_t_pinv), DEFAULT_RTOL)?;
    let t = TransceiverSet {
        w_b,
        w_ms,
        w_r,
        v_b,
        v_ms,
        split: None,
    };
    scale_relay(t, channels, config)
}

/// SDMA relaying without alignment: the relay zero-forces all `2L` streams
/// with `pinv([H_U, H_RB W_B])` on receive and re-beamforms them with
/// `pinv([(H_RB W_B)ᵀ; H_Uᵀ])` on transmit, UL streams toward the BS and DL
/// streams toward their MSs. BS and MS sides use principal modes with
/// `V = Wᵀ`.
pub fn baseline_sdma(config: &SystemConfig, channels: &ChannelSet) -> Result<TransceiverSet> {
    config.validate_basic()?;
    let l = config.total_streams();
    if !check_sdma_feasibility(config, channels) {
        return Err(Error::Infeasible(format!(
            "SDMA relaying needs N_R ≥ 2L = {} with full-rank channels, got N_R = {}",
            2 * l,
            config.n_r
        )));
    }
    let (w_ms, v_ms) = ms_default_transceivers(channels, config)?;
    let w_b = principal_beams(&channels.h_rb, l, config.p_b)?;
    let v_b = w_b.transpose();
    let h_u = hstack(&channels.h_rk.iter().zip(&w_ms).map(|(h, w)| h * w).collect::<Vec<_>>());
    let h_d = &channels.h_rb * &w_b;

    let receive = hstack(&[h_u.clone(), h_d.clone()]);
    full_column_rank(&receive, "stacked relay receive directions")?;
    let transmit = vstack(&[h_d.transpose(), h_u.transpose()]);
    full_column_rank(&transmit.transpose(), "stacked relay transmit directions")?;
    let w_r = linalg::pinv(&transmit, DEFAULT_RTOL)? * linalg::pinv(&receive, DEFAULT_RTOL)?;
    let t = TransceiverSet {
        w_b,
        w_ms,
        w_r,
        v_b,
        v_ms,
        split: None,
    };
    scale_relay(t, channels, config)
}

pub fn baseline(kind: BaselineKind, config: &SystemConfig, channels: &ChannelSet) -> Result<TransceiverSet> {
    match kind {
        BaselineKind::ChannelInversionNaive => baseline_channel_inversion(config, channels),
        BaselineKind::SdmaZf => baseline_sdma(config, channels),
    }
}
