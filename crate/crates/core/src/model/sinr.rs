//! End-to-end SINR, rate and power evaluators.

use super::channels::ChannelSet;
use super::config::{Direction, StreamId, SystemConfig};
use super::transceiver::{AlignedRelay, TransceiverSet};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Per-stream SINRs (linear) in stacking order.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSinrs {
    pub ul: Vec<f64>,
    pub dl: Vec<f64>,
}

impl StreamSinrs {
    pub fn get(&self, config: &SystemConfig, s: StreamId) -> f64 {
        let j = config.global_index(s.user, s.stream);
        match s.direction {
            Direction::Uplink => self.ul[j],
            Direction::Downlink => self.dl[j],
        }
    }

    /// Smallest `γ/ω` over all streams in both directions.
    pub fn min_weighted(&self, config: &SystemConfig) -> f64 {
        self.weighted(config).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_weighted(&self, config: &SystemConfig) -> f64 {
        self.weighted(config).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `γ/ω` for every stream, UL first then DL.
    pub fn weighted(&self, config: &SystemConfig) -> Vec<f64> {
        let pairs = config.stream_pairs();
        let ul = pairs
            .iter()
            .zip(&self.ul)
            .map(|(&(k, l), &g)| g / config.omega_ul[k][l]);
        let dl = pairs
            .iter()
            .zip(&self.dl)
            .map(|(&(k, l), &g)| g / config.omega_dl[k][l]);
        ul.chain(dl).collect()
    }

    pub fn sum_rate(&self) -> f64 {
        self.ul.iter().chain(&self.dl).map(|&g| 0.5 * (1.0 + g).log2()).sum()
    }
}

fn row_norm_sqr(m: &CMatrix, i: usize) -> f64 {
    m.row(i).iter().map(|z| z.norm_sqr()).sum()
}

/// All end-to-end SINRs from the full signal model (uses `W_R` directly).
pub fn all_sinrs(t: &TransceiverSet, channels: &ChannelSet, config: &SystemConfig) -> Result<StreamSinrs> {
    t.check(config)?;
    let u = t.ul_effective(channels);
    let d = t.dl_effective(channels);
    let owner = config.stream_owner();
    let l = config.total_streams();
    let n0 = config.n0;

    // BS: q = V_B H_RBᵀ W_R, one row per UL stream
    let q_b = &t.v_b * channels.h_rb.transpose() * &t.w_r;
    let g_b = &q_b * &u;
    let mut ul = Vec::with_capacity(l);
    for j in 0..l {
        let v2 = row_norm_sqr(&t.v_b, j);
        if v2 == 0.0 {
            let (k, s) = config.stream_pairs()[j];
            return Err(Error::DegenerateEqualizer(StreamId::ul(k, s).to_string()));
        }
        let total = row_norm_sqr(&g_b, j);
        let desired = g_b[(j, j)].norm_sqr();
        let noise = n0 * (row_norm_sqr(&q_b, j) + v2);
        ul.push(desired / ((total - desired).max(0.0) + noise));
    }

    let mut dl = Vec::with_capacity(l);
    for (k, h) in channels.h_rk.iter().enumerate() {
        let vk = &t.v_ms[k];
        let q = vk * h.transpose() * &t.w_r;
        let gd = &q * &d;
        let gu = &q * &u;
        let off = config.offset(k);
        for s in 0..config.l_k[k] {
            let v2 = row_norm_sqr(vk, s);
            if v2 == 0.0 {
                return Err(Error::DegenerateEqualizer(StreamId::dl(k, s).to_string()));
            }
            let j = off + s;
            let desired = gd[(s, j)].norm_sqr();
            let dl_interf = row_norm_sqr(&gd, s) - desired;
            let ul_interf: f64 = (0..l).filter(|&i| owner[i] != k).map(|i| gu[(s, i)].norm_sqr()).sum();
            let noise = n0 * (row_norm_sqr(&q, s) + v2);
            dl.push(desired / (dl_interf.max(0.0) + ul_interf + noise));
        }
    }
    Ok(StreamSinrs { ul, dl })
}

pub fn ul_sinr(t: &TransceiverSet, channels: &ChannelSet, config: &SystemConfig, s: StreamId) -> Result<f64> {
    if s.direction != Direction::Uplink {
        return Err(Error::Dimension("ul_sinr called with a DL stream".into()));
    }
    Ok(all_sinrs(t, channels, config)?.get(config, s))
}

pub fn dl_sinr(t: &TransceiverSet, channels: &ChannelSet, config: &SystemConfig, s: StreamId) -> Result<f64> {
    if s.direction != Direction::Downlink {
        return Err(Error::Dimension("dl_sinr called with a UL stream".into()));
    }
    Ok(all_sinrs(t, channels, config)?.get(config, s))
}

/// SINRs from the aligned decomposition (`Φ`, `Ψ`, `F_R`, `A_R`); equals
/// [`all_sinrs`] when the alignment conditions hold.
pub fn all_sinrs_decomposed(t: &TransceiverSet, channels: &ChannelSet, config: &SystemConfig) -> Result<StreamSinrs> {
    let split = t
        .split
        .as_ref()
        .ok_or_else(|| Error::Dimension("transceiver set has no F_R/A_R split".into()))?;
    decomposed_with(&split.f_r, &split.aligned, &t.v_b, &t.v_ms, channels, config)
}

/// Decomposed SINRs for an explicit relay precoder and equalizers.
pub fn decomposed_with(
    f_r: &CMatrix,
    aligned: &AlignedRelay,
    v_b: &CMatrix,
    v_ms: &[CMatrix],
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<StreamSinrs> {
    let l = config.total_streams();
    let owner = config.stream_owner();
    let n0 = config.n0;
    let (phi, psi) = (&aligned.phi, &aligned.psi);

    let q_b = v_b * channels.h_rb.transpose() * f_r;
    let qa_b = &q_b * &aligned.a_r;
    let mut ul = Vec::with_capacity(l);
    for j in 0..l {
        let v2 = row_norm_sqr(v_b, j);
        if v2 == 0.0 {
            let (k, s) = config.stream_pairs()[j];
            return Err(Error::DegenerateEqualizer(StreamId::ul(k, s).to_string()));
        }
        let gains: Vec<f64> = (0..l).map(|i| (q_b[(j, i)] * phi[i]).norm_sqr()).collect();
        let desired = gains[j];
        let interf: f64 = gains.iter().sum::<f64>() - desired;
        let noise = n0 * (row_norm_sqr(&qa_b, j) + v2);
        ul.push(desired / (interf.max(0.0) + noise));
    }

    let mut dl = Vec::with_capacity(l);
    for (k, h) in channels.h_rk.iter().enumerate() {
        let vk = &v_ms[k];
        let q = vk * h.transpose() * f_r;
        let qa = &q * &aligned.a_r;
        let off = config.offset(k);
        for s in 0..config.l_k[k] {
            let v2 = row_norm_sqr(vk, s);
            if v2 == 0.0 {
                return Err(Error::DegenerateEqualizer(StreamId::dl(k, s).to_string()));
            }
            let j = off + s;
            let desired = (q[(s, j)] * psi[j]).norm_sqr();
            let mut interf = 0.0;
            for i in 0..l {
                if i != j {
                    interf += (q[(s, i)] * psi[i]).norm_sqr();
                }
                if owner[i] != k {
                    interf += (q[(s, i)] * phi[i]).norm_sqr();
                }
            }
            let noise = n0 * (row_norm_sqr(&qa, s) + v2);
            dl.push(desired / (interf + noise));
        }
    }
    Ok(StreamSinrs { ul, dl })
}

pub fn ul_sinr_decomposed(
    t: &TransceiverSet,
    channels: &ChannelSet,
    config: &SystemConfig,
    s: StreamId,
) -> Result<f64> {
    Ok(all_sinrs_decomposed(t, channels, config)?.get(config, StreamId::ul(s.user, s.stream)))
}

pub fn dl_sinr_decomposed(
    t: &TransceiverSet,
    channels: &ChannelSet,
    config: &SystemConfig,
    s: StreamId,
) -> Result<f64> {
    Ok(all_sinrs_decomposed(t, channels, config)?.get(config, StreamId::dl(s.user, s.stream)))
}

/// First-hop SINR of the relay's estimate of stream `s`:
/// `|gain|² / (N0 ‖A_R row‖²)` with gain `φ` (UL) or `ψ` (DL).
pub fn relay_forward_sinr(aligned: &AlignedRelay, config: &SystemConfig, s: StreamId) -> Result<f64> {
    let j = config.global_index(s.user, s.stream);
    let a2 = row_norm_sqr(&aligned.a_r, j);
    if a2 == 0.0 {
        return Err(Error::DegenerateEqualizer(format!("A_R row of {s}")));
    }
    let gain = match s.direction {
        Direction::Uplink => aligned.phi[j],
        Direction::Downlink => aligned.psi[j],
    };
    Ok(gain.norm_sqr() / (config.n0 * a2))
}

/// `ξ = γ / γ̃`, the end-to-end SINR as a fraction of the first-hop SINR.
pub fn sinr_decomposition_ratio(
    t: &TransceiverSet,
    channels: &ChannelSet,
    config: &SystemConfig,
    s: StreamId,
) -> Result<f64> {
    let split = t
        .split
        .as_ref()
        .ok_or_else(|| Error::Dimension("transceiver set has no F_R/A_R split".into()))?;
    let first = relay_forward_sinr(&split.aligned, config, s)?;
    if first == 0.0 {
        return Err(Error::ZeroGain(s.to_string()));
    }
    Ok(all_sinrs(t, channels, config)?.get(config, s) / first)
}

/// `½ log₂(1 + γ)` bits/s/Hz.
pub fn per_stream_rate(gamma: f64) -> Result<f64> {
    if gamma < 0.0 || gamma.is_nan() {
        return Err(Error::NegativeSinr(gamma));
    }
    Ok(0.5 * (1.0 + gamma).log2())
}

/// Sum of UL and DL per-stream rates.
pub fn sum_rate(t: &TransceiverSet, channels: &ChannelSet, config: &SystemConfig) -> Result<f64> {
    let s = all_sinrs(t, channels, config)?;
    s.ul.iter().chain(&s.dl).map(|&g| per_stream_rate(g)).sum()
}

/// Expected relay transmit power
/// `Σ_m ‖W_R H_Rm W_m‖² + ‖W_R H_RB W_B‖² + N0 ‖W_R‖²`.
pub fn relay_tx_power(t: &TransceiverSet, channels: &ChannelSet, config: &SystemConfig) -> f64 {
    let ul: f64 = channels
        .h_rk
        .iter()
        .zip(&t.w_ms)
        .map(|(h, w)| (&t.w_r * h * w).norm_squared())
        .sum();
    let dl = (&t.w_r * &channels.h_rb * &t.w_b).norm_squared();
    ul + dl + config.n0 * t.w_r.norm_squared()
}

/// `‖F_R Φ‖² + ‖F_R Ψ‖² + N0 ‖F_R A_R‖²`, the relay power of an aligned design.
pub fn relay_power_decomposed(f_r: &CMatrix, aligned: &AlignedRelay, n0: f64) -> f64 {
    (f_r * aligned.phi_matrix()).norm_squared()
        + (f_r * aligned.psi_matrix()).norm_squared()
        + n0 * (f_r * &aligned.a_r).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn scalar_config() -> SystemConfig {
        SystemConfig {
            n_b: 1,
            n_r: 1,
            n_k: vec![1],
            l_k: vec![1],
            p_b: 1.0,
            p_r: 1.0,
            p_k: vec![1.0],
            n0: 1.0,
            omega_ul: vec![vec![1.0]],
            omega_dl: vec![vec![1.0]],
        }
    }

    fn one() -> CMatrix {
        CMatrix::from_element(1, 1, c64(1.0, 0.0))
    }

    fn scalar_set() -> (TransceiverSet, ChannelSet) {
        let t = TransceiverSet {
            w_b: one(),
            w_ms: vec![one()],
            w_r: one(),
            v_b: one(),
            v_ms: vec![one()],
            split: Some(super::super::transceiver::RelaySplit {
                aligned: AlignedRelay {
                    a_r: one(),
                    phi: vec![c64(1.0, 0.0)],
                    psi: vec![c64(1.0, 0.0)],
                },
                f_r: one(),
            }),
        };
        let ch = ChannelSet {
            h_rb: one(),
            h_rk: vec![one()],
        };
        (t, ch)
    }

    #[test]
    fn scalar_chain_hand_value() {
        let (t, ch) = scalar_set();
        let c = scalar_config();
        // desired 1, interference 0, noise N0(1 + 1) = 2
        assert!((ul_sinr(&t, &ch, &c, StreamId::ul(0, 0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((dl_sinr(&t, &ch, &c, StreamId::dl(0, 0)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            ul_sinr_decomposed(&t, &ch, &c, StreamId::ul(0, 0)).unwrap(),
            ul_sinr(&t, &ch, &c, StreamId::ul(0, 0)).unwrap()
        );
        // relay power: |1|² + |1|² + 1·|1|² = 3
        assert!((relay_tx_power(&t, &ch, &c) - 3.0).abs() < 1e-15);
        let r = sinr_decomposition_ratio(&t, &ch, &c, StreamId::ul(0, 0)).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_equalizer_row_is_an_error() {
        let (mut t, ch) = scalar_set();
        t.v_b = CMatrix::zeros(1, 1);
        assert!(matches!(
            ul_sinr(&t, &ch, &scalar_config(), StreamId::ul(0, 0)),
            Err(Error::DegenerateEqualizer(_))
        ));
    }

    #[test]
    fn zero_relay_is_zero_power() {
        let (mut t, ch) = scalar_set();
        t.w_r = CMatrix::zeros(1, 1);
        assert_eq!(relay_tx_power(&t, &ch, &scalar_config()), 0.0);
    }

    #[test]
    fn rates() {
        assert!((per_stream_rate(3.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(per_stream_rate(0.0).unwrap(), 0.0);
        assert!((per_stream_rate(15.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(per_stream_rate(-1.0).is_err());
        let s = StreamSinrs {
            ul: vec![3.0; 4],
            dl: vec![3.0; 4],
        };
        assert!((s.sum_rate() - 8.0).abs() < 1e-12);
        let z = StreamSinrs {
            ul: vec![0.0; 4],
            dl: vec![0.0; 4],
        };
        assert_eq!(z.sum_rate(), 0.0);
    }

    #[test]
    fn relay_forward_product_form() {
        let c = scalar_config();
        // κ = |g|²/(N0 |a|²) = 2 for g = 1, a = 1/√2; with λ = 3 the gain is √3·g
        let aligned = AlignedRelay {
            a_r: CMatrix::from_element(1, 1, c64(std::f64::consts::FRAC_1_SQRT_2, 0.0)),
            phi: vec![c64(3f64.sqrt(), 0.0)],
            psi: vec![c64(0.0, 0.0)],
        };
        let g = relay_forward_sinr(&aligned, &c, StreamId::ul(0, 0)).unwrap();
        assert!((g - 6.0).abs() < 1e-12);
        assert_eq!(relay_forward_sinr(&aligned, &c, StreamId::dl(0, 0)).unwrap(), 0.0);
    }
}
