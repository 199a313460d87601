//! Symbol-level link simulation: MAC phase, relay amplify-and-forward, BC
//! phase, self-interference cancellation and linear equalization.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::channels::{cn_matrix, ChannelSet};
use super::config::SystemConfig;
use super::sinr::StreamSinrs;
use super::transceiver::TransceiverSet;
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};

/// One block of transmitted symbols and noise, one column per symbol time.
#[derive(Debug, Clone)]
pub struct BlockInput {
    /// UL symbols, `L × T`.
    pub s_u: CMatrix,
    /// DL symbols, `L × T`.
    pub s_d: CMatrix,
    /// Relay noise, `N_R × T`.
    pub n_r: CMatrix,
    /// BS noise, `N_B × T`.
    pub n_b: CMatrix,
    /// MS noise, `N_k × T`.
    pub n_ms: Vec<CMatrix>,
}

impl BlockInput {
    pub fn zeros(config: &SystemConfig, len: usize) -> Self {
        let l = config.total_streams();
        Self {
            s_u: CMatrix::zeros(l, len),
            s_d: CMatrix::zeros(l, len),
            n_r: CMatrix::zeros(config.n_r, len),
            n_b: CMatrix::zeros(config.n_b, len),
            n_ms: config.n_k.iter().map(|&nk| CMatrix::zeros(nk, len)).collect(),
        }
    }
}

/// Received signals after self-interference cancellation, before and after
/// equalization.
#[derive(Debug, Clone)]
pub struct BlockOutput {
    /// `y_B − i_B`, `N_B × T`.
    pub clean_b: CMatrix,
    /// `y_k − i_k`, `N_k × T`.
    pub clean_ms: Vec<CMatrix>,
    /// UL estimates `V_B (y_B − i_B)`, `L × T`.
    pub est_u: CMatrix,
    /// DL estimates stacked over users, `L × T`.
    pub est_d: CMatrix,
}

/// Runs one block through both phases. Self-interference is rebuilt from
/// each node's own symbols and subtracted exactly.
pub fn propagate_block(
    t: &TransceiverSet,
    channels: &ChannelSet,
    config: &SystemConfig,
    input: &BlockInput,
) -> Result<BlockOutput> {
    t.check(config)?;
    channels.check(config)?;
    let len = input.s_u.ncols();
    let u = t.ul_effective(channels);
    let d = t.dl_effective(channels);

    // MAC phase and relay
    let y_r = &u * &input.s_u + &d * &input.s_d + &input.n_r;
    let x_r = &t.w_r * y_r;

    // BS
    let h_rb_t = channels.h_rb.transpose();
    let y_b = &h_rb_t * &x_r + &input.n_b;
    let i_b = &h_rb_t * (&t.w_r * (&d * &input.s_d));
    let clean_b = y_b - i_b;
    let est_u = &t.v_b * &clean_b;

    // MSs
    let mut clean_ms = Vec::with_capacity(config.num_users());
    let mut est_d = CMatrix::zeros(config.total_streams(), len);
    for (k, h) in channels.h_rk.iter().enumerate() {
        let h_t = h.transpose();
        let off = config.offset(k);
        let lk = config.l_k[k];
        let own_u = input.s_u.rows(off, lk);
        let y_k = &h_t * &x_r + &input.n_ms[k];
        let i_k = &h_t * (&t.w_r * (h * (&t.w_ms[k] * own_u)));
        let clean = y_k - i_k;
        est_d.rows_mut(off, lk).copy_from(&(&t.v_ms[k] * &clean));
        clean_ms.push(clean);
    }
    Ok(BlockOutput {
        clean_b,
        clean_ms,
        est_u,
        est_d,
    })
}

fn qpsk<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re = if rng.random::<bool>() { a } else { -a };
            let im = if rng.random::<bool>() { a } else { -a };
            m[(i, j)] = c64(re, im);
        }
    }
    m
}

/// Running sums for the matched-regression SINR estimate of one stream.
#[derive(Debug, Clone, Copy, Default)]
struct Regression {
    cross: Complex64,
    sym_power: f64,
    est_power: f64,
    count: usize,
}

impl Regression {
    fn push(&mut self, est: Complex64, sym: Complex64) {
        self.cross += est * sym.conj();
        self.sym_power += sym.norm_sqr();
        self.est_power += est.norm_sqr();
        self.count += 1;
    }

    /// `|g|²·E|s|² / E|est − g s|²` with `g` the least-squares gain.
    fn sinr(&self) -> f64 {
        if self.sym_power == 0.0 {
            return 0.0;
        }
        let g = self.cross / self.sym_power;
        let n = self.count as f64;
        // Σ|est − g s|² = Σ|est|² − |Σ est s*|²/Σ|s|²
        let residual = (self.est_power - self.cross.norm_sqr() / self.sym_power).max(0.0) / n;
        let signal = g.norm_sqr() * self.sym_power / n;
        if residual == 0.0 {
            f64::INFINITY
        } else {
            signal / residual
        }
    }
}

/// Empirical per-stream SINRs from `num_symbols` unit-power QPSK symbols per
/// stream with Gaussian noise of power `N0`.
pub fn simulate_transmission(
    t: &TransceiverSet,
    channels: &ChannelSet,
    config: &SystemConfig,
    num_symbols: usize,
    seed: u64,
) -> Result<StreamSinrs> {
    if num_symbols == 0 {
        return Err(Error::InvalidConfig("num_symbols must be at least 1".into()));
    }
    const CHUNK: usize = 4096;
    let l = config.total_streams();
    let sigma = config.n0.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ul = vec![Regression::default(); l];
    let mut dl = vec![Regression::default(); l];

    let mut done = 0;
    while done < num_symbols {
        let len = CHUNK.min(num_symbols - done);
        let input = BlockInput {
            s_u: qpsk(&mut rng, l, len),
            s_d: qpsk(&mut rng, l, len),
            n_r: cn_matrix(&mut rng, config.n_r, len) * c64(sigma, 0.0),
            n_b: cn_matrix(&mut rng, config.n_b, len) * c64(sigma, 0.0),
            n_ms: config
                .n_k
                .iter()
                .map(|&nk| cn_matrix(&mut rng, nk, len) * c64(sigma, 0.0))
                .collect(),
        };
        let out = propagate_block(t, channels, config, &input)?;
        for j in 0..l {
            for n in 0..len {
                ul[j].push(out.est_u[(j, n)], input.s_u[(j, n)]);
                dl[j].push(out.est_d[(j, n)], input.s_d[(j, n)]);
            }
        }
        done += len;
    }
    Ok(StreamSinrs {
        ul: ul.iter().map(Regression::sinr).collect(),
        dl: dl.iter().map(Regression::sinr).collect(),
    })
}
