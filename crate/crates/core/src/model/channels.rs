use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, DEFAULT_RTOL};

/// MAC-phase channels. Reverse (BC-phase) channels are the plain
/// transposes by reciprocity and are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS to RS, `N_R × N_B`.
    pub h_rb: CMatrix,
    /// MS `k` to RS, `N_R × N_k`.
    pub h_rk: Vec<CMatrix>,
}

impl ChannelSet {
    pub fn check(&self, config: &SystemConfig) -> Result<()> {
        let want = (config.n_r, config.n_b);
        if self.h_rb.shape() != want {
            return Err(Error::Dimension(format!(
                "H_RB is {:?}, expected {want:?}",
                self.h_rb.shape()
            )));
        }
        if self.h_rk.len() != config.num_users() {
            return Err(Error::Dimension(format!(
                "{} MS channels for {} users",
                self.h_rk.len(),
                config.num_users()
            )));
        }
        for (k, h) in self.h_rk.iter().enumerate() {
            let want = (config.n_r, config.n_k[k]);
            if h.shape() != want {
                return Err(Error::Dimension(format!(
                    "H_R{} is {:?}, expected {want:?}",
                    k + 1,
                    h.shape()
                )));
            }
            linalg::ensure_finite(h)?;
        }
        linalg::ensure_finite(&self.h_rb)
    }
}

/// Standard circularly-symmetric complex Gaussian draw, `CN(0, 1)`.
pub fn cn01<R: rand::Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cn_matrix<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    // fill column-major so the draw order follows vec()
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = cn01(rng);
        }
    }
    m
}

/// i.i.d. Rayleigh channels. `H_RB` is drawn first, then `H_R1 … H_RK`,
/// each column by column.
pub fn sample_channels(config: &SystemConfig, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_rb = cn_matrix(&mut rng, config.n_r, config.n_b);
    let h_rk = config
        .n_k
        .iter()
        .map(|&nk| cn_matrix(&mut rng, config.n_r, nk))
        .collect();
    ChannelSet { h_rb, h_rk }
}

fn ranks(config: &SystemConfig, channels: &ChannelSet) -> Option<(usize, Vec<usize>)> {
    channels.check(config).ok()?;
    let rb = linalg::rank(&channels.h_rb, DEFAULT_RTOL).ok()?;
    let rk = channels
        .h_rk
        .iter()
        .map(|h| linalg::rank(h, DEFAULT_RTOL).ok())
        .collect::<Option<Vec<_>>>()?;
    Some((rb, rk))
}

/// Rank conditions under which the streams can be aligned at the relay.
/// The nullity of `H_Rk` counts the relay-side dimensions it does not
/// reach, `N_R − rank(H_Rk)`.
pub fn check_alignment_feasibility(config: &SystemConfig, channels: &ChannelSet) -> bool {
    rank_conditions(config, channels, config.total_streams())
}

/// Conditions for plain SDMA at the relay (all `2L` streams separable).
pub fn check_sdma_feasibility(config: &SystemConfig, channels: &ChannelSet) -> bool {
    rank_conditions(config, channels, 2 * config.total_streams())
}

fn rank_conditions(config: &SystemConfig, channels: &ChannelSet, relay_dims: usize) -> bool {
    let Some((rb, rk)) = ranks(config, channels) else {
        return false;
    };
    let l = config.total_streams();
    if rb < l {
        return false;
    }
    rk.iter().zip(&config.l_k).all(|(&r, &lk)| {
        let nullity = config.n_r - r;
        r >= lk && r + nullity >= relay_dims
    })
}
