use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Uplink,
    Downlink,
}

/// A single data stream. `user` and `stream` are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub user: usize,
    pub stream: usize,
    pub direction: Direction,
}

impl StreamId {
    pub fn ul(user: usize, stream: usize) -> Self {
        Self {
            user,
            stream,
            direction: Direction::Uplink,
        }
    }

    pub fn dl(user: usize, stream: usize) -> Self {
        Self {
            user,
            stream,
            direction: Direction::Downlink,
        }
    }
}

impl std::fmt::Display for StreamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = match self.direction {
            Direction::Uplink => "UL",
            Direction::Downlink => "DL",
        };
        write!(f, "{d}({},{})", self.user + 1, self.stream + 1)
    }
}

/// Node counts, antenna counts, stream allocation, power budgets (linear),
/// noise power and per-stream QoS weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_b: usize,
    pub n_r: usize,
    /// Antennas per MS.
    pub n_k: Vec<usize>,
    /// Streams per MS.
    pub l_k: Vec<usize>,
    pub p_b: f64,
    pub p_r: f64,
    pub p_k: Vec<f64>,
    pub n0: f64,
    /// Uplink weights, `omega_ul[k][l]`.
    pub omega_ul: Vec<Vec<f64>>,
    /// Downlink weights, `omega_dl[k][l]`.
    pub omega_dl: Vec<Vec<f64>>,
}

impl SystemConfig {
    /// Unit weights, `N0 = 1`, and powers from the SNR `P_B/N0` (dB) with
    /// equal power per stream: `P_B/L = P_R/L = P_k/L_k`.
    pub fn from_snr_db(n_b: usize, n_r: usize, n_k: Vec<usize>, l_k: Vec<usize>, snr_db: f64) -> Self {
        let omega_ul: Vec<Vec<f64>> = l_k.iter().map(|&l| vec![1.0; l]).collect();
        let omega_dl = omega_ul.clone();
        let mut cfg = Self {
            n_b,
            n_r,
            n_k,
            l_k,
            p_b: 1.0,
            p_r: 1.0,
            p_k: Vec::new(),
            n0: 1.0,
            omega_ul,
            omega_dl,
        };
        cfg.set_snr_db(snr_db);
        cfg
    }

    /// Resets `N0 = 1` and all budgets from the SNR, keeping weights.
    pub fn set_snr_db(&mut self, snr_db: f64) {
        let snr = 10f64.powf(snr_db / 10.0);
        let l = self.total_streams().max(1) as f64;
        self.n0 = 1.0;
        self.p_b = snr;
        self.p_r = snr;
        self.p_k = self.l_k.iter().map(|&lk| snr * lk as f64 / l).collect();
    }

    pub fn num_users(&self) -> usize {
        self.l_k.len()
    }

    pub fn total_streams(&self) -> usize {
        self.l_k.iter().sum()
    }

    /// Global index of stream `l` of user `k` within the stacked `L` streams.
    pub fn offset(&self, k: usize) -> usize {
        self.l_k[..k].iter().sum()
    }

    pub fn global_index(&self, k: usize, l: usize) -> usize {
        self.offset(k) + l
    }

    /// `(user, stream)` for every stream in stacking order.
    pub fn stream_pairs(&self) -> Vec<(usize, usize)> {
        self.l_k
            .iter()
            .enumerate()
            .flat_map(|(k, &lk)| (0..lk).map(move |l| (k, l)))
            .collect()
    }

    /// Owner of each global stream index.
    pub fn stream_owner(&self) -> Vec<usize> {
        self.stream_pairs().into_iter().map(|(k, _)| k).collect()
    }

    pub fn weight(&self, s: StreamId) -> f64 {
        match s.direction {
            Direction::Uplink => self.omega_ul[s.user][s.stream],
            Direction::Downlink => self.omega_dl[s.user][s.stream],
        }
    }

    /// Checks the structural invariants without the `N_B ≥ L`, `N_R ≥ L`
    /// alignment requirement (baselines accept other shapes).
    pub fn validate_basic(&self) -> Result<()> {
        let k = self.num_users();
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if k == 0 {
            return bad("at least one user is required".into());
        }
        if self.n_k.len() != k || self.p_k.len() != k || self.omega_ul.len() != k || self.omega_dl.len() != k {
            return bad(format!(
                "per-user lists must have length {k} (n_k {}, p_k {}, omega_ul {}, omega_dl {})",
                self.n_k.len(),
                self.p_k.len(),
                self.omega_ul.len(),
                self.omega_dl.len()
            ));
        }
        if self.n_b == 0 || self.n_r == 0 {
            return bad("antenna counts must be positive".into());
        }
        for u in 0..k {
            if self.l_k[u] == 0 {
                return bad(format!("user {} has no streams", u + 1));
            }
            if self.n_k[u] < self.l_k[u] {
                return bad(format!("user {}: N_k = {} < L_k = {}", u + 1, self.n_k[u], self.l_k[u]));
            }
            if self.omega_ul[u].len() != self.l_k[u] || self.omega_dl[u].len() != self.l_k[u] {
                return bad(format!("user {}: weight lists must have L_k entries", u + 1));
            }
            if self.omega_ul[u]
                .iter()
                .chain(&self.omega_dl[u])
                .any(|&w| !(w >= 1.0) || !w.is_finite())
            {
                return bad(format!("user {}: weights must be finite and ≥ 1", u + 1));
            }
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.p_b) || !positive(self.p_r) || !positive(self.n0) || !self.p_k.iter().all(|&p| positive(p)) {
            return bad("powers and noise must be positive and finite".into());
        }
        Ok(())
    }

    /// Full invariants, including `N_B ≥ L` and `N_R ≥ L`.
    pub fn validate(&self) -> Result<()> {
        self.validate_basic()?;
        let l = self.total_streams();
        if self.n_b < l {
            return Err(Error::InvalidConfig(format!("N_B = {} < L = {l}", self.n_b)));
        }
        if self.n_r < l {
            return Err(Error::InvalidConfig(format!("N_R = {} < L = {l}", self.n_r)));
        }
        Ok(())
    }
}

/// `min{N_B, N_R, Σ N_k}`.
pub fn achievable_dof(config: &SystemConfig) -> usize {
    let sum_nk: usize = config.n_k.iter().sum();
    config.n_b.min(config.n_r).min(sum_nk)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_config() -> SystemConfig {
        SystemConfig::from_snr_db(4, 4, vec![2, 2, 2], vec![2, 1, 1], 10.0)
    }

    #[test]
    fn snr_power_rule() {
        let c = reference_config();
        assert!((c.p_b - 10.0).abs() < 1e-12);
        assert!((c.p_r - 10.0).abs() < 1e-12);
        assert!((c.p_k[0] - 5.0).abs() < 1e-12);
        assert!((c.p_k[1] - 2.5).abs() < 1e-12);
        assert_eq!(c.n0, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn indexing() {
        let c = reference_config();
        assert_eq!(c.total_streams(), 4);
        assert_eq!(c.global_index(1, 0), 2);
        assert_eq!(c.global_index(2, 0), 3);
        assert_eq!(c.stream_owner(), vec![0, 0, 1, 2]);
        assert_eq!(StreamId::dl(1, 0).to_string(), "DL(2,1)");
    }

    #[test]
    fn dof_examples() {
        assert_eq!(achievable_dof(&reference_config()), 4);
        let mut c = reference_config();
        c.n_b = 8;
        assert_eq!(achievable_dof(&c), 4);
        let c = SystemConfig::from_snr_db(2, 8, vec![1], vec![1], 0.0);
        assert_eq!(achievable_dof(&c), 1);
    }

    #[test]
    fn validation_failures() {
        let mut c = reference_config();
        c.omega_ul[1][0] = 0.5;
        assert!(c.validate().is_err());
        let mut c = reference_config();
        c.n_b = 3;
        assert!(c.validate().is_err());
        assert!(c.validate_basic().is_ok());
        let mut c = reference_config();
        c.n0 = 0.0;
        assert!(c.validate().is_err());
        let mut c = reference_config();
        c.n_k[2] = 0;
        assert!(c.validate().is_err());
    }
}
