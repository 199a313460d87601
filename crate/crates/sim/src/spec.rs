//! Sweep specification, read from TOML.
//!
//! ```toml
//! snr_db_points = [15.0, 25.0]
//! nb_points = [4, 6]          # optional, defaults to base_config.n_b
//! trials = 100
//! master_seed = 1
//! schemes = ["Proposed", "ChannelInversionNaive", "SdmaZf"]
//!
//! [base_config]
//! n_b = 4
//! n_r = 4
//! n_k = [2, 2, 2]
//! l_k = [2, 1, 1]
//! omega_ul = [[1.0, 1.0], [2.0], [1.0]]   # optional, defaults to 1
//! omega_dl = [[1.0, 1.0], [2.0], [1.0]]   # optional, defaults to 1
//! ```
//!
//! Powers follow the SNR with `N0 = 1`: `P_B = P_R = SNR` and
//! `P_k = SNR·L_k/L`. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use twoway_core::design::Scheme;
use twoway_core::model::SystemConfig;

use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub n_b: usize,
    pub n_r: usize,
    pub n_k: Vec<usize>,
    pub l_k: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_ul: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_dl: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base_config: BaseConfig,
    pub snr_db_points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nb_points: Option<Vec<usize>>,
    pub trials: usize,
    pub master_seed: u64,
    pub schemes: Vec<Scheme>,
}

/// One `(N_B, SNR)` combination, indexed in sweep order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub n_b: usize,
    pub snr_db: f64,
}

impl SweepSpec {
    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let spec: SweepSpec = toml::from_str(s).map_err(|e| SimError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.snr_db_points.is_empty() {
            return bad("snr_db_points must not be empty");
        }
        if self.snr_db_points.iter().any(|s| !s.is_finite()) {
            return bad("snr_db_points must be finite");
        }
        if self.nb_points.as_ref().is_some_and(|v| v.is_empty()) {
            return bad("nb_points, when given, must not be empty");
        }
        if self.schemes.is_empty() {
            return bad("schemes must not be empty");
        }
        for p in self.points() {
            self.config_at(&p)
                .validate_basic()
                .map_err(|e| SimError::Config(format!("base_config at N_B = {}: {e}", p.n_b)))?;
        }
        Ok(())
    }

    /// Sweep points with `N_B` outermost.
    pub fn points(&self) -> Vec<SweepPoint> {
        let nbs = self.nb_points.clone().unwrap_or_else(|| vec![self.base_config.n_b]);
        let mut out = Vec::with_capacity(nbs.len() * self.snr_db_points.len());
        for &n_b in &nbs {
            for &snr_db in &self.snr_db_points {
                out.push(SweepPoint {
                    index: out.len(),
                    n_b,
                    snr_db,
                });
            }
        }
        out
    }

    /// System parameters at one sweep point.
    pub fn config_at(&self, p: &SweepPoint) -> SystemConfig {
        let b = &self.base_config;
        let mut cfg = SystemConfig::from_snr_db(p.n_b, b.n_r, b.n_k.clone(), b.l_k.clone(), p.snr_db);
        if let Some(w) = &b.omega_ul {
            cfg.omega_ul = w.clone();
        }
        if let Some(w) = &b.omega_dl {
            cfg.omega_dl = w.clone();
        }
        cfg
    }
}
