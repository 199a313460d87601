//! Trial execution.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use twoway_core::design::{design, DesignOptions, Scheme};
use twoway_core::model::{all_sinrs, sample_channels};
use twoway_core::Error;

use crate::spec::{SweepPoint, SweepSpec};
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub scheme: Scheme,
    pub point: usize,
    pub snr_db: f64,
    pub n_b: usize,
    pub trial: usize,
    pub seed: u64,
    pub feasible: bool,
    /// Why the scheme produced no design; set exactly when infeasible.
    pub infeasible_reason: Option<String>,
    /// Linear SINRs in stacking order; empty when infeasible.
    pub sinr_ul: Vec<f64>,
    pub sinr_dl: Vec<f64>,
    pub min_weighted_sinr: Option<f64>,
    pub sum_rate: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the current rayon pool.
    pub threads: Option<usize>,
    /// Fill `wall_ms`. Off by default so outputs stay byte-identical.
    pub record_timing: bool,
    pub design: DesignOptions,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Channel seed of `(point, trial)`: three chained splitmix64 rounds,
/// `h = sm(sm(sm(master) ^ point) ^ trial)`. Scheme-independent, so every
/// scheme sees the same channels.
pub fn trial_seed(master_seed: u64, point: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ point as u64) ^ trial as u64)
}

/// Errors that mean "this scheme cannot serve this draw" rather than a
/// numerical failure.
fn is_infeasibility(e: &Error) -> bool {
    matches!(
        e,
        Error::Infeasible(_) | Error::RankDeficient(_) | Error::NoAdmissibleSelection
    )
}

pub fn run_trial(
    spec: &SweepSpec,
    scheme: Scheme,
    point: &SweepPoint,
    trial: usize,
    opts: &RunOptions,
) -> Result<TrialRecord, SimError> {
    let seed = trial_seed(spec.master_seed, point.index, trial);
    let config = spec.config_at(point);
    let channels = sample_channels(&config, seed);
    let start = Instant::now();
    let mut rec = TrialRecord {
        scheme,
        point: point.index,
        snr_db: point.snr_db,
        n_b: point.n_b,
        trial,
        seed,
        feasible: false,
        infeasible_reason: None,
        sinr_ul: Vec::new(),
        sinr_dl: Vec::new(),
        min_weighted_sinr: None,
        sum_rate: None,
        iterations: None,
        converged: None,
        wall_ms: None,
    };
    let numerical = |source: Error| SimError::Numerical {
        scheme,
        point: point.index,
        trial,
        seed,
        source,
    };
    match design(scheme, &config, &channels, &opts.design) {
        Ok(out) => {
            let s = all_sinrs(&out.transceivers, &channels, &config).map_err(numerical)?;
            if s.ul.iter().chain(&s.dl).any(|g| !g.is_finite()) {
                return Err(numerical(Error::NonFinite));
            }
            rec.feasible = true;
            rec.min_weighted_sinr = Some(s.min_weighted(&config));
            rec.sum_rate = Some(s.sum_rate());
            rec.iterations = Some(out.iterations);
            rec.converged = Some(out.converged);
            rec.sinr_ul = s.ul;
            rec.sinr_dl = s.dl;
        }
        Err(e) if is_infeasibility(&e) => rec.infeasible_reason = Some(e.to_string()),
        Err(e) => return Err(numerical(e)),
    }
    if opts.record_timing {
        rec.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(rec)
}

/// Runs every `(scheme, point, trial)` and returns records in that canonical
/// order, independent of thread count.
pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<Vec<TrialRecord>, SimError> {
    spec.validate()?;
    let points = spec.points();
    let jobs: Vec<(Scheme, SweepPoint, usize)> = spec
        .schemes
        .iter()
        .flat_map(|&s| {
            points
                .iter()
                .flat_map(move |p| (0..spec.trials).map(move |t| (s, *p, t)))
        })
        .collect();
    let run = || -> Result<Vec<TrialRecord>, SimError> {
        jobs.par_iter()
            .map(|(s, p, t)| run_trial(spec, *s, p, *t, opts))
            .collect()
    };
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SimError::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}
