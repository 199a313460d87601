//! CSV and JSON output, and per-point summaries.

use std::io::Write;

use serde::Serialize;
use twoway_core::design::Scheme;

use crate::spec::SweepSpec;
use crate::sweep::TrialRecord;
use crate::SimError;

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Header: fixed columns, then `sinr_ul_{k}_{l}_db` and `sinr_dl_{k}_{l}_db`
/// (1-based), then `wall_ms`.
pub fn csv_header(l_k: &[usize]) -> Vec<String> {
    let mut h: Vec<String> = [
        "scheme",
        "snr_db",
        "n_b",
        "trial",
        "seed",
        "feasible",
        "min_weighted_sinr_db",
        "sum_rate_bps_hz",
        "iterations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for dir in ["ul", "dl"] {
        for (k, &l) in l_k.iter().enumerate() {
            for s in 0..l {
                h.push(format!("sinr_{dir}_{}_{}_db", k + 1, s + 1));
            }
        }
    }
    h.push("wall_ms".into());
    h
}

/// Writes records as CSV. Infeasible records leave metric cells empty.
pub fn write_csv<W: Write>(out: W, spec: &SweepSpec, records: &[TrialRecord]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let header = csv_header(&spec.base_config.l_k);
    let l: usize = spec.base_config.l_k.iter().sum();
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let mut row = vec![
            r.scheme.to_string(),
            r.snr_db.to_string(),
            r.n_b.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.feasible.to_string(),
            opt(r.min_weighted_sinr.map(db)),
            opt(r.sum_rate),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
        ];
        for sinrs in [&r.sinr_ul, &r.sinr_dl] {
            for j in 0..l {
                row.push(opt(sinrs.get(j).copied().map(db)));
            }
        }
        row.push(opt(r.wall_ms));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub point: usize,
    pub snr_db: f64,
    pub n_b: usize,
    pub trials: usize,
    pub feasible: usize,
    pub feasible_fraction: f64,
    pub mean_sum_rate: Option<f64>,
    pub stderr_sum_rate: Option<f64>,
    /// Linear min weighted SINR statistics.
    pub mean_min_weighted_sinr: Option<f64>,
    pub stderr_min_weighted_sinr: Option<f64>,
}

/// Sample mean and standard error (`s/√n`, zero for one sample).
pub fn mean_stderr(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// Per `(scheme, point)` statistics over feasible trials, in order of first
/// appearance.
pub fn aggregate(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Scheme, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.scheme, r.point)) {
            keys.push((r.scheme, r.point));
        }
    }
    keys.into_iter()
        .map(|(scheme, point)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.scheme == scheme && r.point == point)
                .collect();
            let ok: Vec<&&TrialRecord> = group.iter().filter(|r| r.feasible).collect();
            let rates: Vec<f64> = ok.iter().filter_map(|r| r.sum_rate).collect();
            let mins: Vec<f64> = ok.iter().filter_map(|r| r.min_weighted_sinr).collect();
            let rate = mean_stderr(&rates);
            let min = mean_stderr(&mins);
            SummaryRow {
                scheme,
                point,
                snr_db: group[0].snr_db,
                n_b: group[0].n_b,
                trials: group.len(),
                feasible: ok.len(),
                feasible_fraction: ok.len() as f64 / group.len() as f64,
                mean_sum_rate: rate.map(|r| r.0),
                stderr_sum_rate: rate.map(|r| r.1),
                mean_min_weighted_sinr: min.map(|r| r.0),
                stderr_min_weighted_sinr: min.map(|r| r.1),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct JsonReport<'a> {
    spec: &'a SweepSpec,
    summary: Vec<SummaryRow>,
    records: &'a [TrialRecord],
}

pub fn write_json<W: Write>(out: W, spec: &SweepSpec, records: &[TrialRecord]) -> Result<(), SimError> {
    let report = JsonReport {
        spec,
        summary: aggregate(records),
        records,
    };
    serde_json::to_writer_pretty(out, &report).map_err(|e| SimError::Io(e.to_string()))
}
