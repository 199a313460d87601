//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twoway_core::design::{design, design_proposed, DesignOptions, Scheme};
use twoway_core::model::*;
use twoway_core::socp::{solve_margin, SocConstraint, SocpProblem, SocpStatus, DEFAULT_TOL};
use twoway_core::stage_one::{max_min_allocation_value, stage_one_search};
use twoway_sim::{mean_stderr, run_sweep, write_csv, RunOptions, SweepSpec};

fn reference_config(snr_db: f64) -> SystemConfig {
    SystemConfig::from_snr_db(4, 4, vec![2, 2, 2], vec![2, 1, 1], snr_db)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

// ---------------------------------------------------------------- 1

fn alignment_exactness() -> Outcome {
    let start = Instant::now();
    let cfg = reference_config(10.0);
    let mut worst = 0.0f64;
    let mut errors = 0;
    for seed in 0..500 {
        let ch = sample_channels(&cfg, 10_000 + seed);
        match stage_one_search(&cfg, &ch) {
            Ok(s1) => worst = worst.max(alignment_residual(&s1.aligned.a_r, &s1.w_b, &s1.w_ms, &ch, &cfg)),
            Err(_) => errors += 1,
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: errors == 0 && worst < 1e-8 && within(t, 60),
        detail: format!(
            "500 draws, max residual {worst:.2e}, {errors} errors, {:.1} s",
            t.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------- 2

/// Max of `min_i κ_i λ_i / ω_i` over `λ = budget·m·step`, `Σ m = 1/step`.
fn simplex_grid_max(kappa: &[f64], omega: &[f64], budget: f64, steps: usize) -> f64 {
    fn rec(i: usize, rem: usize, cur: f64, best: &mut f64, k: &[f64], w: &[f64], unit: f64) {
        if i + 1 == k.len() {
            *best = best.max(cur.min(k[i] * rem as f64 * unit / w[i]));
            return;
        }
        for m in (0..=rem).rev() {
            let v = cur.min(k[i] * m as f64 * unit / w[i]);
            // smaller m only lowers v
            if v <= *best {
                break;
            }
            rec(i + 1, rem - m, v, best, k, w, unit);
        }
    }
    let mut best = 0.0;
    rec(0, steps, f64::INFINITY, &mut best, kappa, omega, budget / steps as f64);
    best
}

fn allocation_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let l = rng.random_range(2..=4usize);
        let mut l_k = Vec::new();
        let mut left = l;
        while left > 0 {
            let take = rng.random_range(1..=left);
            l_k.push(take);
            left -= take;
        }
        let mut cfg = SystemConfig::from_snr_db(l, l, l_k.clone(), l_k.clone(), rng.random_range(0.0..30.0));
        cfg.omega_ul = l_k
            .iter()
            .map(|&n| (0..n).map(|_| rng.random_range(1.0..4.0)).collect())
            .collect();
        cfg.omega_dl = l_k
            .iter()
            .map(|&n| (0..n).map(|_| rng.random_range(1.0..4.0)).collect())
            .collect();
        let mut kappa = || -> Vec<f64> { (0..l).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect() };
        let (ku, kd) = (kappa(), kappa());

        let mut grid = f64::INFINITY;
        for k in 0..cfg.num_users() {
            let off = cfg.offset(k);
            grid = grid.min(simplex_grid_max(
                &ku[off..off + l_k[k]],
                &cfg.omega_ul[k],
                cfg.p_k[k],
                1000,
            ));
        }
        let w_dl: Vec<f64> = cfg.stream_pairs().iter().map(|&(k, q)| cfg.omega_dl[k][q]).collect();
        grid = grid.min(simplex_grid_max(&kd, &w_dl, cfg.p_b, 1000));

        let closed = max_min_allocation_value(&ku, &kd, &cfg);
        worst = worst.max((closed - grid).abs() / grid);
    }
    let t = start.elapsed();
    Outcome {
        pass: worst <= 0.01 && within(t, 60),
        detail: format!("100 instances, max relative gap {worst:.2e}, {:.1} s", t.as_secs_f64()),
    }
}

// ---------------------------------------------------------------- 3

fn monotone_convergence() -> Outcome {
    let start = Instant::now();
    let cfg = reference_config(15.0);
    let opts = DesignOptions::default();
    let (mut converged, mut worst_drop, mut errors) = (0, 0.0f64, 0);
    for seed in 0..100 {
        let ch = sample_channels(&cfg, 20_000 + seed);
        match design_proposed(&cfg, &ch, &opts) {
            Ok(d) => {
                let s2 = &d.stage_two;
                for w in s2.trace.windows(2) {
                    worst_drop = worst_drop.max(w[0] - w[1]);
                }
                if s2.converged && s2.iterations <= 30 {
                    converged += 1;
                }
            }
            Err(_) => errors += 1,
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: errors == 0 && worst_drop <= 1e-6 && converged >= 95 && within(t, 600),
        detail: format!(
            "100 instances, {converged} converged, largest drop {worst_drop:.2e}, {errors} errors, {:.1} s",
            t.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------- 4

struct Cell {
    upper: f64,
    center: Vec<f64>,
    half: f64,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.upper.total_cmp(&o.upper) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        self.upper.total_cmp(&o.upper)
    }
}

/// Bracket `[lo, hi]` on `max_x min_i slack_i(x)` by grid refinement with
/// Lipschitz pruning. Each cone's slack is `(‖A_i‖_F + ‖c_i‖)`-Lipschitz.
/// The problem carries a ball `‖x‖ ≤ r` with `c = 0`, so every point with
/// margin `t` lies in `‖x‖ ≤ r − t`.
fn grid_oracle(p: &SocpProblem, ball_radius: f64, max_cells: usize) -> (f64, f64) {
    let n = p.n;
    let lips: Vec<f64> = p.constraints.iter().map(|c| c.a_map.norm() + c.c_row.norm()).collect();
    let eval = |x: &[f64]| -> (f64, Vec<f64>) {
        let v = DVector::from_column_slice(x);
        let s: Vec<f64> = p.constraints.iter().map(|c| c.slack(&v)).collect();
        (s.iter().copied().fold(f64::INFINITY, f64::min), s)
    };
    let bound = |s: &[f64], half: f64| -> f64 {
        let r = half * (n as f64).sqrt();
        s.iter()
            .zip(&lips)
            .map(|(si, li)| si + li * r)
            .fold(f64::INFINITY, f64::min)
    };
    let (mut lo, s0) = eval(&vec![0.0; n]);
    let half0 = ball_radius - lo.min(0.0);
    let mut heap = BinaryHeap::new();
    heap.push(Cell {
        upper: bound(&s0, half0),
        center: vec![0.0; n],
        half: half0,
    });
    let mut cells = 1;
    while let Some(c) = heap.pop() {
        if c.upper - lo <= 0.02 || cells >= max_cells {
            return (lo, c.upper);
        }
        let h = c.half / 2.0;
        for mask in 0..(1usize << n) {
            let center: Vec<f64> = (0..n)
                .map(|d| c.center[d] + if mask >> d & 1 == 1 { h } else { -h })
                .collect();
            let (m, s) = eval(&center);
            lo = lo.max(m);
            let upper = bound(&s, h).min(c.upper);
            cells += 1;
            if upper > lo {
                heap.push(Cell { upper, center, half: h });
            }
        }
    }
    (lo, lo)
}

fn random_socp(rng: &mut ChaCha8Rng, radius: f64) -> SocpProblem {
    let n = rng.random_range(1..=4usize);
    let m = rng.random_range(1..=4usize);
    let mut constraints: Vec<SocConstraint> = (0..m)
        .map(|_| {
            let r = rng.random_range(1..=3usize);
            SocConstraint {
                a_map: DMatrix::from_fn(r, n, |_, _| rng.random_range(-1.0..1.0)),
                b_off: DVector::from_fn(r, |_, _| rng.random_range(-1.0..1.0)),
                c_row: DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5)),
                d_off: rng.random_range(-1.0..2.0),
            }
        })
        .collect();
    constraints.push(SocConstraint {
        a_map: DMatrix::identity(n, n),
        b_off: DVector::zeros(n),
        c_row: DVector::zeros(n),
        d_off: radius,
    });
    SocpProblem { n, constraints }
}

fn socp_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut mismatches, mut recheck_failures, mut outside, mut decisive) = (0, 0, 0, 0);
    let (mut feasible, mut infeasible) = (0, 0);
    for _ in 0..200 {
        let p = random_socp(&mut rng, 3.0);
        let o = solve_margin(&p, DEFAULT_TOL, 500).unwrap();
        let (lo, hi) = grid_oracle(&p, 3.0, 400_000);
        let expected = if lo > 0.1 {
            Some(SocpStatus::Feasible)
        } else if hi < -0.1 {
            Some(SocpStatus::Infeasible)
        } else {
            None
        };
        if let Some(e) = expected {
            decisive += 1;
            if e != o.status {
                mismatches += 1;
            }
        }
        if !(o.margin >= lo - 1e-4 && o.margin <= hi + 1e-9) {
            outside += 1;
        }
        match o.status {
            SocpStatus::Feasible => {
                feasible += 1;
                let x = o.point.as_ref().unwrap();
                if p.constraints.iter().any(|c| c.slack(x) < -1e-6) {
                    recheck_failures += 1;
                }
            }
            SocpStatus::Infeasible => infeasible += 1,
            SocpStatus::Indeterminate => mismatches += 1,
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: mismatches == 0 && recheck_failures == 0 && outside == 0 && within(t, 120),
        detail: format!(
            "200 problems ({feasible} feasible, {infeasible} infeasible, {decisive} outside the 0.1 band), \
             {mismatches} mismatches, {recheck_failures} re-check failures, {outside} margins outside the oracle bracket, {:.1} s",
            t.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------- 5

fn empirical_sinr() -> Outcome {
    let start = Instant::now();
    let cfg = reference_config(20.0);
    let opts = DesignOptions::default();
    let (mut designs, mut worst, mut seed) = (0, 0.0f64, 50_000u64);
    while designs < 20 && seed < 50_100 {
        let ch = sample_channels(&cfg, seed);
        seed += 1;
        let Ok(d) = design_proposed(&cfg, &ch, &opts) else {
            continue;
        };
        if !d.stage_two.converged {
            continue;
        }
        let t = &d.stage_two.transceivers;
        let analytic = all_sinrs(t, &ch, &cfg).unwrap();
        let empirical = simulate_transmission(t, &ch, &cfg, 100_000, seed).unwrap();
        for (a, e) in analytic
            .ul
            .iter()
            .chain(&analytic.dl)
            .zip(empirical.ul.iter().chain(&empirical.dl))
        {
            worst = worst.max((a - e).abs() / a);
        }
        designs += 1;
    }
    let t = start.elapsed();
    Outcome {
        pass: designs == 20 && worst <= 0.05 && within(t, 300),
        detail: format!(
            "{designs} converged designs at 20 dB, max relative error {worst:.3}, {:.1} s",
            t.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------- 6

fn mean_sum_rate(snr_db: f64, seeds: std::ops::Range<u64>) -> (f64, usize) {
    let cfg = reference_config(snr_db);
    let opts = DesignOptions::default();
    let rates: Vec<f64> = seeds
        .filter_map(|s| {
            let ch = sample_channels(&cfg, s);
            let d = design(Scheme::Proposed, &cfg, &ch, &opts).ok()?;
            sum_rate(&d.transceivers, &ch, &cfg).ok()
        })
        .collect();
    (rates.iter().sum::<f64>() / rates.len() as f64, rates.len())
}

fn dof_slope() -> Outcome {
    let start = Instant::now();
    let (r35, n35) = mean_sum_rate(35.0, 60_000..60_200);
    let (r45, n45) = mean_sum_rate(45.0, 60_000..60_200);
    let slope = (r45 - r35) * 3.01 / 10.0;
    let t = start.elapsed();
    Outcome {
        pass: n35 == 200 && n45 == 200 && (slope - 4.0).abs() <= 0.6 && within(t, 1800),
        detail: format!(
            "mean sum rate {r35:.2} at 35 dB, {r45:.2} at 45 dB; slope {slope:.3} per 3.01 dB, {:.1} s",
            t.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------- 7

fn qos_weighting() -> Outcome {
    let start = Instant::now();
    let mut cfg = reference_config(20.0);
    cfg.omega_ul[1] = vec![2.0];
    cfg.omega_dl[1] = vec![2.0];
    let opts = DesignOptions::default();
    let db = |x: f64| 10.0 * x.log10();
    let (mut favored, mut others, mut draws) = (0.0, 0.0, 0);
    for seed in 70_000..70_200 {
        let ch = sample_channels(&cfg, seed);
        let Ok(d) = design(Scheme::Proposed, &cfg, &ch, &opts) else {
            continue;
        };
        let s = all_sinrs(&d.transceivers, &ch, &cfg).unwrap();
        let j = cfg.offset(1);
        favored += 0.5 * (db(s.ul[j]) + db(s.dl[j]));
        let rest: Vec<f64> = (0..cfg.total_streams())
            .filter(|&i| i != j)
            .flat_map(|i| [db(s.ul[i]), db(s.dl[i])])
            .collect();
        others += rest.iter().sum::<f64>() / rest.len() as f64;
        draws += 1;
    }
    let gap = (favored - others) / draws as f64;
    let t = start.elapsed();
    Outcome {
        pass: draws == 200 && (gap - 3.0).abs() <= 1.0,
        detail: format!(
            "{draws} draws at 20 dB, user 2 ahead by {gap:.2} dB, {:.1} s",
            t.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------- 8

fn sweep_spec(n_r: usize, schemes: &str, snr: &str, trials: usize, seed: u64) -> SweepSpec {
    SweepSpec::from_toml_str(&format!(
        r#"
snr_db_points = {snr}
trials = {trials}
master_seed = {seed}
schemes = {schemes}

[base_config]
n_b = 4
n_r = {n_r}
n_k = [2, 2, 2]
l_k = [2, 1, 1]
"#
    ))
    .unwrap()
}

fn rates_of(records: &[twoway_sim::TrialRecord], scheme: Scheme) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.scheme == scheme)
        .filter_map(|r| r.sum_rate)
        .collect()
}

fn baseline_ordering() -> Outcome {
    let start = Instant::now();
    let opts = RunOptions::default();
    let wide = run_sweep(&sweep_spec(8, r#"["Proposed", "SdmaZf"]"#, "[25.0]", 200, 8), &opts).unwrap();
    let square = run_sweep(
        &sweep_spec(4, r#"["Proposed", "ChannelInversionNaive"]"#, "[25.0]", 200, 8),
        &opts,
    )
    .unwrap();
    let stats = |v: Vec<f64>| (v.len(), mean_stderr(&v).unwrap_or((f64::NAN, f64::NAN)));
    let (n_p8, (p8, sp8)) = stats(rates_of(&wide, Scheme::Proposed));
    let (n_sd, (sd, ssd)) = stats(rates_of(&wide, Scheme::SdmaZf));
    let (n_p4, (p4, sp4)) = stats(rates_of(&square, Scheme::Proposed));
    let (n_ci, (ci, sci)) = stats(rates_of(&square, Scheme::ChannelInversionNaive));
    let all = [n_p8, n_sd, n_p4, n_ci].iter().all(|&n| n == 200);
    let t = start.elapsed();
    Outcome {
        pass: all && p8 - sp8 > sd + ssd && p4 - sp4 > ci + sci,
        detail: format!(
            "N_R=8: proposed {p8:.2}±{sp8:.2} vs SDMA {sd:.2}±{ssd:.2}; \
             N_R=4: proposed {p4:.2}±{sp4:.2} vs channel inversion {ci:.2}±{sci:.2}; {:.1} s",
            t.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------- 9

fn harness_determinism() -> Outcome {
    let start = Instant::now();
    let mut spec = sweep_spec(
        4,
        r#"["Proposed", "ChannelInversionNaive", "SdmaZf"]"#,
        "[5.0, 20.0]",
        4,
        99,
    );
    spec.nb_points = Some(vec![4, 6]);
    let csv = |threads: Option<usize>| {
        let recs = run_sweep(
            &spec,
            &RunOptions {
                threads,
                ..Default::default()
            },
        )
        .unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, &spec, &recs).unwrap();
        out
    };
    let one = csv(Some(1));
    let runs = [csv(Some(1)), csv(Some(3)), csv(Some(8)), csv(None)];
    let identical = runs.iter().all(|r| *r == one);
    let t = start.elapsed();
    Outcome {
        pass: identical && !one.is_empty(),
        detail: format!(
            "{} bytes, 1/1/3/8/default threads identical: {identical}, {:.1} s",
            one.len(),
            t.as_secs_f64()
        ),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("alignment exactness", alignment_exactness),
        ("closed-form allocation vs grid oracle", allocation_oracle),
        ("monotone convergence", monotone_convergence),
        ("SOCP soundness vs grid oracle", socp_oracle),
        ("analytic vs empirical SINR", empirical_sinr),
        ("DoF slope", dof_slope),
        ("QoS weighting", qos_weighting),
        ("baseline ordering", baseline_ordering),
        ("harness determinism", harness_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
