//! Stage one: MS eigenmode beams, zero-forcing relay equalizer, BS
//! null-space beams and closed-form power allocation, chosen by
//! combinatorial search over beam selections.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, DEFAULT_RTOL};
use crate::model::{hstack, AlignedRelay, ChannelSet, SystemConfig};

/// Default cap on the number of jointly enumerated MS selections.
pub const DEFAULT_MAX_SELECTIONS: usize = 100_000;

/// Beam indices: per user, `L_k` increasing indices into the MS candidate
/// set; per stream (stacking order), an index into that stream's BS
/// candidate set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamSelection {
    pub ms_beams: Vec<Vec<usize>>,
    pub bs_beams: Vec<usize>,
}

/// Per-stream powers (linear), in stacking order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub lambda_ms: Vec<f64>,
    pub lambda_bs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOneResult {
    pub w_b: CMatrix,
    pub w_ms: Vec<CMatrix>,
    pub aligned: AlignedRelay,
    pub kappa_ul: Vec<f64>,
    pub kappa_dl: Vec<f64>,
    /// Min weighted first-hop SINR of the chosen selection.
    pub achieved_min_weighted_sinr: f64,
    pub selection: BeamSelection,
    pub allocation: PowerAllocation,
    /// False when the search cap forced the greedy fallback.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOneOptions {
    pub max_selections: usize,
    pub rtol: f64,
}

impl Default for StageOneOptions {
    fn default() -> Self {
        Self {
            max_selections: DEFAULT_MAX_SELECTIONS,
            rtol: DEFAULT_RTOL,
        }
    }
}

/// Right singular vectors of `h` whose singular value clears the rank
/// cutoff, as unit-norm columns in descending singular value order.
pub fn ms_candidate_beams(h: &CMatrix) -> Result<CMatrix> {
    let d = linalg::svd(h)?;
    let r = d.rank(h.nrows(), h.ncols(), DEFAULT_RTOL);
    Ok(d.right_vectors.columns(0, r).clone_owned())
}

/// `[H_R1 g_1^(1) … H_RK g_K^(L_K)]`, the stacked UL directions at the relay.
pub fn stacked_ul_directions(channels: &ChannelSet, candidates: &[CMatrix], ms_beams: &[Vec<usize>]) -> CMatrix {
    let cols: Vec<CMatrix> = channels
        .h_rk
        .iter()
        .zip(candidates)
        .zip(ms_beams)
        .flat_map(|((h, cand), beams)| beams.iter().map(move |&b| h * cand.columns(b, 1)))
        .collect();
    hstack(&cols)
}

/// `pinv(S)` for stacked directions `S` with full column rank.
pub fn zf_from_stacked(stacked: &CMatrix, rtol: f64) -> Result<CMatrix> {
    let d = linalg::svd(stacked)?;
    let (m, n) = stacked.shape();
    let r = d.rank(m, n, rtol);
    if r < n {
        return Err(Error::RankDeficient(format!(
            "stacked UL directions have rank {r} < {n}"
        )));
    }
    linalg::pinv(stacked, rtol)
}

/// Zero-forcing relay equalizer for the MS beams in `selection`.
pub fn rs_zf_equalizer(channels: &ChannelSet, selection: &BeamSelection, config: &SystemConfig) -> Result<CMatrix> {
    channels.check(config)?;
    let candidates = channels
        .h_rk
        .iter()
        .map(ms_candidate_beams)
        .collect::<Result<Vec<_>>>()?;
    for (k, beams) in selection.ms_beams.iter().enumerate() {
        if beams.len() != config.l_k[k] || beams.iter().any(|&b| b >= candidates[k].ncols()) {
            return Err(Error::InvalidConfig(format!(
                "MS beam selection for user {} is out of range",
                k + 1
            )));
        }
    }
    zf_from_stacked(
        &stacked_ul_directions(channels, &candidates, &selection.ms_beams),
        DEFAULT_RTOL,
    )
}

/// Rotates `c` so that `row · c` is real and nonnegative.
fn phase_align(row: &CMatrix, mut c: CMatrix) -> CMatrix {
    let z = (row * &c)[(0, 0)];
    let mag = z.norm();
    if mag > 0.0 {
        c *= z.conj() / mag;
    }
    c
}

/// BS beam candidates for global stream `j` (user `k`, stream `l`): an
/// orthonormal basis of `null(Ã H_RB)`, where `Ã` is `A_R` without row `j`,
/// followed by the normalized projection of the matched direction
/// `(a_j H_RB)ᴴ` onto that null space. Every candidate is rotated so that
/// `a_j H_RB c` is real and nonnegative.
pub fn bs_candidate_beams(a_r: &CMatrix, h_rb: &CMatrix, k: usize, l: usize, config: &SystemConfig) -> Result<CMatrix> {
    let j = config.global_index(k, l);
    let total = a_r.nrows();
    let others: Vec<usize> = (0..total).filter(|&i| i != j).collect();
    let a_tilde = a_r.select_rows(others.iter());
    let basis = linalg::null_space(&(a_tilde * h_rb), DEFAULT_RTOL)?;
    if basis.ncols() == 0 {
        return Err(Error::Infeasible(format!(
            "no BS null-space direction for stream ({},{}); N_B must be at least L",
            k + 1,
            l + 1
        )));
    }
    let row = a_r.rows(j, 1) * h_rb;
    let mut cols: Vec<CMatrix> = (0..basis.ncols())
        .map(|i| phase_align(&row, basis.columns(i, 1).clone_owned()))
        .collect();
    let proj = &basis * (basis.adjoint() * row.adjoint());
    let norm = proj.norm();
    if norm > f64::EPSILON * row.norm() {
        cols.push(phase_align(&row, proj / c64(norm, 0.0)));
    }
    Ok(hstack(&cols))
}

/// `κ_j = |a_j x_j|² / (N0 ‖a_j‖²)` for each column `x_j` of `dirs`.
pub fn kappa(a_r: &CMatrix, dirs: &CMatrix, n0: f64) -> Result<Vec<f64>> {
    (0..a_r.nrows())
        .map(|j| {
            let a2: f64 = a_r.row(j).iter().map(|z| z.norm_sqr()).sum();
            let num = (a_r.row(j) * dirs.column(j))[(0, 0)].norm_sqr();
            if a2 == 0.0 || num <= f64::EPSILON * f64::EPSILON * a2 * dirs.column(j).norm_squared() {
                Err(Error::ZeroGain(format!("stream {}", j + 1)))
            } else {
                Ok(num / (n0 * a2))
            }
        })
        .collect()
}

/// `(κ_U, κ_D)` for stacked UL directions `H_Rk g_k` and BS beams `g_B`.
pub fn effective_gains_kappa(
    a_r: &CMatrix,
    ul_dirs: &CMatrix,
    bs_beams: &CMatrix,
    h_rb: &CMatrix,
    n0: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((kappa(a_r, ul_dirs, n0)?, kappa(a_r, &(h_rb * bs_beams), n0)?))
}

/// Closed-form max-min allocation: each MS splits `P_k` in proportion to
/// `ω_U/κ_U` over its own streams, the BS splits `P_B` in proportion to
/// `ω_D/κ_D` over all streams.
pub fn power_allocation(kappa_ul: &[f64], kappa_dl: &[f64], config: &SystemConfig) -> Result<PowerAllocation> {
    if kappa_ul.iter().chain(kappa_dl).any(|&k| !(k > 0.0)) {
        return Err(Error::ZeroGain("κ must be strictly positive".into()));
    }
    let pairs = config.stream_pairs();
    let mut lambda_ms = vec![0.0; pairs.len()];
    for k in 0..config.num_users() {
        let off = config.offset(k);
        let lk = config.l_k[k];
        let denom: f64 = (0..lk).map(|q| config.omega_ul[k][q] / kappa_ul[off + q]).sum();
        for q in 0..lk {
            lambda_ms[off + q] = config.omega_ul[k][q] / kappa_ul[off + q] * config.p_k[k] / denom;
        }
    }
    let denom: f64 = pairs
        .iter()
        .enumerate()
        .map(|(j, &(k, l))| config.omega_dl[k][l] / kappa_dl[j])
        .sum();
    let lambda_bs = pairs
        .iter()
        .enumerate()
        .map(|(j, &(k, l))| config.omega_dl[k][l] / kappa_dl[j] * config.p_b / denom)
        .collect();
    Ok(PowerAllocation { lambda_ms, lambda_bs })
}

/// Min weighted first-hop SINR attained by the closed-form allocation:
/// `min( min_k P_k / Σ_q ω_U/κ_U , P_B / Σ ω_D/κ_D )`.
pub fn max_min_allocation_value(kappa_ul: &[f64], kappa_dl: &[f64], config: &SystemConfig) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..config.num_users() {
        let off = config.offset(k);
        let s: f64 = (0..config.l_k[k])
            .map(|q| config.omega_ul[k][q] / kappa_ul[off + q])
            .sum();
        best = best.min(config.p_k[k] / s);
    }
    let s: f64 = config
        .stream_pairs()
        .iter()
        .enumerate()
        .map(|(j, &(k, l))| config.omega_dl[k][l] / kappa_dl[j])
        .sum();
    best.min(config.p_b / s)
}

/// Min weighted first-hop SINR for an arbitrary allocation.
pub fn min_weighted_first_hop(
    kappa_ul: &[f64],
    kappa_dl: &[f64],
    alloc: &PowerAllocation,
    config: &SystemConfig,
) -> f64 {
    config
        .stream_pairs()
        .iter()
        .enumerate()
        .flat_map(|(j, &(k, l))| {
            [
                kappa_ul[j] * alloc.lambda_ms[j] / config.omega_ul[k][l],
                kappa_dl[j] * alloc.lambda_bs[j] / config.omega_dl[k][l],
            ]
        })
        .fold(f64::INFINITY, f64::min)
}

/// All `r`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for m in i + 1..r {
            idx[m] = idx[m - 1] + 1;
        }
    }
}

/// Evaluation of one MS selection with its best BS beams.
struct Evaluated {
    objective: f64,
    a_r: CMatrix,
    ul_dirs: CMatrix,
    bs_cands: Vec<CMatrix>,
    bs_beams: Vec<usize>,
    kappa_ul: Vec<f64>,
    kappa_dl: Vec<f64>,
}

fn evaluate(
    config: &SystemConfig,
    channels: &ChannelSet,
    candidates: &[CMatrix],
    ms_beams: &[Vec<usize>],
    rtol: f64,
) -> Option<Evaluated> {
    let ul_dirs = stacked_ul_directions(channels, candidates, ms_beams);
    let a_r = zf_from_stacked(&ul_dirs, rtol).ok()?;
    let kappa_ul = kappa(&a_r, &ul_dirs, config.n0).ok()?;
    let mut bs_cands = Vec::with_capacity(kappa_ul.len());
    let mut bs_beams = Vec::with_capacity(kappa_ul.len());
    let mut kappa_dl = Vec::with_capacity(kappa_ul.len());
    for (k, l) in config.stream_pairs() {
        let j = config.global_index(k, l);
        let cand = bs_candidate_beams(&a_r, &channels.h_rb, k, l, config).ok()?;
        let row = a_r.rows(j, 1) * &channels.h_rb;
        let gains = row * &cand;
        // each stream's κ_D only depends on its own beam and the objective is
        // monotone in every κ_D, so the joint argmax is separable
        let mut best = 0;
        for c in 1..cand.ncols() {
            if gains[(0, c)].norm_sqr() > gains[(0, best)].norm_sqr() {
                best = c;
            }
        }
        let a2: f64 = a_r.row(j).iter().map(|z| z.norm_sqr()).sum();
        let kd = gains[(0, best)].norm_sqr() / (config.n0 * a2);
        if !(kd > 0.0) {
            return None;
        }
        kappa_dl.push(kd);
        bs_beams.push(best);
        bs_cands.push(cand);
    }
    let objective = max_min_allocation_value(&kappa_ul, &kappa_dl, config);
    Some(Evaluated {
        objective,
        a_r,
        ul_dirs,
        bs_cands,
        bs_beams,
        kappa_ul,
        kappa_dl,
    })
}

/// Exhaustive search over MS beam subsets (users jointly, lexicographic
/// order, first maximizer kept) with the best BS beam per stream. Falls back
/// to greedy per-user refinement when the joint count exceeds the cap.
pub fn stage_one_search(config: &SystemConfig, channels: &ChannelSet) -> Result<StageOneResult> {
    stage_one_search_with(config, channels, &StageOneOptions::default())
}

pub fn stage_one_search_with(
    config: &SystemConfig,
    channels: &ChannelSet,
    opts: &StageOneOptions,
) -> Result<StageOneResult> {
    config.validate()?;
    channels.check(config)?;
    let candidates = channels
        .h_rk
        .iter()
        .map(ms_candidate_beams)
        .collect::<Result<Vec<_>>>()?;
    let per_user: Vec<Vec<Vec<usize>>> = candidates
        .iter()
        .zip(&config.l_k)
        .map(|(c, &lk)| combinations(c.ncols(), lk))
        .collect();
    if per_user.iter().any(|c| c.is_empty()) {
        return Err(Error::NoAdmissibleSelection);
    }
    let total = per_user
        .iter()
        .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
        .unwrap_or(usize::MAX);

    let mut best: Option<(Vec<Vec<usize>>, Evaluated)> = None;
    let consider = |sel: Vec<Vec<usize>>, best: &mut Option<(Vec<Vec<usize>>, Evaluated)>| {
        if let Some(ev) = evaluate(config, channels, &candidates, &sel, opts.rtol) {
            if best.as_ref().is_none_or(|(_, b)| ev.objective > b.objective) {
                *best = Some((sel, ev));
            }
        }
    };

    let exhaustive = total <= opts.max_selections;
    if exhaustive {
        let mut counter = vec![0usize; per_user.len()];
        'outer: loop {
            let sel: Vec<Vec<usize>> = counter.iter().zip(&per_user).map(|(&i, c)| c[i].clone()).collect();
            consider(sel, &mut best);
            // odometer with the last user varying fastest
            let mut u = per_user.len();
            loop {
                if u == 0 {
                    break 'outer;
                }
                u -= 1;
                counter[u] += 1;
                if counter[u] < per_user[u].len() {
                    break;
                }
                counter[u] = 0;
            }
        }
    } else {
        log::warn!("stage one: {total} MS selections exceed the cap, using greedy per-user search");
        let mut current: Vec<usize> = vec![0; per_user.len()];
        for u in 0..per_user.len() {
            let mut local_best: Option<(usize, f64)> = None;
            for i in 0..per_user[u].len() {
                let mut trial = current.clone();
                trial[u] = i;
                let sel: Vec<Vec<usize>> = trial.iter().zip(&per_user).map(|(&i, c)| c[i].clone()).collect();
                if let Some(ev) = evaluate(config, channels, &candidates, &sel, opts.rtol) {
                    if local_best.is_none_or(|(_, o)| ev.objective > o) {
                        local_best = Some((i, ev.objective));
                    }
                }
            }
            if let Some((i, _)) = local_best {
                current[u] = i;
            }
        }
        let sel: Vec<Vec<usize>> = current.iter().zip(&per_user).map(|(&i, c)| c[i].clone()).collect();
        consider(sel, &mut best);
    }

    let (ms_beams, ev) = best.ok_or(Error::NoAdmissibleSelection)?;
    build_result(config, channels, &candidates, ms_beams, ev, exhaustive)
}

fn build_result(
    config: &SystemConfig,
    channels: &ChannelSet,
    candidates: &[CMatrix],
    ms_beams: Vec<Vec<usize>>,
    ev: Evaluated,
    exhaustive: bool,
) -> Result<StageOneResult> {
    let allocation = power_allocation(&ev.kappa_ul, &ev.kappa_dl, config)?;
    let l = config.total_streams();

    let mut w_ms = Vec::with_capacity(config.num_users());
    for (k, beams) in ms_beams.iter().enumerate() {
        let off = config.offset(k);
        let cols: Vec<CMatrix> = beams
            .iter()
            .enumerate()
            .map(|(q, &b)| candidates[k].columns(b, 1) * c64(allocation.lambda_ms[off + q].sqrt(), 0.0))
            .collect();
        w_ms.push(hstack(&cols));
    }
    let mut w_b = CMatrix::zeros(config.n_b, l);
    for j in 0..l {
        let g = ev.bs_cands[j].column(ev.bs_beams[j]) * c64(allocation.lambda_bs[j].sqrt(), 0.0);
        w_b.set_column(j, &g);
    }

    let ul = &ev.a_r * hstack(&channels.h_rk.iter().zip(&w_ms).map(|(h, w)| h * w).collect::<Vec<_>>());
    let dl = &ev.a_r * &channels.h_rb * &w_b;
    let phi: Vec<Complex64> = (0..l).map(|j| ul[(j, j)]).collect();
    let psi: Vec<Complex64> = (0..l).map(|j| dl[(j, j)]).collect();
    debug_assert!(ev.ul_dirs.ncols() == l);

    Ok(StageOneResult {
        w_b,
        w_ms,
        aligned: AlignedRelay { a_r: ev.a_r, phi, psi },
        achieved_min_weighted_sinr: ev.objective,
        kappa_ul: ev.kappa_ul,
        kappa_dl: ev.kappa_dl,
        selection: BeamSelection {
            ms_beams,
            bs_beams: ev.bs_beams,
        },
        allocation,
        exhaustive,
    })
}
