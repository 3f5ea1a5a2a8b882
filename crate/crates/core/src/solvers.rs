//! Allocation solvers: the exhaustive benchmark, fixed-power baselines and a
//! brute-force oracle for tiny instances.
//!
//! Powers are discretised on a per-role grid that is uniform in dB between
//! the minimum and maximum transmit power. All solvers evaluate candidates on
//! one shared [`FadingStream`] drawn from the caller's seed.

use std::cmp::Ordering;
use std::time::Instant;

use rand::Rng as _;
use thiserror::Error;

use crate::channel::LinkGains;
use crate::matching::{enumerate_matchings, matching_count};
use crate::par;
use crate::problem::{
    assemble_report, evaluate_on, objective, pair_stats, solo_cue_capacity, Allocation, CapacityReport, FadingStream, PairStats,
    ProblemError, ProblemParams,
};
use crate::rng::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("intractable size: search work {work} exceeds cap {cap}")]
    Intractable { work: u64, cap: u64 },
    #[error("need M >= N >= 1, got M={num_cue} N={num_vue}")]
    BadCounts { num_cue: usize, num_vue: usize },
    #[error("brute-force oracle is limited to M, N <= 3 and 3 power levels (got M={num_cue} N={num_vue} levels={levels})")]
    OracleTooLarge { num_cue: usize, num_vue: usize, levels: usize },
    #[error("invalid power grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Discrete transmit-power levels per role.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    pub levels_cue: usize,
    pub levels_vue: usize,
    pub p_min_cue_w: f64,
    pub p_max_cue_w: f64,
    pub p_min_vue_w: f64,
    pub p_max_vue_w: f64,
    /// Adds 0 W below the dB-uniform levels.
    pub include_zero: bool,
}

impl Default for PowerGrid {
    fn default() -> Self {
        crate::config::ScenarioConfig::default().power_grid()
    }
}

fn db_uniform_levels(count: usize, p_min: f64, p_max: f64, include_zero: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(count + usize::from(include_zero));
    if include_zero {
        out.push(0.0);
    }
    if count == 1 {
        out.push(p_max);
        return out;
    }
    let ratio = p_max / p_min;
    for i in 0..count {
        if i + 1 == count {
            out.push(p_max);
        } else {
            out.push(p_min * ratio.powf(i as f64 / (count - 1) as f64));
        }
    }
    out
}

impl PowerGrid {
    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels_cue = levels;
        self.levels_vue = levels;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.levels_cue == 0 || self.levels_vue == 0 {
            return Err(SolveError::BadGrid("levels must be at least 1".into()));
        }
        for (lo, hi, role) in [(self.p_min_cue_w, self.p_max_cue_w, "cue"), (self.p_min_vue_w, self.p_max_vue_w, "vue")] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(SolveError::BadGrid(format!("{role}: need 0 < p_min <= p_max")));
            }
        }
        Ok(())
    }

    pub fn cue_levels(&self) -> Vec<f64> {
        db_uniform_levels(self.levels_cue, self.p_min_cue_w, self.p_max_cue_w, self.include_zero)
    }

    pub fn vue_levels(&self) -> Vec<f64> {
        db_uniform_levels(self.levels_vue, self.p_min_vue_w, self.p_max_vue_w, self.include_zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub mc_samples: usize,
    /// Upper bound on the factored search work of the exhaustive solver.
    pub candidate_cap: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { mc_samples: 2000, candidate_cap: 10_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub allocation: Allocation,
    pub report: CapacityReport,
    /// Size of the scheme set the solver covered.
    pub candidates_evaluated: u64,
    pub wall_time_s: f64,
    /// Grid indices of the chosen powers, when the solver works on the grid.
    pub power_levels: Option<(Vec<usize>, Vec<usize>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    Max,
    Min,
    Random,
}

impl BaselineMode {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineMode::Max => "MaxPower",
            BaselineMode::Min => "MinPower",
            BaselineMode::Random => "RandomPower",
        }
    }
}

/// Candidate with its lexicographic key (matching class, then C-UE and
/// V-UE level indices).
#[derive(Debug, Clone)]
struct Candidate {
    objective: f64,
    matching_index: usize,
    levels: Vec<usize>,
}

impl Candidate {
    /// True if `self` should replace `other`: larger objective, or equal
    /// objective with a smaller key.
    fn beats(&self, other: &Candidate) -> bool {
        match self.objective.partial_cmp(&other.objective) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Equal) => {
                (self.matching_index, &self.levels).cmp(&(other.matching_index, &other.levels)) == Ordering::Less
            }
            _ => false,
        }
    }
}

fn keep_best(best: &mut Option<Candidate>, cand: Candidate) {
    if best.as_ref().is_none_or(|b| cand.beats(b)) {
        *best = Some(cand);
    }
}

fn check_counts(alpha: &LinkGains) -> Result<(usize, usize), SolveError> {
    let d = alpha.dims();
    if d.num_vue == 0 || d.num_cue < d.num_vue {
        return Err(SolveError::BadCounts { num_cue: d.num_cue, num_vue: d.num_vue });
    }
    Ok((d.num_cue, d.num_vue))
}

fn scheme_count(m: usize, n: usize, lc: usize, lv: usize) -> u64 {
    let mut total = matching_count(m, n) as u64;
    for _ in 0..m {
        total = total.saturating_mul(lc as u64);
    }
    for _ in 0..n {
        total = total.saturating_mul(lv as u64);
    }
    total
}

/// Per-pair and per-C-UE Monte-Carlo tables over all power levels.
struct Tables {
    n: usize,
    lc: usize,
    lv: usize,
    pairs: Vec<PairStats>,
    solo: Vec<f64>,
}

impl Tables {
    fn build(alpha: &LinkGains, stream: &FadingStream, params: &ProblemParams, pc: &[f64], pv: &[f64]) -> Self {
        let d = alpha.dims();
        let (m, n, lc, lv) = (d.num_cue, d.num_vue, pc.len(), pv.len());
        let target = params.latency.target_rate_bpshz();
        let per_pair: Vec<Vec<PairStats>> = par::map_range(m * n, |ms| {
            let (mi, si) = (ms / n, ms % n);
            let mut v = Vec::with_capacity(lc * lv);
            for &p_c in pc {
                for &p_v in pv {
                    v.push(pair_stats(alpha, stream, mi, si, p_c, p_v, params.noise_w, target));
                }
            }
            v
        });
        let solo = if m > n {
            (0..m).flat_map(|mi| pc.iter().map(move |&p| (mi, p))).map(|(mi, p)| {
                solo_cue_capacity(alpha, stream, mi, p, params.noise_w)
            })
            .collect()
        } else {
            Vec::new()
        };
        Self { n, lc, lv, pairs: per_pair.into_iter().flatten().collect(), solo }
    }

    #[inline]
    fn pair(&self, m: usize, s: usize, ic: usize, iv: usize) -> &PairStats {
        &self.pairs[((m * self.n + s) * self.lc + ic) * self.lv + iv]
    }

    #[inline]
    fn solo(&self, m: usize, ic: usize) -> f64 {
        self.solo[m * self.lc + ic]
    }
}

/// Best candidate for one matching.
///
/// The objective separates over reuse pairs except through ξ, which is set
/// by the weakest V-UE. Fixing which V-UE is weakest and its pair's levels
/// turns the rest into independent per-pair maximisations under a capacity
/// threshold, so the search is exact over the full scheme set.
fn best_for_matching(
    tables: &Tables,
    params: &ProblemParams,
    samples: usize,
    matching: &[usize],
    matching_index: usize,
    num_cue: usize,
    feasible_only: bool,
) -> Option<Candidate> {
    let n = matching.len();
    let (lc, lv) = (tables.lc, tables.lv);
    let r0 = params.min_capacity_cue;
    let w1 = params.weights.w1;

    // levels layout: [C-UE 0..M, V-UE 0..N]
    let mut base_levels = vec![0usize; num_cue + n];
    let mut c_cue = vec![0.0; num_cue];
    let mut matched = vec![false; num_cue];
    for &m in matching {
        matched[m] = true;
    }
    for m in (0..num_cue).filter(|&m| !matched[m]) {
        let mut best: Option<(usize, f64)> = None;
        for ic in 0..lc {
            let c = tables.solo(m, ic);
            if feasible_only && c < r0 {
                continue;
            }
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((ic, c));
            }
        }
        let (ic, c) = best?;
        base_levels[m] = ic;
        c_cue[m] = c;
    }

    let mut best: Option<Candidate> = None;
    let mut c_vue = vec![0.0; n];
    let mut levels = base_levels.clone();
    for s_star in 0..n {
        let m_star = matching[s_star];
        for ic_star in 0..lc {
            for iv_star in 0..lv {
                let st = tables.pair(m_star, s_star, ic_star, iv_star);
                if feasible_only && st.c_cue < r0 {
                    continue;
                }
                let threshold = st.c_vue;
                levels[m_star] = ic_star;
                levels[num_cue + s_star] = iv_star;
                c_cue[m_star] = st.c_cue;
                c_vue[s_star] = st.c_vue;
                let mut complete = true;
                for s in (0..n).filter(|&s| s != s_star) {
                    let m = matching[s];
                    let mut pick: Option<(usize, usize, f64)> = None;
                    for ic in 0..lc {
                        for iv in 0..lv {
                            let p = tables.pair(m, s, ic, iv);
                            if feasible_only && p.c_cue < r0 {
                                continue;
                            }
                            let allowed = if s < s_star { p.c_vue > threshold } else { p.c_vue >= threshold };
                            if !allowed {
                                continue;
                            }
                            let value = p.c_cue + w1 * p.c_vue;
                            if pick.is_none_or(|(_, _, b)| value > b) {
                                pick = Some((ic, iv, value));
                            }
                        }
                    }
                    match pick {
                        Some((ic, iv, _)) => {
                            let p = tables.pair(m, s, ic, iv);
                            levels[m] = ic;
                            levels[num_cue + s] = iv;
                            c_cue[m] = p.c_cue;
                            c_vue[s] = p.c_vue;
                        }
                        None => {
                            complete = false;
                            break;
                        }
                    }
                }
                if !complete {
                    continue;
                }
                let xi = st.xi_hits as f64 / samples as f64;
                let cand = Candidate {
                    objective: objective(&c_cue, &c_vue, xi, &params.weights),
                    matching_index,
                    levels: levels.clone(),
                };
                keep_best(&mut best, cand);
            }
        }
    }
    best
}

fn allocation_from_levels(matching: Vec<usize>, levels: &[usize], pc: &[f64], pv: &[f64], num_cue: usize) -> Allocation {
    Allocation {
        matching,
        p_cue: levels[..num_cue].iter().map(|&i| pc[i]).collect(),
        p_vue: levels[num_cue..].iter().map(|&i| pv[i]).collect(),
    }
}

/// Factored work estimate checked against the candidate cap.
pub fn search_work(num_cue: usize, num_vue: usize, grid: &PowerGrid) -> u64 {
    let combos = (grid.cue_levels().len() * grid.vue_levels().len()) as u64;
    (matching_count(num_cue, num_vue) as u64)
        .saturating_mul(num_vue as u64 * combos)
        .saturating_mul(num_vue as u64 * combos)
}

/// Exhaustive search over all full matchings and all grid power
/// combinations. Returns the best feasible candidate, or, when none is
/// feasible, the best candidate overall with `report.feasible == false`.
/// Ties go to the lexicographically smallest (matching, levels) key.
pub fn exhaustive_solve(
    alpha: &LinkGains,
    params: &ProblemParams,
    grid: &PowerGrid,
    settings: &SolverSettings,
    seed: u64,
) -> Result<SolverResult, SolveError> {
    let start = Instant::now();
    let (m, n) = check_counts(alpha)?;
    grid.validate()?;
    let work = search_work(m, n, grid);
    if work > settings.candidate_cap {
        return Err(SolveError::Intractable { work, cap: settings.candidate_cap });
    }
    let pc = grid.cue_levels();
    let pv = grid.vue_levels();
    let stream = FadingStream::generate(alpha.dims(), settings.mc_samples.max(1), seed);
    let tables = Tables::build(alpha, &stream, params, &pc, &pv);
    let matchings = enumerate_matchings(m, n);

    let search = |feasible_only: bool| {
        let per: Vec<Option<Candidate>> = par::map_range(matchings.len(), |i| {
            best_for_matching(&tables, params, stream.samples(), &matchings[i], i, m, feasible_only)
        });
        let mut best = None;
        for c in per.into_iter().flatten() {
            keep_best(&mut best, c);
        }
        best
    };
    let chosen = search(true).or_else(|| search(false)).expect("unconstrained search always has a candidate");
    let allocation = allocation_from_levels(matchings[chosen.matching_index].clone(), &chosen.levels, &pc, &pv, m);
    let report = evaluate_on(alpha, &allocation, params, &stream)?;
    Ok(SolverResult {
        allocation,
        report,
        candidates_evaluated: scheme_count(m, n, pc.len(), pv.len()),
        wall_time_s: start.elapsed().as_secs_f64(),
        power_levels: Some((chosen.levels[..m].to_vec(), chosen.levels[m..].to_vec())),
    })
}

/// Best matching under fixed powers: all at the maximum, all at the minimum,
/// or i.i.d. uniform in watts between them. Feasible matchings are
/// preferred.
pub fn fixed_power_baseline(
    alpha: &LinkGains,
    params: &ProblemParams,
    grid: &PowerGrid,
    mode: BaselineMode,
    settings: &SolverSettings,
    seed: u64,
) -> Result<SolverResult, SolveError> {
    let start = Instant::now();
    let (m, n) = check_counts(alpha)?;
    grid.validate()?;
    let (p_cue, p_vue) = match mode {
        BaselineMode::Max => (vec![grid.p_max_cue_w; m], vec![grid.p_max_vue_w; n]),
        BaselineMode::Min => (vec![grid.p_min_cue_w; m], vec![grid.p_min_vue_w; n]),
        BaselineMode::Random => {
            let mut rng = rng_from_seed(derive_seed(seed, stream::BASELINE, 0));
            let mut draw = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let pc = (0..m).map(|_| draw(grid.p_min_cue_w, grid.p_max_cue_w)).collect();
            let pv = (0..n).map(|_| draw(grid.p_min_vue_w, grid.p_max_vue_w)).collect();
            (pc, pv)
        }
    };
    let stream = FadingStream::generate(alpha.dims(), settings.mc_samples.max(1), seed);
    let matchings = enumerate_matchings(m, n);
    // Powers are fixed, so every matching draws on the same M·N pair stats.
    let target = params.latency.target_rate_bpshz();
    let pairs: Vec<PairStats> = par::map_range(m * n, |ms| {
        let (mi, si) = (ms / n, ms % n);
        pair_stats(alpha, &stream, mi, si, p_cue[mi], p_vue[si], params.noise_w, target)
    });
    let solo: Vec<f64> = if m > n {
        par::map_range(m, |mi| solo_cue_capacity(alpha, &stream, mi, p_cue[mi], params.noise_w))
    } else {
        Vec::new()
    };
    let dims = alpha.dims();
    let reports: Vec<CapacityReport> = matchings
        .iter()
        .map(|mat| {
            let a = Allocation::new(mat.clone(), p_cue.clone(), p_vue.clone());
            assemble_report(&a, dims, params, stream.samples(), |mi, si| pairs[mi * n + si], |mi| solo[mi])
        })
        .collect();
    let pick = |feasible_only: bool| {
        let mut best: Option<usize> = None;
        for (i, r) in reports.iter().enumerate() {
            if feasible_only && !r.feasible {
                continue;
            }
            if best.is_none_or(|b| r.objective > reports[b].objective) {
                best = Some(i);
            }
        }
        best
    };
    let i = pick(true).or_else(|| pick(false)).expect("at least one matching");
    Ok(SolverResult {
        allocation: Allocation::new(matchings[i].clone(), p_cue, p_vue),
        report: reports[i].clone(),
        candidates_evaluated: matchings.len() as u64,
        wall_time_s: start.elapsed().as_secs_f64(),
        power_levels: None,
    })
}

/// Plain enumeration of every (matching, power levels) candidate, each
/// evaluated from scratch. Only for tiny instances; used to check
/// [`exhaustive_solve`].
pub fn brute_force_oracle(
    alpha: &LinkGains,
    params: &ProblemParams,
    grid: &PowerGrid,
    settings: &SolverSettings,
    seed: u64,
) -> Result<SolverResult, SolveError> {
    let start = Instant::now();
    let (m, n) = check_counts(alpha)?;
    grid.validate()?;
    let pc = grid.cue_levels();
    let pv = grid.vue_levels();
    if m > 3 || n > 3 || pc.len() > 3 || pv.len() > 3 {
        return Err(SolveError::OracleTooLarge { num_cue: m, num_vue: n, levels: pc.len().max(pv.len()) });
    }
    let stream = FadingStream::generate(alpha.dims(), settings.mc_samples.max(1), seed);

    // Every tuple in [0, M)^N, keeping those with distinct entries; the
    // counter runs most-significant-first so the order is lexicographic.
    let mut matchings = Vec::new();
    for code in 0..m.pow(n as u32) {
        let digits: Vec<usize> = (0..n).rev().map(|p| code / m.pow(p as u32) % m).collect();
        let mut seen = digits.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() == n {
            matchings.push(digits);
        }
    }
    let radices: Vec<usize> = std::iter::repeat_n(pc.len(), m).chain(std::iter::repeat_n(pv.len(), n)).collect();
    let total: usize = radices.iter().product();

    let mut best_feasible: Option<(Candidate, CapacityReport)> = None;
    let mut best_any: Option<(Candidate, CapacityReport)> = None;
    let mut evaluated = 0u64;
    for (mi, matching) in matchings.iter().enumerate() {
        for code in 0..total {
            let mut levels = vec![0; radices.len()];
            let mut rest = code;
            for (slot, &r) in levels.iter_mut().zip(&radices).rev() {
                *slot = rest % r;
                rest /= r;
            }
            let alloc = allocation_from_levels(matching.clone(), &levels, &pc, &pv, m);
            let report = evaluate_on(alpha, &alloc, params, &stream)?;
            evaluated += 1;
            let cand = Candidate { objective: report.objective, matching_index: mi, levels };
            for (slot, wanted) in [(&mut best_feasible, report.feasible), (&mut best_any, true)] {
                if wanted && slot.as_ref().is_none_or(|(b, _)| cand.beats(b)) {
                    *slot = Some((cand.clone(), report.clone()));
                }
            }
        }
    }
    let (cand, report) = best_feasible.or(best_any).expect("nonempty candidate set");
    Ok(SolverResult {
        allocation: allocation_from_levels(matchings[cand.matching_index].clone(), &cand.levels, &pc, &pv, m),
        report,
        candidates_evaluated: evaluated,
        wall_time_s: start.elapsed().as_secs_f64(),
        power_levels: Some((cand.levels[..m].to_vec(), cand.levels[m..].to_vec())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LinkDims;

    fn params() -> ProblemParams {
        ProblemParams::default()
    }

    fn settings(mc: usize) -> SolverSettings {
        SolverSettings { mc_samples: mc, candidate_cap: 10_000_000 }
    }

    #[test]
    fn grid_levels_are_db_uniform() {
        let g = PowerGrid::default();
        let l = g.cue_levels();
        assert_eq!(l.len(), 4);
        assert_eq!(l[0], 0.01);
        assert_eq!(l[3], g.p_max_cue_w);
        let step = 10.0 * (l[1] / l[0]).log10();
        assert!((step - 13.0 / 3.0).abs() < 1e-9);
        assert!((10.0 * (l[2] / l[1]).log10() - step).abs() < 1e-9);
        assert_eq!(g.clone().with_levels(1).vue_levels(), vec![g.p_max_vue_w]);
        let z = PowerGrid { include_zero: true, ..g };
        assert_eq!(z.cue_levels()[0], 0.0);
        assert_eq!(z.cue_levels().len(), 5);
    }

    #[test]
    fn single_pair_matches_hand_comparison() {
        let alpha = LinkGains { cue_bs: vec![3e-12], vue: vec![2e-9], vue_bs: vec![1e-12], cue_vue: vec![5e-11] };
        let grid = PowerGrid::default().with_levels(2);
        let p = params();
        let res = exhaustive_solve(&alpha, &p, &grid, &settings(1000), 9).unwrap();
        assert_eq!(res.candidates_evaluated, 4);
        let stream = FadingStream::generate(alpha.dims(), 1000, 9);
        let mut best: Option<(f64, Allocation)> = None;
        for &pc in &grid.cue_levels() {
            for &pv in &grid.vue_levels() {
                let a = Allocation::new(vec![0], vec![pc], vec![pv]);
                let r = evaluate_on(&alpha, &a, &p, &stream).unwrap();
                if r.feasible && best.as_ref().is_none_or(|(o, _)| r.objective > *o) {
                    best = Some((r.objective, a));
                }
            }
        }
        let (obj, alloc) = best.expect("a feasible candidate exists");
        assert_eq!(res.allocation, alloc);
        assert_eq!(res.report.objective, obj);
    }

    #[test]
    fn degenerate_space_returns_the_only_candidate() {
        let alpha = LinkGains { cue_bs: vec![1e-10], vue: vec![1e-9], vue_bs: vec![1e-13], cue_vue: vec![1e-13] };
        let grid = PowerGrid::default().with_levels(1);
        let res = brute_force_oracle(&alpha, &params(), &grid, &settings(200), 1).unwrap();
        assert_eq!(res.candidates_evaluated, 1);
        assert_eq!(res.allocation.p_cue, vec![grid.p_max_cue_w]);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let alpha = LinkGains::filled(LinkDims::new(4, 2), 1e-10);
        let err = brute_force_oracle(&alpha, &params(), &PowerGrid::default(), &settings(10), 1).unwrap_err();
        assert!(matches!(err, SolveError::OracleTooLarge { .. }));
    }

    #[test]
    fn cap_is_enforced() {
        let alpha = LinkGains::filled(LinkDims::new(5, 5), 1e-10);
        let s = SolverSettings { mc_samples: 10, candidate_cap: 1000 };
        let err = exhaustive_solve(&alpha, &params(), &PowerGrid::default(), &s, 1).unwrap_err();
        assert!(matches!(err, SolveError::Intractable { .. }));
    }

    #[test]
    fn infeasible_instances_are_flagged_not_errors() {
        // C-UE signal far below noise: minimum capacity unattainable.
        let alpha = LinkGains { cue_bs: vec![1e-20], vue: vec![1e-9], vue_bs: vec![1e-12], cue_vue: vec![1e-12] };
        let res = exhaustive_solve(&alpha, &params(), &PowerGrid::default(), &settings(500), 3).unwrap();
        assert!(!res.report.feasible);
        let orc = brute_force_oracle(&alpha, &params(), &PowerGrid::default().with_levels(3), &settings(500), 3).unwrap();
        assert!(!orc.report.feasible);
    }

    #[test]
    fn baseline_powers() {
        let alpha = LinkGains::filled(LinkDims::new(3, 2), 1e-10);
        let g = PowerGrid::default();
        let p = params();
        let max = fixed_power_baseline(&alpha, &p, &g, BaselineMode::Max, &settings(100), 1).unwrap();
        assert!(max.allocation.p_cue.iter().chain(&max.allocation.p_vue).all(|&x| x == g.p_max_cue_w));
        let min = fixed_power_baseline(&alpha, &p, &g, BaselineMode::Min, &settings(100), 1).unwrap();
        assert!(min.allocation.p_cue.iter().chain(&min.allocation.p_vue).all(|&x| x == 0.01));
        let rnd = fixed_power_baseline(&alpha, &p, &g, BaselineMode::Random, &settings(100), 1).unwrap();
        assert!(rnd.allocation.p_cue.iter().all(|&x| (0.01..=g.p_max_cue_w).contains(&x)));
        assert_eq!(rnd, fixed_power_baseline(&alpha, &p, &g, BaselineMode::Random, &settings(100), 1).unwrap().with_time(rnd.wall_time_s));
    }

    impl SolverResult {
        fn with_time(mut self, t: f64) -> Self {
            self.wall_time_s = t;
            self
        }
    }
}
