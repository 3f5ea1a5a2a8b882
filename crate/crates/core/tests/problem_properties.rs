mod common;

use proptest::prelude::*;
use v2x_alloc::problem::{
    check_feasible, ergodic_capacities, evaluate, evaluate_on, latency_metric, objective, sinr, FadingStream, ProblemParams,
};
use v2x_alloc::{Allocation, LinkDims, LinkGains, ObjectiveWeights};

fn single_link(h: f64) -> LinkGains {
    LinkGains::from_flat(LinkDims::new(1, 1), &[h, 1e-9, 1e-12, 1e-12])
}

#[test]
fn e1_reference_values() {
    // Tabulated values of E1 (Abramowitz and Stegun, table 5.1).
    assert!((common::exp_integral_e1(0.5) - 0.559_773_594_8).abs() < 1e-9);
    assert!((common::exp_integral_e1(1.0) - 0.219_383_934_4).abs() < 1e-9);
    assert!((common::exp_integral_e1(2.0) - 0.048_900_510_7).abs() < 1e-9);
    assert!((common::exp_integral_e1(5.0) - 0.001_148_295_6).abs() < 1e-10);
}

#[test]
fn interference_free_capacity_matches_closed_form() {
    let params = ProblemParams { noise_w: 1e-14, ..Default::default() };
    let alloc = Allocation::new(vec![0], vec![0.1], vec![0.0]);
    let h = 3e-13;
    let (c, _) = ergodic_capacities(&single_link(h), &alloc, &params, 1_000_000, 5).unwrap();
    let exact = common::rayleigh_capacity(0.1 * h / 1e-14);
    assert!((c[0] / exact - 1.0).abs() <= 0.005, "{} vs {exact}", c[0]);
}

/// Independent per-realization transcription of the SINR formulas, the
/// capacities and the latency-compliance count.
fn oracle(alpha: &LinkGains, alloc: &Allocation, params: &ProblemParams, stream: &FadingStream) -> (Vec<f64>, Vec<f64>, f64) {
    let (m, n) = (alpha.cue_bs.len(), alpha.vue.len());
    let k = stream.samples();
    let mut per_sample_v = vec![vec![0.0; k]; n];
    let mut c_cue = vec![0.0; m];
    for i in 0..k {
        let g = stream.realization(i);
        for mm in 0..m {
            let mut interference = 0.0;
            for s in 0..n {
                if alloc.matching[s] == mm {
                    interference += alloc.p_vue[s] * alpha.vue_bs[s] * g.vue_bs[s];
                }
            }
            let gamma = alloc.p_cue[mm] * alpha.cue_bs[mm] * g.cue_bs[mm] / (params.noise_w + interference);
            c_cue[mm] += (1.0 + gamma).log2() / k as f64;
        }
        for s in 0..n {
            let mm = alloc.matching[s];
            let interference = alloc.p_cue[mm] * alpha.cue_vue[mm * n + s] * g.cue_vue[mm * n + s];
            let gamma = alloc.p_vue[s] * alpha.vue[s] * g.vue[s] / (params.noise_w + interference);
            per_sample_v[s][i] = (1.0 + gamma).log2();
        }
    }
    let c_vue: Vec<f64> = per_sample_v.iter().map(|v| v.iter().sum::<f64>() / k as f64).collect();
    let mut weakest = 0;
    for s in 1..n {
        if c_vue[s] < c_vue[weakest] {
            weakest = s;
        }
    }
    let target = params.latency.target_rate_bpshz();
    let xi = per_sample_v[weakest].iter().filter(|&&c| c >= target).count() as f64 / k as f64;
    (c_cue, c_vue, xi)
}

#[test]
fn latency_metric_matches_counting_oracle() {
    let cfg = common::scenario(2, 2, 4);
    let params = cfg.problem_params();
    // Raise the target so ξ is strictly between 0 and 1.
    let params = ProblemParams { latency: v2x_alloc::problem::LatencySpec { packet_bits: 6.4e6, ..params.latency }, ..params };
    let mut checked = 0;
    for seed in 0..6 {
        let g = common::instance(&cfg, seed);
        let alloc = Allocation::new(vec![1, 0], vec![0.2, 0.05], vec![0.02, 0.2]);
        let stream = FadingStream::generate(g.dims(), 100_000, 40 + seed);
        let (c_cue, c_vue, xi) = oracle(&g.large_scale, &alloc, &params, &stream);
        let report = evaluate_on(&g.large_scale, &alloc, &params, &stream).unwrap();
        let se = (xi * (1.0 - xi) / 100_000.0).sqrt().max(1e-9);
        assert!((report.xi - xi).abs() <= 2.0 * se, "ξ {} vs oracle {xi}", report.xi);
        assert_eq!(latency_metric(&g.large_scale, &alloc, &params, 100_000, 40 + seed).unwrap(), report.xi);
        for (a, b) in report.c_cue.iter().zip(&c_cue).chain(report.c_vue.iter().zip(&c_vue)) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
        checked += usize::from(xi > 0.0 && xi < 1.0);
    }
    assert!(checked > 0, "no instance exercised a fractional ξ");
}

#[test]
fn doubling_samples_stays_within_three_standard_errors() {
    let cfg = common::scenario(2, 2, 4);
    let params = cfg.problem_params();
    let g = common::instance(&cfg, 9);
    let alloc = Allocation::new(vec![0, 1], vec![0.2, 0.2], vec![0.1, 0.1]);
    let small = FadingStream::generate(g.dims(), 20_000, 3);
    let (c_small, _, _) = oracle(&g.large_scale, &alloc, &params, &small);
    let big = evaluate(&g.large_scale, &alloc, &params, 40_000, 3).unwrap();
    for m in 0..2 {
        let per: Vec<f64> = (0..small.samples())
            .map(|i| {
                let r = small.realization(i);
                let s = alloc.matching.iter().position(|&x| x == m).unwrap();
                let gamma = alloc.p_cue[m] * g.large_scale.cue_bs[m] * r.cue_bs[m]
                    / (params.noise_w + alloc.p_vue[s] * g.large_scale.vue_bs[s] * r.vue_bs[s]);
                (1.0 + gamma).log2()
            })
            .collect();
        let var = per.iter().map(|v| (v - c_small[m]).powi(2)).sum::<f64>() / (per.len() - 1) as f64;
        let se = (var / per.len() as f64).sqrt();
        assert!((big.c_cue[m] - c_small[m]).abs() < 3.0 * se, "C-UE {m}: {} vs {}", big.c_cue[m], c_small[m]);
    }
}

#[test]
fn feasibility_decisions_are_stable_across_seeds() {
    // Decisions may only differ for allocations whose weakest C-UE sits
    // within Monte-Carlo noise (0.02 bps/Hz) of the constraint.
    let cfg = common::scenario(5, 5, 4);
    let params = cfg.problem_params();
    let levels = [cfg.power_grid().cue_levels(), cfg.power_grid().vue_levels()];
    let mut decided = 0;
    for seed in 0..40u64 {
        let g = common::instance(&cfg, 500 + seed);
        let pick = |i: u64| levels[0][(seed as usize + i as usize) % 4];
        let alloc = Allocation::new(vec![4, 2, 0, 3, 1], (0..5).map(pick).collect(), (0..5).map(|i| levels[1][(i + 3 * seed as usize) % 4]).collect());
        let caps: Vec<f64> = (0..5).map(|k| evaluate(&g.large_scale, &alloc, &params, 10_000, 1000 * seed + k).unwrap().c_cue.iter().copied().fold(f64::INFINITY, f64::min)).collect();
        if caps.iter().all(|c| (c - params.min_capacity_cue).abs() > 0.02) {
            decided += 1;
            let first = check_feasible(&g.large_scale, &alloc, &params, 10_000, 1000 * seed).feasible;
            for k in 1..5 {
                assert_eq!(check_feasible(&g.large_scale, &alloc, &params, 10_000, 1000 * seed + k).feasible, first);
            }
        }
    }
    assert!(decided >= 30, "only {decided} allocations were clear of the noise band");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn capacity_is_monotone_in_own_power(seed in 0u64..1000, p in 0.0f64..0.2, dp in 0.0f64..0.1, who in 0usize..2) {
        let cfg = common::scenario(2, 2, 4);
        let params = cfg.problem_params();
        let g = common::instance(&cfg, seed);
        let base = Allocation::new(vec![1, 0], vec![0.1, 0.1], vec![0.1, 0.1]);
        let mut lo = base.clone();
        let mut hi = base;
        if who == 0 {
            lo.p_cue[0] = p;
            hi.p_cue[0] = p + dp;
        } else {
            lo.p_vue[0] = p;
            hi.p_vue[0] = p + dp;
        }
        let a = evaluate(&g.large_scale, &lo, &params, 2000, seed).unwrap();
        let b = evaluate(&g.large_scale, &hi, &params, 2000, seed).unwrap();
        if who == 0 {
            prop_assert!(b.c_cue[0] >= a.c_cue[0]);
        } else {
            prop_assert!(b.c_vue[0] >= a.c_vue[0]);
        }
    }

    #[test]
    fn xi_is_monotone_in_target_rate(seed in 0u64..1000, bits in 0.0f64..2e6, more in 0.0f64..2e6) {
        let cfg = common::scenario(3, 2, 4);
        let params = cfg.problem_params();
        let with_bits = |b: f64| ProblemParams { latency: v2x_alloc::problem::LatencySpec { packet_bits: b, ..params.latency }, ..params };
        let g = common::instance(&cfg, seed);
        let alloc = Allocation::new(vec![2, 0], vec![0.2, 0.1, 0.05], vec![0.05, 0.2]);
        let lo = latency_metric(&g.large_scale, &alloc, &with_bits(bits), 2000, seed).unwrap();
        let hi = latency_metric(&g.large_scale, &alloc, &with_bits(bits + more), 2000, seed).unwrap();
        prop_assert!(hi <= lo);
    }

    #[test]
    fn sinr_is_homogeneous(seed in 0u64..1000, c in 1e-3f64..1e3) {
        let cfg = common::scenario(3, 3, 4);
        let g = common::instance(&cfg, seed);
        let alloc = Allocation::new(vec![2, 0, 1], vec![0.2, 0.01, 0.1], vec![0.05, 0.2, 0.011]);
        let scaled = Allocation::new(alloc.matching.clone(), alloc.p_cue.iter().map(|p| p * c).collect(), alloc.p_vue.iter().map(|p| p * c).collect());
        let (a_c, a_v) = sinr(&g.combined, &alloc, 1e-14).unwrap();
        let (b_c, b_v) = sinr(&g.combined, &scaled, 1e-14 * c).unwrap();
        for (x, y) in a_c.iter().zip(&b_c).chain(a_v.iter().zip(&b_v)) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs());
        }
    }

    #[test]
    fn objective_is_linear_in_its_terms(
        c_cue in prop::collection::vec(0.0f64..10.0, 1..6),
        c_vue in prop::collection::vec(0.0f64..20.0, 1..6),
        xi in 0.0f64..1.0,
        w1 in 1e-3f64..10.0,
        w2 in 1e-3f64..100.0,
    ) {
        let w = ObjectiveWeights { w1, w2 };
        let expected = c_cue.iter().sum::<f64>() + w1 * c_vue.iter().sum::<f64>() + w2 * xi;
        prop_assert!((objective(&c_cue, &c_vue, xi, &w) - expected).abs() <= 1e-9 * expected.max(1.0));
    }
}
