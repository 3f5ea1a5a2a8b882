//! Helpers shared by the integration tests: random instances and
//! independent closed-form oracles.

#![allow(dead_code)]

use v2x_alloc::channel::{drop_vehicles, snapshot};
use v2x_alloc::{ChannelGains, ScenarioConfig};

/// Scenario with `m` C-UEs, `n` V-UE pairs and `levels` power levels per role.
pub fn scenario(m: usize, n: usize, levels: usize) -> ScenarioConfig {
    ScenarioConfig { num_cue: m, num_vue_pairs: n, power_levels_cue: levels, power_levels_vue: levels, ..Default::default() }
}

/// Random snapshot of the scenario for `seed`.
pub fn instance(cfg: &ScenarioConfig, seed: u64) -> ChannelGains {
    let top = drop_vehicles(
        &cfg.geometry,
        cfg.num_cue,
        cfg.num_vue_pairs,
        cfg.vehicle_density_per_m,
        cfg.vue_pair_max_distance_m,
        seed,
    )
    .expect("default density supplies the vehicles");
    snapshot(&top, &cfg.channel_model(), seed)
}

/// Exponential integral E1(x) for x > 0: power series below 1, Lentz's
/// continued fraction above.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0);
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// E[log2(1 + ρ̄·g)] for g ~ Exp(1): e^{1/ρ̄}·E1(1/ρ̄)/ln 2.
pub fn rayleigh_capacity(mean_snr: f64) -> f64 {
    let x = 1.0 / mean_snr;
    x.exp() * exp_integral_e1(x) / std::f64::consts::LN_2
}
