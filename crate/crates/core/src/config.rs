//! Scenario constants and the plain-text `key = value` config format.
//!
//! Unknown keys are rejected so typos surface immediately. Any key that is
//! absent keeps its default. [`ScenarioConfig::to_text`] writes every key in a
//! fixed order; the dataset manifest hashes that text.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{ChannelModel, GridGeometry, Point};
use crate::problem::{LatencySpec, ObjectiveWeights, ProblemParams};
use crate::solvers::PowerGrid;
use crate::units::dbm_to_watts;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config: unknown key `{0}`")]
    UnknownKey(String),
    #[error("config: key `{key}` has unparsable value `{value}`")]
    Parse { key: String, value: String },
    #[error("config: key `{key}` is invalid: {reason}")]
    Invalid { key: String, reason: String },
    #[error("config: line {line} is not of the form `key = value`")]
    Syntax { line: usize },
    #[error("config: cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: GridGeometry,
    pub carrier_frequency_ghz: f64,
    pub bandwidth_hz: f64,
    /// Recorded for completeness; the simplified pathloss model ignores it.
    pub bs_antenna_height_m: f64,
    /// Recorded for completeness; the simplified pathloss model ignores it.
    pub vehicle_antenna_height_m: f64,
    pub vehicle_speed_kmh: f64,
    pub num_cue: usize,
    pub num_vue_pairs: usize,
    /// Mean vehicles per metre of lane for the Poisson drop.
    pub vehicle_density_per_m: f64,
    pub vue_pair_max_distance_m: f64,
    pub shadowing_v2i_db: f64,
    pub shadowing_v2v_db: f64,
    pub min_capacity_cue_bpshz: f64,
    pub max_power_cue_dbm: f64,
    pub max_power_vue_dbm: f64,
    pub min_power_cue_dbm: f64,
    pub min_power_vue_dbm: f64,
    pub noise_power_dbm: f64,
    pub packet_size_bits: f64,
    pub max_latency_s: f64,
    pub weight_w1: f64,
    pub weight_w2: f64,
    pub mc_samples_solver: usize,
    pub mc_samples_report: usize,
    pub power_levels_cue: usize,
    pub power_levels_vue: usize,
    pub power_include_zero: bool,
    pub candidate_cap: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        // 3GPP freeway/urban drop spacing is 2.5 s at the vehicle speed:
        // 30 km/h gives one vehicle every ~20.8 m per lane.
        let speed_kmh = 30.0;
        let spacing_m = 2.5 * speed_kmh / 3.6;
        Self {
            geometry: GridGeometry::default(),
            carrier_frequency_ghz: 2.0,
            bandwidth_hz: 10e6,
            bs_antenna_height_m: 25.0,
            vehicle_antenna_height_m: 1.5,
            vehicle_speed_kmh: speed_kmh,
            num_cue: 5,
            num_vue_pairs: 5,
            vehicle_density_per_m: 1.0 / spacing_m,
            vue_pair_max_distance_m: 50.0,
            shadowing_v2i_db: 8.0,
            shadowing_v2v_db: 3.0,
            min_capacity_cue_bpshz: 0.5,
            max_power_cue_dbm: 23.0,
            max_power_vue_dbm: 23.0,
            min_power_cue_dbm: 10.0,
            min_power_vue_dbm: 10.0,
            noise_power_dbm: -114.0,
            packet_size_bits: 6400.0,
            max_latency_s: 0.1,
            weight_w1: 1.0,
            weight_w2: 10.0,
            mc_samples_solver: 2000,
            mc_samples_report: 100_000,
            power_levels_cue: 4,
            power_levels_vue: 4,
            power_include_zero: false,
            candidate_cap: 10_000_000,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::Parse { key: key.into(), value: value.into() })
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| ConfigError::Parse { key: key.into(), value: value.into() })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::Parse { key: key.into(), value: value.into() }),
    }
}

impl ScenarioConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut bs_x = None;
        let mut bs_y = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            let g = &mut cfg.geometry;
            match key {
                "building_length_m" => g.building_length_m = parse_f64(key, value)?,
                "building_width_m" => g.building_width_m = parse_f64(key, value)?,
                "sidewalk_m" => g.sidewalk_m = parse_f64(key, value)?,
                "lane_width_m" => g.lane_width_m = parse_f64(key, value)?,
                "lanes_per_direction" => g.lanes_per_direction = parse_usize(key, value)?,
                "grid_rows" => g.grid_rows = parse_usize(key, value)?,
                "grid_cols" => g.grid_cols = parse_usize(key, value)?,
                "bs_x_m" => bs_x = Some(parse_f64(key, value)?),
                "bs_y_m" => bs_y = Some(parse_f64(key, value)?),
                "carrier_frequency_ghz" => cfg.carrier_frequency_ghz = parse_f64(key, value)?,
                "bandwidth_mhz" => cfg.bandwidth_hz = parse_f64(key, value)? * 1e6,
                "bs_antenna_height_m" => cfg.bs_antenna_height_m = parse_f64(key, value)?,
                "vehicle_antenna_height_m" => cfg.vehicle_antenna_height_m = parse_f64(key, value)?,
                "vehicle_speed_kmh" => cfg.vehicle_speed_kmh = parse_f64(key, value)?,
                "num_cue" => cfg.num_cue = parse_usize(key, value)?,
                "num_vue_pairs" => cfg.num_vue_pairs = parse_usize(key, value)?,
                "vehicle_density_per_m" => cfg.vehicle_density_per_m = parse_f64(key, value)?,
                "vue_pair_max_distance_m" => cfg.vue_pair_max_distance_m = parse_f64(key, value)?,
                "shadowing_v2i_db" => cfg.shadowing_v2i_db = parse_f64(key, value)?,
                "shadowing_v2v_db" => cfg.shadowing_v2v_db = parse_f64(key, value)?,
                "min_capacity_cue_bpshz" => cfg.min_capacity_cue_bpshz = parse_f64(key, value)?,
                "max_power_cue_dbm" => cfg.max_power_cue_dbm = parse_f64(key, value)?,
                "max_power_vue_dbm" => cfg.max_power_vue_dbm = parse_f64(key, value)?,
                "min_power_cue_dbm" => cfg.min_power_cue_dbm = parse_f64(key, value)?,
                "min_power_vue_dbm" => cfg.min_power_vue_dbm = parse_f64(key, value)?,
                "noise_power_dbm" => cfg.noise_power_dbm = parse_f64(key, value)?,
                "packet_size_bits" => cfg.packet_size_bits = parse_f64(key, value)?,
                "max_latency_ms" => cfg.max_latency_s = parse_f64(key, value)? / 1e3,
                "weight_w1" => cfg.weight_w1 = parse_f64(key, value)?,
                "weight_w2" => cfg.weight_w2 = parse_f64(key, value)?,
                "mc_samples_solver" => cfg.mc_samples_solver = parse_usize(key, value)?,
                "mc_samples_report" => cfg.mc_samples_report = parse_usize(key, value)?,
                "power_levels_cue" => cfg.power_levels_cue = parse_usize(key, value)?,
                "power_levels_vue" => cfg.power_levels_vue = parse_usize(key, value)?,
                "power_include_zero" => cfg.power_include_zero = parse_bool(key, value)?,
                "candidate_cap" => {
                    cfg.candidate_cap = value.parse().map_err(|_| ConfigError::Parse {
                        key: key.into(),
                        value: value.into(),
                    })?
                }
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        let center = cfg.geometry.region_center();
        if bs_x.is_some() || bs_y.is_some() {
            cfg.geometry.bs_position = Point::new(bs_x.unwrap_or(center.x), bs_y.unwrap_or(center.y));
        } else {
            cfg.geometry.bs_position = center;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry.validate()?;
        let positive = [
            ("carrier_frequency_ghz", self.carrier_frequency_ghz),
            ("bandwidth_mhz", self.bandwidth_hz),
            ("vehicle_density_per_m", self.vehicle_density_per_m),
            ("vue_pair_max_distance_m", self.vue_pair_max_distance_m),
            ("packet_size_bits", self.packet_size_bits),
            ("max_latency_ms", self.max_latency_s),
            ("weight_w1", self.weight_w1),
            ("weight_w2", self.weight_w2),
        ];
        for (key, v) in positive {
            if !(v > 0.0) {
                return Err(invalid(key, "must be strictly positive"));
            }
        }
        for (key, v) in [("shadowing_v2i_db", self.shadowing_v2i_db), ("shadowing_v2v_db", self.shadowing_v2v_db)] {
            if v < 0.0 {
                return Err(invalid(key, "must be nonnegative"));
            }
        }
        if self.min_capacity_cue_bpshz < 0.0 {
            return Err(invalid("min_capacity_cue_bpshz", "must be nonnegative"));
        }
        if self.num_vue_pairs == 0 {
            return Err(invalid("num_vue_pairs", "must be at least 1"));
        }
        if self.num_cue < self.num_vue_pairs {
            return Err(invalid("num_cue", "must be at least num_vue_pairs (full reuse matching)"));
        }
        if self.min_power_cue_dbm > self.max_power_cue_dbm {
            return Err(invalid("min_power_cue_dbm", "exceeds max_power_cue_dbm"));
        }
        if self.min_power_vue_dbm > self.max_power_vue_dbm {
            return Err(invalid("min_power_vue_dbm", "exceeds max_power_vue_dbm"));
        }
        if self.mc_samples_solver == 0 {
            return Err(invalid("mc_samples_solver", "must be at least 1"));
        }
        if self.mc_samples_report == 0 {
            return Err(invalid("mc_samples_report", "must be at least 1"));
        }
        if self.power_levels_cue == 0 {
            return Err(invalid("power_levels_cue", "must be at least 1"));
        }
        if self.power_levels_vue == 0 {
            return Err(invalid("power_levels_vue", "must be at least 1"));
        }
        Ok(())
    }

    /// Writes every key in canonical order. `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("building_length_m", g.building_length_m.to_string());
        kv("building_width_m", g.building_width_m.to_string());
        kv("sidewalk_m", g.sidewalk_m.to_string());
        kv("lane_width_m", g.lane_width_m.to_string());
        kv("lanes_per_direction", g.lanes_per_direction.to_string());
        kv("grid_rows", g.grid_rows.to_string());
        kv("grid_cols", g.grid_cols.to_string());
        kv("bs_x_m", g.bs_position.x.to_string());
        kv("bs_y_m", g.bs_position.y.to_string());
        kv("carrier_frequency_ghz", self.carrier_frequency_ghz.to_string());
        kv("bandwidth_mhz", (self.bandwidth_hz / 1e6).to_string());
        kv("bs_antenna_height_m", self.bs_antenna_height_m.to_string());
        kv("vehicle_antenna_height_m", self.vehicle_antenna_height_m.to_string());
        kv("vehicle_speed_kmh", self.vehicle_speed_kmh.to_string());
        kv("num_cue", self.num_cue.to_string());
        kv("num_vue_pairs", self.num_vue_pairs.to_string());
        kv("vehicle_density_per_m", self.vehicle_density_per_m.to_string());
        kv("vue_pair_max_distance_m", self.vue_pair_max_distance_m.to_string());
        kv("shadowing_v2i_db", self.shadowing_v2i_db.to_string());
        kv("shadowing_v2v_db", self.shadowing_v2v_db.to_string());
        kv("min_capacity_cue_bpshz", self.min_capacity_cue_bpshz.to_string());
        kv("max_power_cue_dbm", self.max_power_cue_dbm.to_string());
        kv("max_power_vue_dbm", self.max_power_vue_dbm.to_string());
        kv("min_power_cue_dbm", self.min_power_cue_dbm.to_string());
        kv("min_power_vue_dbm", self.min_power_vue_dbm.to_string());
        kv("noise_power_dbm", self.noise_power_dbm.to_string());
        kv("packet_size_bits", self.packet_size_bits.to_string());
        kv("max_latency_ms", (self.max_latency_s * 1e3).to_string());
        kv("weight_w1", self.weight_w1.to_string());
        kv("weight_w2", self.weight_w2.to_string());
        kv("mc_samples_solver", self.mc_samples_solver.to_string());
        kv("mc_samples_report", self.mc_samples_report.to_string());
        kv("power_levels_cue", self.power_levels_cue.to_string());
        kv("power_levels_vue", self.power_levels_vue.to_string());
        kv("power_include_zero", self.power_include_zero.to_string());
        kv("candidate_cap", self.candidate_cap.to_string());
        s
    }

    /// Hex SHA-256 of the canonical text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            geometry: self.geometry.clone(),
            carrier_frequency_ghz: self.carrier_frequency_ghz,
            shadowing_v2i_db: self.shadowing_v2i_db,
            shadowing_v2v_db: self.shadowing_v2v_db,
        }
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    pub fn p_max_cue_w(&self) -> f64 {
        dbm_to_watts(self.max_power_cue_dbm)
    }

    pub fn p_max_vue_w(&self) -> f64 {
        dbm_to_watts(self.max_power_vue_dbm)
    }

    /// Uplink spectrum is split orthogonally among the C-UEs.
    pub fn per_channel_bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz / self.num_cue as f64
    }

    pub fn problem_params(&self) -> ProblemParams {
        ProblemParams {
            noise_w: self.noise_watts(),
            p_max_cue_w: self.p_max_cue_w(),
            p_max_vue_w: self.p_max_vue_w(),
            min_capacity_cue: self.min_capacity_cue_bpshz,
            weights: ObjectiveWeights { w1: self.weight_w1, w2: self.weight_w2 },
            latency: LatencySpec {
                packet_bits: self.packet_size_bits,
                latency_s: self.max_latency_s,
                per_channel_bandwidth_hz: self.per_channel_bandwidth_hz(),
            },
        }
    }

    pub fn power_grid(&self) -> PowerGrid {
        PowerGrid {
            levels_cue: self.power_levels_cue,
            levels_vue: self.power_levels_vue,
            p_min_cue_w: dbm_to_watts(self.min_power_cue_dbm),
            p_max_cue_w: self.p_max_cue_w(),
            p_min_vue_w: dbm_to_watts(self.min_power_vue_dbm),
            p_max_vue_w: self.p_max_vue_w(),
            include_zero: self.power_include_zero,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_table_values() {
        let c = ScenarioConfig::default();
        assert_eq!((c.num_cue, c.num_vue_pairs), (5, 5));
        assert!((c.problem_params().latency.target_rate_bpshz() - 0.032).abs() < 1e-12);
        assert!((c.p_max_cue_w() - 0.199_526_231_496_887_9).abs() < 1e-12);
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let c = ScenarioConfig::default();
        let back = ScenarioConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.fingerprint(), back.fingerprint());
    }

    #[test]
    fn unknown_and_bad_keys_are_named() {
        assert_eq!(
            ScenarioConfig::parse("num_cue = 5\nfoo = 1\n"),
            Err(ConfigError::UnknownKey("foo".into()))
        );
        let err = ScenarioConfig::parse("noise_power_dbm = loud").unwrap_err();
        assert!(err.to_string().contains("noise_power_dbm"));
        let err = ScenarioConfig::parse("num_cue = 2\nnum_vue_pairs = 3").unwrap_err();
        assert!(err.to_string().contains("num_cue"));
        assert_eq!(ScenarioConfig::parse("just words"), Err(ConfigError::Syntax { line: 1 }));
    }

    #[test]
    fn comments_and_partial_files() {
        let c = ScenarioConfig::parse("# scenario\nnum_cue = 3 # C-UEs\nnum_vue_pairs=2\n\n").unwrap();
        assert_eq!((c.num_cue, c.num_vue_pairs), (3, 2));
        assert_eq!(c.geometry.bs_position, c.geometry.region_center());
    }
}
