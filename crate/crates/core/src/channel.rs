//! Manhattan-grid topology and channel gains.
//!
//! Every link gain is `h = α · g` with α the large-scale part (pathloss and
//! log-normal shadowing) and g a unit-mean exponential fast-fading power.
//!
//! V2I links use `128.1 + 37.6·log10(d_km)` with 8 dB shadowing. V2V links
//! use a two-regime street model with 3 dB shadowing: when both ends are on
//! the same street the LOS law `22.7·log10(d) + 41 + 20·log10(f_GHz / 5)`
//! applies to the Euclidean distance; otherwise the same law is applied to
//! the Manhattan distance plus a fixed 20 dB corner loss. All distances are
//! floored at 1 m. Antenna heights are carried in the config but this model
//! does not use them.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, Normal, Poisson};
use thiserror::Error;

use crate::config::ConfigError;
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};

pub const MIN_DISTANCE_M: f64 = 1.0;
pub const NLOS_CORNER_LOSS_DB: f64 = 20.0;
const DROP_ATTEMPTS: u64 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("need M >= N >= 1, got M={num_cue} N={num_vue}")]
    BadCounts { num_cue: usize, num_vue: usize },
    #[error("vehicle density must be positive, got {0}")]
    BadDensity(f64),
    #[error("density too low: could not place {needed} vehicles with {pairs} V2V pairs after {attempts} drops")]
    DensityTooLow { needed: usize, pairs: usize, attempts: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn manhattan(&self, other: &Point) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

/// Road layout: a `grid_rows × grid_cols` array of building blocks with a
/// street of `2 · lanes_per_direction` lanes on every side.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    pub building_length_m: f64,
    pub building_width_m: f64,
    /// Part of the block footprint; kept for reporting.
    pub sidewalk_m: f64,
    pub lane_width_m: f64,
    pub lanes_per_direction: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub bs_position: Point,
}

impl Default for GridGeometry {
    fn default() -> Self {
        let mut g = Self {
            building_length_m: 413.0,
            building_width_m: 30.0,
            sidewalk_m: 3.0,
            lane_width_m: 3.5,
            lanes_per_direction: 2,
            grid_rows: 3,
            grid_cols: 3,
            bs_position: Point::new(0.0, 0.0),
        };
        g.bs_position = g.region_center();
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Runs along x.
    Horizontal,
    /// Runs along y.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Street {
    pub orientation: Orientation,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LaneRef {
    pub street: Street,
    pub lane: usize,
}

impl GridGeometry {
    pub fn road_width_m(&self) -> f64 {
        2.0 * self.lanes_per_direction as f64 * self.lane_width_m
    }

    pub fn width_m(&self) -> f64 {
        self.grid_cols as f64 * self.building_length_m + (self.grid_cols + 1) as f64 * self.road_width_m()
    }

    pub fn height_m(&self) -> f64 {
        self.grid_rows as f64 * self.building_width_m + (self.grid_rows + 1) as f64 * self.road_width_m()
    }

    pub fn region_center(&self) -> Point {
        Point::new(self.width_m() / 2.0, self.height_m() / 2.0)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width_m()).contains(&p.x) && (0.0..=self.height_m()).contains(&p.y)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let lengths = [
            ("building_length_m", self.building_length_m),
            ("building_width_m", self.building_width_m),
            ("sidewalk_m", self.sidewalk_m),
            ("lane_width_m", self.lane_width_m),
        ];
        for (key, v) in lengths {
            if !(v > 0.0) {
                return Err(ConfigError::Invalid { key: key.into(), reason: "must be strictly positive".into() });
            }
        }
        for (key, v) in [
            ("lanes_per_direction", self.lanes_per_direction),
            ("grid_rows", self.grid_rows),
            ("grid_cols", self.grid_cols),
        ] {
            if v == 0 {
                return Err(ConfigError::Invalid { key: key.into(), reason: "must be at least 1".into() });
            }
        }
        if !self.contains(&self.bs_position) {
            return Err(ConfigError::Invalid {
                key: "bs_x_m".into(),
                reason: "base station lies outside the simulated region".into(),
            });
        }
        Ok(())
    }

    fn lanes_per_street(&self) -> usize {
        2 * self.lanes_per_direction
    }

    /// All lanes, horizontal streets first.
    pub fn lanes(&self) -> Vec<LaneRef> {
        let mut out = Vec::new();
        for (orientation, count) in [
            (Orientation::Horizontal, self.grid_rows + 1),
            (Orientation::Vertical, self.grid_cols + 1),
        ] {
            for index in 0..count {
                for lane in 0..self.lanes_per_street() {
                    out.push(LaneRef { street: Street { orientation, index }, lane });
                }
            }
        }
        out
    }

    /// Lane centre-line offset across the street and its length.
    fn lane_line(&self, lane: &LaneRef) -> (f64, f64) {
        let road = self.road_width_m();
        let offset = (lane.lane as f64 + 0.5) * self.lane_width_m;
        match lane.street.orientation {
            Orientation::Horizontal => {
                (lane.street.index as f64 * (self.building_width_m + road) + offset, self.width_m())
            }
            Orientation::Vertical => {
                (lane.street.index as f64 * (self.building_length_m + road) + offset, self.height_m())
            }
        }
    }

    pub fn lane_length_m(&self, lane: &LaneRef) -> f64 {
        self.lane_line(lane).1
    }

    /// Point at arc position `t` metres along `lane`.
    pub fn point_on_lane(&self, lane: &LaneRef, t: f64) -> Point {
        let (across, _) = self.lane_line(lane);
        match lane.street.orientation {
            Orientation::Horizontal => Point::new(t, across),
            Orientation::Vertical => Point::new(across, t),
        }
    }

    pub fn is_on_lane(&self, p: &Point, lane: &LaneRef) -> bool {
        let (across, len) = self.lane_line(lane);
        let (a, t) = match lane.street.orientation {
            Orientation::Horizontal => (p.y, p.x),
            Orientation::Vertical => (p.x, p.y),
        };
        (a - across).abs() < 1e-9 && (-1e-9..=len + 1e-9).contains(&t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle {
    pub position: Point,
    pub lane: LaneRef,
}

/// One network drop: M C-UEs and N V-UE transmitter/receiver pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub cues: Vec<Vehicle>,
    pub vue_tx: Vec<Vehicle>,
    pub vue_rx: Vec<Vehicle>,
    /// Vehicles dropped in total, including idle ones.
    pub dropped: usize,
}

impl Topology {
    pub fn dims(&self) -> LinkDims {
        LinkDims { num_cue: self.cues.len(), num_vue: self.vue_tx.len() }
    }
}

/// Link counts of a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkDims {
    pub num_cue: usize,
    pub num_vue: usize,
}

impl LinkDims {
    pub const fn new(num_cue: usize, num_vue: usize) -> Self {
        Self { num_cue, num_vue }
    }

    /// Entries in one [`LinkGains`]: `M + N + N + M·N`.
    pub fn link_count(&self) -> usize {
        self.num_cue + 2 * self.num_vue + self.num_cue * self.num_vue
    }
}

/// Per-link scalar gains in declaration order: C-UE→BS, V-UE tx→rx,
/// V-UE tx→BS, C-UE→V-UE rx (row-major `M × N`).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub cue_bs: Vec<f64>,
    pub vue: Vec<f64>,
    pub vue_bs: Vec<f64>,
    pub cue_vue: Vec<f64>,
}

impl LinkGains {
    pub fn filled(dims: LinkDims, value: f64) -> Self {
        Self {
            cue_bs: vec![value; dims.num_cue],
            vue: vec![value; dims.num_vue],
            vue_bs: vec![value; dims.num_vue],
            cue_vue: vec![value; dims.num_cue * dims.num_vue],
        }
    }

    /// Builds from a flat slice in declaration order.
    pub fn from_flat(dims: LinkDims, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), dims.link_count(), "flat gain length");
        let (m, n) = (dims.num_cue, dims.num_vue);
        Self {
            cue_bs: flat[..m].to_vec(),
            vue: flat[m..m + n].to_vec(),
            vue_bs: flat[m + n..m + 2 * n].to_vec(),
            cue_vue: flat[m + 2 * n..].to_vec(),
        }
    }

    pub fn dims(&self) -> LinkDims {
        LinkDims { num_cue: self.cue_bs.len(), num_vue: self.vue.len() }
    }

    #[inline]
    pub fn cue_vue_at(&self, m: usize, s: usize) -> f64 {
        self.cue_vue[m * self.vue.len() + s]
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.cue_bs.iter().chain(&self.vue).chain(&self.vue_bs).chain(&self.cue_vue)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.cue_bs
            .iter_mut()
            .chain(self.vue.iter_mut())
            .chain(self.vue_bs.iter_mut())
            .chain(self.cue_vue.iter_mut())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }

    pub fn zip_with(&self, other: &LinkGains, f: impl Fn(f64, f64) -> f64) -> LinkGains {
        assert_eq!(self.dims(), other.dims());
        let flat: Vec<f64> = self.iter().zip(other.iter()).map(|(a, b)| f(*a, *b)).collect();
        LinkGains::from_flat(self.dims(), &flat)
    }

    /// Name of the first non-finite or non-positive entry, if any.
    pub fn first_invalid(&self) -> Option<String> {
        let groups: [(&str, &Vec<f64>); 4] =
            [("cue_bs", &self.cue_bs), ("vue", &self.vue), ("vue_bs", &self.vue_bs), ("cue_vue", &self.cue_vue)];
        for (name, v) in groups {
            if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                return Some(format!("{name}[{i}]"));
            }
        }
        None
    }
}

/// Large-scale α, fast-fade g and their product h for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGains {
    pub large_scale: LinkGains,
    pub fast_fade: LinkGains,
    pub combined: LinkGains,
}

impl ChannelGains {
    pub fn new(large_scale: LinkGains, fast_fade: LinkGains) -> Self {
        let combined = large_scale.zip_with(&fast_fade, |a, g| a * g);
        Self { large_scale, fast_fade, combined }
    }

    pub fn dims(&self) -> LinkDims {
        self.large_scale.dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    V2i,
    V2vLos,
    V2vNlos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub geometry: GridGeometry,
    pub carrier_frequency_ghz: f64,
    pub shadowing_v2i_db: f64,
    pub shadowing_v2v_db: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        crate::config::ScenarioConfig::default().channel_model()
    }
}

pub fn v2i_pathloss_db(distance_m: f64) -> f64 {
    let d_km = distance_m.max(MIN_DISTANCE_M) / 1000.0;
    128.1 + 37.6 * d_km.log10()
}

pub fn v2v_los_pathloss_db(distance_m: f64, carrier_ghz: f64) -> f64 {
    22.7 * distance_m.max(MIN_DISTANCE_M).log10() + 41.0 + 20.0 * (carrier_ghz / 5.0).log10()
}

/// Pathloss in dB. For `V2vNlos` pass the Manhattan distance.
pub fn pathloss_db(kind: LinkKind, distance_m: f64, carrier_ghz: f64) -> f64 {
    match kind {
        LinkKind::V2i => v2i_pathloss_db(distance_m),
        LinkKind::V2vLos => v2v_los_pathloss_db(distance_m, carrier_ghz),
        LinkKind::V2vNlos => v2v_los_pathloss_db(distance_m, carrier_ghz) + NLOS_CORNER_LOSS_DB,
    }
}

impl ChannelModel {
    fn v2v_link(&self, a: &Vehicle, b: &Vehicle) -> f64 {
        if a.lane.street == b.lane.street {
            pathloss_db(LinkKind::V2vLos, a.position.distance(&b.position), self.carrier_frequency_ghz)
        } else {
            pathloss_db(LinkKind::V2vNlos, a.position.manhattan(&b.position), self.carrier_frequency_ghz)
        }
    }

    fn v2i_link(&self, a: &Vehicle) -> f64 {
        v2i_pathloss_db(a.position.distance(&self.geometry.bs_position))
    }

    /// Pathloss of every link in declaration order, without shadowing.
    pub fn pathloss(&self, topology: &Topology) -> LinkGains {
        let cue_bs = topology.cues.iter().map(|c| self.v2i_link(c)).collect();
        let vue = topology.vue_tx.iter().zip(&topology.vue_rx).map(|(t, r)| self.v2v_link(t, r)).collect();
        let vue_bs = topology.vue_tx.iter().map(|t| self.v2i_link(t)).collect();
        let cue_vue = topology
            .cues
            .iter()
            .flat_map(|c| topology.vue_rx.iter().map(move |r| (c, r)))
            .map(|(c, r)| self.v2v_link(c, r))
            .collect();
        LinkGains { cue_bs, vue, vue_bs, cue_vue }
    }
}

/// Poisson-drops vehicles on every lane and assigns roles at random.
///
/// V-UE receivers are picked among vehicles within `pair_max_distance_m` of
/// their transmitter. If a drop cannot supply `M + 2N` vehicles with `N`
/// such pairs it is redrawn, up to a fixed number of attempts.
pub fn drop_vehicles(
    geometry: &GridGeometry,
    num_cue: usize,
    num_vue: usize,
    density_per_m: f64,
    pair_max_distance_m: f64,
    seed: u64,
) -> Result<Topology, ChannelError> {
    if num_vue == 0 || num_cue < num_vue {
        return Err(ChannelError::BadCounts { num_cue, num_vue });
    }
    if !(density_per_m > 0.0) {
        return Err(ChannelError::BadDensity(density_per_m));
    }
    let lanes = geometry.lanes();
    for attempt in 0..DROP_ATTEMPTS {
        let mut rng = rng_from_seed(derive_seed(seed, stream::TOPOLOGY, attempt));
        let mut vehicles = Vec::new();
        for lane in &lanes {
            let len = geometry.lane_length_m(lane);
            let poisson = Poisson::new(density_per_m * len).expect("positive Poisson mean");
            let count = poisson.sample(&mut rng) as usize;
            for _ in 0..count {
                let t = rng.random_range(0.0..len);
                vehicles.push(Vehicle { position: geometry.point_on_lane(lane, t), lane: *lane });
            }
        }
        if let Some(top) = assign_roles(&vehicles, num_cue, num_vue, pair_max_distance_m, &mut rng) {
            return Ok(top);
        }
    }
    Err(ChannelError::DensityTooLow { needed: num_cue + 2 * num_vue, pairs: num_vue, attempts: DROP_ATTEMPTS })
}

fn assign_roles(
    vehicles: &[Vehicle],
    num_cue: usize,
    num_vue: usize,
    pair_max_distance_m: f64,
    rng: &mut Rng,
) -> Option<Topology> {
    if vehicles.len() < num_cue + 2 * num_vue {
        return None;
    }
    let mut order: Vec<usize> = (0..vehicles.len()).collect();
    order.shuffle(rng);
    let mut taken = vec![false; vehicles.len()];
    let mut pairs = Vec::with_capacity(num_vue);
    for &tx in &order {
        if pairs.len() == num_vue {
            break;
        }
        if taken[tx] {
            continue;
        }
        let candidates: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&r| {
                r != tx
                    && !taken[r]
                    && vehicles[r].position.distance(&vehicles[tx].position) <= pair_max_distance_m
            })
            .collect();
        if let Some(&rx) = candidates.choose(rng) {
            taken[tx] = true;
            taken[rx] = true;
            pairs.push((tx, rx));
        }
    }
    if pairs.len() < num_vue {
        return None;
    }
    let cues: Vec<Vehicle> = order.iter().filter(|&&i| !taken[i]).take(num_cue).map(|&i| vehicles[i]).collect();
    if cues.len() < num_cue {
        return None;
    }
    Some(Topology {
        cues,
        vue_tx: pairs.iter().map(|&(t, _)| vehicles[t]).collect(),
        vue_rx: pairs.iter().map(|&(_, r)| vehicles[r]).collect(),
        dropped: vehicles.len(),
    })
}

/// α = 10^(−(PL + S)/10) with S ~ N(0, σ²); σ depends on the link type.
/// Shadowing is drawn per link in declaration order.
pub fn large_scale_gain(topology: &Topology, model: &ChannelModel, seed: u64) -> LinkGains {
    let mut rng = rng_from_seed(derive_seed(seed, stream::LARGE_SCALE, 0));
    let v2i = Normal::new(0.0, model.shadowing_v2i_db).expect("finite shadowing std");
    let v2v = Normal::new(0.0, model.shadowing_v2v_db).expect("finite shadowing std");
    let mut gains = model.pathloss(topology);
    let dims = gains.dims();
    let (m, n) = (dims.num_cue, dims.num_vue);
    for (i, pl) in gains.iter_mut().enumerate() {
        let is_v2i = i < m || (m + n..m + 2 * n).contains(&i);
        let shadow = if is_v2i { v2i.sample(&mut rng) } else { v2v.sample(&mut rng) };
        *pl = 10f64.powf(-(*pl + shadow) / 10.0);
    }
    gains
}

/// I.i.d. unit-mean exponential power gains.
pub fn draw_fast_fading(dims: LinkDims, seed: u64) -> LinkGains {
    let mut rng = rng_from_seed(derive_seed(seed, stream::FAST_FADING, 0));
    let mut g = LinkGains::filled(dims, 0.0);
    for x in g.iter_mut() {
        *x = sample_exp1(&mut rng);
    }
    g
}

/// Exp(1) draw, bounded away from zero so every gain stays strictly positive.
#[inline]
pub(crate) fn sample_exp1(rng: &mut Rng) -> f64 {
    let x: f64 = Exp1.sample(rng);
    x.max(f64::MIN_POSITIVE)
}

/// Full snapshot. The large-scale part equals `large_scale_gain(.., seed)`.
pub fn snapshot(topology: &Topology, model: &ChannelModel, seed: u64) -> ChannelGains {
    let large = large_scale_gain(topology, model, seed);
    let fast = draw_fast_fading(topology.dims(), seed);
    ChannelGains::new(large, fast)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_topology(seed: u64) -> Topology {
        let cfg = crate::config::ScenarioConfig::default();
        drop_vehicles(&cfg.geometry, 5, 5, cfg.vehicle_density_per_m, 50.0, seed).unwrap()
    }

    #[test]
    fn default_drop_places_fifteen_vehicles_on_lanes() {
        let g = GridGeometry::default();
        let top = default_topology(42);
        let all: Vec<&Vehicle> = top.cues.iter().chain(&top.vue_tx).chain(&top.vue_rx).collect();
        assert_eq!(all.len(), 15);
        for v in all {
            assert!(g.is_on_lane(&v.position, &v.lane));
            assert!(g.contains(&v.position));
        }
        for (t, r) in top.vue_tx.iter().zip(&top.vue_rx) {
            assert!(t.position.distance(&r.position) <= 50.0);
        }
    }

    #[test]
    fn minimal_instance_and_determinism() {
        let g = GridGeometry::default();
        let top = drop_vehicles(&g, 1, 1, 0.5, 50.0, 3).unwrap();
        assert_eq!((top.cues.len(), top.vue_tx.len(), top.vue_rx.len()), (1, 1, 1));
        assert!(top.vue_tx[0].position.distance(&top.vue_rx[0].position) <= 50.0);
        assert_eq!(top, drop_vehicles(&g, 1, 1, 0.5, 50.0, 3).unwrap());
        assert_ne!(top, drop_vehicles(&g, 1, 1, 0.5, 50.0, 4).unwrap());
    }

    #[test]
    fn low_density_is_rejected() {
        let g = GridGeometry::default();
        let err = drop_vehicles(&g, 5, 5, 1e-7, 50.0, 1).unwrap_err();
        assert!(matches!(err, ChannelError::DensityTooLow { needed: 15, .. }));
        assert!(drop_vehicles(&g, 2, 3, 0.1, 50.0, 1).is_err());
        assert!(drop_vehicles(&g, 2, 1, 0.0, 50.0, 1).is_err());
    }

    #[test]
    fn pathloss_reference_points() {
        assert!((v2i_pathloss_db(1000.0) - 128.1).abs() < 1e-12);
        assert!((v2i_pathloss_db(0.2) - 15.3).abs() < 1e-9);
        // 22.7·log10(50) + 41 + 20·log10(0.4)
        assert!((v2v_los_pathloss_db(50.0, 2.0) - 71.607_818_924_986_87).abs() < 1e-9);
        assert!(
            (pathloss_db(LinkKind::V2vNlos, 50.0, 2.0) - pathloss_db(LinkKind::V2vLos, 50.0, 2.0) - 20.0).abs()
                < 1e-12
        );
    }

    #[test]
    fn snapshot_is_product_of_parts() {
        let model = ChannelModel::default();
        let top = default_topology(9);
        let snap = snapshot(&top, &model, 11);
        for ((h, a), g) in snap.combined.iter().zip(snap.large_scale.iter()).zip(snap.fast_fade.iter()) {
            assert_eq!(*h, a * g);
            assert!(h.is_finite() && *h > 0.0);
        }
        assert_eq!(snap.large_scale, large_scale_gain(&top, &model, 11));
        assert_eq!(snap, snapshot(&top, &model, 11));
        assert!(snap.combined.first_invalid().is_none());
    }

    #[test]
    fn flat_round_trip_keeps_declaration_order() {
        let dims = LinkDims::new(3, 2);
        let flat: Vec<f64> = (0..dims.link_count()).map(|i| i as f64).collect();
        let g = LinkGains::from_flat(dims, &flat);
        assert_eq!(g.cue_bs, vec![0.0, 1.0, 2.0]);
        assert_eq!(g.vue, vec![3.0, 4.0]);
        assert_eq!(g.vue_bs, vec![5.0, 6.0]);
        assert_eq!(g.cue_vue_at(2, 1), 12.0);
        assert_eq!(g.to_flat(), flat);
    }
}
