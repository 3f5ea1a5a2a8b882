//! Network input planes built from channel gains.
//!
//! Row `m` of the `M × (3 + N)` plane holds, in dB: the C-UE→BS gain of
//! C-UE m, the V-UE→BS gain of pair m, the V2V gain of pair m, then the
//! C-UE m → V-UE rx gains of every pair. With `N < M` the per-pair columns
//! of rows `N..M` hold [`PAD_DB`].

use super::tensor::Tensor;
use super::NeuralError;
use crate::channel::{ChannelGains, LinkDims, LinkGains};
use crate::units::linear_to_db;

/// Filler for V-UE columns in rows without a V-UE pair.
pub const PAD_DB: f64 = -200.0;

/// Column groups standardized separately: C-UE→BS, V-UE→BS, V2V, C-UE→V-UE.
pub const GROUPS: usize = 4;

/// Which gain the network sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureSource {
    /// Large-scale gain α. The exhaustive labels depend on α alone (the
    /// solver averages over fast fading), so this is the default.
    #[default]
    LargeScale,
    /// Combined gain h = α·g of the snapshot.
    Instantaneous,
}

impl FeatureSource {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureSource::LargeScale => "large-scale",
            FeatureSource::Instantaneous => "instantaneous",
        }
    }

    pub fn select<'a>(&self, gains: &'a ChannelGains) -> &'a LinkGains {
        match self {
            FeatureSource::LargeScale => &gains.large_scale,
            FeatureSource::Instantaneous => &gains.combined,
        }
    }
}

fn group_of(col: usize) -> usize {
    col.min(3)
}

/// Unstandardized dB plane, row-major `M × (3 + N)`.
pub fn gains_db_plane(gains: &LinkGains) -> Result<Vec<f64>, NeuralError> {
    if let Some(link) = gains.first_invalid() {
        return Err(NeuralError::NonFiniteGain(link));
    }
    let LinkDims { num_cue: m, num_vue: n } = gains.dims();
    let w = 3 + n;
    let mut plane = vec![PAD_DB; m * w];
    for r in 0..m {
        let row = &mut plane[r * w..][..w];
        row[0] = linear_to_db(gains.cue_bs[r]);
        if r < n {
            row[1] = linear_to_db(gains.vue_bs[r]);
            row[2] = linear_to_db(gains.vue[r]);
        }
        for s in 0..n {
            row[3 + s] = linear_to_db(gains.cue_vue_at(r, s));
        }
    }
    Ok(plane)
}

/// Per-group mean and standard deviation of dB features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub mean: [f64; GROUPS],
    pub std: [f64; GROUPS],
}

impl Default for Normalizer {
    fn default() -> Self {
        Self { mean: [0.0; GROUPS], std: [1.0; GROUPS] }
    }
}

impl Normalizer {
    /// Fits on dB planes of width `width`, ignoring padding. A group with
    /// zero spread (or no entries) gets std 1.
    pub fn fit<'a>(planes: impl IntoIterator<Item = &'a [f64]>, width: usize) -> Self {
        let mut sum = [0.0; GROUPS];
        let mut sq = [0.0; GROUPS];
        let mut count = [0usize; GROUPS];
        for plane in planes {
            for (i, &v) in plane.iter().enumerate() {
                if v == PAD_DB {
                    continue;
                }
                let g = group_of(i % width);
                sum[g] += v;
                sq[g] += v * v;
                count[g] += 1;
            }
        }
        let mut out = Self::default();
        for g in 0..GROUPS {
            if count[g] == 0 {
                continue;
            }
            let mean = sum[g] / count[g] as f64;
            let var = (sq[g] / count[g] as f64 - mean * mean).max(0.0);
            out.mean[g] = mean;
            out.std[g] = if var.sqrt() > 1e-9 * mean.abs().max(1.0) { var.sqrt() } else { 1.0 };
        }
        out
    }

    pub fn standardize(&self, plane: &mut [f64], width: usize) {
        for (i, v) in plane.iter_mut().enumerate() {
            let g = group_of(i % width);
            *v = (*v - self.mean[g]) / self.std[g];
        }
    }

    pub fn destandardize(&self, plane: &mut [f64], width: usize) {
        for (i, v) in plane.iter_mut().enumerate() {
            let g = group_of(i % width);
            *v = *v * self.std[g] + self.mean[g];
        }
    }
}

/// Standardized input tensor of shape `[M, 3 + N, 1]`.
pub fn featurize(gains: &ChannelGains, source: FeatureSource, norm: &Normalizer) -> Result<Tensor, NeuralError> {
    let g = source.select(gains);
    let dims = g.dims();
    let width = 3 + dims.num_vue;
    let mut plane = gains_db_plane(g)?;
    norm.standardize(&mut plane, width);
    Ok(Tensor::from_values(&[dims.num_cue, width, 1], plane))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(m: usize, n: usize) -> ChannelGains {
        let dims = LinkDims { num_cue: m, num_vue: n };
        let flat: Vec<f64> = (0..dims.link_count()).map(|i| 1e-9 * (1.0 + i as f64)).collect();
        ChannelGains::new(LinkGains::from_flat(dims, &flat), LinkGains::filled(dims, 2.0))
    }

    #[test]
    fn default_plane_is_five_by_eight() {
        let t = featurize(&gains(5, 5), FeatureSource::LargeScale, &Normalizer::default()).unwrap();
        assert_eq!(t.shape, vec![5, 8, 1]);
        // Row 1, column 3 is C-UE 1 → V-UE 0: flat index M + 2N + 1·N + 0.
        assert!((t.values[8 + 3] - linear_to_db(1e-9 * (1.0 + 20.0))).abs() < 1e-12);
    }

    #[test]
    fn instantaneous_source_uses_combined_gain() {
        let g = gains(2, 2);
        let a = featurize(&g, FeatureSource::LargeScale, &Normalizer::default()).unwrap();
        let b = featurize(&g, FeatureSource::Instantaneous, &Normalizer::default()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((y - x - linear_to_db(2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_gains_standardize_to_zero() {
        let dims = LinkDims { num_cue: 5, num_vue: 5 };
        let g = ChannelGains::new(LinkGains::filled(dims, 1e-7), LinkGains::filled(dims, 1.0));
        let plane = gains_db_plane(&g.large_scale).unwrap();
        let norm = Normalizer::fit([plane.as_slice()], 8);
        let t = featurize(&g, FeatureSource::LargeScale, &norm).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardization_round_trips() {
        let planes: Vec<Vec<f64>> = (1..4).map(|k| gains_db_plane(&gains(5, 5).large_scale.zip_with(&LinkGains::filled(LinkDims { num_cue: 5, num_vue: 5 }, k as f64), |a, b| a * b)).unwrap()).collect();
        let norm = Normalizer::fit(planes.iter().map(|p| p.as_slice()), 8);
        let mut p = planes[1].clone();
        norm.standardize(&mut p, 8);
        norm.destandardize(&mut p, 8);
        for (a, b) in p.iter().zip(&planes[1]) {
            assert!((a - b).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn fewer_pairs_are_padded() {
        let plane = gains_db_plane(&gains(3, 2).large_scale).unwrap();
        assert_eq!(plane.len(), 3 * 5);
        assert_eq!(&plane[2 * 5 + 1..2 * 5 + 3], &[PAD_DB, PAD_DB]);
        assert_ne!(plane[2 * 5 + 3], PAD_DB);
    }

    #[test]
    fn non_finite_gain_names_link() {
        let mut g = gains(2, 2);
        g.large_scale.vue_bs[1] = f64::NAN;
        match featurize(&g, FeatureSource::LargeScale, &Normalizer::default()) {
            Err(NeuralError::NonFiniteGain(link)) => assert_eq!(link, "vue_bs[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
