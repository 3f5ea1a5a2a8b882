//! From-scratch neural engine: dense f64 tensors, conv/dense layers with
//! hand-written backward passes, the dual-head allocation networks, Adam
//! training, inference and checkpoints.

pub mod checkpoint;
pub mod features;
pub mod layers;
pub mod network;
pub mod optim;
pub mod tensor;
pub mod train;

use thiserror::Error;

pub use features::{featurize, FeatureSource, Normalizer};
pub use network::{ForwardOutput, LossBreakdown, LossWeights, Network, NetworkKind, NetworkSpec, Targets};
pub use tensor::Tensor;
pub use train::{train, EpochRecord, TrainingConfig, TrainingSet};

use crate::channel::ChannelGains;
use crate::matching::decode;
use crate::problem::Allocation;
use crate::solvers::PowerGrid;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite or non-positive gain on link {0}")]
    NonFiniteGain(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// How predicted powers become watts.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerDecoding {
    /// Head output times P_max.
    Continuous,
    /// Continuous value snapped to the nearest grid level in dB.
    Grid { cue: Vec<f64>, vue: Vec<f64> },
}

impl PowerDecoding {
    pub fn grid(grid: &PowerGrid) -> Self {
        PowerDecoding::Grid { cue: grid.cue_levels(), vue: grid.vue_levels() }
    }
}

/// Nearest level in dB. A zero level (if present) wins only for outputs
/// below half the smallest positive level.
fn snap(p: f64, levels: &[f64]) -> f64 {
    let positive = levels.iter().copied().filter(|&l| l > 0.0);
    let lowest = positive.clone().fold(f64::INFINITY, f64::min);
    if levels.contains(&0.0) && p < 0.5 * lowest {
        return 0.0;
    }
    if p <= 0.0 {
        return lowest;
    }
    let lp = p.ln();
    positive.min_by(|a, b| (a.ln() - lp).abs().total_cmp(&(b.ln() - lp).abs())).unwrap_or(0.0)
}

/// A trained network together with what it needs to turn gains into an
/// allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network,
    pub normalizer: Normalizer,
    pub features: FeatureSource,
    pub p_max_cue_w: f64,
    pub p_max_vue_w: f64,
}

impl Model {
    pub fn input_for(&self, gains: &ChannelGains) -> Result<Vec<f64>, NeuralError> {
        let t = featurize(gains, self.features, &self.normalizer)?;
        if t.len() != self.network.spec().input_len() {
            return Err(NeuralError::Shape(format!(
                "gains give a {:?} plane, network expects {:?}",
                t.shape,
                self.network.spec().input_shape
            )));
        }
        Ok(t.values)
    }

    /// Allocations for a batch of instances. The class is the argmax of the
    /// softmax (ties to the lowest index); powers are the clamped head
    /// outputs scaled by P_max, optionally snapped to a grid.
    pub fn infer_batch(&self, gains: &[ChannelGains], decoding: &PowerDecoding) -> Result<Vec<Allocation>, NeuralError> {
        if gains.is_empty() {
            return Ok(Vec::new());
        }
        let mut input = Vec::with_capacity(gains.len() * self.network.spec().input_len());
        for g in gains {
            input.extend(self.input_for(g)?);
        }
        let out = self.network.forward(&input)?;
        let s = self.network.spec();
        let mut allocs = Vec::with_capacity(gains.len());
        for i in 0..gains.len() {
            let probs = &out.class_probs.values[i * s.num_classes..][..s.num_classes];
            let mut best = 0;
            for (c, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = c;
                }
            }
            let matching = decode(best, s.num_cue, s.num_vue).expect("argmax is a valid class");
            let scale = |raw: &[f64], p_max: f64| -> Vec<f64> { raw.iter().map(|v| v.clamp(0.0, 1.0) * p_max).collect() };
            let mut p_cue = scale(&out.p_cue.values[i * s.num_cue..][..s.num_cue], self.p_max_cue_w);
            let mut p_vue = scale(&out.p_vue.values[i * s.num_vue..][..s.num_vue], self.p_max_vue_w);
            if let PowerDecoding::Grid { cue, vue } = decoding {
                p_cue.iter_mut().for_each(|p| *p = snap(*p, cue));
                p_vue.iter_mut().for_each(|p| *p = snap(*p, vue));
            }
            allocs.push(Allocation::new(matching, p_cue, p_vue));
        }
        Ok(allocs)
    }

    pub fn infer(&self, gains: &ChannelGains, decoding: &PowerDecoding) -> Result<Allocation, NeuralError> {
        Ok(self.infer_batch(std::slice::from_ref(gains), decoding)?.remove(0))
    }
}
