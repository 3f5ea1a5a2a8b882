//! Mini-batch training loop.

use rand::seq::SliceRandom;

use super::network::{LossBreakdown, LossWeights, Network, NetworkKind, NetworkSpec, Targets};
use super::optim::Adam;
use super::NeuralError;
use crate::rng::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight of the C-UE power loss.
    pub alpha: f64,
    /// Weight of the V-UE power loss.
    pub beta: f64,
    pub learning_rate: f64,
    pub seed: u64,
    /// Share of the training samples held out for the validation loss.
    pub validation_fraction: f64,
}

impl TrainingConfig {
    /// Batch 128, α = β = 0.1, Adam at 1e-3; 100 epochs for the CNN and 500
    /// for the fully connected network.
    pub fn for_kind(kind: NetworkKind) -> Self {
        Self {
            batch_size: 128,
            epochs: match kind {
                NetworkKind::Cnn => 100,
                NetworkKind::Dnn => 500,
            },
            alpha: 0.1,
            beta: 0.1,
            learning_rate: 1e-3,
            seed: 0,
            validation_fraction: 0.0,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights { alpha: self.alpha, beta: self.beta }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |r: &str| Err(NeuralError::Config(r.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad("alpha and beta must be non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must be in [0, 1)");
        }
        Ok(())
    }
}

/// Standardized inputs and normalized targets, sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub input_len: usize,
    pub inputs: Vec<f64>,
    pub targets: Targets,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.targets.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copies the listed samples into a contiguous batch.
    pub fn gather(&self, idx: &[usize]) -> (Vec<f64>, Targets) {
        let m = self.targets.p_cue.len() / self.len().max(1);
        let n = self.targets.p_vue.len() / self.len().max(1);
        let mut inputs = Vec::with_capacity(idx.len() * self.input_len);
        let mut t = Targets {
            classes: Vec::with_capacity(idx.len()),
            p_cue: Vec::with_capacity(idx.len() * m),
            p_vue: Vec::with_capacity(idx.len() * n),
        };
        for &i in idx {
            inputs.extend_from_slice(&self.inputs[i * self.input_len..][..self.input_len]);
            t.classes.push(self.targets.classes[i]);
            t.p_cue.extend_from_slice(&self.targets.p_cue[i * m..][..m]);
            t.p_vue.extend_from_slice(&self.targets.p_vue[i * n..][..n]);
        }
        (inputs, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses seen during the epoch.
    pub train: LossBreakdown,
    pub validation: Option<LossBreakdown>,
}

/// CSV with header `epoch,L_total,L_cls,L_reg_c,L_reg_v`.
pub fn loss_trace_csv(trace: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,L_total,L_cls,L_reg_c,L_reg_v\n");
    for r in trace {
        let l = r.train;
        out.push_str(&format!("{},{},{},{},{}\n", r.epoch, l.total, l.cls, l.reg_cue, l.reg_vue));
    }
    out
}

/// Splits `0..n` into (train, validation) with a seeded shuffle.
fn holdout(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let n_val = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
    if n_val == 0 {
        return (idx, Vec::new());
    }
    idx.shuffle(&mut rng_from_seed(derive_seed(seed, stream::SPLIT, 1)));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

pub fn train(spec: NetworkSpec, data: &TrainingSet, config: &TrainingConfig) -> Result<(Network, Vec<EpochRecord>), NeuralError> {
    train_with_progress(spec, data, config, |_, _| {})
}

/// Trains a freshly initialized network. Initialization, hold-out and
/// per-epoch shuffles are all derived from `config.seed`. `on_epoch` sees
/// each epoch's record and the parameters at the end of that epoch.
pub fn train_with_progress(
    spec: NetworkSpec,
    data: &TrainingSet,
    config: &TrainingConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &Network),
) -> Result<(Network, Vec<EpochRecord>), NeuralError> {
    config.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    if data.input_len != spec.input_len() {
        return Err(NeuralError::Shape(format!(
            "training inputs have {} values per sample, network expects {}",
            data.input_len,
            spec.input_len()
        )));
    }
    let mut net = Network::initialized(spec, config.seed)?;
    let weights = config.loss_weights();
    let (train_idx, val_idx) = holdout(data.len(), config.validation_fraction, config.seed);
    let val_batch = (!val_idx.is_empty()).then(|| data.gather(&val_idx));
    let mut opt = Adam::new(config.learning_rate);
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut rng_from_seed(derive_seed(config.seed, stream::SHUFFLE, epoch as u64)));
        let mut sum = LossBreakdown::default();
        for idx in order.chunks(config.batch_size) {
            let (x, t) = data.gather(idx);
            let (l, grads) = net.loss_and_gradients(&x, &t, weights)?;
            if !l.total.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(NeuralError::Diverged { epoch });
            }
            let k = idx.len() as f64;
            sum.total += l.total * k;
            sum.cls += l.cls * k;
            sum.reg_cue += l.reg_cue * k;
            sum.reg_vue += l.reg_vue * k;
            opt.step(net.params_mut(), &grads);
        }
        let k = order.len() as f64;
        let train = LossBreakdown { total: sum.total / k, cls: sum.cls / k, reg_cue: sum.reg_cue / k, reg_vue: sum.reg_vue / k };
        let validation = match &val_batch {
            Some((x, t)) => Some(net.batch_loss(x, t, weights)?),
            None => None,
        };
        let rec = EpochRecord { epoch, train, validation };
        on_epoch(&rec, &net);
        trace.push(rec);
    }
    Ok((net, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::layers::Activation;
    use crate::neural::network::{LayerSpec, Padding};
    use rand::Rng as _;

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec {
            kind: NetworkKind::Cnn,
            input_shape: NetworkSpec::input_shape_for(3, 3),
            layers: vec![
                LayerSpec::Conv2d { kernel_h: 3, kernel_w: 3, out_channels: 8, padding: Padding::Same, activation: Activation::Relu },
                LayerSpec::Dense { width: 64, activation: Activation::Relu },
            ],
            num_classes: 6,
            num_cue: 3,
            num_vue: 3,
        }
    }

    fn tiny_set(n: usize, seed: u64) -> TrainingSet {
        let spec = tiny_spec();
        let mut rng = rng_from_seed(seed);
        TrainingSet {
            input_len: spec.input_len(),
            inputs: (0..n * spec.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            targets: Targets {
                classes: (0..n).map(|_| rng.random_range(0..6)).collect(),
                p_cue: (0..n * 3).map(|_| rng.random_range(0.05..0.95)).collect(),
                p_vue: (0..n * 3).map(|_| rng.random_range(0.05..0.95)).collect(),
            },
        }
    }

    fn config(epochs: usize) -> TrainingConfig {
        TrainingConfig { batch_size: 8, epochs, learning_rate: 3e-3, seed: 21, ..TrainingConfig::for_kind(NetworkKind::Cnn) }
    }

    #[test]
    fn overfits_a_tiny_set() {
        let data = tiny_set(20, 1);
        let initial = Network::initialized(tiny_spec(), 21)
            .unwrap()
            .batch_loss(&data.inputs, &data.targets, LossWeights::default())
            .unwrap()
            .total;
        let (net, trace) = train(tiny_spec(), &data, &config(200)).unwrap();
        let last = net.batch_loss(&data.inputs, &data.targets, LossWeights::default()).unwrap().total;
        assert_eq!(trace.len(), 200);
        assert!(last < 0.1 * initial, "final {last} vs initial {initial}");
        assert!(trace[199].train.total <= trace[0].train.total);
    }

    #[test]
    fn same_seed_same_parameters() {
        let data = tiny_set(30, 2);
        let (a, ta) = train(tiny_spec(), &data, &config(3)).unwrap();
        let (b, tb) = train(tiny_spec(), &data, &config(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn zero_epochs_returns_initial_parameters() {
        let data = tiny_set(5, 3);
        let (net, trace) = train(tiny_spec(), &data, &config(0)).unwrap();
        assert!(trace.is_empty());
        assert_eq!(net, Network::initialized(tiny_spec(), 21).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let mut data = tiny_set(5, 4);
        data.inputs[0] = f64::INFINITY;
        assert!(matches!(train(tiny_spec(), &data, &config(1)), Err(NeuralError::Diverged { epoch: 1 })));
    }

    #[test]
    fn bad_configs_are_rejected() {
        let data = tiny_set(5, 4);
        let c = TrainingConfig { batch_size: 0, ..config(1) };
        assert!(matches!(train(tiny_spec(), &data, &c), Err(NeuralError::Config(_))));
        let c = TrainingConfig { alpha: -1.0, ..config(1) };
        assert!(train(tiny_spec(), &data, &c).is_err());
        let empty = TrainingSet { input_len: data.input_len, inputs: vec![], targets: Targets { classes: vec![], p_cue: vec![], p_vue: vec![] } };
        assert!(matches!(train(tiny_spec(), &empty, &config(1)), Err(NeuralError::EmptyDataset)));
    }

    #[test]
    fn validation_holdout_is_reported() {
        let data = tiny_set(20, 5);
        let c = TrainingConfig { validation_fraction: 0.25, ..config(2) };
        let (_, trace) = train(tiny_spec(), &data, &c).unwrap();
        assert!(trace.iter().all(|r| r.validation.is_some()));
        let csv = loss_trace_csv(&trace);
        assert!(csv.starts_with("epoch,L_total,L_cls,L_reg_c,L_reg_v\n1,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
