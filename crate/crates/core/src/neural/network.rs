//! Network description, parameters and the batched forward/backward pass
//! with the combined classification and power-regression loss.

use super::layers::{Activation, Conv2d, Dense};
use super::tensor::Tensor;
use super::NeuralError;
use crate::matching::matching_count;
use crate::par;
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Samples per gradient chunk. Chunk boundaries are fixed so the reduction
/// order, and therefore the result, does not depend on the thread count.
pub const GRAD_CHUNK: usize = 16;

/// Lower clamp applied to the target-class probability before the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    Cnn,
    Dnn,
}

impl NetworkKind {
    pub fn name(&self) -> &'static str {
        match self {
            NetworkKind::Cnn => "cnn",
            NetworkKind::Dnn => "dnn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding that keeps the plane size (odd kernels only).
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d { kernel_h: usize, kernel_w: usize, out_channels: usize, padding: Padding, activation: Activation },
    Dense { width: usize, activation: Activation },
}

/// Architecture: an input plane `[h, w, c]`, a trunk of conv and dense
/// layers, then three linear heads (matching class logits, C-UE powers,
/// V-UE powers).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
    pub num_cue: usize,
    pub num_vue: usize,
}

impl NetworkSpec {
    /// Input plane for M C-UEs and N V-UE pairs: M rows, 3 + N columns.
    pub fn input_shape_for(num_cue: usize, num_vue: usize) -> [usize; 3] {
        [num_cue, 3 + num_vue, 1]
    }

    fn with_layers(kind: NetworkKind, num_cue: usize, num_vue: usize, layers: Vec<LayerSpec>) -> Self {
        Self {
            kind,
            input_shape: Self::input_shape_for(num_cue, num_vue),
            layers,
            num_classes: matching_count(num_cue, num_vue),
            num_cue,
            num_vue,
        }
    }

    /// Three 3×3 same-padded conv stages (16, 32, 64 channels) and a
    /// 256-256-128 dense trunk, all ReLU.
    pub fn cnn(num_cue: usize, num_vue: usize) -> Self {
        let conv = |c| LayerSpec::Conv2d {
            kernel_h: 3,
            kernel_w: 3,
            out_channels: c,
            padding: Padding::Same,
            activation: Activation::Relu,
        };
        let dense = |w| LayerSpec::Dense { width: w, activation: Activation::Relu };
        Self::with_layers(
            NetworkKind::Cnn,
            num_cue,
            num_vue,
            vec![conv(16), conv(32), conv(64), dense(256), dense(256), dense(128)],
        )
    }

    /// Fully connected 64-128-128 trunk, all ReLU.
    pub fn dnn(num_cue: usize, num_vue: usize) -> Self {
        let dense = |w| LayerSpec::Dense { width: w, activation: Activation::Relu };
        Self::with_layers(NetworkKind::Dnn, num_cue, num_vue, vec![dense(64), dense(128), dense(128)])
    }

    pub fn for_kind(kind: NetworkKind, num_cue: usize, num_vue: usize) -> Self {
        match kind {
            NetworkKind::Cnn => Self::cnn(num_cue, num_vue),
            NetworkKind::Dnn => Self::dnn(num_cue, num_vue),
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Checks that the layer shapes chain and the heads fit the problem size.
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |r: String| Err(NeuralError::Spec(r));
        if self.input_shape.contains(&0) {
            return bad(format!("input shape {:?} has a zero dimension", self.input_shape));
        }
        if self.num_vue == 0 || self.num_vue > self.num_cue {
            return bad(format!("need M >= N >= 1, got M={} N={}", self.num_cue, self.num_vue));
        }
        if self.num_classes != matching_count(self.num_cue, self.num_vue) {
            return bad(format!(
                "class head width {} != {} matchings",
                self.num_classes,
                matching_count(self.num_cue, self.num_vue)
            ));
        }
        let [mut h, mut w, _] = self.input_shape;
        let mut flat = false;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Conv2d { kernel_h, kernel_w, out_channels, padding, .. } => {
                    if flat {
                        return bad(format!("layer {i}: conv2d after a dense layer"));
                    }
                    if kernel_h == 0 || kernel_w == 0 || out_channels == 0 {
                        return bad(format!("layer {i}: zero-sized conv2d"));
                    }
                    match padding {
                        Padding::Same if kernel_h % 2 == 0 || kernel_w % 2 == 0 => {
                            return bad(format!("layer {i}: same padding needs odd kernels"));
                        }
                        Padding::Valid if kernel_h > h || kernel_w > w => {
                            return bad(format!("layer {i}: kernel {kernel_h}x{kernel_w} exceeds plane {h}x{w}"));
                        }
                        Padding::Valid => {
                            h = h + 1 - kernel_h;
                            w = w + 1 - kernel_w;
                        }
                        Padding::Same => {}
                    }
                }
                LayerSpec::Dense { width, .. } => {
                    if width == 0 {
                        return bad(format!("layer {i}: zero-width dense"));
                    }
                    flat = true;
                    (h, w) = (1, 1);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Conv(Conv2d),
    Dense(Dense),
}

/// A network instance: trunk layers plus the three heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    trunk: Vec<Layer>,
    class_head: Dense,
    cue_head: Dense,
    vue_head: Dense,
}

/// Per-sample outputs for a batch, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub class_logits: Tensor,
    pub class_probs: Tensor,
    /// Normalized C-UE powers after the ReLU. Values above 1 are clamped
    /// to P_max when decoded, not here.
    pub p_cue: Tensor,
    /// Normalized V-UE powers after the ReLU.
    pub p_vue: Tensor,
}

/// Training targets for a batch: class indices and normalized powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub classes: Vec<usize>,
    pub p_cue: Vec<f64>,
    pub p_vue: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.1, beta: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub cls: f64,
    pub reg_cue: f64,
    pub reg_vue: f64,
}

impl LossBreakdown {
    fn add(&mut self, o: &LossBreakdown) {
        self.total += o.total;
        self.cls += o.cls;
        self.reg_cue += o.reg_cue;
        self.reg_vue += o.reg_vue;
    }

    fn scale(&mut self, k: f64) {
        self.total *= k;
        self.cls *= k;
        self.reg_cue *= k;
        self.reg_vue *= k;
    }
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows(logits: &[f64], width: usize) -> Vec<f64> {
    let mut out = logits.to_vec();
    for row in out.chunks_exact_mut(width) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Combined loss from probabilities and predicted powers, all per-sample
/// terms averaged over the batch.
pub fn loss(
    class_probs: &[f64],
    p_cue: &[f64],
    p_vue: &[f64],
    targets: &Targets,
    weights: LossWeights,
) -> LossBreakdown {
    let k = targets.classes.len();
    let sums = sample_loss_sums(class_probs, p_cue, p_vue, targets, weights);
    let mut out = sums;
    out.scale(1.0 / k as f64);
    out
}

fn sample_loss_sums(
    class_probs: &[f64],
    p_cue: &[f64],
    p_vue: &[f64],
    targets: &Targets,
    weights: LossWeights,
) -> LossBreakdown {
    let k = targets.classes.len();
    let classes = class_probs.len() / k.max(1);
    let (m, n) = (p_cue.len() / k.max(1), p_vue.len() / k.max(1));
    let mut l = LossBreakdown::default();
    for (i, &y) in targets.classes.iter().enumerate() {
        l.cls -= class_probs[i * classes + y].max(PROB_FLOOR).ln();
    }
    l.reg_cue = p_cue.iter().zip(&targets.p_cue[..k * m]).map(|(a, b)| (a - b).powi(2)).sum();
    l.reg_vue = p_vue.iter().zip(&targets.p_vue[..k * n]).map(|(a, b)| (a - b).powi(2)).sum();
    l.total = l.cls + weights.alpha * l.reg_cue + weights.beta * l.reg_vue;
    l
}

struct Cache {
    /// Per trunk layer: im2col matrix (conv) or the layer input (dense).
    saved: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    logits: Vec<f64>,
    cue_raw: Vec<f64>,
    vue_raw: Vec<f64>,
}

fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

impl Network {
    /// All-zero parameters.
    pub fn zeroed(spec: NetworkSpec) -> Result<Self, NeuralError> {
        spec.validate()?;
        let [mut h, mut w, mut c] = spec.input_shape;
        let mut trunk = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            match *layer {
                LayerSpec::Conv2d { kernel_h, kernel_w, out_channels, padding, activation } => {
                    let (ph, pw) = match padding {
                        Padding::Same => ((kernel_h - 1) / 2, (kernel_w - 1) / 2),
                        Padding::Valid => (0, 0),
                    };
                    let conv = Conv2d::new(h, w, c, out_channels, kernel_h, kernel_w, ph, pw, activation);
                    (h, w, c) = (conv.out_h(), conv.out_w(), out_channels);
                    trunk.push(Layer::Conv(conv));
                }
                LayerSpec::Dense { width, activation } => {
                    trunk.push(Layer::Dense(Dense::new(h * w * c, width, activation)));
                    (h, w, c) = (1, 1, width);
                }
            }
        }
        let feat = h * w * c;
        Ok(Self {
            class_head: Dense::new(feat, spec.num_classes, Activation::Identity),
            cue_head: Dense::new(feat, spec.num_cue, Activation::Identity),
            vue_head: Dense::new(feat, spec.num_vue, Activation::Identity),
            spec,
            trunk,
        })
    }

    /// Fan-in uniform weights for the trunk and class head, zero biases.
    /// Power heads start with zero weights and bias 0.5, so every power
    /// output begins at 0.5 with its ReLU active whatever the input.
    pub fn initialized(spec: NetworkSpec, seed: u64) -> Result<Self, NeuralError> {
        let mut net = Self::zeroed(spec)?;
        let mut rng = rng_from_seed(derive_seed(seed, stream::INIT, 0));
        for layer in &mut net.trunk {
            match layer {
                Layer::Conv(c) => c.init(&mut rng),
                Layer::Dense(d) => d.init(&mut rng),
            }
        }
        net.class_head.init(&mut rng);
        net.cue_head.bias.values.iter_mut().for_each(|b| *b = 0.5);
        net.vue_head.bias.values.iter_mut().for_each(|b| *b = 0.5);
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Parameters in declaration order: each trunk layer's weight then bias,
    /// then the class, C-UE and V-UE heads.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(2 * self.trunk.len() + 6);
        for layer in &self.trunk {
            match layer {
                Layer::Conv(c) => out.extend([&c.weight, &c.bias]),
                Layer::Dense(d) => out.extend([&d.weight, &d.bias]),
            }
        }
        for h in [&self.class_head, &self.cue_head, &self.vue_head] {
            out.extend([&h.weight, &h.bias]);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(2 * self.trunk.len() + 6);
        for layer in &mut self.trunk {
            match layer {
                Layer::Conv(c) => out.extend([&mut c.weight, &mut c.bias]),
                Layer::Dense(d) => out.extend([&mut d.weight, &mut d.bias]),
            }
        }
        for h in [&mut self.class_head, &mut self.cue_head, &mut self.vue_head] {
            out.extend([&mut h.weight, &mut h.bias]);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<usize, NeuralError> {
        let per = self.spec.input_len();
        if input.is_empty() || !input.len().is_multiple_of(per) {
            return Err(NeuralError::Shape(format!(
                "input length {} is not a positive multiple of {} ({:?})",
                input.len(),
                per,
                self.spec.input_shape
            )));
        }
        Ok(input.len() / per)
    }

    fn forward_cached(&self, batch: usize, input: &[f64]) -> Cache {
        let mut saved = Vec::with_capacity(self.trunk.len());
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.trunk.len());
        for layer in &self.trunk {
            let x = outputs.last().map_or(input, |v| v.as_slice());
            match layer {
                Layer::Conv(c) => {
                    let (y, cols) = c.forward(batch, x);
                    saved.push(cols);
                    outputs.push(y);
                }
                Layer::Dense(d) => {
                    let y = d.forward(batch, x);
                    saved.push(x.to_vec());
                    outputs.push(y);
                }
            }
        }
        let feat = outputs.last().map_or(input, |v| v.as_slice());
        Cache {
            logits: self.class_head.forward(batch, feat),
            cue_raw: self.cue_head.forward(batch, feat),
            vue_raw: self.vue_head.forward(batch, feat),
            saved,
            outputs,
        }
    }

    /// Batched forward pass. `input` holds whole samples back to back in
    /// the spec's input layout.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardOutput, NeuralError> {
        let batch = self.check_input(input)?;
        let cache = self.forward_cached(batch, input);
        let s = &self.spec;
        Ok(ForwardOutput {
            class_probs: Tensor::from_values(&[batch, s.num_classes], softmax_rows(&cache.logits, s.num_classes)),
            class_logits: Tensor::from_values(&[batch, s.num_classes], cache.logits),
            p_cue: Tensor::from_values(&[batch, s.num_cue], relu(&cache.cue_raw)),
            p_vue: Tensor::from_values(&[batch, s.num_vue], relu(&cache.vue_raw)),
        })
    }

    fn check_targets(&self, batch: usize, targets: &Targets) -> Result<(), NeuralError> {
        let s = &self.spec;
        if targets.classes.len() != batch
            || targets.p_cue.len() != batch * s.num_cue
            || targets.p_vue.len() != batch * s.num_vue
        {
            return Err(NeuralError::Shape(format!(
                "targets do not match a batch of {batch} (classes {}, p_cue {}, p_vue {})",
                targets.classes.len(),
                targets.p_cue.len(),
                targets.p_vue.len()
            )));
        }
        if let Some(&c) = targets.classes.iter().find(|&&c| c >= s.num_classes) {
            return Err(NeuralError::Shape(format!("target class {c} out of range {}", s.num_classes)));
        }
        Ok(())
    }

    /// Loss breakdown for a batch without gradients.
    pub fn batch_loss(&self, input: &[f64], targets: &Targets, weights: LossWeights) -> Result<LossBreakdown, NeuralError> {
        let out = self.forward(input)?;
        self.check_targets(out.class_probs.shape[0], targets)?;
        Ok(loss(&out.class_probs.values, &out.p_cue.values, &out.p_vue.values, targets, weights))
    }

    /// Loss and exact gradients of the batch-mean loss, one buffer per
    /// parameter tensor in [`Network::params`] order.
    pub fn loss_and_gradients(
        &self,
        input: &[f64],
        targets: &Targets,
        weights: LossWeights,
    ) -> Result<(LossBreakdown, Vec<Vec<f64>>), NeuralError> {
        let batch = self.check_input(input)?;
        self.check_targets(batch, targets)?;
        let per = self.spec.input_len();
        let (m, n) = (self.spec.num_cue, self.spec.num_vue);
        let chunks = batch.div_ceil(GRAD_CHUNK);
        let inv_k = 1.0 / batch as f64;
        let parts = par::map_range(chunks, |ci| {
            let lo = ci * GRAD_CHUNK;
            let hi = (lo + GRAD_CHUNK).min(batch);
            let sub = Targets {
                classes: targets.classes[lo..hi].to_vec(),
                p_cue: targets.p_cue[lo * m..hi * m].to_vec(),
                p_vue: targets.p_vue[lo * n..hi * n].to_vec(),
            };
            self.chunk_gradients(hi - lo, &input[lo * per..hi * per], &sub, weights, inv_k)
        });
        let mut total = LossBreakdown::default();
        let mut grads: Vec<Vec<f64>> = self.params().iter().map(|t| vec![0.0; t.len()]).collect();
        for (l, g) in parts {
            total.add(&l);
            for (acc, part) in grads.iter_mut().zip(&g) {
                for (a, p) in acc.iter_mut().zip(part) {
                    *a += p;
                }
            }
        }
        total.scale(inv_k);
        Ok((total, grads))
    }

    /// Loss sums and gradient contributions (already divided by the full
    /// batch size via `inv_k`) for one chunk.
    fn chunk_gradients(
        &self,
        batch: usize,
        input: &[f64],
        targets: &Targets,
        weights: LossWeights,
        inv_k: f64,
    ) -> (LossBreakdown, Vec<Vec<f64>>) {
        let s = &self.spec;
        let cache = self.forward_cached(batch, input);
        let probs = softmax_rows(&cache.logits, s.num_classes);
        let p_cue = relu(&cache.cue_raw);
        let p_vue = relu(&cache.vue_raw);
        let sums = sample_loss_sums(&probs, &p_cue, &p_vue, targets, weights);

        let mut d_logits = probs;
        for (i, &y) in targets.classes.iter().enumerate() {
            let row = &mut d_logits[i * s.num_classes..][..s.num_classes];
            if row[y] < PROB_FLOOR {
                // The clamp is active, so the loss is locally constant.
                row.iter_mut().for_each(|v| *v = 0.0);
            } else {
                row[y] -= 1.0;
                row.iter_mut().for_each(|v| *v *= inv_k);
            }
        }
        let power_grad = |raw: &[f64], pred: &[f64], target: &[f64], w: f64| -> Vec<f64> {
            raw.iter()
                .zip(pred)
                .zip(target)
                .map(|((&z, &p), &t)| if z > 0.0 { 2.0 * w * (p - t) * inv_k } else { 0.0 })
                .collect()
        };
        let d_cue = power_grad(&cache.cue_raw, &p_cue, &targets.p_cue, weights.alpha);
        let d_vue = power_grad(&cache.vue_raw, &p_vue, &targets.p_vue, weights.beta);

        let mut grads: Vec<Vec<f64>> = self.params().iter().map(|t| vec![0.0; t.len()]).collect();
        let nt = self.trunk.len();
        let feat = cache.outputs.last().map_or(input, |v| v.as_slice());
        let need = nt > 0;
        let mut d_feat: Option<Vec<f64>> = None;
        for (hi, (head, d)) in
            [(&self.class_head, d_logits), (&self.cue_head, d_cue), (&self.vue_head, d_vue)].into_iter().enumerate()
        {
            let (gw, gb) = two_mut(&mut grads, 2 * nt + 2 * hi);
            // Linear heads ignore the output argument.
            if let Some(dx) = head.backward(batch, feat, &[], d, gw, gb, need) {
                match &mut d_feat {
                    None => d_feat = Some(dx),
                    Some(acc) => acc.iter_mut().zip(&dx).for_each(|(a, b)| *a += b),
                }
            }
        }
        let mut grad = d_feat;
        for li in (0..nt).rev() {
            let (gw, gb) = two_mut(&mut grads, 2 * li);
            let g = grad.take().expect("gradient flows into every trunk layer");
            let out = &cache.outputs[li];
            grad = match &self.trunk[li] {
                Layer::Conv(c) => c.backward(batch, &cache.saved[li], out, g, gw, gb, li > 0),
                Layer::Dense(d) => d.backward(batch, &cache.saved[li], out, g, gw, gb, li > 0),
            };
        }
        (sums, grads)
    }
}

fn two_mut(v: &mut [Vec<f64>], i: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = v.split_at_mut(i + 1);
    (&mut a[i], &mut b[0])
}
