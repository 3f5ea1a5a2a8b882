//! Binary model checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "V2XNNCKP" | version u32
//! kind u8 | input h, w, c u32 | num_classes, num_cue, num_vue u32
//! layer count u32, then per layer:
//!   0u8 kh kw out_ch u32 padding u8 activation u8   (conv2d)
//!   1u8 width u32 activation u8                      (dense)
//! feature source u8 | normalizer mean[4], std[4] f64 | p_max cue, vue f64
//! parameter count u64 | parameters f32, in declaration order
//! ```

use std::fs;
use std::path::Path;

use super::features::{FeatureSource, Normalizer, GROUPS};
use super::layers::Activation;
use super::network::{LayerSpec, Network, NetworkKind, NetworkSpec, Padding};
use super::{Model, NeuralError};

pub const MAGIC: &[u8; 8] = b"V2XNNCKP";
pub const VERSION: u32 = 1;

fn act_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Identity => 1,
    }
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let spec = model.network.spec();
    let mut b = Vec::new();
    let u32le = |b: &mut Vec<u8>, v: usize| b.extend((v as u32).to_le_bytes());
    b.extend(MAGIC);
    b.extend(VERSION.to_le_bytes());
    b.push(match spec.kind {
        NetworkKind::Cnn => 0,
        NetworkKind::Dnn => 1,
    });
    for v in spec.input_shape {
        u32le(&mut b, v);
    }
    for v in [spec.num_classes, spec.num_cue, spec.num_vue, spec.layers.len()] {
        u32le(&mut b, v);
    }
    for layer in &spec.layers {
        match *layer {
            LayerSpec::Conv2d { kernel_h, kernel_w, out_channels, padding, activation } => {
                b.push(0);
                for v in [kernel_h, kernel_w, out_channels] {
                    u32le(&mut b, v);
                }
                b.push(match padding {
                    Padding::Same => 0,
                    Padding::Valid => 1,
                });
                b.push(act_code(activation));
            }
            LayerSpec::Dense { width, activation } => {
                b.push(1);
                u32le(&mut b, width);
                b.push(act_code(activation));
            }
        }
    }
    b.push(match model.features {
        FeatureSource::LargeScale => 0,
        FeatureSource::Instantaneous => 1,
    });
    for v in model.normalizer.mean.iter().chain(&model.normalizer.std).chain([&model.p_max_cue_w, &model.p_max_vue_w]) {
        b.extend(v.to_le_bytes());
    }
    let params = model.network.params();
    b.extend((params.iter().map(|t| t.len()).sum::<usize>() as u64).to_le_bytes());
    for t in params {
        for &v in &t.values {
            b.extend((v as f32).to_le_bytes());
        }
    }
    b
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        if self.buf.len() - self.pos < n {
            return Err(NeuralError::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NeuralError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NeuralError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, NeuralError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn bad<T>(what: String) -> Result<T, NeuralError> {
    Err(NeuralError::Checkpoint(what))
}

fn activation(code: u8) -> Result<Activation, NeuralError> {
    match code {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Identity),
        c => bad(format!("unknown activation code {c}")),
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Model, NeuralError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return bad("not a model checkpoint (bad magic)".into());
    }
    let version = r.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))?;
    if version != VERSION {
        return bad(format!("unsupported version {version}, expected {VERSION}"));
    }
    let kind = match r.u8()? {
        0 => NetworkKind::Cnn,
        1 => NetworkKind::Dnn,
        k => return bad(format!("unknown network kind {k}")),
    };
    let input_shape = [r.u32()?, r.u32()?, r.u32()?];
    let (num_classes, num_cue, num_vue, n_layers) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    if n_layers > 1024 {
        return bad(format!("implausible layer count {n_layers}"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        layers.push(match r.u8()? {
            0 => {
                let (kernel_h, kernel_w, out_channels) = (r.u32()?, r.u32()?, r.u32()?);
                let padding = match r.u8()? {
                    0 => Padding::Same,
                    1 => Padding::Valid,
                    p => return bad(format!("unknown padding code {p}")),
                };
                LayerSpec::Conv2d { kernel_h, kernel_w, out_channels, padding, activation: activation(r.u8()?)? }
            }
            1 => {
                let width = r.u32()?;
                LayerSpec::Dense { width, activation: activation(r.u8()?)? }
            }
            t => return bad(format!("unknown layer tag {t}")),
        });
    }
    let spec = NetworkSpec { kind, input_shape, layers, num_classes, num_cue, num_vue };
    let features = match r.u8()? {
        0 => FeatureSource::LargeScale,
        1 => FeatureSource::Instantaneous,
        f => return bad(format!("unknown feature source {f}")),
    };
    let mut normalizer = Normalizer::default();
    for g in 0..GROUPS {
        normalizer.mean[g] = r.f64()?;
    }
    for g in 0..GROUPS {
        normalizer.std[g] = r.f64()?;
    }
    let (p_max_cue_w, p_max_vue_w) = (r.f64()?, r.f64()?);
    let mut network = Network::zeroed(spec).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    let count = r.u64()?;
    if count != network.param_count() as u64 {
        return bad(format!("parameter count {count} does not match the network ({})", network.param_count()));
    }
    for t in network.params_mut() {
        for v in t.values.iter_mut() {
            *v = r.f32()? as f64;
        }
    }
    if r.pos != buf.len() {
        return bad(format!("{} trailing bytes", buf.len() - r.pos));
    }
    Ok(Model { network, normalizer, features, p_max_cue_w, p_max_vue_w })
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Model, NeuralError> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Model {
        Model {
            network: Network::initialized(NetworkSpec::dnn(3, 2), 4).unwrap(),
            normalizer: Normalizer { mean: [-90.0, -95.0, -60.0, -100.0], std: [8.0, 9.0, 7.5, 11.0] },
            features: FeatureSource::Instantaneous,
            p_max_cue_w: 0.2,
            p_max_vue_w: 0.1995,
        }
    }

    #[test]
    fn round_trip_is_exact_up_to_f32_parameters() {
        let mut m = model();
        for t in m.network.params_mut() {
            t.values.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
        let bytes = to_bytes(&m);
        assert_eq!(from_bytes(&bytes).unwrap(), m);
        assert_eq!(to_bytes(&from_bytes(&bytes).unwrap()), bytes);
    }

    #[test]
    fn cnn_round_trips_through_a_file() {
        let m = Model { network: Network::initialized(NetworkSpec::cnn(2, 2), 1).unwrap(), ..model() };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save(&m, &p).unwrap();
        let back = load(&p).unwrap();
        assert_eq!(back.network.spec(), m.network.spec());
        for (a, b) in back.network.params().iter().zip(m.network.params()) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
    }

    #[test]
    fn damaged_files_are_rejected() {
        let bytes = to_bytes(&model());
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 1]), Err(NeuralError::Checkpoint(_))));
        let mut b = bytes.clone();
        b[0] = b'X';
        assert!(from_bytes(&b).is_err());
        let mut b = bytes.clone();
        b[8] = 9;
        let err = from_bytes(&b).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
        let mut b = bytes;
        b.push(0);
        assert!(from_bytes(&b).is_err());
    }
}
