//! The image classifier: a compact convolutional network trained from
//! scratch with plain SGD.
//!
//! Stack: three conv(3x3, pad 1) + ReLU + maxpool blocks with 8/16/32
//! filters, then dense(64) + ReLU, dense(2), softmax. Class 0 is
//! legitimate, class 1 phishing; an exact softmax tie predicts class 0.
//! All arithmetic is f64 and every pass is single threaded so a (seed,
//! data, config) triple fully determines the trained parameters.

mod net;

use std::path::Path;

use crate::bytevis::{decode_png, Rgb, VisImage};
use crate::rng::Rng;
use crate::store::Sample;
use crate::{Error, Label, Result};

use net::{Act, Gradients, Layer, Network};

/// Training hyperparameters. The defaults (learning rate 0.005, 4000 steps)
/// are the experiment configuration this project ships with.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Network input side; must be divisible by 8. 64 by default: renders
    /// are 128px and get average-pooled down before training.
    pub input_side: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.005,
            steps: 4000,
            batch_size: 32,
            seed: 42,
            input_side: 64,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.input_side == 0 || !self.input_side.is_multiple_of(8) {
            return Err(Error::BadShape(format!(
                "input side {} must be divisible by 8",
                self.input_side
            )));
        }
        if self.learning_rate <= 0.0 || self.steps == 0 || self.batch_size == 0 {
            return Err(Error::BadShape(
                "learning rate, steps and batch size must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// A classification outcome: the argmax label and its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub label: Label,
    /// Max softmax probability; in [0.5, 1] for two classes.
    pub confidence: f64,
}

/// The trained (or freshly initialized) network.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    net: Network,
}

/// One sample ready for training or evaluation.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub image: VisImage,
    pub label: Label,
}

/// Per-step mean batch losses from a training run.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub losses: Vec<f64>,
}

/// Parameter gradients, exposed tensor-by-tensor for checking.
#[derive(Debug, Clone)]
pub struct ModelGradients {
    grads: Gradients,
    names: Vec<String>,
}

impl ModelGradients {
    pub fn tensor_count(&self) -> usize {
        self.names.len()
    }

    pub fn tensor(&self, idx: usize) -> &[f64] {
        let (layer, which) = tensor_location(&self.grads.per_layer, idx);
        let pg = self.grads.per_layer[layer].as_ref().unwrap();
        if which == 0 {
            &pg.weights
        } else {
            &pg.biases
        }
    }

    pub fn tensor_name(&self, idx: usize) -> &str {
        &self.names[idx]
    }
}

fn tensor_location(per_layer: &[Option<net::ParamGrad>], idx: usize) -> (usize, usize) {
    let mut seen = 0usize;
    for (li, slot) in per_layer.iter().enumerate() {
        if slot.is_some() {
            if idx == seen * 2 || idx == seen * 2 + 1 {
                return (li, idx - seen * 2);
            }
            seen += 1;
        }
    }
    panic!("tensor index {idx} out of range");
}

/// Initialize a model: He-normal weights from the config seed, zero biases.
/// Same seed, bit-identical parameters.
pub fn init_model(cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed).derive(1);
    let side = cfg.input_side;
    let flat = 32 * (side / 8) * (side / 8);
    let layers = vec![
        Layer::conv(3, 8, &mut rng),
        Layer::Relu,
        Layer::MaxPool2,
        Layer::conv(8, 16, &mut rng),
        Layer::Relu,
        Layer::MaxPool2,
        Layer::conv(16, 32, &mut rng),
        Layer::Relu,
        Layer::MaxPool2,
        Layer::Flatten,
        Layer::dense(flat, 64, &mut rng),
        Layer::Relu,
        Layer::dense(64, 2, &mut rng),
    ];
    Ok(Model {
        net: Network {
            input_c: 3,
            input_side: side,
            layers,
        },
    })
}

/// Block-average an image down to `out_side` (channel means rounded to the
/// nearest integer). `out_side` must divide the image side.
pub fn downsample(img: &VisImage, out_side: usize) -> Result<VisImage> {
    let side = img.side();
    if out_side == 0 || !side.is_multiple_of(out_side) {
        return Err(Error::BadShape(format!(
            "cannot downsample {side}px to {out_side}px"
        )));
    }
    let block = side / out_side;
    if block == 1 {
        return Ok(img.clone());
    }
    let norm = (block * block) as f64;
    let mut pixels = Vec::with_capacity(out_side * out_side);
    for oy in 0..out_side {
        for ox in 0..out_side {
            let (mut r, mut g, mut b) = (0u32, 0u32, 0u32);
            for dy in 0..block {
                for dx in 0..block {
                    let px = img.get(ox * block + dx, oy * block + dy);
                    r += px.r as u32;
                    g += px.g as u32;
                    b += px.b as u32;
                }
            }
            pixels.push(Rgb {
                r: (r as f64 / norm).round() as u8,
                g: (g as f64 / norm).round() as u8,
                b: (b as f64 / norm).round() as u8,
            });
        }
    }
    VisImage::from_pixels(out_side, pixels)
}

fn input_act(model: &Model, img: &VisImage) -> Result<Act> {
    let side = model.net.input_side;
    if img.side() != side {
        return Err(Error::BadShape(format!(
            "image is {}px, model expects {side}px",
            img.side()
        )));
    }
    Ok(image_planes(img))
}

impl Model {
    pub fn input_side(&self) -> usize {
        self.net.input_side
    }

    /// Number of parameter tensors (weights and biases per parametric
    /// layer, in declaration order).
    pub fn param_tensor_count(&self) -> usize {
        self.net
            .layers
            .iter()
            .filter(|l| matches!(l, Layer::Conv(_) | Layer::Dense(_)))
            .count()
            * 2
    }

    pub fn param_tensor(&self, idx: usize) -> &[f64] {
        let (li, which) = self.locate(idx);
        match &self.net.layers[li] {
            Layer::Conv(c) => {
                if which == 0 {
                    &c.weights
                } else {
                    &c.biases
                }
            }
            Layer::Dense(d) => {
                if which == 0 {
                    &d.weights
                } else {
                    &d.biases
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn param_tensor_mut(&mut self, idx: usize) -> &mut Vec<f64> {
        let (li, which) = self.locate(idx);
        match &mut self.net.layers[li] {
            Layer::Conv(c) => {
                if which == 0 {
                    &mut c.weights
                } else {
                    &mut c.biases
                }
            }
            Layer::Dense(d) => {
                if which == 0 {
                    &mut d.weights
                } else {
                    &mut d.biases
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn param_tensor_name(&self, idx: usize) -> String {
        let (li, which) = self.locate(idx);
        let kind = match &self.net.layers[li] {
            Layer::Conv(_) => "conv",
            Layer::Dense(_) => "dense",
            _ => unreachable!(),
        };
        let suffix = if which == 0 { "weights" } else { "biases" };
        format!("layer{li}.{kind}.{suffix}")
    }

    fn locate(&self, idx: usize) -> (usize, usize) {
        let mut seen = 0usize;
        for (li, layer) in self.net.layers.iter().enumerate() {
            if matches!(layer, Layer::Conv(_) | Layer::Dense(_)) {
                if idx == seen * 2 || idx == seen * 2 + 1 {
                    return (li, idx - seen * 2);
                }
                seen += 1;
            }
        }
        panic!("tensor index {idx} out of range");
    }
}

/// Class probabilities (legitimate, phishing) for an image.
pub fn forward(model: &Model, img: &VisImage) -> Result<[f64; 2]> {
    let input = input_act(model, img)?;
    let acts = model.net.forward_full(&input);
    let probs = net::softmax(&acts.last().unwrap().data);
    Ok([probs[0], probs[1]])
}

/// Argmax verdict; exact ties go to class 0 (legitimate).
pub fn predict(model: &Model, img: &VisImage) -> Result<Verdict> {
    let probs = forward(model, img)?;
    let label = if probs[1] > probs[0] {
        Label::Phishing
    } else {
        Label::Legitimate
    };
    Ok(Verdict {
        label,
        confidence: probs[0].max(probs[1]),
    })
}

/// Mean cross-entropy loss of a batch.
pub fn batch_loss(model: &Model, batch: &[(&VisImage, Label)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::BadShape("empty batch".to_string()));
    }
    let mut total = 0.0;
    for (img, label) in batch {
        let input = input_act(model, img)?;
        let acts = model.net.forward_full(&input);
        let probs = net::softmax(&acts.last().unwrap().data);
        total += net::cross_entropy(&probs, label.class_index());
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of the mean cross-entropy loss over the batch with respect to
/// every parameter.
pub fn gradients(model: &Model, batch: &[(&VisImage, Label)]) -> Result<ModelGradients> {
    if batch.is_empty() {
        return Err(Error::BadShape("empty batch".to_string()));
    }
    let mut grads = Gradients::zeros_like(&model.net);
    let scale = 1.0 / batch.len() as f64;
    for (img, label) in batch {
        let input = input_act(model, img)?;
        accumulate_example(&model.net, &input, label.class_index(), scale, &mut grads);
    }
    let names = (0..model.param_tensor_count())
        .map(|i| model.param_tensor_name(i))
        .collect();
    Ok(ModelGradients { grads, names })
}

fn accumulate_example(net: &Network, input: &Act, label: usize, scale: f64, grads: &mut Gradients) {
    let acts = net.forward_full(input);
    let probs = net::softmax(&acts.last().unwrap().data);
    let mut d_logits: Vec<f64> = probs.iter().map(|&p| p * scale).collect();
    d_logits[label] -= scale;
    net.backward_accumulate(&acts, d_logits, grads);
}

/// Train a fresh model with plain SGD over seeded-shuffled epochs.
///
/// Each epoch shuffles the sample order, consumes it in `batch_size` chunks
/// (the final chunk of an epoch may be smaller), and reshuffles when
/// exhausted, so every image is reused across the run.
pub fn train(samples: &[TrainSample], cfg: &TrainConfig) -> Result<(Model, TrainingLog)> {
    cfg.validate()?;
    let has_phish = samples.iter().any(|s| s.label == Label::Phishing);
    let has_legit = samples.iter().any(|s| s.label == Label::Legitimate);
    if !has_phish || !has_legit {
        return Err(Error::DegenerateDataset);
    }
    let inputs: Vec<Act> = samples
        .iter()
        .map(|s| {
            if s.image.side() != cfg.input_side {
                return Err(Error::BadShape(format!(
                    "sample image is {}px, config wants {}px",
                    s.image.side(),
                    cfg.input_side
                )));
            }
            Ok(image_planes(&s.image))
        })
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label.class_index()).collect();

    let mut model = init_model(cfg)?;
    let mut shuffle_rng = Rng::new(cfg.seed).derive(2);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    shuffle_rng.shuffle(&mut order);
    let mut cursor = 0usize;

    let mut log = TrainingLog::default();
    for _step in 0..cfg.steps {
        if cursor >= order.len() {
            shuffle_rng.shuffle(&mut order);
            cursor = 0;
        }
        let take = cfg.batch_size.min(order.len() - cursor);
        let batch = &order[cursor..cursor + take];
        cursor += take;

        let mut grads = Gradients::zeros_like(&model.net);
        let scale = 1.0 / take as f64;
        let mut loss = 0.0;
        for &si in batch {
            let acts = model.net.forward_full(&inputs[si]);
            let probs = net::softmax(&acts.last().unwrap().data);
            loss += net::cross_entropy(&probs, labels[si]) * scale;
            let mut d_logits: Vec<f64> = probs.iter().map(|&p| p * scale).collect();
            d_logits[labels[si]] -= scale;
            model.net.backward_accumulate(&acts, d_logits, &mut grads);
        }
        assert!(loss.is_finite(), "training loss diverged at step {_step}");
        model.net.sgd_step(&grads, cfg.learning_rate);
        log.losses.push(loss);
    }
    Ok((model, log))
}

fn image_planes(img: &VisImage) -> Act {
    let side = img.side();
    let hw = side * side;
    let mut act = Act::new(3, side, side);
    for (i, px) in img.pixels().iter().enumerate() {
        act.data[i] = px.r as f64 / 255.0;
        act.data[hw + i] = px.g as f64 / 255.0;
        act.data[2 * hw + i] = px.b as f64 / 255.0;
    }
    act
}

/// Load manifest samples from disk and pool them down to `input_side`.
/// Paths resolve relative to `base_dir` (the manifest's directory).
pub fn load_samples(
    manifest: &[Sample],
    base_dir: &Path,
    input_side: usize,
) -> Result<Vec<TrainSample>> {
    manifest
        .iter()
        .map(|sample| {
            let bytes = std::fs::read(base_dir.join(&sample.path))?;
            let img = decode_png(&bytes)?;
            let image = downsample(&img, input_side)?;
            Ok(TrainSample {
                image,
                label: sample.label,
            })
        })
        .collect()
}

// --- model persistence ------------------------------------------------------
//
// File layout (all integers little-endian):
//   magic "PVM1" | version u8 | input_side u32 | layer_count u32
//   per layer: tag u8 (0 conv, 1 relu, 2 pool, 3 flatten, 4 dense)
//              + dims u32 x2 (conv: in_c,out_c; dense: in_dim,out_dim; else 0,0)
//   then parameters as f64 bit patterns, weights-then-biases per parametric
//   layer in declaration order.

const MODEL_MAGIC: &[u8; 4] = b"PVM1";
const MODEL_VERSION: u8 = 1;

/// Serialize a model. `load_model(save_model(m)) == m` bit-exactly.
pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.push(MODEL_VERSION);
    out.extend_from_slice(&(model.net.input_side as u32).to_le_bytes());
    out.extend_from_slice(&(model.net.layers.len() as u32).to_le_bytes());
    for layer in &model.net.layers {
        let (tag, d0, d1) = match layer {
            Layer::Conv(c) => (0u8, c.in_c as u32, c.out_c as u32),
            Layer::Relu => (1, 0, 0),
            Layer::MaxPool2 => (2, 0, 0),
            Layer::Flatten => (3, 0, 0),
            Layer::Dense(d) => (4, d.in_dim as u32, d.out_dim as u32),
        };
        out.push(tag);
        out.extend_from_slice(&d0.to_le_bytes());
        out.extend_from_slice(&d1.to_le_bytes());
    }
    for layer in &model.net.layers {
        let (weights, biases) = match layer {
            Layer::Conv(c) => (&c.weights, &c.biases),
            Layer::Dense(d) => (&d.weights, &d.biases),
            _ => continue,
        };
        for value in weights.iter().chain(biases) {
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
    out
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let bytes = std::fs::read(path.as_ref())?;
    model_from_bytes(&bytes)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model> {
    let mut cursor = ByteCursor::new(bytes);
    if cursor.take(4)? != MODEL_MAGIC {
        return Err(Error::ModelFormat("bad magic".to_string()));
    }
    let version = cursor.take(1)?[0];
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let input_side = cursor.read_u32()? as usize;
    if input_side == 0 || input_side > 16384 {
        return Err(Error::ModelFormat(format!(
            "implausible input side {input_side}"
        )));
    }
    let layer_count = cursor.read_u32()? as usize;
    if layer_count > 1024 {
        return Err(Error::ModelFormat(format!(
            "implausible layer count {layer_count}"
        )));
    }

    let mut headers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let tag = cursor.take(1)?[0];
        let d0 = cursor.read_u32()? as usize;
        let d1 = cursor.read_u32()? as usize;
        headers.push((tag, d0, d1));
    }

    let mut layers = Vec::with_capacity(layer_count);
    for &(tag, d0, d1) in &headers {
        let layer = match tag {
            0 => {
                let n_weights = d1
                    .checked_mul(d0)
                    .and_then(|n| n.checked_mul(9))
                    .ok_or_else(|| Error::ModelFormat("conv dims overflow".to_string()))?;
                Layer::Conv(net::ConvLayer {
                    in_c: d0,
                    out_c: d1,
                    weights: cursor.read_f64s(n_weights)?,
                    biases: cursor.read_f64s(d1)?,
                })
            }
            1 => Layer::Relu,
            2 => Layer::MaxPool2,
            3 => Layer::Flatten,
            4 => {
                let n_weights = d1
                    .checked_mul(d0)
                    .ok_or_else(|| Error::ModelFormat("dense dims overflow".to_string()))?;
                Layer::Dense(net::DenseLayer {
                    in_dim: d0,
                    out_dim: d1,
                    weights: cursor.read_f64s(n_weights)?,
                    biases: cursor.read_f64s(d1)?,
                })
            }
            other => return Err(Error::ModelFormat(format!("unknown layer tag {other}"))),
        };
        layers.push(layer);
    }
    if !cursor.at_end() {
        return Err(Error::ModelFormat("trailing bytes after parameters".to_string()));
    }

    let model = Model {
        net: Network {
            input_c: 3,
            input_side,
            layers,
        },
    };
    validate_chain(&model)?;
    Ok(model)
}

/// Check that layer shapes chain from the input to a 2-way output.
fn validate_chain(model: &Model) -> Result<()> {
    let mut c = model.net.input_c;
    let mut side = model.net.input_side;
    let mut flat: Option<usize> = None;
    for (idx, layer) in model.net.layers.iter().enumerate() {
        match layer {
            Layer::Conv(conv) => {
                if flat.is_some() || conv.in_c != c {
                    return Err(Error::ModelFormat(format!(
                        "layer {idx}: conv expects {} channels, pipeline has {c}",
                        conv.in_c
                    )));
                }
                c = conv.out_c;
            }
            Layer::Relu => {}
            Layer::MaxPool2 => {
                if flat.is_some() || !side.is_multiple_of(2) {
                    return Err(Error::ModelFormat(format!(
                        "layer {idx}: cannot pool {side}px"
                    )));
                }
                side /= 2;
            }
            Layer::Flatten => {
                if flat.is_some() {
                    return Err(Error::ModelFormat("duplicate flatten".to_string()));
                }
                flat = Some(c * side * side);
            }
            Layer::Dense(dense) => {
                let dim = flat.ok_or_else(|| {
                    Error::ModelFormat(format!("layer {idx}: dense before flatten"))
                })?;
                if dense.in_dim != dim {
                    return Err(Error::ModelFormat(format!(
                        "layer {idx}: dense expects {} inputs, pipeline has {dim}",
                        dense.in_dim
                    )));
                }
                flat = Some(dense.out_dim);
            }
        }
    }
    if flat != Some(2) {
        return Err(Error::ModelFormat(format!(
            "network output is {flat:?}, expected 2 classes"
        )));
    }
    Ok(())
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn new(bytes: &'a [u8]) -> ByteCursor<'a> {
        ByteCursor { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::ModelFormat("unexpected end of file".to_string()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn read_u32(&mut self) -> Result<u32> {
        let bytes = self.take(4)?;
        Ok(u32::from_le_bytes(bytes.try_into().unwrap()))
    }

    fn read_f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let need = n
            .checked_mul(8)
            .ok_or_else(|| Error::ModelFormat("parameter count overflow".to_string()))?;
        let raw = self.take(need)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
