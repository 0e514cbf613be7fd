//! The eavesdropper's learners: a compact CNN for naming the transmitter and
//! a convolutional autoencoder for spotting a target's jammed emissions,
//! with their training loops and evaluation metrics.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::FingerprintImage;
use crate::nn::{softmax, LayerSpec, Loss, Network, Optimizer, OptimizerState, Shape};

pub const MODEL_MAGIC: &[u8; 4] = b"RFJM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.01,
            optimizer: Optimizer::Sgd { momentum: 0.9 },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub conv_filters: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            conv_filters: vec![8, 16, 32],
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub conv_filters: Vec<usize>,
    pub bottleneck: usize,
    pub train: TrainConfig,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            conv_filters: vec![8, 16, 16],
            bottleneck: 64,
            train: TrainConfig {
                epochs: 30,
                learning_rate: 1e-3,
                optimizer: Optimizer::adam(),
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Training-set metric after the final epoch (accuracy for the
    /// classifier, mean reconstruction error for the autoencoder).
    pub final_train_metric: f64,
    pub best_val_accuracy: Option<f64>,
    pub best_epoch: usize,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub net: Network,
    pub n_classes: usize,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub net: Network,
    pub image_size: usize,
    pub bottleneck: usize,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: FingerprintImage,
    pub label: usize,
}

pub fn image_input(img: &FingerprintImage) -> Vec<f64> {
    img.pixels.iter().map(|&p| p as f64).collect()
}

pub fn classifier_layers(conv_filters: &[usize], n_classes: usize) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for &f in conv_filters {
        specs.extend([LayerSpec::Conv3x3 { filters: f }, LayerSpec::Relu, LayerSpec::AvgPool2]);
    }
    specs.push(LayerSpec::Dense { units: n_classes });
    specs
}

pub fn autoencoder_layers(size: usize, conv_filters: &[usize], bottleneck: usize) -> Result<Vec<LayerSpec>> {
    let depth = conv_filters.len();
    if depth == 0 || size % (1 << depth) != 0 {
        return Err(Error::invalid(format!(
            "image size {size} must be divisible by 2^{depth}"
        )));
    }
    if bottleneck == 0 || bottleneck >= size * size {
        return Err(Error::invalid(format!(
            "bottleneck {bottleneck} must be in [1, {}) to compress the input",
            size * size
        )));
    }
    let inner = size >> depth;
    let last = *conv_filters.last().unwrap();
    let mut specs = Vec::new();
    for &f in conv_filters {
        specs.extend([LayerSpec::Conv3x3 { filters: f }, LayerSpec::Relu, LayerSpec::AvgPool2]);
    }
    specs.extend([
        LayerSpec::Dense { units: bottleneck },
        LayerSpec::Relu,
        LayerSpec::Dense { units: last * inner * inner },
        LayerSpec::Relu,
        LayerSpec::Reshape { c: last, h: inner, w: inner },
    ]);
    for (k, &f) in conv_filters.iter().enumerate().rev() {
        specs.push(LayerSpec::Upsample2);
        if k == 0 {
            specs.extend([LayerSpec::Conv3x3 { filters: 1 }, LayerSpec::Sigmoid]);
        } else {
            specs.extend([LayerSpec::Conv3x3 { filters: f }, LayerSpec::Relu]);
        }
    }
    Ok(specs)
}

fn check_square(images: &[&FingerprintImage]) -> Result<usize> {
    let size = images.first().ok_or_else(|| Error::invalid("empty image set"))?.size;
    if images.iter().any(|i| i.size != size || i.pixels.len() != size * size) {
        return Err(Error::invalid("images in a set must share one size"));
    }
    Ok(size)
}

/// Canonical order of a set: by label, then pixel content. Training shuffles
/// this order, so results do not depend on how the caller stored the set.
fn canonical_order(items: &[(&FingerprintImage, usize)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ia, la) = items[a];
        let (ib, lb) = items[b];
        la.cmp(&lb).then_with(|| {
            ia.pixels
                .iter()
                .zip(&ib.pixels)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    idx
}

fn validate_train(cfg: &TrainConfig) -> Result<()> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::invalid("epochs and batch size must be positive"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    Ok(())
}

/// Runs mini-batch training over `items`; `on_epoch` is called after each
/// epoch with the network and the epoch's mean loss.
fn fit<F>(
    net: &mut Network,
    items: &[(Vec<f64>, Loss)],
    order: Vec<usize>,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<()>
where
    F: FnMut(usize, &Network, f64) -> Result<()>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let mut opt = OptimizerState::new(cfg.optimizer, net.n_params());
    let mut grad = vec![0.0; net.n_params()];
    let mut order = order;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let (x, loss) = &items[i];
                total += net.accumulate(x, loss, &mut grad, None)?;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(&mut net.params, &grad, cfg.learning_rate);
        }
        let mean = total / items.len() as f64;
        if !mean.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::TrainingDiverged { epoch, loss: mean });
        }
        on_epoch(epoch, net, mean)?;
    }
    Ok(())
}

/// Trains the compact CNN on cross-entropy and keeps the weights from the
/// epoch with the best validation accuracy (earliest on ties).
pub fn train_classifier(train: &[LabeledImage], val: &[LabeledImage], cfg: &ClassifierConfig) -> Result<ClassifierModel> {
    validate_train(&cfg.train)?;
    let all: Vec<&FingerprintImage> = train.iter().chain(val).map(|l| &l.image).collect();
    let size = check_square(&all)?;
    let n_classes = train.iter().map(|l| l.label).max().unwrap_or(0) + 1;
    if n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    for c in 0..n_classes {
        for (name, set) in [("training", train), ("validation", val)] {
            if !set.iter().any(|l| l.label == c) {
                return Err(Error::invalid(format!("class {c} missing from the {name} set")));
            }
        }
    }
    if val.iter().any(|l| l.label >= n_classes) {
        return Err(Error::invalid("validation label outside the training classes"));
    }

    let mut net = Network::new(
        Shape::new(1, size, size),
        &classifier_layers(&cfg.conv_filters, n_classes),
        cfg.train.seed,
    )?;
    let keyed: Vec<(&FingerprintImage, usize)> = train.iter().map(|l| (&l.image, l.label)).collect();
    let order = canonical_order(&keyed);
    let train_inputs: Vec<(Vec<f64>, usize)> = train.iter().map(|l| (image_input(&l.image), l.label)).collect();
    let items: Vec<(Vec<f64>, Loss)> = train_inputs
        .iter()
        .map(|(x, l)| (x.clone(), Loss::CrossEntropy(*l)))
        .collect();
    let val_inputs: Vec<(Vec<f64>, usize)> = val.iter().map(|l| (image_input(&l.image), l.label)).collect();

    let mut best = (f64::NEG_INFINITY, 0usize, net.params.clone());
    let mut history = Vec::new();
    fit(&mut net, &items, order, &cfg.train, |epoch, net, loss| {
        history.push(loss);
        let acc = accuracy_of(net, &val_inputs)?;
        if acc > best.0 {
            best = (acc, epoch, net.params.clone());
        }
        Ok(())
    })?;
    let final_train = accuracy_of(&net, &train_inputs)?;
    net.params = best.2;
    Ok(ClassifierModel {
        net,
        n_classes,
        meta: TrainingMeta {
            seed: cfg.train.seed,
            epochs: cfg.train.epochs,
            learning_rate: cfg.train.learning_rate,
            final_train_metric: final_train,
            best_val_accuracy: Some(best.0),
            best_epoch: best.1,
            loss_history: history,
        },
    })
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    best
}

fn accuracy_of(net: &Network, set: &[(Vec<f64>, usize)]) -> Result<f64> {
    let mut hits = 0;
    for (x, label) in set {
        if argmax(&net.forward(x)?) == *label {
            hits += 1;
        }
    }
    Ok(hits as f64 / set.len().max(1) as f64)
}

/// Predicted class (lowest index on ties) and the softmax probabilities.
pub fn predict(model: &ClassifierModel, image: &FingerprintImage) -> Result<(usize, Vec<f64>)> {
    let shape = model.net.input_shape();
    if image.size != shape.h || image.pixels.len() != shape.len() {
        return Err(Error::invalid(format!(
            "image is {}x{}, model expects {}x{}",
            image.size, image.size, shape.h, shape.w
        )));
    }
    let p = softmax(&model.net.forward(&image_input(image))?);
    Ok((argmax(&p), p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_pairs(n_classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut counts = vec![vec![0; n_classes]; n_classes];
        for (t, p) in pairs {
            if t >= n_classes || p >= n_classes {
                return Err(Error::invalid(format!("label out of range: ({t}, {p})")));
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..self.counts.len()).map(|k| self.counts[k][k]).sum();
        diag as f64 / self.total().max(1) as f64
    }
}

pub fn evaluate_accuracy(model: &ClassifierModel, test: &[LabeledImage]) -> Result<(f64, ConfusionMatrix)> {
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let pairs = test
        .iter()
        .map(|l| predict(model, &l.image).map(|(p, _)| (l.label, p)))
        .collect::<Result<Vec<_>>>()?;
    let m = ConfusionMatrix::from_pairs(model.n_classes, pairs)?;
    Ok((m.accuracy(), m))
}

/// Trains the autoencoder on mean squared reconstruction error. The loss
/// history holds the mean training-set reconstruction error measured after
/// each epoch.
pub fn train_autoencoder(train: &[FingerprintImage], cfg: &AutoencoderConfig) -> Result<AutoencoderModel> {
    validate_train(&cfg.train)?;
    let refs: Vec<&FingerprintImage> = train.iter().collect();
    let size = check_square(&refs)?;
    let specs = autoencoder_layers(size, &cfg.conv_filters, cfg.bottleneck)?;
    let mut net = Network::new(Shape::new(1, size, size), &specs, cfg.train.seed)?;
    let keyed: Vec<(&FingerprintImage, usize)> = train.iter().map(|i| (i, 0)).collect();
    let order = canonical_order(&keyed);
    let items: Vec<(Vec<f64>, Loss)> = train
        .iter()
        .map(|i| {
            let x = image_input(i);
            (x.clone(), Loss::Mse(x))
        })
        .collect();
    let mut history = Vec::new();
    fit(&mut net, &items, order, &cfg.train, |_, net, _| {
        let mut sum = 0.0;
        for (x, l) in &items {
            sum += net.loss(x, l)?;
        }
        history.push(sum / items.len() as f64);
        Ok(())
    })?;
    Ok(AutoencoderModel {
        net,
        image_size: size,
        bottleneck: cfg.bottleneck,
        meta: TrainingMeta {
            seed: cfg.train.seed,
            epochs: cfg.train.epochs,
            learning_rate: cfg.train.learning_rate,
            final_train_metric: *history.last().unwrap_or(&f64::NAN),
            best_val_accuracy: None,
            best_epoch: cfg.train.epochs.saturating_sub(1),
            loss_history: history,
        },
    })
}

pub fn mean_squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64
}

pub fn reconstruction_error(model: &AutoencoderModel, image: &FingerprintImage) -> Result<f64> {
    if image.size != model.image_size || image.pixels.len() != model.image_size * model.image_size {
        return Err(Error::invalid(format!(
            "image is {}x{}, model expects {}x{}",
            image.size, image.size, model.image_size, model.image_size
        )));
    }
    let x = image_input(image);
    Ok(mean_squared_error(&model.net.forward(&x)?, &x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Score threshold for each point (`score >= t` is called positive);
    /// the first is `+inf`.
    #[serde(with = "float_list")]
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// Float lists that may hold infinities, which JSON numbers cannot carry;
/// non-finite entries travel as the strings `"inf"`, `"-inf"` and `"nan"`.
mod float_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| {
                if x.is_finite() {
                    Repr::Num(x)
                } else if x.is_nan() {
                    Repr::Text("nan".into())
                } else if x > 0.0 {
                    Repr::Text("inf".into())
                } else {
                    Repr::Text("-inf".into())
                }
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(x) => Ok(x),
                Repr::Text(t) => match t.as_str() {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    _ => Err(serde::de::Error::custom(format!("bad float {t:?}"))),
                },
            })
            .collect()
    }
}

/// ROC over every distinct score and its trapezoidal area. Tied scores
/// produce a diagonal segment, so the area equals the Mann–Whitney
/// probability `P(pos > neg) + P(pos = neg) / 2`. The area is accumulated
/// in integer counts and divided once.
pub fn roc_and_auc(positive: &[f64], negative: &[f64]) -> Result<RocCurve> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::invalid("both score sets must be nonempty"));
    }
    if positive.iter().chain(negative).any(|s| s.is_nan()) {
        return Err(Error::invalid("scores must not be NaN"));
    }
    let mut all: Vec<(f64, bool)> = positive
        .iter()
        .map(|&s| (s, true))
        .chain(negative.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (np, nn) = (positive.len() as u128, negative.len() as u128);
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u128, 0u128);
    let mut twice_area = 0u128;
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < all.len() && all[i].0 == t {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp0) * (tp + tp0);
        points.push((fp as f64 / nn as f64, tp as f64 / np as f64));
        thresholds.push(t);
    }
    Ok(RocCurve {
        points,
        thresholds,
        auc: twice_area as f64 / (2 * np * nn) as f64,
    })
}

/// `P(pos > neg) + P(pos = neg) / 2` by comparing every pair.
pub fn pairwise_auc(positive: &[f64], negative: &[f64]) -> f64 {
    let mut twice = 0u128;
    for &p in positive {
        for &n in negative {
            twice += match p.partial_cmp(&n) {
                Some(Ordering::Greater) => 2,
                Some(Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    twice as f64 / (2 * positive.len() as u128 * negative.len() as u128) as f64
}

pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelHeader {
    Classifier {
        input: Shape,
        layers: Vec<LayerSpec>,
        n_classes: usize,
        meta: TrainingMeta,
    },
    Autoencoder {
        input: Shape,
        layers: Vec<LayerSpec>,
        image_size: usize,
        bottleneck: usize,
        meta: TrainingMeta,
    },
}

fn write_container<W: Write>(out: &mut W, header: &ModelHeader, params: &[f64]) -> Result<()> {
    let io = |e| Error::io("<model writer>", e);
    let json = serde_json::to_vec(header)?;
    out.write_all(MODEL_MAGIC).map_err(io)?;
    out.write_all(&MODEL_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(json.len() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&json).map_err(io)?;
    out.write_all(&(params.len() as u64).to_le_bytes()).map_err(io)?;
    let mut buf = Vec::with_capacity(params.len() * 4);
    for &p in params {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
    out.write_all(&buf).map_err(io)
}

fn read_container<R: Read>(input: &mut R) -> Result<(ModelHeader, Network)> {
    let bad = |m: &str| Error::ModelFormat(m.to_string());
    let mut word = [0u8; 4];
    input.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    if &word != MODEL_MAGIC {
        return Err(bad("not a model file"));
    }
    input.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let version = u32::from_le_bytes(word);
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {version}, expected {MODEL_VERSION}"
        )));
    }
    input.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
    input.read_exact(&mut json).map_err(|_| bad("truncated descriptor"))?;
    let header: ModelHeader = serde_json::from_slice(&json).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let (input_shape, layers) = match &header {
        ModelHeader::Classifier { input, layers, .. } | ModelHeader::Autoencoder { input, layers, .. } => {
            (*input, layers.clone())
        }
    };
    let mut net = Network::zeros(input_shape, &layers).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let mut count = [0u8; 8];
    input.read_exact(&mut count).map_err(|_| bad("truncated weights"))?;
    let n = u64::from_le_bytes(count) as usize;
    if n != net.n_params() {
        return Err(Error::ModelFormat(format!(
            "weight count {n} does not match architecture ({})",
            net.n_params()
        )));
    }
    let mut buf = vec![0u8; n * 4];
    input.read_exact(&mut buf).map_err(|_| bad("truncated weights"))?;
    for (p, b) in net.params.iter_mut().zip(buf.chunks_exact(4)) {
        *p = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest).map_err(|_| bad("read error"))?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes after weights"));
    }
    Ok((header, net))
}

impl ClassifierModel {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = ModelHeader::Classifier {
            input: self.net.input_shape(),
            layers: self.net.specs().to_vec(),
            n_classes: self.n_classes,
            meta: self.meta.clone(),
        };
        write_container(out, &header, &self.net.params)
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        match read_container(input)? {
            (ModelHeader::Classifier { n_classes, meta, .. }, net) => {
                if net.output_shape().len() != n_classes {
                    return Err(Error::ModelFormat("output width differs from class count".into()));
                }
                Ok(Self { net, n_classes, meta })
            }
            _ => Err(Error::ModelFormat("file holds an autoencoder, not a classifier".into())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
        Self::read_from(&mut f)
    }
}

impl AutoencoderModel {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = ModelHeader::Autoencoder {
            input: self.net.input_shape(),
            layers: self.net.specs().to_vec(),
            image_size: self.image_size,
            bottleneck: self.bottleneck,
            meta: self.meta.clone(),
        };
        write_container(out, &header, &self.net.params)
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        match read_container(input)? {
            (ModelHeader::Autoencoder { image_size, bottleneck, meta, .. }, net) => {
                if net.output_shape() != net.input_shape() {
                    return Err(Error::ModelFormat("decoder output differs from input shape".into()));
                }
                Ok(Self { net, image_size, bottleneck, meta })
            }
            _ => Err(Error::ModelFormat("file holds a classifier, not an autoencoder".into())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
        Self::read_from(&mut f)
    }
}
