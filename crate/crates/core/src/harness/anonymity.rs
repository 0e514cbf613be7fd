//! k-anonymity (who sent this?) and T-anonymity (is this the target?)
//! evaluations over a captured dataset.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    evaluate_accuracy, reconstruction_error, roc_and_auc, train_autoencoder, train_classifier, AutoencoderModel,
    ClassifierModel, ConfusionMatrix, LabeledImage, RocCurve,
};
use crate::error::{Error, Result};
use crate::harness::capture::{derive_seed, CaptureDataset, Cell};
use crate::harness::config::ExperimentConfig;
use crate::imaging::{batch_windows, FingerprintImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Image index ranges of the time-ordered train/val/test split of `n`
/// images. Train and validation take the floor of their share; the test
/// split takes the rest.
pub fn split_ranges(n: usize, cfg: &ExperimentConfig) -> [std::ops::Range<usize>; 3] {
    let n_train = (n as f64 * cfg.split_train).floor() as usize;
    let n_val = (n as f64 * cfg.split_val).floor() as usize;
    [0..n_train, n_train..n_train + n_val, n_train + n_val..n]
}

/// The cell's images in time order, one per non-overlapping window.
pub fn cell_images(cell: &Cell, cfg: &ExperimentConfig) -> Result<Vec<FingerprintImage>> {
    batch_windows(
        &cell.symbols_f64(),
        cfg.samples_per_image,
        cfg.samples_per_image,
        cfg.image_size,
        &cfg.plane_bounds(),
    )
}

fn cell_name(cell: &Cell) -> String {
    format!(
        "device {} rjp {} attenuation {} dB",
        cell.meta.device_id, cell.meta.rjp, cell.meta.attenuation_db
    )
}

/// One split of a cell's images; errors name the cell when it is empty.
pub fn split_images(cell: &Cell, cfg: &ExperimentConfig, split: Split) -> Result<Vec<FingerprintImage>> {
    let mut images = cell_images(cell, cfg)?;
    let [tr, va, te] = split_ranges(images.len(), cfg);
    let range = match split {
        Split::Train => tr,
        Split::Val => va,
        Split::Test => te,
    };
    if range.is_empty() {
        return Err(Error::invalid(format!(
            "{}: {:?} split is empty ({} images)",
            cell_name(cell),
            split,
            images.len()
        )));
    }
    images.truncate(range.end);
    Ok(images.split_off(range.start))
}

fn find<'a>(ds: &'a CaptureDataset, device: u32, rjp: f64, att: f64) -> Result<&'a Cell> {
    ds.cell(device, rjp, att)
        .ok_or_else(|| Error::invalid(format!("no cell for device {device} rjp {rjp} attenuation {att} dB")))
}

fn unjammed_attenuations(ds: &CaptureDataset) -> Vec<f64> {
    let mut atts: Vec<f64> = Vec::new();
    for &a in &ds.config.attenuation_db {
        if ds.cells.iter().any(|c| c.meta.rjp == 0.0 && c.meta.attenuation_db == a) {
            atts.push(a);
        }
    }
    atts
}

/// A cell left out of an anonymity table, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedCell {
    pub device_id: u32,
    pub rjp: f64,
    pub attenuation_db: f64,
    pub ber: Option<f64>,
    pub reason: String,
}

impl FlaggedCell {
    fn of(cell: &Cell) -> Self {
        Self {
            device_id: cell.meta.device_id,
            rjp: cell.meta.rjp,
            attenuation_db: cell.meta.attenuation_db,
            ber: cell.meta.ber,
            reason: cell.meta.failure.clone().unwrap_or_else(|| "flagged".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMode {
    /// Train on unjammed cells, test on each cell's test split.
    Standard,
    /// Evaluate on the training split of each unjammed cell.
    Sanity,
    /// Labels permuted independently in every split, so images carry no
    /// information about them; accuracy should land near 1/k.
    ShuffledLabels { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRow {
    pub rjp: f64,
    pub attenuation_db: f64,
    /// Not clamped; may sit below 1/k.
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub mean_ber: f64,
    pub mean_snr_db: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KAnonymityResult {
    pub k: usize,
    pub rows: Vec<KRow>,
    /// Sweep points excluded because a cell failed or had nonzero BER.
    pub flagged: Vec<FlaggedCell>,
    pub best_val_accuracy: f64,
}

fn device_label(ds: &CaptureDataset, device: u32) -> usize {
    ds.device_ids().iter().position(|&d| d == device).expect("device in pool")
}

fn labeled(ds: &CaptureDataset, cell: &Cell, split: Split) -> Result<Vec<LabeledImage>> {
    let label = device_label(ds, cell.meta.device_id);
    Ok(split_images(cell, &ds.config, split)?
        .into_iter()
        .map(|image| LabeledImage { image, label })
        .collect())
}

fn shuffle_labels(set: &mut [LabeledImage], seed: u64) {
    let mut labels: Vec<usize> = set.iter().map(|l| l.label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (l, new) in set.iter_mut().zip(labels) {
        l.label = new;
    }
}

/// Trains the eavesdropper's classifier on the unjammed cells.
pub fn train_k_model(ds: &CaptureDataset, cfg: &ExperimentConfig, mode: KMode) -> Result<ClassifierModel> {
    if ds.pool.k() < 2 {
        return Err(Error::invalid("k-anonymity needs at least two devices"));
    }
    let atts = unjammed_attenuations(ds);
    if atts.is_empty() {
        return Err(Error::invalid("no unjammed cells to train on"));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for &d in &ds.device_ids() {
        for &a in &atts {
            let cell = find(ds, d, 0.0, a)?;
            train.extend(labeled(ds, cell, Split::Train)?);
            val.extend(labeled(ds, cell, Split::Val)?);
        }
    }
    if let KMode::ShuffledLabels { seed } = mode {
        shuffle_labels(&mut train, derive_seed(seed, &[0]));
        shuffle_labels(&mut val, derive_seed(seed, &[1]));
    }
    train_classifier(&train, &val, &cfg.classifier_config(derive_seed(cfg.seed, &[0x4b])))
}

/// Accuracy of `model` on every sweep point whose cells all decode
/// cleanly.
pub fn evaluate_k(ds: &CaptureDataset, cfg: &ExperimentConfig, model: &ClassifierModel, mode: KMode) -> Result<KAnonymityResult> {
    let devices = ds.device_ids();
    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for &a in &cfg.attenuation_db {
        for &r in &cfg.rjp {
            if mode == KMode::Sanity && r != 0.0 {
                continue;
            }
            let cells: Vec<&Cell> = devices.iter().map(|&d| find(ds, d, r, a)).collect::<Result<_>>()?;
            let bad: Vec<&Cell> = cells.iter().copied().filter(|c| !c.meta.usable()).collect();
            if !bad.is_empty() {
                flagged.extend(bad.into_iter().map(FlaggedCell::of));
                continue;
            }
            let split = if mode == KMode::Sanity { Split::Train } else { Split::Test };
            let mut test = Vec::new();
            for c in &cells {
                test.extend(labeled(ds, c, split)?);
            }
            if let KMode::ShuffledLabels { seed } = mode {
                shuffle_labels(&mut test, derive_seed(seed, &[2, r.to_bits(), a.to_bits()]));
            }
            let (accuracy, confusion) = evaluate_accuracy(model, &test)?;
            let n = cells.len() as f64;
            rows.push(KRow {
                rjp: r,
                attenuation_db: a,
                accuracy,
                confusion,
                mean_ber: cells.iter().map(|c| c.meta.ber.unwrap_or(0.0)).sum::<f64>() / n,
                mean_snr_db: cells.iter().map(|c| c.meta.snr_db.unwrap_or(f64::NAN)).sum::<f64>() / n,
                n_test: test.len(),
            });
        }
    }
    Ok(KAnonymityResult {
        k: devices.len(),
        rows,
        flagged,
        best_val_accuracy: model.meta.best_val_accuracy.unwrap_or(f64::NAN),
    })
}

pub fn run_k_anonymity(ds: &CaptureDataset, cfg: &ExperimentConfig) -> Result<KAnonymityResult> {
    run_k_anonymity_mode(ds, cfg, KMode::Standard)
}

pub fn run_k_anonymity_mode(ds: &CaptureDataset, cfg: &ExperimentConfig, mode: KMode) -> Result<KAnonymityResult> {
    let model = train_k_model(ds, cfg, mode)?;
    evaluate_k(ds, cfg, &model, mode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TRow {
    pub device_id: u32,
    pub rjp: f64,
    pub attenuation_db: f64,
    pub auc: f64,
    pub roc: RocCurve,
    pub snr_db: f64,
    pub ber: f64,
    pub n_positive: usize,
    pub n_negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TAnonymityResult {
    pub rows: Vec<TRow>,
    pub flagged: Vec<FlaggedCell>,
}

/// One autoencoder per device, trained on that device's unjammed images.
pub fn train_t_models(ds: &CaptureDataset, cfg: &ExperimentConfig) -> Result<Vec<(u32, AutoencoderModel)>> {
    let atts = unjammed_attenuations(ds);
    ds.device_ids()
        .into_iter()
        .map(|d| {
            if atts.is_empty() || atts.iter().any(|&a| ds.cell(d, 0.0, a).is_none()) {
                return Err(Error::invalid(format!("device {d} has no unjammed data")));
            }
            let mut train = Vec::new();
            for &a in &atts {
                train.extend(split_images(find(ds, d, 0.0, a)?, cfg, Split::Train)?);
            }
            let seed = derive_seed(cfg.seed, &[0x54, d as u64]);
            Ok((d, train_autoencoder(&train, &cfg.autoencoder_config(seed))?))
        })
        .collect()
}

fn scores(model: &AutoencoderModel, images: &[FingerprintImage]) -> Result<Vec<f64>> {
    images.iter().map(|i| reconstruction_error(model, i)).collect()
}

/// Scores unjammed test images (negatives) against each jammed cell's test
/// images (positives). The rjp-0 row pits the unjammed validation split
/// against the unjammed test split as a same-distribution control.
pub fn evaluate_t(ds: &CaptureDataset, cfg: &ExperimentConfig, models: &[(u32, AutoencoderModel)]) -> Result<TAnonymityResult> {
    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for (d, model) in models {
        for &a in &cfg.attenuation_db {
            let base = ds
                .cell(*d, 0.0, a)
                .ok_or_else(|| Error::invalid(format!("device {d} has no unjammed data at {a} dB")))?;
            if !base.meta.usable() {
                flagged.push(FlaggedCell::of(base));
                continue;
            }
            let negative = scores(model, &split_images(base, cfg, Split::Test)?)?;
            for &r in &cfg.rjp {
                let cell = find(ds, *d, r, a)?;
                if !cell.meta.usable() {
                    flagged.push(FlaggedCell::of(cell));
                    continue;
                }
                let split = if r == 0.0 { Split::Val } else { Split::Test };
                let positive = scores(model, &split_images(cell, cfg, split)?)?;
                let roc = roc_and_auc(&positive, &negative)?;
                rows.push(TRow {
                    device_id: *d,
                    rjp: r,
                    attenuation_db: a,
                    auc: roc.auc,
                    roc,
                    snr_db: cell.meta.snr_db.unwrap_or(f64::NAN),
                    ber: cell.meta.ber.unwrap_or(f64::NAN),
                    n_positive: positive.len(),
                    n_negative: negative.len(),
                });
            }
        }
    }
    Ok(TAnonymityResult { rows, flagged })
}

pub fn run_t_anonymity(ds: &CaptureDataset, cfg: &ExperimentConfig) -> Result<TAnonymityResult> {
    let models = train_t_models(ds, cfg)?;
    evaluate_t(ds, cfg, &models)
}
