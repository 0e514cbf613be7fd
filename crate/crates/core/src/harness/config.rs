//! Experiment configuration: a flat key/value TOML file layered over the
//! defaults of the selected scenario.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::JammerWaveform;
use crate::classifiers::{AutoencoderConfig, ClassifierConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::imaging::PlaneBounds;
use crate::nn::Optimizer;
use crate::signal::{CABLE_SAMPLE_RATE_HZ, RADIO_SAMPLE_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Cable,
    Radio,
}

impl Scenario {
    pub fn sample_rate_hz(self) -> f64 {
        match self {
            Scenario::Cable => CABLE_SAMPLE_RATE_HZ,
            Scenario::Radio => RADIO_SAMPLE_RATE_HZ,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Cable => "cable",
            Scenario::Radio => "radio",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cable" => Ok(Scenario::Cable),
            "radio" => Ok(Scenario::Radio),
            _ => Err(Error::Config(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    GaussianNoise,
    BandLimitedNoise,
    SingleTone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    fn build(self) -> Optimizer {
        match self {
            OptimizerKind::Sgd => Optimizer::Sgd { momentum: 0.9 },
            OptimizerKind::Adam => Optimizer::adam(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Master seed; every cell derives its own streams from it.
    pub seed: u64,
    pub pool_seed: u64,
    pub k: usize,
    pub tx_relative_power: f64,
    pub rx_gain_rel: f64,
    pub rjp: Vec<f64>,
    pub attenuation_db: Vec<f64>,
    pub jammer_waveform: WaveformKind,
    pub tone_offset_hz: f64,
    /// Propagation loss applied to the combined transmitter and jammer
    /// signal ahead of the receiver noise.
    pub path_loss_db: f64,
    /// Per-sample noise power of the link, dBm (0 dBm is unit power).
    pub noise_floor_dbm: f64,
    pub carrier_freq_hz: f64,
    pub samples_per_symbol: usize,
    pub symbols_per_cell: usize,
    /// Symbols discarded while the receive loops acquire.
    pub settle_symbols: usize,
    pub samples_per_image: usize,
    pub image_size: usize,
    pub plane_i_half_width: f64,
    pub plane_q_half_width: f64,
    pub split_train: f64,
    pub split_val: f64,
    pub split_test: f64,
    pub classifier_filters: Vec<usize>,
    pub classifier_epochs: usize,
    pub classifier_batch_size: usize,
    pub classifier_learning_rate: f64,
    pub classifier_optimizer: OptimizerKind,
    pub autoencoder_filters: Vec<usize>,
    pub autoencoder_bottleneck: usize,
    pub autoencoder_epochs: usize,
    pub autoencoder_batch_size: usize,
    pub autoencoder_learning_rate: f64,
    pub autoencoder_optimizer: OptimizerKind,
    /// Histogram bins for the amplitude, phase and SNR distributions.
    pub distribution_bins: usize,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::cable()
    }
}

impl ExperimentConfig {
    pub fn cable() -> Self {
        Self {
            scenario: Scenario::Cable,
            seed: 1,
            pool_seed: 42,
            k: 5,
            tx_relative_power: 0.3,
            rx_gain_rel: 0.1,
            rjp: vec![0.0, 0.03, 0.05, 0.07, 0.1, 0.2, 0.3, 0.4, 0.5],
            attenuation_db: vec![20.0, 40.0],
            jammer_waveform: WaveformKind::GaussianNoise,
            tone_offset_hz: 50e3,
            path_loss_db: 0.0,
            noise_floor_dbm: -24.0,
            carrier_freq_hz: 900e6,
            samples_per_symbol: 4,
            symbols_per_cell: 200_000,
            settle_symbols: 2_000,
            samples_per_image: 1_000,
            image_size: 32,
            plane_i_half_width: 1.25,
            plane_q_half_width: 0.25,
            split_train: 0.6,
            split_val: 0.2,
            split_test: 0.2,
            classifier_filters: vec![8, 16, 32],
            classifier_epochs: 30,
            classifier_batch_size: 32,
            classifier_learning_rate: 0.01,
            classifier_optimizer: OptimizerKind::Sgd,
            autoencoder_filters: vec![8, 16, 16],
            autoencoder_bottleneck: 64,
            autoencoder_epochs: 30,
            autoencoder_batch_size: 32,
            autoencoder_learning_rate: 1e-3,
            autoencoder_optimizer: OptimizerKind::Adam,
            distribution_bins: 100,
            output_dir: "out".into(),
        }
    }

    pub fn radio() -> Self {
        Self {
            scenario: Scenario::Radio,
            tx_relative_power: 0.8,
            rx_gain_rel: 0.8,
            rjp: vec![0.0, 1.0],
            attenuation_db: vec![0.0, 20.0, 40.0],
            noise_floor_dbm: -28.0,
            path_loss_db: 20.0,
            ..Self::cable()
        }
    }

    pub fn for_scenario(s: Scenario) -> Self {
        match s {
            Scenario::Cable => Self::cable(),
            Scenario::Radio => Self::radio(),
        }
    }

    /// Parses a flat TOML document. Keys absent from the file keep the
    /// defaults of the scenario the file names (cable when it names none);
    /// unknown keys are an error.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_str_or(text, Scenario::Cable)
    }

    /// As `from_toml_str`, with `fallback` supplying the defaults when the
    /// file names no scenario.
    pub fn from_toml_str_or(text: &str, fallback: Scenario) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let scenario = match table.get("scenario") {
            None => fallback,
            Some(toml::Value::String(s)) => s.parse()?,
            Some(v) => return Err(Error::Config(format!("scenario must be a string, got {v}"))),
        };
        let base = toml::Value::try_from(Self::for_scenario(scenario)).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = match base {
            toml::Value::Table(t) => t,
            _ => unreachable!("config serializes to a table"),
        };
        for (key, value) in table {
            if !merged.contains_key(&key) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
            merged.insert(key, value);
        }
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k < 2 {
            return bad(format!("k must be >= 2, got {}", self.k));
        }
        let splits = [self.split_train, self.split_val, self.split_test];
        if splits.iter().any(|&f| !(f > 0.0)) || (splits.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions must be positive and sum to 1, got {splits:?}"));
        }
        if self.rjp.is_empty() || self.rjp.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad(format!("rjp values must lie in [0, 1], got {:?}", self.rjp));
        }
        if self.rjp.iter().any(|&r| r > 0.0 && r < 0.01) {
            return bad("nonzero rjp below 0.01 is outside the power table".into());
        }
        if self.attenuation_db.is_empty() || self.attenuation_db.iter().any(|a| !(*a >= 0.0)) {
            return bad(format!("attenuations must be >= 0 dB, got {:?}", self.attenuation_db));
        }
        let mut r = self.rjp.clone();
        r.sort_by(f64::total_cmp);
        r.dedup();
        let mut a = self.attenuation_db.clone();
        a.sort_by(f64::total_cmp);
        a.dedup();
        if r.len() != self.rjp.len() || a.len() != self.attenuation_db.len() {
            return bad("duplicate rjp or attenuation values".into());
        }
        if !(0.01..=1.0).contains(&self.tx_relative_power) {
            return bad(format!("tx_relative_power must be in [0.01, 1], got {}", self.tx_relative_power));
        }
        if !(self.rx_gain_rel > 0.0 && self.rx_gain_rel <= 1.0) {
            return bad(format!("rx_gain_rel must be in (0, 1], got {}", self.rx_gain_rel));
        }
        if self.samples_per_symbol < 2 {
            return bad("samples_per_symbol must be >= 2".into());
        }
        if self.samples_per_image == 0 || self.symbols_per_cell < 3 * self.samples_per_image {
            return bad(format!(
                "symbols_per_cell ({}) must hold at least three images of {} symbols",
                self.symbols_per_cell, self.samples_per_image
            ));
        }
        if self.symbols_per_cell < crate::receiver::message_period_bits() {
            return bad("symbols_per_cell must cover one message period (2048 bits)".into());
        }
        let depth = self.classifier_filters.len().max(self.autoencoder_filters.len());
        if self.image_size == 0 || self.image_size % (1 << depth) != 0 {
            return bad(format!("image_size {} must be divisible by 2^{depth}", self.image_size));
        }
        if !(self.plane_i_half_width > 0.0 && self.plane_q_half_width > 0.0) {
            return bad("plane half widths must be positive".into());
        }
        if self.distribution_bins < 2 {
            return bad("distribution_bins must be >= 2".into());
        }
        if !(self.path_loss_db >= 0.0) {
            return bad("path_loss_db must be >= 0".into());
        }
        Ok(())
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.scenario.sample_rate_hz()
    }

    pub fn plane_bounds(&self) -> PlaneBounds {
        PlaneBounds {
            i_min: -self.plane_i_half_width,
            i_max: self.plane_i_half_width,
            q_min: -self.plane_q_half_width,
            q_max: self.plane_q_half_width,
        }
    }

    pub fn waveform(&self) -> JammerWaveform {
        match self.jammer_waveform {
            WaveformKind::GaussianNoise => JammerWaveform::GaussianNoise,
            WaveformKind::BandLimitedNoise => JammerWaveform::BandLimitedNoise {
                samples_per_symbol: self.samples_per_symbol,
                rolloff: 0.35,
            },
            WaveformKind::SingleTone => JammerWaveform::SingleTone {
                offset_hz: self.tone_offset_hz,
            },
        }
    }

    pub fn classifier_config(&self, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            conv_filters: self.classifier_filters.clone(),
            train: TrainConfig {
                epochs: self.classifier_epochs,
                batch_size: self.classifier_batch_size,
                learning_rate: self.classifier_learning_rate,
                optimizer: self.classifier_optimizer.build(),
                seed,
            },
        }
    }

    pub fn autoencoder_config(&self, seed: u64) -> AutoencoderConfig {
        AutoencoderConfig {
            conv_filters: self.autoencoder_filters.clone(),
            bottleneck: self.autoencoder_bottleneck,
            train: TrainConfig {
                epochs: self.autoencoder_epochs,
                batch_size: self.autoencoder_batch_size,
                learning_rate: self.autoencoder_learning_rate,
                optimizer: self.autoencoder_optimizer.build(),
                seed,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::cable().validate().unwrap();
        ExperimentConfig::radio().validate().unwrap();
        let c = ExperimentConfig::cable();
        assert_eq!((c.split_train, c.split_val, c.split_test), (0.6, 0.2, 0.2));
        assert_eq!((c.tx_relative_power, c.rx_gain_rel), (0.3, 0.1));
        let r = ExperimentConfig::radio();
        assert_eq!((r.tx_relative_power, r.rx_gain_rel), (0.8, 0.8));
        assert_eq!(r.rjp, vec![0.0, 1.0]);
        assert_eq!(r.attenuation_db, vec![0.0, 20.0, 40.0]);
    }

    #[test]
    fn flat_file_overrides_and_rejects() {
        let c = ExperimentConfig::from_toml_str("seed = 9\nrjp = [0.0, 0.5]\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.rjp, vec![0.0, 0.5]);
        assert_eq!(c.scenario, Scenario::Cable);
        let r = ExperimentConfig::from_toml_str("scenario = \"radio\"\n").unwrap();
        assert_eq!(r, ExperimentConfig::radio());
        assert!(matches!(
            ExperimentConfig::from_toml_str("sede = 9\n"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_toml_str("split_train = 0.5\n").is_err());
        assert!(ExperimentConfig::from_toml_str("scenario = \"moon\"\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::radio();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
