//! Friendly jammer synthesis, the combiner, and the link channel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impairments::{dbm_to_linear, relative_power_to_dbm, PowerMap};
use crate::signal::{fir_same, rrc_taps, IqSample, SampleBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum JammerWaveform {
    /// i.i.d. circular complex Gaussian samples (flat over the sampled band).
    GaussianNoise,
    /// Complex Gaussian noise shaped by a unit-energy root-raised-cosine
    /// filter, so it occupies the same band as a signal at this many samples
    /// per symbol.
    BandLimitedNoise { samples_per_symbol: usize, rolloff: f64 },
    /// Constant-envelope tone at `offset_hz` from the carrier.
    SingleTone { offset_hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammerConfig {
    /// Relative jamming power (RJP); 0 switches the jammer off.
    pub relative_jamming_power: f64,
    pub attenuation_db: f64,
    pub waveform: JammerWaveform,
    pub seed: u64,
}

impl JammerConfig {
    pub fn new(relative_jamming_power: f64, attenuation_db: f64, seed: u64) -> Self {
        Self {
            relative_jamming_power,
            attenuation_db,
            waveform: JammerWaveform::BandLimitedNoise {
                samples_per_symbol: 4,
                rolloff: 0.35,
            },
            seed,
        }
    }

    /// Mean sample power the jammer delivers into the combiner, or `None`
    /// when it is switched off.
    pub fn output_power(&self, map: &PowerMap) -> Result<Option<f64>> {
        if !(self.attenuation_db >= 0.0) {
            return Err(Error::invalid(format!(
                "attenuation must be >= 0 dB, got {}",
                self.attenuation_db
            )));
        }
        let rjp = self.relative_jamming_power;
        if rjp == 0.0 {
            return Ok(None);
        }
        if !(0.0..=1.0).contains(&rjp) {
            return Err(Error::OutOfRange {
                value: rjp,
                min: 0.0,
                max: 1.0,
            });
        }
        let dbm = relative_power_to_dbm(rjp, map)? - self.attenuation_db;
        Ok(Some(dbm_to_linear(dbm)))
    }
}

pub fn synthesize_jammer(
    n_samples: usize,
    sample_rate_hz: f64,
    cfg: &JammerConfig,
    map: &PowerMap,
) -> Result<SampleBuffer> {
    if n_samples == 0 {
        return Err(Error::invalid("jammer length must be > 0"));
    }
    let Some(power) = cfg.output_power(map)? else {
        return SampleBuffer::zeros(n_samples, sample_rate_hz);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut white = |n: usize, sigma: f64| -> Vec<IqSample> {
        (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                IqSample::new(re * sigma, im * sigma)
            })
            .collect()
    };
    let samples = match cfg.waveform {
        JammerWaveform::GaussianNoise => white(n_samples, (power / 2.0).sqrt()),
        JammerWaveform::BandLimitedNoise {
            samples_per_symbol,
            rolloff,
        } => {
            if samples_per_symbol < 1 || !(0.0..=1.0).contains(&rolloff) {
                return Err(Error::invalid(format!(
                    "bad jammer band: sps {samples_per_symbol}, rolloff {rolloff}"
                )));
            }
            // unit-energy taps keep the power of white input; the filter
            // runs over a longer buffer so no output sample sees the edges
            let taps = rrc_taps(samples_per_symbol, rolloff, 11);
            let pad = taps.len();
            let raw = white(n_samples + 2 * pad, (power / 2.0).sqrt());
            fir_same(&raw, &taps)[pad..pad + n_samples].to_vec()
        }
        JammerWaveform::SingleTone { offset_hz } => {
            let amp = power.sqrt();
            let start = rng.random_range(-PI..PI);
            let step = 2.0 * PI * offset_hz / sample_rate_hz;
            (0..n_samples)
                .map(|n| IqSample::from_polar(amp, start + step * n as f64))
                .collect()
        }
    };
    SampleBuffer::new(samples, sample_rate_hz)
}

/// Linear superposition of two buffers (the passive combiner).
pub fn combine(tx: &SampleBuffer, jam: &SampleBuffer) -> Result<SampleBuffer> {
    if tx.len() != jam.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            tx.len(),
            jam.len()
        )));
    }
    if tx.sample_rate_hz != jam.sample_rate_hz {
        return Err(Error::invalid(format!(
            "sample rate mismatch: {} vs {}",
            tx.sample_rate_hz, jam.sample_rate_hz
        )));
    }
    let samples = tx
        .samples
        .iter()
        .zip(&jam.samples)
        .map(|(a, b)| a + b)
        .collect();
    SampleBuffer::new(samples, tx.sample_rate_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Cable,
    Radio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipathTap {
    pub delay_samples: usize,
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub kind: LinkKind,
    /// Receiver noise power per sample; 0 dBm is unit power.
    pub noise_floor_dbm: f64,
    pub multipath_taps: Vec<MultipathTap>,
    /// Linear amplitude gain of the receiver front end, in (0, 1].
    pub rx_gain_rel: f64,
}

impl ChannelConfig {
    pub fn cable(noise_floor_dbm: f64, rx_gain_rel: f64) -> Self {
        Self {
            kind: LinkKind::Cable,
            noise_floor_dbm,
            multipath_taps: Vec::new(),
            rx_gain_rel,
        }
    }

    pub fn radio(noise_floor_dbm: f64, rx_gain_rel: f64, taps: Vec<MultipathTap>) -> Self {
        Self {
            kind: LinkKind::Radio,
            noise_floor_dbm,
            multipath_taps: taps,
            rx_gain_rel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rx_gain_rel > 0.0 && self.rx_gain_rel <= 1.0) {
            return Err(Error::OutOfRange {
                value: self.rx_gain_rel,
                min: 0.0,
                max: 1.0,
            });
        }
        match self.kind {
            LinkKind::Cable if !self.multipath_taps.is_empty() => {
                Err(Error::invalid("a cable link has no multipath taps"))
            }
            LinkKind::Radio
                if self
                    .multipath_taps
                    .first()
                    .is_none_or(|t| t.delay_samples != 0) =>
            {
                Err(Error::invalid(
                    "a radio link needs a first tap at delay 0",
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Three exponentially decaying taps with seeded random phases; the direct
/// path keeps unit gain.
pub fn default_radio_taps(seed: u64) -> Vec<MultipathTap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delays = [0usize, 1, 3];
    let decay = 0.35f64;
    delays
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mag = decay.powi(i as i32);
            let phase = if i == 0 { 0.0 } else { rng.random_range(-PI..PI) };
            MultipathTap {
                delay_samples: d,
                gain: Complex64::from_polar(mag, phase),
            }
        })
        .collect()
}

pub fn apply_channel(sig: &SampleBuffer, cfg: &ChannelConfig, seed: u64) -> Result<SampleBuffer> {
    if sig.is_empty() {
        return Err(Error::invalid("cannot pass an empty buffer through the channel"));
    }
    cfg.validate()?;
    let mut out = match cfg.kind {
        LinkKind::Cable => sig.samples.clone(),
        LinkKind::Radio => {
            let n = sig.len();
            let mut y = vec![IqSample::new(0.0, 0.0); n];
            for tap in &cfg.multipath_taps {
                for i in tap.delay_samples..n {
                    y[i] += sig.samples[i - tap.delay_samples] * tap.gain;
                }
            }
            y
        }
    };
    let noise_power = dbm_to_linear(cfg.noise_floor_dbm);
    if noise_power > 0.0 {
        let sigma = (noise_power / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in &mut out {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *x += IqSample::new(re * sigma, im * sigma);
        }
    }
    for x in &mut out {
        *x *= cfg.rx_gain_rel;
    }
    SampleBuffer::new(out, sig.sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 2e6;

    #[test]
    fn zero_rjp_is_silent() {
        let cfg = JammerConfig::new(0.0, 20.0, 9);
        let j = synthesize_jammer(1000, FS, &cfg, &PowerMap::default()).unwrap();
        assert!(j.samples.iter().all(|s| *s == IqSample::new(0.0, 0.0)));
    }

    #[test]
    fn jammer_power_follows_table_minus_attenuation() {
        let mut cfg = JammerConfig::new(0.5, 20.0, 11);
        for w in [cfg.waveform, JammerWaveform::GaussianNoise] {
            cfg.waveform = w;
            let j = synthesize_jammer(1_000_000, FS, &cfg, &PowerMap::default()).unwrap();
            let dbm = 10.0 * j.mean_power().log10();
            assert!((dbm - (6.5 - 20.0)).abs() < 0.1, "{w:?} {dbm}");
        }
    }

    #[test]
    fn tone_has_constant_envelope() {
        let mut cfg = JammerConfig::new(0.3, 0.0, 1);
        cfg.waveform = JammerWaveform::SingleTone { offset_hz: 50e3 };
        let j = synthesize_jammer(4096, FS, &cfg, &PowerMap::default()).unwrap();
        let target = dbm_to_linear(-0.3);
        assert!(j.samples.iter().all(|s| (s.norm_sqr() - target).abs() < 1e-12));
    }

    #[test]
    fn jammer_is_seed_deterministic() {
        let cfg = JammerConfig::new(0.2, 0.0, 5);
        let a = synthesize_jammer(512, FS, &cfg, &PowerMap::default()).unwrap();
        let b = synthesize_jammer(512, FS, &cfg, &PowerMap::default()).unwrap();
        assert_eq!(a, b);
        assert!(synthesize_jammer(0, FS, &cfg, &PowerMap::default()).is_err());
    }

    #[test]
    fn combine_identities_and_errors() {
        let tx = SampleBuffer::new(vec![IqSample::new(0.3, -0.2); 8], FS).unwrap();
        let zero = SampleBuffer::zeros(8, FS).unwrap();
        assert_eq!(combine(&tx, &zero).unwrap(), tx);
        assert_eq!(combine(&zero, &tx).unwrap(), tx);
        let short = SampleBuffer::zeros(7, FS).unwrap();
        assert!(combine(&tx, &short).is_err());
        let other_rate = SampleBuffer::zeros(8, 1e6).unwrap();
        assert!(combine(&tx, &other_rate).is_err());
    }

    #[test]
    fn independent_powers_add() {
        let map = PowerMap::default();
        let a = synthesize_jammer(1_000_000, FS, &JammerConfig::new(0.3, 0.0, 1), &map).unwrap();
        let b = synthesize_jammer(1_000_000, FS, &JammerConfig::new(0.5, 3.0, 2), &map).unwrap();
        let s = combine(&a, &b).unwrap();
        let ratio = s.mean_power() / (a.mean_power() + b.mean_power());
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn quiet_cable_is_near_identity() {
        let x = SampleBuffer::new(
            (0..1000).map(|n| IqSample::from_polar(1.0, n as f64 * 0.01)).collect(),
            FS,
        )
        .unwrap();
        let y = apply_channel(&x, &ChannelConfig::cable(-120.0, 1.0), 3).unwrap();
        let dev = x
            .samples
            .iter()
            .zip(&y.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-5);
    }

    #[test]
    fn unit_tap_radio_is_identity() {
        let x = SampleBuffer::new(vec![IqSample::new(0.5, 0.25); 64], FS).unwrap();
        let taps = vec![MultipathTap {
            delay_samples: 0,
            gain: Complex64::new(1.0, 0.0),
        }];
        let y = apply_channel(&x, &ChannelConfig::radio(f64::NEG_INFINITY, 1.0, taps), 0).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn cable_noise_power_matches_floor() {
        let x = SampleBuffer::zeros(1_000_000, FS).unwrap();
        let y = apply_channel(&x, &ChannelConfig::cable(-20.0, 1.0), 17).unwrap();
        let dbm = 10.0 * y.mean_power().log10();
        assert!((dbm + 20.0).abs() < 0.1, "{dbm}");
    }

    #[test]
    fn config_invariants() {
        let mut c = ChannelConfig::cable(-30.0, 0.5);
        c.multipath_taps = default_radio_taps(1);
        assert!(c.validate().is_err());
        let r = ChannelConfig::radio(-30.0, 0.5, vec![]);
        assert!(r.validate().is_err());
        let r = ChannelConfig::radio(-30.0, 0.5, default_radio_taps(1));
        assert!(r.validate().is_ok());
        assert!(ChannelConfig::cable(-30.0, 0.0).validate().is_err());
    }
}
