//! Complex baseband sample types, the known test message and the BPSK
//! modulator.
//!
//! Everything in the pipeline is simulated at complex baseband. The carrier
//! frequency travels along as metadata because the oscillator impairments
//! express their frequency offset in parts-per-million of it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One complex baseband sample; `re` is the in-phase component and `im` the
/// quadrature component.
pub type IqSample = Complex64;

/// Default sample rate of the cable scenario.
pub const CABLE_SAMPLE_RATE_HZ: f64 = 2.0e6;
/// Default sample rate of the radio scenario.
pub const RADIO_SAMPLE_RATE_HZ: f64 = 512.0e3;

/// Length of one period of the known message, in bytes.
pub const MESSAGE_PERIOD_BYTES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    pub samples: Vec<IqSample>,
    pub sample_rate_hz: f64,
}

impl SampleBuffer {
    pub fn new(samples: Vec<IqSample>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![IqSample::new(0.0, 0.0); len], sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `|x|^2` over the buffer, 0 for an empty buffer.
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn scale(&mut self, factor: f64) {
        for s in &mut self.samples {
            *s *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.re.is_finite() && s.im.is_finite())
    }
}

pub fn mean_power(samples: &[IqSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// Root-raised-cosine shaping with the configured rolloff and span.
    RootRaisedCosine,
    /// Each symbol held for `samples_per_symbol` samples; used to inspect the
    /// raw symbol mapping.
    Rectangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    /// Carried as metadata; the simulation runs at complex baseband.
    pub carrier_freq_hz: f64,
    pub amplitude: f64,
    pub phase_offset_rad: f64,
    pub samples_per_symbol: usize,
    pub rolloff: f64,
    /// Filter span in symbols.
    pub span_symbols: usize,
    pub pulse_shape: PulseShape,
    pub sample_rate_hz: f64,
}

impl Default for ModulationParams {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 9.0e8,
            amplitude: 1.0,
            phase_offset_rad: 0.0,
            samples_per_symbol: 4,
            rolloff: 0.35,
            span_symbols: 11,
            pulse_shape: PulseShape::RootRaisedCosine,
            sample_rate_hz: CABLE_SAMPLE_RATE_HZ,
        }
    }
}

impl ModulationParams {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_symbol < 2 {
            return Err(Error::invalid(format!(
                "samples_per_symbol must be >= 2, got {}",
                self.samples_per_symbol
            )));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(Error::invalid(format!(
                "rolloff must be in (0, 1], got {}",
                self.rolloff
            )));
        }
        if self.span_symbols == 0 {
            return Err(Error::invalid("span_symbols must be >= 1"));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("amplitude must be positive"));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(())
    }

    pub fn symbol_rate_hz(&self) -> f64 {
        self.sample_rate_hz / self.samples_per_symbol as f64
    }
}

/// The known message shared by transmitter and receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub payload: Vec<u8>,
    /// One entry (0 or 1) per bit, most significant bit of each byte first.
    pub bits: Vec<u8>,
}

impl Message {
    pub fn from_payload(payload: Vec<u8>) -> Self {
        let bits = bytes_to_bits(&payload);
        Self { payload, bits }
    }

    /// Bits of one message period (the first 256 bytes).
    pub fn period_bits(&self) -> &[u8] {
        let n = (MESSAGE_PERIOD_BYTES * 8).min(self.bits.len());
        &self.bits[..n]
    }
}

pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|b| (0..8).rev().map(move |k| (b >> k) & 1))
        .collect()
}

/// Byte string 0, 1, ..., 255 repeated `repetitions` times.
pub fn generate_message(repetitions: usize) -> Result<Message> {
    if repetitions == 0 {
        return Err(Error::invalid("repetitions must be >= 1"));
    }
    let payload = (0..repetitions)
        .flat_map(|_| 0..=255u8)
        .collect::<Vec<_>>();
    Ok(Message::from_payload(payload))
}

/// Bit 0 maps to +1, bit 1 to -1.
pub fn bpsk_symbol(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Root-raised-cosine impulse response at `t` symbol periods (unscaled closed
/// form, peak `1 - beta + 4 beta / pi` at the origin).
pub fn rrc_impulse(t: f64, rolloff: f64) -> f64 {
    let beta = rolloff;
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let quarter = 1.0 / (4.0 * beta);
    if (t.abs() - quarter).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Odd-length RRC taps (`span * sps + 1`, rounded down to odd) normalized
/// to unit energy.
pub fn rrc_taps(samples_per_symbol: usize, rolloff: f64, span_symbols: usize) -> Vec<f64> {
    let n = 2 * (span_symbols * samples_per_symbol / 2) + 1;
    let center = (n / 2) as f64;
    let mut taps = (0..n)
        .map(|k| rrc_impulse((k as f64 - center) / samples_per_symbol as f64, rolloff))
        .collect::<Vec<_>>();
    let energy = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    for h in &mut taps {
        *h /= energy;
    }
    taps
}

/// Filters `x` with an odd-length real FIR, output aligned with the input
/// (the group delay is removed, edges see implicit zeros).
pub fn fir_same(x: &[IqSample], taps: &[f64]) -> Vec<IqSample> {
    let half = taps.len() / 2;
    let n = x.len();
    let mut out = vec![IqSample::new(0.0, 0.0); n];
    for (i, o) in out.iter_mut().enumerate() {
        // y[i] = sum_k taps[k] * x[i + half - k]
        let k_lo = (i + half + 1).saturating_sub(n);
        let k_hi = (i + half).min(taps.len() - 1);
        let mut acc = IqSample::new(0.0, 0.0);
        for k in k_lo..=k_hi {
            acc += x[i + half - k] * taps[k];
        }
        *o = acc;
    }
    out
}

/// Worst-case peak magnitude of a shaped BPSK stream with unit symbols.
fn peak_bound(taps: &[f64], sps: usize) -> f64 {
    (0..sps)
        .map(|phase| taps.iter().skip(phase).step_by(sps).map(|h| h.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maps every bit to `+1` (bit 0) or `-1` (bit 1) on the in-phase axis,
/// upsamples and pulse-shapes. Symbol `k` peaks at sample `k * sps`. The
/// output is scaled by a content-independent factor so that its peak
/// magnitude never exceeds `params.amplitude`.
pub fn modulate_bpsk(msg: &Message, params: &ModulationParams) -> Result<SampleBuffer> {
    params.validate()?;
    if msg.bits.is_empty() {
        return Err(Error::invalid("message is empty"));
    }
    let sps = params.samples_per_symbol;
    let rotation = IqSample::from_polar(params.amplitude, params.phase_offset_rad);
    let samples = match params.pulse_shape {
        PulseShape::Rectangular => msg
            .bits
            .iter()
            .flat_map(|&b| std::iter::repeat_n(rotation * bpsk_symbol(b), sps))
            .collect(),
        PulseShape::RootRaisedCosine => {
            let taps = rrc_taps(sps, params.rolloff, params.span_symbols);
            let gain = 1.0 / peak_bound(&taps, sps).max(1.0);
            let n = msg.bits.len() * sps;
            let half = taps.len() / 2;
            let mut shaped = vec![0.0f64; n];
            // scatter each symbol's pulse; equivalent to fir_same on the
            // zero-stuffed symbol train
            for (k, &b) in msg.bits.iter().enumerate() {
                let a = bpsk_symbol(b);
                let start = (k * sps) as isize - half as isize;
                for (j, h) in taps.iter().enumerate() {
                    let idx = start + j as isize;
                    if idx >= 0 && (idx as usize) < n {
                        shaped[idx as usize] += a * h;
                    }
                }
            }
            shaped
                .into_iter()
                .map(|s| rotation * (s * gain))
                .collect()
        }
    };
    SampleBuffer::new(samples, params.sample_rate_hz)
}

/// Gain the modulator applies on top of the unit-energy RRC taps.
pub fn shaping_gain(params: &ModulationParams) -> f64 {
    match params.pulse_shape {
        PulseShape::Rectangular => params.amplitude,
        PulseShape::RootRaisedCosine => {
            let taps = rrc_taps(params.samples_per_symbol, params.rolloff, params.span_symbols);
            params.amplitude / peak_bound(&taps, params.samples_per_symbol).max(1.0)
        }
    }
}
