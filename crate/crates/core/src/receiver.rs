//! The eavesdropper's receive chain and the link-quality statistics computed
//! on its output.
//!
//! The chain is AGC, root-raised-cosine matched filter, Mueller & Müller
//! symbol timing recovery, and a second-order BPSK Costas loop. Every stage
//! is a plain function over buffers; [`ReceiverChain`] wires them together
//! with the default loop constants.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{fir_same, rrc_taps, IqSample, Message, SampleBuffer, MESSAGE_PERIOD_BYTES};

/// Symbols over which the convergence flags are evaluated.
pub const CONVERGENCE_WINDOW: usize = 100;
/// Per-symbol SNR values are capped here (a symbol exactly on the reference
/// point has zero noise).
pub const SNR_CAP_DB: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymbolStream {
    pub symbols: Vec<IqSample>,
    pub timing_converged: bool,
    pub carrier_converged: bool,
}

impl SymbolStream {
    /// A stream treated as fully synchronized, e.g. symbols that were
    /// generated directly rather than recovered.
    pub fn locked(symbols: Vec<IqSample>) -> Self {
        Self {
            symbols,
            timing_converged: true,
            carrier_converged: true,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Single-pole power-tracking gain control.
///
/// The mean power estimate starts at `target_power` and follows `|x|^2` with
/// smoothing factor `rate`; each sample is scaled by
/// `sqrt(target_power / estimate)`, with the gain capped so that silent input
/// stays silent.
pub fn agc(sig: &SampleBuffer, target_power: f64, rate: f64) -> Result<SampleBuffer> {
    const MAX_GAIN: f64 = 1e6;
    if sig.is_empty() {
        return Err(Error::invalid("agc input is empty"));
    }
    if !(target_power > 0.0 && target_power.is_finite()) {
        return Err(Error::invalid(format!(
            "agc target power must be positive, got {target_power}"
        )));
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::invalid(format!("agc rate must be in (0, 1), got {rate}")));
    }
    let floor = target_power / (MAX_GAIN * MAX_GAIN);
    let mut estimate = target_power;
    let samples = sig
        .samples
        .iter()
        .map(|&x| {
            let gain = (target_power / estimate.max(floor)).sqrt();
            estimate += rate * (x.norm_sqr() - estimate);
            x * gain
        })
        .collect();
    SampleBuffer::new(samples, sig.sample_rate_hz)
}

pub fn matched_filter(sig: &SampleBuffer, sps: usize, rolloff: f64, span_symbols: usize) -> Result<SampleBuffer> {
    let taps = rrc_taps(sps, rolloff, span_symbols);
    SampleBuffer::new(fir_same(&sig.samples, &taps), sig.sample_rate_hz)
}

const OFFSET_FFT_LEN: usize = 1 << 16;
const OFFSET_MAX_BLOCKS: usize = 8;

/// Blind carrier-offset estimate in rad/sample for a BPSK signal.
///
/// Squaring strips the modulation and leaves a spectral line at twice the
/// offset. The line is located on a power spectrum averaged over up to
/// eight blocks and refined by parabolic interpolation. Unambiguous for
/// offsets below a quarter of the sample rate.
pub fn estimate_frequency_offset(sig: &SampleBuffer) -> f64 {
    let n = sig.len();
    if n < 4 {
        return 0.0;
    }
    let len = n.next_power_of_two().min(OFFSET_FFT_LEN);
    let blocks = (n / len).clamp(1, OFFSET_MAX_BLOCKS);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut power = vec![0.0; len];
    let mut buf = vec![IqSample::new(0.0, 0.0); len];
    for b in 0..blocks {
        let start = b * len;
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = sig.samples.get(start + k).map_or(IqSample::new(0.0, 0.0), |x| x * x);
        }
        fft.process(&mut buf);
        for (p, x) in power.iter_mut().zip(&buf) {
            *p += x.norm_sqr();
        }
    }
    let peak = (0..len).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap_or(0);
    if power[peak] == 0.0 {
        return 0.0;
    }
    let (l, c, r) = (power[(peak + len - 1) % len], power[peak], power[(peak + 1) % len]);
    let den = l - 2.0 * c + r;
    let delta = if den == 0.0 { 0.0 } else { (0.5 * (l - r) / den).clamp(-0.5, 0.5) };
    let mut bin = peak as f64 + delta;
    if bin > len as f64 / 2.0 {
        bin -= len as f64;
    }
    PI * bin / len as f64
}

/// Removes the offset found by [`estimate_frequency_offset`]; returns the
/// corrected buffer and the estimate.
pub fn coarse_frequency_correction(sig: &SampleBuffer) -> Result<(SampleBuffer, f64)> {
    let w = estimate_frequency_offset(sig);
    let samples = sig
        .samples
        .iter()
        .enumerate()
        .map(|(n, &x)| x * IqSample::from_polar(1.0, -w * n as f64))
        .collect();
    Ok((SampleBuffer::new(samples, sig.sample_rate_hz)?, w))
}

fn slice(x: IqSample) -> IqSample {
    let s = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    IqSample::new(s(x.re), s(x.im))
}

/// Cubic Lagrange interpolation at `x[i + 1] + mu * (x[i + 2] - x[i + 1])`,
/// `mu` in `[0, 1)`.
fn interpolate(x: &[IqSample], i: usize, mu: f64) -> IqSample {
    let (a, b, c, d) = (x[i], x[i + 1], x[i + 2], x[i + 3]);
    let m1 = mu + 1.0;
    let m2 = mu - 1.0;
    let m3 = mu - 2.0;
    a * (-mu * m2 * m3 / 6.0) + b * (m1 * m2 * m3 / 2.0) + c * (-m1 * mu * m3 / 2.0)
        + d * (m1 * mu * m2 / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingLoopConfig {
    pub gain_mu: f64,
    pub gain_omega: f64,
    /// Maximum relative deviation of the symbol period from nominal.
    pub omega_relative_limit: f64,
}

impl Default for TimingLoopConfig {
    fn default() -> Self {
        let gain_mu = 0.175;
        Self {
            gain_mu,
            gain_omega: 0.25 * gain_mu * gain_mu,
            omega_relative_limit: 0.005,
        }
    }
}

pub fn mm_timing_recovery(sig: &SampleBuffer, sps: usize) -> Result<SymbolStream> {
    mm_timing_recovery_with(sig, sps, &TimingLoopConfig::default())
}

/// Mueller & Müller decision-directed clock recovery.
///
/// The detector is `e = Re{conj(d[n-1]) y[n] - conj(d[n]) y[n-1]}` with
/// `d = sign(Re y) + j sign(Im y)`; the slicer acts on both rails so the
/// detector keeps its gain while the carrier is still rotating.
pub fn mm_timing_recovery_with(
    sig: &SampleBuffer,
    sps: usize,
    cfg: &TimingLoopConfig,
) -> Result<SymbolStream> {
    if sps < 2 {
        return Err(Error::invalid(format!("sps must be >= 2, got {sps}")));
    }
    if sig.len() < 20 * sps {
        return Err(Error::invalid(format!(
            "timing recovery needs at least {} samples, got {}",
            20 * sps,
            sig.len()
        )));
    }
    let x = &sig.samples;
    let nominal = sps as f64;
    let (lo, hi) = (
        nominal * (1.0 - cfg.omega_relative_limit),
        nominal * (1.0 + cfg.omega_relative_limit),
    );
    let mut omega = nominal;
    let mut mu = 0.0f64;
    let mut i = 0usize;
    let mut last = IqSample::new(0.0, 0.0);
    let mut last_decision = IqSample::new(0.0, 0.0);
    let mut symbols = Vec::with_capacity(x.len() / sps + 1);
    let mut errors = Vec::with_capacity(x.len() / sps + 1);
    while i + 3 < x.len() {
        let y = interpolate(x, i, mu);
        let d = slice(y);
        let e = (last_decision.conj() * y - d.conj() * last).re.clamp(-1.0, 1.0);
        last = y;
        last_decision = d;
        symbols.push(y);
        errors.push(e);

        omega = (omega + cfg.gain_omega * e).clamp(lo, hi);
        mu += omega + cfg.gain_mu * e;
        let whole = mu.floor();
        i += whole as usize;
        mu -= whole;
    }
    let tail = &errors[errors.len().saturating_sub(CONVERGENCE_WINDOW)..];
    let mean_err = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    let timing_converged = symbols.len() >= CONVERGENCE_WINDOW
        && mean_err.abs() < 0.05
        && symbols.iter().all(|s| s.re.is_finite() && s.im.is_finite());
    Ok(SymbolStream {
        symbols,
        timing_converged,
        carrier_converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierLoopConfig {
    /// Normalized loop bandwidth in rad/symbol.
    pub loop_bw: f64,
    pub damping: f64,
    /// Largest frequency correction, rad/symbol.
    pub max_freq: f64,
}

impl Default for CarrierLoopConfig {
    fn default() -> Self {
        Self {
            loop_bw: 2.0 * PI / 100.0,
            damping: std::f64::consts::FRAC_1_SQRT_2,
            max_freq: 1.0,
        }
    }
}

impl CarrierLoopConfig {
    /// Proportional and integral gains of the loop filter.
    pub fn gains(&self) -> (f64, f64) {
        let w = self.loop_bw;
        let z = self.damping;
        let denom = 1.0 + 2.0 * z * w + w * w;
        (4.0 * z * w / denom, 4.0 * w * w / denom)
    }
}

pub fn costas_loop(symbols: &SymbolStream, loop_bw: f64) -> Result<SymbolStream> {
    costas_loop_with(
        symbols,
        &CarrierLoopConfig {
            loop_bw,
            ..Default::default()
        },
    )
}

/// Second-order BPSK Costas loop with phase detector `I * Q`.
///
/// `carrier_converged` is set when, over the final window, the systematic
/// quadrature component `|mean(Q * sign(I))|` is below a tenth of
/// `mean(|I|)`. Noise averages out of that statistic, a residual rotation
/// does not.
pub fn costas_loop_with(symbols: &SymbolStream, cfg: &CarrierLoopConfig) -> Result<SymbolStream> {
    if symbols.is_empty() {
        return Err(Error::invalid("costas loop input is empty"));
    }
    if !(cfg.loop_bw > 0.0) {
        return Err(Error::invalid("loop bandwidth must be positive"));
    }
    let (alpha, beta) = cfg.gains();
    let mut phase = 0.0f64;
    let mut freq = 0.0f64;
    let out: Vec<IqSample> = symbols
        .symbols
        .iter()
        .map(|&x| {
            let y = x * IqSample::from_polar(1.0, -phase);
            let err = (y.re * y.im).clamp(-1.0, 1.0);
            freq = (freq + beta * err).clamp(-cfg.max_freq, cfg.max_freq);
            phase += freq + alpha * err;
            phase = (phase + PI).rem_euclid(2.0 * PI) - PI;
            y
        })
        .collect();
    let tail = &out[out.len().saturating_sub(CONVERGENCE_WINDOW)..];
    let n = tail.len() as f64;
    let mean_abs_i = tail.iter().map(|s| s.re.abs()).sum::<f64>() / n;
    let bias_q = tail.iter().map(|s| s.im * s.re.signum()).sum::<f64>() / n;
    let carrier_converged = out.len() >= CONVERGENCE_WINDOW
        && mean_abs_i > 0.0
        && bias_q.abs() < 0.1 * mean_abs_i
        && out.iter().all(|s| s.re.is_finite() && s.im.is_finite());
    Ok(SymbolStream {
        symbols: out,
        timing_converged: symbols.timing_converged,
        carrier_converged,
    })
}

/// Best cyclic alignment of `bits` against one message period: the shift
/// with the largest absolute correlation over the first two periods of
/// `bits` (smallest shift wins ties), and the sign of that correlation.
pub fn align_to_message(bits: &[u8], period: &[u8]) -> (usize, bool) {
    let p = period.len();
    let probe = &bits[..bits.len().min(2 * p)];
    let mut best = (0usize, 0i64);
    for shift in 0..p {
        let corr: i64 = probe
            .iter()
            .enumerate()
            .map(|(i, &b)| if b == period[(i + shift) % p] { 1 } else { -1 })
            .sum();
        if corr.abs() > best.1.abs() {
            best = (shift, corr);
        }
    }
    (best.0, best.1 < 0)
}

/// Hard decisions (`I >= 0` is bit 0). The 180 degree ambiguity is resolved
/// by correlating against the known message and flipping every bit if the
/// inverted stream matches better.
pub fn demodulate(symbols: &SymbolStream, reference: &Message) -> Result<Vec<u8>> {
    if !symbols.carrier_converged {
        return Err(Error::NotConverged(
            "carrier loop has not locked; refusing to demodulate".into(),
        ));
    }
    let mut bits: Vec<u8> = symbols
        .symbols
        .iter()
        .map(|s| u8::from(s.re < 0.0))
        .collect();
    let period = reference.period_bits();
    if bits.len() >= period.len().min(64) && !period.is_empty() {
        let (_, inverted) = align_to_message(&bits, period);
        if inverted {
            for b in &mut bits {
                *b ^= 1;
            }
        }
    }
    Ok(bits)
}

/// Fraction of bits that differ from the cyclic known message at the best
/// alignment. No polarity correction is applied here.
pub fn compute_ber(rx_bits: &[u8], msg: &Message) -> Result<f64> {
    let period = msg.period_bits();
    if period.is_empty() || rx_bits.len() < period.len() {
        return Err(Error::invalid(format!(
            "need at least one message period ({} bits), got {}",
            period.len(),
            rx_bits.len()
        )));
    }
    let (shift, _) = align_to_message(rx_bits, period);
    let p = period.len();
    let errors = rx_bits
        .iter()
        .enumerate()
        .filter(|(i, &b)| b != period[(i + shift) % p])
        .count();
    Ok(errors as f64 / rx_bits.len() as f64)
}

/// Geometric decomposition of one received symbol against the reference
/// point `(1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDecomposition {
    pub r: IqSample,
    pub n_x: f64,
    pub n_y: f64,
    pub p_r_db: f64,
    pub p_n_db: f64,
}

impl NoiseDecomposition {
    /// Folds symbols with negative in-phase component onto the `+1` point.
    pub fn of(symbol: IqSample) -> Self {
        let r = if symbol.re < 0.0 { -symbol } else { symbol };
        let n_x = r.re - 1.0;
        let n_y = r.im;
        Self {
            r,
            n_x,
            n_y,
            p_r_db: 10.0 * r.norm_sqr().log10(),
            p_n_db: 10.0 * (n_x * n_x + n_y * n_y).log10(),
        }
    }

    pub fn snr_db(&self) -> f64 {
        (self.p_r_db - self.p_n_db).min(SNR_CAP_DB)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    /// Power of the mean folded symbol over the mean noise power, in dB.
    pub snr_db: f64,
    /// Per-symbol `P(r) - P(n)`, capped at [`SNR_CAP_DB`].
    pub per_symbol_db: Vec<f64>,
    pub cap_events: usize,
}

/// Geometric SNR of a locked symbol stream.
///
/// Each symbol is folded onto `(1, 0)` and split into the received point and
/// the noise vector `(I - 1, Q)`. The per-symbol series is
/// `10 log10((I^2 + Q^2) / ((I - 1)^2 + Q^2))`. The aggregate averages in the
/// linear power domain: the power of the mean received point divided by the
/// mean noise power. On a single symbol both agree.
pub fn estimate_snr(symbols: &SymbolStream) -> Result<SnrEstimate> {
    if symbols.is_empty() {
        return Err(Error::invalid("no symbols"));
    }
    if !symbols.carrier_converged {
        return Err(Error::NotConverged("snr needs a locked carrier".into()));
    }
    let mut cap_events = 0;
    let mut sum_r = IqSample::new(0.0, 0.0);
    let mut sum_n = 0.0;
    let per_symbol_db = symbols
        .symbols
        .iter()
        .map(|&s| {
            let d = NoiseDecomposition::of(s);
            sum_r += d.r;
            sum_n += d.n_x * d.n_x + d.n_y * d.n_y;
            let v = d.p_r_db - d.p_n_db;
            if v.is_nan() || v >= SNR_CAP_DB {
                cap_events += 1;
                SNR_CAP_DB
            } else {
                v
            }
        })
        .collect::<Vec<_>>();
    let n = symbols.len() as f64;
    let signal = (sum_r / n).norm_sqr();
    let noise = sum_n / n;
    let snr_db = if noise > 0.0 {
        (10.0 * (signal / noise).log10()).min(SNR_CAP_DB)
    } else {
        SNR_CAP_DB
    };
    Ok(SnrEstimate {
        snr_db,
        per_symbol_db,
        cap_events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarSample {
    pub r_a: f64,
    pub r_phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarSeries {
    pub samples: Vec<PolarSample>,
    /// Samples at the origin, whose phase is set to 0.
    pub origin_count: usize,
}

/// Amplitude and four-quadrant phase, phase in `(-pi, pi]`.
pub fn amplitude_phase(samples: &[IqSample]) -> Result<PolarSeries> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let mut origin_count = 0;
    let samples = samples
        .iter()
        .map(|s| {
            let r_a = s.re.hypot(s.im);
            let r_phi = if r_a == 0.0 {
                origin_count += 1;
                0.0
            } else {
                let p = s.im.atan2(s.re);
                if p <= -PI {
                    PI
                } else {
                    p
                }
            };
            PolarSample { r_a, r_phi }
        })
        .collect();
    Ok(PolarSeries {
        samples,
        origin_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    /// `(x, F(x))` at every bin edge, `F` the exact empirical CDF.
    pub cdf: Vec<(f64, f64)>,
    /// Histogram density as a step outline: `(left, d), (right, d)` per bin.
    pub pdf: Vec<(f64, f64)>,
}

pub fn empirical_distribution(values: &[f64], n_bins: usize) -> Result<EmpiricalDistribution> {
    if values.is_empty() {
        return Err(Error::invalid("no values"));
    }
    if n_bins < 2 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("values must be finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut lo, mut hi) = (sorted[0], sorted[sorted.len() - 1]);
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / n_bins as f64;
    let edge = |k: usize| if k == n_bins { hi } else { lo + k as f64 * width };
    let n = sorted.len() as f64;

    let cdf = (0..=n_bins)
        .map(|k| {
            let x = edge(k);
            let below = sorted.partition_point(|&v| v <= x);
            (x, below as f64 / n)
        })
        .collect();

    let mut counts = vec![0usize; n_bins];
    for &v in &sorted {
        let k = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let pdf = counts
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| {
            let (a, b) = (edge(k), edge(k + 1));
            let d = c as f64 / (n * (b - a));
            [(a, d), (b, d)]
        })
        .collect();
    Ok(EmpiricalDistribution { cdf, pdf })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Writes `index,i,q,r_a,r_phi,snr_db` rows, one per symbol.
pub fn write_symbol_csv<W: Write>(out: &mut W, symbols: &[IqSample]) -> Result<()> {
    let io = |e| Error::io("<csv writer>", e);
    writeln!(out, "index,i,q,r_a,r_phi,snr_db").map_err(io)?;
    let polar = amplitude_phase(symbols)?;
    for (k, (s, p)) in symbols.iter().zip(&polar.samples).enumerate() {
        let snr = NoiseDecomposition::of(*s).snr_db();
        writeln!(out, "{k},{},{},{},{},{}", s.re, s.im, p.r_a, p.r_phi, snr).map_err(io)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    pub samples_per_symbol: usize,
    pub agc_rate: f64,
    /// Target mean power at the AGC output; `None` selects `1 / sps`, which
    /// puts noiseless symbols at unit amplitude after the matched filter.
    pub agc_target_power: Option<f64>,
    /// Blind squaring-based frequency correction ahead of the matched
    /// filter.
    pub coarse_frequency_correction: bool,
    pub matched_filter: bool,
    pub rolloff: f64,
    pub span_symbols: usize,
    pub timing: TimingLoopConfig,
    pub carrier: CarrierLoopConfig,
    /// Symbols dropped from the front while the loops acquire.
    pub settle_symbols: usize,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            samples_per_symbol: 4,
            agc_rate: 1e-2,
            agc_target_power: None,
            coarse_frequency_correction: true,
            matched_filter: true,
            rolloff: 0.35,
            span_symbols: 11,
            timing: TimingLoopConfig::default(),
            carrier: CarrierLoopConfig::default(),
            settle_symbols: 2000,
        }
    }
}

/// AGC, matched filter, timing recovery and carrier recovery in sequence.
#[derive(Debug, Clone, Default)]
pub struct ReceiverChain {
    pub config: ReceiverConfig,
}

impl ReceiverChain {
    pub fn new(config: ReceiverConfig) -> Self {
        Self { config }
    }

    pub fn run(&self, sig: &SampleBuffer) -> Result<SymbolStream> {
        let c = &self.config;
        let sps = c.samples_per_symbol;
        let target = c.agc_target_power.unwrap_or(1.0 / sps as f64);
        let mut x = agc(sig, target, c.agc_rate)?;
        if c.coarse_frequency_correction {
            x = coarse_frequency_correction(&x)?.0;
        }
        if c.matched_filter {
            x = matched_filter(&x, sps, c.rolloff, c.span_symbols)?;
        }
        let timed = mm_timing_recovery_with(&x, sps, &c.timing)?;
        let mut locked = costas_loop_with(&timed, &c.carrier)?;
        let drop = c.settle_symbols.min(locked.symbols.len().saturating_sub(CONVERGENCE_WINDOW));
        locked.symbols.drain(..drop);
        Ok(locked)
    }
}

/// Bits in one message period.
pub fn message_period_bits() -> usize {
    MESSAGE_PERIOD_BYTES * 8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::generate_message;

    fn near(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn agc_fixed_point_and_scaling() {
        let x: Vec<IqSample> = (0..20_000)
            .map(|n| IqSample::from_polar(1.0, n as f64 * 0.3))
            .collect();
        let at_target = SampleBuffer::new(x.clone(), 1.0).unwrap();
        let y = agc(&at_target, 1.0, 1e-2).unwrap();
        let tail = &y.samples[2000..];
        let p = crate::signal::mean_power(tail);
        assert!(near(p, 1.0, 0.05));

        let loud = SampleBuffer::new(x.iter().map(|s| s * 2.0).collect(), 1.0).unwrap();
        let y = agc(&loud, 1.0, 1e-2).unwrap();
        let p = crate::signal::mean_power(&y.samples[2000..]);
        assert!(near(p, 1.0, 0.05), "{p}");
    }

    #[test]
    fn agc_zero_input_and_errors() {
        let z = SampleBuffer::zeros(1000, 1.0).unwrap();
        let y = agc(&z, 1.0, 1e-2).unwrap();
        assert!(y.samples.iter().all(|s| *s == IqSample::new(0.0, 0.0)));
        assert!(agc(&z, 0.0, 1e-2).is_err());
        assert!(agc(&z, -1.0, 1e-2).is_err());
        assert!(agc(&z, 1.0, 1.5).is_err());
    }

    #[test]
    fn timing_rejects_short_input() {
        let z = SampleBuffer::zeros(39, 1.0).unwrap();
        assert!(mm_timing_recovery(&z, 2).is_err());
        assert!(mm_timing_recovery(&SampleBuffer::zeros(400, 1.0).unwrap(), 1).is_err());
    }

    #[test]
    fn demodulate_sign_rule_and_refusal() {
        let msg = generate_message(1).unwrap();
        let s = SymbolStream::locked(vec![IqSample::new(1.0, 0.0), IqSample::new(-1.0, 0.0)]);
        assert_eq!(demodulate(&s, &msg).unwrap(), vec![0, 1]);
        let mut u = s.clone();
        u.carrier_converged = false;
        assert!(matches!(demodulate(&u, &msg), Err(Error::NotConverged(_))));
    }

    #[test]
    fn demodulate_resolves_polarity() {
        let msg = generate_message(2).unwrap();
        let syms: Vec<IqSample> = msg
            .bits
            .iter()
            .map(|&b| IqSample::new(crate::signal::bpsk_symbol(b), 0.0))
            .collect();
        let plain = demodulate(&SymbolStream::locked(syms.clone()), &msg).unwrap();
        let neg = demodulate(
            &SymbolStream::locked(syms.iter().map(|s| -s).collect()),
            &msg,
        )
        .unwrap();
        assert_eq!(plain, msg.bits);
        assert_eq!(neg, msg.bits);
        let noisy: Vec<IqSample> = syms
            .iter()
            .enumerate()
            .map(|(k, s)| s + IqSample::new(0.0, if k % 2 == 0 { 0.7 } else { -0.9 }))
            .collect();
        assert_eq!(demodulate(&SymbolStream::locked(noisy), &msg).unwrap(), msg.bits);
    }

    #[test]
    fn ber_cases() {
        let msg = generate_message(1).unwrap();
        assert_eq!(compute_ber(&msg.bits, &msg).unwrap(), 0.0);
        let flipped: Vec<u8> = msg.bits.iter().map(|b| b ^ 1).collect();
        assert_eq!(compute_ber(&flipped, &msg).unwrap(), 1.0);
        let mut one = msg.bits.clone();
        one[777] ^= 1;
        assert_eq!(compute_ber(&one, &msg).unwrap(), 1.0 / 2048.0);
        assert!(compute_ber(&msg.bits[..100], &msg).is_err());
    }

    #[test]
    fn ber_finds_cyclic_shift() {
        let msg = generate_message(3).unwrap();
        let rx = &msg.bits[1234..1234 + 3000];
        assert_eq!(compute_ber(rx, &msg).unwrap(), 0.0);
    }

    #[test]
    fn snr_point_examples() {
        let one = |s| estimate_snr(&SymbolStream::locked(vec![s])).unwrap();
        let a = one(IqSample::new(2.0, 0.0));
        assert!(near(a.snr_db, 10.0 * 4f64.log10(), 1e-9));
        assert!(near(a.per_symbol_db[0], 6.0206, 1e-4));
        let b = one(IqSample::new(1.0, 1.0));
        assert!(near(b.snr_db, 10.0 * 2f64.log10(), 1e-9));
        let c = one(IqSample::new(1.0, 0.0));
        assert_eq!(c.per_symbol_db[0], SNR_CAP_DB);
        assert_eq!(c.cap_events, 1);
        assert_eq!(c.snr_db, SNR_CAP_DB);
        // the -1 point folds onto +1
        let d = one(IqSample::new(-2.0, 0.0));
        assert!(near(d.snr_db, a.snr_db, 1e-12));
    }

    #[test]
    fn snr_requires_lock() {
        let s = SymbolStream {
            symbols: vec![IqSample::new(1.0, 0.1)],
            timing_converged: true,
            carrier_converged: false,
        };
        assert!(estimate_snr(&s).is_err());
        assert!(estimate_snr(&SymbolStream::locked(vec![])).is_err());
    }

    #[test]
    fn polar_quadrants() {
        let p = amplitude_phase(&[
            IqSample::new(1.0, 0.0),
            IqSample::new(0.0, 1.0),
            IqSample::new(-1.0, 0.0),
            IqSample::new(-1.0, -0.0),
            IqSample::new(0.0, 0.0),
        ])
        .unwrap();
        assert_eq!((p.samples[0].r_a, p.samples[0].r_phi), (1.0, 0.0));
        assert!(near(p.samples[1].r_phi, PI / 2.0, 1e-15));
        assert_eq!(p.samples[2].r_phi, PI);
        assert_eq!(p.samples[3].r_phi, PI);
        assert_eq!(p.samples[4].r_phi, 0.0);
        assert_eq!(p.origin_count, 1);
        assert!(amplitude_phase(&[]).is_err());
    }

    #[test]
    fn constant_values_give_unit_step() {
        let d = empirical_distribution(&[2.5; 100], 10).unwrap();
        for (x, f) in &d.cdf {
            assert_eq!(*f, if *x >= 2.5 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        let values: Vec<f64> = (0..1000).map(|k| ((k * 7919) % 1000) as f64 * 0.013).collect();
        let d = empirical_distribution(&values, 37).unwrap();
        let area: f64 = d
            .pdf
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum();
        assert!(near(area, 1.0, 1e-9));
        assert!(empirical_distribution(&[], 4).is_err());
        assert!(empirical_distribution(&[1.0], 1).is_err());
    }

    #[test]
    fn ks_basics() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.1], &[5.0, 6.0]), 1.0);
        assert!(near(ks_distance(&[1.0, 2.0], &[2.0, 3.0]), 0.5, 1e-12));
    }

    #[test]
    fn csv_header_and_rows() {
        let mut buf = Vec::new();
        write_symbol_csv(&mut buf, &[IqSample::new(2.0, 0.0), IqSample::new(0.0, 1.0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,i,q,r_a,r_phi,snr_db");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,2,0,2,0,6.02"));
    }
}
