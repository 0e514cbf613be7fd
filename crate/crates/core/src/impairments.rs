//! Per-transmitter hardware fingerprint and the relative-power calibration
//! curve of the transmit front end.
//!
//! A [`DeviceProfile`] bundles the analog imperfections that make one
//! transmitter distinguishable from another. [`apply_impairments`] pushes a
//! clean baseband buffer through them in a fixed order that follows a
//! physical transmit chain:
//!
//! 1. power amplifier: `y = x + c * x * |x|^2`
//! 2. I/Q gain and phase imbalance
//! 3. DC offset (carrier leakage)
//! 4. local oscillator: frequency offset plus Wiener phase noise
//! 5. uncalibrated output gain

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{IqSample, SampleBuffer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: u32,
    /// Carrier frequency offset in parts-per-million of the carrier.
    pub cfo_ppm: f64,
    pub phase_noise_linewidth_hz: f64,
    pub iq_gain_imbalance_db: f64,
    pub iq_phase_skew_rad: f64,
    pub dc_offset: IqSample,
    /// Third-order coefficient of the amplifier; negative values compress.
    pub pa_cubic_coeff: f64,
    /// Deviation of the actual output power from the configured one.
    pub power_cal_offset_db: f64,
}

impl DeviceProfile {
    /// A transmitter without any impairment.
    pub fn ideal(device_id: u32) -> Self {
        Self {
            device_id,
            cfo_ppm: 0.0,
            phase_noise_linewidth_hz: 0.0,
            iq_gain_imbalance_db: 0.0,
            iq_phase_skew_rad: 0.0,
            dc_offset: IqSample::new(0.0, 0.0),
            pa_cubic_coeff: 0.0,
            power_cal_offset_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cfo_ppm.abs() > 100.0 {
            return Err(Error::OutOfRange {
                value: self.cfo_ppm,
                min: -100.0,
                max: 100.0,
            });
        }
        if !(-5.0..=5.0).contains(&self.power_cal_offset_db) {
            return Err(Error::OutOfRange {
                value: self.power_cal_offset_db,
                min: -5.0,
                max: 5.0,
            });
        }
        if self.phase_noise_linewidth_hz < 0.0 {
            return Err(Error::invalid("phase noise linewidth must be >= 0"));
        }
        let fields = [
            self.cfo_ppm,
            self.phase_noise_linewidth_hz,
            self.iq_gain_imbalance_db,
            self.iq_phase_skew_rad,
            self.dc_offset.re,
            self.dc_offset.im,
            self.pa_cubic_coeff,
            self.power_cal_offset_db,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("device profile contains non-finite values"));
        }
        Ok(())
    }

    /// Frequency offset in Hz for a given carrier.
    pub fn cfo_hz(&self, carrier_freq_hz: f64) -> f64 {
        self.cfo_ppm * 1e-6 * carrier_freq_hz
    }
}

/// Applies the five impairment stages described in the module docs. Stages
/// whose parameter is zero are skipped, so the ideal profile is an exact
/// identity. The phase-noise walk is driven by `seed`.
pub fn apply_impairments(
    clean: &SampleBuffer,
    profile: &DeviceProfile,
    carrier_freq_hz: f64,
    seed: u64,
) -> Result<SampleBuffer> {
    if clean.is_empty() {
        return Err(Error::invalid("cannot impair an empty buffer"));
    }
    profile.validate()?;
    let fs = clean.sample_rate_hz;
    let mut out = clean.samples.clone();

    if profile.pa_cubic_coeff != 0.0 {
        let c = profile.pa_cubic_coeff;
        for x in &mut out {
            *x += *x * (c * x.norm_sqr());
        }
    }

    if profile.iq_gain_imbalance_db != 0.0 || profile.iq_phase_skew_rad != 0.0 {
        let g = 10f64.powf(profile.iq_gain_imbalance_db / 20.0);
        let (s, c) = profile.iq_phase_skew_rad.sin_cos();
        for x in &mut out {
            let q = g * (x.im * c - x.re * s);
            *x = IqSample::new(x.re, q);
        }
    }

    if profile.dc_offset != IqSample::new(0.0, 0.0) {
        for x in &mut out {
            *x += profile.dc_offset;
        }
    }

    let step = 2.0 * PI * profile.cfo_hz(carrier_freq_hz) / fs;
    let linewidth = profile.phase_noise_linewidth_hz;
    if step != 0.0 || linewidth > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let walk = Normal::new(0.0, (2.0 * PI * linewidth / fs).sqrt())
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut theta = 0.0f64;
        for (n, x) in out.iter_mut().enumerate() {
            let phase = step * n as f64 + theta;
            *x *= IqSample::from_polar(1.0, phase);
            if linewidth > 0.0 {
                theta += walk.sample(&mut rng);
            }
        }
    }

    if profile.power_cal_offset_db != 0.0 {
        let g = 10f64.powf(profile.power_cal_offset_db / 20.0);
        for x in &mut out {
            *x *= g;
        }
    }

    SampleBuffer::new(out, fs)
}

/// Ranges from which [`make_device_pool`] draws profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRanges {
    pub cfo_ppm: f64,
    pub linewidth_hz: (f64, f64),
    pub gain_imbalance_db: f64,
    pub phase_skew_rad: f64,
    pub dc_offset_max: f64,
    pub pa_cubic: (f64, f64),
    pub power_offset_db: f64,
    /// Minimum pairwise CFO separation, enforced by re-drawing.
    pub min_cfo_separation_ppm: f64,
}

impl Default for PoolRanges {
    fn default() -> Self {
        Self {
            cfo_ppm: 30.0,
            linewidth_hz: (1.0, 100.0),
            gain_imbalance_db: 0.5,
            phase_skew_rad: 0.05,
            dc_offset_max: 0.02,
            pa_cubic: (-0.05, 0.0),
            power_offset_db: 5.0,
            min_cfo_separation_ppm: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePool {
    pub devices: Vec<DeviceProfile>,
}

impl DevicePool {
    pub fn new(devices: Vec<DeviceProfile>) -> Result<Self> {
        if devices.len() < 2 {
            return Err(Error::invalid("a device pool needs at least 2 devices"));
        }
        for (i, a) in devices.iter().enumerate() {
            a.validate()?;
            for b in &devices[i + 1..] {
                if a.device_id == b.device_id {
                    return Err(Error::invalid(format!(
                        "duplicate device id {}",
                        a.device_id
                    )));
                }
                let mut a2 = a.clone();
                a2.device_id = b.device_id;
                if a2 == *b {
                    return Err(Error::invalid(format!(
                        "devices {} and {} have identical impairments",
                        a.device_id, b.device_id
                    )));
                }
            }
        }
        Ok(Self { devices })
    }

    /// Number of devices (the `k` of k-anonymity).
    pub fn k(&self) -> usize {
        self.devices.len()
    }
}

pub fn make_device_pool(k: usize, master_seed: u64) -> Result<DevicePool> {
    make_device_pool_with(k, master_seed, &PoolRanges::default())
}

pub fn make_device_pool_with(k: usize, master_seed: u64, ranges: &PoolRanges) -> Result<DevicePool> {
    if k < 2 {
        return Err(Error::invalid(format!("pool size must be >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let sym = |rng: &mut ChaCha8Rng, half: f64| {
        if half > 0.0 {
            rng.random_range(-half..=half)
        } else {
            0.0
        }
    };
    let mut devices: Vec<DeviceProfile> = Vec::with_capacity(k);
    for id in 0..k {
        let mut cfo = sym(&mut rng, ranges.cfo_ppm);
        let mut attempts = 0;
        while devices
            .iter()
            .any(|d| (d.cfo_ppm - cfo).abs() < ranges.min_cfo_separation_ppm)
        {
            attempts += 1;
            if attempts > 10_000 {
                return Err(Error::invalid(
                    "cannot place CFOs with the requested separation",
                ));
            }
            cfo = sym(&mut rng, ranges.cfo_ppm);
        }
        let (lw_lo, lw_hi) = ranges.linewidth_hz;
        let linewidth = if lw_hi > lw_lo {
            rng.random_range(lw_lo..=lw_hi)
        } else {
            lw_lo
        };
        let gain = sym(&mut rng, ranges.gain_imbalance_db);
        let skew = sym(&mut rng, ranges.phase_skew_rad);
        let dc_mag = rng.random_range(0.0..=ranges.dc_offset_max.max(0.0));
        let dc_arg = rng.random_range(-PI..PI);
        let (pa_lo, pa_hi) = ranges.pa_cubic;
        let pa = if pa_hi > pa_lo {
            rng.random_range(pa_lo..=pa_hi)
        } else {
            pa_lo
        };
        let power = sym(&mut rng, ranges.power_offset_db);
        devices.push(DeviceProfile {
            device_id: id as u32,
            cfo_ppm: cfo,
            phase_noise_linewidth_hz: linewidth,
            iq_gain_imbalance_db: gain,
            iq_phase_skew_rad: skew,
            dc_offset: IqSample::from_polar(dc_mag, dc_arg),
            pa_cubic_coeff: pa,
            power_cal_offset_db: power,
        });
    }
    DevicePool::new(devices)
}

/// Relative transmit setting to output power, measured on the reference
/// front end.
pub const RELATIVE_POWER_TABLE: [(f64, f64); 15] = [
    (0.01, -9.6),
    (0.03, -9.0),
    (0.04, -8.5),
    (0.05, -8.0),
    (0.07, -7.5),
    (0.1, -6.5),
    (0.2, -3.5),
    (0.3, -0.3),
    (0.4, 3.2),
    (0.5, 6.5),
    (0.6, 9.7),
    (0.7, 13.3),
    (0.8, 16.5),
    (0.9, 18.9),
    (1.0, 20.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMap {
    table: Vec<(f64, f64)>,
}

impl Default for PowerMap {
    fn default() -> Self {
        Self {
            table: RELATIVE_POWER_TABLE.to_vec(),
        }
    }
}

impl PowerMap {
    pub fn new(table: Vec<(f64, f64)>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::invalid("power map needs at least two rows"));
        }
        let increasing = table
            .windows(2)
            .all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
        if !increasing {
            return Err(Error::invalid(
                "power map must be strictly increasing in both columns",
            ));
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &[(f64, f64)] {
        &self.table
    }

    pub fn min_relative(&self) -> f64 {
        self.table[0].0
    }

    pub fn max_relative(&self) -> f64 {
        self.table[self.table.len() - 1].0
    }
}

/// Piecewise-linear lookup of the output power in dBm.
pub fn relative_power_to_dbm(rel: f64, map: &PowerMap) -> Result<f64> {
    let (lo, hi) = (map.min_relative(), map.max_relative());
    if !(lo..=hi).contains(&rel) {
        return Err(Error::OutOfRange {
            value: rel,
            min: lo,
            max: hi,
        });
    }
    let t = map.table();
    let i = t.partition_point(|&(r, _)| r < rel);
    if t[i].0 == rel {
        return Ok(t[i].1);
    }
    let (r0, d0) = t[i - 1];
    let (r1, d1) = t[i];
    Ok(d0 + (d1 - d0) * (rel - r0) / (r1 - r0))
}

/// 0 dBm corresponds to unit mean sample power.
pub fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn linear_to_dbm(power: f64) -> f64 {
    10.0 * power.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_message, modulate_bpsk, ModulationParams};

    fn clean() -> SampleBuffer {
        modulate_bpsk(&generate_message(1).unwrap(), &ModulationParams::default()).unwrap()
    }

    #[test]
    fn ideal_profile_is_identity() {
        let x = clean();
        let y = apply_impairments(&x, &DeviceProfile::ideal(0), 9e8, 1).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn dc_offset_on_zero_input() {
        let x = SampleBuffer::zeros(64, 2e6).unwrap();
        let mut p = DeviceProfile::ideal(0);
        p.dc_offset = IqSample::new(0.1, 0.0);
        let y = apply_impairments(&x, &p, 9e8, 1).unwrap();
        assert!(y.samples.iter().all(|s| *s == IqSample::new(0.1, 0.0)));
    }

    #[test]
    fn cfo_phase_increment() {
        let x = SampleBuffer::new(vec![IqSample::new(1.0, 0.0); 1000], 2e6).unwrap();
        let mut p = DeviceProfile::ideal(0);
        p.cfo_ppm = 10.0;
        let y = apply_impairments(&x, &p, 9e8, 1).unwrap();
        // 10 ppm of 900 MHz is 9 kHz
        let expected = 2.0 * PI * 9000.0 / 2e6;
        for w in y.samples.windows(2) {
            let d = (w[1] * w[0].conj()).arg();
            assert!((d - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn power_offset_scales_power() {
        let x = clean();
        let mut a = DeviceProfile::ideal(0);
        a.power_cal_offset_db = -2.0;
        let mut b = a.clone();
        b.power_cal_offset_db = 3.0;
        let pa = apply_impairments(&x, &a, 9e8, 3).unwrap().mean_power();
        let pb = apply_impairments(&x, &b, 9e8, 3).unwrap().mean_power();
        let ratio = pb / pa;
        assert!((ratio / 10f64.powf(0.5) - 1.0).abs() < 0.01);
    }

    #[test]
    fn empty_input_rejected() {
        let x = SampleBuffer::zeros(0, 2e6).unwrap();
        assert!(apply_impairments(&x, &DeviceProfile::ideal(0), 9e8, 1).is_err());
    }

    #[test]
    fn pool_determinism_and_seed_sensitivity() {
        let a = make_device_pool(5, 42).unwrap();
        let b = make_device_pool(5, 42).unwrap();
        let c = make_device_pool(5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.k(), 5);
    }

    #[test]
    fn pool_respects_ranges_and_cfo_separation() {
        for seed in 0..50 {
            let pool = make_device_pool(2, seed).unwrap();
            let d = &pool.devices;
            assert!((d[0].cfo_ppm - d[1].cfo_ppm).abs() >= 1.0);
            for p in d {
                assert!(p.cfo_ppm.abs() <= 30.0);
                assert!((1.0..=100.0).contains(&p.phase_noise_linewidth_hz));
                assert!(p.iq_gain_imbalance_db.abs() <= 0.5);
                assert!(p.iq_phase_skew_rad.abs() <= 0.05);
                assert!(p.dc_offset.norm() <= 0.02 + 1e-15);
                assert!((-0.05..=0.0).contains(&p.pa_cubic_coeff));
                assert!(p.power_cal_offset_db.abs() <= 5.0);
            }
        }
        assert!(make_device_pool(1, 0).is_err());
    }

    #[test]
    fn pool_rejects_duplicates() {
        let p = DeviceProfile::ideal(3);
        assert!(DevicePool::new(vec![p.clone(), p.clone()]).is_err());
        let mut q = p.clone();
        q.device_id = 4;
        assert!(DevicePool::new(vec![p, q]).is_err());
    }

    #[test]
    fn table_lookup() {
        let map = PowerMap::default();
        assert_eq!(map.table().len(), 15);
        assert_eq!(map.table()[0], (0.01, -9.6));
        assert_eq!(map.table()[14], (1.0, 20.0));
        assert_eq!(relative_power_to_dbm(0.3, &map).unwrap(), -0.3);
        assert_eq!(relative_power_to_dbm(1.0, &map).unwrap(), 20.0);
        assert_eq!(relative_power_to_dbm(0.01, &map).unwrap(), -9.6);
        let mid = relative_power_to_dbm(0.35, &map).unwrap();
        assert!(mid > -0.3 && mid < 3.2);
        assert!(matches!(
            relative_power_to_dbm(0.005, &map),
            Err(Error::OutOfRange { .. })
        ));
        assert!(relative_power_to_dbm(1.01, &map).is_err());
    }

    #[test]
    fn every_table_row_is_exact() {
        let map = PowerMap::default();
        for &(r, d) in RELATIVE_POWER_TABLE.iter() {
            assert_eq!(relative_power_to_dbm(r, &map).unwrap(), d);
        }
    }

    #[test]
    fn non_monotone_map_rejected() {
        assert!(PowerMap::new(vec![(0.1, 1.0), (0.2, 0.5)]).is_err());
    }
}
