//! Constellation images: 2D histograms of symbol-rate I/Q samples over a
//! fixed plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::IqSample;

pub const DEFAULT_IMAGE_SIZE: usize = 224;
pub const DEFAULT_SAMPLES_PER_IMAGE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneBounds {
    pub i_min: f64,
    pub i_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl PlaneBounds {
    pub fn symmetric(half_width: f64) -> Self {
        Self {
            i_min: -half_width,
            i_max: half_width,
            q_min: -half_width,
            q_max: half_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64, b: f64| a.is_finite() && b.is_finite() && a < b;
        if ok(self.i_min, self.i_max) && ok(self.q_min, self.q_max) {
            Ok(())
        } else {
            Err(Error::invalid(format!("degenerate plane bounds {self:?}")))
        }
    }
}

impl Default for PlaneBounds {
    fn default() -> Self {
        Self::symmetric(2.0)
    }
}

/// Row-major `size x size` grid, row index along Q (top row is `q_max`),
/// column index along I.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintImage {
    pub size: usize,
    pub pixels: Vec<f32>,
    pub n_source_samples: usize,
    pub bounds: PlaneBounds,
    /// Samples that fell outside the bounds and were clipped to edge bins.
    pub clipped: usize,
}

impl FingerprintImage {
    pub fn pixel(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.size + col]
    }
}

fn bin(v: f64, lo: f64, hi: f64, size: usize) -> (usize, bool) {
    let t = (v - lo) / (hi - lo) * size as f64;
    if t.is_nan() {
        return (0, true);
    }
    if t < 0.0 {
        (0, true)
    } else if t >= size as f64 {
        (size - 1, v > hi)
    } else {
        (t as usize, false)
    }
}

/// Raw per-bin counts and the number of clipped samples.
pub fn histogram_counts(samples: &[IqSample], size: usize, bounds: &PlaneBounds) -> Result<(Vec<u32>, usize)> {
    if size == 0 {
        return Err(Error::invalid("image size must be positive"));
    }
    bounds.validate()?;
    let mut counts = vec![0u32; size * size];
    let mut clipped = 0;
    for s in samples {
        let (col, ci) = bin(s.re, bounds.i_min, bounds.i_max, size);
        let (from_bottom, cq) = bin(s.im, bounds.q_min, bounds.q_max, size);
        let row = size - 1 - from_bottom;
        counts[row * size + col] += 1;
        if ci || cq {
            clipped += 1;
        }
    }
    Ok((counts, clipped))
}

/// Histogram of the window normalized by its largest bin.
pub fn iq_to_image(window: &[IqSample], size: usize, bounds: &PlaneBounds) -> Result<FingerprintImage> {
    if window.is_empty() {
        return Err(Error::invalid("empty window"));
    }
    let (counts, clipped) = histogram_counts(window, size, bounds)?;
    let max = *counts.iter().max().unwrap_or(&0) as f32;
    let pixels = counts.iter().map(|&c| c as f32 / max).collect();
    Ok(FingerprintImage {
        size,
        pixels,
        n_source_samples: window.len(),
        bounds: *bounds,
        clipped,
    })
}

/// Number of windows `batch_windows` produces for `n` symbols.
pub fn window_count(n: usize, samples_per_image: usize, stride: usize) -> usize {
    if samples_per_image == 0 || stride == 0 || n < samples_per_image {
        0
    } else {
        (n - samples_per_image) / stride + 1
    }
}

pub fn batch_windows(
    symbols: &[IqSample],
    samples_per_image: usize,
    stride: usize,
    size: usize,
    bounds: &PlaneBounds,
) -> Result<Vec<FingerprintImage>> {
    if stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    if samples_per_image == 0 {
        return Err(Error::invalid("samples_per_image must be >= 1"));
    }
    (0..window_count(symbols.len(), samples_per_image, stride))
        .map(|k| {
            let start = k * stride;
            iq_to_image(&symbols[start..start + samples_per_image], size, bounds)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> IqSample {
        IqSample::new(re, im)
    }

    #[test]
    fn point_mass() {
        let img = iq_to_image(&[c(1.0, 0.0); 50], 16, &PlaneBounds::default()).unwrap();
        let lit: Vec<_> = img.pixels.iter().filter(|&&p| p > 0.0).collect();
        assert_eq!(lit, vec![&1.0]);
        // I = 1 on [-2, 2] with 16 bins lands in column 12; Q = 0 in row 7
        assert_eq!(img.pixel(7, 12), 1.0);
    }

    #[test]
    fn counts_are_conserved() {
        let w: Vec<IqSample> = (0..997)
            .map(|k| c((k as f64 * 0.37).sin() * 2.5, (k as f64 * 0.11).cos() * 2.5))
            .collect();
        let (counts, clipped) = histogram_counts(&w, 32, &PlaneBounds::default()).unwrap();
        assert_eq!(counts.iter().map(|&x| x as usize).sum::<usize>(), 997);
        assert!(clipped > 0);
    }

    #[test]
    fn symmetric_pair() {
        let mut w = vec![c(1.0, 0.0); 10];
        w.extend(vec![c(-1.0, 0.0); 10]);
        let img = iq_to_image(&w, 8, &PlaneBounds::default()).unwrap();
        assert_eq!(img.pixels.iter().filter(|&&p| p == 1.0).count(), 2);
        assert_eq!(img.pixels.iter().filter(|&&p| p > 0.0).count(), 2);
    }

    #[test]
    fn empty_window_rejected() {
        assert!(iq_to_image(&[], 8, &PlaneBounds::default()).is_err());
    }

    #[test]
    fn window_arithmetic() {
        assert_eq!(window_count(30_000, 10_000, 10_000), 3);
        assert_eq!(window_count(9_999, 10_000, 10_000), 0);
        assert_eq!(window_count(20_000, 10_000, 5_000), 3);
        let w = vec![c(0.5, 0.5); 25];
        assert_eq!(batch_windows(&w, 10, 10, 4, &PlaneBounds::default()).unwrap().len(), 2);
        assert!(batch_windows(&w, 10, 0, 4, &PlaneBounds::default()).is_err());
    }

    #[test]
    fn dc_shift_moves_bins() {
        let b = PlaneBounds::default();
        let a = iq_to_image(&[c(0.1, 0.1)], 40, &b).unwrap();
        let s = iq_to_image(&[c(0.6, -0.4)], 40, &b).unwrap();
        let at = |img: &FingerprintImage| img.pixels.iter().position(|&p| p == 1.0).unwrap();
        let (ra, ca) = (at(&a) / 40, at(&a) % 40);
        let (rs, cs) = (at(&s) / 40, at(&s) % 40);
        assert_eq!(cs - ca, 5);
        assert_eq!(rs - ra, 5);
    }
}
