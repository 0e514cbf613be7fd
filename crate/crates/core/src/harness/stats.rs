//! Signal statistics per sweep point: amplitude and phase distributions,
//! per-symbol SNR density, and their drift away from the unjammed point.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::capture::{CaptureDataset, Cell};
use crate::receiver::{amplitude_phase, empirical_distribution, ks_distance, EmpiricalDistribution, NoiseDecomposition};
use crate::signal::IqSample;

/// Amplitude and phase of each symbol folded onto the `+1` half plane, so
/// both constellation points share one cluster.
pub fn folded_polar(cell: &Cell) -> Result<(Vec<f64>, Vec<f64>)> {
    let folded: Vec<IqSample> = cell
        .symbols_f64()
        .into_iter()
        .map(|s| if s.re < 0.0 { -s } else { s })
        .collect();
    let polar = amplitude_phase(&folded)?;
    Ok(polar.samples.iter().map(|p| (p.r_a, p.r_phi)).unzip())
}

pub fn per_symbol_snr_db(cell: &Cell) -> Vec<f64> {
    cell.symbols_f64()
        .into_iter()
        .map(|s| NoiseDecomposition::of(s).snr_db())
        .filter(|v| v.is_finite())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub rjp: f64,
    pub attenuation_db: f64,
    pub amplitude: EmpiricalDistribution,
    pub phase: EmpiricalDistribution,
    pub snr: EmpiricalDistribution,
    /// KS distance from the unjammed point at the same attenuation.
    pub ks_amplitude: f64,
    pub ks_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub device_id: u32,
    pub rjp: f64,
    pub attenuation_db: f64,
    pub snr_db: Option<f64>,
    pub ber: Option<f64>,
    pub jam_to_signal_db: Option<f64>,
    pub ks_amplitude: Option<f64>,
    pub ks_phase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalStats {
    /// Pooled over devices, one entry per (rjp, attenuation).
    pub points: Vec<PointStats>,
    pub cells: Vec<CellStats>,
}

fn pooled(cells: &[&Cell]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (mut a, mut p, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for c in cells {
        if c.symbols.is_empty() {
            continue;
        }
        let (ca, cp) = folded_polar(c)?;
        a.extend(ca);
        p.extend(cp);
        s.extend(per_symbol_snr_db(c));
    }
    Ok((a, p, s))
}

pub fn signal_stats(ds: &CaptureDataset, n_bins: usize) -> Result<SignalStats> {
    let cfg = &ds.config;
    let mut points = Vec::new();
    let mut cells = Vec::new();
    for &att in &cfg.attenuation_db {
        let at = |r: f64| -> Vec<&Cell> {
            ds.cells
                .iter()
                .filter(|c| c.meta.rjp == r && c.meta.attenuation_db == att)
                .collect()
        };
        let (base_a, base_p, _) = pooled(&at(0.0))?;
        for &rjp in &cfg.rjp {
            let group = at(rjp);
            let (a, p, s) = pooled(&group)?;
            if a.is_empty() {
                continue;
            }
            points.push(PointStats {
                rjp,
                attenuation_db: att,
                amplitude: empirical_distribution(&a, n_bins)?,
                phase: empirical_distribution(&p, n_bins)?,
                snr: empirical_distribution(&s, n_bins)?,
                ks_amplitude: ks_distance(&base_a, &a),
                ks_phase: ks_distance(&base_p, &p),
            });
        }
        for c in ds.cells.iter().filter(|c| c.meta.attenuation_db == att) {
            let (ks_amplitude, ks_phase) = match ds.cell(c.meta.device_id, 0.0, att) {
                Some(base) if !base.symbols.is_empty() && !c.symbols.is_empty() => {
                    let (ba, bp) = folded_polar(base)?;
                    let (ca, cp) = folded_polar(c)?;
                    (Some(ks_distance(&ba, &ca)), Some(ks_distance(&bp, &cp)))
                }
                _ => (None, None),
            };
            cells.push(CellStats {
                device_id: c.meta.device_id,
                rjp: c.meta.rjp,
                attenuation_db: att,
                snr_db: c.meta.snr_db,
                ber: c.meta.ber,
                jam_to_signal_db: c.meta.jam_to_signal_db,
                ks_amplitude,
                ks_phase,
            });
        }
    }
    cells.sort_by(|x, y| {
        (x.device_id, x.attenuation_db.to_bits(), x.rjp.to_bits())
            .cmp(&(y.device_id, y.attenuation_db.to_bits(), y.rjp.to_bits()))
    });
    Ok(SignalStats { points, cells })
}
