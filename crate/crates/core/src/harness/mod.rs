//! Experiment orchestration: configuration, capture sweeps, anonymity
//! evaluations, signal statistics and result emission.

pub mod anonymity;
pub mod capture;
pub mod config;
pub mod emit;
pub mod stats;

use std::time::Instant;

pub use anonymity::{run_k_anonymity, run_t_anonymity, KAnonymityResult, TAnonymityResult};
pub use capture::{run_capture, CaptureDataset};
pub use config::{ExperimentConfig, Scenario};
pub use emit::{emit_results, ExperimentResult, Format, RuntimeStats};

use crate::error::Result;

/// Every flagged cell of the dataset, in dataset order.
pub fn flagged_cells(ds: &CaptureDataset) -> Vec<anonymity::FlaggedCell> {
    ds.cells
        .iter()
        .filter(|c| !c.meta.usable())
        .map(|c| anonymity::FlaggedCell {
            device_id: c.meta.device_id,
            rjp: c.meta.rjp,
            attenuation_db: c.meta.attenuation_db,
            ber: c.meta.ber,
            reason: c.meta.failure.clone().unwrap_or_else(|| "flagged".into()),
        })
        .collect()
}

/// Both anonymity evaluations and the signal statistics of a captured
/// dataset.
pub fn evaluate(ds: &CaptureDataset) -> Result<(ExperimentResult, RuntimeStats)> {
    let cfg = &ds.config;
    let mut rt = RuntimeStats::default();
    let t0 = Instant::now();
    let k = run_k_anonymity(ds, cfg)?;
    rt.k_anonymity_s = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let t = run_t_anonymity(ds, cfg)?;
    rt.t_anonymity_s = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let stats = stats::signal_stats(ds, cfg.distribution_bins)?;
    rt.stats_s = t0.elapsed().as_secs_f64();
    Ok((
        ExperimentResult {
            scenario: cfg.scenario,
            seed: cfg.seed,
            k_anonymity: Some(k),
            t_anonymity: Some(t),
            stats: Some(stats),
            flagged: flagged_cells(ds),
        },
        rt,
    ))
}

/// Capture followed by both evaluations.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(CaptureDataset, ExperimentResult, RuntimeStats)> {
    let t0 = Instant::now();
    let ds = run_capture(cfg)?;
    let capture_s = t0.elapsed().as_secs_f64();
    let (result, mut rt) = evaluate(&ds)?;
    rt.capture_s = capture_s;
    Ok((ds, result, rt))
}
