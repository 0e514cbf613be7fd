//! One autoencoder per transmitter, trained on its unjammed fingerprint;
//! jammed windows are flagged by their reconstruction error.
//!
//!     cargo run --release --example t_anonymity

use rffjam::harness::{run_capture, run_t_anonymity, ExperimentConfig};

fn main() -> rffjam::Result<()> {
    let cfg = ExperimentConfig {
        k: 2,
        rjp: vec![0.0, 0.05, 0.2, 0.5],
        attenuation_db: vec![20.0, 40.0],
        symbols_per_cell: 100_000,
        autoencoder_epochs: 15,
        ..ExperimentConfig::cable()
    };
    let ds = run_capture(&cfg)?;
    let t = run_t_anonymity(&ds, &cfg)?;
    for r in &t.rows {
        println!(
            "device {} rjp {:<4} attenuation {} dB: auc {:.3} at snr {:5.2} dB ({} roc points)",
            r.device_id,
            r.rjp,
            r.attenuation_db,
            r.auc,
            r.snr_db,
            r.roc.points.len()
        );
    }
    Ok(())
}
