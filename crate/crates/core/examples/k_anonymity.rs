//! Trains the eavesdropper's classifier on unjammed captures and measures
//! how well it still names each transmitter as the jammer gets louder.
//!
//!     cargo run --release --example k_anonymity

use rffjam::harness::anonymity::{run_k_anonymity_mode, KMode};
use rffjam::harness::{run_capture, ExperimentConfig};

fn main() -> rffjam::Result<()> {
    let cfg = ExperimentConfig {
        rjp: vec![0.0, 0.1, 0.2, 0.3, 0.5],
        attenuation_db: vec![20.0],
        symbols_per_cell: 100_000,
        classifier_epochs: 15,
        ..ExperimentConfig::cable()
    };
    let ds = run_capture(&cfg)?;
    let k = run_k_anonymity_mode(&ds, &cfg, KMode::Standard)?;
    println!("k = {}, random guess {:.2}", k.k, 1.0 / k.k as f64);
    for row in &k.rows {
        println!(
            "rjp {:<4} accuracy {:.3}  mean snr {:5.2} dB  ({} test images)",
            row.rjp, row.accuracy, row.mean_snr_db, row.n_test
        );
    }
    let control = run_k_anonymity_mode(&ds, &cfg, KMode::ShuffledLabels { seed: 3 })?;
    println!("shuffled-label control at rjp 0: {:.3}", control.rows[0].accuracy);
    Ok(())
}
