//! Over-the-air scenario: multipath, path loss and the attenuator decide
//! whether the jammer sanitizes the fingerprint or breaks the link.
//!
//!     cargo run --release --example radio_link

use rffjam::harness::capture::CaptureContext;
use rffjam::harness::ExperimentConfig;

fn main() -> rffjam::Result<()> {
    let cfg = ExperimentConfig {
        symbols_per_cell: 40_000,
        ..ExperimentConfig::radio()
    };
    let ctx = CaptureContext::new(&cfg)?;
    let device = &ctx.pool.devices[0];
    println!("multipath taps: {:?}", ctx.channel_config(&rffjam::harness::capture::CellSeeds::derive(cfg.seed, device.device_id, 0.0, 0.0)).multipath_taps);
    for &att in &cfg.attenuation_db {
        for &rjp in &cfg.rjp {
            let cell = ctx.run_cell(device, rjp, att)?;
            let m = &cell.meta;
            println!(
                "rjp {rjp} attenuation {att:>2} dB: jam/signal {:>7} dB, snr {:6.2} dB, ber {}",
                m.jam_to_signal_db.map_or("-".into(), |j| format!("{j:.1}")),
                m.snr_db.unwrap_or(f64::NAN),
                m.ber.map_or("no lock".into(), |b| format!("{b:.2e}"))
            );
        }
    }
    Ok(())
}
