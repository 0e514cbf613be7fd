//! Jammer power from the relative setting and attenuator, and what it does
//! to one transmitter's link.
//!
//!     cargo run --release --example jammer_sweep

use rffjam::channel::{apply_channel, combine, synthesize_jammer, ChannelConfig, JammerConfig, JammerWaveform};
use rffjam::impairments::{apply_impairments, dbm_to_linear, make_device_pool, relative_power_to_dbm, PowerMap};
use rffjam::receiver::{compute_ber, demodulate, estimate_snr, ReceiverChain};
use rffjam::signal::{generate_message, modulate_bpsk, ModulationParams};

fn main() -> rffjam::Result<()> {
    let map = PowerMap::default();
    let device = &make_device_pool(5, 42)?.devices[0];
    let msg = generate_message(30)?;
    let params = ModulationParams::default();
    let mut clean = modulate_bpsk(&msg, &params)?;
    let p = clean.mean_power();
    clean.scale(p.sqrt().recip());
    let mut tx = apply_impairments(&clean, device, params.carrier_freq_hz, 3)?;
    tx.scale(dbm_to_linear(relative_power_to_dbm(0.3, &map)?).sqrt());

    for attenuation_db in [20.0, 40.0] {
        println!("attenuation {attenuation_db} dB");
        for rjp in [0.0, 0.03, 0.1, 0.2, 0.3, 0.4, 0.5] {
            let jc = JammerConfig {
                waveform: JammerWaveform::GaussianNoise,
                ..JammerConfig::new(rjp, attenuation_db, 11)
            };
            let jam = synthesize_jammer(tx.len(), tx.sample_rate_hz, &jc, &map)?;
            let rx = apply_channel(&combine(&tx, &jam)?, &ChannelConfig::cable(-24.0, 0.1), 5)?;
            let s = ReceiverChain::default().run(&rx)?;
            let ber = compute_ber(&demodulate(&s, &msg)?, &msg)?;
            let jam_dbm = jc
                .output_power(&map)?
                .map_or("   off".to_string(), |w| format!("{:6.1}", 10.0 * w.log10()));
            println!(
                "  rjp {rjp:<4} jammer {jam_dbm} dBm  snr {:5.2} dB  ber {ber:.1e}",
                estimate_snr(&s)?.snr_db
            );
        }
    }
    Ok(())
}
