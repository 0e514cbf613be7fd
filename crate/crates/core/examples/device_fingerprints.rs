//! A seeded pool of transmitters and how each one's hardware distorts the
//! recovered constellation.
//!
//!     cargo run --release --example device_fingerprints

use rffjam::channel::{apply_channel, ChannelConfig};
use rffjam::impairments::{apply_impairments, make_device_pool};
use rffjam::receiver::{estimate_snr, ReceiverChain};
use rffjam::signal::{generate_message, modulate_bpsk, IqSample, ModulationParams};

fn main() -> rffjam::Result<()> {
    let pool = make_device_pool(5, 42)?;
    let msg = generate_message(20)?;
    let params = ModulationParams::default();
    let clean = modulate_bpsk(&msg, &params)?;

    println!("dev   cfo ppm  linewidth Hz  iq dB  skew rad  |dc|    pa coeff  power dB  snr dB  mean +1 point");
    for d in &pool.devices {
        let tx = apply_impairments(&clean, d, params.carrier_freq_hz, 1)?;
        let rx = apply_channel(&tx, &ChannelConfig::cable(-40.0, 1.0), 2)?;
        let s = ReceiverChain::default().run(&rx)?;
        let mean: IqSample = s
            .symbols
            .iter()
            .map(|x| if x.re < 0.0 { -x } else { *x })
            .sum::<IqSample>()
            / s.len() as f64;
        println!(
            "{:>3} {:>9.2} {:>13.1} {:>6.2} {:>9.3} {:>6.4} {:>9.4} {:>9.2} {:>7.2}  ({:.4}, {:.4})",
            d.device_id,
            d.cfo_ppm,
            d.phase_noise_linewidth_hz,
            d.iq_gain_imbalance_db,
            d.iq_phase_skew_rad,
            d.dc_offset.norm(),
            d.pa_cubic_coeff,
            d.power_cal_offset_db,
            estimate_snr(&s)?.snr_db,
            mean.re,
            mean.im
        );
    }
    Ok(())
}
