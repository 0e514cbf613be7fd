//! Turns a window of recovered symbols into a fingerprint image and prints
//! it as a character map.
//!
//!     cargo run --release --example constellation_image

use rffjam::channel::{apply_channel, ChannelConfig};
use rffjam::imaging::{iq_to_image, PlaneBounds};
use rffjam::impairments::{apply_impairments, make_device_pool};
use rffjam::receiver::ReceiverChain;
use rffjam::signal::{generate_message, modulate_bpsk, ModulationParams};

fn main() -> rffjam::Result<()> {
    let params = ModulationParams::default();
    let clean = modulate_bpsk(&generate_message(8)?, &params)?;
    let bounds = PlaneBounds {
        i_min: -1.25,
        i_max: 1.25,
        q_min: -0.25,
        q_max: 0.25,
    };
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for device in &make_device_pool(5, 42)?.devices[..2] {
        let tx = apply_impairments(&clean, device, params.carrier_freq_hz, 1)?;
        let rx = apply_channel(&tx, &ChannelConfig::cable(-24.0, 0.1), 2)?;
        let symbols = ReceiverChain::default().run(&rx)?.symbols;
        let img = iq_to_image(&symbols[..1000], 32, &bounds)?;
        println!("device {} ({} samples clipped)", device.device_id, img.clipped);
        for r in 0..img.size {
            let line: String = (0..img.size)
                .map(|c| shades[((img.pixel(r, c) * 9.0).round() as usize).min(9)])
                .collect();
            println!("|{line}|");
        }
    }
    Ok(())
}
