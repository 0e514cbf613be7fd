//! BPSK over an ideal cable: modulate, add receiver noise, recover symbols,
//! and check the bit error rate and geometric SNR.
//!
//!     cargo run --release --example clean_link

use rffjam::channel::{apply_channel, ChannelConfig};
use rffjam::receiver::{compute_ber, demodulate, estimate_snr, ReceiverChain};
use rffjam::signal::{generate_message, modulate_bpsk, ModulationParams};

fn main() -> rffjam::Result<()> {
    let msg = generate_message(60)?;
    let params = ModulationParams::default();
    let tx = modulate_bpsk(&msg, &params)?;
    println!(
        "{} bits at {:.0} ksym/s, {} samples per symbol",
        msg.bits.len(),
        params.symbol_rate_hz() / 1e3,
        params.samples_per_symbol
    );

    for floor_dbm in [-40.0, -30.0, -20.0, -12.0] {
        let rx = apply_channel(&tx, &ChannelConfig::cable(floor_dbm, 1.0), 7)?;
        let symbols = ReceiverChain::default().run(&rx)?;
        let snr = estimate_snr(&symbols)?;
        let ber = compute_ber(&demodulate(&symbols, &msg)?, &msg)?;
        println!(
            "noise floor {floor_dbm:>5.1} dBm: snr {:5.2} dB, ber {ber:.2e}, {} symbols",
            snr.snr_db,
            symbols.len()
        );
    }
    Ok(())
}
