//! The receive chain one stage at a time, with the per-symbol table
//! written to `symbols.csv`.
//!
//!     cargo run --release --example receiver_stages

use std::fs::File;
use std::io::BufWriter;

use rffjam::channel::{apply_channel, ChannelConfig};
use rffjam::impairments::{apply_impairments, make_device_pool};
use rffjam::receiver::{
    agc, coarse_frequency_correction, costas_loop, matched_filter, mm_timing_recovery, write_symbol_csv, CarrierLoopConfig,
};
use rffjam::signal::{generate_message, modulate_bpsk, ModulationParams};

fn main() -> rffjam::Result<()> {
    let params = ModulationParams::default();
    let msg = generate_message(10)?;
    let device = &make_device_pool(5, 42)?.devices[3];
    let tx = apply_impairments(&modulate_bpsk(&msg, &params)?, device, params.carrier_freq_hz, 1)?;
    let rx = apply_channel(&tx, &ChannelConfig::cable(-30.0, 0.1), 2)?;
    println!("received power {:.2e} (front-end gain 0.1)", rx.mean_power());

    let sps = params.samples_per_symbol;
    let levelled = agc(&rx, 1.0 / sps as f64, 1e-2)?;
    println!("after agc {:.4}", levelled.mean_power());
    let (derotated, w) = coarse_frequency_correction(&levelled)?;
    println!(
        "coarse offset {:.5} rad/sample, device cfo {:.5}",
        w,
        device.cfo_hz(params.carrier_freq_hz) * 2.0 * std::f64::consts::PI / params.sample_rate_hz
    );
    let filtered = matched_filter(&derotated, sps, params.rolloff, params.span_symbols)?;
    let timed = mm_timing_recovery(&filtered, sps)?;
    println!("timing loop: {} symbols, converged {}", timed.len(), timed.timing_converged);
    let locked = costas_loop(&timed, CarrierLoopConfig::default().loop_bw)?;
    println!("carrier loop converged {}", locked.carrier_converged);

    let out = "symbols.csv";
    let file = File::create(out).map_err(|e| rffjam::Error::io(out, e))?;
    write_symbol_csv(&mut BufWriter::new(file), &locked.symbols[2000..2200])?;
    println!("wrote 200 symbols to {out}");
    Ok(())
}
