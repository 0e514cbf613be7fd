//! Stores a capture cell as interleaved little-endian f32 plus a JSON
//! sidecar and reads it back, the same path used for external recordings.
//!
//!     cargo run --release --example import_capture

use rffjam::harness::capture::{cell_stem, load_cell, save_cell, CaptureContext};
use rffjam::harness::ExperimentConfig;

fn main() -> rffjam::Result<()> {
    let cfg = ExperimentConfig {
        symbols_per_cell: 20_000,
        ..ExperimentConfig::cable()
    };
    let ctx = CaptureContext::new(&cfg)?;
    let cell = ctx.run_cell(&ctx.pool.devices[1], 0.2, 20.0)?;
    let dir = std::env::temp_dir().join("rffjam_import");
    std::fs::create_dir_all(&dir).map_err(|e| rffjam::Error::io(&dir, e))?;
    save_cell(&dir, &cell)?;
    let stem = cell_stem(&cell.meta);
    let back = load_cell(&dir.join(format!("{stem}.iq")), &dir.join(format!("{stem}.json")))?;
    println!(
        "{stem}: {} symbols, snr {:.2} dB, ber {:?}, identical after reload: {}",
        back.symbols.len(),
        back.meta.snr_db.unwrap_or(f64::NAN),
        back.meta.ber,
        back == cell
    );
    Ok(())
}
