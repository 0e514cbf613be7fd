//! A reduced cable sweep end to end, with the figure tables written to
//! `sweep_out/`.
//!
//!     cargo run --release --example cable_sweep

use std::path::Path;

use rffjam::harness::{emit_results, run_sweep, ExperimentConfig, Format};

fn main() -> rffjam::Result<()> {
    let cfg = ExperimentConfig {
        k: 3,
        rjp: vec![0.0, 0.05, 0.2, 0.4],
        symbols_per_cell: 60_000,
        classifier_epochs: 10,
        autoencoder_epochs: 10,
        ..ExperimentConfig::cable()
    };
    let (ds, result, rt) = run_sweep(&cfg)?;
    println!(
        "{} cells; capture {:.1} s, k {:.1} s, T {:.1} s",
        ds.cells.len(),
        rt.capture_s,
        rt.k_anonymity_s,
        rt.t_anonymity_s
    );
    let out = Path::new("sweep_out");
    for f in [Format::Csv, Format::Json] {
        emit_results(&result, f, out)?;
    }
    print!("{}", result.tables()[4].to_csv());
    Ok(())
}
