use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rffjam::classifiers::{AutoencoderModel, ClassifierModel};
use rffjam::harness::anonymity::{evaluate_k, evaluate_t, train_k_model, train_t_models, KMode};
use rffjam::harness::capture::{load_dataset, run_capture_with, save_dataset, CaptureContext};
use rffjam::harness::{emit_results, flagged_cells, stats, ExperimentConfig, ExperimentResult, Format, Scenario};
use rffjam::{Error, Result};

#[derive(Parser)]
#[command(name = "rffjam", about = "Friendly-jamming fingerprint sanitization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key/value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    scenario: Option<ScenarioArg>,
    /// Comma-separated relative jamming powers.
    #[arg(long, global = true, value_delimiter = ',')]
    rjp: Option<Vec<f64>>,
    /// Comma-separated jammer attenuations in dB.
    #[arg(long, global = true, value_delimiter = ',')]
    attenuation: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Cable,
    Radio,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every sweep cell and store the recovered symbols.
    Capture,
    /// Train the classifier and the per-device autoencoders on a capture.
    Train,
    /// Evaluate k-anonymity with the trained classifier.
    EvalK,
    /// Evaluate T-anonymity with the trained autoencoders.
    EvalT,
    /// Capture, train and evaluate in one pass, then emit the figures.
    Sweep,
    /// Write the figure tables from a stored result.
    Emit {
        #[arg(long, value_enum, default_value = "both")]
        format: FormatArg,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let fallback = match cli.scenario {
        Some(ScenarioArg::Radio) => Scenario::Radio,
        _ => Scenario::Cable,
    };
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let cfg = ExperimentConfig::from_toml_str_or(&text, fallback)?;
            if cli.scenario.is_some() && cfg.scenario != fallback {
                return Err(Error::Config(format!(
                    "--scenario {} conflicts with the config file's {}",
                    fallback.name(),
                    cfg.scenario.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::for_scenario(fallback),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    if let Some(r) = &cli.rjp {
        cfg.rjp = r.clone();
    }
    if let Some(a) = &cli.attenuation {
        cfg.attenuation_db = a.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Layout {
    capture: PathBuf,
    models: PathBuf,
    result: PathBuf,
    figures: PathBuf,
}

impl Layout {
    fn new(out: &Path) -> Self {
        Self {
            capture: out.join("capture"),
            models: out.join("models"),
            result: out.join("result.json"),
            figures: out.join("figures"),
        }
    }

    fn autoencoder(&self, device: u32) -> PathBuf {
        self.models.join(format!("autoencoder_d{device}.rfjm"))
    }

    fn classifier(&self) -> PathBuf {
        self.models.join("classifier.rfjm")
    }
}

fn read_result(path: &Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentResult::from_json(&text)
}

fn write_result(path: &Path, r: &ExperimentResult) -> Result<()> {
    fs::write(path, r.to_json()?).map_err(|e| Error::io(path, e))
}

fn capture(cfg: &ExperimentConfig) -> Result<rffjam::harness::CaptureDataset> {
    let ctx = CaptureContext::new(cfg)?;
    let ds = run_capture_with(&ctx, |m| {
        eprintln!(
            "cell device {} rjp {} attenuation {} dB: snr {:.2} dB, ber {}{}",
            m.device_id,
            m.rjp,
            m.attenuation_db,
            m.snr_db.unwrap_or(f64::NAN),
            m.ber.map_or("n/a".to_string(), |b| format!("{b:e}")),
            if m.flagged { " (flagged)" } else { "" }
        )
    })?;
    Ok(ds)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = PathBuf::from(&cfg.output_dir);
    let layout = Layout::new(&out);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    match cli.command {
        Command::Capture => {
            let ds = capture(&cfg)?;
            save_dataset(&layout.capture, &ds)?;
            let result = ExperimentResult {
                scenario: cfg.scenario,
                seed: cfg.seed,
                k_anonymity: None,
                t_anonymity: None,
                stats: Some(stats::signal_stats(&ds, cfg.distribution_bins)?),
                flagged: flagged_cells(&ds),
            };
            write_result(&layout.result, &result)?;
            eprintln!("wrote {} cells to {}", ds.cells.len(), layout.capture.display());
        }
        Command::Train => {
            let ds = load_dataset(&layout.capture)?;
            fs::create_dir_all(&layout.models).map_err(|e| Error::io(&layout.models, e))?;
            let k = train_k_model(&ds, &ds.config, KMode::Standard)?;
            k.save(&layout.classifier())?;
            eprintln!("classifier: best validation accuracy {:.3}", k.meta.best_val_accuracy.unwrap_or(f64::NAN));
            for (d, m) in train_t_models(&ds, &ds.config)? {
                m.save(&layout.autoencoder(d))?;
                eprintln!("autoencoder device {d}: final training error {:.3e}", m.meta.final_train_metric);
            }
        }
        Command::EvalK | Command::EvalT => {
            let ds = load_dataset(&layout.capture)?;
            let mut result = read_result(&layout.result)?;
            if matches!(cli.command, Command::EvalK) {
                let model = ClassifierModel::load(&layout.classifier())?;
                let k = evaluate_k(&ds, &ds.config, &model, KMode::Standard)?;
                for r in &k.rows {
                    eprintln!("rjp {} attenuation {} dB: accuracy {:.3}", r.rjp, r.attenuation_db, r.accuracy);
                }
                result.k_anonymity = Some(k);
            } else {
                let models = ds
                    .device_ids()
                    .into_iter()
                    .map(|d| Ok((d, AutoencoderModel::load(&layout.autoencoder(d))?)))
                    .collect::<Result<Vec<_>>>()?;
                let t = evaluate_t(&ds, &ds.config, &models)?;
                for r in &t.rows {
                    eprintln!(
                        "device {} rjp {} attenuation {} dB: auc {:.3}",
                        r.device_id, r.rjp, r.attenuation_db, r.auc
                    );
                }
                result.t_anonymity = Some(t);
            }
            write_result(&layout.result, &result)?;
        }
        Command::Sweep => {
            let ds = capture(&cfg)?;
            let (result, rt) = rffjam::harness::evaluate(&ds)?;
            write_result(&layout.result, &result)?;
            emit_results(&result, Format::Csv, &layout.figures)?;
            emit_results(&result, Format::Json, &layout.figures)?;
            eprintln!(
                "k-anonymity {:.1} s, T-anonymity {:.1} s, statistics {:.1} s; figures in {}",
                rt.k_anonymity_s,
                rt.t_anonymity_s,
                rt.stats_s,
                layout.figures.display()
            );
        }
        Command::Emit { format } => {
            let result = read_result(&layout.result)?;
            let formats: &[Format] = match format {
                FormatArg::Csv => &[Format::Csv],
                FormatArg::Json => &[Format::Json],
                FormatArg::Both => &[Format::Csv, Format::Json],
            };
            for &f in formats {
                for p in emit_results(&result, f, &layout.figures)? {
                    eprintln!("wrote {}", p.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
