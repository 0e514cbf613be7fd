//! Per-cell capture: transmitter, jammer, channel and receiver for every
//! (device, rjp, attenuation) coordinate, plus on-disk persistence.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, combine, default_radio_taps, synthesize_jammer, ChannelConfig, JammerConfig, JammerWaveform};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Scenario};
use crate::impairments::{apply_impairments, dbm_to_linear, linear_to_dbm, make_device_pool, relative_power_to_dbm, DeviceProfile, DevicePool, PowerMap};
use crate::receiver::{compute_ber, demodulate, estimate_snr, message_period_bits, ReceiverChain, ReceiverConfig};
use crate::signal::{generate_message, modulate_bpsk, IqSample, Message, ModulationParams, SampleBuffer};

/// Symbols past the settle window and the requested budget, so the
/// receiver's start-up transient never eats into the stored record.
const GUARD_SYMBOLS: usize = 64;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a sequence of coordinates into an independent
/// stream seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(master), |acc, &p| splitmix(acc ^ splitmix(p)))
}

const TAG_IMPAIRMENT: u64 = 1;
const TAG_JAMMER: u64 = 2;
const TAG_CHANNEL: u64 = 3;
const TAG_MULTIPATH: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub impairment: u64,
    pub jammer: u64,
    pub channel: u64,
    pub multipath: u64,
}

impl CellSeeds {
    pub fn derive(master: u64, device: u32, rjp: f64, attenuation_db: f64) -> Self {
        let at = |tag| derive_seed(master, &[tag, device as u64, rjp.to_bits(), attenuation_db.to_bits()]);
        Self {
            impairment: at(TAG_IMPAIRMENT),
            jammer: at(TAG_JAMMER),
            channel: at(TAG_CHANNEL),
            // fixed per device so a transmitter keeps its multipath profile
            multipath: derive_seed(master, &[TAG_MULTIPATH, device as u64]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub scenario: Scenario,
    pub device_id: u32,
    pub rjp: f64,
    pub attenuation_db: f64,
    pub seeds: CellSeeds,
    pub profile: DeviceProfile,
    pub jammer_waveform: JammerWaveform,
    pub channel: ChannelConfig,
    pub receiver: ReceiverConfig,
    pub sample_rate_hz: f64,
    pub samples_per_symbol: usize,
    pub tx_power_dbm: f64,
    /// `None` when the jammer is off.
    pub jammer_power_dbm: Option<f64>,
    pub jam_to_signal_db: Option<f64>,
    pub n_symbols: usize,
    /// Always written; `None` only when the receiver never locked.
    pub ber: Option<f64>,
    pub snr_db: Option<f64>,
    pub timing_converged: bool,
    pub carrier_converged: bool,
    /// Set when BER is nonzero or the receiver failed; such cells are kept
    /// out of the anonymity tables.
    pub flagged: bool,
    pub failure: Option<String>,
}

impl CellMeta {
    pub fn usable(&self) -> bool {
        !self.flagged && self.ber == Some(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub meta: CellMeta,
    /// Symbol-rate samples after carrier recovery, stored at f32 precision.
    pub symbols: Vec<Complex32>,
}

impl Cell {
    pub fn symbols_f64(&self) -> Vec<IqSample> {
        self.symbols.iter().map(|s| IqSample::new(s.re as f64, s.im as f64)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureDataset {
    pub config: ExperimentConfig,
    pub pool: DevicePool,
    /// Device-major, then rjp, then attenuation, in config order.
    pub cells: Vec<Cell>,
}

impl CaptureDataset {
    pub fn cell(&self, device_id: u32, rjp: f64, attenuation_db: f64) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.meta.device_id == device_id && c.meta.rjp == rjp && c.meta.attenuation_db == attenuation_db)
    }

    pub fn device_ids(&self) -> Vec<u32> {
        self.pool.devices.iter().map(|d| d.device_id).collect()
    }
}

/// Everything shared by the cells of one capture run.
pub struct CaptureContext {
    pub config: ExperimentConfig,
    pub pool: DevicePool,
    pub message: Message,
    pub power_map: PowerMap,
    clean: SampleBuffer,
}

impl CaptureContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let pool = make_device_pool(config.k, config.pool_seed)?;
        Self::with_pool(config, pool)
    }

    pub fn with_pool(config: &ExperimentConfig, pool: DevicePool) -> Result<Self> {
        config.validate()?;
        let needed = config.symbols_per_cell + config.settle_symbols + GUARD_SYMBOLS;
        let message = generate_message(needed.div_ceil(message_period_bits()))?;
        let params = ModulationParams {
            carrier_freq_hz: config.carrier_freq_hz,
            samples_per_symbol: config.samples_per_symbol,
            sample_rate_hz: config.sample_rate_hz(),
            ..ModulationParams::default()
        };
        let mut clean = modulate_bpsk(&message, &params)?;
        let p = clean.mean_power();
        clean.scale(p.sqrt().recip());
        Ok(Self {
            config: config.clone(),
            pool,
            message,
            power_map: PowerMap::default(),
            clean,
        })
    }

    pub fn receiver_config(&self) -> ReceiverConfig {
        ReceiverConfig {
            samples_per_symbol: self.config.samples_per_symbol,
            settle_symbols: self.config.settle_symbols,
            ..ReceiverConfig::default()
        }
    }

    pub fn channel_config(&self, seeds: &CellSeeds) -> ChannelConfig {
        let c = &self.config;
        match c.scenario {
            Scenario::Cable => ChannelConfig::cable(c.noise_floor_dbm, c.rx_gain_rel),
            Scenario::Radio => ChannelConfig::radio(c.noise_floor_dbm, c.rx_gain_rel, default_radio_taps(seeds.multipath)),
        }
    }

    /// Builds the impaired, jammed, channel-distorted sample stream that
    /// reaches the receiver for one cell.
    pub fn received(&self, profile: &DeviceProfile, rjp: f64, attenuation_db: f64) -> Result<(SampleBuffer, CellMeta)> {
        let c = &self.config;
        let seeds = CellSeeds::derive(c.seed, profile.device_id, rjp, attenuation_db);
        let tx_dbm = relative_power_to_dbm(c.tx_relative_power, &self.power_map)?;
        // impairments act on the unit-power waveform, so the PA curve is
        // independent of the transmit setting
        let mut tx = apply_impairments(&self.clean, profile, c.carrier_freq_hz, seeds.impairment)?;
        tx.scale(dbm_to_linear(tx_dbm).sqrt());
        let tx_power = tx.mean_power();
        let jc = JammerConfig {
            relative_jamming_power: rjp,
            attenuation_db,
            waveform: c.waveform(),
            seed: seeds.jammer,
        };
        let jam_power = jc.output_power(&self.power_map)?;
        let jam = synthesize_jammer(tx.len(), tx.sample_rate_hz, &jc, &self.power_map)?;
        let mut air = combine(&tx, &jam)?;
        if c.path_loss_db > 0.0 {
            air.scale(dbm_to_linear(-c.path_loss_db).sqrt());
        }
        let channel = self.channel_config(&seeds);
        let rx = apply_channel(&air, &channel, seeds.channel)?;
        let meta = CellMeta {
            scenario: c.scenario,
            device_id: profile.device_id,
            rjp,
            attenuation_db,
            seeds,
            profile: profile.clone(),
            jammer_waveform: jc.waveform,
            channel,
            receiver: self.receiver_config(),
            sample_rate_hz: rx.sample_rate_hz,
            samples_per_symbol: c.samples_per_symbol,
            tx_power_dbm: linear_to_dbm(tx_power),
            jammer_power_dbm: jam_power.map(linear_to_dbm),
            jam_to_signal_db: jam_power.map(|j| linear_to_dbm(j / tx_power)),
            n_symbols: 0,
            ber: None,
            snr_db: None,
            timing_converged: false,
            carrier_converged: false,
            flagged: true,
            failure: None,
        };
        Ok((rx, meta))
    }

    /// Runs one cell end to end. Receiver failures are recorded in the
    /// metadata rather than returned as errors.
    pub fn run_cell(&self, profile: &DeviceProfile, rjp: f64, attenuation_db: f64) -> Result<Cell> {
        let (rx, mut meta) = self.received(profile, rjp, attenuation_db)?;
        let stream = ReceiverChain::new(meta.receiver.clone()).run(&rx)?;
        meta.timing_converged = stream.timing_converged;
        meta.carrier_converged = stream.carrier_converged;
        let n = stream.symbols.len().min(self.config.symbols_per_cell);
        let symbols: Vec<Complex32> = stream.symbols[..n]
            .iter()
            .map(|s| Complex32::new(s.re as f32, s.im as f32))
            .collect();
        meta.n_symbols = n;
        meta.snr_db = estimate_snr(&stream).ok().map(|e| e.snr_db);
        match demodulate(&stream, &self.message).and_then(|bits| compute_ber(&bits, &self.message)) {
            Ok(ber) => {
                meta.ber = Some(ber);
                meta.flagged = ber > 0.0;
                if ber > 0.0 {
                    meta.failure = Some(format!("nonzero BER {ber:e}"));
                }
            }
            Err(e) => {
                meta.flagged = true;
                meta.failure = Some(e.to_string());
            }
        }
        if n < self.config.symbols_per_cell && meta.failure.is_none() {
            meta.flagged = true;
            meta.failure = Some(format!("only {n} symbols recovered"));
        }
        Ok(Cell { meta, symbols })
    }
}

/// Captures every (device, rjp, attenuation) cell of the configured sweep.
pub fn run_capture(config: &ExperimentConfig) -> Result<CaptureDataset> {
    run_capture_with(&CaptureContext::new(config)?, |_| {})
}

/// As `run_capture`, reporting each finished cell to `progress`.
pub fn run_capture_with(ctx: &CaptureContext, mut progress: impl FnMut(&CellMeta)) -> Result<CaptureDataset> {
    let c = &ctx.config;
    let mut cells = Vec::with_capacity(ctx.pool.k() * c.rjp.len() * c.attenuation_db.len());
    for profile in &ctx.pool.devices {
        for &rjp in &c.rjp {
            for &att in &c.attenuation_db {
                let cell = ctx.run_cell(profile, rjp, att)?;
                progress(&cell.meta);
                cells.push(cell);
            }
        }
    }
    Ok(CaptureDataset {
        config: c.clone(),
        pool: ctx.pool.clone(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    config: ExperimentConfig,
    pool: DevicePool,
    cells: Vec<String>,
}

pub fn cell_stem(meta: &CellMeta) -> String {
    format!("cell_d{}_rjp{}_att{}", meta.device_id, meta.rjp, meta.attenuation_db)
}

/// Interleaved little-endian f32 I/Q.
pub fn write_iq<W: Write>(out: &mut W, symbols: &[Complex32]) -> std::io::Result<()> {
    for s in symbols {
        out.write_all(&s.re.to_le_bytes())?;
        out.write_all(&s.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_iq<R: Read>(input: &mut R) -> Result<Vec<Complex32>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<iq stream>", e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::invalid(format!(
            "I/Q stream length {} is not a multiple of 8 bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|b| {
            Complex32::new(
                f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
                f32::from_le_bytes([b[4], b[5], b[6], b[7]]),
            )
        })
        .collect())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_cell(dir: &Path, cell: &Cell) -> Result<()> {
    let stem = cell_stem(&cell.meta);
    let iq_path = dir.join(format!("{stem}.iq"));
    let file = fs::File::create(&iq_path).map_err(|e| Error::io(&iq_path, e))?;
    let mut w = BufWriter::new(file);
    write_iq(&mut w, &cell.symbols)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&iq_path, e))?;
    write_file(&dir.join(format!("{stem}.json")), &serde_json::to_vec_pretty(&cell.meta)?)
}

/// Loads a cell from its binary record and JSON sidecar; also the entry
/// point for externally recorded captures.
pub fn load_cell(iq_path: &Path, json_path: &Path) -> Result<Cell> {
    let text = fs::read(json_path).map_err(|e| Error::io(json_path, e))?;
    let mut meta: CellMeta = serde_json::from_slice(&text)?;
    let mut f = fs::File::open(iq_path).map_err(|e| Error::io(iq_path, e))?;
    let symbols = read_iq(&mut f)?;
    if meta.n_symbols != symbols.len() {
        if meta.n_symbols != 0 {
            return Err(Error::invalid(format!(
                "{} holds {} symbols but its sidecar says {}",
                iq_path.display(),
                symbols.len(),
                meta.n_symbols
            )));
        }
        meta.n_symbols = symbols.len();
    }
    Ok(Cell { meta, symbols })
}

pub fn save_dataset(dir: &Path, ds: &CaptureDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for cell in &ds.cells {
        save_cell(dir, cell)?;
    }
    let manifest = Manifest {
        config: ds.config.clone(),
        pool: ds.pool.clone(),
        cells: ds.cells.iter().map(|c| cell_stem(&c.meta)).collect(),
    };
    write_file(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)
}

pub fn load_dataset(dir: &Path) -> Result<CaptureDataset> {
    let path = dir.join("manifest.json");
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_slice(&text)?;
    let cells = manifest
        .cells
        .iter()
        .map(|stem| {
            load_cell(&dir.join(format!("{stem}.iq")), &dir.join(format!("{stem}.json")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CaptureDataset {
        config: manifest.config,
        pool: manifest.pool,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            k: 2,
            rjp: vec![0.0, 0.5],
            attenuation_db: vec![20.0],
            symbols_per_cell: 6_000,
            samples_per_image: 1_000,
            ..ExperimentConfig::cable()
        }
    }

    #[test]
    fn derived_seeds_separate_coordinates() {
        let a = CellSeeds::derive(1, 0, 0.1, 20.0);
        assert_eq!(a, CellSeeds::derive(1, 0, 0.1, 20.0));
        assert_ne!(a.jammer, CellSeeds::derive(1, 0, 0.1, 40.0).jammer);
        assert_ne!(a.jammer, CellSeeds::derive(1, 1, 0.1, 20.0).jammer);
        assert_ne!(a.jammer, CellSeeds::derive(2, 0, 0.1, 20.0).jammer);
        assert_ne!(a.jammer, a.channel);
        assert_eq!(a.multipath, CellSeeds::derive(1, 0, 0.5, 40.0).multipath);
    }

    #[test]
    fn capture_grid_and_clean_cells() {
        let ds = run_capture(&small()).unwrap();
        assert_eq!(ds.cells.len(), 4);
        for cell in &ds.cells {
            assert_eq!(cell.meta.ber, Some(0.0), "{:?}", cell.meta.failure);
            assert_eq!(cell.symbols.len(), 6_000);
            assert!(cell.meta.usable());
        }
        let clean = ds.cell(0, 0.0, 20.0).unwrap();
        assert!(clean.meta.snr_db.unwrap() >= 20.0);
        assert_eq!(clean.meta.jammer_power_dbm, None);
        let jammed = ds.cell(0, 0.5, 20.0).unwrap();
        assert!((jammed.meta.jammer_power_dbm.unwrap() - (6.5 - 20.0)).abs() < 0.1);
    }

    #[test]
    fn single_cell_reproduces_in_isolation() {
        let cfg = small();
        let ds = run_capture(&cfg).unwrap();
        let ctx = CaptureContext::new(&cfg).unwrap();
        let alone = ctx.run_cell(&ctx.pool.devices[1], 0.5, 20.0).unwrap();
        assert_eq!(&alone, ds.cell(1, 0.5, 20.0).unwrap());
    }

    #[test]
    fn dataset_round_trips_through_disk() {
        let ds = run_capture(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &ds).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
        let stem = cell_stem(&ds.cells[0].meta);
        let bytes = fs::read(dir.path().join(format!("{stem}.iq"))).unwrap();
        assert_eq!(bytes.len(), 8 * 6_000);
        assert_eq!(&bytes[..4], &ds.cells[0].symbols[0].re.to_le_bytes());
    }

    #[test]
    fn truncated_iq_is_rejected() {
        assert!(read_iq(&mut &[0u8; 12][..]).is_err());
        assert_eq!(read_iq(&mut &[0u8; 16][..]).unwrap().len(), 2);
    }
}
