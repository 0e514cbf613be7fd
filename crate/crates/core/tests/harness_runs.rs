//! End-to-end harness runs on a reduced cable sweep.

use std::sync::OnceLock;

use rffjam::harness::anonymity::{run_k_anonymity_mode, KMode};
use rffjam::harness::{run_capture, run_k_anonymity, run_t_anonymity, CaptureDataset, ExperimentConfig, Scenario};

const RJP: [f64; 9] = [0.0, 0.03, 0.05, 0.07, 0.1, 0.2, 0.3, 0.4, 0.5];

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_scenario(Scenario::Cable);
    cfg.rjp = RJP.to_vec();
    cfg.attenuation_db = vec![20.0];
    cfg.symbols_per_cell = 62_000;
    cfg.samples_per_image = 500;
    cfg
}

fn dataset() -> &'static CaptureDataset {
    static DS: OnceLock<CaptureDataset> = OnceLock::new();
    DS.get_or_init(|| run_capture(&small_config()).unwrap())
}

#[test]
fn grid_has_every_cell() {
    let ds = dataset();
    assert_eq!(ds.cells.len(), 5 * RJP.len());
    for d in ds.device_ids() {
        for &r in &RJP {
            assert!(ds.cell(d, r, 20.0).is_some(), "missing d{d} rjp {r}");
        }
        let c = ds.cell(d, 0.0, 20.0).unwrap();
        assert_eq!(c.meta.ber, Some(0.0));
        assert!(c.meta.snr_db.unwrap() >= 20.0, "{:?}", c.meta.snr_db);
    }
}

#[test]
fn classifier_fits_its_own_training_data() {
    let ds = dataset();
    let r = run_k_anonymity_mode(ds, &ds.config, KMode::Sanity).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.rows[0].accuracy >= 0.95, "{}", r.rows[0].accuracy);
}

#[test]
fn shuffled_labels_fall_to_chance() {
    let ds = dataset();
    let r = run_k_anonymity_mode(ds, &ds.config, KMode::ShuffledLabels { seed: 99 }).unwrap();
    let row = &r.rows[0];
    let p = 1.0 / r.k as f64;
    let sigma = (p * (1.0 - p) / row.n_test as f64).sqrt();
    assert!((row.accuracy - p).abs() <= 3.0 * sigma, "{} vs {p} +- {}", row.accuracy, 3.0 * sigma);
}

#[test]
fn jamming_lowers_identification() {
    let ds = dataset();
    let r = run_k_anonymity(ds, &ds.config).unwrap();
    assert!(r.flagged.is_empty(), "{:?}", r.flagged);
    let first = r.rows.first().unwrap();
    let last = r.rows.last().unwrap();
    assert!(first.accuracy >= 0.8, "{}", first.accuracy);
    assert!(last.accuracy < first.accuracy - 0.3, "{} -> {}", first.accuracy, last.accuracy);
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let m = (n - 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
    let var: f64 = ra.iter().map(|x| (x - m) * (x - m)).sum();
    cov / var
}

#[test]
fn detection_tracks_jamming() {
    let ds = dataset();
    let t = run_t_anonymity(ds, &ds.config).unwrap();
    assert_eq!(t.rows.len(), 5 * RJP.len());
    let controls: Vec<f64> = t.rows.iter().filter(|r| r.rjp == 0.0).map(|r| r.auc).collect();
    let control = controls.iter().sum::<f64>() / controls.len() as f64;
    assert!((control - 0.5).abs() <= 0.1, "control auc {control} ({controls:?})");
    for d in ds.device_ids() {
        let auc = |rjp: f64| t.rows.iter().find(|r| r.device_id == d && r.rjp == rjp).unwrap().auc;
        assert!(auc(0.5) > auc(0.03), "device {d}: {} vs {}", auc(0.5), auc(0.03));
    }
    let jammed: Vec<_> = t.rows.iter().filter(|r| r.rjp > 0.0).collect();
    let rho = spearman(
        &jammed.iter().map(|r| r.auc).collect::<Vec<_>>(),
        &jammed.iter().map(|r| r.snr_db).collect::<Vec<_>>(),
    );
    assert!(rho < 0.0, "rank correlation {rho}");
}
