//! Result tables and their CSV/JSON serialization.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::harness::anonymity::{FlaggedCell, KAnonymityResult, TAnonymityResult};
use crate::harness::config::Scenario;
use crate::harness::stats::SignalStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub seed: u64,
    pub k_anonymity: Option<KAnonymityResult>,
    pub t_anonymity: Option<TAnonymityResult>,
    pub stats: Option<SignalStats>,
    /// Every cell that failed or decoded with errors.
    pub flagged: Vec<FlaggedCell>,
}

/// Wall-clock timings; reported to the caller, never written with the
/// results so that reruns stay byte-identical.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuntimeStats {
    pub capture_s: f64,
    pub k_anonymity_s: f64,
    pub t_anonymity_s: f64,
    pub stats_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    /// Written empty in CSV and `null` in JSON.
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

/// `x` rounded to nine significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Nine significant digits, shortest decimal form; infinities as `inf`
/// and `-inf`, NaN as `nan`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        let r = round_sig9(x);
        // avoid "-0"
        if r == 0.0 { "0".into() } else { format!("{r}") }
    }
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Float(x) => format_float(*x),
                    Cell::Missing => String::new(),
                })
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// An array of row objects keyed by column name. Infinities become the
    /// strings `"inf"`/`"-inf"`, NaN and missing values become `null`.
    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (name, c) in self.columns.iter().zip(row) {
                    let v = match c {
                        Cell::Int(i) => Value::from(*i),
                        Cell::Float(x) if x.is_infinite() => Value::String(format_float(*x)),
                        Cell::Float(x) => Number::from_f64(round_sig9(*x)).map_or(Value::Null, Value::Number),
                        Cell::Missing => Value::Null,
                    };
                    obj.insert((*name).to_string(), v);
                }
                Value::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("json value serializes");
        s.push('\n');
        s
    }
}

pub const FIGURE_NAMES: [&str; 8] = [
    "fig5_amplitude_cdf",
    "fig6_phase_cdf",
    "fig7_snr_pdf",
    "fig8_snr_vs_rjp",
    "fig10_accuracy_vs_rjp",
    "fig11_roc",
    "fig12_auc_vs_snr",
    "fig13_radio_roc",
];

const ROC_COLUMNS: &[&str] = &["device", "rjp", "attenuation_db", "auc", "fpr", "tpr", "threshold"];

fn roc_table(name: &'static str, t: Option<&TAnonymityResult>) -> Table {
    let mut rows = Vec::new();
    for r in t.map(|t| t.rows.as_slice()).unwrap_or_default() {
        for (&(fpr, tpr), &th) in r.roc.points.iter().zip(&r.roc.thresholds) {
            rows.push(vec![
                r.device_id.into(),
                r.rjp.into(),
                r.attenuation_db.into(),
                r.auc.into(),
                fpr.into(),
                tpr.into(),
                th.into(),
            ]);
        }
    }
    Table {
        name,
        columns: ROC_COLUMNS,
        rows,
    }
}

impl ExperimentResult {
    /// The figure tables, always all eight; a table whose data this run did
    /// not produce is written with its header only.
    pub fn tables(&self) -> Vec<Table> {
        let points = self.stats.as_ref().map(|s| s.points.as_slice()).unwrap_or_default();
        let dist = |name, columns, pick: fn(&crate::harness::stats::PointStats) -> &[(f64, f64)]| {
            let mut rows = Vec::new();
            for p in points {
                for &(x, y) in pick(p) {
                    rows.push(vec![p.rjp.into(), p.attenuation_db.into(), x.into(), y.into()]);
                }
            }
            Table { name, columns, rows }
        };
        let fig5 = dist("fig5_amplitude_cdf", &["rjp", "attenuation_db", "amplitude", "cdf"], |p| &p.amplitude.cdf);
        let fig6 = dist("fig6_phase_cdf", &["rjp", "attenuation_db", "phase_rad", "cdf"], |p| &p.phase.cdf);
        let fig7 = dist("fig7_snr_pdf", &["rjp", "attenuation_db", "snr_db", "pdf"], |p| &p.snr.pdf);

        let fig8 = Table {
            name: "fig8_snr_vs_rjp",
            columns: &["device", "rjp", "attenuation_db", "snr_db", "ber", "jam_to_signal_db", "ks_amplitude", "ks_phase"],
            rows: self
                .stats
                .as_ref()
                .map(|s| s.cells.as_slice())
                .unwrap_or_default()
                .iter()
                .map(|c| {
                    vec![
                        c.device_id.into(),
                        c.rjp.into(),
                        c.attenuation_db.into(),
                        c.snr_db.into(),
                        c.ber.into(),
                        c.jam_to_signal_db.into(),
                        c.ks_amplitude.into(),
                        c.ks_phase.into(),
                    ]
                })
                .collect(),
        };

        let fig10 = Table {
            name: "fig10_accuracy_vs_rjp",
            columns: &["rjp", "attenuation_db", "accuracy", "ber", "mean_snr_db"],
            rows: self
                .k_anonymity
                .as_ref()
                .map(|k| k.rows.as_slice())
                .unwrap_or_default()
                .iter()
                .map(|r| {
                    vec![
                        r.rjp.into(),
                        r.attenuation_db.into(),
                        r.accuracy.into(),
                        r.mean_ber.into(),
                        r.mean_snr_db.into(),
                    ]
                })
                .collect(),
        };

        let t = self.t_anonymity.as_ref();
        let (fig11, fig13) = match self.scenario {
            Scenario::Cable => (roc_table("fig11_roc", t), roc_table("fig13_radio_roc", None)),
            Scenario::Radio => (roc_table("fig11_roc", None), roc_table("fig13_radio_roc", t)),
        };
        let fig12 = Table {
            name: "fig12_auc_vs_snr",
            columns: &["device", "rjp", "attenuation_db", "snr_db", "auc"],
            rows: t
                .map(|t| t.rows.as_slice())
                .unwrap_or_default()
                .iter()
                .map(|r| {
                    vec![
                        r.device_id.into(),
                        r.rjp.into(),
                        r.attenuation_db.into(),
                        r.snr_db.into(),
                        r.auc.into(),
                    ]
                })
                .collect(),
        };
        vec![fig5, fig6, fig7, fig8, fig10, fig11, fig12, fig13]
    }

    /// Pooled KS drift per sweep point, and the flagged-cell report.
    pub fn extra_tables(&self) -> Vec<Table> {
        let ks = Table {
            name: "ks_vs_rjp",
            columns: &["rjp", "attenuation_db", "ks_amplitude", "ks_phase"],
            rows: self
                .stats
                .as_ref()
                .map(|s| s.points.as_slice())
                .unwrap_or_default()
                .iter()
                .map(|p| vec![p.rjp.into(), p.attenuation_db.into(), p.ks_amplitude.into(), p.ks_phase.into()])
                .collect(),
        };
        let flagged = Table {
            name: "flagged_cells",
            columns: &["device", "rjp", "attenuation_db", "ber"],
            rows: self
                .flagged
                .iter()
                .map(|f| vec![f.device_id.into(), f.rjp.into(), f.attenuation_db.into(), f.ber.into()])
                .collect(),
        };
        vec![ks, flagged]
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes every figure table (and the extra tables) in `format` under
/// `dir`; returns the paths written.
pub fn emit_results(result: &ExperimentResult, format: Format, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for table in result.tables().iter().chain(&result.extra_tables()) {
        let path = dir.join(format!("{}.{}", table.name, format.ext()));
        let body = match format {
            Format::Csv => table.to_csv(),
            Format::Json => table.to_json(),
        };
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_float(0.123456789123), "0.123456789");
        assert_eq!(format_float(123456.7891), "123456.789");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(2.5e-12), "0.0000000000025");
    }

    #[test]
    fn fig10_header_is_fixed() {
        let r = ExperimentResult {
            scenario: Scenario::Cable,
            seed: 0,
            k_anonymity: None,
            t_anonymity: None,
            stats: None,
            flagged: vec![],
        };
        let tables = r.tables();
        assert_eq!(tables.len(), 8);
        let names: Vec<_> = tables.iter().map(|t| t.name).collect();
        assert_eq!(names, FIGURE_NAMES);
        assert_eq!(tables[4].to_csv(), "rjp,attenuation_db,accuracy,ber,mean_snr_db\n");
    }

    #[test]
    fn json_rows_round_trip() {
        let t = Table {
            name: "x",
            columns: &["a", "b", "c"],
            rows: vec![
                vec![Cell::Int(3), Cell::Float(0.1 + 0.2), Cell::Missing],
                vec![Cell::Int(-1), Cell::Float(f64::INFINITY), Cell::Float(1e-300)],
            ],
        };
        let v: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v[0]["a"], 3);
        assert_eq!(v[0]["b"].as_f64().unwrap(), round_sig9(0.1 + 0.2));
        assert!(v[0]["c"].is_null());
        assert_eq!(v[1]["b"], "inf");
        assert_eq!(v[1]["c"].as_f64().unwrap(), 1e-300);
    }
}
