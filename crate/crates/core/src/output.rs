//! CSV and JSON artifact writers.
//!
//! Floats are written with Rust's shortest round-trip formatting so identical
//! runs produce byte-identical files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::PopulationSnapshot;
use crate::experiments::{dominant_type, BatteryRow, SweepCell};
use crate::model::AgentType;

pub const TIMESERIES_HEADER: [&str; 13] = [
    "step",
    "active_conventional",
    "active_innovator",
    "active_radical",
    "latent_conventional",
    "latent_innovator",
    "latent_radical",
    "mean_D",
    "mean_I",
    "mean_M",
    "mean_E",
    "authority_signal",
    "success_fraction",
];

pub const SWEEP_HEADER: [&str; 10] = [
    "p", "F", "phi", "R", "type", "fraction", "mean_D", "mean_I", "mean_M", "mean_E",
];

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn snapshot_fields(s: &PopulationSnapshot) -> impl Iterator<Item = String> + '_ {
    s.type_fractions
        .iter()
        .chain(&s.mean_dime)
        .map(|v| v.to_string())
}

/// One row per `stride`-th snapshot (the first always included).
pub fn write_timeseries_csv<W: Write>(
    w: W,
    snapshots: &[PopulationSnapshot],
    stride: usize,
) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(TIMESERIES_HEADER)?;
    for s in snapshots.iter().step_by(stride.max(1)) {
        out.write_record(
            std::iter::once(s.step.to_string())
                .chain(snapshot_fields(s))
                .chain([
                    s.authority_signal.to_string(),
                    s.success_fraction.to_string(),
                ]),
        )?;
    }
    out.flush()
}

/// Long format: six rows per cell, one per agent type.
pub fn write_sweep_csv<W: Write>(w: W, cells: &[SweepCell]) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for cell in cells {
        let c = &cell.coordinates;
        let s = &cell.steady_state;
        for ty in AgentType::ALL {
            out.write_record(
                [
                    c.failure_prob.to_string(),
                    c.individual_threshold.to_string(),
                    c.collective_threshold.to_string(),
                    c.rounds.to_string(),
                    ty.name().to_string(),
                    s.fraction(ty).to_string(),
                ]
                .into_iter()
                .chain(s.mean_dime.iter().map(|v| v.to_string())),
            )?;
        }
    }
    out.flush()
}

/// Initial-condition comparison, one row per variant.
pub fn write_battery_csv<W: Write>(w: W, rows: &[BatteryRow]) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(
        std::iter::once("initial_condition")
            .chain(AgentType::ALL.iter().map(|ty| ty.name()))
            .chain(["mean_D", "mean_I", "mean_M", "mean_E", "dominant_type"]),
    )?;
    for row in rows {
        out.write_record(
            std::iter::once(row.initial_condition.name().to_string())
                .chain(snapshot_fields(&row.steady_state))
                .chain(std::iter::once(row.dominant_type.name().to_string())),
        )?;
    }
    out.flush()
}

/// Steady-state composition with named fields, as stored in summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateRecord {
    pub active_conventional: f64,
    pub active_innovator: f64,
    pub active_radical: f64,
    pub latent_conventional: f64,
    pub latent_innovator: f64,
    pub latent_radical: f64,
    #[serde(rename = "mean_D")]
    pub mean_d: f64,
    #[serde(rename = "mean_I")]
    pub mean_i: f64,
    #[serde(rename = "mean_M")]
    pub mean_m: f64,
    #[serde(rename = "mean_E")]
    pub mean_e: f64,
    pub success_fraction: f64,
    pub dominant_type: AgentType,
}

impl From<&PopulationSnapshot> for SteadyStateRecord {
    fn from(s: &PopulationSnapshot) -> Self {
        let f = s.type_fractions;
        let [mean_d, mean_i, mean_m, mean_e] = s.mean_dime;
        SteadyStateRecord {
            active_conventional: f[0],
            active_innovator: f[1],
            active_radical: f[2],
            latent_conventional: f[3],
            latent_innovator: f[4],
            latent_radical: f[5],
            mean_d,
            mean_i,
            mean_m,
            mean_e,
            success_fraction: s.success_fraction,
            dominant_type: dominant_type(&f).0,
        }
    }
}

impl SteadyStateRecord {
    pub fn type_fractions(&self) -> [f64; 6] {
        [
            self.active_conventional,
            self.active_innovator,
            self.active_radical,
            self.latent_conventional,
            self.latent_innovator,
            self.latent_radical,
        ]
    }
}

/// Plain-text table of a steady state for terminal output.
pub fn steady_state_table(s: &PopulationSnapshot) -> String {
    let mut out = String::new();
    let (dominant, _) = dominant_type(&s.type_fractions);
    for ty in AgentType::ALL {
        let marker = if ty == dominant { "  *" } else { "" };
        out.push_str(&format!(
            "{:<22}{:>8.4}{marker}\n",
            ty.name(),
            s.fraction(ty)
        ));
    }
    out.push_str(&format!(
        "mean D/I/M/E          {:.2} / {:.2} / {:.2} / {:.2}\n",
        s.mean_dime[0], s.mean_dime[1], s.mean_dime[2], s.mean_dime[3]
    ));
    out
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = temp_sibling(path);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Like [`write_atomic`], with the content produced by `fill`.
pub fn write_atomic_with<F>(path: &Path, fill: F) -> io::Result<()>
where
    F: FnOnce(&mut io::BufWriter<&mut fs::File>) -> io::Result<()>,
{
    let tmp = temp_sibling(path);
    {
        let mut f = fs::File::create(&tmp)?;
        let mut w = io::BufWriter::new(&mut f);
        fill(&mut w)?;
        w.flush()?;
        drop(w);
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_json_atomic<T: Serialize + ?Sized>(path: &Path, value: &T) -> crate::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::CellCoordinates;

    fn snap(step: usize) -> PopulationSnapshot {
        PopulationSnapshot {
            step,
            type_fractions: [0.5, 0.25, 0.0, 0.125, 0.125, 0.0],
            mean_dime: [10.0, 20.5, 30.0, 40.0],
            authority_signal: 1.0,
            success_fraction: 0.1,
        }
    }

    #[test]
    fn timeseries_layout() {
        let mut buf = Vec::new();
        write_timeseries_csv(&mut buf, &[snap(1), snap(2), snap(3)], 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 13);
        assert_eq!(lines[1], "1,0.5,0.25,0,0.125,0.125,0,10,20.5,30,40,1,0.1");
        assert!(lines[2].starts_with("3,"));
    }

    #[test]
    fn sweep_long_format() {
        let cell = SweepCell {
            coordinates: CellCoordinates {
                failure_prob: 0.1,
                individual_threshold: 0.3,
                collective_threshold: 0.8,
                rounds: 10,
            },
            steady_state: snap(5),
            replicate_steady_states: vec![snap(5)],
            dominant_type: AgentType::ActiveConventional,
            dominant_fraction: 0.5,
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[cell]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER.join(","));
        assert_eq!(lines.len(), 7);
        assert_eq!(
            lines[1],
            "0.1,0.3,0.8,10,active_conventional,0.5,10,20.5,30,40"
        );
        assert!(lines[6].contains(",latent_radical,0,"));
    }

    #[test]
    fn record_round_trip() {
        let rec = SteadyStateRecord::from(&snap(1));
        assert_eq!(rec.dominant_type, AgentType::ActiveConventional);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"mean_D\":10.0"));
        let back: SteadyStateRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.type_fractions(), snap(1).type_fractions);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("dimesim-out-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic_with(&p, |w| w.write_all(b"two")).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert!(!temp_sibling(&p).exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
