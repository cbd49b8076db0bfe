//! Demonstration records and the CSV/manifest file format.
//!
//! A dataset directory holds one `t,x,y,z` CSV per trajectory plus a
//! `manifest.json` array describing each file:
//!
//! ```json
//! [{"file": "0000.csv", "action": "push", "participant": "p01",
//!   "start": [4, 0], "target": [1, 2], "repetition": 1}]
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::grid::{Action, GridPos};
use super::trajectory::{Trajectory, DEFAULT_DT};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

/// A trajectory plus the metadata describing which movement it demonstrates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub trajectory: Trajectory,
    pub action: Action,
    pub participant: String,
    /// Grid position where the movement starts.
    pub start: GridPos,
    /// Grid position where the movement ends.
    pub target: GridPos,
    /// 1-based repetition index.
    pub repetition: u32,
}

impl DemoRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("start", self.start), ("target", self.target)] {
            if !(p.is_start() || p.is_target()) {
                return Err(Error::invalid(format!("{name} {p} is not a grid position")));
            }
        }
        if self.repetition < 1 {
            return Err(Error::invalid("repetition index must be >= 1"));
        }
        Ok(())
    }

    /// The grid position that varies between movements of one action: the
    /// end for actions leaving `S`, the start for actions returning to it.
    pub fn placement(&self) -> GridPos {
        if self.start.is_start() {
            self.target
        } else {
            self.start
        }
    }

    /// Stable, human-readable identifier.
    pub fn key(&self) -> String {
        format!(
            "{}/{}/{}->{}/r{}",
            self.action, self.participant, self.start, self.target, self.repetition
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    Loaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSet {
    pub records: Vec<DemoRecord>,
    pub provenance: Provenance,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    action: Action,
    participant: String,
    start: GridPos,
    target: GridPos,
    repetition: u32,
}

/// Loads a dataset from a manifest file or a directory containing `manifest.json`.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<DemoSet> {
    let path = path.as_ref();
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    };
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| Error::Schema {
        file: manifest_path.clone(),
        reason: e.to_string(),
    })?;
    let mut records = Vec::with_capacity(entries.len());
    for entry in entries {
        let trajectory = load_trajectory_csv(base.join(&entry.file))?;
        let record = DemoRecord {
            trajectory,
            action: entry.action,
            participant: entry.participant,
            start: entry.start,
            target: entry.target,
            repetition: entry.repetition,
        };
        record.validate().map_err(|e| Error::Schema {
            file: manifest_path.clone(),
            reason: format!("{}: {e}", entry.file),
        })?;
        records.push(record);
    }
    Ok(DemoSet {
        records,
        provenance: Provenance::Loaded,
    })
}

/// Reads one `t,x,y,z` CSV file, converting to the default 0.01 s spacing.
pub fn load_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory_csv(&text, path)
}

fn parse_trajectory_csv(text: &str, path: &Path) -> Result<Trajectory> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        file: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["t", "x", "y", "z"] {
        return Err(parse_err(
            hline + 1,
            format!("expected header 't,x,y,z', got '{header}'"),
        ));
    }
    let mut times = Vec::new();
    let mut positions = Vec::new();
    for (i, line) in lines {
        let values: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(i + 1, format!("bad number: {e}")))?;
        if values.len() != 4 {
            return Err(parse_err(
                i + 1,
                format!("expected 4 fields, got {}", values.len()),
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(parse_err(i + 1, "non-finite value".into()));
        }
        times.push(values[0]);
        positions.push(Vector3::new(values[1], values[2], values[3]));
    }
    if positions.len() < 2 {
        return Err(parse_err(
            hline + 1,
            format!("need at least 2 samples, got {}", positions.len()),
        ));
    }
    let schema_err = |reason: String| Error::Schema {
        file: path.to_path_buf(),
        reason,
    };
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(schema_err("timestamps must increase".into()));
    }
    for (k, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if step <= 0.0 {
            return Err(schema_err(format!(
                "timestamps not monotone at sample {}",
                k + 1
            )));
        }
        if (step - dt).abs() > 0.01 * dt {
            return Err(schema_err(format!(
                "non-uniform sampling at sample {}: step {step} vs mean {dt}",
                k + 1
            )));
        }
    }
    if (dt - DEFAULT_DT).abs() <= 1e-9 {
        return Trajectory::new(positions, DEFAULT_DT);
    }
    let raw = Trajectory::new(positions, dt)?;
    let target_n = ((raw.duration() / DEFAULT_DT).round() as usize + 1).max(2);
    raw.resample(target_n)
}

/// Writes a dataset as CSV files plus `manifest.json` into `dir`.
pub fn save_dataset(set: &DemoSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(set.records.len());
    for (i, r) in set.records.iter().enumerate() {
        let file = format!(
            "{i:05}_{}_{}_{}-{}_{}-{}_r{}.csv",
            r.action,
            r.participant,
            r.start.col,
            r.start.row,
            r.target.col,
            r.target.row,
            r.repetition
        );
        save_trajectory_csv(&r.trajectory, dir.join(&file))?;
        entries.push(ManifestEntry {
            file,
            action: r.action,
            participant: r.participant.clone(),
            start: r.start,
            target: r.target,
            repetition: r.repetition,
        });
    }
    let manifest = dir.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&entries)?;
    fs::write(&manifest, json).map_err(|e| Error::io(&manifest, e))
}

pub fn save_trajectory_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("t,x,y,z\n");
    for (i, p) in traj.positions().iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", i as f64 * traj.dt(), p.x, p.y, p.z);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_rows(n: usize, dt: f64) -> String {
        let mut s = String::from("t,x,y,z\n");
        for i in 0..n {
            let t = i as f64 * dt;
            s.push_str(&format!("{t},{},{},0\n", 0.1 * t, -0.05 * t));
        }
        s
    }

    #[test]
    fn parses_83_rows_at_100hz() {
        let t = parse_trajectory_csv(&csv_rows(83, 0.01), Path::new("a.csv")).unwrap();
        assert_eq!(t.len(), 83);
        assert!((t.duration() - 0.82).abs() < 1e-12);
    }

    #[test]
    fn empty_file_is_parse_error() {
        let e = parse_trajectory_csv("", Path::new("empty.csv")).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
        let e = parse_trajectory_csv("t,x,y,z\n", Path::new("empty.csv")).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
    }

    #[test]
    fn malformed_row_names_line() {
        let text = "t,x,y,z\n0,0,0,0\n0.01,0,abc,0\n";
        match parse_trajectory_csv(text, Path::new("bad.csv")).unwrap_err() {
            Error::Parse { file, line, .. } => {
                assert_eq!(file, PathBuf::from("bad.csv"));
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_time_is_schema_error() {
        let text = "t,x,y,z\n0,0,0,0\n0.02,0,0,0\n0.01,0,0,0\n0.03,0,0,0\n";
        assert!(matches!(
            parse_trajectory_csv(text, Path::new("t.csv")).unwrap_err(),
            Error::Schema { .. }
        ));
    }

    #[test]
    fn other_rates_are_resampled_to_100hz() {
        let t = parse_trajectory_csv(&csv_rows(41, 0.02), Path::new("a.csv")).unwrap();
        assert_eq!(t.len(), 81);
        assert!((t.dt() - 0.01).abs() < 1e-12);
        assert!((t.end().x - 0.08).abs() < 1e-12);
    }
}
