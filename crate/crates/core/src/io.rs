//! File formats: the trajectory CSV, the flow-density samples CSV, the fit
//! document and fitted-curve plot data.
//!
//! Every writer renders the whole file in memory and then replaces the target
//! atomically (temporary sibling + rename).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Header of the trajectory CSV, in column order.
pub const TRAJECTORY_HEADER: [&str; 8] =
    ["id", "time", "px", "py", "pz", "dest_px", "dest_py", "dest_pz"];

/// Relative distance from the sphere tolerated for measured positions.
pub const PHYSICAL_SPHERE_TOLERANCE: f64 = 0.02;

/// Fraction of `dt` by which a timestamp may miss the sampling grid.
pub const GRID_SNAP_TOLERANCE: f64 = 0.2;

/// One row of the trajectory dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub id: u32,
    /// Seconds since the start of the run.
    pub time: f64,
    pub position: Vec3,
    /// Destination of the leg the drone is flying.
    pub destination: Vec3,
}

/// Time stamp of grid step `step`, rounded to the nanosecond so that e.g.
/// step 3 at 0.1 s prints as `0.3`.
pub fn time_of_step(step: u64, dt: f64) -> f64 {
    (step as f64 * dt * 1e9).round() / 1e9
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Renders records as trajectory CSV text.
pub fn format_trajectory(records: &[TrajectoryRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(&TRAJECTORY_HEADER.join(","));
    out.push('\n');
    for r in records {
        let (p, d) = (r.position, r.destination);
        // `{}` on f64 is the shortest string that parses back to the same value
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.id, r.time, p.x, p.y, p.z, d.x, d.y, d.z
        );
    }
    out
}

pub fn write_trajectory(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    write_atomic(path, format_trajectory(records).as_bytes())
}

fn line_location(path: &Path, line: u64) -> String {
    format!("{}:{}", path.display(), line)
}

/// Reads and validates a trajectory CSV.
///
/// Timestamps are snapped to the `expected_dt` grid (within
/// [`GRID_SNAP_TOLERANCE`]`·dt`), positions and destinations must lie within
/// [`PHYSICAL_SPHERE_TOLERANCE`] of the sphere, and each drone's samples must
/// be consecutive grid steps. Raw coordinates are returned unmodified, sorted
/// by `(id, time)`.
pub fn read_trajectory(path: &Path, expected_dt: f64, radius: f64) -> Result<Vec<TrajectoryRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, path, expected_dt, radius)
}

pub fn parse_trajectory(
    text: &str,
    path: &Path,
    expected_dt: f64,
    radius: f64,
) -> Result<Vec<TrajectoryRecord>> {
    if !(expected_dt > 0.0 && expected_dt.is_finite()) {
        return Err(Error::config(format!("dt must be positive, got {expected_dt}")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::integrity(line_location(path, 1), e.to_string()))?
        .clone();
    if header.iter().ne(TRAJECTORY_HEADER.iter().copied()) {
        return Err(Error::integrity(
            line_location(path, 1),
            format!(
                "header mismatch: expected `{}`, found `{}`",
                TRAJECTORY_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    // (line, step, record)
    let mut rows: Vec<(u64, u64, TrajectoryRecord)> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::integrity(line_location(path, line), e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let loc = || line_location(path, line);
        let id: u32 = row[0]
            .trim()
            .parse()
            .map_err(|_| Error::integrity(loc(), format!("invalid drone id `{}`", &row[0])))?;
        let mut vals = [0.0f64; 7];
        for (k, v) in vals.iter_mut().enumerate() {
            let raw = row[k + 1].trim();
            *v = raw.parse().map_err(|_| {
                Error::integrity(loc(), format!("invalid number `{raw}` in column {}", TRAJECTORY_HEADER[k + 1]))
            })?;
            if !v.is_finite() {
                return Err(Error::integrity(loc(), format!("non-finite {}", TRAJECTORY_HEADER[k + 1])));
            }
        }
        let time = vals[0];
        if time < 0.0 {
            return Err(Error::integrity(loc(), format!("negative time {time}")));
        }
        let step_f = (time / expected_dt).round();
        if (time - step_f * expected_dt).abs() > GRID_SNAP_TOLERANCE * expected_dt {
            return Err(Error::integrity(
                loc(),
                format!("time {time} is off the {expected_dt} s sampling grid"),
            ));
        }
        let step = step_f as u64;
        let position = Vec3::new(vals[1], vals[2], vals[3]);
        let destination = Vec3::new(vals[4], vals[5], vals[6]);
        for (what, p) in [("position", position), ("destination", destination)] {
            let dev = (p.norm() - radius).abs() / radius;
            if dev > PHYSICAL_SPHERE_TOLERANCE {
                return Err(Error::integrity(
                    loc(),
                    format!("{what} is {:.2}% off the sphere of radius {radius}", dev * 100.0),
                ));
            }
        }
        let record = TrajectoryRecord { id, time: time_of_step(step, expected_dt), position, destination };
        rows.push((line, step, record));
    }

    rows.sort_by_key(|(line, step, r)| (r.id, *step, *line));
    for pair in rows.windows(2) {
        let (_, s0, a) = &pair[0];
        let (line, s1, b) = &pair[1];
        if a.id != b.id {
            continue;
        }
        if s1 == s0 {
            return Err(Error::integrity(
                line_location(path, *line),
                format!("duplicate sample for drone {} at time {}", b.id, b.time),
            ));
        }
        if s1 - s0 != 1 {
            return Err(Error::integrity(
                line_location(path, *line),
                format!(
                    "drone {}: gap of {} s before time {} (expected {expected_dt} s)",
                    b.id,
                    time_of_step(s1 - s0, expected_dt),
                    b.time
                ),
            ));
        }
    }
    Ok(rows.into_iter().map(|(_, _, r)| r).collect())
}

/// Serialises rows with a header via `csv` + serde.
pub fn format_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::config(format!("csv serialisation failed: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::config(format!("csv serialisation failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    write_atomic(path, format_csv(rows)?.as_bytes())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::integrity(path.display().to_string(), format!("{other:?}")),
    })?;
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::integrity(line_location(path, line), e.to_string())
            })
        })
        .collect()
}

pub fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string(value)
        .map_err(|e| Error::config(format!("toml serialisation failed: {e}")))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::integrity(path.display().to_string(), e.to_string()))
}

/// One row of fitted-curve plot data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    /// `point` for a retained sample, `curve` for a model evaluation.
    pub kind: PlotKind,
    pub k: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Point,
    Curve,
}
