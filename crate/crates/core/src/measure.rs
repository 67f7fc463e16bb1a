//! Edie flow-density measurement over an equal-angle partition of the sphere.
//!
//! Each cell's density is the drone-time spent in it and its flow the
//! effective distance travelled in it, both divided by cell area times the
//! measurement window.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::FdPoint;
use crate::geom::{self, Vec3};
use crate::io::TrajectoryRecord;

/// Tolerance (s) for comparing time stamps that have already been grid-snapped.
const TIME_EPS: f64 = 1e-6;

/// How cell areas enter the density and flow denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaMode {
    /// True area of each cell.
    #[default]
    Exact,
    /// Every cell gets the mean area 4πR²/M.
    Mean,
}

/// Cell index for a point: θ-bin major, φ-bin minor.
pub fn cell_index(p: Vec3, m_bar: usize) -> usize {
    let (tb, pb) = cell_bins(p, m_bar);
    tb * m_bar + pb
}

/// `(theta_bin, phi_bin)` of a point.
pub fn cell_bins(p: Vec3, m_bar: usize) -> (usize, usize) {
    let c = geom::to_spherical(p);
    let m = m_bar as f64;
    let bin = |x: f64| (x.floor().max(0.0) as usize).min(m_bar - 1);
    (bin(c.theta / PI * m), bin(c.phi / TAU * m))
}

/// Area of any cell in polar band `theta_bin`.
pub fn cell_area(theta_bin: usize, m_bar: usize, radius: f64) -> f64 {
    let m = m_bar as f64;
    let lo = theta_bin as f64 * PI / m;
    let hi = (theta_bin + 1) as f64 * PI / m;
    radius * radius * (lo.cos() - hi.cos()) * (TAU / m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    pub m_bar: usize,
    pub radius: f64,
    areas: Vec<f64>,
}

impl RegionPartition {
    pub fn new(m_bar: usize, radius: f64, mode: AreaMode) -> Result<Self> {
        if m_bar == 0 {
            return Err(Error::config("m_bar must be at least 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config(format!("radius must be positive, got {radius}")));
        }
        let n = m_bar * m_bar;
        let areas = match mode {
            AreaMode::Exact => (0..n).map(|c| cell_area(c / m_bar, m_bar, radius)).collect(),
            AreaMode::Mean => vec![4.0 * PI * radius * radius / n as f64; n],
        };
        Ok(Self { m_bar, radius, areas })
    }

    pub fn n_cells(&self) -> usize {
        self.areas.len()
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn area(&self, cell: usize) -> f64 {
        self.areas[cell]
    }

    pub fn cell_of(&self, p: Vec3) -> usize {
        cell_index(p, self.m_bar)
    }
}

/// Displacement `p_t → p_t1` projected on the nominal heading toward `dest`.
///
/// Zero when the heading is undefined (drone at, or opposite to, its destination).
pub fn effective_step(p_t: Vec3, p_t1: Vec3, dest: Vec3) -> f64 {
    match geom::tangent_dir(p_t, dest) {
        Ok(d) => (p_t1 - p_t).dot(d),
        Err(_) => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    /// Angular bins per dimension; the sphere gets `m_bar²` cells.
    pub m_bar: usize,
    pub radius: f64,
    /// Sampling interval Δt (s).
    pub dt: f64,
    /// Seconds dropped from the start of the run.
    pub trim_start: f64,
    /// Seconds dropped from the end of the run.
    #[serde(default)]
    pub trim_end: f64,
    #[serde(default)]
    pub area_mode: AreaMode,
}

impl MeasureConfig {
    pub fn new(m_bar: usize, dt: f64, trim_start: f64) -> Self {
        Self { m_bar, radius: 1.0, dt, trim_start, trim_end: 0.0, area_mode: AreaMode::Exact }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_bar == 0 {
            return Err(Error::config("m_bar must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.trim_start >= 0.0 && self.trim_end >= 0.0) {
            return Err(Error::config("trim lengths must be non-negative"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::config(format!("radius must be positive, got {}", self.radius)));
        }
        Ok(())
    }
}

/// Edie density and flow of one cell over the measurement window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowDensitySample {
    pub region_id: usize,
    pub theta_bin: usize,
    pub phi_bin: usize,
    pub area_m2: f64,
    /// Density (drones/m²).
    pub k: f64,
    /// Flow (drones/(m·s)).
    pub q: f64,
}

impl FlowDensitySample {
    pub fn point(&self) -> FdPoint {
        FdPoint { k: self.k, q: self.q }
    }
}

/// A sample row of the pooled samples CSV, tagged with the run it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub region_id: usize,
    pub theta_bin: usize,
    pub phi_bin: usize,
    pub area_m2: f64,
    pub k: f64,
    pub q: f64,
    pub run: String,
}

impl SampleRecord {
    pub fn new(s: &FlowDensitySample, run: impl Into<String>) -> Self {
        Self {
            region_id: s.region_id,
            theta_bin: s.theta_bin,
            phi_bin: s.phi_bin,
            area_m2: s.area_m2,
            k: s.k,
            q: s.q,
            run: run.into(),
        }
    }

    pub fn point(&self) -> FdPoint {
        FdPoint { k: self.k, q: self.q }
    }
}

/// Per-cell totals behind a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub samples: Vec<FlowDensitySample>,
    /// Window length T in steps, shared by every cell.
    pub window_steps: u64,
    /// Drone-steps credited to each cell; cell time is this times Δt.
    pub cell_steps: Vec<u64>,
    /// Effective distance credited to each cell (m).
    pub cell_distance: Vec<f64>,
    /// Start and end (s) of the window.
    pub window: (f64, f64),
}

impl Measurement {
    pub fn total_steps(&self) -> u64 {
        self.cell_steps.iter().sum()
    }
}

/// Accumulates Edie samples from records sorted by `(id, time)`.
///
/// Each consecutive pair of a drone's samples inside the window credits Δt and
/// the effective step to the cell holding the earlier position. Positions and
/// destinations are projected onto the sphere first.
pub fn accumulate(records: &[TrajectoryRecord], cfg: &MeasureConfig) -> Result<Measurement> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::integrity("records", "no trajectory records"));
    }
    let dt = cfg.dt;
    let partition = RegionPartition::new(cfg.m_bar, cfg.radius, cfg.area_mode)?;

    let t_min = records.iter().map(|r| r.time).fold(f64::INFINITY, f64::min);
    let t_max = records.iter().map(|r| r.time).fold(f64::NEG_INFINITY, f64::max);
    let start = t_min + cfg.trim_start;
    let end = t_max - cfg.trim_end;
    let window_steps = ((end - start) / dt).round();
    if !(window_steps >= 1.0) {
        return Err(Error::integrity(
            "records",
            format!("measurement window [{start}, {end}] s is shorter than one step"),
        ));
    }
    let window_steps = window_steps as u64;

    let mut seen = HashSet::new();
    let mut cell_steps = vec![0u64; partition.n_cells()];
    let mut cell_distance = vec![0.0f64; partition.n_cells()];
    let in_window = |t: f64| t >= start - TIME_EPS && t <= end + TIME_EPS;
    let project = |p: Vec3| p.project_to_sphere(cfg.radius).unwrap_or(p);

    for (row, pair) in records.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if a.id != b.id {
            seen.insert(a.id);
            if seen.contains(&b.id) {
                return Err(Error::integrity(
                    format!("row {}", row + 1),
                    format!("records of drone {} are not contiguous", b.id),
                ));
            }
            continue;
        }
        let gap = b.time - a.time;
        if gap <= TIME_EPS {
            return Err(Error::integrity(
                format!("row {}", row + 1),
                format!("drone {}: time {} does not follow {}", b.id, b.time, a.time),
            ));
        }
        if (gap - dt).abs() > TIME_EPS.max(1e-6 * dt) {
            return Err(Error::integrity(
                format!("row {}", row + 1),
                format!("drone {}: gap {gap} s at time {} (expected {dt} s)", b.id, b.time),
            ));
        }
        if !(in_window(a.time) && in_window(b.time)) {
            continue;
        }
        let p0 = project(a.position);
        let p1 = project(b.position);
        let dest = project(a.destination);
        let cell = partition.cell_of(p0);
        cell_steps[cell] += 1;
        cell_distance[cell] += effective_step(p0, p1, dest);
    }

    let denom_time = window_steps as f64;
    let denom = denom_time * dt;
    let samples = (0..partition.n_cells())
        .map(|c| {
            let area = partition.area(c);
            FlowDensitySample {
                region_id: c,
                theta_bin: c / cfg.m_bar,
                phi_bin: c % cfg.m_bar,
                area_m2: area,
                // Σt / (|a| Δt T) with Σt = steps·Δt
                k: cell_steps[c] as f64 / (area * denom_time),
                q: cell_distance[c] / (area * denom),
            }
        })
        .collect();
    Ok(Measurement { samples, window_steps, cell_steps, cell_distance, window: (start, end) })
}
