//! Collision-avoidance decisions for one drone at one time step.
//!
//! All functions read a frozen snapshot of positions indexed by drone id.
//! `None` entries are drones that are no longer flying.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, GeometryError, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlLaw {
    StopAndYield,
    CircularDetour,
}

impl ControlLaw {
    pub fn short_name(self) -> &'static str {
        match self {
            ControlLaw::StopAndYield => "stop",
            ControlLaw::CircularDetour => "detour",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        match s {
            "stop" => Some(ControlLaw::StopAndYield),
            "detour" => Some(ControlLaw::CircularDetour),
            _ => None,
        }
    }
}

/// Which drone wins a stop-and-yield conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    /// Smaller id has right of way.
    #[default]
    LowerIndex,
    HigherIndex,
}

impl Priority {
    /// True when drone `a` has strictly higher priority than drone `b`.
    pub fn outranks(self, a: usize, b: usize) -> bool {
        match self {
            Priority::LowerIndex => a < b,
            Priority::HigherIndex => a > b,
        }
    }
}

pub const DEFAULT_CANDIDATES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub law: ControlLaw,
    /// Safe spacing ĥ (m); a chord distance at or below it is a conflict.
    pub safe_spacing: f64,
    /// Number of sampled detour angles.
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    /// Neighbours within this chord distance constrain a detour. Defaults to `safe_spacing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensing_radius: Option<f64>,
    #[serde(default)]
    pub priority: Priority,
}

fn default_candidates() -> usize {
    DEFAULT_CANDIDATES
}

impl ControlConfig {
    pub fn new(law: ControlLaw, safe_spacing: f64) -> Self {
        Self {
            law,
            safe_spacing,
            n_candidates: DEFAULT_CANDIDATES,
            sensing_radius: None,
            priority: Priority::LowerIndex,
        }
    }

    pub fn sensing_radius(&self) -> f64 {
        self.sensing_radius.unwrap_or(self.safe_spacing)
    }

    pub fn validate(&self, radius: f64) -> Result<()> {
        if !(self.safe_spacing.is_finite() && self.safe_spacing > 0.0) {
            return Err(Error::config(format!(
                "safe spacing must be positive, got {}",
                self.safe_spacing
            )));
        }
        if self.safe_spacing >= 2.0 * radius {
            return Err(Error::config("safe spacing must be shorter than the sphere diameter"));
        }
        if self.n_candidates < 4 {
            return Err(Error::config("at least 4 detour candidates are required"));
        }
        let sensing = self.sensing_radius();
        if !(sensing >= self.safe_spacing && sensing < 2.0 * radius) {
            return Err(Error::config(format!(
                "sensing radius {sensing} must lie in [safe spacing, sphere diameter)"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlDecision {
    /// Move along this unit tangent direction.
    Proceed(Vec3),
    /// Stay in place for this step.
    Halt,
}

/// Indices of flying drones within chord distance `threshold` of drone `i` (inclusive).
pub fn detect_conflicts(i: usize, positions: &[Option<Vec3>], threshold: f64) -> Vec<usize> {
    let Some(p) = positions.get(i).copied().flatten() else {
        return Vec::new();
    };
    positions
        .iter()
        .enumerate()
        .filter_map(|(j, q)| {
            let q = (*q)?;
            (j != i && p.distance(q) <= threshold).then_some(j)
        })
        .collect()
}

/// Whether drone `i` must hold position under stop-and-yield.
pub fn must_yield(i: usize, conflicts: &[usize], priority: Priority) -> bool {
    conflicts.iter().any(|&j| priority.outranks(j, i))
}

/// Stop-and-yield: halt if any conflicting drone outranks `i`, else fly the nominal heading.
pub fn stop_yield(
    i: usize,
    conflicts: &[usize],
    position: Vec3,
    destination: Vec3,
    priority: Priority,
) -> std::result::Result<ControlDecision, GeometryError> {
    if must_yield(i, conflicts, priority) {
        return Ok(ControlDecision::Halt);
    }
    geom::tangent_dir(position, destination).map(ControlDecision::Proceed)
}

/// Candidate rotation angles `2πs / (n + 1)` for `s = 1..=n`, all inside `(0, 2π)`.
pub fn candidate_angles(n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |s| TAU * s as f64 / (n as f64 + 1.0))
}

/// Unit tangent directions from `p` toward each listed neighbour. Coincident
/// neighbours are skipped: any motion leaves them.
pub fn neighbor_directions(
    p: Vec3,
    neighbors: &[usize],
    positions: &[Option<Vec3>],
) -> std::result::Result<Vec<Vec3>, GeometryError> {
    let mut toward = Vec::with_capacity(neighbors.len());
    for &j in neighbors {
        let Some(q) = positions[j] else { continue };
        match geom::tangent_dir(p, q) {
            Ok(d) => toward.push(d),
            Err(GeometryError::Coincident) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(toward)
}

/// Non-approach test: `dir` has no positive component toward any neighbour.
pub fn keeps_clear(dir: Vec3, toward: &[Vec3]) -> bool {
    toward.iter().all(|d| dir.dot(*d) <= 0.0)
}

/// Circular detour: the sampled rotation of the nominal heading that is closest
/// to it while not closing on any listed neighbour. Halts if none qualifies.
pub fn circular_detour(
    i: usize,
    neighbors: &[usize],
    positions: &[Option<Vec3>],
    destination: Vec3,
    n_candidates: usize,
) -> std::result::Result<ControlDecision, GeometryError> {
    let p = positions[i].ok_or(GeometryError::Coincident)?;
    let nominal = geom::tangent_dir(p, destination)?;
    let axis = p / p.norm();
    let toward = neighbor_directions(p, neighbors, positions)?;

    let mut best: Option<(f64, Vec3)> = None;
    for psi in candidate_angles(n_candidates) {
        let rotated = geom::rodrigues_rotate(nominal, axis, psi)?;
        let Some(dir) = rotated.normalized() else { continue };
        if !keeps_clear(dir, &toward) {
            continue;
        }
        let alignment = dir.dot(nominal);
        if best.is_none_or(|(a, _)| alignment > a) {
            best = Some((alignment, dir));
        }
    }
    Ok(match best {
        Some((_, dir)) => ControlDecision::Proceed(dir),
        None => ControlDecision::Halt,
    })
}
