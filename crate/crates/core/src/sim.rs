//! Time-stepped drone traffic on the sphere.
//!
//! Every step freezes a snapshot of positions, lets each flying drone decide
//! from that snapshot, then commits all moves at once, so the order in which
//! drones are evaluated cannot change the outcome.

use serde::{Deserialize, Serialize};

use crate::control::{self, ControlConfig, ControlDecision, ControlLaw};
use crate::error::{Error, Result};
use crate::geom::{self, GeometryError, Vec3};
use crate::io::{time_of_step, TrajectoryRecord};
use crate::scenario::{self, FlightPlan, ScenarioConfig};

/// A remaining arc within this relative margin of one step counts as reachable.
const ARRIVAL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Time step Δt (s).
    pub dt: f64,
    /// Number of steps T; the run covers times `0..=T`.
    pub n_steps: usize,
    /// Cruise speed v̄ (m/s).
    pub cruise_speed: f64,
    pub scenario: ScenarioConfig,
    pub control: ControlConfig,
}

impl SimConfig {
    pub fn radius(&self) -> f64 {
        self.scenario.radius
    }

    /// Arc flown per unobstructed step, v̄·Δt.
    pub fn step_arc(&self) -> f64 {
        self.cruise_speed * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(Error::config("at least one step is required"));
        }
        if !(self.cruise_speed > 0.0 && self.cruise_speed.is_finite()) {
            return Err(Error::config(format!(
                "cruise speed must be positive, got {}",
                self.cruise_speed
            )));
        }
        self.scenario.validate()?;
        if self.step_arc() >= std::f64::consts::PI * self.radius() {
            return Err(Error::config("v̄·Δt must be shorter than half a great circle"));
        }
        self.control.validate(self.radius())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneState {
    pub id: u32,
    pub position: Vec3,
    pub plan: FlightPlan,
    /// Zero-based index of the leg being flown.
    pub leg: usize,
    /// Step at which the final destination was reached.
    pub finished_at: Option<usize>,
}

impl DroneState {
    pub fn new(plan: FlightPlan) -> Self {
        Self { id: plan.drone_id, position: plan.origin(), plan, leg: 0, finished_at: None }
    }

    pub fn finished(&self) -> bool {
        self.finished_at.is_some()
    }

    /// Destination of the current leg (the final destination once finished).
    pub fn destination(&self) -> Vec3 {
        let leg = self.leg.min(self.plan.n_legs() - 1);
        self.plan.leg(leg).1
    }
}

/// What a drone does during one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// Fly the leg's great circle toward its destination.
    Nominal,
    /// Fly along this tangent direction instead.
    Detour(Vec3),
    Halt,
}

/// Control decision for drone `i` from a start-of-step snapshot; `arc` is the
/// step length v̄Δt.
///
/// Under circular detour a destination within one step is flown to directly
/// when that heading does not close on any neighbour, so detours never
/// overshoot it.
pub fn decide(
    i: usize,
    snapshot: &[Option<Vec3>],
    destination: Vec3,
    control: &ControlConfig,
    arc: f64,
) -> std::result::Result<Motion, GeometryError> {
    let conflicts = control::detect_conflicts(i, snapshot, control.safe_spacing);
    if conflicts.is_empty() {
        return Ok(Motion::Nominal);
    }
    let position = snapshot[i].ok_or(GeometryError::Coincident)?;
    match control.law {
        ControlLaw::StopAndYield => {
            match control::stop_yield(i, &conflicts, position, destination, control.priority)? {
                ControlDecision::Halt => Ok(Motion::Halt),
                ControlDecision::Proceed(_) => Ok(Motion::Nominal),
            }
        }
        ControlLaw::CircularDetour => {
            let sensing = control.sensing_radius();
            let neighbors = if sensing > control.safe_spacing {
                control::detect_conflicts(i, snapshot, sensing)
            } else {
                conflicts
            };
            let remaining = geom::gc_distance(position, destination, position.norm())?;
            if remaining <= arc * (1.0 + ARRIVAL_SLACK) {
                let toward = control::neighbor_directions(position, &neighbors, snapshot)?;
                if geom::tangent_dir(position, destination)
                    .map_or(true, |d| control::keeps_clear(d, &toward))
                {
                    return Ok(Motion::Nominal);
                }
            }
            match control::circular_detour(i, &neighbors, snapshot, destination, control.n_candidates)? {
                ControlDecision::Halt => Ok(Motion::Halt),
                ControlDecision::Proceed(d) => Ok(Motion::Detour(d)),
            }
        }
    }
}

/// Applies `motion` to a drone at `position`; returns the new position and
/// whether it reached `destination` this step.
pub fn apply_motion(
    position: Vec3,
    destination: Vec3,
    motion: Motion,
    arc: f64,
    radius: f64,
) -> std::result::Result<(Vec3, bool), GeometryError> {
    match motion {
        Motion::Halt => Ok((position, false)),
        Motion::Detour(dir) => Ok((geom::step_along(position, dir, arc, radius)?, false)),
        Motion::Nominal => {
            let remaining = geom::gc_distance(position, destination, radius)?;
            if remaining <= arc * (1.0 + ARRIVAL_SLACK) {
                Ok((destination, true))
            } else {
                let dir = geom::tangent_dir(position, destination)?;
                Ok((geom::step_along(position, dir, arc, radius)?, false))
            }
        }
    }
}

/// Positions of flying drones, indexed by drone id.
pub fn snapshot(states: &[DroneState]) -> Vec<Option<Vec3>> {
    states.iter().map(|s| (!s.finished()).then_some(s.position)).collect()
}

/// Advances every flying drone from step `t` to `t + 1`.
pub fn step(states: &[DroneState], t: usize, cfg: &SimConfig) -> Result<Vec<DroneState>> {
    let snap = snapshot(states);
    let arc = cfg.step_arc();
    let radius = cfg.radius();
    states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut next = s.clone();
            if s.finished() {
                return Ok(next);
            }
            let sim_err = |source| Error::Simulation { drone: s.id, step: t, source };
            let dest = s.destination();
            let motion = decide(i, &snap, dest, &cfg.control, arc).map_err(sim_err)?;
            let (p, arrived) = apply_motion(s.position, dest, motion, arc, radius).map_err(sim_err)?;
            next.position = p;
            if arrived {
                next.leg += 1;
                if next.leg == s.plan.n_legs() {
                    next.finished_at = Some(t + 1);
                }
            }
            Ok(next)
        })
        .collect()
}

/// A running simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    states: Vec<DroneState>,
    t: usize,
}

impl Simulation {
    /// Generates flight plans from the scenario configuration.
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let plans = scenario::gen_plans(&cfg.scenario)?;
        Self::with_plans(cfg, plans)
    }

    /// Uses the given plans; plan `k` must belong to drone `k`.
    pub fn with_plans(cfg: SimConfig, plans: Vec<FlightPlan>) -> Result<Self> {
        cfg.validate()?;
        for (k, plan) in plans.iter().enumerate() {
            if plan.drone_id as usize != k {
                return Err(Error::config(format!(
                    "plan at index {k} belongs to drone {}",
                    plan.drone_id
                )));
            }
            for w in plan.waypoints() {
                geom::check_on_sphere(*w, cfg.radius())?;
            }
        }
        let states = plans.into_iter().map(DroneState::new).collect();
        Ok(Self { cfg, states, t: 0 })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn time_step(&self) -> usize {
        self.t
    }

    pub fn states(&self) -> &[DroneState] {
        &self.states
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.cfg.n_steps || self.states.iter().all(DroneState::finished)
    }

    pub fn step(&mut self) -> Result<()> {
        self.states = step(&self.states, self.t, &self.cfg)?;
        self.t += 1;
        Ok(())
    }

    /// Records for the current step: flying drones, plus drones that arrived
    /// at their final destination during the step just taken.
    pub fn records(&self) -> impl Iterator<Item = TrajectoryRecord> + '_ {
        let time = time_of_step(self.t as u64, self.cfg.dt);
        self.states
            .iter()
            .filter(move |s| s.finished_at.is_none_or(|f| f == self.t))
            .map(move |s| TrajectoryRecord {
                id: s.id,
                time,
                position: s.position,
                destination: s.destination(),
            })
    }

    /// Runs to the step budget, returning records sorted by `(time, id)`.
    pub fn run(mut self) -> Result<Vec<TrajectoryRecord>> {
        let mut out = Vec::with_capacity(self.states.len() * (self.cfg.n_steps + 1));
        out.extend(self.records());
        while !self.is_done() {
            self.step()?;
            out.extend(self.records());
        }
        Ok(out)
    }
}

pub fn run(cfg: &SimConfig) -> Result<Vec<TrajectoryRecord>> {
    Simulation::new(cfg.clone())?.run()
}

/// Outcome of checking a logged trajectory against the control rules.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    /// Drone-steps examined (drone present at both `t` and `t + 1`).
    pub checked_steps: usize,
    /// Stop-and-yield: drone moved while an outranking drone was within ĥ.
    pub yield_violations: usize,
    /// Circular detour: a conflicted move closed on a neighbour.
    pub approach_violations: usize,
    /// Re-deciding from the logged snapshot did not reproduce the logged position.
    pub replay_mismatches: usize,
    /// Chord displacement exceeded one step of arc.
    pub displacement_violations: usize,
    /// Largest relative distance of a logged position from the sphere.
    pub max_sphere_deviation: f64,
}

impl ReplayReport {
    pub fn violations(&self) -> usize {
        self.yield_violations
            + self.approach_violations
            + self.replay_mismatches
            + self.displacement_violations
    }
}

/// Replays logged records (any order) against the control rules in `cfg`.
///
/// The safety checks use only geometry on the logged positions; the replay
/// comparison re-runs [`decide`] and [`apply_motion`] on each logged snapshot.
pub fn replay_check(records: &[TrajectoryRecord], cfg: &SimConfig) -> Result<ReplayReport> {
    let dt = cfg.dt;
    let radius = cfg.radius();
    let arc = cfg.step_arc();
    let control = &cfg.control;
    let n_ids = records.iter().map(|r| r.id as usize + 1).max().unwrap_or(0);
    let n_times = records
        .iter()
        .map(|r| (r.time / dt).round() as usize + 1)
        .max()
        .unwrap_or(0);
    let mut grid: Vec<Vec<Option<TrajectoryRecord>>> = vec![vec![None; n_ids]; n_times];
    for r in records {
        let t = (r.time / dt).round() as usize;
        grid[t][r.id as usize] = Some(*r);
    }

    let mut report = ReplayReport::default();
    let max_chord = 2.0 * radius * (arc / (2.0 * radius)).sin() + 1e-9;
    for r in records {
        let dev = (r.position.norm() - radius).abs() / radius;
        report.max_sphere_deviation = report.max_sphere_deviation.max(dev);
    }

    for t in 0..n_times.saturating_sub(1) {
        let (now, next) = (&grid[t], &grid[t + 1]);
        // a drone logged at t but not t+1 has finished and no longer interacts
        let snap: Vec<Option<Vec3>> = (0..n_ids)
            .map(|i| match (now[i], next[i]) {
                (Some(a), Some(_)) => Some(a.position),
                _ => None,
            })
            .collect();
        for i in 0..n_ids {
            let (Some(a), Some(b)) = (now[i], next[i]) else { continue };
            report.checked_steps += 1;
            let moved = a.position != b.position;
            if a.position.distance(b.position) > max_chord {
                report.displacement_violations += 1;
            }
            let conflicts = control::detect_conflicts(i, &snap, control.safe_spacing);
            if moved && !conflicts.is_empty() {
                match control.law {
                    ControlLaw::StopAndYield => {
                        if conflicts.iter().any(|&j| control.priority.outranks(j, i)) {
                            report.yield_violations += 1;
                        }
                    }
                    ControlLaw::CircularDetour => {
                        let heading = geom::tangent_dir(a.position, b.position)?;
                        let neighbors =
                            control::detect_conflicts(i, &snap, control.sensing_radius());
                        let closes_in = neighbors.iter().any(|&j| {
                            let q = snap[j].expect("neighbour is flying");
                            geom::tangent_dir(a.position, q)
                                .map(|d| heading.dot(d) > 1e-9)
                                .unwrap_or(false)
                        });
                        if closes_in {
                            report.approach_violations += 1;
                        }
                    }
                }
            }
            let motion = decide(i, &snap, a.destination, control, arc)?;
            let (predicted, _) = apply_motion(a.position, a.destination, motion, arc, radius)?;
            if predicted.distance(b.position) > 1e-9 * radius {
                report.replay_mismatches += 1;
            }
        }
    }
    Ok(report)
}
