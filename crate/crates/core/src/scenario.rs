//! Origin-destination demand for the three demand-distribution scenarios.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3, ANTIPODAL_MARGIN, COINCIDENT_MARGIN};

/// How origins and destinations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Waypoints i.i.d. uniform over the whole sphere.
    Random,
    /// Waypoints alternate between two antipodal polar caps.
    Zoned,
    /// Waypoints drawn from the eight vertices of the inscribed cube.
    Stations,
}

impl ScenarioKind {
    /// Scenario number as used on the command line (1, 2, 3).
    pub fn number(self) -> u8 {
        match self {
            ScenarioKind::Random => 1,
            ScenarioKind::Zoned => 2,
            ScenarioKind::Stations => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(ScenarioKind::Random),
            2 => Some(ScenarioKind::Zoned),
            3 => Some(ScenarioKind::Stations),
            _ => None,
        }
    }
}

pub const DEFAULT_ZONE_HALF_ANGLE: f64 = FRAC_PI_3;
pub const DEFAULT_FLIGHTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Sphere radius in metres.
    pub radius: f64,
    pub n_drones: usize,
    /// Legs per drone.
    pub n_flights: usize,
    pub seed: u64,
    /// Half-angle of each polar cap (rad), used by [`ScenarioKind::Zoned`].
    #[serde(default = "default_zone_half_angle")]
    pub zone_half_angle: f64,
}

fn default_zone_half_angle() -> f64 {
    DEFAULT_ZONE_HALF_ANGLE
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, n_drones: usize, seed: u64) -> Self {
        Self {
            kind,
            radius: 1.0,
            n_drones,
            n_flights: DEFAULT_FLIGHTS,
            seed,
            zone_half_angle: DEFAULT_ZONE_HALF_ANGLE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::config(format!("radius must be positive, got {}", self.radius)));
        }
        if self.n_drones == 0 {
            return Err(Error::config("at least one drone is required"));
        }
        if self.n_flights == 0 {
            return Err(Error::config("at least one flight per drone is required"));
        }
        if self.kind == ScenarioKind::Zoned
            && !(self.zone_half_angle > 0.0 && self.zone_half_angle < FRAC_PI_2)
        {
            return Err(Error::config(format!(
                "zone_half_angle must lie in (0, π/2), got {}",
                self.zone_half_angle
            )));
        }
        Ok(())
    }
}

/// A chained sequence of great-circle legs.
///
/// Stored as waypoints, so the destination of leg `n` is bitwise the origin of
/// leg `n + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    pub drone_id: u32,
    waypoints: Vec<Vec3>,
}

impl FlightPlan {
    /// Builds a plan from at least two waypoints; legs must be non-degenerate.
    pub fn from_waypoints(drone_id: u32, waypoints: Vec<Vec3>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::config("a flight plan needs at least two waypoints"));
        }
        let radius = waypoints[0].norm();
        for pair in waypoints.windows(2) {
            geom::check_on_sphere(pair[1], radius)?;
            if !leg_is_valid(pair[0], pair[1]) {
                return Err(Error::config(format!(
                    "drone {drone_id}: leg {:?} -> {:?} is coincident or antipodal",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self { drone_id, waypoints })
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn n_legs(&self) -> usize {
        self.waypoints.len() - 1
    }

    /// `(origin, destination)` of leg `n` (zero-based).
    pub fn leg(&self, n: usize) -> (Vec3, Vec3) {
        (self.waypoints[n], self.waypoints[n + 1])
    }

    pub fn legs(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        self.waypoints.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn origin(&self) -> Vec3 {
        self.waypoints[0]
    }

    pub fn final_destination(&self) -> Vec3 {
        *self.waypoints.last().expect("plan has waypoints")
    }
}

fn leg_is_valid(a: Vec3, b: Vec3) -> bool {
    let angle = a.cross(b).norm().atan2(a.dot(b));
    angle > COINCIDENT_MARGIN && angle < PI - ANTIPODAL_MARGIN
}

/// RNG stream for one drone, independent of generation order.
pub fn drone_rng(seed: u64, drone_id: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ u64::from(drone_id))
}

/// Uniform point on the unit sphere (normalised Gaussian triple).
pub fn sample_uniform_sphere<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform point on the unit-sphere cap `theta <= half_angle` (north) or
/// `theta >= π - half_angle` (south).
pub fn sample_cap<R: Rng + ?Sized>(rng: &mut R, half_angle: f64, north: bool) -> Vec3 {
    // Archimedes: z is uniform over the cap's height
    let z_min = half_angle.cos();
    let z = z_min + (1.0 - z_min) * rng.random::<f64>();
    let phi = TAU * rng.random::<f64>();
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let z = if north { z } else { -z };
    Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
}

/// The eight vertices of the cube inscribed in the sphere of radius `radius`.
pub fn stations(radius: f64) -> [Vec3; 8] {
    let c = radius / 3f64.sqrt();
    let mut out = [Vec3::ZERO; 8];
    for (i, v) in out.iter_mut().enumerate() {
        let sx = if i & 1 == 0 { c } else { -c };
        let sy = if i & 2 == 0 { c } else { -c };
        let sz = if i & 4 == 0 { c } else { -c };
        *v = Vec3::new(sx, sy, sz);
    }
    out
}

/// Generates the flight plan of one drone.
pub fn gen_plan(cfg: &ScenarioConfig, drone_id: u32) -> Result<FlightPlan> {
    cfg.validate()?;
    let mut rng = drone_rng(cfg.seed, drone_id);
    let r = cfg.radius;
    let n_points = cfg.n_flights + 1;
    let mut waypoints: Vec<Vec3> = Vec::with_capacity(n_points);

    match cfg.kind {
        ScenarioKind::Random => {
            while waypoints.len() < n_points {
                let p = sample_uniform_sphere(&mut rng) * r;
                if waypoints.last().is_none_or(|&prev| leg_is_valid(prev, p)) {
                    waypoints.push(p);
                }
            }
        }
        ScenarioKind::Zoned => {
            let start_north = drone_id.is_multiple_of(2);
            while waypoints.len() < n_points {
                let north = start_north == waypoints.len().is_multiple_of(2);
                let p = sample_cap(&mut rng, cfg.zone_half_angle, north) * r;
                if waypoints.last().is_none_or(|&prev| leg_is_valid(prev, p)) {
                    waypoints.push(p);
                }
            }
        }
        ScenarioKind::Stations => {
            let st = stations(r);
            let mut current = rng.random_range(0..st.len());
            waypoints.push(st[current]);
            while waypoints.len() < n_points {
                // vertex i and i ^ 7 are antipodal
                let next = rng.random_range(0..st.len());
                if next == current || next == current ^ 7 {
                    continue;
                }
                current = next;
                waypoints.push(st[current]);
            }
        }
    }
    FlightPlan::from_waypoints(drone_id, waypoints)
}

/// Plans for drones `0..n_drones`.
pub fn gen_plans(cfg: &ScenarioConfig) -> Result<Vec<FlightPlan>> {
    (0..cfg.n_drones as u32).map(|id| gen_plan(cfg, id)).collect()
}

/// Number of motion steps needed to cover arc `length` at `step` per move.
pub fn steps_for_arc(length: f64, step: f64) -> usize {
    // relative slack keeps exact multiples from gaining a zero-length last step
    let ratio = length / step;
    (ratio * (1.0 - 1e-9)).ceil().max(0.0) as usize
}

/// Waypoints spaced by arc `v_bar * dt` along a leg, ending exactly at `destination`.
pub fn discretize_leg(
    origin: Vec3,
    destination: Vec3,
    v_bar: f64,
    dt: f64,
    radius: f64,
) -> Result<Vec<Vec3>> {
    let step = v_bar * dt;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::config(format!("v_bar * dt must be positive, got {step}")));
    }
    geom::check_on_sphere(origin, radius)?;
    if !leg_is_valid(origin, destination) {
        return Err(Error::config("degenerate leg: endpoints coincide or are antipodal"));
    }
    let length = geom::gc_distance(origin, destination, radius)?;
    let h_max = steps_for_arc(length, step);
    (0..=h_max)
        .map(|h| {
            let ell = (h as f64 * step / length).min(1.0);
            let ell = if h == h_max { 1.0 } else { ell };
            geom::slerp(origin, destination, ell).map_err(Error::from)
        })
        .collect()
}
