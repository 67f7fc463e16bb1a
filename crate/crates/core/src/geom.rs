//! Spherical geometry on a sphere of radius `R` centred at the origin.
//!
//! Points are plain Cartesian [`Vec3`] values. Operations that take "on-sphere"
//! inputs validate them with a relative tolerance of [`INPUT_TOLERANCE`];
//! everything they produce lands on the sphere to within [`OUTPUT_TOLERANCE`].

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative deviation from the sphere accepted on input.
pub const INPUT_TOLERANCE: f64 = 1e-6;
/// Relative deviation from the sphere guaranteed on output.
pub const OUTPUT_TOLERANCE: f64 = 1e-9;
/// Angular distance (rad) from the antipode below which a great circle is not unique.
pub const ANTIPODAL_MARGIN: f64 = 1e-6;
/// Angular distance (rad) below which two points are treated as coincident.
pub const COINCIDENT_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate in {0:?}")]
    NonFinite(Vec3),
    #[error("point {point:?} is off the sphere of radius {radius} (relative deviation {deviation:.3e})")]
    OffSphere { point: Vec3, radius: f64, deviation: f64 },
    #[error("points are antipodal: the great circle through them is not unique")]
    Antipodal,
    #[error("points coincide: direction is undefined")]
    Coincident,
    #[error("negative arc length {0}")]
    NegativeArc(f64),
    #[error("invalid radius {0}")]
    InvalidRadius(f64),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > f64::MIN_POSITIVE && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    /// Radial projection onto the sphere of the given radius.
    pub fn project_to_sphere(self, radius: f64) -> Option<Vec3> {
        self.normalized().map(|u| u * radius)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Polar angle `theta` in `[0, π]` and azimuth `phi` in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCoord {
    pub theta: f64,
    pub phi: f64,
}

fn check_radius(radius: f64) -> Result<()> {
    if radius.is_finite() && radius > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidRadius(radius))
    }
}

/// Checks that `p` is finite and lies on the sphere within [`INPUT_TOLERANCE`].
pub fn check_on_sphere(p: Vec3, radius: f64) -> Result<()> {
    check_on_sphere_within(p, radius, INPUT_TOLERANCE)
}

pub fn check_on_sphere_within(p: Vec3, radius: f64, tolerance: f64) -> Result<()> {
    check_radius(radius)?;
    if !p.is_finite() {
        return Err(GeometryError::NonFinite(p));
    }
    let deviation = (p.norm() - radius).abs() / radius;
    if deviation > tolerance {
        return Err(GeometryError::OffSphere { point: p, radius, deviation });
    }
    Ok(())
}

/// Radius implied by a point; used where an operation only takes points.
fn implied_radius(p: Vec3) -> Result<f64> {
    if !p.is_finite() {
        return Err(GeometryError::NonFinite(p));
    }
    let r = p.norm();
    check_radius(r)?;
    Ok(r)
}

/// Central angle between two directions, accurate for tiny and near-π angles.
fn central_angle(a: Vec3, b: Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Great-circle (arc) distance between two on-sphere points.
pub fn gc_distance(p1: Vec3, p2: Vec3, radius: f64) -> Result<f64> {
    check_on_sphere(p1, radius)?;
    check_on_sphere(p2, radius)?;
    Ok(central_angle(p1, p2) * radius)
}

fn checked_pair(p1: Vec3, p2: Vec3) -> Result<(f64, f64)> {
    let radius = implied_radius(p1)?;
    check_on_sphere(p2, radius)?;
    let omega = central_angle(p1, p2);
    if omega > PI - ANTIPODAL_MARGIN {
        return Err(GeometryError::Antipodal);
    }
    Ok((radius, omega))
}

/// Spherical linear interpolation along the shorter great-circle arc.
///
/// `ell = 0` and `ell = 1` return the endpoints bit-for-bit.
pub fn slerp(p1: Vec3, p2: Vec3, ell: f64) -> Result<Vec3> {
    let (radius, omega) = checked_pair(p1, p2)?;
    if ell <= 0.0 {
        return Ok(p1);
    }
    if ell >= 1.0 {
        return Ok(p2);
    }
    if omega < COINCIDENT_MARGIN {
        return Ok(p1);
    }
    let s = omega.sin();
    let a = ((1.0 - ell) * omega).sin() / s;
    let b = (ell * omega).sin() / s;
    let out = p1 * a + p2 * b;
    Ok(out.project_to_sphere(radius).unwrap_or(out))
}

/// Unit tangent at `p1` pointing along the great circle toward `p2`.
pub fn tangent_dir(p1: Vec3, p2: Vec3) -> Result<Vec3> {
    let (_, omega) = checked_pair(p1, p2)?;
    if omega < COINCIDENT_MARGIN {
        return Err(GeometryError::Coincident);
    }
    let n = p1.normalized().ok_or(GeometryError::NonFinite(p1))?;
    (p2 - n * p2.dot(n)).normalized().ok_or(GeometryError::Coincident)
}

/// Rotates `d` about the unit `axis` by `psi` radians (Rodrigues' formula).
pub fn rodrigues_rotate(d: Vec3, axis: Vec3, psi: f64) -> Result<Vec3> {
    if !d.is_finite() {
        return Err(GeometryError::NonFinite(d));
    }
    if !axis.is_finite() {
        return Err(GeometryError::NonFinite(axis));
    }
    let (s, c) = psi.sin_cos();
    Ok(d * c + axis.cross(d) * s + axis * (axis.dot(d) * (1.0 - c)))
}

/// Spherical coordinates of a point; the poles map to `phi = 0`.
pub fn to_spherical(p: Vec3) -> SphericalCoord {
    let rho = p.x.hypot(p.y);
    let theta = rho.atan2(p.z);
    if rho == 0.0 {
        return SphericalCoord { theta, phi: 0.0 };
    }
    let mut phi = p.y.atan2(p.x);
    if phi < 0.0 {
        phi += TAU;
    }
    if phi >= TAU {
        phi = 0.0;
    }
    SphericalCoord { theta, phi }
}

pub fn from_spherical(c: SphericalCoord, radius: f64) -> Vec3 {
    let (st, ct) = c.theta.sin_cos();
    let (sp, cp) = c.phi.sin_cos();
    Vec3::new(radius * st * cp, radius * st * sp, radius * ct)
}

/// Advances `p` by arc length `arc` along the great circle leaving in direction `dir`.
pub fn step_along(p: Vec3, dir: Vec3, arc: f64, radius: f64) -> Result<Vec3> {
    check_on_sphere(p, radius)?;
    if !dir.is_finite() {
        return Err(GeometryError::NonFinite(dir));
    }
    if arc.is_nan() || arc < 0.0 {
        return Err(GeometryError::NegativeArc(arc));
    }
    if arc == 0.0 {
        return Ok(p);
    }
    let n = p / p.norm();
    let tangent = (dir - n * dir.dot(n))
        .normalized()
        .ok_or(GeometryError::Coincident)?;
    let (s, c) = (arc / radius).sin_cos();
    let out = n * (radius * c) + tangent * (radius * s);
    Ok(out.project_to_sphere(radius).unwrap_or(out))
}
