//! Equirectangular pixel ↔ spherical ↔ Cartesian conversions.
//!
//! Conventions used throughout the crate:
//!
//! * latitude `theta` is signed, in `[-π/2, π/2]`; row 0 sits at `theta = -π/2`;
//! * longitude `phi` is in `[0, 2π)` and grows with the column index;
//! * a direction is `(cos θ cos φ, sin θ, −cos θ sin φ)`, so `phi = 0` looks down +X,
//!   `phi = π/2` looks down −Z and the image's bottom row looks down +Y;
//! * pixels are sampled at their centers, `(x + 0.5, y + 0.5)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    /// Latitude, radians.
    pub theta: f64,
    /// Longitude, radians.
    pub phi: f64,
}

impl SphericalCoord {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&theta) || !(0.0..TAU).contains(&phi) {
            return Err(Error::ContractViolation(format!(
                "spherical coordinate out of range: theta={theta}, phi={phi}"
            )));
        }
        Ok(SphericalCoord { theta, phi })
    }
}

/// Translation of a viewpoint from the original panorama center, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CameraPose {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl CameraPose {
    pub const ORIGIN: CameraPose = CameraPose {
        tx: 0.0,
        ty: 0.0,
        tz: 0.0,
    };

    pub fn new(tx: f64, ty: f64, tz: f64) -> Result<Self> {
        let pose = CameraPose { tx, ty, tz };
        if !pose.as_vec().is_finite() {
            return Err(Error::ContractViolation(format!(
                "camera pose must be finite, got ({tx}, {ty}, {tz})"
            )));
        }
        Ok(pose)
    }

    pub fn as_vec(self) -> Vec3 {
        Vec3::new(self.tx, self.ty, self.tz)
    }

    pub fn from_vec(v: Vec3) -> Self {
        CameraPose {
            tx: v.x,
            ty: v.y,
            tz: v.z,
        }
    }

    pub fn distance(self, other: CameraPose) -> f64 {
        (other.as_vec() - self.as_vec()).norm()
    }
}

impl std::str::FromStr for CameraPose {
    type Err = Error;

    /// Parses `"tx,ty,tz"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::ContractViolation(format!("expected a pose as tx,ty,tz, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut v = [0.0; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        CameraPose::new(v[0], v[1], v[2])
    }
}

impl std::fmt::Display for CameraPose {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.tx, self.ty, self.tz)
    }
}

#[inline]
pub(crate) fn column_longitude(x: f64, w: usize) -> f64 {
    TAU * (x + 0.5) / w as f64
}

#[inline]
pub(crate) fn row_latitude(y: f64, h: usize) -> f64 {
    PI * (y + 0.5) / h as f64 - FRAC_PI_2
}

pub fn pixel_to_spherical(x: usize, y: usize, w: usize, h: usize) -> Result<SphericalCoord> {
    if x >= w || y >= h {
        return Err(Error::ContractViolation(format!(
            "pixel ({x}, {y}) outside a {w}x{h} panorama"
        )));
    }
    Ok(SphericalCoord {
        theta: row_latitude(y as f64, h),
        phi: column_longitude(x as f64, w),
    })
}

/// Continuous pixel coordinates of a spherical coordinate; pixel centers land on integers.
#[inline]
pub fn spherical_to_pixel(s: SphericalCoord, w: usize, h: usize) -> (f64, f64) {
    (
        s.phi / TAU * w as f64 - 0.5,
        (s.theta + FRAC_PI_2) / PI * h as f64 - 0.5,
    )
}

#[inline]
pub fn spherical_to_cartesian(s: SphericalCoord) -> Vec3 {
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    Vec3::new(ct * cp, st, -ct * sp)
}

/// Spherical coordinate of a non-zero vector; no validation.
#[inline]
pub(crate) fn direction_to_spherical(v: Vec3) -> SphericalCoord {
    let theta = v.y.atan2((v.x * v.x + v.z * v.z).sqrt());
    let mut phi = (-v.z).atan2(v.x);
    if phi < 0.0 {
        phi += TAU;
        // -0.0 < tiny negative rounds up to exactly TAU
        if phi >= TAU {
            phi = 0.0;
        }
    }
    SphericalCoord { theta, phi }
}

pub fn cartesian_to_spherical(v: Vec3) -> Result<SphericalCoord> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "cannot take the direction of {v:?}"
        )));
    }
    Ok(direction_to_spherical(v))
}

pub fn lift_to_3d(s: SphericalCoord, depth: f64) -> Result<Vec3> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "depth must be positive and finite, got {depth}"
        )));
    }
    Ok(spherical_to_cartesian(s).scale(depth))
}

/// Continuous panorama coordinates of a direction.
#[inline]
pub(crate) fn direction_to_pixel(v: Vec3, w: usize, h: usize) -> (f64, f64) {
    spherical_to_pixel(direction_to_spherical(v), w, h)
}
