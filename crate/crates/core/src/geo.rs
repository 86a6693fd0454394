//! Spherical-earth geodesy and kinematics shared by every pipeline stage.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// One nautical mile in meters; a knot is one nautical mile per hour.
pub const METERS_PER_NAUTICAL_MILE: f64 = 1852.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeoError {
    #[error("coordinate out of range: lon={lon}, lat={lat}")]
    OutOfRange { lon: OrdF64, lat: OrdF64 },
    #[error("two positions share timestamp {0}")]
    EqualTimestamps(Timestamp),
    #[error("timestamp {later} precedes {earlier}")]
    TimeReversed {
        earlier: Timestamp,
        later: Timestamp,
    },
}

/// `f64` wrapper so coordinate errors can derive `Eq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl fmt::Display for OrdF64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A WGS84-style longitude/latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        let ok = lon.is_finite()
            && lat.is_finite()
            && (-180.0..=180.0).contains(&lon)
            && (-90.0..=90.0).contains(&lat);
        if ok {
            Ok(GeoPoint { lon, lat })
        } else {
            Err(GeoError::OutOfRange {
                lon: OrdF64(lon),
                lat: OrdF64(lat),
            })
        }
    }

    /// Moves `distance_m` along the great circle leaving at `bearing_deg`.
    pub fn destination(&self, bearing_deg: f64, distance_m: f64) -> GeoPoint {
        let delta = distance_m / EARTH_RADIUS_M;
        let theta = bearing_deg.to_radians();
        let phi1 = self.lat.to_radians();
        let lambda1 = self.lon.to_radians();

        let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
        let lambda2 = lambda1
            + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());

        let lon = (lambda2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
        GeoPoint {
            lon,
            lat: phi2.to_degrees(),
        }
    }

    /// Point the fraction `f` of the way to `other` along the great circle.
    pub fn interpolate(&self, other: GeoPoint, f: f64) -> GeoPoint {
        let d = haversine(*self, other) / EARTH_RADIUS_M;
        if d < 1e-12 {
            return *self;
        }
        let (phi1, lambda1) = (self.lat.to_radians(), self.lon.to_radians());
        let (phi2, lambda2) = (other.lat.to_radians(), other.lon.to_radians());
        let a = ((1.0 - f) * d).sin() / d.sin();
        let b = (f * d).sin() / d.sin();
        let x = a * phi1.cos() * lambda1.cos() + b * phi2.cos() * lambda2.cos();
        let y = a * phi1.cos() * lambda1.sin() + b * phi2.cos() * lambda2.sin();
        let z = a * phi1.sin() + b * phi2.sin();
        GeoPoint {
            lon: y.atan2(x).to_degrees(),
            lat: z.atan2(x.hypot(y)).to_degrees(),
        }
    }
}

/// Integer UNIX-epoch seconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const MIN: Timestamp = Timestamp(i64::MIN);
    pub const MAX: Timestamp = Timestamp(i64::MAX);

    pub fn secs(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Add<i64> for Timestamp {
    type Output = Timestamp;

    fn add(self, rhs: i64) -> Timestamp {
        Timestamp(self.0.saturating_add(rhs))
    }
}

impl Sub<i64> for Timestamp {
    type Output = Timestamp;

    fn sub(self, rhs: i64) -> Timestamp {
        Timestamp(self.0.saturating_sub(rhs))
    }
}

impl Sub<Timestamp> for Timestamp {
    type Output = i64;

    fn sub(self, rhs: Timestamp) -> i64 {
        self.0.saturating_sub(rhs.0)
    }
}

/// Speed over ground in knots plus course in degrees clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityVector {
    pub speed: f64,
    pub heading: f64,
}

impl VelocityVector {
    pub fn new(speed: f64, heading: f64) -> Self {
        VelocityVector {
            speed,
            heading: normalize_heading(heading),
        }
    }
}

pub fn normalize_heading(h: f64) -> f64 {
    let n = h.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if n >= 360.0 {
        0.0
    } else {
        n
    }
}

/// Great-circle distance in meters.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();

    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `a` towards `b`, in [0, 360).
pub fn initial_bearing(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dlambda = (b.lon - a.lon).to_radians();

    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    normalize_heading(y.atan2(x).to_degrees())
}

pub fn meters_per_second_to_knots(mps: f64) -> f64 {
    mps * 3600.0 / METERS_PER_NAUTICAL_MILE
}

pub fn knots_to_meters_per_second(knots: f64) -> f64 {
    knots * METERS_PER_NAUTICAL_MILE / 3600.0
}

/// Velocity implied by moving from `p1` at `t1` to `p2` at `t2`.
///
/// A zero-length step reports heading 0; callers that track a course should
/// carry the previous heading forward instead.
pub fn velocity_between(
    p1: GeoPoint,
    t1: Timestamp,
    p2: GeoPoint,
    t2: Timestamp,
) -> Result<VelocityVector, GeoError> {
    if t2 == t1 {
        return Err(GeoError::EqualTimestamps(t1));
    }
    if t2 < t1 {
        return Err(GeoError::TimeReversed {
            earlier: t1,
            later: t2,
        });
    }
    let dist = haversine(p1, p2);
    let dt = (t2 - t1) as f64;
    let heading = if dist > 0.0 {
        initial_bearing(p1, p2)
    } else {
        0.0
    };
    Ok(VelocityVector {
        speed: meters_per_second_to_knots(dist / dt),
        heading,
    })
}

/// Smallest absolute angle between two headings, in [0, 180].
pub fn heading_delta(h1: f64, h2: f64) -> f64 {
    let d = (h2 - h1).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Signed turn from `from` to `to`, in (-180, 180]; positive is clockwise.
pub fn signed_heading_change(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}
