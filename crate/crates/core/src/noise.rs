//! Single-pass rejection of implausible AIS positions.
//!
//! The checks compare a new report against the last accepted position of the
//! same vessel. Same-timestamp handling (retracting a not-yet-committed report)
//! lives in the tracker, which owns the one-report commit delay.

use serde::{Deserialize, Serialize};

use crate::geo::{haversine, heading_delta, velocity_between, GeoPoint, Timestamp, VelocityVector};

/// One decoded AIS position tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionReport {
    pub mmsi: u32,
    pub pos: GeoPoint,
    pub tau: Timestamp,
}

impl PositionReport {
    pub fn new(mmsi: u32, lon: f64, lat: f64, tau: i64) -> Result<Self, crate::geo::GeoError> {
        Ok(PositionReport {
            mmsi,
            pos: GeoPoint::new(lon, lat)?,
            tau: Timestamp(tau),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseReason {
    OffCourse,
    AbruptTurn,
    ImplausibleSpeed,
    Duplicate,
    TimestampConflict,
}

impl NoiseReason {
    pub const ALL: [NoiseReason; 5] = [
        NoiseReason::OffCourse,
        NoiseReason::AbruptTurn,
        NoiseReason::ImplausibleSpeed,
        NoiseReason::Duplicate,
        NoiseReason::TimestampConflict,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseReason::OffCourse => "OffCourse",
            NoiseReason::AbruptTurn => "AbruptTurn",
            NoiseReason::ImplausibleSpeed => "ImplausibleSpeed",
            NoiseReason::Duplicate => "Duplicate",
            NoiseReason::TimestampConflict => "TimestampConflict",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseVerdict {
    Accept,
    /// Accepted, replacing an uncommitted report with the same timestamp.
    /// The replaced report is counted as a `TimestampConflict` rejection.
    Supersede,
    Reject(NoiseReason),
}

impl NoiseVerdict {
    pub fn is_accepted(self) -> bool {
        !matches!(self, NoiseVerdict::Reject(_))
    }

    pub fn reason(self) -> Option<NoiseReason> {
        match self {
            NoiseVerdict::Reject(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Knots.
    pub max_speed: f64,
    pub abrupt_turn_deg: f64,
    pub offcourse_turn_deg: f64,
    pub offcourse_speed_ratio: f64,
    pub dup_epsilon_m: f64,
    /// Below this speed (knots) headings are GPS jitter and the turn checks are skipped.
    pub v_min: f64,
    /// Turn checks need a velocity history no older than this many seconds.
    pub max_history_age_s: i64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            max_speed: 50.0,
            abrupt_turn_deg: 60.0,
            offcourse_turn_deg: 60.0,
            offcourse_speed_ratio: 0.5,
            dup_epsilon_m: 0.0,
            v_min: 1.0,
            max_history_age_s: 600,
        }
    }
}

/// What the filter knows about a vessel: its last accepted position, the
/// velocity that led there, and the mean velocity over recent positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseReference {
    pub tau: Timestamp,
    pub pos: GeoPoint,
    pub velocity: Option<VelocityVector>,
    pub mean: Option<VelocityVector>,
}

/// Runs the positional checks in fixed order; the first failing check wins.
///
/// `reference == None` means a vessel never seen before, which is always accepted.
pub fn filter(
    report: &PositionReport,
    reference: Option<&NoiseReference>,
    cfg: &NoiseConfig,
) -> NoiseVerdict {
    let Some(r) = reference else {
        return NoiseVerdict::Accept;
    };
    if report.tau == r.tau {
        return NoiseVerdict::Reject(NoiseReason::TimestampConflict);
    }
    if haversine(r.pos, report.pos) <= cfg.dup_epsilon_m {
        return NoiseVerdict::Reject(NoiseReason::Duplicate);
    }
    // An older timestamp than the last accepted one cannot be placed on the
    // track; treat it like an impossible jump.
    let Ok(v_now) = velocity_between(r.pos, r.tau, report.pos, report.tau) else {
        return NoiseVerdict::Reject(NoiseReason::ImplausibleSpeed);
    };
    if v_now.speed > cfg.max_speed {
        return NoiseVerdict::Reject(NoiseReason::ImplausibleSpeed);
    }

    let fresh = report.tau - r.tau <= cfg.max_history_age_s;
    if !fresh || v_now.speed < cfg.v_min {
        return NoiseVerdict::Accept;
    }
    if let Some(prev) = r.velocity {
        if prev.speed >= cfg.v_min
            && heading_delta(prev.heading, v_now.heading) > cfg.abrupt_turn_deg
        {
            return NoiseVerdict::Reject(NoiseReason::AbruptTurn);
        }
    }
    if let Some(mean) = r.mean {
        if mean.speed >= cfg.v_min {
            let turn = heading_delta(mean.heading, v_now.heading);
            let speed_dev = (v_now.speed - mean.speed).abs() / mean.speed.max(cfg.v_min);
            if turn > cfg.offcourse_turn_deg && speed_dev > cfg.offcourse_speed_ratio {
                return NoiseVerdict::Reject(NoiseReason::OffCourse);
            }
        }
    }
    NoiseVerdict::Accept
}
