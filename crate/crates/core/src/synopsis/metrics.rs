use std::collections::BTreeMap;

use super::SynopsisError;
use crate::geo::{haversine, GeoPoint, Timestamp};
use crate::noise::PositionReport;
use crate::tracker::{Annotation, CriticalPoint};

/// Fraction of accepted raw positions the synopsis discards.
pub fn compression_ratio(raw_count: u64, critical_count: u64) -> Result<f64, SynopsisError> {
    if raw_count == 0 {
        return Err(SynopsisError::ZeroRaw);
    }
    if critical_count > raw_count {
        return Err(SynopsisError::CriticalExceedsRaw {
            raw: raw_count,
            critical: critical_count,
        });
    }
    Ok((raw_count - critical_count) as f64 / raw_count as f64)
}

/// Time-stamped positions the compressed trajectory passes through. A stop
/// holds its centroid for its whole duration; between anchors the vessel is
/// assumed to follow the great circle at constant speed.
fn anchors(synopsis: &[CriticalPoint]) -> Vec<(Timestamp, GeoPoint)> {
    let mut out: Vec<(Timestamp, GeoPoint)> = Vec::with_capacity(synopsis.len() + 2);
    for c in synopsis {
        out.push((c.t_start, c.pos));
        if c.annotation == Annotation::Stopped && c.t_end > c.t_start {
            out.push((c.t_end, c.pos));
        }
    }
    out.sort_by_key(|a| a.0);
    out.dedup_by_key(|a| a.0);
    out
}

fn synchronized(anchors: &[(Timestamp, GeoPoint)], t: Timestamp) -> GeoPoint {
    let i = anchors.partition_point(|a| a.0 <= t);
    if i == 0 {
        return anchors[0].1;
    }
    let (t0, p0) = anchors[i - 1];
    if t0 == t || i == anchors.len() {
        return p0;
    }
    let (t1, p1) = anchors[i];
    p0.interpolate(p1, (t - t0) as f64 / (t1 - t0) as f64)
}

/// Root mean square distance between raw positions and their time-synchronized
/// counterparts on the compressed trajectory of one vessel.
pub fn rmse(raw: &[PositionReport], synopsis: &[CriticalPoint]) -> Result<f64, SynopsisError> {
    if synopsis.is_empty() {
        return Err(SynopsisError::EmptySynopsis);
    }
    if raw.is_empty() {
        return Ok(0.0);
    }
    let anchors = anchors(synopsis);
    let sum: f64 = raw
        .iter()
        .map(|r| haversine(r.pos, synchronized(&anchors, r.tau)).powi(2))
        .sum();
    Ok((sum / raw.len() as f64).sqrt())
}

/// Mean of per-vessel RMSE over every vessel with raw positions.
///
/// Each vessel's first and last accepted positions are added to its synopsis,
/// since a trajectory with no events in between is otherwise unanchored.
pub fn fleet_rmse(raw: &[PositionReport], synopsis: &[CriticalPoint]) -> Option<f64> {
    let mut raw_by: BTreeMap<u32, Vec<PositionReport>> = BTreeMap::new();
    for r in raw {
        raw_by.entry(r.mmsi).or_default().push(*r);
    }
    let mut syn_by: BTreeMap<u32, Vec<CriticalPoint>> = BTreeMap::new();
    for c in synopsis {
        syn_by.entry(c.mmsi).or_default().push(*c);
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (mmsi, mut reports) in raw_by {
        reports.sort_by_key(|r| r.tau);
        let mut points = syn_by.remove(&mmsi).unwrap_or_default();
        for r in [reports[0], reports[reports.len() - 1]] {
            points.push(CriticalPoint {
                mmsi,
                t_start: r.tau,
                t_end: r.tau,
                pos: r.pos,
                annotation: Annotation::Turn,
                velocity: Default::default(),
            });
        }
        if let Ok(e) = rmse(&reports, &points) {
            total += e;
            n += 1;
        }
    }
    (n > 0).then(|| total / n as f64)
}
