//! Window-scoped retention of critical points, evaluation metrics, trip
//! reconstruction and file export.

mod export;
mod metrics;
mod trips;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Timestamp;
use crate::tracker::CriticalPoint;

pub use crate::tracker::ClassBreakdown;
pub use export::{parse_csv, write_csv, write_geojson, write_kml, write_per_vessel, ExportFormat};
pub use metrics::{compression_ratio, fleet_rmse, rmse};
pub use trips::{reconstruct_trips, Trip};

#[derive(Debug, Error)]
pub enum SynopsisError {
    #[error("synopsis has no points to interpolate from")]
    EmptySynopsis,
    #[error("compression ratio of an empty raw stream")]
    ZeroRaw,
    #[error("{critical} critical points exceed {raw} raw points")]
    CriticalExceedsRaw { raw: u64, critical: u64 },
    #[error("invalid window: range {omega}s, slide {beta}s")]
    InvalidWindow { omega: i64, beta: i64 },
    #[error("export failed: {0}")]
    IoFailure(String),
    #[error("malformed synopsis record: {0}")]
    Parse(String),
}

impl From<std::io::Error> for SynopsisError {
    fn from(e: std::io::Error) -> Self {
        SynopsisError::IoFailure(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub range_omega_s: i64,
    pub slide_beta_s: i64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            range_omega_s: 6 * 3600,
            slide_beta_s: 3600,
        }
    }
}

impl WindowSpec {
    pub fn new(range_omega_s: i64, slide_beta_s: i64) -> Result<Self, SynopsisError> {
        let spec = WindowSpec {
            range_omega_s,
            slide_beta_s,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynopsisError> {
        if 0 < self.slide_beta_s && self.slide_beta_s <= self.range_omega_s {
            Ok(())
        } else {
            Err(SynopsisError::InvalidWindow {
                omega: self.range_omega_s,
                beta: self.slide_beta_s,
            })
        }
    }

    /// Exclusive lower bound of the window ending at `now`.
    pub fn lower_bound(&self, now: Timestamp) -> Timestamp {
        now - self.range_omega_s
    }
}

/// Per-vessel critical points of the current window, each list sorted by `t_start`.
#[derive(Debug, Clone, Default)]
pub struct SynopsisState {
    per_vessel: BTreeMap<u32, Vec<CriticalPoint>>,
    len: usize,
}

impl SynopsisState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cp: CriticalPoint) {
        let list = self.per_vessel.entry(cp.mmsi).or_default();
        let key = cp.sort_key();
        let at = list.partition_point(|c| c.sort_key() <= key);
        list.insert(at, cp);
        self.len += 1;
    }

    pub fn extend<I: IntoIterator<Item = CriticalPoint>>(&mut self, points: I) {
        for cp in points {
            self.insert(cp);
        }
    }

    /// Removes and returns every point with `t_end <= now - ω`, ordered by vessel then time.
    pub fn slide(&mut self, now: Timestamp, spec: &WindowSpec) -> Vec<CriticalPoint> {
        let bound = spec.lower_bound(now);
        let mut evicted = Vec::new();
        self.per_vessel.retain(|_, list| {
            if list.iter().any(|c| c.t_end <= bound) {
                let (old, keep): (Vec<_>, Vec<_>) = list.drain(..).partition(|c| c.t_end <= bound);
                evicted.extend(old);
                *list = keep;
            }
            !list.is_empty()
        });
        self.len -= evicted.len();
        evicted
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn vessel_count(&self) -> usize {
        self.per_vessel.len()
    }

    pub fn vessel(&self, mmsi: u32) -> &[CriticalPoint] {
        self.per_vessel.get(&mmsi).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.per_vessel.values().flatten()
    }
}
