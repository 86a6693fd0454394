//! Replay of position streams through the full pipeline, sharding, synthetic
//! fleets and run metrics.

pub mod generate;
pub mod io;
mod metrics;
mod pipeline;

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CellId, GridConfig, GridError};
use crate::synopsis::{SynopsisError, WindowSpec};

pub use generate::{
    generate, FleetMix, LedgerEntry, NoiseInjection, PlantCounts, PlantKind, SyntheticFleet,
    SyntheticFleetSpec,
};
pub use metrics::{render_table, LatencySummary, RunMetrics, SlideStats};
pub use pipeline::{replay, Pipeline, RunOutput};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },
    #[error("invalid fleet spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Synopsis(#[from] SynopsisError),
}

impl From<std::io::Error> for RuntimeError {
    fn from(e: std::io::Error) -> Self {
        RuntimeError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partitioning {
    #[default]
    MmsiHash,
    SubGrid,
}

impl Partitioning {
    pub fn as_str(self) -> &'static str {
        match self {
            Partitioning::MmsiHash => "mmsi_hash",
            Partitioning::SubGrid => "sub_grid",
        }
    }
}

impl FromStr for Partitioning {
    type Err = RuntimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "mmsi_hash" | "hash" => Ok(Partitioning::MmsiHash),
            "sub_grid" | "grid" => Ok(Partitioning::SubGrid),
            other => Err(RuntimeError::InvalidConfig(format!(
                "unknown partitioning {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub window: WindowSpec,
    /// Wall-clock pacing in positions per second; unpaced when absent.
    pub rate_override: Option<f64>,
    pub shard_count: usize,
    pub partitioning: Partitioning,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            window: WindowSpec::default(),
            rate_override: None,
            shard_count: 1,
            partitioning: Partitioning::MmsiHash,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        self.window.validate()?;
        if self.shard_count == 0 {
            return Err(RuntimeError::InvalidConfig(
                "shard_count must be at least 1".into(),
            ));
        }
        if self.rate_override.is_some_and(|r| r.is_nan() || r <= 0.0) {
            return Err(RuntimeError::InvalidConfig(
                "rate_override must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer: a fixed, platform-independent hash.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Assigns vessels and cells to workers.
///
/// Tracking is always by vessel id, so a vessel's positions reach one worker
/// in order. Recognition follows the configured mode: by vessel id, or by
/// the contiguous block of cells (sub-grid) a cell or vessel falls in.
#[derive(Debug, Clone, Copy)]
pub struct Partitioner {
    mode: Partitioning,
    shards: usize,
    nx: usize,
    ny: usize,
    rows: usize,
    cols: usize,
}

impl Partitioner {
    pub fn new(mode: Partitioning, shards: usize, grid: &GridConfig) -> Self {
        let shards = shards.max(1);
        // most square factorization rows x cols == shards
        let rows = (1..=shards)
            .filter(|r| shards % r == 0 && r * r <= shards)
            .max()
            .unwrap_or(1);
        Partitioner {
            mode,
            shards,
            nx: grid.nx,
            ny: grid.ny,
            rows,
            cols: shards / rows,
        }
    }

    pub fn shard_count(&self) -> usize {
        self.shards
    }

    pub fn tracking_shard(&self, mmsi: u32) -> usize {
        (mix64(mmsi as u64) % self.shards as u64) as usize
    }

    /// Owner of a cell's sub-grid block: bands of rows by bands of columns.
    pub fn sub_grid_owner(&self, cell: CellId) -> usize {
        let band = |i: u32, n: usize, parts: usize| (i as usize * parts / n.max(1)).min(parts - 1);
        band(cell.iy, self.ny, self.rows) * self.cols + band(cell.ix, self.nx, self.cols)
    }

    pub fn cell_shard(&self, cell: CellId) -> usize {
        match self.mode {
            Partitioning::MmsiHash => {
                (mix64(((cell.ix as u64) << 32) | cell.iy as u64) % self.shards as u64) as usize
            }
            Partitioning::SubGrid => self.sub_grid_owner(cell),
        }
    }

    /// Recognition worker for a vessel whose latest known position is in `cell`.
    pub fn vessel_shard(&self, mmsi: u32, cell: CellId) -> usize {
        match self.mode {
            Partitioning::MmsiHash => self.tracking_shard(mmsi),
            Partitioning::SubGrid => self.sub_grid_owner(cell),
        }
    }
}
