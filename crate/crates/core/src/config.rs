//! Run configuration, loaded from a TOML file with one table per component.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::{load_areas, load_ports, GridConfig, GridIndex, DEFAULT_PORT_RADIUS_M};
use crate::noise::NoiseConfig;
use crate::patterns::CeConfig;
use crate::runtime::{ReplayConfig, RuntimeError};
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// GeoJSON polygons of protected areas.
    pub areas: Option<PathBuf>,
    /// CSV of `id,lon,lat[,radius_m]`.
    pub ports: Option<PathBuf>,
    /// Radius for ports listed without one.
    pub port_radius_m: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            areas: None,
            ports: None,
            port_radius_m: DEFAULT_PORT_RADIUS_M,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub noise: NoiseConfig,
    pub tracker: TrackerConfig,
    pub grid: GridConfig,
    pub geometry: GeometryConfig,
    pub ce: CeConfig,
    pub replay: ReplayConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, RuntimeError> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| RuntimeError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative geometry paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Config, RuntimeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RuntimeError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Config::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.geometry.areas, &mut cfg.geometry.ports]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Builds the spatial index from the configured geometry files.
    pub fn grid_index(&self) -> Result<GridIndex, RuntimeError> {
        let open = |p: &Path| {
            std::fs::File::open(p).map_err(|e| RuntimeError::Io(format!("{}: {e}", p.display())))
        };
        let areas = match &self.geometry.areas {
            Some(p) => load_areas(open(p)?)?,
            None => Vec::new(),
        };
        let ports = match &self.geometry.ports {
            Some(p) => load_ports(open(p)?, self.geometry.port_radius_m)?,
            None => Vec::new(),
        };
        Ok(GridIndex::build(areas, ports, self.grid)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        let invalid = |e: String| RuntimeError::InvalidConfig(e);
        self.tracker
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.grid.validate().map_err(|e| invalid(e.to_string()))?;
        self.replay.validate()?;
        let n = &self.noise;
        if !(n.max_speed > 0.0
            && n.v_min > 0.0
            && n.dup_epsilon_m >= 0.0
            && n.max_history_age_s > 0)
        {
            return Err(invalid(format!("noise limits must be positive: {n:?}")));
        }
        let c = &self.ce;
        let positive = [
            c.fast_speed_knots,
            c.picking_max_dist_m,
            c.delay_speed_knots,
            c.cone_deg,
            c.nearby_radius_m,
        ];
        if positive.iter().any(|v| v.is_nan() || *v <= 0.0) || c.picking_max_gap_s <= 0 {
            return Err(invalid(format!(
                "pattern thresholds must be positive: {c:?}"
            )));
        }
        // neighbour search only looks one cell out
        let cell = self.grid.min_cell_extent_m();
        if c.nearby_radius_m > cell {
            return Err(invalid(format!(
                "nearby radius {} m exceeds the smallest cell extent {cell:.0} m",
                c.nearby_radius_m
            )));
        }
        if self.geometry.port_radius_m.is_nan() || self.geometry.port_radius_m <= 0.0 {
            return Err(invalid("port radius must be positive".into()));
        }
        Ok(())
    }
}
