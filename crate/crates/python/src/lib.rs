//! Python bindings: configuration, per-vessel tracking, whole-stream replay,
//! synthetic fleets and a few geometry and interval helpers.

use std::fs::File;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use vesselwatch::grid::{load_areas, load_ports, point_in_polygon as pip, GridConfig, GridIndex};
use vesselwatch::interval;
use vesselwatch::runtime::io::CeRecord;
use vesselwatch::runtime::{self, FleetMix, Partitioning, PlantCounts, SyntheticFleetSpec};
use vesselwatch::synopsis::{self, WindowSpec};
use vesselwatch::{
    geo, Config, GeoPoint, NoiseVerdict, PositionReport, RunOutput, Timestamp, VesselState,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(PyModule::import(py, "json")?
        .call_method1("loads", (text,))?
        .unbind())
}

fn point((lon, lat): (f64, f64)) -> PyResult<GeoPoint> {
    GeoPoint::new(lon, lat).map_err(value_err)
}

fn reports(rows: Vec<(u32, f64, f64, i64)>) -> PyResult<Vec<PositionReport>> {
    rows.into_iter()
        .map(|(mmsi, lon, lat, tau)| PositionReport::new(mmsi, lon, lat, tau).map_err(value_err))
        .collect()
}

fn rows(reports: &[PositionReport]) -> Vec<(u32, f64, f64, i64)> {
    reports
        .iter()
        .map(|r| (r.mmsi, r.pos.lon, r.pos.lat, r.tau.0))
        .collect()
}

#[pyclass(name = "Config", skip_from_py_object)]
#[derive(Clone, Default)]
struct PyConfig {
    inner: Config,
}

#[pymethods]
impl PyConfig {
    /// Defaults, or the given TOML text layered over them.
    #[new]
    #[pyo3(signature = (toml=None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => Config::from_toml(t).map_err(value_err)?,
            None => Config::default(),
        };
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig {
            inner: Config::load(&path).map_err(value_err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn turn_threshold_deg(&self) -> f64 {
        self.inner.tracker.turn_threshold_deg
    }

    #[setter]
    fn set_turn_threshold_deg(&mut self, v: f64) {
        self.inner.tracker.turn_threshold_deg = v;
    }

    #[getter]
    fn gap_period_s(&self) -> i64 {
        self.inner.tracker.gap_period_s
    }

    #[setter]
    fn set_gap_period_s(&mut self, v: i64) {
        self.inner.tracker.gap_period_s = v;
    }

    /// `(range_s, slide_s)` of the sliding window.
    #[getter]
    fn window(&self) -> (i64, i64) {
        let w = self.inner.replay.window;
        (w.range_omega_s, w.slide_beta_s)
    }

    #[setter]
    fn set_window(&mut self, window: (i64, i64)) -> PyResult<()> {
        self.inner.replay.window = WindowSpec::new(window.0, window.1).map_err(value_err)?;
        Ok(())
    }

    #[getter]
    fn shard_count(&self) -> usize {
        self.inner.replay.shard_count
    }

    #[setter]
    fn set_shard_count(&mut self, n: usize) {
        self.inner.replay.shard_count = n;
    }

    /// `"mmsi_hash"` or `"sub_grid"`.
    #[getter]
    fn partitioning(&self) -> &'static str {
        self.inner.replay.partitioning.as_str()
    }

    #[setter]
    fn set_partitioning(&mut self, p: &str) -> PyResult<()> {
        self.inner.replay.partitioning = p.parse::<Partitioning>().map_err(value_err)?;
        Ok(())
    }

    /// `(nx, ny)` cells of the spatial grid.
    #[getter]
    fn grid_cells(&self) -> (usize, usize) {
        (self.inner.grid.nx, self.inner.grid.ny)
    }

    #[setter]
    fn set_grid_cells(&mut self, cells: (usize, usize)) {
        self.inner.grid = self.inner.grid.with_cells(cells.0, cells.1);
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(value_err)
    }

    fn __repr__(&self) -> String {
        let (r, s) = self.window();
        format!(
            "Config(turn_threshold_deg={}, window=({r}, {s}), shard_count={}, partitioning={:?})",
            self.turn_threshold_deg(),
            self.shard_count(),
            self.partitioning()
        )
    }
}

fn config_or_default(cfg: Option<PyRef<'_, PyConfig>>) -> Config {
    cfg.map(|c| c.inner.clone()).unwrap_or_default()
}

#[pyclass(name = "CriticalPoint", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyCriticalPoint {
    mmsi: u32,
    t_start: i64,
    t_end: i64,
    lon: f64,
    lat: f64,
    annotation: &'static str,
    speed: f64,
    heading: f64,
}

impl From<&vesselwatch::CriticalPoint> for PyCriticalPoint {
    fn from(c: &vesselwatch::CriticalPoint) -> Self {
        PyCriticalPoint {
            mmsi: c.mmsi,
            t_start: c.t_start.0,
            t_end: c.t_end.0,
            lon: c.pos.lon,
            lat: c.pos.lat,
            annotation: c.annotation.as_str(),
            speed: c.velocity.speed,
            heading: c.velocity.heading,
        }
    }
}

impl PyCriticalPoint {
    fn to_core(&self) -> PyResult<vesselwatch::CriticalPoint> {
        let annotation = self.annotation.parse().map_err(value_err)?;
        Ok(vesselwatch::CriticalPoint {
            mmsi: self.mmsi,
            t_start: Timestamp(self.t_start),
            t_end: Timestamp(self.t_end),
            pos: point((self.lon, self.lat))?,
            annotation,
            velocity: vesselwatch::VelocityVector::new(self.speed, self.heading),
        })
    }
}

#[pymethods]
impl PyCriticalPoint {
    fn __repr__(&self) -> String {
        format!(
            "CriticalPoint({}, {}, t={}..{}, lon={:.6}, lat={:.6})",
            self.mmsi, self.annotation, self.t_start, self.t_end, self.lon, self.lat
        )
    }
}

fn points(list: &[vesselwatch::CriticalPoint]) -> Vec<PyCriticalPoint> {
    list.iter().map(PyCriticalPoint::from).collect()
}

/// Noise filter and mobility tracker for a single vessel.
#[pyclass(name = "Tracker")]
struct PyTracker {
    state: VesselState,
    cfg: Config,
}

#[pymethods]
impl PyTracker {
    #[new]
    #[pyo3(signature = (mmsi, config=None))]
    fn new(mmsi: u32, config: Option<PyRef<'_, PyConfig>>) -> PyResult<Self> {
        let cfg = config_or_default(config);
        cfg.validate().map_err(value_err)?;
        Ok(PyTracker {
            state: VesselState::new(mmsi),
            cfg,
        })
    }

    /// Feeds one report; returns the noise verdict (`"accept"`, `"supersede"`
    /// or the rejection reason) and any critical points it completed.
    fn observe(
        &mut self,
        lon: f64,
        lat: f64,
        tau: i64,
    ) -> PyResult<(String, Vec<PyCriticalPoint>)> {
        let r = PositionReport::new(self.state.mmsi(), lon, lat, tau).map_err(value_err)?;
        let mut out = Vec::new();
        let verdict = self
            .state
            .observe(&r, &self.cfg.noise, &self.cfg.tracker, &mut out);
        let verdict = match verdict {
            NoiseVerdict::Accept => "accept".to_string(),
            NoiseVerdict::Supersede => "supersede".to_string(),
            NoiseVerdict::Reject(reason) => reason.as_str().to_string(),
        };
        Ok((verdict, points(&out)))
    }

    /// Ends the track, emitting whatever the last report completes.
    fn flush(&mut self) -> Vec<PyCriticalPoint> {
        let mut out = Vec::new();
        self.state.flush(&self.cfg.tracker, &mut out);
        points(&out)
    }

    /// Positions classified so far, per class.
    fn counts(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, self.state.counts())
    }
}

#[pyclass(name = "RunResult", frozen)]
struct PyRunResult {
    out: RunOutput,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn critical_points(&self) -> Vec<PyCriticalPoint> {
        points(&self.out.critical_points)
    }

    /// One dict per CE; `t_end` is None while it still holds.
    #[getter]
    fn ces(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let records: Vec<CeRecord> = self.out.ces.iter().map(CeRecord::from).collect();
        json_to_py(py, &records)
    }

    #[getter]
    fn metrics(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, &self.out.metrics)
    }

    /// Accepted positions as `(mmsi, lon, lat, tau)`, if collected.
    #[getter]
    fn raw(&self) -> Option<Vec<(u32, f64, f64, i64)>> {
        self.out.raw.as_deref().map(rows)
    }

    fn metrics_table(&self) -> String {
        runtime::render_table(&self.out.metrics)
    }
}

fn run(
    py: Python<'_>,
    input: Vec<PositionReport>,
    cfg: &Config,
    grid: GridIndex,
    collect_raw: bool,
) -> PyResult<PyRunResult> {
    let out = py
        .detach(|| vesselwatch::replay(input.into_iter().map(Ok), cfg, grid, collect_raw))
        .map_err(value_err)?;
    Ok(PyRunResult { out })
}

/// Replays `(mmsi, lon, lat, tau)` rows, in arrival order, through the whole
/// pipeline. Geometry files override the ones named in the config.
#[pyfunction]
#[pyo3(signature = (rows, config=None, areas=None, ports=None, collect_raw=false))]
fn replay(
    py: Python<'_>,
    rows: Vec<(u32, f64, f64, i64)>,
    config: Option<PyRef<'_, PyConfig>>,
    areas: Option<PathBuf>,
    ports: Option<PathBuf>,
    collect_raw: bool,
) -> PyResult<PyRunResult> {
    let mut cfg = config_or_default(config);
    if areas.is_some() {
        cfg.geometry.areas = areas;
    }
    if ports.is_some() {
        cfg.geometry.ports = ports;
    }
    cfg.validate().map_err(value_err)?;
    let grid = cfg
        .grid_index()
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    run(py, reports(rows)?, &cfg, grid, collect_raw)
}

#[pyclass(name = "Fleet", frozen)]
struct PyFleet {
    fleet: runtime::SyntheticFleet,
}

#[pymethods]
impl PyFleet {
    /// Reports as `(mmsi, lon, lat, tau)` in arrival order.
    #[getter]
    fn reports(&self) -> Vec<(u32, f64, f64, i64)> {
        rows(&self.fleet.reports)
    }

    /// Planted events the recognizer is expected to find.
    #[getter]
    fn ledger(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, &self.fleet.ledger)
    }

    #[getter]
    fn vessel_count(&self) -> usize {
        self.fleet.vessel_count
    }

    fn __len__(&self) -> usize {
        self.fleet.reports.len()
    }

    /// Replays the fleet against its own ports and areas.
    #[pyo3(signature = (config=None, collect_raw=false))]
    fn run(
        &self,
        py: Python<'_>,
        config: Option<PyRef<'_, PyConfig>>,
        collect_raw: bool,
    ) -> PyResult<PyRunResult> {
        let cfg = config_or_default(config);
        cfg.validate().map_err(value_err)?;
        let grid = GridIndex::build(self.fleet.areas.clone(), self.fleet.ports.clone(), cfg.grid)
            .map_err(value_err)?;
        run(py, self.fleet.reports.clone(), &cfg, grid, collect_raw)
    }
}

/// Deterministic synthetic fleet; `plants` scenarios of each pairwise CE kind.
#[pyfunction]
#[pyo3(signature = (n_vessels=100, duration_s=86_400, seed=0, plants=0, increase_factor=1, straight_only=false))]
fn generate(
    n_vessels: usize,
    duration_s: i64,
    seed: u64,
    plants: usize,
    increase_factor: usize,
    straight_only: bool,
) -> PyResult<PyFleet> {
    let spec = SyntheticFleetSpec {
        n_vessels,
        duration_s,
        increase_factor,
        plants: PlantCounts {
            suspicious_delays: plants,
            rendezvous: plants,
            fast_approaches: plants,
            pickings: plants,
        },
        mix: if straight_only {
            FleetMix::straight_only()
        } else {
            FleetMix::default()
        },
        ..Default::default()
    };
    Ok(PyFleet {
        fleet: runtime::generate(&spec, seed).map_err(value_err)?,
    })
}

/// Great-circle distance in meters between two `(lon, lat)` points.
#[pyfunction]
fn haversine(a: (f64, f64), b: (f64, f64)) -> PyResult<f64> {
    Ok(geo::haversine(point(a)?, point(b)?))
}

#[pyfunction]
fn compression_ratio(raw_count: u64, critical_count: u64) -> PyResult<f64> {
    synopsis::compression_ratio(raw_count, critical_count).map_err(value_err)
}

/// Mean per-vessel RMSE in meters of raw rows against a synopsis.
#[pyfunction]
fn fleet_rmse(
    rows: Vec<(u32, f64, f64, i64)>,
    synopsis: Vec<PyRef<'_, PyCriticalPoint>>,
) -> PyResult<Option<f64>> {
    let cps = synopsis
        .iter()
        .map(|c| c.to_core())
        .collect::<PyResult<Vec<_>>>()?;
    Ok(synopsis::fleet_rmse(&reports(rows)?, &cps))
}

/// Maximal intervals `(start, end)` of a fluent; `end` is None while it holds.
#[pyfunction]
fn holds_for(inits: Vec<i64>, terms: Vec<i64>) -> Vec<(i64, Option<i64>)> {
    let ts = |v: Vec<i64>| v.into_iter().map(Timestamp).collect::<Vec<_>>();
    interval::holds_for(&ts(inits), &ts(terms))
        .intervals()
        .iter()
        .map(|i| (i.start.0, i.end.map(|e| e.0)))
        .collect()
}

#[pyfunction]
fn point_in_polygon(p: (f64, f64), ring: Vec<(f64, f64)>) -> PyResult<bool> {
    let ring = ring.into_iter().map(point).collect::<PyResult<Vec<_>>>()?;
    Ok(pip(point(p)?, &ring))
}

/// Number of areas in a GeoJSON file and ports in a CSV file, after
/// validating them against the default grid.
#[pyfunction]
#[pyo3(signature = (areas=None, ports=None))]
fn check_geometry(areas: Option<PathBuf>, ports: Option<PathBuf>) -> PyResult<(usize, usize)> {
    let open = |p: &PathBuf| {
        File::open(p).map_err(|e| PyIOError::new_err(format!("{}: {e}", p.display())))
    };
    let a = match &areas {
        Some(p) => load_areas(open(p)?).map_err(value_err)?,
        None => Vec::new(),
    };
    let p = match &ports {
        Some(p) => {
            load_ports(open(p)?, vesselwatch::grid::DEFAULT_PORT_RADIUS_M).map_err(value_err)?
        }
        None => Vec::new(),
    };
    let counts = (a.len(), p.len());
    GridIndex::build(a, p, GridConfig::default()).map_err(value_err)?;
    Ok(counts)
}

#[pymodule]
#[pyo3(name = "vesselwatch")]
fn pyvesselwatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyCriticalPoint>()?;
    m.add_class::<PyTracker>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyFleet>()?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(haversine, m)?)?;
    m.add_function(wrap_pyfunction!(compression_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(fleet_rmse, m)?)?;
    m.add_function(wrap_pyfunction!(holds_for, m)?)?;
    m.add_function(wrap_pyfunction!(point_in_polygon, m)?)?;
    m.add_function(wrap_pyfunction!(check_geometry, m)?)?;
    Ok(())
}
