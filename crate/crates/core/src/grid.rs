//! Equal-cell grid over the surveillance area. Areas and ports are assigned
//! to the cells they overlap once at build time; vessel cells are refreshed
//! before every recognition query.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine, heading_delta, initial_bearing, GeoPoint, EARTH_RADIUS_M};

/// Polygon overlap tests run against cells grown by this many degrees so that
/// geometry touching a cell edge is registered on both sides.
const CELL_EPS_DEG: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} lies outside the grid bounding box")]
    GeometryOutOfBounds(String),
    #[error("polygon {0} needs at least three distinct vertices")]
    DegeneratePolygon(u32),
    #[error("search radius {radius_m} m exceeds the smallest cell extent {cell_m:.0} m")]
    RadiusExceedsCell { radius_m: f64, cell_m: f64 },
    #[error("vessel {0} is not in the current snapshot")]
    UnknownVessel(u32),
    #[error("geometry file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lon..=self.max_lon).contains(&p.lon)
            && (self.min_lat..=self.max_lat).contains(&p.lat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub bbox: BBox,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    /// The Aegean and surrounding seas.
    fn default() -> Self {
        GridConfig {
            bbox: BBox {
                min_lon: 20.0,
                min_lat: 34.0,
                max_lon: 28.0,
                max_lat: 41.0,
            },
            nx: 30,
            ny: 30,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        let b = &self.bbox;
        if self.nx == 0 || self.ny == 0 {
            return Err(GridError::InvalidConfig(
                "cell counts must be at least 1".into(),
            ));
        }
        let finite = [b.min_lon, b.min_lat, b.max_lon, b.max_lat]
            .iter()
            .all(|v| v.is_finite());
        if !finite || b.min_lon >= b.max_lon || b.min_lat >= b.max_lat {
            return Err(GridError::InvalidConfig(format!(
                "degenerate bounding box {b:?}"
            )));
        }
        Ok(())
    }

    pub fn with_cells(self, nx: usize, ny: usize) -> Self {
        GridConfig { nx, ny, ..self }
    }

    fn cell_w(&self) -> f64 {
        (self.bbox.max_lon - self.bbox.min_lon) / self.nx as f64
    }

    fn cell_h(&self) -> f64 {
        (self.bbox.max_lat - self.bbox.min_lat) / self.ny as f64
    }

    /// Smallest east-west or north-south cell extent anywhere in the box, in meters.
    pub fn min_cell_extent_m(&self) -> f64 {
        let m_per_deg = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let worst_lat = self
            .bbox
            .min_lat
            .abs()
            .max(self.bbox.max_lat.abs())
            .min(90.0);
        let width = self.cell_w() * m_per_deg * worst_lat.to_radians().cos();
        width.min(self.cell_h() * m_per_deg)
    }

    /// Lon/lat rectangle of a cell.
    pub fn cell_rect(&self, c: CellId) -> (f64, f64, f64, f64) {
        let x0 = self.bbox.min_lon + c.ix as f64 * self.cell_w();
        let y0 = self.bbox.min_lat + c.iy as f64 * self.cell_h();
        (x0, y0, x0 + self.cell_w(), y0 + self.cell_h())
    }

    pub fn cell_center(&self, c: CellId) -> GeoPoint {
        let (x0, y0, x1, y1) = self.cell_rect(c);
        GeoPoint {
            lon: (x0 + x1) / 2.0,
            lat: (y0 + y1) / 2.0,
        }
    }

    fn index(&self, c: CellId) -> usize {
        c.iy as usize * self.nx + c.ix as usize
    }

    /// The cell and its (up to eight) neighbours.
    pub fn neighbourhood(&self, c: CellId) -> impl Iterator<Item = CellId> + '_ {
        let (ix, iy) = (c.ix as i64, c.iy as i64);
        (iy - 1..=iy + 1).flat_map(move |y| {
            (ix - 1..=ix + 1).filter_map(move |x| {
                (x >= 0 && y >= 0 && (x as usize) < self.nx && (y as usize) < self.ny).then_some(
                    CellId {
                        ix: x as u32,
                        iy: y as u32,
                    },
                )
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub ix: u32,
    pub iy: u32,
}

/// Cell containing `p`; points outside the box are clamped to the border cells.
pub fn cell_of(p: GeoPoint, cfg: &GridConfig) -> CellId {
    let fx = ((p.lon - cfg.bbox.min_lon) / cfg.cell_w()).floor();
    let fy = ((p.lat - cfg.bbox.min_lat) / cfg.cell_h()).floor();
    CellId {
        ix: fx.clamp(0.0, (cfg.nx - 1) as f64) as u32,
        iy: fy.clamp(0.0, (cfg.ny - 1) as f64) as u32,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaKind {
    Protected,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaPolygon {
    pub id: u32,
    /// Closing vertex optional.
    pub ring: Vec<GeoPoint>,
    pub kind: AreaKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub id: u32,
    pub pos: GeoPoint,
    pub radius_m: f64,
}

pub const DEFAULT_PORT_RADIUS_M: f64 = 2000.0;

/// Planar point-in-polygon by ray crossing; points on an edge count as inside.
pub fn point_in_polygon(p: GeoPoint, ring: &[GeoPoint]) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn cross(o: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon)
}

fn on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    cross(a, b, p) == 0.0
        && p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

fn segments_intersect(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

fn polygon_overlaps_rect(ring: &[GeoPoint], (x0, y0, x1, y1): (f64, f64, f64, f64)) -> bool {
    if ring
        .iter()
        .any(|v| v.lon >= x0 && v.lon <= x1 && v.lat >= y0 && v.lat <= y1)
    {
        return true;
    }
    let corners = [
        GeoPoint { lon: x0, lat: y0 },
        GeoPoint { lon: x1, lat: y0 },
        GeoPoint { lon: x1, lat: y1 },
        GeoPoint { lon: x0, lat: y1 },
    ];
    if corners.iter().any(|c| point_in_polygon(*c, ring)) {
        return true;
    }
    let n = ring.len();
    (0..n).any(|i| {
        (0..4).any(|k| {
            segments_intersect(ring[i], ring[(i + 1) % n], corners[k], corners[(k + 1) % 4])
        })
    })
}

#[derive(Debug, Clone)]
pub struct GridIndex {
    cfg: GridConfig,
    areas: Vec<AreaPolygon>,
    ports: Vec<Port>,
    cell_areas: Vec<Vec<usize>>,
    cell_ports: Vec<Vec<usize>>,
    vessels: HashMap<u32, (GeoPoint, CellId)>,
    cell_vessels: HashMap<CellId, Vec<u32>>,
}

impl GridIndex {
    pub fn build(
        areas: Vec<AreaPolygon>,
        ports: Vec<Port>,
        cfg: GridConfig,
    ) -> Result<GridIndex, GridError> {
        cfg.validate()?;
        let cells = cfg.nx * cfg.ny;
        let mut cell_areas = vec![Vec::new(); cells];
        let mut cell_ports = vec![Vec::new(); cells];

        let mut areas = areas;
        for (k, area) in areas.iter_mut().enumerate() {
            if area.ring.len() > 1 && area.ring.first() == area.ring.last() {
                area.ring.pop();
            }
            if area.ring.len() < 3 {
                return Err(GridError::DegeneratePolygon(area.id));
            }
            if let Some(v) = area.ring.iter().find(|v| !cfg.bbox.contains(**v)) {
                return Err(GridError::GeometryOutOfBounds(format!(
                    "area {} vertex {v:?}",
                    area.id
                )));
            }
            let lo = cell_of(
                GeoPoint {
                    lon: area
                        .ring
                        .iter()
                        .map(|v| v.lon)
                        .fold(f64::INFINITY, f64::min)
                        - CELL_EPS_DEG,
                    lat: area
                        .ring
                        .iter()
                        .map(|v| v.lat)
                        .fold(f64::INFINITY, f64::min)
                        - CELL_EPS_DEG,
                },
                &cfg,
            );
            let hi = cell_of(
                GeoPoint {
                    lon: area
                        .ring
                        .iter()
                        .map(|v| v.lon)
                        .fold(f64::NEG_INFINITY, f64::max)
                        + CELL_EPS_DEG,
                    lat: area
                        .ring
                        .iter()
                        .map(|v| v.lat)
                        .fold(f64::NEG_INFINITY, f64::max)
                        + CELL_EPS_DEG,
                },
                &cfg,
            );
            for iy in lo.iy..=hi.iy {
                for ix in lo.ix..=hi.ix {
                    let c = CellId { ix, iy };
                    let (x0, y0, x1, y1) = cfg.cell_rect(c);
                    let grown = (
                        x0 - CELL_EPS_DEG,
                        y0 - CELL_EPS_DEG,
                        x1 + CELL_EPS_DEG,
                        y1 + CELL_EPS_DEG,
                    );
                    if polygon_overlaps_rect(&area.ring, grown) {
                        cell_areas[cfg.index(c)].push(k);
                    }
                }
            }
        }

        let cell_m = cfg.min_cell_extent_m();
        for (k, port) in ports.iter().enumerate() {
            if !cfg.bbox.contains(port.pos) {
                return Err(GridError::GeometryOutOfBounds(format!(
                    "port {} at {:?}",
                    port.id, port.pos
                )));
            }
            if port.radius_m.is_nan() || port.radius_m <= 0.0 {
                return Err(GridError::InvalidConfig(format!(
                    "port {} radius must be positive",
                    port.id
                )));
            }
            if port.radius_m > cell_m {
                return Err(GridError::RadiusExceedsCell {
                    radius_m: port.radius_m,
                    cell_m,
                });
            }
            cell_ports[cfg.index(cell_of(port.pos, &cfg))].push(k);
        }

        Ok(GridIndex {
            cfg,
            areas,
            ports,
            cell_areas,
            cell_ports,
            vessels: HashMap::new(),
            cell_vessels: HashMap::new(),
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn areas(&self) -> &[AreaPolygon] {
        &self.areas
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn cell_of(&self, p: GeoPoint) -> CellId {
        cell_of(p, &self.cfg)
    }

    /// Ids of areas registered in cell `c`.
    pub fn areas_in_cell(&self, c: CellId) -> Vec<u32> {
        self.cell_areas[self.cfg.index(c)]
            .iter()
            .map(|&k| self.areas[k].id)
            .collect()
    }

    /// Ids of the areas containing `p`, checking only polygons registered in its cell.
    pub fn in_area(&self, p: GeoPoint) -> Vec<u32> {
        let c = self.cell_of(p);
        self.cell_areas[self.cfg.index(c)]
            .iter()
            .map(|&k| &self.areas[k])
            .filter(|a| point_in_polygon(p, &a.ring))
            .map(|a| a.id)
            .collect()
    }

    pub fn near_ports(&self, p: GeoPoint) -> bool {
        self.cfg.neighbourhood(self.cell_of(p)).any(|c| {
            self.cell_ports[self.cfg.index(c)]
                .iter()
                .any(|&k| haversine(p, self.ports[k].pos) <= self.ports[k].radius_m)
        })
    }

    /// Replaces the vessel snapshot used by the proximity queries.
    pub fn refresh_vessels<I: IntoIterator<Item = (u32, GeoPoint)>>(&mut self, positions: I) {
        self.vessels.clear();
        self.cell_vessels.clear();
        for (id, pos) in positions {
            let c = self.cell_of(pos);
            self.vessels.insert(id, (pos, c));
        }
        for (&id, &(_, c)) in &self.vessels {
            self.cell_vessels.entry(c).or_default().push(id);
        }
        for list in self.cell_vessels.values_mut() {
            list.sort_unstable();
        }
    }

    pub fn vessel_position(&self, v: u32) -> Option<GeoPoint> {
        self.vessels.get(&v).map(|(p, _)| *p)
    }

    /// Other vessels within `radius_m`, sorted by id.
    pub fn nearby_vessels(&self, v: u32, radius_m: f64) -> Result<Vec<(u32, GeoPoint)>, GridError> {
        let cell_m = self.cfg.min_cell_extent_m();
        if radius_m > cell_m {
            return Err(GridError::RadiusExceedsCell { radius_m, cell_m });
        }
        let &(pos, cell) = self.vessels.get(&v).ok_or(GridError::UnknownVessel(v))?;
        let mut out: Vec<(u32, GeoPoint)> = self
            .cfg
            .neighbourhood(cell)
            .filter_map(|c| self.cell_vessels.get(&c))
            .flatten()
            .filter(|&&u| u != v)
            .filter_map(|&u| {
                let p = self.vessels[&u].0;
                (haversine(pos, p) <= radius_m).then_some((u, p))
            })
            .collect();
        out.sort_unstable_by_key(|(u, _)| *u);
        Ok(out)
    }

    /// Whether `heading` points within half of `cone_deg` at some vessel inside `radius_m`.
    pub fn heading_to_vessels(
        &self,
        v: u32,
        heading: f64,
        cone_deg: f64,
        radius_m: f64,
    ) -> Result<bool, GridError> {
        let pos = self.vessel_position(v).ok_or(GridError::UnknownVessel(v))?;
        Ok(self
            .nearby_vessels(v, radius_m)?
            .iter()
            .any(|(_, p)| heading_delta(initial_bearing(pos, *p), heading) <= cone_deg / 2.0))
    }
}

#[derive(Deserialize)]
struct FeatureCollection {
    features: Vec<Feature>,
}

#[derive(Deserialize)]
struct Feature {
    geometry: Geometry,
    #[serde(default)]
    properties: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

/// Reads Polygon features (outer ring only) from a GeoJSON FeatureCollection.
/// Features without a numeric `id` property are numbered by position.
pub fn load_areas<R: Read>(input: R) -> Result<Vec<AreaPolygon>, GridError> {
    let fc: FeatureCollection =
        serde_json::from_reader(input).map_err(|e| GridError::Parse(e.to_string()))?;
    fc.features
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            if f.geometry.kind != "Polygon" {
                return Err(GridError::Parse(format!(
                    "feature {i}: unsupported geometry {}",
                    f.geometry.kind
                )));
            }
            let outer = f
                .geometry
                .coordinates
                .first()
                .ok_or_else(|| GridError::Parse(format!("feature {i}: no ring")))?;
            let ring = outer
                .iter()
                .map(|&[lon, lat]| {
                    GeoPoint::new(lon, lat).map_err(|e| GridError::Parse(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let id = f
                .properties
                .get("id")
                .and_then(|v| v.as_u64())
                .map_or(i as u32, |v| v as u32);
            let kind = match f.properties.get("kind").and_then(|v| v.as_str()) {
                Some("other") => AreaKind::Other,
                _ => AreaKind::Protected,
            };
            Ok(AreaPolygon { id, ring, kind })
        })
        .collect()
}

/// Reads `id,lon,lat[,radius_m]` rows; a header row is optional.
pub fn load_ports<R: Read>(input: R, default_radius_m: f64) -> Result<Vec<Port>, GridError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| GridError::Parse(e.to_string()))?;
        let fields: Vec<&str> = rec.iter().map(str::trim).collect();
        let Ok(id) = fields.first().copied().unwrap_or_default().parse::<u32>() else {
            if line == 0 {
                continue;
            }
            return Err(GridError::Parse(format!("ports line {}: bad id", line + 1)));
        };
        let num = |i: usize| -> Result<f64, GridError> {
            fields
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| GridError::Parse(format!("ports line {}: bad column {i}", line + 1)))
        };
        let pos = GeoPoint::new(num(1)?, num(2)?).map_err(|e| GridError::Parse(e.to_string()))?;
        let radius_m = if fields.len() > 3 {
            num(3)?
        } else {
            default_radius_m
        };
        out.push(Port { id, pos, radius_m });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(n: usize) -> GridConfig {
        GridConfig {
            bbox: BBox {
                min_lon: 0.0,
                min_lat: 0.0,
                max_lon: 10.0,
                max_lat: 10.0,
            },
            nx: n,
            ny: n,
        }
    }

    fn gp(lon: f64, lat: f64) -> GeoPoint {
        GeoPoint { lon, lat }
    }

    fn square(id: u32, x0: f64, y0: f64, x1: f64, y1: f64) -> AreaPolygon {
        AreaPolygon {
            id,
            ring: vec![gp(x0, y0), gp(x1, y0), gp(x1, y1), gp(x0, y1)],
            kind: AreaKind::Protected,
        }
    }

    fn registered_cells(index: &GridIndex, id: u32) -> usize {
        let cfg = index.config();
        (0..cfg.ny as u32)
            .flat_map(|iy| (0..cfg.nx as u32).map(move |ix| CellId { ix, iy }))
            .filter(|&c| index.areas_in_cell(c).contains(&id))
            .count()
    }

    #[test]
    fn cell_of_examples() {
        let cfg = unit_grid(10);
        assert_eq!(cell_of(gp(3.5, 7.2), &cfg), CellId { ix: 3, iy: 7 });
        assert_eq!(cell_of(gp(0.0, 0.0), &cfg), CellId { ix: 0, iy: 0 });
        assert_eq!(cell_of(gp(10.0, 10.0), &cfg), CellId { ix: 9, iy: 9 });
        // shared edge goes to the higher cell
        assert_eq!(cell_of(gp(4.0, 4.0), &cfg), CellId { ix: 4, iy: 4 });
        assert_eq!(cell_of(gp(-5.0, 50.0), &cfg), CellId { ix: 0, iy: 9 });
    }

    #[test]
    fn square_over_four_cells() {
        let index =
            GridIndex::build(vec![square(1, 2.5, 2.5, 3.5, 3.5)], vec![], unit_grid(10)).unwrap();
        assert_eq!(registered_cells(&index, 1), 4);
        assert_eq!(index.in_area(gp(3.0, 3.0)), vec![1]);
        assert!(index.in_area(gp(5.0, 5.0)).is_empty());
    }

    #[test]
    fn small_polygon_listed_once() {
        let index =
            GridIndex::build(vec![square(2, 2.2, 2.2, 2.8, 2.8)], vec![], unit_grid(10)).unwrap();
        assert_eq!(registered_cells(&index, 2), 1);
    }

    #[test]
    fn no_areas_no_registrations() {
        let index = GridIndex::build(vec![], vec![], unit_grid(4)).unwrap();
        assert!(index.in_area(gp(1.0, 1.0)).is_empty());
        assert!(index.areas_in_cell(CellId { ix: 0, iy: 0 }).is_empty());
    }

    #[test]
    fn concave_notch_is_outside() {
        // U shape open to the north
        let u = AreaPolygon {
            id: 3,
            ring: vec![
                gp(1.0, 1.0),
                gp(4.0, 1.0),
                gp(4.0, 4.0),
                gp(3.0, 4.0),
                gp(3.0, 2.0),
                gp(2.0, 2.0),
                gp(2.0, 4.0),
                gp(1.0, 4.0),
            ],
            kind: AreaKind::Protected,
        };
        let index = GridIndex::build(vec![u], vec![], unit_grid(10)).unwrap();
        assert!(index.in_area(gp(2.5, 3.0)).is_empty());
        assert_eq!(index.in_area(gp(1.5, 3.0)), vec![3]);
        // boundary counts as inside
        assert_eq!(index.in_area(gp(2.5, 2.0)), vec![3]);
    }

    #[test]
    fn out_of_bounds_geometry_rejected() {
        let err = GridIndex::build(vec![square(1, 9.0, 9.0, 11.0, 11.0)], vec![], unit_grid(10))
            .unwrap_err();
        assert!(matches!(err, GridError::GeometryOutOfBounds(_)));
    }

    fn aegean() -> GridConfig {
        GridConfig::default()
    }

    #[test]
    fn port_proximity() {
        let port = gp(24.0, 37.0);
        let index = GridIndex::build(
            vec![],
            vec![Port {
                id: 1,
                pos: port,
                radius_m: 2000.0,
            }],
            aegean(),
        )
        .unwrap();
        assert!(index.near_ports(port));
        assert!(!index.near_ports(port.destination(90.0, 10_000.0)));
    }

    #[test]
    fn port_in_adjacent_cell() {
        let cfg = aegean();
        // a port just east of a cell edge, a query point 1.5 km west of it
        let edge = cfg.cell_rect(CellId { ix: 10, iy: 10 }).2;
        let port = gp(edge + 0.005, 37.5);
        let p = port.destination(270.0, 1500.0);
        assert_ne!(cell_of(p, &cfg), cell_of(port, &cfg));
        let index = GridIndex::build(
            vec![],
            vec![Port {
                id: 1,
                pos: port,
                radius_m: 2000.0,
            }],
            cfg,
        )
        .unwrap();
        assert!(index.near_ports(p));
    }

    #[test]
    fn oversized_port_radius_rejected() {
        let cfg = aegean().with_cells(90, 90);
        let err = GridIndex::build(
            vec![],
            vec![Port {
                id: 1,
                pos: gp(24.0, 37.0),
                radius_m: 9000.0,
            }],
            cfg,
        )
        .unwrap_err();
        assert!(matches!(err, GridError::RadiusExceedsCell { .. }));
    }

    #[test]
    fn nearby_vessel_examples() {
        let mut index = GridIndex::build(vec![], vec![], aegean()).unwrap();
        let a = gp(24.0, 37.0);
        index.refresh_vessels([(1, a)]);
        assert!(index.nearby_vessels(1, 500.0).unwrap().is_empty());
        assert_eq!(
            index.nearby_vessels(2, 500.0),
            Err(GridError::UnknownVessel(2))
        );

        let b = a.destination(45.0, 100.0);
        index.refresh_vessels([(1, a), (2, b)]);
        assert_eq!(index.nearby_vessels(1, 500.0).unwrap(), vec![(2, b)]);
        assert_eq!(index.nearby_vessels(2, 500.0).unwrap(), vec![(1, a)]);

        index.refresh_vessels([(1, a), (2, a.destination(90.0, 50_000.0))]);
        assert!(index.nearby_vessels(1, 1000.0).unwrap().is_empty());
    }

    #[test]
    fn heading_cone() {
        let mut index = GridIndex::build(vec![], vec![], aegean()).unwrap();
        let a = gp(24.0, 37.0);
        index.refresh_vessels([(1, a), (2, a.destination(0.0, 2000.0))]);
        assert!(index.heading_to_vessels(1, 0.0, 30.0, 5000.0).unwrap());
        assert!(!index.heading_to_vessels(1, 180.0, 30.0, 5000.0).unwrap());
        index.refresh_vessels([(1, a), (2, a.destination(10.0, 2000.0))]);
        assert!(index.heading_to_vessels(1, 0.0, 30.0, 5000.0).unwrap());
        index.refresh_vessels([(1, a), (2, a.destination(20.0, 2000.0))]);
        assert!(!index.heading_to_vessels(1, 0.0, 30.0, 5000.0).unwrap());
    }

    #[test]
    fn loads_geometry_files() {
        let geojson = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"id":7,"kind":"protected"},
             "geometry":{"type":"Polygon","coordinates":[[[24,37],[25,37],[25,38],[24,37]]]}}]}"#;
        let areas = load_areas(geojson.as_bytes()).unwrap();
        assert_eq!(areas[0].id, 7);
        assert_eq!(areas[0].ring.len(), 4);
        let ports = load_ports(
            "id,lon,lat\n1,23.6,37.9\n2,25.1,35.3,1500\n".as_bytes(),
            2000.0,
        )
        .unwrap();
        assert_eq!(ports.len(), 2);
        assert_eq!(ports[1].radius_m, 1500.0);
    }

    proptest! {
        #[test]
        fn nearby_matches_brute_force(points in prop::collection::vec((20.0f64..28.0, 34.0f64..41.0), 1..40), spread in 0.001f64..0.2) {
            let mut index = GridIndex::build(vec![], vec![], aegean()).unwrap();
            // cluster around one spot so that some pairs are close
            let snapshot: Vec<(u32, GeoPoint)> = points.iter().enumerate()
                .map(|(i, &(x, y))| (i as u32, gp(24.0 + (x - 24.0) * spread, 37.0 + (y - 37.5) * spread)))
                .collect();
            index.refresh_vessels(snapshot.iter().copied());
            for &(v, p) in &snapshot {
                let got = index.nearby_vessels(v, 5000.0).unwrap();
                let want: Vec<_> = snapshot.iter().filter(|&&(u, q)| u != v && haversine(p, q) <= 5000.0).copied().collect();
                prop_assert_eq!(&got, &want);
                for (u, _) in got {
                    prop_assert!(index.nearby_vessels(u, 5000.0).unwrap().iter().any(|(w, _)| *w == v));
                }
            }
        }

        #[test]
        fn cell_of_total_and_in_range(lon in -180.0f64..180.0, lat in -90.0f64..90.0, n in 1usize..100) {
            let cfg = unit_grid(n);
            let c = cell_of(gp(lon, lat), &cfg);
            prop_assert!((c.ix as usize) < n && (c.iy as usize) < n);
            prop_assert_eq!(c, cell_of(gp(lon, lat), &cfg));
        }
    }
}
