//! Reading position streams and writing run outputs.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::RuntimeError;
use crate::geo::GeoPoint;
use crate::grid::{AreaKind, AreaPolygon, CellId, Port};
use crate::noise::PositionReport;
use crate::patterns::{CeInstance, CeName, CeWhen};

/// Streams `mmsi,lon,lat,tau` records. A leading header line is skipped;
/// any other unparsable line yields a `MalformedRecord` and reading goes on.
pub fn read_positions<R: Read>(
    input: R,
) -> impl Iterator<Item = Result<PositionReport, RuntimeError>> {
    BufReader::new(input)
        .lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line_no = i as u64 + 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(RuntimeError::Io(e.to_string()))),
            };
            let line = line.trim();
            if line.is_empty() {
                return None;
            }
            match parse_position(line) {
                Ok(r) => Some(Ok(r)),
                Err(_) if line_no == 1 && line.to_ascii_lowercase().contains("mmsi") => None,
                Err(reason) => Some(Err(RuntimeError::MalformedRecord {
                    line: line_no,
                    reason,
                })),
            }
        })
}

fn parse_position(line: &str) -> Result<PositionReport, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let mmsi: u32 = fields[0]
        .parse()
        .map_err(|_| format!("bad mmsi {:?}", fields[0]))?;
    let lon: f64 = fields[1]
        .parse()
        .map_err(|_| format!("bad lon {:?}", fields[1]))?;
    let lat: f64 = fields[2]
        .parse()
        .map_err(|_| format!("bad lat {:?}", fields[2]))?;
    let tau: i64 = fields[3]
        .parse()
        .map_err(|_| format!("bad tau {:?}", fields[3]))?;
    PositionReport::new(mmsi, lon, lat, tau).map_err(|e| e.to_string())
}

pub fn write_positions<W: Write>(reports: &[PositionReport], out: W) -> Result<(), RuntimeError> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "mmsi,lon,lat,tau")?;
    for r in reports {
        writeln!(
            w,
            "{},{:.6},{:.6},{}",
            r.mmsi, r.pos.lon, r.pos.lat, r.tau.0
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the CE output; `t_end` is null while the CE still holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeRecord {
    pub name: CeName,
    pub v1: u32,
    pub v2: Option<u32>,
    pub t_start: i64,
    pub t_end: Option<i64>,
    pub lon: Option<f64>,
    pub lat: Option<f64>,
    pub cell: Option<CellId>,
}

impl From<&CeInstance> for CeRecord {
    fn from(c: &CeInstance) -> Self {
        CeRecord {
            name: c.name,
            v1: c.v1,
            v2: c.v2,
            t_start: c.when.start().0,
            t_end: c.when.end().map(|t| t.0),
            lon: c.pos.map(|p| p.lon),
            lat: c.pos.map(|p| p.lat),
            cell: c.cell,
        }
    }
}

impl CeRecord {
    pub fn is_instantaneous(&self) -> bool {
        matches!(self.name, CeName::FastApproach | CeName::PossiblePicking)
    }

    pub fn to_instance(&self) -> CeInstance {
        use crate::geo::Timestamp;
        use crate::interval::Interval;
        let start = Timestamp(self.t_start);
        let when = if self.is_instantaneous() {
            CeWhen::At(start)
        } else {
            CeWhen::During(Interval {
                start,
                end: self.t_end.map(Timestamp),
            })
        };
        CeInstance {
            name: self.name,
            v1: self.v1,
            v2: self.v2,
            when,
            pos: self
                .lon
                .zip(self.lat)
                .map(|(lon, lat)| GeoPoint { lon, lat }),
            cell: self.cell,
        }
    }
}

pub fn write_ces_jsonl<W: Write>(ces: &[CeInstance], out: W) -> Result<(), RuntimeError> {
    let mut w = std::io::BufWriter::new(out);
    for c in ces {
        serde_json::to_writer(&mut w, &CeRecord::from(c))
            .map_err(|e| RuntimeError::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ces_jsonl<R: Read>(input: R) -> Result<Vec<CeRecord>, RuntimeError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| RuntimeError::MalformedRecord {
                line: i as u64 + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

pub fn write_ports<W: Write>(ports: &[Port], out: W) -> Result<(), RuntimeError> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "id,lon,lat,radius_m")?;
    for p in ports {
        writeln!(w, "{},{},{},{}", p.id, p.pos.lon, p.pos.lat, p.radius_m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_areas<W: Write>(areas: &[AreaPolygon], out: W) -> Result<(), RuntimeError> {
    let features: Vec<_> = areas
        .iter()
        .map(|a| {
            let ring: Vec<[f64; 2]> = a.ring.iter().map(|p| [p.lon, p.lat]).collect();
            let kind = match a.kind {
                AreaKind::Protected => "protected",
                AreaKind::Other => "other",
            };
            json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [ring] },
                "properties": { "id": a.id, "kind": kind },
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_writer_pretty(out, &doc).map_err(|e| RuntimeError::Io(e.to_string()))
}
