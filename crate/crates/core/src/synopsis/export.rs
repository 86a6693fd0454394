use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::json;

use super::SynopsisError;
use crate::geo::{GeoPoint, Timestamp, VelocityVector};
use crate::tracker::CriticalPoint;

pub const CSV_HEADER: [&str; 8] = [
    "MMSI",
    "t_start",
    "t_end",
    "lon",
    "lat",
    "event_type",
    "speed",
    "heading",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    GeoJson,
    Kml,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::GeoJson => "geojson",
            ExportFormat::Kml => "kml",
        }
    }

    pub fn write<W: Write>(self, points: &[CriticalPoint], out: W) -> Result<(), SynopsisError> {
        match self {
            ExportFormat::Csv => write_csv(points, out),
            ExportFormat::GeoJson => write_geojson(points, out),
            ExportFormat::Kml => write_kml(points, out),
        }
    }
}

impl FromStr for ExportFormat {
    type Err = SynopsisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "geojson" | "json" => Ok(ExportFormat::GeoJson),
            "kml" => Ok(ExportFormat::Kml),
            other => Err(SynopsisError::Parse(format!(
                "unknown export format {other:?}"
            ))),
        }
    }
}

fn csv_err(e: csv::Error) -> SynopsisError {
    SynopsisError::IoFailure(e.to_string())
}

/// Coordinates are written with six decimals; speed and heading use the
/// shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(points: &[CriticalPoint], out: W) -> Result<(), SynopsisError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for c in points {
        w.write_record([
            c.mmsi.to_string(),
            c.t_start.0.to_string(),
            c.t_end.0.to_string(),
            format!("{:.6}", c.pos.lon),
            format!("{:.6}", c.pos.lat),
            c.annotation.as_str().to_string(),
            c.velocity.speed.to_string(),
            c.velocity.heading.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<CriticalPoint>, SynopsisError> {
    fn field<T: FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, SynopsisError> {
        let raw = rec
            .get(i)
            .ok_or_else(|| SynopsisError::Parse(format!("missing column {i}")))?;
        raw.trim().parse().map_err(|_| {
            SynopsisError::Parse(format!("bad value {raw:?} in column {}", CSV_HEADER[i]))
        })
    }
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let annotation: String = field(&rec, 5)?;
        let pos = GeoPoint::new(field(&rec, 3)?, field(&rec, 4)?)
            .map_err(|e| SynopsisError::Parse(e.to_string()))?;
        out.push(CriticalPoint {
            mmsi: field(&rec, 0)?,
            t_start: Timestamp(field(&rec, 1)?),
            t_end: Timestamp(field(&rec, 2)?),
            pos,
            annotation: annotation
                .parse()
                .map_err(|e: crate::tracker::TrackerError| SynopsisError::Parse(e.to_string()))?,
            velocity: VelocityVector {
                speed: field(&rec, 6)?,
                heading: field(&rec, 7)?,
            },
        });
    }
    Ok(out)
}

pub fn write_geojson<W: Write>(points: &[CriticalPoint], mut out: W) -> Result<(), SynopsisError> {
    let features: Vec<_> = points
        .iter()
        .map(|c| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [c.pos.lon, c.pos.lat] },
                "properties": {
                    "mmsi": c.mmsi,
                    "t_start": c.t_start.0,
                    "t_end": c.t_end.0,
                    "event_type": c.annotation.as_str(),
                    "speed": c.velocity.speed,
                    "heading": c.velocity.heading,
                },
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_writer_pretty(&mut out, &doc)
        .map_err(|e| SynopsisError::IoFailure(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// One placemark per point plus one line per vessel with at least two points.
pub fn write_kml<W: Write>(points: &[CriticalPoint], mut out: W) -> Result<(), SynopsisError> {
    let mut doc = String::new();
    doc.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    doc.push_str("<kml xmlns=\"http://www.opengis.net/kml/2.2\">\n<Document>\n");
    let mut tracks: BTreeMap<u32, Vec<&CriticalPoint>> = BTreeMap::new();
    for c in points {
        tracks.entry(c.mmsi).or_default().push(c);
        let _ = write!(
            doc,
            "<Placemark><name>{}</name><description>vessel {} from {} to {}, {:.1} kn, {:.0} deg</description>\
             <Point><coordinates>{:.6},{:.6}</coordinates></Point></Placemark>\n",
            c.annotation, c.mmsi, c.t_start, c.t_end, c.velocity.speed, c.velocity.heading, c.pos.lon, c.pos.lat
        );
    }
    for (mmsi, mut track) in tracks {
        if track.len() < 2 {
            continue;
        }
        track.sort_by_key(|c| c.sort_key());
        let coords: Vec<String> = track
            .iter()
            .map(|c| format!("{:.6},{:.6}", c.pos.lon, c.pos.lat))
            .collect();
        let _ = writeln!(
            doc,
            "<Placemark><name>{mmsi}</name><LineString><coordinates>{}</coordinates></LineString></Placemark>",
            coords.join(" ")
        );
    }
    doc.push_str("</Document>\n</kml>\n");
    out.write_all(doc.as_bytes())?;
    Ok(())
}

/// Writes `<mmsi>.<ext>` for every vessel into `dir`.
pub fn write_per_vessel(
    dir: &Path,
    points: &[CriticalPoint],
    format: ExportFormat,
) -> Result<Vec<PathBuf>, SynopsisError> {
    std::fs::create_dir_all(dir)?;
    let mut by_vessel: BTreeMap<u32, Vec<CriticalPoint>> = BTreeMap::new();
    for c in points {
        by_vessel.entry(c.mmsi).or_default().push(*c);
    }
    let mut written = Vec::new();
    for (mmsi, list) in by_vessel {
        let path = dir.join(format!("{mmsi}.{}", format.extension()));
        let mut w = BufWriter::new(File::create(&path)?);
        format.write(&list, &mut w)?;
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}
