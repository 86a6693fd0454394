use serde::Serialize;

use crate::geo::haversine;
use crate::tracker::{Annotation, CriticalPoint};

/// Critical points between two consecutive stops, stops included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trip {
    pub mmsi: u32,
    pub points: Vec<CriticalPoint>,
    /// No stop before the first point.
    pub open_start: bool,
    /// No stop after the last point.
    pub open_end: bool,
    /// Departure to arrival for closed trips, first to last point otherwise.
    pub travel_time_s: i64,
    pub distance_m: f64,
}

impl Trip {
    pub fn is_open_ended(&self) -> bool {
        self.open_start || self.open_end
    }

    fn new(points: &[CriticalPoint], open_start: bool, open_end: bool) -> Trip {
        let first = &points[0];
        let last = &points[points.len() - 1];
        let departure = if open_start {
            first.t_start
        } else {
            first.t_end
        };
        let arrival = if open_end { last.t_end } else { last.t_start };
        Trip {
            mmsi: first.mmsi,
            points: points.to_vec(),
            open_start,
            open_end,
            travel_time_s: arrival - departure,
            distance_m: points
                .windows(2)
                .map(|w| haversine(w[0].pos, w[1].pos))
                .sum(),
        }
    }
}

/// Splits one vessel's chronologically sorted critical points at its stops.
pub fn reconstruct_trips(points: &[CriticalPoint]) -> Vec<Trip> {
    let stops: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, c)| c.annotation == Annotation::Stopped)
        .map(|(i, _)| i)
        .collect();
    let mut trips = Vec::new();
    let Some((&first_stop, &last_stop)) = stops.first().zip(stops.last()) else {
        if !points.is_empty() {
            trips.push(Trip::new(points, true, true));
        }
        return trips;
    };
    if first_stop > 0 {
        trips.push(Trip::new(&points[..=first_stop], true, false));
    }
    for w in stops.windows(2) {
        trips.push(Trip::new(&points[w[0]..=w[1]], false, false));
    }
    if last_stop + 1 < points.len() {
        trips.push(Trip::new(&points[last_stop..], false, true));
    }
    trips
}
