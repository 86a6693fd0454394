use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geo::{GeoPoint, Timestamp, VelocityVector};
use crate::synopsis::WindowSpec;
use crate::tracker::{Annotation, CriticalPoint};

/// A movement event as seen by recognition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventInstance {
    pub kind: Annotation,
    pub vessel: u32,
    /// When the event became known: the end of a stop, the instant otherwise.
    pub tau: Timestamp,
    /// Start of the underlying episode; equals `tau` except for stops.
    pub since: Timestamp,
    pub pos: GeoPoint,
    pub velocity: VelocityVector,
    /// Set by the runtime for fast speed changes, from a snapshot at `tau`.
    pub heading_to_vessels: Option<bool>,
}

impl From<&CriticalPoint> for EventInstance {
    fn from(c: &CriticalPoint) -> Self {
        EventInstance {
            kind: c.annotation,
            vessel: c.mmsi,
            tau: c.t_end,
            since: c.t_start,
            pos: c.pos,
            velocity: c.velocity,
            heading_to_vessels: None,
        }
    }
}

type EventKey = (u32, Timestamp, Annotation);

/// Events buffered for the current window `(q - ω, q]`.
///
/// Events may arrive late and out of order; anything that could still fall
/// inside the next query's window is kept.
#[derive(Debug, Clone)]
pub struct RecognitionWindow {
    spec: WindowSpec,
    q: Option<Timestamp>,
    events: BTreeMap<EventKey, EventInstance>,
    ingested: u64,
    dropped_late: u64,
}

impl RecognitionWindow {
    pub fn new(spec: WindowSpec) -> Self {
        RecognitionWindow {
            spec,
            q: None,
            events: BTreeMap::new(),
            ingested: 0,
            dropped_late: 0,
        }
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    /// Time of the last query, if any.
    pub fn query_time(&self) -> Option<Timestamp> {
        self.q
    }

    /// Buffers an event unless it is too old for the next query. Returns
    /// whether it was stored (a duplicate counts as stored once).
    pub fn ingest(&mut self, e: EventInstance) -> bool {
        if let Some(q) = self.q {
            let next = q + self.spec.slide_beta_s;
            if e.tau <= self.spec.lower_bound(next) {
                self.dropped_late += 1;
                return false;
            }
        }
        let key = (e.vessel, e.tau, e.kind);
        if self.events.insert(key, e).is_none() {
            self.ingested += 1;
        }
        true
    }

    /// Moves the window to end at `q`, discarding events at or before `q - ω`.
    pub fn advance(&mut self, q: Timestamp) {
        let bound = self.spec.lower_bound(q);
        self.events.retain(|_, e| e.tau > bound);
        self.q = Some(q);
    }

    pub fn ingested(&self) -> u64 {
        self.ingested
    }

    pub fn dropped_late(&self) -> u64 {
        self.dropped_late
    }

    /// Buffered events, including ones after `q` kept for the next query.
    pub fn buffered(&self) -> usize {
        self.events.len()
    }

    fn in_window(&self, e: &EventInstance) -> bool {
        self.q
            .is_none_or(|q| e.tau <= q && e.tau > self.spec.lower_bound(q))
    }

    /// Events inside `(q - ω, q]`, ordered by vessel then time.
    pub fn events(&self) -> impl Iterator<Item = &EventInstance> {
        self.events.values().filter(|e| self.in_window(e))
    }

    /// One vessel's in-window events in time order.
    pub fn vessel_events(&self, vessel: u32) -> impl Iterator<Item = &EventInstance> {
        let lo = (vessel, Timestamp::MIN, Annotation::Stopped);
        self.events
            .range(lo..)
            .take_while(move |(k, _)| k.0 == vessel)
            .map(|(_, e)| e)
            .filter(|e| self.in_window(e))
    }

    pub fn vessels(&self) -> BTreeSet<u32> {
        self.events().map(|e| e.vessel).collect()
    }
}
