//! The maritime complex events: communication gaps, suspicious delays,
//! possible rendezvous, fast approaches and possible package picking.
//!
//! Recognition at a query is a pure function of the window's events. Facts
//! derived per vessel (`VesselFacts`) are combined per vessel and per grid
//! cell, which is what lets the runtime split a query across workers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geo::{haversine, meters_per_second_to_knots, GeoPoint, Timestamp};
use crate::grid::{CellId, GridIndex};
use crate::interval::{
    holds_for, intersect_all, EventInstance, Interval, MaximalIntervalList, RecognitionWindow,
};
use crate::tracker::Annotation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeConfig {
    pub fast_speed_knots: f64,
    pub picking_max_gap_s: i64,
    pub picking_max_dist_m: f64,
    /// Straight-line speed across a gap below which the gap is a suspicious delay.
    pub delay_speed_knots: f64,
    /// Aperture of the cone a vessel must be heading into to approach another.
    pub cone_deg: f64,
    pub nearby_radius_m: f64,
}

impl Default for CeConfig {
    fn default() -> Self {
        CeConfig {
            fast_speed_knots: 20.0,
            picking_max_gap_s: 3600,
            picking_max_dist_m: 500.0,
            delay_speed_knots: 1.0,
            cone_deg: 30.0,
            nearby_radius_m: 5000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CeName {
    Gap,
    SuspiciousDelay,
    PossibleRendezvous,
    FastApproach,
    PossiblePicking,
}

impl CeName {
    pub const ALL: [CeName; 5] = [
        CeName::Gap,
        CeName::SuspiciousDelay,
        CeName::PossibleRendezvous,
        CeName::FastApproach,
        CeName::PossiblePicking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CeName::Gap => "gap",
            CeName::SuspiciousDelay => "suspiciousDelay",
            CeName::PossibleRendezvous => "possibleRendezvous",
            CeName::FastApproach => "fastApproach",
            CeName::PossiblePicking => "possiblePicking",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CeWhen {
    /// Durative; an open end means still holding at the query.
    During(Interval),
    At(Timestamp),
}

impl CeWhen {
    pub fn start(&self) -> Timestamp {
        match self {
            CeWhen::During(iv) => iv.start,
            CeWhen::At(t) => *t,
        }
    }

    pub fn end(&self) -> Option<Timestamp> {
        match self {
            CeWhen::During(iv) => iv.end,
            CeWhen::At(t) => Some(*t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeInstance {
    pub name: CeName,
    pub v1: u32,
    pub v2: Option<u32>,
    pub when: CeWhen,
    pub pos: Option<GeoPoint>,
    pub cell: Option<CellId>,
}

/// Identity of a CE across queries; later queries may close or extend it.
pub type CeKey = (CeName, u32, Option<u32>, Timestamp, Option<CellId>);

impl CeInstance {
    pub fn key(&self) -> CeKey {
        (self.name, self.v1, self.v2, self.when.start(), self.cell)
    }

    fn sort_key(&self) -> (CeKey, Option<Timestamp>) {
        (self.key(), self.when.end())
    }
}

pub fn sort_instances(ces: &mut [CeInstance]) {
    ces.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Communication gaps away from ports: opened by `gapStart`, closed by `gapEnd`.
pub fn gap_fluent(events: &[EventInstance], grid: &GridIndex) -> MaximalIntervalList {
    let inits: Vec<Timestamp> = events
        .iter()
        .filter(|e| e.kind == Annotation::GapStart && !grid.near_ports(e.pos))
        .map(|e| e.tau)
        .collect();
    let terms: Vec<Timestamp> = events
        .iter()
        .filter(|e| e.kind == Annotation::GapEnd)
        .map(|e| e.tau)
        .collect();
    holds_for(&inits, &terms)
}

fn position_at(events: &[EventInstance], kind: Annotation, tau: Timestamp) -> Option<GeoPoint> {
    events
        .iter()
        .find(|e| e.kind == kind && e.tau == tau)
        .map(|e| e.pos)
}

/// Closed gaps the vessel could only have covered below the delay speed,
/// assuming it moved in a straight line.
pub fn suspicious_delay(
    events: &[EventInstance],
    gaps: &MaximalIntervalList,
    cfg: &CeConfig,
) -> MaximalIntervalList {
    let kept = gaps
        .closed_only()
        .filter(|&(start, end)| {
            let from = position_at(events, Annotation::GapStart, start);
            let to = position_at(events, Annotation::GapEnd, end);
            match (from, to) {
                (Some(a), Some(b)) => {
                    meters_per_second_to_knots(haversine(a, b) / (end - start) as f64)
                        < cfg.delay_speed_knots
                }
                _ => false,
            }
        })
        .map(|(s, e)| Interval::closed(s, e))
        .collect();
    MaximalIntervalList::new(kept).unwrap_or_default()
}

/// `in(vessel, cell)` for every cell the vessel's events touch: an event in a
/// cell initiates it there and terminates it everywhere else.
pub fn cell_fluents(
    events: &[EventInstance],
    grid: &GridIndex,
) -> BTreeMap<CellId, MaximalIntervalList> {
    let located: Vec<(Timestamp, CellId)> = events
        .iter()
        .map(|e| (e.tau, grid.cell_of(e.pos)))
        .collect();
    let cells: BTreeSet<CellId> = located.iter().map(|(_, c)| *c).collect();
    cells
        .into_iter()
        .map(|cell| {
            let (inits, terms): (Vec<_>, Vec<_>) = located.iter().partition(|(_, c)| *c == cell);
            let inits: Vec<Timestamp> = inits.into_iter().map(|(t, _)| t).collect();
            let terms: Vec<Timestamp> = terms.into_iter().map(|(t, _)| t).collect();
            (cell, holds_for(&inits, &terms))
        })
        .collect()
}

/// A stop away from ports, as the interval `[since, tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopEpisode {
    pub start: Timestamp,
    pub end: Timestamp,
    pub pos: GeoPoint,
    pub cell: CellId,
}

pub fn stopped_fluent(events: &[EventInstance], grid: &GridIndex) -> Vec<StopEpisode> {
    events
        .iter()
        .filter(|e| e.kind == Annotation::Stopped && e.since < e.tau && !grid.near_ports(e.pos))
        .map(|e| StopEpisode {
            start: e.since,
            end: e.tau,
            pos: e.pos,
            cell: grid.cell_of(e.pos),
        })
        .collect()
}

/// Everything recognition needs to know about one vessel within a window.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselFacts {
    pub vessel: u32,
    pub gaps: MaximalIntervalList,
    pub delays: MaximalIntervalList,
    pub cells: BTreeMap<CellId, MaximalIntervalList>,
    pub stops: Vec<StopEpisode>,
}

pub fn vessel_facts(
    vessel: u32,
    events: &[EventInstance],
    grid: &GridIndex,
    cfg: &CeConfig,
) -> VesselFacts {
    let gaps = gap_fluent(events, grid);
    let delays = suspicious_delay(events, &gaps, cfg);
    let cells = if delays.is_empty() {
        BTreeMap::new()
    } else {
        cell_fluents(events, grid)
    };
    VesselFacts {
        vessel,
        gaps,
        delays,
        cells,
        stops: stopped_fluent(events, grid),
    }
}

pub fn possible_rendezvous(a: &VesselFacts, b: &VesselFacts, cell: CellId) -> MaximalIntervalList {
    match (a.cells.get(&cell), b.cells.get(&cell)) {
        (Some(in_a), Some(in_b)) => intersect_all(&[
            in_a.clone(),
            in_b.clone(),
            a.delays.clone(),
            b.delays.clone(),
        ]),
        _ => MaximalIntervalList::empty(),
    }
}

/// A speed-up to above the fast threshold at open sea while heading at another vessel.
///
/// Uses the event's precomputed heading flag when present, else the grid's
/// current vessel snapshot.
pub fn fast_approach(e: &EventInstance, grid: &GridIndex, cfg: &CeConfig) -> Option<CeInstance> {
    if e.kind != Annotation::SpeedChange
        || e.velocity.speed <= cfg.fast_speed_knots
        || grid.near_ports(e.pos)
    {
        return None;
    }
    let heading = match e.heading_to_vessels {
        Some(flag) => flag,
        None => grid
            .heading_to_vessels(
                e.vessel,
                e.velocity.heading,
                cfg.cone_deg,
                cfg.nearby_radius_m,
            )
            .unwrap_or(false),
    };
    heading.then(|| CeInstance {
        name: CeName::FastApproach,
        v1: e.vessel,
        v2: None,
        when: CeWhen::At(e.tau),
        pos: Some(e.pos),
        cell: Some(grid.cell_of(e.pos)),
    })
}

/// One vessel leaves a spot at sea and another stops at the same spot soon after.
///
/// `lower` is the window's exclusive lower bound; the pick-up stop must start inside it.
pub fn possible_picking(
    dropper: &VesselFacts,
    picker: &VesselFacts,
    lower: Timestamp,
    cfg: &CeConfig,
) -> Vec<CeInstance> {
    let mut out = Vec::new();
    for drop in &dropper.stops {
        for pick in &picker.stops {
            let elapsed = pick.start - drop.end;
            if pick.start > lower
                && drop.cell == pick.cell
                && elapsed > 0
                && elapsed < cfg.picking_max_gap_s
                && haversine(drop.pos, pick.pos) < cfg.picking_max_dist_m
            {
                out.push(CeInstance {
                    name: CeName::PossiblePicking,
                    v1: dropper.vessel,
                    v2: Some(picker.vessel),
                    when: CeWhen::At(pick.start),
                    pos: Some(pick.pos),
                    cell: Some(pick.cell),
                });
            }
        }
    }
    out
}

/// Gap, suspicious delay and fast approach for one vessel.
pub fn vessel_ces(
    facts: &VesselFacts,
    events: &[EventInstance],
    grid: &GridIndex,
    cfg: &CeConfig,
) -> Vec<CeInstance> {
    let mut out = Vec::new();
    let at_start = |t: Timestamp| position_at(events, Annotation::GapStart, t);
    for (name, list) in [
        (CeName::Gap, &facts.gaps),
        (CeName::SuspiciousDelay, &facts.delays),
    ] {
        for iv in list.intervals() {
            let pos = at_start(iv.start);
            out.push(CeInstance {
                name,
                v1: facts.vessel,
                v2: None,
                when: CeWhen::During(*iv),
                pos,
                cell: pos.map(|p| grid.cell_of(p)),
            });
        }
    }
    out.extend(events.iter().filter_map(|e| fast_approach(e, grid, cfg)));
    out
}

/// Cells where a vessel may take part in a pair pattern.
pub fn pair_cells(facts: &VesselFacts) -> BTreeSet<CellId> {
    let mut cells: BTreeSet<CellId> = facts.cells.keys().copied().collect();
    cells.extend(facts.stops.iter().map(|s| s.cell));
    cells
}

/// Rendezvous and picking among the vessels present in one cell.
pub fn cell_ces(
    cell: CellId,
    present: &[&VesselFacts],
    lower: Timestamp,
    cfg: &CeConfig,
) -> Vec<CeInstance> {
    let mut out = Vec::new();
    for (i, a) in present.iter().enumerate() {
        for b in &present[i + 1..] {
            let (a, b) = if a.vessel < b.vessel { (a, b) } else { (b, a) };
            for iv in possible_rendezvous(a, b, cell).intervals() {
                out.push(CeInstance {
                    name: CeName::PossibleRendezvous,
                    v1: a.vessel,
                    v2: Some(b.vessel),
                    when: CeWhen::During(*iv),
                    pos: None,
                    cell: Some(cell),
                });
            }
            for (x, y) in [(a, b), (b, a)] {
                out.extend(
                    possible_picking(x, y, lower, cfg)
                        .into_iter()
                        .filter(|c| c.cell == Some(cell)),
                );
            }
        }
    }
    out
}

/// Single-threaded recognition over the whole window.
pub fn recognize(window: &RecognitionWindow, grid: &GridIndex, cfg: &CeConfig) -> Vec<CeInstance> {
    let Some(q) = window.query_time() else {
        return Vec::new();
    };
    let lower = window.spec().lower_bound(q);
    let mut facts = Vec::new();
    let mut out = Vec::new();
    for v in window.vessels() {
        let events: Vec<EventInstance> = window.vessel_events(v).copied().collect();
        let f = vessel_facts(v, &events, grid, cfg);
        out.extend(vessel_ces(&f, &events, grid, cfg));
        facts.push(f);
    }
    let mut by_cell: BTreeMap<CellId, Vec<&VesselFacts>> = BTreeMap::new();
    for f in &facts {
        for c in pair_cells(f) {
            by_cell.entry(c).or_default().push(f);
        }
    }
    for (cell, present) in by_cell {
        out.extend(cell_ces(cell, &present, lower, cfg));
    }
    sort_instances(&mut out);
    out
}

/// Recognized CEs across all queries, keeping the latest view of each.
#[derive(Debug, Clone, Default)]
pub struct CeLog {
    entries: BTreeMap<CeKey, CeInstance>,
}

impl CeLog {
    pub fn merge<'a, I: IntoIterator<Item = &'a CeInstance>>(&mut self, ces: I) {
        for c in ces {
            self.entries.insert(c.key(), *c);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn instances(&self) -> impl Iterator<Item = &CeInstance> {
        self.entries.values()
    }

    pub fn count(&self, name: CeName) -> usize {
        self.entries.values().filter(|c| c.name == name).count()
    }
}
