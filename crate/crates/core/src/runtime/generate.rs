//! Deterministic synthetic fleets with a ledger of the events planted in them.
//!
//! Ordinary vessels follow one of four archetypes (straight, turning,
//! anchoring in ports, losing contact at sea). Planted scenarios add the
//! situations the CE patterns look for, each at the centre of its own cell
//! of the default grid and well away from ports.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mix64, RuntimeError};
use crate::geo::{
    haversine, initial_bearing, knots_to_meters_per_second, normalize_heading,
    signed_heading_change, GeoPoint,
};
use crate::grid::{
    cell_of, AreaKind, AreaPolygon, CellId, GridConfig, Port, DEFAULT_PORT_RADIUS_M,
};
use crate::noise::PositionReport;

const MMSI_BASE: u32 = 237_000_000;
const MAX_MMSI: u32 = 999_999_999;
/// Well inside the noise filter's abrupt-turn limit.
const MAX_STEER_DEG: f64 = 20.0;

/// Relative weights of the ordinary vessel archetypes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetMix {
    pub straight: f64,
    pub turning: f64,
    pub anchoring: f64,
    pub gappy: f64,
}

impl Default for FleetMix {
    fn default() -> Self {
        FleetMix {
            straight: 0.4,
            turning: 0.25,
            anchoring: 0.2,
            gappy: 0.15,
        }
    }
}

impl FleetMix {
    pub fn straight_only() -> Self {
        FleetMix {
            straight: 1.0,
            turning: 0.0,
            anchoring: 0.0,
            gappy: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantCounts {
    pub suspicious_delays: usize,
    /// Pairs of vessels.
    pub rendezvous: usize,
    pub fast_approaches: usize,
    pub pickings: usize,
}

impl Default for PlantCounts {
    fn default() -> Self {
        PlantCounts {
            suspicious_delays: 1,
            rendezvous: 1,
            fast_approaches: 1,
            pickings: 1,
        }
    }
}

impl PlantCounts {
    pub fn none() -> Self {
        PlantCounts {
            suspicious_delays: 0,
            rendezvous: 0,
            fast_approaches: 0,
            pickings: 0,
        }
    }

    fn vessels(&self) -> usize {
        self.suspicious_delays + 2 * (self.rendezvous + self.fast_approaches + self.pickings)
    }

    fn sites(&self) -> usize {
        self.suspicious_delays + self.rendezvous + self.fast_approaches + self.pickings
    }
}

/// Per-report probabilities of injected faults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseInjection {
    /// Report repeated verbatim.
    pub duplicate_rate: f64,
    /// Position displaced by several kilometres.
    pub outlier_rate: f64,
    /// Report delivered up to `max_delay_s` late.
    pub late_rate: f64,
    pub max_delay_s: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticFleetSpec {
    pub n_vessels: usize,
    pub start_time: i64,
    pub duration_s: i64,
    pub report_period_s: i64,
    /// Each report interval is the period plus or minus up to this much.
    pub period_jitter_s: i64,
    /// Receiver noise radius on positions of moving vessels.
    pub gps_noise_m: f64,
    pub mix: FleetMix,
    pub plants: PlantCounts,
    pub noise: NoiseInjection,
    /// Every trajectory is replayed this many times under fresh vessel ids.
    pub increase_factor: usize,
}

impl Default for SyntheticFleetSpec {
    fn default() -> Self {
        SyntheticFleetSpec {
            n_vessels: 100,
            // 2016-01-01T00:00:00Z
            start_time: 1_451_606_400,
            duration_s: 24 * 3600,
            report_period_s: 60,
            period_jitter_s: 5,
            gps_noise_m: 3.0,
            mix: FleetMix::default(),
            plants: PlantCounts::default(),
            noise: NoiseInjection::default(),
            increase_factor: 1,
        }
    }
}

impl SyntheticFleetSpec {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        let bad = |m: String| Err(RuntimeError::InvalidSpec(m));
        if self.report_period_s <= 0
            || self.period_jitter_s < 0
            || 2 * self.period_jitter_s >= self.report_period_s
        {
            return bad("report period must be positive and jitter below half of it".into());
        }
        if self.duration_s <= 0 {
            return bad("duration must be positive".into());
        }
        if self.increase_factor < 1 {
            return bad("increase_factor must be at least 1".into());
        }
        let total = self.n_vessels as u64 * self.increase_factor as u64;
        if total > (MAX_MMSI - MMSI_BASE) as u64 {
            return bad(format!("{total} vessels do not fit the identifier range"));
        }
        if self.plants.vessels() > self.n_vessels {
            return bad(format!(
                "plants need {} vessels, fleet has {}",
                self.plants.vessels(),
                self.n_vessels
            ));
        }
        if self.plants.sites() > 0 && self.duration_s < 8 * 3600 {
            return bad("planted scenarios need at least 8 hours".into());
        }
        let m = &self.mix;
        let weights = [m.straight, m.turning, m.anchoring, m.gappy];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("mix weights must be non-negative".into());
        }
        if self.n_vessels > self.plants.vessels() && weights.iter().sum::<f64>() <= 0.0 {
            return bad("mix weights sum to zero".into());
        }
        let n = &self.noise;
        if [n.duplicate_rate, n.outlier_rate, n.late_rate]
            .iter()
            .any(|r| !(0.0..=1.0).contains(r))
            || n.max_delay_s < 0
        {
            return bad("noise rates must lie in [0, 1]".into());
        }
        if !(self.gps_noise_m >= 0.0) {
            return bad("gps noise must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PlantKind {
    Stop,
    Turn,
    Gap,
    SuspiciousDelay,
    Rendezvous,
    FastApproach,
    Picking,
}

/// One planted event with the interval it should be recognized in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub kind: PlantKind,
    pub v1: u32,
    pub v2: Option<u32>,
    pub t_start: i64,
    pub t_end: i64,
    pub pos: GeoPoint,
    /// Participants fall in different cells of the default grid.
    pub near_cell_boundary: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticFleet {
    /// In arrival order.
    pub reports: Vec<PositionReport>,
    pub ledger: Vec<LedgerEntry>,
    pub ports: Vec<Port>,
    pub areas: Vec<AreaPolygon>,
    pub vessel_count: usize,
}

fn world_ports() -> Vec<Port> {
    [
        (23.63, 37.94),
        (25.14, 35.34),
        (26.14, 38.37),
        (22.93, 40.63),
        (21.73, 38.25),
        (24.08, 35.49),
        (25.33, 37.45),
        (24.94, 37.44),
        (27.28, 36.89),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(lon, lat))| Port {
        id: i as u32 + 1,
        pos: GeoPoint { lon, lat },
        radius_m: DEFAULT_PORT_RADIUS_M,
    })
    .collect()
}

fn world_areas() -> Vec<AreaPolygon> {
    let ring = |pts: &[(f64, f64)]| {
        pts.iter()
            .map(|&(lon, lat)| GeoPoint { lon, lat })
            .collect::<Vec<_>>()
    };
    vec![
        AreaPolygon {
            id: 1,
            ring: ring(&[
                (23.9, 39.0),
                (24.3, 39.0),
                (24.3, 39.3),
                (23.9, 39.3),
                (23.9, 39.0),
            ]),
            kind: AreaKind::Protected,
        },
        // L-shaped
        AreaPolygon {
            id: 2,
            ring: ring(&[
                (25.5, 36.0),
                (26.3, 36.0),
                (26.3, 36.2),
                (25.8, 36.2),
                (25.8, 36.7),
                (25.5, 36.7),
                (25.5, 36.0),
            ]),
            kind: AreaKind::Protected,
        },
        AreaPolygon {
            id: 3,
            ring: ring(&[(21.0, 36.5), (21.6, 36.6), (21.3, 37.1), (21.0, 36.5)]),
            kind: AreaKind::Other,
        },
    ]
}

/// One vessel's simulated motion and the reports it emits.
struct Track<'a> {
    mmsi: u32,
    t: i64,
    end: i64,
    pos: GeoPoint,
    heading: f64,
    speed_kn: f64,
    spec: &'a SyntheticFleetSpec,
    rng: ChaCha8Rng,
    out: Vec<PositionReport>,
}

impl<'a> Track<'a> {
    fn new(
        mmsi: u32,
        spec: &'a SyntheticFleetSpec,
        seed: u64,
        pos: GeoPoint,
        heading: f64,
        speed_kn: f64,
    ) -> Self {
        let mut t = Track {
            mmsi,
            t: spec.start_time,
            end: spec.start_time + spec.duration_s,
            pos,
            heading,
            speed_kn,
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            out: Vec::new(),
        };
        t.emit_moving();
        t
    }

    fn done(&self) -> bool {
        self.t >= self.end
    }

    fn last(&self) -> PositionReport {
        self.out[self.out.len() - 1]
    }

    fn emit_at(&mut self, spot: GeoPoint, min_r: f64, max_r: f64) {
        let r = if max_r > min_r {
            self.rng.random_range(min_r..max_r)
        } else {
            min_r
        };
        let pos = spot.destination(self.rng.random_range(0.0..360.0), r);
        self.out.push(PositionReport {
            mmsi: self.mmsi,
            pos,
            tau: crate::geo::Timestamp(self.t),
        });
    }

    fn emit_moving(&mut self) {
        self.emit_at(self.pos, 0.0, self.spec.gps_noise_m);
    }

    /// Advances one report interval; false once the run is over.
    fn tick(&mut self) -> bool {
        let j = self.spec.period_jitter_s;
        let dt = self.spec.report_period_s
            + if j > 0 {
                self.rng.random_range(-j..=j)
            } else {
                0
            };
        if self.t + dt > self.end {
            self.t = self.end;
            return false;
        }
        self.t += dt;
        if self.speed_kn > 0.0 {
            let next = self.pos.destination(
                self.heading,
                knots_to_meters_per_second(self.speed_kn) * dt as f64,
            );
            // keep to the great circle
            self.heading = normalize_heading(initial_bearing(next, self.pos) + 180.0);
            self.pos = next;
        }
        true
    }

    fn step(&mut self) -> bool {
        let ok = self.tick();
        if ok {
            self.emit_moving();
        }
        ok
    }

    fn sail_for(&mut self, secs: i64) {
        let until = self.t + secs;
        while self.t < until && self.step() {}
    }

    /// Steers for `target` until within one report interval of it, turning
    /// at most `MAX_STEER_DEG` per report.
    fn sail_to(&mut self, target: GeoPoint, speed_kn: f64) -> bool {
        self.speed_kn = speed_kn;
        let reach = knots_to_meters_per_second(speed_kn) * self.spec.report_period_s as f64;
        let turn_radius = reach / (2.0 * (MAX_STEER_DEG.to_radians() / 2.0).sin());
        loop {
            let dist = haversine(self.pos, target);
            if dist <= reach {
                return true;
            }
            let off = signed_heading_change(self.heading, initial_bearing(self.pos, target));
            // a target abeam inside the turning circle would be circled forever;
            // stand on until it is clear
            if !(dist < 2.0 * turn_radius && off.abs() > 60.0) {
                self.heading =
                    normalize_heading(self.heading + off.clamp(-MAX_STEER_DEG, MAX_STEER_DEG));
            }
            if !self.step() {
                return false;
            }
        }
    }

    /// Slows so that the next report lands on `target`.
    fn close_in(&mut self, target: GeoPoint) {
        let cruise = self.speed_kn;
        let dist = haversine(self.pos, target);
        self.heading = initial_bearing(self.pos, target);
        self.speed_kn = dist / self.spec.report_period_s as f64 / knots_to_meters_per_second(1.0);
        self.step();
        self.speed_kn = cruise;
    }

    /// Gradual turn; returns the times of the first and last turning reports.
    fn turn_by(&mut self, total_deg: f64, rate_deg: f64) -> Option<(i64, i64)> {
        let steps = (total_deg.abs() / rate_deg).ceil().max(1.0);
        let per = total_deg / steps;
        let mut first = None;
        for _ in 0..steps as usize {
            self.heading = normalize_heading(self.heading + per);
            if !self.step() {
                return None;
            }
            first.get_or_insert(self.t);
        }
        first.map(|f| (f, self.t))
    }

    /// Idles in place; returns arrival and the last idle report.
    fn anchor(&mut self, secs: i64) -> Option<(i64, i64)> {
        let spot = self.pos;
        let arrived = self.t;
        let speed = self.speed_kn;
        self.speed_kn = 0.0;
        let until = self.t + secs;
        while self.t < until {
            if !self.tick() {
                return None;
            }
            self.emit_at(spot, 2.0, 8.0);
        }
        self.speed_kn = speed;
        Some((arrived, self.t))
    }

    /// Stops reporting for `secs`, either sailing on or drifting `drift_m`
    /// in total. Returns the last report before and the first after.
    fn silent(
        &mut self,
        secs: i64,
        drift_m: Option<f64>,
    ) -> Option<(PositionReport, PositionReport)> {
        let before = self.last();
        let speed = self.speed_kn;
        if drift_m.is_some() {
            self.speed_kn = 0.0;
        }
        let until = self.t + secs;
        while self.t < until {
            if !self.tick() {
                return None;
            }
        }
        if let Some(d) = drift_m {
            self.pos = self.pos.destination(self.rng.random_range(0.0..360.0), d);
            self.speed_kn = speed;
        }
        if !self.step() {
            return None;
        }
        Some((before, self.last()))
    }
}

struct Planner<'a> {
    spec: &'a SyntheticFleetSpec,
    rng: ChaCha8Rng,
    ports: Vec<Port>,
    grid: GridConfig,
    ledger: Vec<LedgerEntry>,
}

fn entry(
    kind: PlantKind,
    v1: u32,
    v2: Option<u32>,
    t_start: i64,
    t_end: i64,
    pos: GeoPoint,
) -> LedgerEntry {
    LedgerEntry {
        kind,
        v1,
        v2,
        t_start,
        t_end,
        pos,
        near_cell_boundary: false,
    }
}

impl<'a> Planner<'a> {
    fn minutes(&mut self, lo: f64, hi: f64) -> i64 {
        (self.rng.random_range(lo..hi) * 60.0) as i64
    }

    /// Sails for `secs` with occasional small course corrections. These are
    /// not ledgered: whether they count as turns depends on the threshold.
    fn cruise(&mut self, t: &mut Track, secs: i64) {
        let until = t.t + secs;
        while t.t < until && !t.done() {
            let leg = self.minutes(10.0, 40.0).min(until - t.t);
            t.sail_for(leg);
            if t.t >= until {
                break;
            }
            let sign = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let total = sign * self.rng.random_range(3.0..20.0);
            let rate = self.rng.random_range(3.0..10.0);
            if t.turn_by(total, rate).is_none() {
                break;
            }
        }
    }

    fn near_port(&self, p: GeoPoint, margin_m: f64) -> bool {
        self.ports
            .iter()
            .any(|port| haversine(p, port.pos) <= port.radius_m + margin_m)
    }

    fn open_sea_point(&mut self) -> GeoPoint {
        loop {
            let p = GeoPoint {
                lon: self.rng.random_range(21.0..27.0),
                lat: self.rng.random_range(35.0..40.0),
            };
            if !self.near_port(p, 10_000.0) {
                return p;
            }
        }
    }

    /// Centres of distinct cells of the default grid, away from ports and
    /// from each other.
    fn plant_sites(&mut self, n: usize) -> Result<Vec<GeoPoint>, RuntimeError> {
        let mut taken: BTreeSet<CellId> = BTreeSet::new();
        let mut sites = Vec::with_capacity(n);
        let mut attempts = 0;
        while sites.len() < n {
            attempts += 1;
            if attempts > 100_000 {
                return Err(RuntimeError::InvalidSpec(format!(
                    "no room for {n} planted scenarios"
                )));
            }
            let cell = CellId {
                ix: self.rng.random_range(3..self.grid.nx as u32 - 3),
                iy: self.rng.random_range(3..self.grid.ny as u32 - 3),
            };
            let clear = taken
                .iter()
                .all(|c| c.ix.abs_diff(cell.ix) > 1 || c.iy.abs_diff(cell.iy) > 1);
            let centre = self.grid.cell_center(cell);
            if clear && !self.near_port(centre, 30_000.0) {
                taken.insert(cell);
                sites.push(centre);
            }
        }
        Ok(sites)
    }

    fn plant_time(&mut self) -> i64 {
        let d = self.spec.duration_s as f64;
        self.spec.start_time + (d * self.rng.random_range(0.2..0.5)) as i64
    }

    /// A track that reaches `target` at about `arrive_at` sailing at `speed_kn`.
    fn inbound(
        &mut self,
        mmsi: u32,
        seed: u64,
        target: GeoPoint,
        arrive_at: i64,
        speed_kn: f64,
    ) -> Track<'a> {
        let back = self.rng.random_range(0.0..360.0);
        let dist = knots_to_meters_per_second(speed_kn) * (arrive_at - self.spec.start_time) as f64;
        let start = target.destination(back, dist);
        let mut t = Track::new(
            mmsi,
            self.spec,
            seed,
            start,
            initial_bearing(start, target),
            speed_kn,
        );
        if t.sail_to(target, speed_kn) {
            t.close_in(target);
        }
        t
    }

    fn depart(&mut self, t: &mut Track) {
        t.heading = self.rng.random_range(0.0..360.0);
        t.speed_kn = 10.0;
        t.sail_for(i64::MAX / 4);
    }

    fn straight(&mut self, mmsi: u32, seed: u64) -> Vec<PositionReport> {
        let start = self.open_sea_point();
        let (h, v) = (
            self.rng.random_range(0.0..360.0),
            self.rng.random_range(8.0..16.0),
        );
        let mut t = Track::new(mmsi, self.spec, seed, start, h, v);
        t.sail_for(i64::MAX / 4);
        t.out
    }

    fn turning(&mut self, mmsi: u32, seed: u64) -> Vec<PositionReport> {
        let start = self.open_sea_point();
        let (h, v) = (
            self.rng.random_range(0.0..360.0),
            self.rng.random_range(8.0..16.0),
        );
        let mut t = Track::new(mmsi, self.spec, seed, start, h, v);
        let centre = self.grid.cell_center(CellId {
            ix: self.grid.nx as u32 / 2,
            iy: self.grid.ny as u32 / 2,
        });
        loop {
            let leg = self.minutes(40.0, 120.0);
            self.cruise(&mut t, leg);
            if t.done() {
                break;
            }
            let sign = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let mut total = sign * self.rng.random_range(30.0..120.0);
            if haversine(t.pos, centre) > 250_000.0 {
                // head back towards the middle of the area
                let back = signed_heading_change(t.heading, initial_bearing(t.pos, centre));
                total = back.signum() * back.abs().max(30.0);
            }
            let rate = self.rng.random_range(5.0..12.0);
            let Some((a, b)) = t.turn_by(total, rate) else {
                break;
            };
            if b + 3 * self.spec.report_period_s < t.end {
                self.ledger
                    .push(entry(PlantKind::Turn, mmsi, None, a, b, t.pos));
            }
        }
        t.out
    }

    fn anchoring(&mut self, mmsi: u32, seed: u64) -> Vec<PositionReport> {
        let mut port = self.ports[self.rng.random_range(0..self.ports.len())];
        let start = port.pos.destination(
            self.rng.random_range(0.0..360.0),
            self.rng.random_range(15_000.0..40_000.0),
        );
        let v = self.rng.random_range(8.0..14.0);
        let mut t = Track::new(
            mmsi,
            self.spec,
            seed,
            start,
            initial_bearing(start, port.pos),
            v,
        );
        loop {
            let berth = port.pos.destination(
                self.rng.random_range(0.0..360.0),
                self.rng.random_range(0.0..400.0),
            );
            if !t.sail_to(berth, v) {
                break;
            }
            let stay = self.minutes(60.0, 180.0);
            let Some((a, b)) = t.anchor(stay) else { break };
            let spot = t.pos;
            t.heading = self.rng.random_range(0.0..360.0);
            let leg = self.minutes(60.0, 180.0);
            t.sail_for(leg);
            if t.t > b + 5 * self.spec.report_period_s {
                self.ledger
                    .push(entry(PlantKind::Stop, mmsi, None, a, b, spot));
            }
            if t.done() {
                break;
            }
            port = self.ports[self.rng.random_range(0..self.ports.len())];
        }
        t.out
    }

    fn gappy(&mut self, mmsi: u32, seed: u64) -> Vec<PositionReport> {
        let start = self.open_sea_point();
        let (h, v) = (
            self.rng.random_range(0.0..360.0),
            self.rng.random_range(8.0..16.0),
        );
        let mut t = Track::new(mmsi, self.spec, seed, start, h, v);
        loop {
            let leg = self.minutes(60.0, 240.0);
            self.cruise(&mut t, leg);
            if t.done() {
                break;
            }
            if self.near_port(t.pos, 3_000.0) {
                continue;
            }
            let quiet = self.minutes(15.0, 90.0);
            let Some((a, b)) = t.silent(quiet, None) else {
                break;
            };
            self.ledger
                .push(entry(PlantKind::Gap, mmsi, None, a.tau.0, b.tau.0, a.pos));
        }
        t.out
    }

    fn delayed_gap(
        &mut self,
        t: &mut Track,
        quiet: i64,
        drift: f64,
    ) -> (PositionReport, PositionReport) {
        let (a, b) = t
            .silent(quiet, Some(drift))
            .expect("planted scenarios end well before the run does");
        for kind in [PlantKind::Gap, PlantKind::SuspiciousDelay] {
            self.ledger
                .push(entry(kind, t.mmsi, None, a.tau.0, b.tau.0, a.pos));
        }
        (a, b)
    }

    fn plant_delay(&mut self, mmsi: u32, seed: u64, site: GeoPoint) -> Vec<PositionReport> {
        let at = self.plant_time();
        let mut t = self.inbound(mmsi, seed, site, at, 10.0);
        let (quiet, drift) = (
            self.minutes(60.0, 120.0),
            self.rng.random_range(100.0..500.0),
        );
        self.delayed_gap(&mut t, quiet, drift);
        self.depart(&mut t);
        t.out
    }

    fn plant_rendezvous(
        &mut self,
        ids: [u32; 2],
        seeds: [u64; 2],
        site: GeoPoint,
    ) -> [Vec<PositionReport>; 2] {
        let at = self.plant_time();
        let mut gaps = Vec::new();
        let mut outs = Vec::new();
        for (k, (mmsi, seed)) in ids.into_iter().zip(seeds).enumerate() {
            let spot = site.destination(
                self.rng.random_range(0.0..360.0),
                self.rng.random_range(0.0..200.0),
            );
            let mut t = self.inbound(mmsi, seed, spot, at + 600 * k as i64, 10.0);
            let quiet = if k == 0 {
                self.minutes(90.0, 120.0)
            } else {
                self.minutes(80.0, 100.0)
            };
            let drift = self.rng.random_range(100.0..300.0);
            gaps.push(self.delayed_gap(&mut t, quiet, drift));
            self.depart(&mut t);
            outs.push(t.out);
        }
        let cells: BTreeSet<CellId> = gaps
            .iter()
            .flat_map(|(a, b)| [cell_of(a.pos, &self.grid), cell_of(b.pos, &self.grid)])
            .collect();
        let (v1, v2) = (ids[0].min(ids[1]), ids[0].max(ids[1]));
        self.ledger.push(LedgerEntry {
            near_cell_boundary: cells.len() > 1,
            ..entry(
                PlantKind::Rendezvous,
                v1,
                Some(v2),
                gaps[0].0.tau.0.max(gaps[1].0.tau.0),
                gaps[0].1.tau.0.min(gaps[1].1.tau.0),
                site,
            )
        });
        let b = outs.pop().unwrap();
        [outs.pop().unwrap(), b]
    }

    /// `ids[0]` closes in on `ids[1]` from behind at speed.
    fn plant_fast_approach(
        &mut self,
        ids: [u32; 2],
        seeds: [u64; 2],
        site: GeoPoint,
    ) -> [Vec<PositionReport>; 2] {
        let at = self.plant_time();
        let back = self.rng.random_range(0.0..360.0);
        let run_up = knots_to_meters_per_second(10.0) * (at - self.spec.start_time) as f64;
        let lead_start = site.destination(back, run_up);
        let course = initial_bearing(lead_start, site);
        let chase_start = lead_start.destination(normalize_heading(course + 180.0), 3000.0);

        let mut lead = Track::new(ids[1], self.spec, seeds[1], lead_start, course, 10.0);
        lead.sail_for(i64::MAX / 4);

        let mut chase = Track::new(
            ids[0],
            self.spec,
            seeds[0],
            chase_start,
            initial_bearing(chase_start, site),
            10.0,
        );
        chase.sail_for(at - self.spec.start_time);
        chase.speed_kn = 25.0;
        chase.step();
        let first = chase.t;
        chase.sail_for(2 * self.spec.report_period_s);
        let last = chase.t;
        chase.speed_kn = 10.0;
        let sign = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
        chase.turn_by(sign * 40.0, 10.0);
        chase.sail_for(i64::MAX / 4);
        self.ledger.push(entry(
            PlantKind::FastApproach,
            ids[0],
            Some(ids[1]),
            first,
            last + 2 * self.spec.report_period_s,
            site,
        ));
        [chase.out, lead.out]
    }

    /// `ids[0]` waits at sea and leaves; `ids[1]` stops at the same spot soon after.
    fn plant_picking(
        &mut self,
        ids: [u32; 2],
        seeds: [u64; 2],
        site: GeoPoint,
    ) -> [Vec<PositionReport>; 2] {
        let at = self.plant_time();
        let mut drop = self.inbound(ids[0], seeds[0], site, at, 10.0);
        let stay = self.minutes(50.0, 70.0);
        let (a0, a1) = drop
            .anchor(stay)
            .expect("planted scenarios end well before the run does");
        let drop_spot = drop.pos;
        self.depart(&mut drop);
        self.ledger
            .push(entry(PlantKind::Stop, ids[0], None, a0, a1, drop_spot));

        let pick_spot = drop_spot.destination(
            self.rng.random_range(0.0..360.0),
            self.rng.random_range(50.0..200.0),
        );
        let arrive = a1 + self.minutes(10.0, 30.0);
        let mut pick = self.inbound(ids[1], seeds[1], pick_spot, arrive, 10.0);
        let stay = self.minutes(30.0, 50.0);
        let (b0, b1) = pick
            .anchor(stay)
            .expect("planted scenarios end well before the run does");
        let pick_spot = pick.pos;
        self.depart(&mut pick);
        self.ledger
            .push(entry(PlantKind::Stop, ids[1], None, b0, b1, pick_spot));
        self.ledger.push(LedgerEntry {
            near_cell_boundary: cell_of(drop_spot, &self.grid) != cell_of(pick_spot, &self.grid),
            ..entry(PlantKind::Picking, ids[0], Some(ids[1]), b0, b0, pick_spot)
        });
        [drop.out, pick.out]
    }
}

/// Applies injected faults and returns `(arrival time, report)` pairs.
fn inject_noise(
    reports: Vec<PositionReport>,
    spec: &SyntheticFleetSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<(i64, PositionReport)> {
    let n = &spec.noise;
    let mut out = Vec::with_capacity(reports.len());
    for mut r in reports {
        if n.outlier_rate > 0.0 && rng.random_bool(n.outlier_rate) {
            r.pos = r.pos.destination(
                rng.random_range(0.0..360.0),
                rng.random_range(5_000.0..20_000.0),
            );
        }
        let mut arrival = r.tau.0;
        if n.late_rate > 0.0 && n.max_delay_s > 0 && rng.random_bool(n.late_rate) {
            arrival += rng.random_range(1..=n.max_delay_s);
        }
        out.push((arrival, r));
        if n.duplicate_rate > 0.0 && rng.random_bool(n.duplicate_rate) {
            out.push((arrival, r));
        }
    }
    out
}

enum Role {
    Delay,
    Rendezvous,
    FastApproach,
    Picking,
    Straight,
    Turning,
    Anchoring,
    Gappy,
}

/// Builds a fleet; the same spec and seed always give the same fleet.
pub fn generate(spec: &SyntheticFleetSpec, seed: u64) -> Result<SyntheticFleet, RuntimeError> {
    spec.validate()?;
    let mut planner = Planner {
        spec,
        rng: ChaCha8Rng::seed_from_u64(seed),
        ports: world_ports(),
        grid: GridConfig::default(),
        ledger: Vec::new(),
    };
    let p = spec.plants;
    let mut roles: Vec<Role> = Vec::with_capacity(spec.n_vessels);
    roles.extend((0..p.suspicious_delays).map(|_| Role::Delay));
    roles.extend((0..p.rendezvous).map(|_| Role::Rendezvous));
    roles.extend((0..p.fast_approaches).map(|_| Role::FastApproach));
    roles.extend((0..p.pickings).map(|_| Role::Picking));
    let m = spec.mix;
    let weights = [m.straight, m.turning, m.anchoring, m.gappy];
    let total: f64 = weights.iter().sum();
    for _ in p.vessels()..spec.n_vessels {
        let mut x = planner.rng.random_range(0.0..total);
        let mut pick = 3;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                pick = i;
                break;
            }
            x -= w;
        }
        roles.push(
            [Role::Straight, Role::Turning, Role::Anchoring, Role::Gappy]
                .into_iter()
                .nth(pick)
                .unwrap(),
        );
    }

    let sites = planner.plant_sites(p.sites())?;
    let mut sites = sites.into_iter();
    let mut tracks: Vec<Vec<PositionReport>> = Vec::with_capacity(spec.n_vessels);
    let vessel_seed = |i: usize| mix64(seed ^ mix64(i as u64 + 1));
    for role in roles {
        let i = tracks.len();
        let id = MMSI_BASE + i as u32;
        match role {
            Role::Delay => {
                let site = sites.next().unwrap();
                tracks.push(planner.plant_delay(id, vessel_seed(i), site));
            }
            Role::Rendezvous | Role::FastApproach | Role::Picking => {
                let site = sites.next().unwrap();
                let ids = [id, id + 1];
                let seeds = [vessel_seed(i), vessel_seed(i + 1)];
                let pair = match role {
                    Role::Rendezvous => planner.plant_rendezvous(ids, seeds, site),
                    Role::FastApproach => planner.plant_fast_approach(ids, seeds, site),
                    _ => planner.plant_picking(ids, seeds, site),
                };
                tracks.extend(pair);
            }
            Role::Straight => tracks.push(planner.straight(id, vessel_seed(i))),
            Role::Turning => tracks.push(planner.turning(id, vessel_seed(i))),
            Role::Anchoring => tracks.push(planner.anchoring(id, vessel_seed(i))),
            Role::Gappy => tracks.push(planner.gappy(id, vessel_seed(i))),
        }
    }

    let mut stream: Vec<(i64, PositionReport)> = Vec::new();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x6e6f_6973_65));
    let noisy: Vec<Vec<(i64, PositionReport)>> = tracks
        .into_iter()
        .map(|t| inject_noise(t, spec, &mut noise_rng))
        .collect();
    let n = spec.n_vessels as u32;
    let copy_id = |copy: usize, id: u32| id + copy as u32 * n;
    for copy in 0..spec.increase_factor {
        for track in &noisy {
            stream.extend(track.iter().map(|&(arrival, r)| {
                (
                    arrival,
                    PositionReport {
                        mmsi: copy_id(copy, r.mmsi),
                        ..r
                    },
                )
            }));
        }
    }
    stream.sort_by_key(|(arrival, r)| (*arrival, r.mmsi, r.tau));

    let mut ledger = Vec::new();
    for e in &planner.ledger {
        let copies = 0..spec.increase_factor;
        match (e.kind, e.v2) {
            // clones share the spot, so every pair of clones meets
            (PlantKind::Rendezvous, Some(v2)) => {
                let members: Vec<u32> = copies
                    .flat_map(|c| [copy_id(c, e.v1), copy_id(c, v2)])
                    .collect();
                for (i, a) in members.iter().enumerate() {
                    for b in &members[i + 1..] {
                        ledger.push(LedgerEntry {
                            v1: *a.min(b),
                            v2: Some(*a.max(b)),
                            ..*e
                        });
                    }
                }
            }
            (PlantKind::Picking, Some(v2)) => {
                for a in copies.clone() {
                    for b in copies.clone() {
                        ledger.push(LedgerEntry {
                            v1: copy_id(a, e.v1),
                            v2: Some(copy_id(b, v2)),
                            ..*e
                        });
                    }
                }
            }
            _ => {
                for c in copies {
                    ledger.push(LedgerEntry {
                        v1: copy_id(c, e.v1),
                        v2: e.v2.map(|v| copy_id(c, v)),
                        ..*e
                    });
                }
            }
        }
    }
    ledger.sort_by(|a, b| (a.t_start, a.kind, a.v1, a.v2).cmp(&(b.t_start, b.kind, b.v1, b.v2)));

    Ok(SyntheticFleet {
        reports: stream.into_iter().map(|(_, r)| r).collect(),
        ledger,
        ports: planner.ports,
        areas: world_areas(),
        vessel_count: spec.n_vessels * spec.increase_factor,
    })
}
