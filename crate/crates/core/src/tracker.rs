//! Per-vessel online detection of movement events.
//!
//! Each vessel keeps a short buffer of committed positions tagged with their
//! instantaneous velocity and a flag bitmap. New positions are held back by one
//! report so that a later report with the same timestamp can still replace them
//! before they reach the buffer.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{
    haversine, heading_delta, normalize_heading, signed_heading_change, velocity_between, GeoPoint,
    Timestamp, VelocityVector,
};
use crate::noise::{self, NoiseConfig, NoiseReference, NoiseVerdict, PositionReport};

/// Smallest per-vertex heading change that counts as part of a smooth turn.
const SMOOTH_TURN_STEP_DEG: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Knots; slower than this is a pause.
    pub v_min: f64,
    pub alpha_pct: f64,
    pub gap_period_s: i64,
    pub turn_threshold_deg: f64,
    pub stop_radius_m: f64,
    pub m_window: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            v_min: 1.0,
            alpha_pct: 25.0,
            gap_period_s: 600,
            turn_threshold_deg: 15.0,
            stop_radius_m: 250.0,
            m_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("tracker parameter {0} must be strictly positive")]
    NonPositive(&'static str),
    #[error("unknown annotation {0:?}")]
    UnknownAnnotation(String),
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let checks = [
            ("v_min", self.v_min > 0.0),
            ("alpha_pct", self.alpha_pct > 0.0),
            ("gap_period_s", self.gap_period_s > 0),
            ("turn_threshold_deg", self.turn_threshold_deg > 0.0),
            ("stop_radius_m", self.stop_radius_m > 0.0),
            ("m_window", self.m_window > 0),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(TrackerError::NonPositive(name)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InstantFlags(u8);

impl InstantFlags {
    pub const PAUSE: u8 = 1;
    pub const SPEED_CHANGE: u8 = 2;
    pub const TURN: u8 = 4;

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn pause(self) -> bool {
        self.0 & Self::PAUSE != 0
    }

    pub fn speed_change(self) -> bool {
        self.0 & Self::SPEED_CHANGE != 0
    }

    pub fn turn(self) -> bool {
        self.0 & Self::TURN != 0
    }
}

/// Tags the newest position given its velocity and the one before it.
///
/// `v_prev == None` (first position, or first after a gap) sets at most the pause bit.
pub fn flag_instantaneous(
    v_now: VelocityVector,
    v_prev: Option<VelocityVector>,
    cfg: &TrackerConfig,
) -> InstantFlags {
    let mut bits = 0;
    if v_now.speed < cfg.v_min {
        bits |= InstantFlags::PAUSE;
    }
    if let Some(prev) = v_prev {
        let changed = if v_now.speed == 0.0 {
            prev.speed > 0.0
        } else {
            ((v_now.speed - prev.speed) / v_now.speed).abs() > cfg.alpha_pct / 100.0
        };
        if changed {
            bits |= InstantFlags::SPEED_CHANGE;
        }
        // headings of a drifting or anchored vessel are GPS jitter
        if v_now.speed >= cfg.v_min
            && prev.speed >= cfg.v_min
            && heading_delta(prev.heading, v_now.heading) > cfg.turn_threshold_deg
        {
            bits |= InstantFlags::TURN;
        }
    }
    InstantFlags(bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Annotation {
    Stopped,
    GapStart,
    GapEnd,
    Turn,
    SpeedChange,
    LowSpeedStart,
    LowSpeedEnd,
}

impl Annotation {
    pub const ALL: [Annotation; 7] = [
        Annotation::Stopped,
        Annotation::GapStart,
        Annotation::GapEnd,
        Annotation::Turn,
        Annotation::SpeedChange,
        Annotation::LowSpeedStart,
        Annotation::LowSpeedEnd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Annotation::Stopped => "stopped",
            Annotation::GapStart => "gapStart",
            Annotation::GapEnd => "gapEnd",
            Annotation::Turn => "turn",
            Annotation::SpeedChange => "speedChange",
            Annotation::LowSpeedStart => "lowSpeedStart",
            Annotation::LowSpeedEnd => "lowSpeedEnd",
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Annotation {
    type Err = TrackerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Annotation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| TrackerError::UnknownAnnotation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub mmsi: u32,
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub pos: GeoPoint,
    pub annotation: Annotation,
    pub velocity: VelocityVector,
}

impl CriticalPoint {
    fn instant(
        mmsi: u32,
        tau: Timestamp,
        pos: GeoPoint,
        annotation: Annotation,
        velocity: VelocityVector,
    ) -> Self {
        CriticalPoint {
            mmsi,
            t_start: tau,
            t_end: tau,
            pos,
            annotation,
            velocity,
        }
    }

    /// Total order used wherever outputs from several workers are merged.
    pub fn sort_key(&self) -> (Timestamp, u32, Annotation, Timestamp) {
        (self.t_start, self.mmsi, self.annotation, self.t_end)
    }
}

/// What a raw position ended up being used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Normal,
    Gap,
    Stop,
    Turn,
    SpeedChange,
    LowSpeed,
}

/// Raw reports per class; `noise` counts every rejected or retracted report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassBreakdown {
    pub normal: u64,
    pub noise: u64,
    pub gap: u64,
    pub stop: u64,
    pub turn: u64,
    pub speed_change: u64,
    pub low_speed: u64,
}

impl ClassBreakdown {
    pub fn add_class(&mut self, class: PointClass) {
        match class {
            PointClass::Normal => self.normal += 1,
            PointClass::Gap => self.gap += 1,
            PointClass::Stop => self.stop += 1,
            PointClass::Turn => self.turn += 1,
            PointClass::SpeedChange => self.speed_change += 1,
            PointClass::LowSpeed => self.low_speed += 1,
        }
    }

    pub fn merge(&mut self, other: &ClassBreakdown) {
        self.normal += other.normal;
        self.noise += other.noise;
        self.gap += other.gap;
        self.stop += other.stop;
        self.turn += other.turn;
        self.speed_change += other.speed_change;
        self.low_speed += other.low_speed;
    }

    pub fn total(&self) -> u64 {
        self.normal
            + self.noise
            + self.gap
            + self.stop
            + self.turn
            + self.speed_change
            + self.low_speed
    }
}

#[derive(Debug, Clone)]
struct BufferedPoint {
    tau: Timestamp,
    pos: GeoPoint,
    /// None for the first position and the first one after a gap.
    velocity: Option<VelocityVector>,
    flags: InstantFlags,
    /// Signed heading change at this vertex, known once the next position arrives.
    turn_change: f64,
    class: PointClass,
    turn_emitted: bool,
}

impl BufferedPoint {
    fn is_idle(&self) -> bool {
        self.flags.pause() || self.flags.turn()
    }

    fn is_slow(&self, v_min: f64) -> bool {
        self.velocity.is_some_and(|v| v.speed <= v_min)
    }

    fn classify(&mut self, class: PointClass) {
        if self.class == PointClass::Normal {
            self.class = class;
        }
    }
}

/// Mean speed plus speed-weighted circular mean heading.
pub fn mean_velocity<I: IntoIterator<Item = VelocityVector>>(
    velocities: I,
) -> Option<VelocityVector> {
    let (mut n, mut speed, mut sx, mut sy, mut ux, mut uy) = (0usize, 0.0, 0.0, 0.0, 0.0, 0.0);
    for v in velocities {
        let h = v.heading.to_radians();
        n += 1;
        speed += v.speed;
        sx += v.speed * h.sin();
        sy += v.speed * h.cos();
        ux += h.sin();
        uy += h.cos();
    }
    if n == 0 {
        return None;
    }
    let (x, y) = if sx != 0.0 || sy != 0.0 {
        (sx, sy)
    } else {
        (ux, uy)
    };
    let heading = if x == 0.0 && y == 0.0 {
        0.0
    } else {
        normalize_heading(x.atan2(y).to_degrees())
    };
    Some(VelocityVector {
        speed: speed / n as f64,
        heading,
    })
}

fn centroid<'a, I: IntoIterator<Item = &'a GeoPoint>>(points: I) -> GeoPoint {
    let (mut n, mut lon, mut lat) = (0usize, 0.0, 0.0);
    for p in points {
        n += 1;
        lon += p.lon;
        lat += p.lat;
    }
    GeoPoint {
        lon: lon / n as f64,
        lat: lat / n as f64,
    }
}

/// Online state of one vessel: noise reference, event buffer, class counters.
#[derive(Debug, Clone)]
pub struct VesselState {
    mmsi: u32,
    buffer: VecDeque<BufferedPoint>,
    pending: Option<PositionReport>,
    counts: ClassBreakdown,
    trail: VecDeque<(Timestamp, GeoPoint)>,
}

impl VesselState {
    pub fn new(mmsi: u32) -> Self {
        VesselState {
            mmsi,
            buffer: VecDeque::new(),
            pending: None,
            counts: ClassBreakdown::default(),
            trail: VecDeque::new(),
        }
    }

    pub fn mmsi(&self) -> u32 {
        self.mmsi
    }

    /// Class counts of reports that have left the buffer (all of them after `flush`).
    pub fn counts(&self) -> &ClassBreakdown {
        &self.counts
    }

    pub fn buffered_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn last_committed(&self) -> Option<(Timestamp, GeoPoint)> {
        self.buffer.back().map(|b| (b.tau, b.pos))
    }

    /// The most recent committed velocity.
    pub fn v_now(&self) -> Option<VelocityVector> {
        self.buffer.back().and_then(|b| b.velocity)
    }

    /// Mean velocity over the last `m` committed positions that have one.
    pub fn v_mean(&self, m: usize) -> Option<VelocityVector> {
        mean_velocity(self.buffer.iter().rev().take(m).filter_map(|b| b.velocity))
    }

    fn reference(&self, m: usize) -> Option<NoiseReference> {
        let last = self.buffer.back()?;
        Some(NoiseReference {
            tau: last.tau,
            pos: last.pos,
            velocity: last.velocity,
            mean: self.v_mean(m),
        })
    }

    /// Filters a report and, if accepted, queues it. The previously queued
    /// report (if any) is committed to the tracker first unless the new one
    /// carries the same timestamp and replaces it.
    pub fn observe(
        &mut self,
        report: &PositionReport,
        noise_cfg: &NoiseConfig,
        cfg: &TrackerConfig,
        out: &mut Vec<CriticalPoint>,
    ) -> NoiseVerdict {
        debug_assert_eq!(report.mmsi, self.mmsi);
        if let Some(pending) = self.pending {
            if pending.tau == report.tau {
                let reference = self.reference(cfg.m_window);
                let verdict = noise::filter(report, reference.as_ref(), noise_cfg);
                self.counts.noise += 1;
                if verdict.is_accepted() {
                    self.pending = Some(*report);
                    return NoiseVerdict::Supersede;
                }
                return verdict;
            }
            self.pending = None;
            self.commit(&pending, cfg, out);
        }
        let reference = self.reference(cfg.m_window);
        let verdict = noise::filter(report, reference.as_ref(), noise_cfg);
        if verdict.is_accepted() {
            self.pending = Some(*report);
        } else {
            self.counts.noise += 1;
        }
        verdict
    }

    /// Commits the queued report and retires the whole buffer into the counters.
    pub fn flush(&mut self, cfg: &TrackerConfig, out: &mut Vec<CriticalPoint>) {
        if let Some(p) = self.pending.take() {
            self.commit(&p, cfg, out);
        }
        while let Some(b) = self.buffer.pop_front() {
            self.counts.add_class(b.class);
        }
    }

    /// Latest committed position at or before `t`, if not older than `max_age_s`.
    pub fn position_at(&self, t: Timestamp, max_age_s: i64) -> Option<GeoPoint> {
        let idx = self.trail.partition_point(|(tau, _)| *tau <= t);
        let (tau, pos) = *self.trail.get(idx.checked_sub(1)?)?;
        (t - tau <= max_age_s).then_some(pos)
    }

    /// Drops trail positions older than `before`.
    pub fn prune_trail(&mut self, before: Timestamp) {
        while self.trail.front().is_some_and(|(tau, _)| *tau < before) {
            self.trail.pop_front();
        }
    }

    fn commit(&mut self, p: &PositionReport, cfg: &TrackerConfig, out: &mut Vec<CriticalPoint>) {
        self.trail.push_back((p.tau, p.pos));

        let Some(last) = self.buffer.back() else {
            self.push_first(p, PointClass::Normal);
            return;
        };
        let Ok(mut v_now) = velocity_between(last.pos, last.tau, p.pos, p.tau) else {
            debug_assert!(false, "noise filter let a non-increasing timestamp through");
            return;
        };

        if p.tau - last.tau > cfg.gap_period_s {
            out.push(CriticalPoint::instant(
                self.mmsi,
                last.tau,
                last.pos,
                Annotation::GapStart,
                last.velocity.unwrap_or_default(),
            ));
            out.push(CriticalPoint::instant(
                self.mmsi,
                p.tau,
                p.pos,
                Annotation::GapEnd,
                v_now,
            ));
            if let Some(b) = self.buffer.back_mut() {
                b.classify(PointClass::Gap);
            }
            while let Some(b) = self.buffer.pop_front() {
                self.counts.add_class(b.class);
            }
            self.push_first(p, PointClass::Gap);
            return;
        }

        if haversine(last.pos, p.pos) == 0.0 {
            v_now.heading = last.velocity.map_or(0.0, |v| v.heading);
        }
        let v_prev = last.velocity;
        let v_mean = self.v_mean(cfg.m_window);
        let flags = flag_instantaneous(v_now, v_prev, cfg);

        if let Some(last) = self.buffer.back_mut() {
            if let Some(prev) = v_prev {
                if prev.speed >= cfg.v_min && v_now.speed >= cfg.v_min {
                    last.turn_change = signed_heading_change(prev.heading, v_now.heading);
                }
            }
        }
        self.buffer.push_back(BufferedPoint {
            tau: p.tau,
            pos: p.pos,
            velocity: Some(v_now),
            flags,
            turn_change: 0.0,
            class: PointClass::Normal,
            turn_emitted: false,
        });

        self.detect(v_now, v_prev, v_mean, flags, cfg, out);
        self.trim(cfg);
    }

    fn push_first(&mut self, p: &PositionReport, class: PointClass) {
        self.buffer.push_back(BufferedPoint {
            tau: p.tau,
            pos: p.pos,
            velocity: None,
            flags: InstantFlags::default(),
            turn_change: 0.0,
            class,
            turn_emitted: false,
        });
    }

    /// Long-lasting rules in order with early exit, then the two mean-velocity rules.
    fn detect(
        &mut self,
        v_now: VelocityVector,
        v_prev: Option<VelocityVector>,
        v_mean: Option<VelocityVector>,
        flags: InstantFlags,
        cfg: &TrackerConfig,
        out: &mut Vec<CriticalPoint>,
    ) {
        let moving = v_now.speed > cfg.v_min;
        let resumed = moving && v_prev.is_some_and(|v| v.speed <= cfg.v_min);
        if resumed && (self.try_stop(cfg, out) || self.try_slow_motion(cfg, out)) {
            return;
        }
        // a smooth turn only claims older vertices, so the newest locations
        // still get their own sharp-turn and speed checks
        self.try_smooth_turn(cfg, out);
        let Some(mean) = v_mean else {
            return;
        };
        let n = self.buffer.len();
        if flags.turn()
            && moving
            && heading_delta(v_now.heading, mean.heading) > cfg.turn_threshold_deg
        {
            let vertex = &mut self.buffer[n - 2];
            if !vertex.turn_emitted {
                vertex.turn_emitted = true;
                vertex.classify(PointClass::Turn);
                out.push(CriticalPoint::instant(
                    self.mmsi,
                    vertex.tau,
                    vertex.pos,
                    Annotation::Turn,
                    v_now,
                ));
            }
        }
        if flags.speed_change()
            && moving
            && ((v_now.speed - mean.speed) / v_now.speed).abs() > cfg.alpha_pct / 100.0
        {
            let p = &mut self.buffer[n - 1];
            p.classify(PointClass::SpeedChange);
            out.push(CriticalPoint::instant(
                self.mmsi,
                p.tau,
                p.pos,
                Annotation::SpeedChange,
                v_now,
            ));
        }
    }

    /// Length of the run of buffered points before the newest one satisfying `pred`.
    fn run_before_newest(&self, pred: impl Fn(&BufferedPoint) -> bool) -> usize {
        self.buffer
            .iter()
            .rev()
            .skip(1)
            .take_while(|b| pred(b))
            .count()
    }

    fn try_stop(&mut self, cfg: &TrackerConfig, out: &mut Vec<CriticalPoint>) -> bool {
        let run = self.run_before_newest(BufferedPoint::is_idle);
        if run < cfg.m_window {
            return false;
        }
        let n = self.buffer.len();
        let range = n - 1 - run..n - 1;
        let center = centroid(self.buffer.range(range.clone()).map(|b| &b.pos));
        if self
            .buffer
            .range(range.clone())
            .any(|b| haversine(center, b.pos) > cfg.stop_radius_m)
        {
            return false;
        }
        let velocity = mean_velocity(self.buffer.range(range.clone()).filter_map(|b| b.velocity))
            .unwrap_or_default();
        let (t_start, t_end) = (self.buffer[range.start].tau, self.buffer[range.end - 1].tau);
        for b in self.buffer.range_mut(range) {
            b.classify(PointClass::Stop);
        }
        out.push(CriticalPoint {
            mmsi: self.mmsi,
            t_start,
            t_end,
            pos: center,
            annotation: Annotation::Stopped,
            velocity,
        });
        true
    }

    fn try_slow_motion(&mut self, cfg: &TrackerConfig, out: &mut Vec<CriticalPoint>) -> bool {
        let v_min = cfg.v_min;
        let run = self.run_before_newest(|b| b.is_slow(v_min));
        if run < cfg.m_window {
            return false;
        }
        let n = self.buffer.len();
        let range = n - 1 - run..n - 1;
        for b in self.buffer.range_mut(range.clone()) {
            b.classify(PointClass::LowSpeed);
        }
        let first = &self.buffer[range.start];
        let last = &self.buffer[range.end - 1];
        out.push(CriticalPoint::instant(
            self.mmsi,
            first.tau,
            first.pos,
            Annotation::LowSpeedStart,
            first.velocity.unwrap_or_default(),
        ));
        out.push(CriticalPoint::instant(
            self.mmsi,
            last.tau,
            last.pos,
            Annotation::LowSpeedEnd,
            last.velocity.unwrap_or_default(),
        ));
        true
    }

    /// Sums heading change over the buffered vertices. The sum slides with the
    /// buffer instead of resetting after a turn fires, so a vertex that turns
    /// out critical for some threshold is critical for every smaller one.
    fn try_smooth_turn(&mut self, cfg: &TrackerConfig, out: &mut Vec<CriticalPoint>) {
        let n = self.buffer.len();
        if n < 2 {
            return;
        }
        // vertices are every buffered point except the newest
        let lo = n.saturating_sub(cfg.m_window);
        let total: f64 = self.buffer.range(lo..n - 1).map(|b| b.turn_change).sum();
        if total.abs() <= cfg.turn_threshold_deg {
            return;
        }
        for i in lo..n - 1 {
            let b = &self.buffer[i];
            let contributes = !b.turn_emitted
                && b.turn_change.abs() >= SMOOTH_TURN_STEP_DEG
                && b.turn_change.signum() == total.signum();
            if !contributes {
                continue;
            }
            let outgoing = self.buffer[i + 1].velocity.unwrap_or_default();
            let b = &mut self.buffer[i];
            b.turn_emitted = true;
            b.classify(PointClass::Turn);
            out.push(CriticalPoint::instant(
                self.mmsi,
                b.tau,
                b.pos,
                Annotation::Turn,
                outgoing,
            ));
        }
    }

    /// Keeps the last `m_window` points, or the whole trailing idle/slow run if longer.
    fn trim(&mut self, cfg: &TrackerConfig) {
        let v_min = cfg.v_min;
        let run = self
            .buffer
            .iter()
            .rev()
            .take_while(|b| b.is_idle() || b.is_slow(v_min))
            .count();
        let keep = cfg.m_window.max(run);
        while self.buffer.len() > keep {
            if let Some(b) = self.buffer.pop_front() {
                self.counts.add_class(b.class);
            }
        }
    }
}
