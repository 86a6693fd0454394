use std::collections::BTreeMap;
use std::thread;
use std::time::{Duration, Instant};

use super::metrics::{RunMetrics, RunStats, SlideStats};
use super::{Partitioner, RuntimeError};
use crate::config::Config;
use crate::geo::Timestamp;
use crate::grid::{CellId, GridIndex};
use crate::interval::{EventInstance, RecognitionWindow};
use crate::noise::{NoiseVerdict, PositionReport};
use crate::patterns::{
    cell_ces, pair_cells, sort_instances, vessel_ces, vessel_facts, CeInstance, CeLog, VesselFacts,
};
use crate::synopsis::SynopsisState;
use crate::tracker::{Annotation, ClassBreakdown, CriticalPoint, VesselState};

/// Tracking state for the vessels hashed to one worker.
#[derive(Debug, Default)]
struct TrackShard {
    vessels: BTreeMap<u32, VesselState>,
    /// Accepted positions per vessel, kept only when RMSE is wanted.
    raw: Option<BTreeMap<u32, Vec<PositionReport>>>,
    accepted: u64,
    superseded: u64,
    rejected: BTreeMap<&'static str, u64>,
}

impl TrackShard {
    fn process(
        &mut self,
        reports: &[PositionReport],
        cfg: &Config,
        flush: bool,
    ) -> Vec<CriticalPoint> {
        let mut out = Vec::new();
        for r in reports {
            let state = self
                .vessels
                .entry(r.mmsi)
                .or_insert_with(|| VesselState::new(r.mmsi));
            let verdict = state.observe(r, &cfg.noise, &cfg.tracker, &mut out);
            match verdict {
                NoiseVerdict::Accept => {
                    self.accepted += 1;
                    if let Some(raw) = &mut self.raw {
                        raw.entry(r.mmsi).or_default().push(*r);
                    }
                }
                NoiseVerdict::Supersede => {
                    self.superseded += 1;
                    if let Some(last) = self
                        .raw
                        .as_mut()
                        .and_then(|raw| raw.get_mut(&r.mmsi))
                        .and_then(|v| v.last_mut())
                    {
                        *last = *r;
                    }
                }
                NoiseVerdict::Reject(reason) => {
                    *self.rejected.entry(reason.as_str()).or_default() += 1
                }
            }
        }
        if flush {
            for state in self.vessels.values_mut() {
                state.flush(&cfg.tracker, &mut out);
            }
        }
        out
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Every emitted critical point, in `(t_start, mmsi, annotation)` order.
    pub critical_points: Vec<CriticalPoint>,
    /// Latest view of every recognized CE.
    pub ces: Vec<CeInstance>,
    pub metrics: RunMetrics,
    /// Accepted positions, when collected.
    pub raw: Option<Vec<PositionReport>>,
}

/// Drives noise filtering, tracking, the synopsis and CE recognition over a
/// stream of reports in arrival order, one slide of data time at a time.
pub struct Pipeline {
    cfg: Config,
    grid: GridIndex,
    partitioner: Partitioner,
    shards: Vec<TrackShard>,
    synopsis: SynopsisState,
    window: RecognitionWindow,
    ces: CeLog,
    emitted: Vec<CriticalPoint>,
    batch: Vec<PositionReport>,
    next_query: Option<Timestamp>,
    stats: RunStats,
    started: Instant,
}

fn first_boundary(tau: Timestamp, slide: i64) -> Timestamp {
    Timestamp(
        tau.0.div_euclid(slide) * slide
            + if tau.0.rem_euclid(slide) == 0 {
                0
            } else {
                slide
            },
    )
}

fn run_sharded<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    if items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = items
            .into_iter()
            .map(|item| s.spawn(move || f(item)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

impl Pipeline {
    pub fn new(cfg: Config, grid: GridIndex) -> Result<Pipeline, RuntimeError> {
        cfg.validate()?;
        if grid.config() != &cfg.grid {
            return Err(RuntimeError::InvalidConfig(
                "grid index was built with a different grid config".into(),
            ));
        }
        let n = cfg.replay.shard_count;
        Ok(Pipeline {
            partitioner: Partitioner::new(cfg.replay.partitioning, n, &cfg.grid),
            shards: (0..n).map(|_| TrackShard::default()).collect(),
            synopsis: SynopsisState::new(),
            window: RecognitionWindow::new(cfg.replay.window),
            ces: CeLog::default(),
            emitted: Vec::new(),
            batch: Vec::new(),
            next_query: None,
            stats: RunStats::default(),
            started: Instant::now(),
            cfg,
            grid,
        })
    }

    /// Keep accepted positions so the run can report RMSE.
    pub fn collect_raw(mut self, yes: bool) -> Self {
        for s in &mut self.shards {
            s.raw = yes.then(BTreeMap::new);
        }
        self
    }

    pub fn push(&mut self, r: PositionReport) {
        self.stats.positions_read += 1;
        let slide = self.cfg.replay.window.slide_beta_s;
        let mut q = *self
            .next_query
            .get_or_insert_with(|| first_boundary(r.tau, slide));
        while r.tau > q {
            if self.batch.is_empty() && self.window.buffered() == 0 {
                // nothing to evaluate until the stream catches up
                q = first_boundary(r.tau, slide);
                break;
            }
            self.run_slide(q, false);
            q = q + slide;
        }
        self.next_query = Some(q);
        self.batch.push(r);
    }

    pub fn push_malformed(&mut self) {
        self.stats.malformed += 1;
    }

    /// Processes the last partial slide, flushing every vessel.
    pub fn finish(mut self) -> RunOutput {
        if let Some(q) = self.next_query {
            self.run_slide(q, true);
        }
        let mut breakdown = ClassBreakdown::default();
        let mut raw: Option<Vec<PositionReport>> = None;
        for shard in &mut self.shards {
            for state in shard.vessels.values() {
                breakdown.merge(state.counts());
            }
            self.stats.accepted += shard.accepted;
            self.stats.superseded += shard.superseded;
            for (k, v) in &shard.rejected {
                *self.stats.rejected.entry(k.to_string()).or_default() += v;
            }
            if let Some(r) = shard.raw.take() {
                raw.get_or_insert_with(Vec::new)
                    .extend(r.into_values().flatten());
            }
        }
        if let Some(r) = &mut raw {
            r.sort_by_key(|p| (p.mmsi, p.tau));
        }
        self.emitted.sort_by_key(|c| c.sort_key());
        let mut ces: Vec<CeInstance> = self.ces.instances().copied().collect();
        sort_instances(&mut ces);
        let metrics = RunMetrics::from_run(
            &self.stats,
            &self.cfg.replay,
            breakdown,
            &self.emitted,
            raw.as_deref(),
            &self.ces,
            self.window.ingested(),
            self.window.dropped_late(),
            self.started.elapsed(),
        );
        RunOutput {
            critical_points: self.emitted,
            ces,
            metrics,
            raw,
        }
    }

    fn run_slide(&mut self, q: Timestamp, flush: bool) {
        let t0 = Instant::now();
        let reports = std::mem::take(&mut self.batch);
        let n = self.shards.len();

        let mut per_shard: Vec<Vec<PositionReport>> = vec![Vec::new(); n];
        for r in &reports {
            per_shard[self.partitioner.tracking_shard(r.mmsi)].push(*r);
        }
        let cfg = &self.cfg;
        let work: Vec<_> = self.shards.iter_mut().zip(per_shard).collect();
        let outputs = run_sharded(work, |(shard, batch)| shard.process(&batch, cfg, flush));
        let mut cps: Vec<CriticalPoint> = outputs.into_iter().flatten().collect();
        cps.sort_by_key(|c| c.sort_key());

        self.synopsis.extend(cps.iter().copied());
        let evicted = self.synopsis.slide(q, &self.cfg.replay.window).len();

        let mut events: Vec<EventInstance> = cps.iter().map(EventInstance::from).collect();
        self.mark_fast_approaches(&mut events);
        let horizon = self.cfg.replay.window.lower_bound(q) - self.cfg.tracker.gap_period_s;
        for shard in &mut self.shards {
            for state in shard.vessels.values_mut() {
                state.prune_trail(horizon);
            }
        }
        for e in events {
            self.window.ingest(e);
        }
        self.window.advance(q);
        let recognized = self.recognize();
        self.ces.merge(&recognized);

        self.stats.slides.push(SlideStats {
            query: q.0,
            reports: reports.len() as u64,
            critical_points: cps.len() as u64,
            evicted: evicted as u64,
            synopsis_size: self.synopsis.len() as u64,
            window_events: self.window.events().count() as u64,
            ces: recognized.len() as u64,
            latency_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        self.emitted.extend(cps);
    }

    /// Decides `heading_to_vessels` for fast speed changes at sea, from every
    /// vessel's last known position at the event's time.
    fn mark_fast_approaches(&mut self, events: &mut [EventInstance]) {
        let ce = self.cfg.ce;
        let mut by_tau: BTreeMap<Timestamp, Vec<usize>> = BTreeMap::new();
        for (i, e) in events.iter().enumerate() {
            if e.kind == Annotation::SpeedChange
                && e.velocity.speed > ce.fast_speed_knots
                && !self.grid.near_ports(e.pos)
            {
                by_tau.entry(e.tau).or_default().push(i);
            }
        }
        let max_age = self.cfg.tracker.gap_period_s;
        for (tau, idx) in by_tau {
            let snapshot: Vec<(u32, _)> = self
                .shards
                .iter()
                .flat_map(|s| s.vessels.values())
                .filter_map(|v| v.position_at(tau, max_age).map(|p| (v.mmsi(), p)))
                .collect();
            self.grid.refresh_vessels(snapshot);
            for i in idx {
                let e = &mut events[i];
                let flag = self
                    .grid
                    .heading_to_vessels(
                        e.vessel,
                        e.velocity.heading,
                        ce.cone_deg,
                        ce.nearby_radius_m,
                    )
                    .unwrap_or(false);
                e.heading_to_vessels = Some(flag);
            }
        }
    }

    /// Per-vessel patterns on each vessel's worker, then pair patterns on
    /// each cell's worker. Assignment is recomputed at every query.
    fn recognize(&self) -> Vec<CeInstance> {
        let Some(q) = self.window.query_time() else {
            return Vec::new();
        };
        let lower = self.window.spec().lower_bound(q);
        let n = self.partitioner.shard_count();
        let (grid, ce) = (&self.grid, &self.cfg.ce);

        let mut vessel_groups: Vec<Vec<(u32, Vec<EventInstance>)>> = vec![Vec::new(); n];
        for v in self.window.vessels() {
            let events: Vec<EventInstance> = self.window.vessel_events(v).copied().collect();
            let Some(last) = events.iter().max_by_key(|e| e.tau) else {
                continue;
            };
            let owner = self.partitioner.vessel_shard(v, grid.cell_of(last.pos));
            vessel_groups[owner].push((v, events));
        }
        let phase1 = run_sharded(vessel_groups, |group| {
            let mut facts = Vec::with_capacity(group.len());
            let mut found = Vec::new();
            for (v, events) in group {
                let f = vessel_facts(v, &events, grid, ce);
                found.extend(vessel_ces(&f, &events, grid, ce));
                facts.push(f);
            }
            (facts, found)
        });
        let mut out = Vec::new();
        let mut facts: Vec<VesselFacts> = Vec::new();
        for (f, found) in phase1 {
            facts.extend(f);
            out.extend(found);
        }
        facts.sort_by_key(|f| f.vessel);

        let mut by_cell: BTreeMap<CellId, Vec<&VesselFacts>> = BTreeMap::new();
        for f in &facts {
            for c in pair_cells(f) {
                by_cell.entry(c).or_default().push(f);
            }
        }
        let mut cell_groups: Vec<Vec<(CellId, Vec<&VesselFacts>)>> = vec![Vec::new(); n];
        for (cell, present) in by_cell {
            if present.len() > 1 {
                cell_groups[self.partitioner.cell_shard(cell)].push((cell, present));
            }
        }
        let phase2 = run_sharded(cell_groups, |group| {
            group
                .into_iter()
                .flat_map(|(cell, present)| cell_ces(cell, &present, lower, ce))
                .collect::<Vec<_>>()
        });
        out.extend(phase2.into_iter().flatten());
        sort_instances(&mut out);
        out
    }
}

/// Runs a whole stream. Malformed records are counted and skipped; with a
/// rate override the input is paced in wall-clock time, which never changes
/// the results.
pub fn replay<I>(
    input: I,
    cfg: &Config,
    grid: GridIndex,
    collect_raw: bool,
) -> Result<RunOutput, RuntimeError>
where
    I: IntoIterator<Item = Result<PositionReport, RuntimeError>>,
{
    let rate = cfg.replay.rate_override;
    let mut pipeline = Pipeline::new(cfg.clone(), grid)?.collect_raw(collect_raw);
    let start = Instant::now();
    let mut seen = 0u64;
    for item in input {
        match item {
            Ok(r) => pipeline.push(r),
            Err(RuntimeError::MalformedRecord { .. }) => pipeline.push_malformed(),
            Err(e) => return Err(e),
        }
        seen += 1;
        if let Some(rate) = rate {
            let due = Duration::from_secs_f64(seen as f64 / rate);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                thread::sleep(wait);
            }
        }
    }
    Ok(pipeline.finish())
}
