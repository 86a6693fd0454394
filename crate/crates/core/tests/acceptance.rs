//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report reads top to
//! bottom. Exits non-zero when a criterion fails, except for failures the
//! host cannot avoid (a parallel speedup on fewer cores than shards), which
//! are still printed as FAIL.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use vesselwatch::geo::EARTH_RADIUS_M;
use vesselwatch::grid::{cell_of, AreaKind, AreaPolygon, GridConfig, GridIndex};
use vesselwatch::interval::{
    holds_for, intersect_all, start_end_events, Boundary, EventInstance, Interval,
    MaximalIntervalList, RecognitionWindow,
};
use vesselwatch::patterns::{recognize, CeConfig, CeName, CeWhen};
use vesselwatch::runtime::{
    replay, FleetMix, NoiseInjection, Partitioning, PlantCounts, PlantKind, RunOutput,
    SyntheticFleet, SyntheticFleetSpec,
};
use vesselwatch::synopsis::WindowSpec;
use vesselwatch::tracker::Annotation;
use vesselwatch::{Config, GeoPoint, PositionReport, Timestamp, VelocityVector};

const T0: i64 = 1_451_606_400;

enum Verdict {
    Pass,
    Fail,
    /// Failed only because the machine lacks the resources the criterion assumes.
    HostLimited,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn main() {
    let checks: [(&str, &str, fn() -> Outcome); 10] = [
        (
            "AC1",
            "interval algebra matches a per-timepoint oracle",
            ac1_interval_oracle,
        ),
        (
            "AC2",
            "grid point-in-polygon matches a winding-number scan",
            ac2_point_in_polygon,
        ),
        (
            "AC3",
            "outputs are identical for every shard count and partitioning",
            ac3_shard_invariance,
        ),
        (
            "AC4",
            "every planted event is recognized and nothing else",
            ac4_planted_recall,
        ),
        (
            "AC5",
            "compression at least 0.90 and non-decreasing in turn threshold",
            ac5_compression_trend,
        ),
        (
            "AC6",
            "RMSE non-decreasing in turn threshold and under 50 m on straight legs",
            ac6_rmse_trend,
        ),
        (
            "AC7",
            "delayed events take effect at the next query",
            ac7_delayed_events,
        ),
        (
            "AC8",
            "600k positions under 60 s, 4 shards at least 2x faster",
            ac8_throughput,
        ),
        (
            "AC9",
            "clean tracks are never rejected, the 105 kn jump is",
            ac9_noise_filter,
        ),
        (
            "AC10",
            "grid-independent CE counts stable across grid sizes",
            ac10_grid_granularity,
        ),
    ];
    let (mut failed, mut host_limited) = (0, 0);
    for (id, title, check) in checks {
        let started = Instant::now();
        let out = check();
        let secs = started.elapsed().as_secs_f64();
        let tag = match out.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::HostLimited => {
                host_limited += 1;
                "FAIL"
            }
        };
        println!("{id} {tag}: {title} ({}; {secs:.1} s)", out.detail);
    }
    println!(
        "{} passed, {failed} failed, {host_limited} failed on host limits",
        checks.len() - failed - host_limited
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- AC1

/// Fluent value at each time point: an initiation switches it on, a lone
/// termination switches it off.
fn brute_holds(inits: &[bool], terms: &[bool]) -> Vec<bool> {
    let mut on = false;
    inits
        .iter()
        .zip(terms)
        .map(|(&i, &t)| {
            if i {
                on = true;
            } else if t {
                on = false;
            }
            on
        })
        .collect()
}

/// Maximal runs of `true`; a run reaching the last point stays open.
fn brute_intervals(h: &[bool], base: i64) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &v) in h.iter().enumerate() {
        match (start, v) {
            (None, true) => start = Some(t),
            (Some(s), false) => {
                out.push(Interval::closed(
                    Timestamp(base + s as i64),
                    Timestamp(base + t as i64),
                ));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Interval::open(Timestamp(base + s as i64)));
    }
    out
}

fn random_events(
    rng: &mut ChaCha8Rng,
    len: usize,
    base: i64,
) -> (Vec<bool>, Vec<bool>, Vec<Timestamp>, Vec<Timestamp>) {
    let (pi, pt) = (rng.random_range(0.0..0.3), rng.random_range(0.0..0.3));
    let inits: Vec<bool> = (0..len).map(|_| rng.random_bool(pi)).collect();
    let terms: Vec<bool> = (0..len).map(|_| rng.random_bool(pt)).collect();
    let stamps = |v: &[bool]| {
        let mut t: Vec<Timestamp> = v
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| Timestamp(base + i as i64))
            .collect();
        // holds_for must not depend on input order
        t.reverse();
        t
    };
    let (si, st) = (stamps(&inits), stamps(&terms));
    (inits, terms, si, st)
}

fn ac1_interval_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = Vec::new();
    for window in 0..1000 {
        let len = rng.random_range(1..=200);
        let base = rng.random_range(-1000..1_000_000);
        let k = rng.random_range(1..=4);
        let mut lists = Vec::new();
        let mut brutes = Vec::new();
        for _ in 0..k {
            let (inits, terms, si, st) = random_events(&mut rng, len, base);
            let h = brute_holds(&inits, &terms);
            let list = holds_for(&si, &st);
            if list.intervals() != brute_intervals(&h, base).as_slice() {
                mismatches.push(format!("window {window}: holds_for"));
            }
            for t in -2..len as i64 + 3 {
                let expect = t >= 0 && h[(t as usize).min(len - 1)];
                if list.holds_at(Timestamp(base + t)) != expect {
                    mismatches.push(format!("window {window}: holds_at {t}"));
                    break;
                }
            }
            let mut se = Vec::new();
            for t in 0..len {
                let prev = t > 0 && h[t - 1];
                if h[t] && !prev {
                    se.push((Boundary::Start, Timestamp(base + t as i64)));
                }
                if !h[t] && prev {
                    se.push((Boundary::End, Timestamp(base + t as i64)));
                }
            }
            if start_end_events(&list) != se {
                mismatches.push(format!("window {window}: start_end"));
            }
            lists.push(list);
            brutes.push(h);
        }
        let conj: Vec<bool> = (0..len).map(|t| brutes.iter().all(|h| h[t])).collect();
        if intersect_all(&lists).intervals() != brute_intervals(&conj, base).as_slice() {
            mismatches.push(format!("window {window}: intersect_all"));
        }
    }
    if intersect_all(&[]) != MaximalIntervalList::full() {
        mismatches.push("empty intersection is not the full line".into());
    }
    let detail = format!(
        "1000 windows, {} mismatches{}",
        mismatches.len(),
        first(&mismatches)
    );
    judge(mismatches.is_empty(), detail)
}

fn first(v: &[String]) -> String {
    v.first()
        .map(|s| format!(", first: {s}"))
        .unwrap_or_default()
}

// ---------------------------------------------------------------- AC2

/// Winding number of `ring` around `p`; non-zero means inside.
fn winding_number(p: GeoPoint, ring: &[GeoPoint]) -> i32 {
    let is_left = |a: GeoPoint, b: GeoPoint| {
        (b.lon - a.lon) * (p.lat - a.lat) - (p.lon - a.lon) * (b.lat - a.lat)
    };
    let mut wn = 0;
    for i in 0..ring.len() {
        let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
        if a.lat <= p.lat {
            if b.lat > p.lat && is_left(a, b) > 0.0 {
                wn += 1;
            }
        } else if b.lat <= p.lat && is_left(a, b) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn random_polygon(rng: &mut ChaCha8Rng, id: u32, concave: bool) -> AreaPolygon {
    let centre = GeoPoint {
        lon: rng.random_range(20.6..27.4),
        lat: rng.random_range(34.6..40.4),
    };
    let r = rng.random_range(0.02..0.5);
    let n = rng.random_range(if concave { 5 } else { 3 }..=14);
    let mut angles: Vec<f64> = (0..n)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    let ring = angles
        .iter()
        .map(|a| {
            let rr = if concave {
                r * rng.random_range(0.25..1.0)
            } else {
                r
            };
            GeoPoint {
                lon: centre.lon + rr * a.cos(),
                lat: centre.lat + rr * a.sin(),
            }
        })
        .collect();
    AreaPolygon {
        id,
        ring,
        kind: AreaKind::Protected,
    }
}

fn ac2_point_in_polygon() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut checked, mut wrong, mut inside) = (0u64, 0u64, 0u64);
    let mut n_poly = 0;
    for batch in 0..20u32 {
        let polys: Vec<AreaPolygon> = (0..50u32)
            .map(|i| random_polygon(&mut rng, batch * 50 + i, i % 2 == 1))
            .collect();
        n_poly += polys.len();
        let index = GridIndex::build(polys.clone(), vec![], GridConfig::default())
            .expect("polygons inside the grid");
        for poly in &polys {
            let lo_lon = poly
                .ring
                .iter()
                .map(|p| p.lon)
                .fold(f64::INFINITY, f64::min);
            let hi_lon = poly
                .ring
                .iter()
                .map(|p| p.lon)
                .fold(f64::NEG_INFINITY, f64::max);
            let lo_lat = poly
                .ring
                .iter()
                .map(|p| p.lat)
                .fold(f64::INFINITY, f64::min);
            let hi_lat = poly
                .ring
                .iter()
                .map(|p| p.lat)
                .fold(f64::NEG_INFINITY, f64::max);
            let (mx, my) = ((hi_lon - lo_lon) * 0.1, (hi_lat - lo_lat) * 0.1);
            for _ in 0..100 {
                let p = GeoPoint {
                    lon: rng.random_range(lo_lon - mx..hi_lon + mx),
                    lat: rng.random_range(lo_lat - my..hi_lat + my),
                };
                let expect: BTreeSet<u32> = polys
                    .iter()
                    .filter(|a| winding_number(p, &a.ring) != 0)
                    .map(|a| a.id)
                    .collect();
                let got: BTreeSet<u32> = index.in_area(p).into_iter().collect();
                checked += 1;
                inside += expect.contains(&poly.id) as u64;
                wrong += (got != expect) as u64;
            }
        }
    }
    judge(
        wrong == 0,
        format!("{n_poly} polygons, {checked} points ({inside} inside their polygon), {wrong} mismatches"),
    )
}

// ---------------------------------------------------------------- AC3

fn ac3_shard_invariance() -> Outcome {
    let spec = SyntheticFleetSpec {
        n_vessels: 50,
        noise: NoiseInjection {
            duplicate_rate: 0.01,
            outlier_rate: 0.005,
            late_rate: 0.01,
            max_delay_s: 30,
        },
        ..Default::default()
    };
    let f = fleet(&spec, 3);
    let base_cfg = Config::default();
    let reference = run(&f, &base_cfg, false);
    let mut diffs = Vec::new();
    let mut runs = 0;
    for mode in [Partitioning::MmsiHash, Partitioning::SubGrid] {
        for shards in [1, 2, 4, 12] {
            let mut cfg = base_cfg.clone();
            cfg.replay.shard_count = shards;
            cfg.replay.partitioning = mode;
            let out = run(&f, &cfg, false);
            runs += 1;
            if out.critical_points != reference.critical_points || out.ces != reference.ces {
                diffs.push(format!("{}x{shards}", mode.as_str()));
            }
        }
    }
    judge(
        diffs.is_empty() && !reference.ces.is_empty(),
        format!(
            "{} reports, {runs} runs, {} critical points, {} CEs, differing: {:?}",
            f.reports.len(),
            reference.critical_points.len(),
            reference.ces.len(),
            diffs
        ),
    )
}

// ---------------------------------------------------------------- AC4

const RECALL_KINDS: [PlantKind; 6] = [
    PlantKind::Gap,
    PlantKind::Stop,
    PlantKind::SuspiciousDelay,
    PlantKind::Rendezvous,
    PlantKind::FastApproach,
    PlantKind::Picking,
];

/// Planted intervals are matched with three report periods of slack.
const MATCH_SLACK_S: i64 = 180;

fn ac4_planted_recall() -> Outcome {
    let spec = SyntheticFleetSpec {
        n_vessels: 40,
        plants: PlantCounts {
            suspicious_delays: 2,
            rendezvous: 2,
            fast_approaches: 2,
            pickings: 2,
        },
        ..Default::default()
    };
    let mut per_kind: BTreeMap<PlantKind, (usize, usize)> = BTreeMap::new();
    let (mut missed, mut boundary_missed, mut unexplained) = (Vec::new(), 0, Vec::new());
    let seeds = 50;
    for seed in 0..seeds {
        let f = fleet(&spec, 100 + seed);
        let out = run(&f, &Config::default(), false);
        let s = score(&f, &out, &RECALL_KINDS, MATCH_SLACK_S);
        for e in f.ledger.iter().filter(|e| RECALL_KINDS.contains(&e.kind)) {
            per_kind.entry(e.kind).or_default().0 += 1;
            if !s.missed.contains(e) {
                per_kind.entry(e.kind).or_default().1 += 1;
            }
        }
        for e in s.missed {
            if e.near_cell_boundary {
                boundary_missed += 1;
            } else {
                missed.push(format!(
                    "seed {}: {:?} {} at {}",
                    100 + seed,
                    e.kind,
                    e.v1,
                    e.t_start
                ));
            }
        }
        unexplained.extend(s.unexplained.iter().map(|c| {
            format!(
                "seed {}: {} {} at {}",
                100 + seed,
                c.name.as_str(),
                c.v1,
                c.when.start().0
            )
        }));
    }
    let summary: Vec<String> = per_kind
        .iter()
        .map(|(k, (n, hit))| format!("{k:?} {hit}/{n}"))
        .collect();
    judge(
        missed.is_empty() && unexplained.is_empty(),
        format!(
            "{seeds} seeds, recalled {}, boundary misses {boundary_missed}, missed {}{}, unexplained CEs {}{}",
            summary.join(" "),
            missed.len(),
            first(&missed),
            unexplained.len(),
            first(&unexplained)
        ),
    )
}

// ---------------------------------------------------------------- AC5 / AC6

const TURN_SWEEP: [f64; 10] = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0];

struct SweepPoint {
    turn_deg: f64,
    compression: f64,
    rmse: f64,
}

fn with_turn_threshold(deg: f64) -> Config {
    let mut cfg = Config::default();
    cfg.tracker.turn_threshold_deg = deg;
    cfg
}

/// Mixed fleet replayed once per turn threshold; shared by AC5 and AC6.
fn turn_sweep() -> &'static Vec<SweepPoint> {
    static SWEEP: OnceLock<Vec<SweepPoint>> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let f = fleet(
            &SyntheticFleetSpec {
                n_vessels: 100,
                ..Default::default()
            },
            5,
        );
        TURN_SWEEP
            .iter()
            .map(|&deg| {
                let out = run(&f, &with_turn_threshold(deg), true);
                SweepPoint {
                    turn_deg: deg,
                    compression: out.metrics.compression_ratio,
                    rmse: oracle_fleet_rmse(&out),
                }
            })
            .collect()
    })
}

fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn ac5_compression_trend() -> Outcome {
    let f = fleet(
        &SyntheticFleetSpec {
            n_vessels: 100,
            ..Default::default()
        },
        5,
    );
    let default = run(&f, &Config::default(), false).metrics.compression_ratio;
    let sweep = turn_sweep();
    let ratios: Vec<f64> = sweep.iter().map(|p| p.compression).collect();
    let shown: Vec<String> = sweep
        .iter()
        .map(|p| format!("{}:{:.4}", p.turn_deg, p.compression))
        .collect();
    judge(
        default >= 0.90 && non_decreasing(&ratios),
        format!("default {default:.4}, sweep {}", shown.join(" ")),
    )
}

/// Great-circle interpolation through unit vectors.
fn slerp(a: GeoPoint, b: GeoPoint, f: f64) -> GeoPoint {
    let v = |p: GeoPoint| {
        let (lo, la) = (p.lon.to_radians(), p.lat.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let (u, w) = (v(a), v(b));
    let dot = (u[0] * w[0] + u[1] * w[1] + u[2] * w[2]).clamp(-1.0, 1.0);
    let omega = dot.acos();
    if omega < 1e-12 {
        return a;
    }
    let (ka, kb) = (
        ((1.0 - f) * omega).sin() / omega.sin(),
        (f * omega).sin() / omega.sin(),
    );
    let x = [
        ka * u[0] + kb * w[0],
        ka * u[1] + kb * w[1],
        ka * u[2] + kb * w[2],
    ];
    GeoPoint {
        lon: x[1].atan2(x[0]).to_degrees(),
        lat: x[2].atan2((x[0] * x[0] + x[1] * x[1]).sqrt()).to_degrees(),
    }
}

/// Central angle via the spherical law of cosines, independent of the
/// library's haversine.
fn distance_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * (b.lon - a.lon).to_radians().cos();
    EARTH_RADIUS_M * c.clamp(-1.0, 1.0).acos()
}

/// Mean per-vessel RMSE. Anchors are the critical points (a stop at both its
/// ends) plus each vessel's first and last accepted position.
fn oracle_fleet_rmse(out: &RunOutput) -> f64 {
    let raw = out.raw.as_ref().expect("raw positions collected");
    let mut by_vessel: BTreeMap<u32, Vec<&PositionReport>> = BTreeMap::new();
    for r in raw {
        by_vessel.entry(r.mmsi).or_default().push(r);
    }
    let mut anchors: BTreeMap<u32, BTreeMap<i64, GeoPoint>> = BTreeMap::new();
    for c in &out.critical_points {
        let a = anchors.entry(c.mmsi).or_default();
        a.entry(c.t_start.0).or_insert(c.pos);
        if c.annotation == Annotation::Stopped {
            a.entry(c.t_end.0).or_insert(c.pos);
        }
    }
    let mut sum = 0.0;
    for (v, mut reports) in by_vessel.iter().map(|(v, r)| (*v, r.clone())) {
        reports.sort_by_key(|r| r.tau);
        let a = anchors.entry(v).or_default();
        for r in [reports[0], reports[reports.len() - 1]] {
            a.entry(r.tau.0).or_insert(r.pos);
        }
        let pts: Vec<(i64, GeoPoint)> = a.iter().map(|(t, p)| (*t, *p)).collect();
        let mut sq = 0.0;
        for r in &reports {
            let t = r.tau.0;
            let est = match pts.iter().position(|(ta, _)| *ta > t) {
                None => pts[pts.len() - 1].1,
                Some(0) => pts[0].1,
                Some(i) => {
                    let ((t0, p0), (t1, p1)) = (pts[i - 1], pts[i]);
                    slerp(p0, p1, (t - t0) as f64 / (t1 - t0) as f64)
                }
            };
            sq += distance_m(r.pos, est).powi(2);
        }
        sum += (sq / reports.len() as f64).sqrt();
    }
    sum / by_vessel.len().max(1) as f64
}

fn ac6_rmse_trend() -> Outcome {
    let sweep = turn_sweep();
    let rmse: Vec<f64> = sweep.iter().map(|p| p.rmse).collect();
    let shown: Vec<String> = sweep
        .iter()
        .map(|p| format!("{}:{:.1}", p.turn_deg, p.rmse))
        .collect();
    let straight = fleet(
        &SyntheticFleetSpec {
            n_vessels: 100,
            mix: FleetMix::straight_only(),
            plants: PlantCounts::none(),
            ..Default::default()
        },
        6,
    );
    let straight_rmse = oracle_fleet_rmse(&run(&straight, &Config::default(), true));
    judge(
        non_decreasing(&rmse) && straight_rmse < 50.0,
        format!(
            "straight fleet {straight_rmse:.2} m, mixed sweep (m) {}",
            shown.join(" ")
        ),
    )
}

// ---------------------------------------------------------------- AC7

fn event(kind: Annotation, vessel: u32, tau: i64, pos: GeoPoint) -> EventInstance {
    EventInstance {
        kind,
        vessel,
        tau: Timestamp(tau),
        since: Timestamp(tau),
        pos,
        velocity: VelocityVector::new(10.0, 90.0),
        heading_to_vessels: None,
    }
}

fn gap_ces(window: &RecognitionWindow, grid: &GridIndex) -> Vec<(u32, Interval)> {
    recognize(window, grid, &CeConfig::default())
        .into_iter()
        .filter(|c| c.name == CeName::Gap)
        .map(|c| match c.when {
            CeWhen::During(iv) => (c.v1, iv),
            CeWhen::At(t) => (c.v1, Interval::closed(t, t)),
        })
        .collect()
}

fn ac7_delayed_events() -> Outcome {
    let grid = GridIndex::build(vec![], vec![], GridConfig::default()).unwrap();
    let sea = GeoPoint {
        lon: 24.55,
        lat: 37.55,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let trials = 500;
    for trial in 0..trials {
        let slide = [60, 300, 600, 3600][rng.random_range(0..4)];
        let range = slide * rng.random_range(2..=6);
        let spec = WindowSpec::new(range, slide).unwrap();
        let q1 = (T0 / slide + rng.random_range(10..1000)) * slide;
        let q2 = q1 + slide;
        // both ends fall in (q2 - range, q1]: inside the next window, known only after q1
        let lo = q2 - range + 1;
        let start = rng.random_range(lo..q1 - 1);
        let end = rng.random_range(start + 1..=q1);

        let mut late = RecognitionWindow::new(spec);
        late.ingest(event(Annotation::GapStart, 1, start, sea));
        late.advance(Timestamp(q1));
        let at_q1 = gap_ces(&late, &grid);
        let stored = late.ingest(event(Annotation::GapEnd, 1, end, sea));
        late.advance(Timestamp(q2));
        let at_q2 = gap_ces(&late, &grid);

        let mut on_time = RecognitionWindow::new(spec);
        on_time.ingest(event(Annotation::GapStart, 1, start, sea));
        on_time.ingest(event(Annotation::GapEnd, 1, end, sea));
        on_time.advance(Timestamp(q2));

        let open = vec![(1, Interval::open(Timestamp(start)))];
        let closed = vec![(1, Interval::closed(Timestamp(start), Timestamp(end)))];
        if at_q1 != open || !stored || at_q2 != closed || gap_ces(&on_time, &grid) != closed {
            failures.push(format!(
                "trial {trial}: range {range} slide {slide} gap [{start}, {end}) q1 {q1}"
            ));
        }
    }
    judge(
        failures.is_empty(),
        format!(
            "{trials} delayed gap endings, {} wrong{}",
            failures.len(),
            first(&failures)
        ),
    )
}

// ---------------------------------------------------------------- AC8

fn ac8_throughput() -> Outcome {
    let spec = SyntheticFleetSpec {
        n_vessels: 500,
        duration_s: 3600,
        plants: PlantCounts::none(),
        increase_factor: 20,
        ..Default::default()
    };
    let f = fleet(&spec, 8);
    let time = |shards: usize| {
        let mut cfg = Config::default();
        cfg.replay.shard_count = shards;
        let started = Instant::now();
        let out = run(&f, &cfg, false);
        (started.elapsed().as_secs_f64(), out.metrics.positions_read)
    };
    let (one, n) = time(1);
    let (four, _) = time(4);
    let speedup = one / four;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let fast_enough = n >= 600_000 && one < 60.0;
    let detail = format!("{n} positions: 1 shard {one:.1} s, 4 shards {four:.1} s, speedup {speedup:.2}x on {cores} core(s)");
    let verdict = match (fast_enough, speedup >= 2.0) {
        (true, true) => Verdict::Pass,
        (true, false) if cores < 4 => Verdict::HostLimited,
        _ => Verdict::Fail,
    };
    Outcome { verdict, detail }
}

// ---------------------------------------------------------------- AC9

fn ac9_noise_filter() -> Outcome {
    let mut rejected = 0u64;
    let mut positions = 0u64;
    for seed in 0..5 {
        let f = fleet(
            &SyntheticFleetSpec {
                n_vessels: 100,
                ..Default::default()
            },
            900 + seed,
        );
        let m = run(&f, &Config::default(), false).metrics;
        rejected += m.rejected_positions.values().sum::<u64>() + m.superseded_positions;
        positions += m.positions_read;
    }

    // 12 kn eastbound, then a report 270 m back west only 5 s later (105 kn)
    let origin = GeoPoint {
        lon: 24.0,
        lat: 37.0,
    };
    let step = 12.0 * 1852.0 / 3600.0 * 60.0;
    let mut reports: Vec<PositionReport> = (0..8)
        .map(|i| PositionReport {
            mmsi: 1,
            pos: origin.destination(90.0, step * i as f64),
            tau: Timestamp(i * 60 - 47),
        })
        .collect();
    let last = reports[reports.len() - 1];
    reports.push(PositionReport {
        mmsi: 1,
        pos: last.pos.destination(270.0, 270.0),
        tau: Timestamp(last.tau.0 + 5),
    });
    let grid = GridIndex::build(vec![], vec![], GridConfig::default()).unwrap();
    let out = replay(reports.into_iter().map(Ok), &Config::default(), grid, false).unwrap();
    let jump: BTreeMap<String, u64> = out.metrics.rejected_positions.clone();
    let expect: BTreeMap<String, u64> = [("ImplausibleSpeed".to_string(), 1)].into();
    judge(
        rejected == 0 && jump == expect,
        format!(
            "{positions} clean positions with {rejected} rejected; 105 kn jump rejections {jump:?}"
        ),
    )
}

// ---------------------------------------------------------------- AC10

const GRID_SIZES: [usize; 7] = [5, 10, 15, 30, 45, 60, 90];
/// Each size divides the next, so cell boundaries only ever get added.
const NESTED_SIZES: [usize; 4] = [5, 10, 30, 90];

fn grid_run(reports: &[PositionReport], f: Option<&SyntheticFleet>, n: usize) -> RunOutput {
    let mut cfg = Config::default();
    cfg.grid = GridConfig::default().with_cells(n, n);
    let (areas, ports) = f.map_or((vec![], vec![]), |f| (f.areas.clone(), f.ports.clone()));
    let grid = GridIndex::build(areas, ports, cfg.grid).unwrap();
    replay(reports.iter().copied().map(Ok), &cfg, grid, false).unwrap()
}

fn counts(out: &RunOutput, names: &[CeName]) -> Vec<usize> {
    names
        .iter()
        .map(|n| out.ces.iter().filter(|c| c.name == *n).count())
        .collect()
}

/// Pairs at the same latitude straddling a meridian that is a cell boundary
/// from a given grid size on, or (last) no boundary at all.
fn straddling_pairs() -> Vec<(f64, Option<usize>)> {
    let lon = |col: f64| 20.0 + 8.0 * col / 90.0;
    vec![
        (lon(4.5), None),
        // column 20 of 90: not a boundary of 30 or coarser
        (lon(20.0), Some(90)),
        // column 39 of 90 = 13 of 30: not a boundary of 10 or 5
        (lon(39.0), Some(30)),
        // column 63 of 90 = 7 of 10: not a boundary of 5
        (lon(63.0), Some(10)),
    ]
}

fn pair_fixture() -> Vec<PositionReport> {
    let lat_rdv = 34.0 + 7.0 * 45.5 / 90.0;
    let lat_pick = 34.0 + 7.0 * 63.5 / 90.0;
    let mut legs = Vec::new();
    for (k, (lon, _)) in straddling_pairs().into_iter().enumerate() {
        let k = k as u32;
        let mid = GeoPoint { lon, lat: lat_rdv };
        let (west, east) = (mid.destination(270.0, 200.0), mid.destination(90.0, 200.0));
        let mut a = Leg::arriving(100 + 2 * k, west, T0 + 3 * 3600, 10.0, 60, 60);
        a.silent(90 * 60, 270.0, 80.0).sail(0.0, 10.0, 60);
        let mut b = Leg::arriving(101 + 2 * k, east, T0 + 3 * 3600 + 600, 10.0, 60, 60);
        b.silent(80 * 60, 90.0, 80.0).sail(0.0, 10.0, 60);
        legs.extend([a, b]);

        let mid = GeoPoint { lon, lat: lat_pick };
        let (west, east) = (mid.destination(270.0, 200.0), mid.destination(90.0, 200.0));
        let mut drop = Leg::arriving(200 + 2 * k, west, T0 + 5 * 3600, 10.0, 60, 60);
        drop.idle(60).sail(0.0, 10.0, 60);
        let mut pick = Leg::arriving(201 + 2 * k, east, T0 + 6 * 3600 + 15 * 60, 10.0, 60, 60);
        pick.idle(40).sail(0.0, 10.0, 60);
        legs.extend([drop, pick]);
    }
    merge(legs)
}

fn ac10_grid_granularity() -> Outcome {
    let independent = [CeName::Gap, CeName::SuspiciousDelay, CeName::FastApproach];
    let paired = [CeName::PossibleRendezvous, CeName::PossiblePicking];
    let mut problems = Vec::new();

    let spec = SyntheticFleetSpec {
        n_vessels: 60,
        plants: PlantCounts {
            suspicious_delays: 3,
            rendezvous: 3,
            fast_approaches: 3,
            pickings: 3,
        },
        ..Default::default()
    };
    let f = fleet(&spec, 10);
    let fleet_counts: Vec<Vec<usize>> = GRID_SIZES
        .iter()
        .map(|&n| counts(&grid_run(&f.reports, Some(&f), n), &independent))
        .collect();
    if fleet_counts.windows(2).any(|w| w[0] != w[1]) {
        problems.push(format!(
            "fleet gap/delay/fast counts vary: {fleet_counts:?}"
        ));
    }

    let reports = pair_fixture();
    let pairs = straddling_pairs();
    let mut paired_counts = Vec::new();
    for &n in &GRID_SIZES {
        let out = grid_run(&reports, None, n);
        let fixed = counts(&out, &independent);
        if fixed != [8, 8, 0] {
            problems.push(format!(
                "{n}x{n}: gap/delay/fast {fixed:?}, expected [8, 8, 0]"
            ));
        }
        let got = counts(&out, &paired);
        // a pair survives unless its meridian is a boundary at this size
        let lat = 37.0;
        let cfg = GridConfig::default().with_cells(n, n);
        let expect = pairs
            .iter()
            .filter(|(lon, _)| {
                let mid = GeoPoint { lon: *lon, lat };
                cell_of(mid.destination(270.0, 200.0), &cfg)
                    == cell_of(mid.destination(90.0, 200.0), &cfg)
            })
            .count();
        if got != [expect, expect] {
            problems.push(format!(
                "{n}x{n}: rendezvous/picking {got:?}, expected {expect} each"
            ));
        }
        paired_counts.push((n, got));
    }
    let nested: Vec<&Vec<usize>> = NESTED_SIZES
        .iter()
        .map(|n| &paired_counts.iter().find(|(m, _)| m == n).unwrap().1)
        .collect();
    if nested
        .windows(2)
        .any(|w| w[1][0] > w[0][0] || w[1][1] > w[0][1])
    {
        problems.push(format!(
            "paired counts increase with finer nested grids: {nested:?}"
        ));
    }
    let shown: Vec<String> = paired_counts
        .iter()
        .map(|(n, c)| format!("{n}:{}/{}", c[0], c[1]))
        .collect();
    judge(
        problems.is_empty(),
        format!(
            "fleet gap/delay/fast {:?} at every size; fixture rendezvous/picking {}{}",
            fleet_counts[0],
            shown.join(" "),
            first(&problems)
        ),
    )
}
