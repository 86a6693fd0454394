use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Partitioning, ReplayConfig};
use crate::noise::PositionReport;
use crate::patterns::{CeLog, CeName};
use crate::synopsis::{compression_ratio, fleet_rmse, ClassBreakdown};
use crate::tracker::CriticalPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideStats {
    pub query: i64,
    pub reports: u64,
    pub critical_points: u64,
    pub evicted: u64,
    pub synopsis_size: u64,
    pub window_events: u64,
    pub ces: u64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub(super) struct RunStats {
    pub positions_read: u64,
    pub malformed: u64,
    pub accepted: u64,
    pub superseded: u64,
    pub rejected: BTreeMap<String, u64>,
    pub slides: Vec<SlideStats>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    fn of(mut samples: Vec<f64>) -> Self {
        if samples.is_empty() {
            return LatencySummary::default();
        }
        samples.sort_by(f64::total_cmp);
        let pick = |p: f64| samples[((samples.len() - 1) as f64 * p).round() as usize];
        LatencySummary {
            mean_ms: samples.iter().sum::<f64>() / samples.len() as f64,
            p50_ms: pick(0.5),
            p95_ms: pick(0.95),
            max_ms: samples[samples.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub shard_count: usize,
    pub partitioning: Partitioning,
    pub window_range_s: i64,
    pub window_slide_s: i64,
    pub slides: usize,
    pub positions_read: u64,
    pub malformed_records: u64,
    pub accepted_positions: u64,
    pub superseded_positions: u64,
    pub rejected_positions: BTreeMap<String, u64>,
    pub critical_points: u64,
    pub compression_ratio: f64,
    /// Meters; absent when raw positions were not kept.
    pub rmse_m: Option<f64>,
    pub breakdown: ClassBreakdown,
    pub movement_events: u64,
    pub late_events_dropped: u64,
    pub ce_counts: BTreeMap<String, u64>,
    pub ce_total: u64,
    pub ce_me_ratio: f64,
    pub latency: LatencySummary,
    pub wall_time_s: f64,
    pub throughput_positions_per_s: f64,
    pub mean_synopsis_size: f64,
    pub max_synopsis_size: u64,
    pub mean_window_events: f64,
    pub max_window_events: u64,
    pub per_slide: Vec<SlideStats>,
}

impl RunMetrics {
    #[allow(clippy::too_many_arguments)]
    pub(super) fn from_run(
        stats: &RunStats,
        replay: &ReplayConfig,
        breakdown: ClassBreakdown,
        critical: &[CriticalPoint],
        raw: Option<&[PositionReport]>,
        ces: &CeLog,
        movement_events: u64,
        late_events_dropped: u64,
        wall: Duration,
    ) -> RunMetrics {
        let retained = breakdown.total() - breakdown.noise;
        let slides = &stats.slides;
        let mean = |f: fn(&SlideStats) -> u64| {
            if slides.is_empty() {
                0.0
            } else {
                slides.iter().map(f).sum::<u64>() as f64 / slides.len() as f64
            }
        };
        let ce_total = ces.len() as u64;
        let wall_time_s = wall.as_secs_f64();
        RunMetrics {
            shard_count: replay.shard_count,
            partitioning: replay.partitioning,
            window_range_s: replay.window.range_omega_s,
            window_slide_s: replay.window.slide_beta_s,
            slides: slides.len(),
            positions_read: stats.positions_read,
            malformed_records: stats.malformed,
            accepted_positions: retained,
            superseded_positions: stats.superseded,
            rejected_positions: stats.rejected.clone(),
            critical_points: critical.len() as u64,
            compression_ratio: compression_ratio(retained, critical.len() as u64).unwrap_or(0.0),
            rmse_m: raw.and_then(|r| fleet_rmse(r, critical)),
            breakdown,
            movement_events,
            late_events_dropped,
            ce_counts: CeName::ALL
                .iter()
                .map(|n| (n.as_str().to_string(), ces.count(*n) as u64))
                .collect(),
            ce_total,
            ce_me_ratio: if movement_events == 0 {
                0.0
            } else {
                ce_total as f64 / movement_events as f64
            },
            latency: LatencySummary::of(slides.iter().map(|s| s.latency_ms).collect()),
            wall_time_s,
            throughput_positions_per_s: if wall_time_s > 0.0 {
                stats.positions_read as f64 / wall_time_s
            } else {
                0.0
            },
            mean_synopsis_size: mean(|s| s.synopsis_size),
            max_synopsis_size: slides.iter().map(|s| s.synopsis_size).max().unwrap_or(0),
            mean_window_events: mean(|s| s.window_events),
            max_window_events: slides.iter().map(|s| s.window_events).max().unwrap_or(0),
            per_slide: slides.clone(),
        }
    }
}

/// Human-readable summary of a run.
pub fn render_table(m: &RunMetrics) -> String {
    let mut rows: Vec<(String, String)> = vec![
        (
            "shards".into(),
            format!("{} ({})", m.shard_count, m.partitioning.as_str()),
        ),
        (
            "window".into(),
            format!("{} s range, {} s slide", m.window_range_s, m.window_slide_s),
        ),
        ("slides".into(), m.slides.to_string()),
        ("positions read".into(), m.positions_read.to_string()),
        ("malformed records".into(), m.malformed_records.to_string()),
        (
            "accepted positions".into(),
            m.accepted_positions.to_string(),
        ),
    ];
    for (reason, n) in &m.rejected_positions {
        rows.push((format!("rejected: {reason}"), n.to_string()));
    }
    rows.push(("critical points".into(), m.critical_points.to_string()));
    rows.push((
        "compression ratio".into(),
        format!("{:.4}", m.compression_ratio),
    ));
    rows.push((
        "rmse (m)".into(),
        m.rmse_m.map_or("-".into(), |r| format!("{r:.2}")),
    ));
    let b = &m.breakdown;
    for (class, n) in [
        ("normal", b.normal),
        ("noise", b.noise),
        ("gap", b.gap),
        ("stop", b.stop),
        ("turn", b.turn),
        ("speedChange", b.speed_change),
        ("lowSpeed", b.low_speed),
    ] {
        rows.push((format!("class: {class}"), n.to_string()));
    }
    rows.push(("movement events".into(), m.movement_events.to_string()));
    rows.push((
        "late events dropped".into(),
        m.late_events_dropped.to_string(),
    ));
    for (name, n) in &m.ce_counts {
        rows.push((format!("ce: {name}"), n.to_string()));
    }
    rows.push(("ce / me".into(), format!("{:.5}", m.ce_me_ratio)));
    let l = &m.latency;
    rows.push((
        "slide latency (ms)".into(),
        format!(
            "mean {:.2}, p50 {:.2}, p95 {:.2}, max {:.2}",
            l.mean_ms, l.p50_ms, l.p95_ms, l.max_ms
        ),
    ));
    rows.push((
        "throughput (pos/s)".into(),
        format!("{:.0}", m.throughput_positions_per_s),
    ));
    rows.push((
        "synopsis size".into(),
        format!(
            "mean {:.1}, max {}",
            m.mean_synopsis_size, m.max_synopsis_size
        ),
    ));
    rows.push((
        "window events".into(),
        format!(
            "mean {:.1}, max {}",
            m.mean_window_events, m.max_window_events
        ),
    ));

    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}
