//! Helpers shared by the integration tests: running synthetic fleets and
//! scoring recognized CEs against the generator's ledger.
#![allow(dead_code)]

use vesselwatch::geo::Timestamp;
use vesselwatch::grid::GridIndex;
use vesselwatch::patterns::{CeInstance, CeName};
use vesselwatch::runtime::{
    generate, replay, LedgerEntry, PlantKind, RunOutput, SyntheticFleet, SyntheticFleetSpec,
};
use vesselwatch::tracker::{Annotation, CriticalPoint};
use vesselwatch::Config;

pub fn fleet(spec: &SyntheticFleetSpec, seed: u64) -> SyntheticFleet {
    generate(spec, seed).expect("valid spec")
}

pub fn grid_for(fleet: &SyntheticFleet, cfg: &Config) -> GridIndex {
    GridIndex::build(fleet.areas.clone(), fleet.ports.clone(), cfg.grid).expect("valid grid")
}

pub fn run(fleet: &SyntheticFleet, cfg: &Config, collect_raw: bool) -> RunOutput {
    replay(
        fleet.reports.iter().copied().map(Ok),
        cfg,
        grid_for(fleet, cfg),
        collect_raw,
    )
    .expect("replay")
}

fn ce_kind(k: PlantKind) -> Option<CeName> {
    match k {
        PlantKind::Gap => Some(CeName::Gap),
        PlantKind::SuspiciousDelay => Some(CeName::SuspiciousDelay),
        PlantKind::Rendezvous => Some(CeName::PossibleRendezvous),
        PlantKind::FastApproach => Some(CeName::FastApproach),
        PlantKind::Picking => Some(CeName::PossiblePicking),
        PlantKind::Stop | PlantKind::Turn => None,
    }
}

fn overlaps(a0: i64, a1: Option<i64>, b0: i64, b1: i64, slack: i64) -> bool {
    a0 <= b1 + slack && a1.is_none_or(|e| e >= b0 - slack)
}

fn same_vessels(ce: &CeInstance, e: &LedgerEntry) -> bool {
    match (ce.name, e.v2) {
        // the fast mover is the only participant the CE names
        (CeName::FastApproach, _) => ce.v1 == e.v1,
        (CeName::PossibleRendezvous, Some(v2)) => {
            let (a, b) = (ce.v1.min(ce.v2.unwrap_or(0)), ce.v1.max(ce.v2.unwrap_or(0)));
            (a, b) == (e.v1.min(v2), e.v1.max(v2))
        }
        _ => ce.v1 == e.v1 && ce.v2 == e.v2,
    }
}

pub fn ce_matches(ce: &CeInstance, e: &LedgerEntry, slack: i64) -> bool {
    ce_kind(e.kind) == Some(ce.name)
        && same_vessels(ce, e)
        && overlaps(
            ce.when.start().0,
            ce.when.end().map(|t| t.0),
            e.t_start,
            e.t_end,
            slack,
        )
}

pub fn stop_matches(cp: &CriticalPoint, e: &LedgerEntry, slack: i64) -> bool {
    cp.annotation == Annotation::Stopped
        && cp.mmsi == e.v1
        && overlaps(cp.t_start.0, Some(cp.t_end.0), e.t_start, e.t_end, slack)
}

#[derive(Debug, Default)]
pub struct Score {
    pub planted: usize,
    pub missed: Vec<LedgerEntry>,
    pub unexplained: Vec<CeInstance>,
}

/// Recall over the planted kinds in `kinds`, and CEs no ledger entry explains.
pub fn score(fleet: &SyntheticFleet, out: &RunOutput, kinds: &[PlantKind], slack: i64) -> Score {
    let mut s = Score::default();
    for e in fleet.ledger.iter().filter(|e| kinds.contains(&e.kind)) {
        s.planted += 1;
        let found = match e.kind {
            PlantKind::Stop => out
                .critical_points
                .iter()
                .any(|cp| stop_matches(cp, e, slack)),
            PlantKind::Turn => out.critical_points.iter().any(|cp| {
                cp.mmsi == e.v1
                    && cp.annotation == Annotation::Turn
                    && overlaps(cp.t_start.0, Some(cp.t_end.0), e.t_start, e.t_end, slack)
            }),
            _ => out.ces.iter().any(|ce| ce_matches(ce, e, slack)),
        };
        if !found {
            s.missed.push(*e);
        }
    }
    s.unexplained = out
        .ces
        .iter()
        .filter(|ce| !fleet.ledger.iter().any(|e| ce_matches(ce, e, slack)))
        .cloned()
        .collect();
    s
}

pub fn at(t: i64) -> Timestamp {
    Timestamp(t)
}

/// Hand-built track for fixtures that need exact geometry.
pub struct Leg {
    pub mmsi: u32,
    pub t: i64,
    pub pos: vesselwatch::GeoPoint,
    pub period: i64,
    pub out: Vec<vesselwatch::PositionReport>,
}

impl Leg {
    pub fn new(mmsi: u32, t: i64, pos: vesselwatch::GeoPoint, period: i64) -> Leg {
        let mut leg = Leg {
            mmsi,
            t,
            pos,
            period,
            out: Vec::new(),
        };
        leg.emit(pos);
        leg
    }

    fn emit(&mut self, pos: vesselwatch::GeoPoint) {
        self.out.push(vesselwatch::PositionReport {
            mmsi: self.mmsi,
            pos,
            tau: at(self.t),
        });
    }

    pub fn sail(&mut self, bearing: f64, knots: f64, steps: usize) -> &mut Self {
        let step_m = knots * 1852.0 / 3600.0 * self.period as f64;
        for _ in 0..steps {
            self.t += self.period;
            self.pos = self.pos.destination(bearing, step_m);
            self.emit(self.pos);
        }
        self
    }

    /// Reports scattered a few meters around the current spot.
    pub fn idle(&mut self, steps: usize) -> &mut Self {
        for i in 0..steps {
            self.t += self.period;
            let p = self
                .pos
                .destination((i as f64 * 137.0) % 360.0, 3.0 + (i % 3) as f64);
            self.emit(p);
        }
        self
    }

    /// No reports for `secs`, moving `drift_m` along `bearing` meanwhile.
    pub fn silent(&mut self, secs: i64, bearing: f64, drift_m: f64) -> &mut Self {
        self.t += secs;
        self.pos = self.pos.destination(bearing, drift_m);
        self.emit(self.pos);
        self
    }

    /// Starts `steps` reports north of `spot` so that sailing south at `knots`
    /// reaches it at `arrive`.
    pub fn arriving(
        mmsi: u32,
        spot: vesselwatch::GeoPoint,
        arrive: i64,
        knots: f64,
        steps: usize,
        period: i64,
    ) -> Leg {
        let dist = knots * 1852.0 / 3600.0 * (period * steps as i64) as f64;
        let mut leg = Leg::new(
            mmsi,
            arrive - period * steps as i64,
            spot.destination(0.0, dist),
            period,
        );
        leg.sail(180.0, knots, steps);
        leg.pos = spot;
        leg
    }
}

/// Merges tracks into one stream in time order.
pub fn merge(legs: Vec<Leg>) -> Vec<vesselwatch::PositionReport> {
    let mut all: Vec<_> = legs.into_iter().flat_map(|l| l.out).collect();
    all.sort_by_key(|r| (r.tau, r.mmsi));
    all
}
