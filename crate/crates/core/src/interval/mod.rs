//! Fluents over maximal intervals: inertia-based `holds_for`, membership,
//! intersection, and a sliding recognition window over movement events.

mod window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Timestamp;

pub use window::{EventInstance, RecognitionWindow};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntervalError {
    #[error("interval [{start}, {end}) is empty")]
    Empty { start: Timestamp, end: Timestamp },
    #[error("intervals out of order, overlapping or adjacent at {0}")]
    NotMaximal(Timestamp),
    #[error("open interval must be the last one")]
    OpenNotLast,
}

/// Closed-open `[start, end)`; `end == None` means still holding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: Timestamp,
    pub end: Option<Timestamp>,
}

impl Interval {
    pub fn closed(start: Timestamp, end: Timestamp) -> Self {
        Interval {
            start,
            end: Some(end),
        }
    }

    pub fn open(start: Timestamp) -> Self {
        Interval { start, end: None }
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        t >= self.start && self.end.is_none_or(|e| t < e)
    }

    fn end_or_max(&self) -> Timestamp {
        self.end.unwrap_or(Timestamp::MAX)
    }
}

/// Sorted, disjoint, non-adjacent intervals; only the last may be open.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaximalIntervalList(Vec<Interval>);

impl MaximalIntervalList {
    pub fn new(intervals: Vec<Interval>) -> Result<Self, IntervalError> {
        for (i, iv) in intervals.iter().enumerate() {
            match iv.end {
                Some(end) if end <= iv.start => {
                    return Err(IntervalError::Empty {
                        start: iv.start,
                        end,
                    })
                }
                None if i + 1 != intervals.len() => return Err(IntervalError::OpenNotLast),
                _ => {}
            }
            if let Some(next) = intervals.get(i + 1) {
                if iv.end_or_max() >= next.start {
                    return Err(IntervalError::NotMaximal(next.start));
                }
            }
        }
        Ok(MaximalIntervalList(intervals))
    }

    pub fn empty() -> Self {
        MaximalIntervalList(Vec::new())
    }

    /// Everything, the identity of intersection.
    pub fn full() -> Self {
        MaximalIntervalList(vec![Interval::open(Timestamp::MIN)])
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn holds_at(&self, t: Timestamp) -> bool {
        let i = self.0.partition_point(|iv| iv.start <= t);
        i > 0 && self.0[i - 1].contains(t)
    }

    /// Pointwise intersection with another list.
    pub fn intersect(&self, other: &MaximalIntervalList) -> MaximalIntervalList {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let mut out: Vec<Interval> = Vec::new();
        while i < a.len() && j < b.len() {
            let start = a[i].start.max(b[j].start);
            let end = match (a[i].end, b[j].end) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            };
            if end.is_none_or(|e| start < e) {
                push_merged(&mut out, Interval { start, end });
            }
            if a[i].end_or_max() <= b[j].end_or_max() {
                i += 1;
            } else {
                j += 1;
            }
        }
        MaximalIntervalList(out)
    }

    /// Only intervals that ended, dropping a trailing open one.
    pub fn closed_only(&self) -> impl Iterator<Item = (Timestamp, Timestamp)> + '_ {
        self.0.iter().filter_map(|iv| iv.end.map(|e| (iv.start, e)))
    }
}

fn push_merged(out: &mut Vec<Interval>, iv: Interval) {
    if let Some(last) = out.last_mut() {
        if last.end.is_some_and(|e| e >= iv.start) {
            last.end = match (last.end, iv.end) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
            return;
        }
    }
    out.push(iv);
}

/// Maximal intervals under inertia: an initiation switches the fluent on
/// unless it already holds, and the first later termination switches it off.
/// A termination coinciding with an initiation does not break the fluent.
pub fn holds_for(inits: &[Timestamp], terms: &[Timestamp]) -> MaximalIntervalList {
    let mut inits = inits.to_vec();
    let mut terms = terms.to_vec();
    inits.sort_unstable();
    inits.dedup();
    terms.sort_unstable();
    terms.dedup();

    let mut out = Vec::new();
    let mut start: Option<Timestamp> = None;
    let (mut i, mut j) = (0, 0);
    while i < inits.len() || j < terms.len() {
        let t = match (inits.get(i), terms.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        let init = inits.get(i) == Some(&t);
        let term = terms.get(j) == Some(&t);
        if init {
            i += 1;
        }
        if term {
            j += 1;
        }
        match start {
            None if init => start = Some(t),
            Some(s) if term && !init => {
                out.push(Interval::closed(s, t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Interval::open(s));
    }
    MaximalIntervalList(out)
}

/// Intersection of every list; the empty product is the full time line.
pub fn intersect_all(lists: &[MaximalIntervalList]) -> MaximalIntervalList {
    lists
        .iter()
        .fold(MaximalIntervalList::full(), |acc, l| acc.intersect(l))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Boundary {
    Start,
    End,
}

/// A start event at every interval start and an end event at every closed end.
pub fn start_end_events(list: &MaximalIntervalList) -> Vec<(Boundary, Timestamp)> {
    let mut out = Vec::with_capacity(list.len() * 2);
    for iv in list.intervals() {
        out.push((Boundary::Start, iv.start));
        if let Some(e) = iv.end {
            out.push((Boundary::End, e));
        }
    }
    out
}
