//! Intervals on a path, the earliest-finish-time optimum and the exhaustive
//! oracle used to check it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::Serialize;
use thiserror::Error;

use crate::model::{self, FeasibleIndex, OracleError, Request};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntervalError {
    #[error("interval ({start}, {end}) is empty: start must be below end")]
    Empty { start: u64, end: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for IntervalError {
    fn from(e: std::io::Error) -> Self {
        IntervalError::Io(e.to_string())
    }
}

/// A half-open interval `(start, end)` occupying edges `start..end` of a path.
///
/// Intervals are ordered by `(end, start)`, which is the order the
/// earliest-finish-time rule scans them in.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Interval {
    start: u64,
    end: u64,
}

impl Interval {
    pub fn new(start: u64, end: u64) -> Result<Self, IntervalError> {
        if start < end {
            Ok(Interval { start, end })
        } else {
            Err(IntervalError::Empty { start, end })
        }
    }

    /// Panicking constructor for literals in tests and fixed constructions.
    pub fn of(start: u64, end: u64) -> Self {
        Interval::new(start, end).expect("valid interval literal")
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn end(&self) -> u64 {
        self.end
    }

    /// Number of edges covered.
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The same interval moved `by` vertices to the left.
    pub fn shifted_left(&self, by: u64) -> Self {
        Interval { start: self.start - by, end: self.end - by }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.start, self.end)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.start, self.end)
    }
}

impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.end, self.start).cmp(&(other.end, other.start))
    }
}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Duplicate-free set of intervals in `(end, start)` order.
pub type IntervalSet = BTreeSet<Interval>;

/// True iff the intervals share at least one edge. Touching endpoints do not
/// overlap.
pub fn overlaps(a: &Interval, b: &Interval) -> bool {
    a.start < b.end && b.start < a.end
}

/// A feasible selection of intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub chosen: IntervalSet,
}

impl Solution {
    pub fn profit(&self) -> usize {
        self.chosen.len()
    }

    pub fn is_feasible(&self) -> bool {
        let mut last_end = 0;
        // Sorted by end; a feasible set is also sorted by start.
        self.chosen.iter().all(|iv| {
            let ok = iv.start >= last_end;
            last_end = iv.end;
            ok
        })
    }
}

/// Earliest-finish-time optimum: scan by `(end, start)` and keep every
/// interval that starts at or after the last kept end.
pub fn opt_eft(requests: &IntervalSet) -> Solution {
    let mut chosen = IntervalSet::new();
    let mut last_end = 0;
    for iv in requests {
        if iv.start >= last_end {
            last_end = iv.end;
            chosen.insert(*iv);
        }
    }
    Solution { chosen }
}

/// Exhaustive optimum for at most [`model::BRUTE_FORCE_CAP`] intervals.
pub fn opt_bruteforce(requests: &IntervalSet) -> Result<Solution, OracleError> {
    model::brute_force_optimum(requests).map(|chosen| Solution { chosen })
}

/// Feasible interval set keyed by start vertex.
///
/// In a feasible set starts are distinct and sorted starts imply sorted ends,
/// so the members overlapping a query form a contiguous run just below the
/// query's end.
#[derive(Debug, Clone, Default)]
pub struct IntervalIndex {
    by_start: BTreeMap<u64, Interval>,
}

impl FeasibleIndex<Interval> for IntervalIndex {
    fn insert(&mut self, r: Interval) {
        self.by_start.insert(r.start, r);
    }

    fn remove(&mut self, r: &Interval) -> bool {
        match self.by_start.get(&r.start) {
            Some(found) if found == r => {
                self.by_start.remove(&r.start);
                true
            }
            _ => false,
        }
    }

    fn contains(&self, r: &Interval) -> bool {
        self.by_start.get(&r.start) == Some(r)
    }

    fn conflicting(&self, r: &Interval) -> Vec<Interval> {
        let mut hits: Vec<Interval> =
            self.by_start.range(..r.end).rev().map(|(_, iv)| *iv).take_while(|iv| iv.end > r.start).collect();
        hits.reverse();
        hits
    }

    fn len(&self) -> usize {
        self.by_start.len()
    }

    fn members(&self) -> BTreeSet<Interval> {
        self.by_start.values().copied().collect()
    }
}

impl Request for Interval {
    type Index = IntervalIndex;

    fn conflicts(&self, other: &Self) -> bool {
        overlaps(self, other)
    }

    fn can_displace(&self, planned: &Self) -> bool {
        planned.end >= self.end
    }

    fn optimum(requests: &BTreeSet<Self>) -> BTreeSet<Self> {
        opt_eft(requests).chosen
    }
}

/// Largest end vertex, i.e. the shortest path length that holds every interval.
pub fn path_len<'a>(intervals: impl IntoIterator<Item = &'a Interval>) -> u64 {
    intervals.into_iter().map(Interval::end).max().unwrap_or(0)
}

/// Reads one interval per line as `start end`. Blank lines and lines starting
/// with `#` are ignored. Order and repetitions are preserved.
pub fn read_intervals(reader: impl BufRead) -> Result<Vec<Interval>, IntervalError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let mut next = |what: &str| -> Result<u64, IntervalError> {
            let raw = fields
                .next()
                .ok_or_else(|| IntervalError::Parse { line: lineno, message: format!("missing {what}") })?;
            raw.parse().map_err(|_| IntervalError::Parse { line: lineno, message: format!("bad {what} {raw:?}") })
        };
        let start = next("start")?;
        let end = next("end")?;
        if fields.next().is_some() {
            return Err(IntervalError::Parse { line: lineno, message: "expected two fields".into() });
        }
        let iv =
            Interval::new(start, end).map_err(|e| IntervalError::Parse { line: lineno, message: e.to_string() })?;
        out.push(iv);
    }
    Ok(out)
}

/// Writes intervals in the format accepted by [`read_intervals`].
pub fn write_intervals<'a>(
    mut sink: impl std::io::Write,
    intervals: impl IntoIterator<Item = &'a Interval>,
) -> std::io::Result<()> {
    for iv in intervals {
        writeln!(sink, "{iv}")?;
    }
    Ok(())
}
