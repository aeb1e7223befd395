//! Standard Workload Format traces and synthetic predictions.
//!
//! A job becomes the interval `(submit + wait, submit + wait + run)`. Experiment
//! instances draw half of the distinct intervals as the online input, in random
//! order, and keep the rest as a pool of false positives for [`perturb`].
//!
//! All randomness comes from `Xoshiro256PlusPlus` seeded through
//! `SeedableRng::seed_from_u64`, so a seed fixes the instance on every platform.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;
use thiserror::Error;

use crate::intervals::{Interval, IntervalSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("need at least 2 distinct jobs, got {0}")]
    TooFewJobs(usize),
    #[error("d = {d} out of range for {variant:?} (max {max})")]
    DOutOfRange { d: usize, max: usize, variant: Variant },
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
}

impl From<std::io::Error> for WorkloadError {
    fn from(e: std::io::Error) -> Self {
        WorkloadError::Io(e.to_string())
    }
}

/// One usable job of a trace, times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceJob {
    pub job_id: u64,
    pub submit_time: u64,
    pub wait_time: u64,
    pub run_time: u64,
}

impl TraceJob {
    pub fn interval(&self) -> Interval {
        let start = self.submit_time + self.wait_time;
        Interval::of(start, start + self.run_time)
    }
}

/// Parsed trace plus what was dropped on the way.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SwfTrace {
    pub jobs: Vec<TraceJob>,
    pub skipped_nonpositive_run: usize,
    pub skipped_negative_wait: usize,
    pub skipped_negative_submit: usize,
}

impl SwfTrace {
    pub fn skipped(&self) -> usize {
        self.skipped_nonpositive_run + self.skipped_negative_wait + self.skipped_negative_submit
    }
}

// SWF writes missing values as -1 and some archives print integral fields
// with a trailing ".0".
fn swf_field(text: &str) -> Option<i64> {
    text.parse::<i64>().ok().or_else(|| {
        let v: f64 = text.parse().ok()?;
        (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
    })
}

/// Reads an SWF trace. Lines starting with `;` are comments.
pub fn parse_swf(reader: impl BufRead) -> Result<SwfTrace, WorkloadError> {
    let mut trace = SwfTrace::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let body = line.trim();
        if body.is_empty() || body.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(WorkloadError::Parse {
                line: lineno,
                message: format!("expected at least 4 fields, got {}", fields.len()),
            });
        }
        let mut values = [0i64; 4];
        for (slot, text) in values.iter_mut().zip(&fields) {
            *slot = swf_field(text)
                .ok_or_else(|| WorkloadError::Parse { line: lineno, message: format!("not an integer: {text:?}") })?;
        }
        let [job_id, submit, wait, run] = values;
        if run <= 0 {
            trace.skipped_nonpositive_run += 1;
        } else if wait < 0 {
            trace.skipped_negative_wait += 1;
        } else if submit < 0 {
            trace.skipped_negative_submit += 1;
        } else {
            trace.jobs.push(TraceJob {
                job_id: job_id.max(0) as u64,
                submit_time: submit as u64,
                wait_time: wait as u64,
                run_time: run as u64,
            });
        }
    }
    Ok(trace)
}

/// Distinct intervals of the jobs. Jobs with identical start and end collapse.
pub fn distinct_intervals(jobs: &[TraceJob]) -> IntervalSet {
    jobs.iter().map(TraceJob::interval).collect()
}

/// The numbers written next to an ingested interval file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    /// Usable jobs after filtering.
    pub n_jobs: usize,
    pub skipped: usize,
    pub skipped_nonpositive_run: usize,
    pub skipped_negative_wait: usize,
    pub skipped_negative_submit: usize,
    pub distinct_intervals: usize,
    pub max_length: u64,
    pub avg_length: f64,
}

pub fn summarize(trace: &SwfTrace) -> TraceSummary {
    let lengths = trace.jobs.iter().map(|j| j.run_time);
    let total: u128 = lengths.clone().map(u128::from).sum();
    TraceSummary {
        n_jobs: trace.jobs.len(),
        skipped: trace.skipped(),
        skipped_nonpositive_run: trace.skipped_nonpositive_run,
        skipped_negative_wait: trace.skipped_negative_wait,
        skipped_negative_submit: trace.skipped_negative_submit,
        distinct_intervals: distinct_intervals(&trace.jobs).len(),
        max_length: lengths.max().unwrap_or(0),
        avg_length: if trace.jobs.is_empty() { 0.0 } else { total as f64 / trace.jobs.len() as f64 },
    }
}

/// Online input plus the intervals held back for false positives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentInstance {
    pub input_order: Vec<Interval>,
    pub holdout_pool: IntervalSet,
    pub seed: u64,
}

impl ExperimentInstance {
    pub fn n(&self) -> usize {
        self.input_order.len()
    }

    pub fn input_set(&self) -> IntervalSet {
        self.input_order.iter().copied().collect()
    }
}

/// Picks `floor(N/2)` of the `N` intervals uniformly, in uniformly random order.
pub fn sample_instance(pool: &IntervalSet, seed: u64) -> Result<ExperimentInstance, WorkloadError> {
    if pool.len() < 2 {
        return Err(WorkloadError::TooFewJobs(pool.len()));
    }
    let mut items: Vec<Interval> = pool.iter().copied().collect();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let n = items.len() / 2;
    let holdout_pool = items.split_off(n).into_iter().collect();
    Ok(ExperimentInstance { input_order: items, holdout_pool, seed })
}

/// How a prediction departs from the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `d` false negatives and `d` false positives.
    Balanced,
    /// `d` false negatives only.
    FnOnly,
    /// `d` false positives only.
    FpOnly,
}

impl FromStr for Variant {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "balanced" => Ok(Variant::Balanced),
            "fn_only" | "fn-only" => Ok(Variant::FnOnly),
            "fp_only" | "fp-only" => Ok(Variant::FpOnly),
            other => Err(WorkloadError::UnknownVariant(other.to_string())),
        }
    }
}

/// Largest `d` the variant allows on `instance`.
pub fn max_d(instance: &ExperimentInstance, variant: Variant) -> usize {
    match variant {
        Variant::Balanced => instance.n().min(instance.holdout_pool.len()),
        Variant::FnOnly => instance.n(),
        Variant::FpOnly => instance.holdout_pool.len(),
    }
}

fn pick(set: &IntervalSet, amount: usize, rng: &mut Xoshiro256PlusPlus) -> BTreeSet<Interval> {
    let items: Vec<Interval> = set.iter().copied().collect();
    index::sample(rng, items.len(), amount).into_iter().map(|i| items[i]).collect()
}

/// Builds a prediction by dropping `d` random input intervals and/or adding
/// `d` random pool intervals, depending on `variant`.
pub fn perturb(
    instance: &ExperimentInstance,
    d: usize,
    seed: u64,
    variant: Variant,
) -> Result<IntervalSet, WorkloadError> {
    let max = max_d(instance, variant);
    if d > max {
        return Err(WorkloadError::DOutOfRange { d, max, variant });
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let input = instance.input_set();
    let dropped = match variant {
        Variant::Balanced | Variant::FnOnly => pick(&input, d, &mut rng),
        Variant::FpOnly => BTreeSet::new(),
    };
    let added = match variant {
        Variant::Balanced | Variant::FpOnly => pick(&instance.holdout_pool, d, &mut rng),
        Variant::FnOnly => BTreeSet::new(),
    };
    Ok(input.difference(&dropped).chain(added.iter()).copied().collect())
}
