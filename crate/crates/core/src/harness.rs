//! Prediction-error sweeps over a workload trace.
//!
//! A sweep samples one [`ExperimentInstance`] from the trace, then for each
//! `d` on an evenly spaced grid over `[0, n]` builds a perturbed prediction and
//! records the profit of every requested algorithm. Each row draws its
//! randomness from a seed derived from `(seed, d)` alone, so the output does
//! not depend on how rows are spread over worker threads.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algorithms::{crs_expected, robusttrust_expected, run_greedy, run_trust, run_trustgreedy, AlgorithmError};
use crate::errors::{classify, eta, gamma};
use crate::intervals::{opt_eft, Interval, IntervalSet};
use crate::workloads::{
    distinct_intervals, max_d, parse_swf, perturb, sample_instance, summarize, ExperimentInstance, TraceSummary,
    Variant, WorkloadError,
};
use crate::{fmt_rational, Rational};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error("row d={d}: {source}")]
    Row { d: usize, source: Box<HarnessError> },
    #[error("row d={d} failed verification: {message}")]
    Verification { d: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("write failed: {0}")]
    Write(String),
}

/// Columns a sweep can fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAlgorithm {
    Opt,
    Greedy,
    Trust,
    TrustGreedy,
    CrsExpected,
}

impl SweepAlgorithm {
    pub const DEFAULT: [SweepAlgorithm; 4] =
        [SweepAlgorithm::Opt, SweepAlgorithm::Greedy, SweepAlgorithm::Trust, SweepAlgorithm::TrustGreedy];
}

impl FromStr for SweepAlgorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "opt" => Ok(SweepAlgorithm::Opt),
            "greedy" => Ok(SweepAlgorithm::Greedy),
            "trust" => Ok(SweepAlgorithm::Trust),
            "trustgreedy" => Ok(SweepAlgorithm::TrustGreedy),
            "crs_expected" | "crs" => Ok(SweepAlgorithm::CrsExpected),
            other => Err(HarnessError::Config(format!("unknown sweep algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub trace_path: PathBuf,
    pub variant: Variant,
    pub steps: usize,
    pub seed: u64,
    pub algorithms: Vec<SweepAlgorithm>,
    /// Adds a RobustTrust expected-profit column.
    pub alpha: Option<Rational>,
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
}

impl SweepConfig {
    pub fn new(trace_path: impl Into<PathBuf>) -> Self {
        SweepConfig {
            trace_path: trace_path.into(),
            variant: Variant::Balanced,
            steps: 1000,
            seed: 0,
            algorithms: SweepAlgorithm::DEFAULT.to_vec(),
            alpha: None,
            workers: None,
        }
    }

    fn wants(&self, a: SweepAlgorithm) -> bool {
        self.algorithms.contains(&a)
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub d: usize,
    pub eta: u64,
    #[serde(serialize_with = "ser_opt_rational")]
    pub gamma: Option<Rational>,
    pub gamma_undefined: bool,
    pub opt: u64,
    pub greedy: Option<u64>,
    pub trust: Option<u64>,
    pub trustgreedy: Option<u64>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub crs_expected: Option<Rational>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub robusttrust_expected: Option<Rational>,
}

fn ser_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&fmt_rational(r)),
        None => s.serialize_none(),
    }
}

/// Result of a sweep with the instance it ran on.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub summary: Option<TraceSummary>,
    pub instance: ExperimentInstance,
    pub rows: Vec<SweepRow>,
}

/// `round(k * n / (steps - 1))` for `k < steps`, deduplicated. One step gives `{0}`.
pub fn d_grid(n: usize, steps: usize) -> Vec<usize> {
    if steps <= 1 {
        return vec![0];
    }
    let den = (steps - 1) as u128;
    let mut grid: Vec<usize> = (0..steps as u128).map(|k| ((2 * k * n as u128 + den) / (2 * den)) as usize).collect();
    grid.dedup();
    grid
}

/// Seed for the row at `d`: SplitMix64 finalizer over the sweep seed and `d`.
pub fn row_seed(seed: u64, d: usize) -> u64 {
    let mut z = seed ^ (d as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Prediction-independent values, computed once per sweep.
struct Shared {
    input: IntervalSet,
    opt: u64,
    greedy: Option<u64>,
    crs: Option<Rational>,
    /// Offset and path length for CRS, which needs coordinates from zero.
    /// The offset is taken over the whole pool so predictions shift too.
    shift: u64,
    path: u64,
    shifted_order: Vec<Interval>,
}

fn shared(instance: &ExperimentInstance, config: &SweepConfig) -> Result<Shared, HarnessError> {
    let input = instance.input_set();
    let opt = opt_eft(&input).profit() as u64;
    let greedy = config.wants(SweepAlgorithm::Greedy).then(|| run_greedy(&instance.input_order).profit() as u64);
    let shift = input.iter().chain(&instance.holdout_pool).map(Interval::start).min().unwrap_or(0);
    let shifted_order: Vec<Interval> = instance.input_order.iter().map(|x| x.shifted_left(shift)).collect();
    let path = shifted_order.iter().map(Interval::end).max().unwrap_or(1).max(1);
    let need_crs = config.wants(SweepAlgorithm::CrsExpected) || config.alpha.is_some();
    let crs = if need_crs { Some(crs_expected(path, &shifted_order)?) } else { None };
    Ok(Shared { input, opt, greedy, crs, shift, path, shifted_order })
}

fn compute_row(
    instance: &ExperimentInstance,
    config: &SweepConfig,
    shared: &Shared,
    d: usize,
) -> Result<SweepRow, HarnessError> {
    let prediction = perturb(instance, d, row_seed(config.seed, d), config.variant)?;
    let e = eta(&shared.input, &prediction);
    let g = gamma(e, shared.opt);
    let trust =
        config.wants(SweepAlgorithm::Trust).then(|| run_trust(&prediction, &instance.input_order).profit() as u64);
    let needs_tg = config.wants(SweepAlgorithm::TrustGreedy) || config.alpha.is_some();
    let tg = needs_tg.then(|| run_trustgreedy(&prediction, &instance.input_order).profit() as u64);
    let robusttrust_expected = match (config.alpha, shared.crs, tg) {
        (Some(alpha), Some(crs), Some(tg)) => {
            Some(alpha * Rational::from_integer(tg as i64) + (Rational::from_integer(1) - alpha) * crs)
        }
        _ => None,
    };
    Ok(SweepRow {
        d,
        eta: e,
        gamma: g,
        gamma_undefined: g.is_none(),
        opt: shared.opt,
        greedy: shared.greedy,
        trust,
        trustgreedy: tg.filter(|_| config.wants(SweepAlgorithm::TrustGreedy)),
        crs_expected: shared.crs.filter(|_| config.wants(SweepAlgorithm::CrsExpected)),
        robusttrust_expected,
    })
}

fn validate(config: &SweepConfig) -> Result<(), HarnessError> {
    if config.steps == 0 {
        return Err(HarnessError::Config("steps must be at least 1".into()));
    }
    if config.algorithms.is_empty() {
        return Err(HarnessError::Config("no algorithms selected".into()));
    }
    if config.workers == Some(0) {
        return Err(HarnessError::Config("workers must be at least 1".into()));
    }
    if let Some(a) = config.alpha {
        if a < Rational::from_integer(0) || a > Rational::from_integer(1) {
            return Err(HarnessError::Config(format!("alpha {} outside [0, 1]", fmt_rational(&a))));
        }
    }
    Ok(())
}

/// Sweeps an already sampled instance.
pub fn sweep_instance(instance: &ExperimentInstance, config: &SweepConfig) -> Result<Vec<SweepRow>, HarnessError> {
    validate(config)?;
    let cap = max_d(instance, config.variant);
    let grid: Vec<usize> = d_grid(instance.n(), config.steps).into_iter().filter(|&d| d <= cap).collect();
    let shared = shared(instance, config)?;
    let work = || -> Result<Vec<SweepRow>, HarnessError> {
        grid.par_iter()
            .map(|&d| {
                compute_row(instance, config, &shared, d).map_err(|e| HarnessError::Row { d, source: Box::new(e) })
            })
            .collect()
    };
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Sweeps the distinct intervals of a set of jobs or any interval pool.
pub fn run_sweep_on(pool: &IntervalSet, config: &SweepConfig) -> Result<Sweep, HarnessError> {
    let instance = sample_instance(pool, config.seed)?;
    let rows = sweep_instance(&instance, config)?;
    Ok(Sweep { summary: None, instance, rows })
}

/// Reads the SWF trace named in `config` and sweeps it.
pub fn run_sweep(config: &SweepConfig) -> Result<Sweep, HarnessError> {
    let path = config.trace_path.display().to_string();
    let file =
        File::open(&config.trace_path).map_err(|e| HarnessError::Io { path: path.clone(), message: e.to_string() })?;
    let trace = parse_swf(BufReader::new(file))?;
    let pool = distinct_intervals(&trace.jobs);
    let mut sweep = run_sweep_on(&pool, config)?;
    sweep.summary = Some(summarize(&trace));
    Ok(sweep)
}

fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes rows as CSV. Undefined gamma is written as `0,0,` in the three
/// gamma columns. A `crs_expected` or `robusttrust_expected` column is
/// present when the first row carries that value.
pub fn emit_csv(rows: &[SweepRow], sink: impl Write) -> Result<(), HarnessError> {
    let with_crs = rows.first().is_some_and(|r| r.crs_expected.is_some());
    let with_rt = rows.first().is_some_and(|r| r.robusttrust_expected.is_some());
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["d", "eta", "gamma_num", "gamma_den", "gamma_float", "opt", "greedy", "trust", "trustgreedy"];
    if with_crs {
        header.push("crs_expected");
    }
    if with_rt {
        header.push("robusttrust_expected");
    }
    let fail = |e: csv::Error| HarnessError::Write(e.to_string());
    w.write_record(&header).map_err(fail)?;
    for r in rows {
        let (num, den, float) = match r.gamma {
            Some(g) => {
                (g.numer().to_string(), g.denom().to_string(), (*g.numer() as f64 / *g.denom() as f64).to_string())
            }
            None => ("0".into(), "0".into(), String::new()),
        };
        let mut rec = vec![
            r.d.to_string(),
            r.eta.to_string(),
            num,
            den,
            float,
            r.opt.to_string(),
            opt_cell(r.greedy),
            opt_cell(r.trust),
            opt_cell(r.trustgreedy),
        ];
        if with_crs {
            rec.push(r.crs_expected.map(|c| fmt_rational(&c)).unwrap_or_default());
        }
        if with_rt {
            rec.push(r.robusttrust_expected.map(|c| fmt_rational(&c)).unwrap_or_default());
        }
        w.write_record(&rec).map_err(fail)?;
    }
    w.flush().map_err(|e| HarnessError::Write(e.to_string()))
}

/// Writes rows as JSON lines.
pub fn emit_jsonl(rows: &[SweepRow], mut sink: impl Write) -> Result<(), HarnessError> {
    for r in rows {
        let line = serde_json::to_string(r).map_err(|e| HarnessError::Write(e.to_string()))?;
        writeln!(sink, "{line}").map_err(|e| HarnessError::Write(e.to_string()))?;
    }
    Ok(())
}

/// Rechecks a seeded 1% sample of rows (at least one) from scratch, and
/// checks the row-level inequalities on every row.
///
/// Returns the `d` values that were recomputed.
pub fn verify_rows(
    instance: &ExperimentInstance,
    config: &SweepConfig,
    rows: &[SweepRow],
) -> Result<Vec<usize>, HarnessError> {
    let bad = |d, message: String| HarnessError::Verification { d, message };
    for r in rows {
        let profits = [r.greedy, r.trust, r.trustgreedy].into_iter().flatten();
        if profits.clone().any(|p| p > r.opt) {
            return Err(bad(r.d, "profit above optimum".into()));
        }
        if r.trust.is_some_and(|t| t + 2 * r.eta < r.opt) {
            return Err(bad(r.d, format!("trust {} below opt {} - 2*eta {}", r.trust.unwrap(), r.opt, r.eta)));
        }
        if r.trustgreedy.is_some_and(|t| t + r.eta < r.opt) {
            return Err(bad(
                r.d,
                format!("trustgreedy {} below opt {} - eta {}", r.trustgreedy.unwrap(), r.opt, r.eta),
            ));
        }
    }
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let amount = rows.len().div_ceil(100);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed ^ 0x5EED_0FC0_FFEE);
    let mut picked: Vec<usize> = index::sample(&mut rng, rows.len(), amount).into_iter().collect();
    picked.sort_unstable();

    let input = instance.input_set();
    let mut checked = Vec::with_capacity(amount);
    for i in picked {
        let row = &rows[i];
        let prediction = perturb(instance, row.d, row_seed(config.seed, row.d), config.variant)?;
        let b = classify(&input, &prediction);
        if b.eta != row.eta || b.opt_input != row.opt || b.gamma != row.gamma {
            return Err(bad(row.d, format!("error measure mismatch: eta {} vs {}", b.eta, row.eta)));
        }
        if row.trust.is_some_and(|t| t != run_trust(&prediction, &instance.input_order).profit() as u64) {
            return Err(bad(row.d, "trust profit mismatch".into()));
        }
        let tg = run_trustgreedy(&prediction, &instance.input_order).profit() as u64;
        if row.trustgreedy.is_some_and(|t| t != tg) {
            return Err(bad(row.d, "trustgreedy profit mismatch".into()));
        }
        if row.greedy.is_some_and(|g| g != run_greedy(&instance.input_order).profit() as u64) {
            return Err(bad(row.d, "greedy profit mismatch".into()));
        }
        if row.crs_expected.is_some() || row.robusttrust_expected.is_some() {
            let s = shared(instance, config)?;
            if row.crs_expected.is_some_and(|c| Some(c) != s.crs) {
                return Err(bad(row.d, "crs expectation mismatch".into()));
            }
            if let Some(alpha) = config.alpha {
                let shifted: IntervalSet = prediction.iter().map(|x| x.shifted_left(s.shift)).collect();
                let out = robusttrust_expected(s.path, &shifted, &s.shifted_order, alpha)?;
                if row.robusttrust_expected != Some(out.expected_profit) {
                    return Err(bad(row.d, "robusttrust expectation mismatch".into()));
                }
            }
        }
        checked.push(row.d);
    }
    Ok(checked)
}
