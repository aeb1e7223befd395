//! Online interval scheduling with (possibly erroneous) predictions.
//!
//! The crate provides:
//!
//! * [`intervals`]: half-open integral intervals, the earliest-finish-time
//!   offline optimum and an exhaustive oracle for small instances.
//! * [`errors`]: the TP/FP/FN partition of a prediction and the error
//!   measure `eta = OPT(FP ∪ FN)` with its normalisation `gamma`.
//! * [`algorithms`]: Greedy, Trust, TrustGreedy, CRS and RobustTrust behind a
//!   single request-at-a-time interface.
//! * [`adversaries`]: adaptive lower-bound constructions that duel an online
//!   algorithm and check the corresponding bound exactly.
//! * [`workloads`]: Standard Workload Format ingestion and noisy prediction
//!   synthesis.
//! * [`harness`]: the error sweep that runs every algorithm and emits CSV.

pub mod adversaries;
pub mod algorithms;
pub mod errors;
pub mod harness;
pub mod intervals;
pub mod model;
pub mod workloads;

pub use intervals::{opt_bruteforce, opt_eft, overlaps, Interval, IntervalSet, Solution};
pub use model::{Decision, FeasibleIndex, Request};

/// Exact rational used for normalised errors, expectations and bound checks.
pub type Rational = num_rational::Ratio<i64>;

/// Renders a rational as `p/q`, or `p` when the denominator is one.
pub fn fmt_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p/q` or a bare integer into a reduced rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            if d == 0 {
                None
            } else {
                Some(Rational::new(n, d))
            }
        }
        None => text.parse::<i64>().ok().map(Rational::from_integer),
    }
}
