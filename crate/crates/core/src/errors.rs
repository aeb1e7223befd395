//! Prediction error: the TP/FP/FN partition, `eta = OPT(FP ∪ FN)` and its
//! normalisation `gamma = eta / OPT(I)`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::intervals::{opt_bruteforce, opt_eft, IntervalSet};
use crate::model::{Request, BRUTE_FORCE_CAP};
use crate::Rational;

/// Partition of input and prediction plus the derived error values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorBreakdown<R: Ord> {
    pub tp: BTreeSet<R>,
    pub fp: BTreeSet<R>,
    pub fn_: BTreeSet<R>,
    pub eta: u64,
    pub opt_input: u64,
    /// `None` when `opt_input == 0`.
    pub gamma: Option<Rational>,
}

impl<R: Ord> ErrorBreakdown<R> {
    pub fn gamma_undefined(&self) -> bool {
        self.gamma.is_none()
    }
}

/// Normalised error, undefined for an empty optimum.
pub fn gamma(eta: u64, opt_input: u64) -> Option<Rational> {
    (opt_input > 0).then(|| Rational::new(eta as i64, opt_input as i64))
}

/// Splits `input` and `prediction` into TP/FP/FN and computes `eta`, `gamma`.
pub fn classify<R: Request>(input: &BTreeSet<R>, prediction: &BTreeSet<R>) -> ErrorBreakdown<R> {
    let tp: BTreeSet<R> = input.intersection(prediction).copied().collect();
    let fp: BTreeSet<R> = prediction.difference(input).copied().collect();
    let fn_: BTreeSet<R> = input.difference(prediction).copied().collect();
    let wrong: BTreeSet<R> = fp.union(&fn_).copied().collect();
    let eta = R::optimum(&wrong).len() as u64;
    let opt_input = R::optimum(input).len() as u64;
    ErrorBreakdown { tp, fp, fn_, eta, opt_input, gamma: gamma(eta, opt_input) }
}

/// `eta(prediction, input)` alone.
pub fn eta<R: Request>(input: &BTreeSet<R>, prediction: &BTreeSet<R>) -> u64 {
    let wrong: BTreeSet<R> = input.symmetric_difference(prediction).copied().collect();
    R::optimum(&wrong).len() as u64
}

/// `|FP| + |FN|`, kept for comparison with `eta`.
pub fn hamming_error<R: Ord>(input: &BTreeSet<R>, prediction: &BTreeSet<R>) -> u64 {
    input.symmetric_difference(prediction).count() as u64
}

/// Outcome of checking the three error-measure properties on one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub eta: u64,
    pub opt_input: u64,
    pub opt_prediction: u64,
    /// Turning any FN into a TP does not increase the error.
    pub monotone_fn_to_tp: bool,
    /// Dropping any FP from the prediction does not increase the error.
    pub monotone_fp_dropped: bool,
    /// `eta >= |OPT(I) - OPT(Î)|`.
    pub lipschitz: bool,
    /// `eta <= OPT(FP ∪ FN)`, with the right side recomputed independently.
    pub lipschitz_complete: bool,
}

impl PropertyReport {
    pub fn all_hold(&self) -> bool {
        self.monotone_fn_to_tp && self.monotone_fp_dropped && self.lipschitz && self.lipschitz_complete
    }
}

/// Checks monotonicity, the Lipschitz property and Lipschitz-completeness of
/// `eta` on a single interval instance.
pub fn check_properties(input: &IntervalSet, prediction: &IntervalSet) -> PropertyReport {
    let base = eta(input, prediction);

    let monotone_fn_to_tp = input.difference(prediction).all(|x| {
        let mut improved = prediction.clone();
        improved.insert(*x);
        eta(input, &improved) <= base
    });
    let monotone_fp_dropped = prediction.difference(input).all(|y| {
        let mut improved = prediction.clone();
        improved.remove(y);
        eta(input, &improved) <= base
    });

    let opt_input = opt_eft(input).profit() as u64;
    let opt_prediction = opt_eft(prediction).profit() as u64;
    let lipschitz = base >= opt_input.abs_diff(opt_prediction);

    let wrong: IntervalSet = input.symmetric_difference(prediction).copied().collect();
    let reference = if wrong.len() <= BRUTE_FORCE_CAP {
        opt_bruteforce(&wrong).expect("size checked").profit()
    } else {
        opt_eft(&wrong).profit()
    } as u64;
    let lipschitz_complete = base <= reference;

    PropertyReport {
        eta: base,
        opt_input,
        opt_prediction,
        monotone_fn_to_tp,
        monotone_fp_dropped,
        lipschitz,
        lipschitz_complete,
    }
}
