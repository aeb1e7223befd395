//! Online schedulers behind a request-at-a-time interface.
//!
//! Every scheduler is built from the prediction alone and then sees requests
//! one by one through [`OnlineAlgorithm::decide`]; there is no way to peek at
//! later requests. [`run_online`] drives a scheduler over a whole sequence and
//! records an [`OnlineRun`].

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::intervals::{path_len, Interval, IntervalIndex, IntervalSet};
use crate::model::{Decision, FeasibleIndex, Request};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgorithmError {
    #[error("level {level} out of range 1..={levels}")]
    LevelOutOfRange { level: u32, levels: u32 },
    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(Rational),
    #[error("interval {interval:?} does not fit on a path of {m} edges")]
    OffPath { interval: Interval, m: u64 },
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
}

/// A deterministic online scheduler.
pub trait OnlineAlgorithm<R> {
    fn decide(&mut self, request: R) -> Decision;
}

impl<R, A: OnlineAlgorithm<R> + ?Sized> OnlineAlgorithm<R> for Box<A> {
    fn decide(&mut self, request: R) -> Decision {
        (**self).decide(request)
    }
}

/// Full record of one scheduler run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OnlineRun<R: Ord> {
    pub prediction: BTreeSet<R>,
    pub sequence: Vec<R>,
    pub decisions: Vec<Decision>,
    pub accepted: BTreeSet<R>,
}

impl<R: Ord> OnlineRun<R> {
    pub fn profit(&self) -> usize {
        self.accepted.len()
    }

    /// `A`/`R` per request.
    pub fn decision_string(&self) -> String {
        self.decisions.iter().map(|d| d.as_char()).collect()
    }
}

/// Feeds `sequence` to `algorithm` in order.
///
/// # Panics
///
/// If the algorithm accepts a request that conflicts with one it accepted
/// earlier; every scheduler here must keep its accepted set feasible.
pub fn run_online<R: Request, A: OnlineAlgorithm<R> + ?Sized>(
    algorithm: &mut A,
    prediction: &BTreeSet<R>,
    sequence: &[R],
) -> OnlineRun<R> {
    let mut accepted = R::Index::default();
    let mut decisions = Vec::with_capacity(sequence.len());
    for &r in sequence {
        let d = algorithm.decide(r);
        if d.is_accept() {
            assert!(
                !accepted.contains(&r) && accepted.is_free(&r),
                "scheduler accepted {r:?}, which conflicts with an earlier acceptance"
            );
            accepted.insert(r);
        }
        decisions.push(d);
    }
    OnlineRun { prediction: prediction.clone(), sequence: sequence.to_vec(), decisions, accepted: accepted.members() }
}

/// Accepts a request iff it conflicts with nothing accepted so far.
pub struct Greedy<R: Request> {
    accepted: R::Index,
}

impl<R: Request> Greedy<R> {
    pub fn new() -> Self {
        Greedy { accepted: R::Index::default() }
    }
}

impl<R: Request> Default for Greedy<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Request> OnlineAlgorithm<R> for Greedy<R> {
    fn decide(&mut self, request: R) -> Decision {
        if self.accepted.is_free(&request) {
            self.accepted.insert(request);
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

/// Fixes an optimal solution `I*` of the prediction up front and accepts
/// exactly the members of `I*` that arrive.
#[derive(Debug)]
pub struct Trust<R: Request> {
    planned: BTreeSet<R>,
    accepted: BTreeSet<R>,
}

impl<R: Request> Trust<R> {
    pub fn new(prediction: &BTreeSet<R>) -> Self {
        Trust { planned: R::optimum(prediction), accepted: BTreeSet::new() }
    }

    pub fn planned(&self) -> &BTreeSet<R> {
        &self.planned
    }
}

impl<R: Request> OnlineAlgorithm<R> for Trust<R> {
    fn decide(&mut self, request: R) -> Decision {
        // A repeated I* member conflicts with its own accepted copy.
        if self.planned.contains(&request) && self.accepted.insert(request) {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

/// TrustGreedy's evolving plan `A`.
pub struct Plan<R: Request> {
    planned: R::Index,
    /// Members of `I*`; `true` once an unpredicted arrival replaced them.
    replaced: BTreeMap<R, bool>,
}

impl<R: Request> Plan<R> {
    fn new(initial: BTreeSet<R>) -> Self {
        let mut planned = R::Index::default();
        for r in &initial {
            planned.insert(*r);
        }
        Plan { planned, replaced: initial.into_iter().map(|r| (r, false)).collect() }
    }

    pub fn planned(&self) -> BTreeSet<R> {
        self.planned.members()
    }

    pub fn len(&self) -> usize {
        self.planned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planned.is_empty()
    }

    /// The initial optimum `I*` of the prediction.
    pub fn initial(&self) -> BTreeSet<R> {
        self.replaced.keys().copied().collect()
    }

    pub fn replaced_flags(&self) -> &BTreeMap<R, bool> {
        &self.replaced
    }

    /// `I*` members still in the plan that never arrived in `arrived`.
    pub fn unreplaced_false_positives(&self, arrived: &BTreeSet<R>) -> BTreeSet<R> {
        self.planned
            .members()
            .into_iter()
            .filter(|r| self.replaced.get(r) == Some(&false) && !arrived.contains(r))
            .collect()
    }
}

/// Trust, but an unpredicted request is accepted whenever it fits next to the
/// accepted requests and displaces at most one planned request that ends no
/// earlier than it does.
pub struct TrustGreedy<R: Request> {
    prediction: BTreeSet<R>,
    plan: Plan<R>,
    accepted: BTreeSet<R>,
}

impl<R: Request> TrustGreedy<R> {
    pub fn new(prediction: &BTreeSet<R>) -> Self {
        TrustGreedy {
            prediction: prediction.clone(),
            plan: Plan::new(R::optimum(prediction)),
            accepted: BTreeSet::new(),
        }
    }

    pub fn plan(&self) -> &Plan<R> {
        &self.plan
    }
}

impl<R: Request> OnlineAlgorithm<R> for TrustGreedy<R> {
    fn decide(&mut self, request: R) -> Decision {
        if self.accepted.contains(&request) {
            return Decision::Reject;
        }
        if self.plan.planned.contains(&request) {
            self.accepted.insert(request);
            return Decision::Accept;
        }
        if self.prediction.contains(&request) {
            // Predicted but not planned.
            return Decision::Reject;
        }
        let blocking = self.plan.planned.conflicting(&request);
        if blocking.iter().any(|s| self.accepted.contains(s)) {
            return Decision::Reject;
        }
        match blocking.as_slice() {
            [] => {}
            [single] if request.can_displace(single) => {
                self.plan.planned.remove(single);
                if let Some(flag @ false) = self.plan.replaced.get_mut(single) {
                    *flag = true;
                }
            }
            _ => return Decision::Reject,
        }
        self.plan.planned.insert(request);
        self.accepted.insert(request);
        Decision::Accept
    }
}

/// Rejects everything; a baseline for adversarial constructions.
#[derive(Debug, Default, Clone, Copy)]
pub struct RejectAll;

impl<R> OnlineAlgorithm<R> for RejectAll {
    fn decide(&mut self, _request: R) -> Decision {
        Decision::Reject
    }
}

/// The deterministic schedulers that work for any request type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Greedy,
    Trust,
    TrustGreedy,
    RejectAll,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] =
        [AlgorithmKind::Greedy, AlgorithmKind::Trust, AlgorithmKind::TrustGreedy, AlgorithmKind::RejectAll];

    pub fn build<R: Request + 'static>(self, prediction: &BTreeSet<R>) -> Box<dyn OnlineAlgorithm<R>> {
        match self {
            AlgorithmKind::Greedy => Box::new(Greedy::<R>::new()),
            AlgorithmKind::Trust => Box::new(Trust::new(prediction)),
            AlgorithmKind::TrustGreedy => Box::new(TrustGreedy::new(prediction)),
            AlgorithmKind::RejectAll => Box::new(RejectAll),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Greedy => "greedy",
            AlgorithmKind::Trust => "trust",
            AlgorithmKind::TrustGreedy => "trustgreedy",
            AlgorithmKind::RejectAll => "reject-all",
        }
    }
}

impl FromStr for AlgorithmKind {
    type Err = AlgorithmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(AlgorithmKind::Greedy),
            "trust" => Ok(AlgorithmKind::Trust),
            "trustgreedy" | "trust-greedy" => Ok(AlgorithmKind::TrustGreedy),
            "reject-all" | "rejectall" => Ok(AlgorithmKind::RejectAll),
            other => Err(AlgorithmError::UnknownAlgorithm(other.to_string())),
        }
    }
}

pub fn run_greedy(sequence: &[Interval]) -> OnlineRun<Interval> {
    run_online(&mut Greedy::<Interval>::new(), &IntervalSet::new(), sequence)
}

pub fn run_trust(prediction: &IntervalSet, sequence: &[Interval]) -> OnlineRun<Interval> {
    run_online(&mut Trust::new(prediction), prediction, sequence)
}

pub fn run_trustgreedy(prediction: &IntervalSet, sequence: &[Interval]) -> OnlineRun<Interval> {
    run_online(&mut TrustGreedy::new(prediction), prediction, sequence)
}

/// Middle-edge level structure on a line of `m_prime` vertices.
///
/// Level 1 is the middle edge of the whole line. Removing levels `1..=i`
/// leaves `2^i` segments of `m_prime / 2^i` vertices each, and level `i + 1`
/// holds their middle edges. An interval belongs to the smallest level whose
/// edges it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelPartition {
    m_prime: u64,
    level_count: u32,
}

impl LevelPartition {
    /// Vertex count of the extended line, a power of two.
    pub fn m_prime(&self) -> u64 {
        self.m_prime
    }

    pub fn level_count(&self) -> u32 {
        self.level_count
    }

    /// Longest path (in edges) the partition covers.
    pub fn max_path_len(&self) -> u64 {
        self.m_prime - 1
    }

    /// Edges of `level` as unit intervals, built by splitting segments.
    pub fn level_edges(&self, level: u32) -> Vec<Interval> {
        assert!((1..=self.level_count).contains(&level), "level {level} out of range");
        // Segments are inclusive vertex ranges.
        let mut segments = vec![(0u64, self.m_prime - 1)];
        for depth in 1..=level {
            let mut next = Vec::with_capacity(segments.len() * 2);
            let mut middles = Vec::with_capacity(segments.len());
            for (lo, hi) in segments {
                let mid = lo + (hi - lo).div_ceil(2);
                middles.push(Interval::of(mid - 1, mid));
                next.push((lo, mid - 1));
                next.push((mid, hi));
            }
            if depth == level {
                return middles;
            }
            segments = next;
        }
        unreachable!()
    }

    /// Every level's edge set, level 1 first.
    pub fn levels(&self) -> Vec<Vec<Interval>> {
        (1..=self.level_count).map(|l| self.level_edges(l)).collect()
    }

    /// Level of `interval`, or `None` if it does not lie on the extended line.
    ///
    /// Edge `(k, k+1)` is in level `L - v` where `2^v` is the largest power of
    /// two dividing `k + 1`. Over the edges of `(a, b)` the deepest such power
    /// sits at the highest bit where `a` and `b` differ.
    pub fn level_of(&self, interval: &Interval) -> Option<u32> {
        if interval.end() > self.max_path_len() {
            return None;
        }
        let diff = interval.start() ^ interval.end();
        let v = 63 - diff.leading_zeros();
        Some(self.level_count - v)
    }
}

/// Levels for a path of `m` edges: the line is extended to the smallest
/// power-of-two vertex count `m_prime >= m + 1`, which has an odd number of
/// edges and hence a middle edge.
pub fn build_levels(m: u64) -> LevelPartition {
    let m_prime = (m.max(1) + 1).next_power_of_two();
    LevelPartition { m_prime, level_count: m_prime.trailing_zeros() }
}

/// Classify-and-randomly-select with its coin already drawn: greedy on the
/// chosen level, reject everything else.
#[derive(Debug)]
pub struct Crs {
    partition: LevelPartition,
    level: u32,
    accepted: IntervalIndex,
}

impl Crs {
    pub fn new(m: u64, level: u32) -> Result<Self, AlgorithmError> {
        let partition = build_levels(m);
        if !(1..=partition.level_count).contains(&level) {
            return Err(AlgorithmError::LevelOutOfRange { level, levels: partition.level_count });
        }
        Ok(Crs { partition, level, accepted: IntervalIndex::default() })
    }
}

impl OnlineAlgorithm<Interval> for Crs {
    fn decide(&mut self, request: Interval) -> Decision {
        if self.partition.level_of(&request) == Some(self.level) && self.accepted.is_free(&request) {
            self.accepted.insert(request);
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

fn check_on_path(m: u64, sequence: &[Interval]) -> Result<(), AlgorithmError> {
    match sequence.iter().find(|iv| iv.end() > m) {
        Some(iv) => Err(AlgorithmError::OffPath { interval: *iv, m }),
        None => Ok(()),
    }
}

/// CRS on a path of `m` edges with the level fixed to `chosen_level`.
pub fn run_crs(m: u64, sequence: &[Interval], chosen_level: u32) -> Result<OnlineRun<Interval>, AlgorithmError> {
    check_on_path(m, sequence)?;
    let mut crs = Crs::new(m, chosen_level)?;
    Ok(run_online(&mut crs, &IntervalSet::new(), sequence))
}

/// Exact expected CRS profit: the mean over every level choice.
pub fn crs_expected(m: u64, sequence: &[Interval]) -> Result<Rational, AlgorithmError> {
    check_on_path(m, sequence)?;
    let levels = build_levels(m).level_count;
    let mut total = 0i64;
    for level in 1..=levels {
        total += run_crs(m, sequence, level)?.profit() as i64;
    }
    Ok(Rational::new(total, levels as i64))
}

/// Expected profit of RobustTrust, split by its two branches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixtureOutcome {
    #[serde(serialize_with = "ser_rational")]
    pub alpha: Rational,
    pub trust_branch_profit: u64,
    #[serde(serialize_with = "ser_rational")]
    pub crs_branch_expected: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub expected_profit: Rational,
}

pub(crate) fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&crate::fmt_rational(r))
}

/// RobustTrust: TrustGreedy with probability `alpha`, otherwise CRS.
pub fn robusttrust_expected(
    m: u64,
    prediction: &IntervalSet,
    sequence: &[Interval],
    alpha: Rational,
) -> Result<MixtureOutcome, AlgorithmError> {
    let zero = Rational::from_integer(0);
    let one = Rational::from_integer(1);
    if alpha < zero || alpha > one {
        return Err(AlgorithmError::AlphaOutOfRange(alpha));
    }
    let trust_branch_profit = run_trustgreedy(prediction, sequence).profit() as u64;
    let crs_branch_expected = crs_expected(m, sequence)?;
    let expected_profit =
        alpha * Rational::from_integer(trust_branch_profit as i64) + (one - alpha) * crs_branch_expected;
    Ok(MixtureOutcome { alpha, trust_branch_profit, crs_branch_expected, expected_profit })
}

/// Path length for CRS when none is given: the furthest end vertex.
pub fn default_path_len(prediction: &IntervalSet, sequence: &[Interval]) -> u64 {
    path_len(prediction.iter().chain(sequence)).max(1)
}
