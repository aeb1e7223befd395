//! Adaptive adversaries for the lower-bound constructions.
//!
//! Each duel builds its prediction first, hands it to the algorithm under
//! test and then picks the next request by looking only at the decisions the
//! algorithm has already emitted. The resulting [`DuelTranscript`] carries the
//! served sequence, per-phase accounting and an exact check of the bound the
//! construction is meant to exhibit.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Serialize, Serializer};
use serde_json::json;
use thiserror::Error;

use crate::algorithms::{crs_expected, run_crs, OnlineAlgorithm, Trust};
use crate::errors::gamma;
use crate::intervals::{opt_eft, Interval, IntervalSet};
use crate::model::{brute_force_optimum, Decision, FeasibleIndex, Request, ScanIndex};
use crate::{fmt_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("epsilon {0} outside the allowed range")]
    Epsilon(String),
    #[error("ell {ell} outside 0..={max}")]
    Ell { ell: u64, max: u64 },
    #[error("{0}")]
    Params(String),
}

/// Which bound a transcript checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Thm2,
    Thm4,
    Thm5,
    Prop6,
    Sigma,
}

/// A pair of leaves on one copy of the eight-leaf star.
///
/// The path between two leaves runs through the center, so two requests on the
/// same star share an edge exactly when they share a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StarRequest {
    pub star_index: u32,
    pub leaf_a: u8,
    pub leaf_b: u8,
}

impl StarRequest {
    /// Leaves are normalised so that `leaf_a < leaf_b`.
    pub fn new(star_index: u32, a: u8, b: u8) -> Result<Self, AdversaryError> {
        if a == b || !(1..=8).contains(&a) || !(1..=8).contains(&b) {
            return Err(AdversaryError::Params(format!("invalid leaf pair ({a},{b})")));
        }
        Ok(StarRequest { star_index, leaf_a: a.min(b), leaf_b: a.max(b) })
    }

    fn of(star_index: u32, a: u8, b: u8) -> Self {
        Self::new(star_index, a, b).expect("valid leaf pair")
    }

    fn leaf_mask(&self) -> u16 {
        (1 << self.leaf_a) | (1 << self.leaf_b)
    }
}

impl Request for StarRequest {
    type Index = ScanIndex<StarRequest>;

    fn conflicts(&self, other: &Self) -> bool {
        self.star_index == other.star_index && self.leaf_mask() & other.leaf_mask() != 0
    }

    /// Stars have no notion of ending earlier, so any single blocker may go.
    fn can_displace(&self, _planned: &Self) -> bool {
        true
    }

    /// Maximum matching per star by dynamic programming over used leaves.
    /// Ties prefer including earlier requests, matching the exhaustive oracle.
    fn optimum(requests: &BTreeSet<Self>) -> BTreeSet<Self> {
        let mut by_star: BTreeMap<u32, Vec<StarRequest>> = BTreeMap::new();
        for r in requests {
            by_star.entry(r.star_index).or_default().push(*r);
        }
        let mut chosen = BTreeSet::new();
        for items in by_star.values() {
            let n = items.len();
            // best[i][mask]: largest matching within items[i..] avoiding `mask`.
            let mut best = vec![[0u8; 512]; n + 1];
            for i in (0..n).rev() {
                let m = items[i].leaf_mask() as usize;
                for mask in 0..512usize {
                    let skip = best[i + 1][mask];
                    let take = if mask & m == 0 { best[i + 1][mask | m] + 1 } else { 0 };
                    best[i][mask] = skip.max(take);
                }
            }
            let mut mask = 0usize;
            for (i, r) in items.iter().enumerate() {
                let m = r.leaf_mask() as usize;
                if mask & m == 0 && best[i + 1][mask | m] + 1 == best[i][mask] {
                    chosen.insert(*r);
                    mask |= m;
                }
            }
        }
        chosen
    }
}

/// Optimum over star requests by exhaustive search, one star at a time.
pub fn star_opt_bruteforce(requests: &BTreeSet<StarRequest>) -> u64 {
    let mut by_star: BTreeMap<u32, BTreeSet<StarRequest>> = BTreeMap::new();
    for r in requests {
        by_star.entry(r.star_index).or_default().insert(*r);
    }
    by_star
        .values()
        .map(|group| brute_force_optimum(group).expect("a star has at most a handful of served requests").len() as u64)
        .sum()
}

/// Accounting for one phase (or one star) of a construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseRecord {
    pub index: u64,
    pub alg: u64,
    pub opt: u64,
    pub eta: u64,
    /// Which branch of the case analysis the algorithm's answers selected.
    pub branch: String,
}

fn ser_gamma<S: Serializer>(g: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match g {
        Some(g) => s.serialize_str(&fmt_rational(g)),
        None => s.serialize_none(),
    }
}

/// Everything a duel produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DuelTranscript<R: Ord> {
    pub kind: BoundKind,
    pub params: BTreeMap<String, String>,
    pub prediction: BTreeSet<R>,
    pub served: Vec<(R, Decision)>,
    pub phases: Vec<PhaseRecord>,
    pub algorithm_profit: u64,
    pub opt_profit: u64,
    pub eta: u64,
    #[serde(serialize_with = "ser_gamma")]
    pub gamma: Option<Rational>,
    pub bound_satisfied: bool,
}

impl<R: Request + Serialize> DuelTranscript<R> {
    pub fn served_set(&self) -> BTreeSet<R> {
        self.served.iter().map(|(r, _)| *r).collect()
    }

    pub fn accepted(&self) -> BTreeSet<R> {
        self.served.iter().filter(|(_, d)| d.is_accept()).map(|(r, _)| *r).collect()
    }

    /// One JSON object per served request, then a summary object.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for (k, (r, d)) in self.served.iter().enumerate() {
            let rec = json!({"type": "request", "index": k, "request": r, "decision": d.as_char().to_string()});
            writeln!(out, "{rec}")?;
        }
        let summary = json!({
            "type": "summary",
            "construction": self.kind,
            "params": self.params,
            "algorithm_profit": self.algorithm_profit,
            "opt_profit": self.opt_profit,
            "eta": self.eta,
            "gamma": self.gamma.map(|g| fmt_rational(&g)),
            "phases": self.phases,
            "bound_satisfied": self.bound_satisfied,
        });
        writeln!(out, "{summary}")
    }
}

/// Feeds requests to the algorithm and keeps the books.
struct Arena<R: Request, A> {
    algorithm: A,
    accepted: R::Index,
    served: Vec<(R, Decision)>,
}

impl<R: Request, A: OnlineAlgorithm<R>> Arena<R, A> {
    fn new(algorithm: A) -> Self {
        Arena { algorithm, accepted: R::Index::default(), served: Vec::new() }
    }

    fn serve(&mut self, r: R) -> Decision {
        let d = self.algorithm.decide(r);
        if d.is_accept() {
            assert!(
                !self.accepted.contains(&r) && self.accepted.is_free(&r),
                "algorithm accepted conflicting request {r:?}"
            );
            self.accepted.insert(r);
        }
        self.served.push((r, d));
        d
    }

    fn mark(&self) -> usize {
        self.served.len()
    }
}

/// Profit, optimum and error restricted to `served[from..]` and `prediction`.
fn phase_record<R: Request>(
    index: u64,
    branch: &str,
    served: &[(R, Decision)],
    prediction: &BTreeSet<R>,
    opt: &dyn Fn(&BTreeSet<R>) -> u64,
) -> PhaseRecord {
    let input: BTreeSet<R> = served.iter().map(|(r, _)| *r).collect();
    let wrong: BTreeSet<R> = input.symmetric_difference(prediction).copied().collect();
    PhaseRecord {
        index,
        alg: served.iter().filter(|(_, d)| d.is_accept()).count() as u64,
        opt: opt(&input),
        eta: opt(&wrong),
        branch: branch.to_string(),
    }
}

struct Totals {
    alg: u64,
    opt: u64,
    eta: u64,
    gamma: Option<Rational>,
}

fn totals<R: Request>(served: &[(R, Decision)], prediction: &BTreeSet<R>, opt: &dyn Fn(&BTreeSet<R>) -> u64) -> Totals {
    let rec = phase_record(0, "", served, prediction, opt);
    Totals { alg: rec.alg, opt: rec.opt, eta: rec.eta, gamma: gamma(rec.eta, rec.opt) }
}

fn opt_intervals(set: &IntervalSet) -> u64 {
    opt_eft(set).profit() as u64
}

fn int(v: u64) -> Rational {
    Rational::from_integer(v as i64)
}

/// `alg <= (1 - factor * gamma) * opt`, exactly; vacuous when `gamma` is undefined.
fn ratio_bound(alg: u64, opt: u64, gamma: Option<Rational>, factor: i64) -> bool {
    match gamma {
        Some(g) => int(alg) <= (Rational::from_integer(1) - Rational::from_integer(factor) * g) * int(opt),
        None => alg == 0,
    }
}

fn params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// `c = ceil(1/eps)`, `p = ceil(1/eps^2)` for the general deterministic bound.
pub fn long_short_sizes(epsilon: Rational) -> Result<(u64, u64), AdversaryError> {
    if epsilon <= Rational::from_integer(0) || epsilon >= Rational::from_integer(1) {
        return Err(AdversaryError::Epsilon(format!("{} not in (0, 1)", fmt_rational(&epsilon))));
    }
    let inv = epsilon.recip();
    Ok((inv.ceil().to_integer() as u64, (inv * inv).ceil().to_integer() as u64))
}

/// General deterministic bound `ALG <= (1 - gamma) OPT` on a path.
///
/// The prediction holds, for each phase `i < p`, the long interval
/// `(ci, c(i+1))` and the unit interval `(ci, ci+1)`. In the first `ell`
/// phases only the long interval arrives at first; if the algorithm takes it,
/// the `c` unit intervals underneath it follow.
pub fn duel_theorem4<A, F>(build: F, epsilon: Rational, ell: u64) -> Result<DuelTranscript<Interval>, AdversaryError>
where
    A: OnlineAlgorithm<Interval>,
    F: FnOnce(&IntervalSet) -> A,
{
    let (c, p) = long_short_sizes(epsilon)?;
    if ell > p {
        return Err(AdversaryError::Ell { ell, max: p });
    }
    let prediction: IntervalSet =
        (0..p).flat_map(|i| [Interval::of(c * i, c * (i + 1)), Interval::of(c * i, c * i + 1)]).collect();
    let mut arena = Arena::new(build(&prediction));
    let mut phases = Vec::with_capacity(p as usize);
    for i in 0..p {
        let from = arena.mark();
        let long = Interval::of(c * i, c * (i + 1));
        let branch = if i < ell {
            if arena.serve(long).is_accept() {
                for j in 0..c {
                    arena.serve(Interval::of(c * i + j, c * i + j + 1));
                }
                "accepted-long"
            } else {
                "rejected-long"
            }
        } else {
            arena.serve(long);
            arena.serve(Interval::of(c * i, c * i + 1));
            "as-predicted"
        };
        let local: IntervalSet =
            prediction.iter().filter(|x| x.start() >= c * i && x.end() <= c * (i + 1)).copied().collect();
        phases.push(phase_record(i, branch, &arena.served[from..], &local, &opt_intervals));
    }
    let t = totals(&arena.served, &prediction, &opt_intervals);
    let per_phase = phases.iter().all(|ph| ph.alg + ph.eta <= ph.opt);
    let bound_satisfied = per_phase && t.opt >= p && ratio_bound(t.alg, t.opt, t.gamma, 1);
    Ok(DuelTranscript {
        kind: BoundKind::Thm4,
        params: params(&[
            ("epsilon", fmt_rational(&epsilon)),
            ("ell", ell.to_string()),
            ("c", c.to_string()),
            ("p", p.to_string()),
        ]),
        prediction,
        served: arena.served,
        phases,
        algorithm_profit: t.alg,
        opt_profit: t.opt,
        eta: t.eta,
        gamma: t.gamma,
        bound_satisfied,
    })
}

/// `p = ceil(1/eps)` for the Trust construction.
pub fn trust_trap_size(epsilon: Rational) -> Result<u64, AdversaryError> {
    if epsilon <= Rational::from_integer(0) || epsilon > Rational::from_integer(1) {
        return Err(AdversaryError::Epsilon(format!("{} not in (0, 1]", fmt_rational(&epsilon))));
    }
    Ok(epsilon.recip().ceil().to_integer() as u64)
}

/// Trust is at most `(1 - 2 gamma)`-competitive.
///
/// The prediction is `p` overlapping pairs `(3i, 3i+2)`, `(3i+1, 3i+3)`. For
/// `i < ell` the pair member Trust planned never arrives; the other member and
/// the unit interval it leaves free do. Later pairs arrive as predicted.
pub fn duel_theorem5(epsilon: Rational, ell: u64) -> Result<DuelTranscript<Interval>, AdversaryError> {
    let p = trust_trap_size(epsilon)?;
    if ell > p {
        return Err(AdversaryError::Ell { ell, max: p });
    }
    let prediction: IntervalSet =
        (0..p).flat_map(|i| [Interval::of(3 * i, 3 * i + 2), Interval::of(3 * i + 1, 3 * i + 3)]).collect();
    let trust = Trust::new(&prediction);
    let planned = trust.planned().clone();
    let mut arena = Arena::new(trust);
    let mut phases = Vec::with_capacity(p as usize);
    for i in 0..p {
        let from = arena.mark();
        let first = Interval::of(3 * i, 3 * i + 2);
        let second = Interval::of(3 * i + 1, 3 * i + 3);
        let branch = if i >= ell {
            arena.serve(first);
            arena.serve(second);
            "as-predicted"
        } else if planned.contains(&first) {
            arena.serve(second);
            arena.serve(Interval::of(3 * i, 3 * i + 1));
            "planned-first"
        } else {
            arena.serve(first);
            arena.serve(Interval::of(3 * i + 2, 3 * i + 3));
            "planned-second"
        };
        let local: IntervalSet = [first, second].into_iter().collect();
        phases.push(phase_record(i, branch, &arena.served[from..], &local, &opt_intervals));
    }
    let t = totals(&arena.served, &prediction, &opt_intervals);
    let bound_satisfied = t.alg == p - ell && t.opt == p + ell && t.eta == ell && ratio_bound(t.alg, t.opt, t.gamma, 2);
    Ok(DuelTranscript {
        kind: BoundKind::Thm5,
        params: params(&[("epsilon", fmt_rational(&epsilon)), ("ell", ell.to_string()), ("p", p.to_string())]),
        prediction,
        served: arena.served,
        phases,
        algorithm_profit: t.alg,
        opt_profit: t.opt,
        eta: t.eta,
        gamma: t.gamma,
        bound_satisfied,
    })
}

/// The per-star prediction `{(1,2),(2,3),(3,4),(4,5),(6,7),(7,8)}`.
pub fn star_prediction(star_index: u32) -> BTreeSet<StarRequest> {
    [(1, 2), (2, 3), (3, 4), (4, 5), (6, 7), (7, 8)]
        .into_iter()
        .map(|(a, b)| StarRequest::of(star_index, a, b))
        .collect()
}

/// Deterministic algorithms are at most `(1 - 2 gamma)`-competitive on stars.
///
/// `p` disjoint eight-leaf stars share one prediction pattern. On the first
/// `ell` stars the adversary opens with `(2,3),(3,4),(6,7),(7,8)` and
/// continues according to which of them the algorithm took; when several
/// continuations would apply, the first one in the case order below wins.
/// The remaining stars receive exactly their prediction.
pub fn duel_star<A, F>(build: F, ell: u64, p: u64) -> Result<DuelTranscript<StarRequest>, AdversaryError>
where
    A: OnlineAlgorithm<StarRequest>,
    F: FnOnce(&BTreeSet<StarRequest>) -> A,
{
    if p == 0 || p > u32::MAX as u64 {
        return Err(AdversaryError::Params(format!("p must be positive, got {p}")));
    }
    if ell > p {
        return Err(AdversaryError::Ell { ell, max: p });
    }
    let prediction: BTreeSet<StarRequest> = (0..p as u32).flat_map(star_prediction).collect();
    let mut arena = Arena::new(build(&prediction));
    let mut phases = Vec::with_capacity(p as usize);
    let opt = |s: &BTreeSet<StarRequest>| star_opt_bruteforce(s);
    for i in 0..p as u32 {
        let from = arena.mark();
        let s = |a, b| StarRequest::of(i, a, b);
        let branch = if (i as u64) < ell {
            let took_23 = arena.serve(s(2, 3)).is_accept();
            let took_34 = arena.serve(s(3, 4)).is_accept();
            let took_67 = arena.serve(s(6, 7)).is_accept();
            let took_78 = arena.serve(s(7, 8)).is_accept();
            // x is the leaf the algorithm paired with 7, if any.
            let x = if took_67 {
                Some(6)
            } else if took_78 {
                Some(8)
            } else {
                None
            };
            if took_23 {
                arena.serve(s(1, 2));
                match x {
                    Some(x) => {
                        arena.serve(s(5, x));
                        "took-23/took-7x"
                    }
                    None => "took-23/skipped-7x",
                }
            } else if took_34 {
                arena.serve(s(4, 5));
                match x {
                    Some(x) => {
                        arena.serve(s(1, x));
                        "took-34/took-7x"
                    }
                    None => "took-34/skipped-7x",
                }
            } else {
                let took_12 = arena.serve(s(1, 2)).is_accept();
                match (x, took_12) {
                    (Some(x), true) => {
                        arena.serve(s(5, x));
                        "skipped-23-34/took-7x/took-12"
                    }
                    (Some(_), false) => "skipped-23-34/took-7x/skipped-12",
                    (None, _) => "skipped-23-34/skipped-7x",
                }
            }
        } else {
            for r in star_prediction(i) {
                arena.serve(r);
            }
            "as-predicted"
        };
        phases.push(phase_record(i as u64, branch, &arena.served[from..], &star_prediction(i), &opt));
    }
    let t = totals(&arena.served, &prediction, &opt);
    let per_star = phases.iter().enumerate().all(|(i, ph)| {
        let expected_eta = if (i as u64) < ell { 1 } else { 0 };
        let opt_ok = if (i as u64) < ell { ph.opt == 3 || ph.opt == 4 } else { ph.opt == 3 };
        ph.eta == expected_eta && opt_ok && ph.alg + 2 * ph.eta <= ph.opt
    });
    let bound_satisfied = per_star && ratio_bound(t.alg, t.opt, t.gamma, 2);
    Ok(DuelTranscript {
        kind: BoundKind::Thm2,
        params: params(&[("ell", ell.to_string()), ("p", p.to_string())]),
        prediction,
        served: arena.served,
        phases,
        algorithm_profit: t.alg,
        opt_profit: t.opt,
        eta: t.eta,
        gamma: t.gamma,
        bound_satisfied,
    })
}

/// Deterministic consistency costs robustness.
///
/// The prediction is `p` disjoint intervals of length `ell = floor(m/p)`.
/// Every predicted interval arrives; each one the algorithm accepts is then
/// covered by `ell` unit intervals.
pub fn duel_prop6<A, F>(build: F, p: u64, m: u64) -> Result<DuelTranscript<Interval>, AdversaryError>
where
    A: OnlineAlgorithm<Interval>,
    F: FnOnce(&IntervalSet) -> A,
{
    if p == 0 || m < p {
        return Err(AdversaryError::Params(format!("need 1 <= p <= m, got p={p}, m={m}")));
    }
    let ell = m / p;
    let long: Vec<Interval> = (0..p).map(|i| Interval::of(i * ell, (i + 1) * ell)).collect();
    let prediction: IntervalSet = long.iter().copied().collect();
    let mut arena = Arena::new(build(&prediction));
    let taken: Vec<Interval> = long.iter().filter(|x| arena.serve(**x).is_accept()).copied().collect();
    let mut phases = Vec::with_capacity(taken.len());
    for (k, x) in taken.iter().enumerate() {
        let from = arena.mark();
        for j in x.start()..x.end() {
            arena.serve(Interval::of(j, j + 1));
        }
        let local: IntervalSet = [*x].into_iter().collect();
        phases.push(phase_record(k as u64, "accepted", &arena.served[from..], &local, &opt_intervals));
    }
    let t = totals(&arena.served, &prediction, &opt_intervals);
    let a = taken.len() as u64;
    let ratio_ok = a == 0 || int(t.alg) * int(m - p + 1) <= int(p) * int(t.opt);
    let bound_satisfied = t.alg <= a && t.opt >= a * ell + (p - a) && ratio_ok;
    Ok(DuelTranscript {
        kind: BoundKind::Prop6,
        params: params(&[("p", p.to_string()), ("m", m.to_string()), ("ell", ell.to_string())]),
        prediction,
        served: arena.served,
        phases,
        algorithm_profit: t.alg,
        opt_profit: t.opt,
        eta: t.eta,
        gamma: t.gamma,
        bound_satisfied,
    })
}

/// Nested halvings of `(0, 2^(r+1))`: round `i` tiles the line with `2^i`
/// intervals of length `2^(r+1-i)`, for `i = 0..=r+1`.
pub fn sigma_family(r: u32) -> Vec<Interval> {
    let width = 1u64 << (r + 1);
    (0..=r + 1)
        .flat_map(|i| {
            let len = width >> i;
            (0..1u64 << i).map(move |k| Interval::of(k * len, (k + 1) * len))
        })
        .collect()
}

/// CRS on the halving family, level by level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SigmaReport {
    pub kind: BoundKind,
    pub r: u32,
    pub path_len: u64,
    pub level_count: u32,
    pub level_profits: Vec<u64>,
    pub opt_profit: u64,
    #[serde(serialize_with = "crate::algorithms::ser_rational")]
    pub crs_expected: Rational,
    /// `crs_expected >= opt_profit / level_count`.
    pub bound_satisfied: bool,
}

pub fn sigma_report(r: u32) -> SigmaReport {
    let sequence = sigma_family(r);
    let path_len = 1u64 << (r + 1);
    let level_count = crate::algorithms::build_levels(path_len).level_count();
    let level_profits: Vec<u64> = (1..=level_count)
        .map(|l| run_crs(path_len, &sequence, l).expect("sigma fits its path").profit() as u64)
        .collect();
    let opt_profit = opt_eft(&sequence.iter().copied().collect()).profit() as u64;
    let expected = crs_expected(path_len, &sequence).expect("sigma fits its path");
    SigmaReport {
        kind: BoundKind::Sigma,
        r,
        path_len,
        level_count,
        level_profits,
        opt_profit,
        crs_expected: expected,
        bound_satisfied: expected >= Rational::new(opt_profit as i64, level_count as i64),
    }
}
