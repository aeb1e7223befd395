//! The request model shared by every algorithm and adversary.
//!
//! A request only needs a symmetric conflict relation and a way to compute an
//! optimal offline solution over a set of requests. Intervals on a path and
//! leaf pairs on a star both fit this shape.

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

/// Largest instance the exhaustive oracle accepts.
pub const BRUTE_FORCE_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("exhaustive oracle is capped at {cap} requests, got {size}")]
    Capacity { size: usize, cap: usize },
}

/// An irrevocable online decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        matches!(self, Decision::Accept)
    }

    /// `A` for accept, `R` for reject.
    pub fn as_char(self) -> char {
        match self {
            Decision::Accept => 'A',
            Decision::Reject => 'R',
        }
    }
}

/// A schedulable request.
pub trait Request: Copy + Ord + Hash + Debug {
    /// Index over a feasible (pairwise non-conflicting) set of requests.
    type Index: FeasibleIndex<Self>;

    /// Symmetric conflict relation. A request always conflicts with itself.
    fn conflicts(&self, other: &Self) -> bool;

    /// Whether this request, arriving unpredicted, may take the place of
    /// `planned` in a TrustGreedy plan.
    fn can_displace(&self, planned: &Self) -> bool;

    /// A deterministic maximum-cardinality feasible subset.
    fn optimum(requests: &BTreeSet<Self>) -> BTreeSet<Self>;
}

/// Container for a feasible set that answers "who conflicts with `r`".
pub trait FeasibleIndex<R>: Default {
    /// Inserts `r`. The caller guarantees that `r` conflicts with no member.
    fn insert(&mut self, r: R);
    fn remove(&mut self, r: &R) -> bool;
    fn contains(&self, r: &R) -> bool;
    /// Members conflicting with `r`, in canonical order.
    fn conflicting(&self, r: &R) -> Vec<R>;
    fn len(&self) -> usize;
    fn members(&self) -> BTreeSet<R>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn is_free(&self, r: &R) -> bool {
        self.conflicting(r).is_empty()
    }
}

/// Linear-scan index, adequate for small request families.
#[derive(Debug, Clone)]
pub struct ScanIndex<R> {
    items: BTreeSet<R>,
}

impl<R> Default for ScanIndex<R> {
    fn default() -> Self {
        ScanIndex { items: BTreeSet::new() }
    }
}

impl<R: Request> FeasibleIndex<R> for ScanIndex<R> {
    fn insert(&mut self, r: R) {
        self.items.insert(r);
    }

    fn remove(&mut self, r: &R) -> bool {
        self.items.remove(r)
    }

    fn contains(&self, r: &R) -> bool {
        self.items.contains(r)
    }

    fn conflicting(&self, r: &R) -> Vec<R> {
        self.items.iter().filter(|s| s.conflicts(r)).copied().collect()
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn members(&self) -> BTreeSet<R> {
        self.items.clone()
    }
}

/// True if no two members of `set` conflict.
pub fn is_feasible<'a, R: Request + 'a>(set: impl IntoIterator<Item = &'a R>) -> bool {
    let items: Vec<&R> = set.into_iter().collect();
    items.iter().enumerate().all(|(i, a)| items[i + 1..].iter().all(|b| !a.conflicts(b)))
}

/// Exhaustive maximum feasible subset, independent of any problem structure.
///
/// Enumerates every independent set of the conflict graph by include/exclude
/// branching. Among maximum sets the first found (include-first over the
/// canonical order) is returned.
pub fn brute_force_optimum<R: Request>(requests: &BTreeSet<R>) -> Result<BTreeSet<R>, OracleError> {
    let items: Vec<R> = requests.iter().copied().collect();
    let n = items.len();
    if n > BRUTE_FORCE_CAP {
        return Err(OracleError::Capacity { size: n, cap: BRUTE_FORCE_CAP });
    }
    let conflict: Vec<u32> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && items[i].conflicts(&items[j])).fold(0u32, |acc, j| acc | (1 << j)))
        .collect();

    fn search(i: usize, chosen: u32, n: usize, conflict: &[u32], best: &mut u32) {
        if i == n {
            if chosen.count_ones() > best.count_ones() {
                *best = chosen;
            }
            return;
        }
        if chosen.count_ones() + (n - i) as u32 <= best.count_ones() {
            return;
        }
        if conflict[i] & chosen == 0 {
            search(i + 1, chosen | (1 << i), n, conflict, best);
        }
        search(i + 1, chosen, n, conflict, best);
    }

    let mut best = 0u32;
    search(0, 0, n, &conflict, &mut best);
    Ok((0..n).filter(|&i| best & (1 << i) != 0).map(|i| items[i]).collect())
}
