#![allow(dead_code)]

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use predsched::{opt_bruteforce, Interval, IntervalSet};

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn random_interval(rng: &mut impl Rng, m: u64) -> Interval {
    let a = rng.gen_range(0..m);
    let b = rng.gen_range(a + 1..=m);
    Interval::of(a, b)
}

/// Up to `max_n` distinct intervals on a path of `m` edges.
pub fn random_set(rng: &mut impl Rng, max_n: usize, m: u64) -> IntervalSet {
    let n = rng.gen_range(0..=max_n);
    (0..n).map(|_| random_interval(rng, m)).collect()
}

/// An input, a prediction that keeps part of it and adds noise, and a
/// random arrival order of the input.
pub struct Fuzzed {
    pub input: IntervalSet,
    pub prediction: IntervalSet,
    pub order: Vec<Interval>,
}

pub fn fuzz_pair(rng: &mut impl Rng, max_input: usize, max_extra: usize) -> Fuzzed {
    let m = rng.gen_range(2..=20);
    let input = random_set(rng, max_input, m);
    let keep = rng.gen_range(0.0..=1.0);
    let mut prediction: IntervalSet = input.iter().filter(|_| rng.gen_bool(keep)).copied().collect();
    prediction.extend(random_set(rng, max_extra, m));
    let mut order: Vec<Interval> = input.iter().copied().collect();
    order.shuffle(rng);
    Fuzzed { input, prediction, order }
}

/// Exhaustive optimum size.
pub fn opt_bf(set: &IntervalSet) -> u64 {
    opt_bruteforce(set).expect("small instance").profit() as u64
}

/// Error measure by exhaustive search over the wrongly predicted intervals.
pub fn eta_bf(input: &IntervalSet, prediction: &IntervalSet) -> u64 {
    let wrong: BTreeSet<Interval> = input.symmetric_difference(prediction).copied().collect();
    opt_bf(&wrong)
}

/// A synthetic SWF trace: bursty submissions, queueing delays and
/// heavy-tailed run times, plus a few unusable records.
pub fn synthetic_swf(seed: u64, jobs: usize, mut out: impl Write) -> std::io::Result<usize> {
    let mut rng = rng(seed);
    writeln!(out, "; Version: 2.2")?;
    writeln!(out, "; Computer: synthetic")?;
    let mut submit = 0u64;
    let mut dropped = 0;
    for id in 1..=jobs {
        submit += rng.gen_range(0..120);
        let wait: i64 = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(0..3_600) };
        // Log-uniform run time between 1 second and about 4 hours.
        let run = (rng.gen_range(0.0f64..9.6).exp()).round() as i64;
        let (wait, run) = match id % 997 {
            0 => {
                dropped += 1;
                (wait, -1)
            }
            500 => {
                dropped += 1;
                (-1, run)
            }
            _ => (wait, run.max(1)),
        };
        let procs = rng.gen_range(1..256);
        writeln!(out, "{id} {submit} {wait} {run} {procs} -1 -1 {procs} -1 -1 1 1 1 -1 1 -1 -1 -1")?;
    }
    Ok(dropped)
}
