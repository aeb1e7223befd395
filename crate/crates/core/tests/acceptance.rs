//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criterion 10(d) needs the LLNL-uBGL-2006-2 trace; point
//! `PREDSCHED_LLNL_SWF` at it to run that check.

mod common;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::Rng;

use predsched::adversaries::{
    duel_star, duel_theorem4, duel_theorem5, sigma_family, sigma_report, star_opt_bruteforce, StarRequest,
};
use predsched::algorithms::{
    build_levels, crs_expected, robusttrust_expected, run_greedy, run_trust, run_trustgreedy, AlgorithmKind,
};
use predsched::errors::{check_properties, classify, hamming_error};
use predsched::harness::{emit_csv, run_sweep, verify_rows, SweepConfig, SweepRow};
use predsched::model::brute_force_optimum;
use predsched::workloads::{parse_swf, sample_instance, summarize};
use predsched::{opt_bruteforce, opt_eft, Interval, IntervalSet, Rational};

use common::{eta_bf, fuzz_pair, opt_bf, random_set, rng, synthetic_swf};

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

const FUZZ: usize = 10_000;

fn int(v: u64) -> Rational {
    Rational::from_integer(v as i64)
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut r = rng(1);
    for case in 0..FUZZ {
        let m = r.gen_range(1..=20);
        let set = random_set(&mut r, 12, m);
        let eft = opt_eft(&set);
        let bf = opt_bruteforce(&set).map_err(|e| e.to_string())?;
        ensure!(
            eft.profit() == bf.profit(),
            "case {case}: eft {} vs brute force {} on {set:?}",
            eft.profit(),
            bf.profit()
        );
        ensure!(eft.is_feasible(), "case {case}: infeasible eft solution");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{FUZZ} instances, 0 violations, {:.2}s", elapsed.as_secs_f64()))
}

fn trust_bound() -> Verdict {
    let mut r = rng(2);
    for case in 0..FUZZ {
        let f = fuzz_pair(&mut r, 10, 6);
        let profit = run_trust(&f.prediction, &f.order).profit() as u64;
        let (opt, eta) = (opt_bf(&f.input), eta_bf(&f.input, &f.prediction));
        ensure!(profit + 2 * eta >= opt, "case {case}: trust {profit} < opt {opt} - 2*eta {eta}");
    }
    Ok(format!("{FUZZ} pairs, 0 violations"))
}

fn trustgreedy_bound() -> Verdict {
    let mut r = rng(3);
    let mut exhaustive_pairs = 0usize;
    let mut orders = 0usize;
    for case in 0..FUZZ {
        let f = fuzz_pair(&mut r, 8, 6);
        let (opt, eta) = (opt_bf(&f.input), eta_bf(&f.input, &f.prediction));
        let check = |order: &[Interval]| -> Result<(), String> {
            let profit = run_trustgreedy(&f.prediction, order).profit() as u64;
            ensure!(profit + eta >= opt, "case {case}: trustgreedy {profit} < opt {opt} - eta {eta} for {order:?}");
            Ok(())
        };
        check(&f.order)?;
        if f.input.len() <= 6 {
            exhaustive_pairs += 1;
            for order in f.order.iter().copied().permutations(f.order.len()) {
                check(&order)?;
                orders += 1;
            }
        }
    }
    Ok(format!("{FUZZ} pairs; {exhaustive_pairs} pairs with |I| <= 6 over {orders} arrival orders; 0 violations"))
}

fn trust_tightness() -> Verdict {
    let mut runs = 0;
    for eps in [Rational::from_integer(1), Rational::new(1, 2), Rational::new(1, 4), Rational::new(1, 10)] {
        let p = eps.recip().ceil().to_integer() as u64;
        for ell in 0..=p {
            let t = duel_theorem5(eps, ell).map_err(|e| e.to_string())?;
            let served = t.served_set();
            let b = classify(&served, &t.prediction);
            ensure!(t.algorithm_profit == p - ell, "eps {eps} ell {ell}: profit {}", t.algorithm_profit);
            ensure!(t.opt_profit == p + ell && b.opt_input == p + ell, "eps {eps} ell {ell}: opt {}", t.opt_profit);
            ensure!(t.eta == ell && b.eta == ell, "eps {eps} ell {ell}: eta {}", t.eta);
            ensure!(t.bound_satisfied, "eps {eps} ell {ell}: bound flag false");
            runs += 1;
        }
    }
    Ok(format!("{runs} duels, all equalities exact"))
}

fn general_bound() -> Verdict {
    let mut runs = 0;
    let kinds = [AlgorithmKind::Trust, AlgorithmKind::TrustGreedy, AlgorithmKind::Greedy, AlgorithmKind::RejectAll];
    for eps in
        [Rational::new(1, 2), Rational::new(1, 3), Rational::new(2, 5), Rational::new(1, 4), Rational::new(1, 10)]
    {
        let p = (eps.recip() * eps.recip()).ceil().to_integer() as u64;
        for ell in 0..=p {
            for kind in kinds {
                let t = duel_theorem4(|pred| kind.build(pred), eps, ell).map_err(|e| e.to_string())?;
                let b = classify(&t.served_set(), &t.prediction);
                let alg = int(t.accepted().len() as u64);
                let gamma = b.gamma.ok_or("undefined gamma")?;
                ensure!(
                    alg <= (Rational::from_integer(1) - gamma) * int(b.opt_input),
                    "{kind:?} eps {eps} ell {ell}: alg {alg} opt {} gamma {gamma}",
                    b.opt_input
                );
                ensure!(b.opt_input >= p, "{kind:?} eps {eps} ell {ell}: opt {} < p {p}", b.opt_input);
                ensure!(t.bound_satisfied, "{kind:?} eps {eps} ell {ell}: bound flag false");
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} duels over 4 algorithms, 0 violations"))
}

fn star_bound() -> Verdict {
    let mut runs = 0;
    let kinds = [AlgorithmKind::Greedy, AlgorithmKind::Trust, AlgorithmKind::TrustGreedy];
    for p in 1..=50u64 {
        for ell in 0..=p {
            for kind in kinds {
                let t = duel_star(|pred| kind.build(pred), ell, p).map_err(|e| e.to_string())?;
                for star in 0..p as u32 {
                    let served: BTreeSet<StarRequest> =
                        t.served.iter().map(|(r, _)| *r).filter(|r| r.star_index == star).collect();
                    let accepted =
                        t.served.iter().filter(|(r, d)| r.star_index == star && d.is_accept()).count() as u64;
                    let predicted: BTreeSet<StarRequest> =
                        t.prediction.iter().filter(|r| r.star_index == star).copied().collect();
                    let wrong: BTreeSet<StarRequest> = served.symmetric_difference(&predicted).copied().collect();
                    let opt = brute_force_optimum(&served).map_err(|e| e.to_string())?.len() as u64;
                    let eta = brute_force_optimum(&wrong).map_err(|e| e.to_string())?.len() as u64;
                    let tag = format!("{kind:?} p {p} ell {ell} star {star}");
                    if (star as u64) < ell {
                        ensure!(eta == 1 && (opt == 3 || opt == 4), "{tag}: eta {eta} opt {opt}");
                    } else {
                        ensure!(eta == 0 && opt == 3, "{tag}: eta {eta} opt {opt}");
                    }
                    ensure!(accepted + 2 * eta <= opt, "{tag}: alg {accepted} opt {opt} eta {eta}");
                    let ph = &t.phases[star as usize];
                    ensure!((ph.alg, ph.opt, ph.eta) == (accepted, opt, eta), "{tag}: transcript disagrees");
                }
                ensure!(t.opt_profit == star_opt_bruteforce(&t.served_set()), "p {p} ell {ell}: opt mismatch");
                ensure!(t.bound_satisfied, "{kind:?} p {p} ell {ell}: bound flag false");
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} duels over 3 algorithms, every star branch checked by brute force"))
}

fn consistency_robustness() -> Verdict {
    let alphas = [
        Rational::from_integer(0),
        Rational::new(1, 4),
        Rational::new(1, 2),
        Rational::new(3, 4),
        Rational::from_integer(1),
    ];
    let mut r = rng(7);
    let cases = 2_000;
    for case in 0..cases {
        let m = r.gen_range(1..=20);
        let input = random_set(&mut r, 10, m);
        let mut order: Vec<Interval> = input.iter().copied().collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut r);
        let opt = opt_bf(&input);
        let levels = build_levels(m).level_count() as i64;
        let crs = crs_expected(m, &order).map_err(|e| e.to_string())?;
        ensure!(crs >= Rational::new(opt as i64, levels), "case {case}: crs {crs} below opt/levels");
        for alpha in alphas {
            let out = robusttrust_expected(m, &input, &order, alpha).map_err(|e| e.to_string())?;
            ensure!(out.expected_profit >= alpha * int(opt), "case {case} alpha {alpha}: {}", out.expected_profit);
        }
    }
    for rr in 0..=6u32 {
        let sigma = sigma_family(rr);
        let m = 1u64 << (rr + 1);
        let opt = opt_bf_or_eft(&sigma.iter().copied().collect());
        let levels = build_levels(m).level_count() as i64;
        let crs = crs_expected(m, &sigma).map_err(|e| e.to_string())?;
        ensure!(crs >= Rational::new(opt as i64, levels), "sigma r={rr}: crs {crs} < {opt}/{levels}");
        ensure!(sigma_report(rr).bound_satisfied, "sigma r={rr}: report flag false");
    }
    Ok(format!("{cases} perfect-prediction instances x 5 alphas; sigma family r <= 6"))
}

fn opt_bf_or_eft(set: &IntervalSet) -> u64 {
    if set.len() <= predsched::model::BRUTE_FORCE_CAP {
        opt_bf(set)
    } else {
        opt_eft(set).profit() as u64
    }
}

fn error_properties() -> Verdict {
    let mut r = rng(8);
    for case in 0..FUZZ {
        let f = fuzz_pair(&mut r, 6, 6);
        let report = check_properties(&f.input, &f.prediction);
        ensure!(report.all_hold(), "case {case}: {report:?}");
        // Independent recheck with the exhaustive oracle.
        let eta = eta_bf(&f.input, &f.prediction);
        ensure!(report.eta == eta, "case {case}: eta {} vs oracle {eta}", report.eta);
        for x in f.input.difference(&f.prediction) {
            let mut moved = f.prediction.clone();
            moved.insert(*x);
            ensure!(eta_bf(&f.input, &moved) <= eta, "case {case}: adding {x:?} raised the error");
        }
        for y in f.prediction.difference(&f.input) {
            let mut moved = f.prediction.clone();
            moved.remove(y);
            ensure!(eta_bf(&f.input, &moved) <= eta, "case {case}: dropping {y:?} raised the error");
        }
        ensure!(eta >= opt_bf(&f.input).abs_diff(opt_bf(&f.prediction)), "case {case}: not Lipschitz");
    }

    let a: IntervalSet = [(0, 2), (3, 5), (6, 8)].into_iter().map(|(s, e)| Interval::of(s, e)).collect();
    let b: IntervalSet = [(1, 4), (4, 7)].into_iter().map(|(s, e)| Interval::of(s, e)).collect();
    let input: IntervalSet = a.union(&b).copied().collect();
    let prediction: IntervalSet = b.iter().copied().chain([Interval::of(6, 8)]).collect();
    let rep = check_properties(&input, &prediction);
    ensure!(rep.eta == 2 && rep.opt_input.abs_diff(rep.opt_prediction) == 1, "example: {rep:?}");

    for m in [5u64, 10, 50] {
        let input: IntervalSet = [Interval::of(1, m)].into_iter().collect();
        let prediction: IntervalSet = (1..m).map(|s| Interval::of(s, m)).collect();
        let eta = classify(&input, &prediction).eta;
        let hamming = hamming_error(&input, &prediction);
        ensure!(eta == 1 && hamming == m - 2, "m={m}: eta {eta} hamming {hamming}");
    }
    Ok(format!("{FUZZ} pairs; worked example eta=2 vs gap 1; Hamming m-2 for m in {{5,10,50}}"))
}

fn greedy_coincidence() -> Verdict {
    let mut r = rng(9);
    let empty = IntervalSet::new();
    for case in 0..FUZZ {
        let m = r.gen_range(1..=30);
        let n = r.gen_range(0..=20);
        // Sequences may repeat intervals.
        let seq: Vec<Interval> = (0..n).map(|_| common::random_interval(&mut r, m)).collect();
        let g = run_greedy(&seq);
        let tg = run_trustgreedy(&empty, &seq);
        ensure!(g.decisions == tg.decisions, "case {case}: {} vs {}", g.decision_string(), tg.decision_string());
    }
    Ok(format!("{FUZZ} sequences, identical decision strings"))
}

fn sweep_csv(config: &SweepConfig) -> Result<(Vec<SweepRow>, Vec<u8>), String> {
    let sweep = run_sweep(config).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    emit_csv(&sweep.rows, &mut buf).map_err(|e| e.to_string())?;
    Ok((sweep.rows, buf))
}

fn experiment_shape(trace: &std::path::Path) -> Verdict {
    let config = SweepConfig { seed: 2006, ..SweepConfig::new(trace) };
    let sweep = run_sweep(&config).map_err(|e| e.to_string())?;
    let summary = sweep.summary.clone().ok_or("missing summary")?;
    ensure!(summary.n_jobs >= 10_000, "trace has only {} jobs", summary.n_jobs);
    let rows = &sweep.rows;
    let first = rows.first().ok_or("no rows")?;
    ensure!(first.d == 0, "first row d={}", first.d);
    ensure!(
        first.trust == Some(first.opt) && first.trustgreedy == Some(first.opt),
        "(a) d=0: trust {:?} trustgreedy {:?} opt {}",
        first.trust,
        first.trustgreedy,
        first.opt
    );
    for row in rows {
        let (t, tg) = (row.trust.unwrap(), row.trustgreedy.unwrap());
        ensure!(tg + row.eta >= row.opt, "(b) d={}: trustgreedy {tg} opt {} eta {}", row.d, row.opt, row.eta);
        ensure!(t + 2 * row.eta >= row.opt, "(b) d={}: trust {t} opt {} eta {}", row.d, row.opt, row.eta);
    }
    let mut by_gamma: Vec<&SweepRow> = rows.iter().collect();
    by_gamma.sort_by_key(|r| (r.gamma.unwrap_or_default(), r.d));
    let decile = &by_gamma[by_gamma.len() - by_gamma.len().div_ceil(10)..];
    let mean = |f: fn(&SweepRow) -> Option<u64>| {
        decile.iter().map(|r| f(r).unwrap() as f64).sum::<f64>() / decile.len() as f64
    };
    let (mean_tg, mean_trust) = (mean(|r| r.trustgreedy), mean(|r| r.trust));
    ensure!(mean_tg >= mean_trust, "(c) top decile: trustgreedy {mean_tg} < trust {mean_trust}");
    let checked = verify_rows(&sweep.instance, &config, rows).map_err(|e| e.to_string())?;

    let llnl = match std::env::var_os("PREDSCHED_LLNL_SWF") {
        Some(path) => {
            let trace =
                parse_swf(BufReader::new(File::open(&path).map_err(|e| e.to_string())?)).map_err(|e| e.to_string())?;
            let s = summarize(&trace);
            ensure!(
                s.n_jobs.abs_diff(13_225) <= s.skipped,
                "(d) LLNL jobs {} vs 13225 with {} skipped",
                s.n_jobs,
                s.skipped
            );
            let instance = sample_instance(&predsched::workloads::distinct_intervals(&trace.jobs), 0)
                .map_err(|e| e.to_string())?;
            format!("(d) LLNL N={} skipped={} max length {} n={}", s.n_jobs, s.skipped, s.max_length, instance.n())
        }
        None => "(d) NOT RUN (trace not supplied; set PREDSCHED_LLNL_SWF)".to_string(),
    };
    Ok(format!(
        "synthetic trace N={} skipped={}, {} rows, (a)(b) hold, (c) top decile {mean_tg:.1} >= {mean_trust:.1}, {} rows recomputed; {llnl}",
        summary.n_jobs,
        summary.skipped,
        rows.len(),
        checked.len()
    ))
}

fn determinism(trace: &std::path::Path) -> Verdict {
    let base = SweepConfig { seed: 99, alpha: Some(Rational::new(1, 2)), ..SweepConfig::new(trace) };
    let (_, a) = sweep_csv(&base)?;
    let (_, b) = sweep_csv(&base)?;
    ensure!(a == b, "two identical sweeps differ");
    let (_, one) = sweep_csv(&SweepConfig { workers: Some(1), ..base.clone() })?;
    let (_, eight) = sweep_csv(&SweepConfig { workers: Some(8), ..base.clone() })?;
    ensure!(one == eight, "1 worker and 8 workers differ");
    ensure!(one == a, "pinned worker count differs from default pool");
    Ok(format!("{} CSV bytes identical across repeats and worker counts", a.len()))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let trace = dir.path().join("synthetic.swf");
    {
        let mut f = std::io::BufWriter::new(File::create(&trace).expect("trace file"));
        synthetic_swf(2006, 12_000, &mut f).expect("write trace");
        f.flush().expect("flush trace");
    }

    type Check<'a> = (&'static str, Box<dyn Fn() -> Verdict + Send + Sync + 'a>);
    let checks: Vec<Check> = vec![
        ("1 oracle equivalence", Box::new(oracle_equivalence)),
        ("2 trust error bound", Box::new(trust_bound)),
        ("3 trustgreedy error bound", Box::new(trustgreedy_bound)),
        ("4 trust lower-bound tightness", Box::new(trust_tightness)),
        ("5 general deterministic bound", Box::new(general_bound)),
        ("6 star duel", Box::new(star_bound)),
        ("7 consistency and robustness", Box::new(consistency_robustness)),
        ("8 error measure properties", Box::new(error_properties)),
        ("9 greedy equals trustgreedy without prediction", Box::new(greedy_coincidence)),
        ("10 experiment shape", Box::new(|| experiment_shape(&trace))),
        ("11 sweep determinism", Box::new(|| determinism(&trace))),
    ];

    let results: Vec<(&str, Verdict, Duration)> = std::thread::scope(|s| {
        let handles: Vec<_> = checks
            .iter()
            .map(|(name, check)| {
                s.spawn(move || {
                    let start = Instant::now();
                    let verdict = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
                        .unwrap_or_else(|_| Err("panicked".to_string()));
                    (*name, verdict, start.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread")).collect()
    });

    let mut failed = 0;
    for (name, verdict, took) in &results {
        match verdict {
            Ok(detail) => println!("criterion {name}: PASS ({:.1}s) {detail}", took.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({:.1}s) {detail}", took.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
