use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use predsched::adversaries::{duel_prop6, duel_star, duel_theorem4, duel_theorem5, DuelTranscript};
use predsched::algorithms::{
    crs_expected, default_path_len, robusttrust_expected, run_crs, run_greedy, run_trust, run_trustgreedy,
    AlgorithmKind,
};
use predsched::errors::classify;
use predsched::harness::{emit_csv, emit_jsonl, run_sweep, verify_rows, SweepAlgorithm, SweepConfig};
use predsched::intervals::{read_intervals, write_intervals};
use predsched::workloads::{parse_swf, summarize, Variant};
use predsched::{fmt_rational, opt_bruteforce, opt_eft, parse_rational, Interval, IntervalSet, Rational};

#[derive(Parser)]
#[command(name = "predsched", version, about = "Online interval scheduling with predictions")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Greedy,
    Trust,
    Trustgreedy,
    Crs,
    Robusttrust,
    RejectAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum Construction {
    Thm2,
    Thm4,
    Thm5,
    Prop6,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Balanced,
    FnOnly,
    FpOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Offline optimum of an interval file.
    Solve {
        #[arg(long)]
        input: PathBuf,
        /// Use the exhaustive oracle (at most 24 distinct intervals).
        #[arg(long)]
        bruteforce: bool,
    },
    /// Run one online algorithm over an interval file.
    Simulate {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        prediction: Option<PathBuf>,
        /// TrustGreedy probability for robusttrust, as `p/q`.
        #[arg(long)]
        alpha: Option<String>,
        /// Fix the CRS level instead of reporting the expectation.
        #[arg(long)]
        level: Option<u32>,
        /// Path length in edges for CRS; defaults to the largest end point.
        #[arg(long)]
        path_len: Option<u64>,
    },
    /// Prediction error of a prediction file against an input file.
    Error {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        prediction: PathBuf,
    },
    /// Duel an algorithm against a lower-bound adversary.
    Duel {
        #[arg(long, value_enum)]
        construction: Construction,
        #[arg(long, value_enum, default_value_t = Algo::Trust)]
        algo: Algo,
        /// Construction parameters, e.g. `epsilon=1/2,ell=3`.
        #[arg(long, default_value = "")]
        params: String,
    },
    /// Convert an SWF trace into an interval file and a JSON summary.
    Ingest {
        #[arg(long)]
        swf: PathBuf,
    },
    /// Sweep prediction error over a trace.
    Sweep {
        #[arg(long)]
        swf: PathBuf,
        #[arg(long, value_enum, default_value_t = VariantArg::Balanced)]
        variant: VariantArg,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Comma-separated subset of opt,greedy,trust,trustgreedy,crs_expected.
        #[arg(long, default_value = "opt,greedy,trust,trustgreedy")]
        algorithms: String,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        /// Recompute a seeded sample of rows and fail on any mismatch.
        #[arg(long)]
        verify: bool,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Bound(String),
}

type Outcome = Result<(), Failure>;

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Vec<Interval>, Failure> {
    read_intervals(open(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn rational_arg(text: &str, what: &str) -> Result<Rational, Failure> {
    parse_rational(text).ok_or_else(|| Failure::Usage(format!("{what}: expected p/q, got {text:?}")))
}

fn parse_params(text: &str) -> Result<BTreeMap<String, String>, Failure> {
    text.split(',')
        .filter(|kv| !kv.trim().is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Failure::Usage(format!("bad parameter {kv:?}, expected key=value")))
        })
        .collect()
}

fn param_u64(params: &BTreeMap<String, String>, key: &str, default: Option<u64>) -> Result<u64, Failure> {
    match params.get(key) {
        Some(v) => v.parse().map_err(|_| Failure::Usage(format!("{key}: expected an integer, got {v:?}"))),
        None => default.ok_or_else(|| Failure::Usage(format!("missing parameter {key}"))),
    }
}

fn param_rational(params: &BTreeMap<String, String>, key: &str) -> Result<Rational, Failure> {
    let v = params.get(key).ok_or_else(|| Failure::Usage(format!("missing parameter {key}")))?;
    rational_arg(v, key)
}

fn deterministic(algo: Algo) -> Result<AlgorithmKind, Failure> {
    match algo {
        Algo::Greedy => Ok(AlgorithmKind::Greedy),
        Algo::Trust => Ok(AlgorithmKind::Trust),
        Algo::Trustgreedy => Ok(AlgorithmKind::TrustGreedy),
        Algo::RejectAll => Ok(AlgorithmKind::RejectAll),
        Algo::Crs | Algo::Robusttrust => {
            Err(Failure::Usage("duels take a deterministic algorithm: greedy, trust, trustgreedy or reject-all".into()))
        }
    }
}

fn solve(input: &Path, bruteforce: bool, out: &Option<PathBuf>) -> Outcome {
    let set: IntervalSet = load(input)?.into_iter().collect();
    let sol = if bruteforce { opt_bruteforce(&set).map_err(data)? } else { opt_eft(&set) };
    let mut w = sink(out)?;
    writeln!(w, "profit {}", sol.profit()).map_err(data)?;
    write_intervals(&mut w, &sol.chosen).map_err(data)?;
    w.flush().map_err(data)
}

fn simulate(
    algo: Algo,
    input: &Path,
    prediction: Option<&Path>,
    alpha: Option<&str>,
    level: Option<u32>,
    path_len: Option<u64>,
    out: &Option<PathBuf>,
) -> Outcome {
    let sequence = load(input)?;
    let prediction: IntervalSet = match prediction {
        Some(p) => load(p)?.into_iter().collect(),
        None => IntervalSet::new(),
    };
    let m = path_len.unwrap_or_else(|| default_path_len(&prediction, &sequence));
    let mut w = sink(out)?;
    let run = match algo {
        Algo::Greedy => Some(run_greedy(&sequence)),
        Algo::Trust => Some(run_trust(&prediction, &sequence)),
        Algo::Trustgreedy => Some(run_trustgreedy(&prediction, &sequence)),
        Algo::RejectAll => {
            Some(predsched::algorithms::run_online(&mut predsched::algorithms::RejectAll, &prediction, &sequence))
        }
        Algo::Crs => match level {
            Some(l) => Some(run_crs(m, &sequence, l).map_err(data)?),
            None => {
                let e = crs_expected(m, &sequence).map_err(data)?;
                writeln!(w, "expected_profit {}", fmt_rational(&e)).map_err(data)?;
                None
            }
        },
        Algo::Robusttrust => {
            let alpha =
                rational_arg(alpha.ok_or_else(|| Failure::Usage("robusttrust needs --alpha".into()))?, "alpha")?;
            let mix = robusttrust_expected(m, &prediction, &sequence, alpha).map_err(data)?;
            writeln!(w, "expected_profit {}", fmt_rational(&mix.expected_profit)).map_err(data)?;
            writeln!(w, "trust_branch_profit {}", mix.trust_branch_profit).map_err(data)?;
            writeln!(w, "crs_branch_expected {}", fmt_rational(&mix.crs_branch_expected)).map_err(data)?;
            None
        }
    };
    if let Some(run) = run {
        writeln!(w, "profit {}", run.profit()).map_err(data)?;
        writeln!(w, "decisions {}", run.decision_string()).map_err(data)?;
    }
    w.flush().map_err(data)
}

fn error(input: &Path, prediction: &Path, out: &Option<PathBuf>) -> Outcome {
    let input: IntervalSet = load(input)?.into_iter().collect();
    let prediction: IntervalSet = load(prediction)?.into_iter().collect();
    let b = classify(&input, &prediction);
    let (num, den) = b.gamma.map(|g| (*g.numer(), *g.denom())).unwrap_or((0, 0));
    let mut w = sink(out)?;
    writeln!(w, "{} {} {} {} {} {num} {den}", b.tp.len(), b.fp.len(), b.fn_.len(), b.eta, b.opt_input).map_err(data)?;
    w.flush().map_err(data)
}

fn report<R: predsched::Request + serde::Serialize>(t: &DuelTranscript<R>, out: &Option<PathBuf>) -> Outcome {
    let mut w = sink(out)?;
    t.write_jsonl(&mut w).map_err(data)?;
    w.flush().map_err(data)?;
    if t.bound_satisfied {
        Ok(())
    } else {
        Err(Failure::Bound(format!("{:?} bound violated", t.kind)))
    }
}

fn duel(construction: Construction, algo: Algo, params: &str, out: &Option<PathBuf>) -> Outcome {
    let params = parse_params(params)?;
    let kind = deterministic(algo)?;
    match construction {
        Construction::Thm4 => {
            let t =
                duel_theorem4(|p| kind.build(p), param_rational(&params, "epsilon")?, param_u64(&params, "ell", None)?)
                    .map_err(|e| Failure::Usage(e.to_string()))?;
            report(&t, out)
        }
        Construction::Thm5 => {
            if kind != AlgorithmKind::Trust {
                return Err(Failure::Usage("thm5 is built around trust; pass --algo trust".into()));
            }
            let t = duel_theorem5(param_rational(&params, "epsilon")?, param_u64(&params, "ell", None)?)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            report(&t, out)
        }
        Construction::Thm2 => {
            let t = duel_star(|p| kind.build(p), param_u64(&params, "ell", None)?, param_u64(&params, "p", None)?)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            report(&t, out)
        }
        Construction::Prop6 => {
            let t = duel_prop6(|p| kind.build(p), param_u64(&params, "p", None)?, param_u64(&params, "m", None)?)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            report(&t, out)
        }
    }
}

fn ingest(swf: &Path, out: &Option<PathBuf>) -> Outcome {
    let out = out.as_ref().ok_or_else(|| Failure::Usage("ingest needs --out".into()))?;
    let trace = parse_swf(open(swf)?).map_err(|e| Failure::Data(format!("{}: {e}", swf.display())))?;
    let intervals: Vec<Interval> = trace.jobs.iter().map(|j| j.interval()).collect();
    let mut w = sink(&Some(out.clone()))?;
    write_intervals(&mut w, &intervals).map_err(data)?;
    w.flush().map_err(data)?;
    let mut sidecar = out.clone().into_os_string();
    sidecar.push(".json");
    let summary = summarize(&trace);
    let text = serde_json::to_string_pretty(&summary).map_err(data)?;
    std::fs::write(&sidecar, text + "\n").map_err(data)?;
    eprintln!(
        "{} jobs ({} skipped), max length {}, average length {:.1}",
        summary.n_jobs, summary.skipped, summary.max_length, summary.avg_length
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    swf: PathBuf,
    variant: VariantArg,
    steps: usize,
    algorithms: &str,
    alpha: Option<&str>,
    workers: Option<usize>,
    verify: bool,
    cli: (&Option<PathBuf>, Format, u64),
) -> Outcome {
    let (out, format, seed) = cli;
    let algorithms = algorithms
        .split(',')
        .map(|a| a.trim().parse::<SweepAlgorithm>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let config = SweepConfig {
        trace_path: swf,
        variant: match variant {
            VariantArg::Balanced => Variant::Balanced,
            VariantArg::FnOnly => Variant::FnOnly,
            VariantArg::FpOnly => Variant::FpOnly,
        },
        steps,
        seed,
        algorithms,
        alpha: alpha.map(|a| rational_arg(a, "alpha")).transpose()?,
        workers,
    };
    let result = run_sweep(&config).map_err(data)?;
    if verify {
        verify_rows(&result.instance, &config, &result.rows).map_err(|e| Failure::Bound(e.to_string()))?;
    }
    let mut w = sink(out)?;
    match format {
        Format::Csv => emit_csv(&result.rows, &mut w),
        Format::Jsonl => emit_jsonl(&result.rows, &mut w),
    }
    .map_err(data)?;
    w.flush().map_err(data)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = &cli.out;
    let result = match cli.command {
        Command::Solve { input, bruteforce } => solve(&input, bruteforce, out),
        Command::Simulate { algo, input, prediction, alpha, level, path_len } => {
            simulate(algo, &input, prediction.as_deref(), alpha.as_deref(), level, path_len, out)
        }
        Command::Error { input, prediction } => error(&input, &prediction, out),
        Command::Duel { construction, algo, params } => duel(construction, algo, &params, out),
        Command::Ingest { swf } => ingest(&swf, out),
        Command::Sweep { swf, variant, steps, algorithms, alpha, workers, verify } => {
            sweep(swf, variant, steps, &algorithms, alpha.as_deref(), workers, verify, (out, cli.format, cli.seed))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Bound(m)) => {
            eprintln!("bound violation: {m}");
            ExitCode::from(3)
        }
    }
}
