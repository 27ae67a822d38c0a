use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;

use macsim::approximate::{
    check_contraction, check_halving, check_jump_provenance, check_mover_envelope, check_mover_interval, phase_ranges,
};
use macsim::checkers::{
    check_agreement, check_coherence, check_epsilon_agreement, check_validity, load_trace, phase_verdict, Observed, Verdict,
    Witness,
};
use macsim::harness::{run_experiment, sweep, write_sweep, ExperimentConfig, MetricsRow, Protocol, Seeds, SweepParam};
use macsim::lossy::check_median_interval;
use macsim::randomized::estimate_firstmover_success;
use macsim::sim::read_jsonl;
use macsim::stats::fit_scaling;
use macsim::store_collect::{check_regularity, read_history, RegularityVerdict};

/// Deterministic simulator for anonymous consensus over the abstract MAC
/// layer and fair-lossy channels.
#[derive(Parser)]
#[command(name = "macsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write a CSV row per seed.
    Run(RunArgs),
    /// Re-run an experiment for each value of one parameter.
    Sweep(SweepArgs),
    /// Check one property of an exported trace or store-collect history.
    Check(CheckArgs),
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Args)]
struct Overrides {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    f: Option<usize>,
    /// Number of seeds to derive from the base seed.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// CSV destination; stdout when neither this nor the config names one.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for one JSONL trace per seed.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Protocol; must match the config's when both are given.
    protocol: Option<Protocol>,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long)]
    protocol: Option<Protocol>,
    /// One of n, epsilon, delta, loss, Delta.
    #[arg(long)]
    vary: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Args)]
struct CheckArgs {
    /// validity, agreement, coherence, epsilon-agreement, regularity,
    /// halving, contraction, mover-interval, mover-envelope,
    /// jump-provenance or median-interval.
    property: String,
    file: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Estimate the chance of exactly one successful original coin broadcast.
    Firstmover {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        nprime: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the growth exponent of mean total broadcasts in n.
    Scaling {
        /// Read rows from a run CSV instead of simulating.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 4.0)]
        c: f64,
        #[arg(long, default_value_t = 1)]
        n0: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Verdict,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep_cmd(args),
        Command::Check(args) => check(args),
        Command::Stats(cmd) => stats(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verdict) => ExitCode::from(2),
    }
}

fn build_config(protocol: Option<Protocol>, o: &Overrides) -> Result<ExperimentConfig, Failure> {
    let mut config = match (&o.config, protocol) {
        (Some(path), p) => {
            let c = ExperimentConfig::load(path)?;
            if p.is_some_and(|p| p != c.protocol) {
                return Err(Failure::Usage(format!("config runs {}, not {}", c.protocol, p.unwrap())));
            }
            c
        }
        (None, Some(p)) => ExperimentConfig::new(p, o.n.ok_or_else(|| Failure::Usage("--n is needed without a config".into()))?),
        (None, None) => return Err(Failure::Usage("give a protocol or --config".into())),
    };
    if let Some(n) = o.n {
        config.n = n;
    }
    if let Some(f) = o.f {
        config.f = f;
    }
    if let Some(k) = o.seeds {
        config.seeds = Seeds::Count(k);
    }
    if let Some(s) = o.seed {
        config.seed = s;
    }
    if o.epsilon.is_some() {
        config.epsilon = o.epsilon;
    }
    if o.delta.is_some() {
        config.delta = o.delta;
    }
    if o.output.is_some() {
        config.output = o.output.clone();
    }
    if o.trace_dir.is_some() {
        config.trace_dir = o.trace_dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let config = build_config(args.protocol, &args.common)?;
    let report = run_experiment(&config)?;
    report.write_csv(sink(config.output.as_deref())?)?;
    let failures = report.failures();
    eprintln!("{} runs of {}, {} failed checks", report.runs.len(), config.protocol, failures.len());
    if failures.is_empty() {
        return Ok(());
    }
    for (seed, v) in failures {
        eprintln!("seed {seed}: {}", serde_json::to_string(v)?);
    }
    Err(Failure::Verdict)
}

fn sweep_cmd(args: SweepArgs) -> Result<(), Failure> {
    let config = build_config(args.protocol, &args.common)?;
    let rows = sweep(&config, args.vary, &args.values)?;
    write_sweep(&rows, sink(config.output.as_deref())?)?;
    let failed: usize = rows.iter().map(|r| r.failures).sum();
    if failed > 0 {
        eprintln!("{failed} failed checks across the sweep");
        return Err(Failure::Verdict);
    }
    Ok(())
}

fn check(args: CheckArgs) -> Result<(), Failure> {
    let open = || -> Result<BufReader<File>, Failure> { Ok(BufReader::new(File::open(&args.file)?)) };
    let verdict = if args.property == "regularity" {
        regularity_of_file(&args.file, open()?)?
    } else {
        let trace = load_trace(&read_jsonl(open()?)?)?;
        let obs = Observed::from_trace(&trace);
        let rows = || phase_ranges(&trace);
        let n = trace.n as u32;
        match args.property.as_str() {
            "validity" => check_validity(&obs),
            "agreement" => check_agreement(&obs),
            "coherence" => check_coherence(&obs),
            "epsilon-agreement" => {
                let eps = args.epsilon.ok_or_else(|| Failure::Usage("epsilon-agreement needs --epsilon".into()))?;
                let eps = BigRational::from_float(eps).filter(|e| *e > BigRational::from_integer(0.into()));
                check_epsilon_agreement(&obs, &eps.ok_or_else(|| Failure::Usage("epsilon must be positive".into()))?)
            }
            "halving" => phase_verdict("halving", &trace, check_halving(&rows())),
            "contraction" => phase_verdict("contraction", &trace, check_contraction(&rows(), n)),
            "mover-interval" => phase_verdict("mover-interval", &trace, check_mover_interval(&rows())),
            "mover-envelope" => phase_verdict("mover-envelope", &trace, check_mover_envelope(&rows(), n)),
            "jump-provenance" => phase_verdict("jump-provenance", &trace, check_jump_provenance(&rows())),
            "median-interval" => phase_verdict("median-interval", &trace, check_median_interval(&rows())),
            other => return Err(Failure::Usage(format!("unknown property `{other}`"))),
        }
    };
    println!("{verdict}");
    if verdict.passed {
        return Ok(());
    }
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    Err(Failure::Verdict)
}

/// Accepts a history export or a full trace export.
fn regularity_of_file(path: &Path, reader: BufReader<File>) -> Result<Verdict, Failure> {
    let history = match read_history(reader) {
        Ok(h) => h,
        Err(_) => {
            let trace = load_trace(&read_jsonl(BufReader::new(File::open(path)?))?)?;
            macsim::store_collect::extract_history(&trace)
        }
    };
    Ok(match check_regularity(&history)? {
        RegularityVerdict::Pass => Verdict::pass("regularity"),
        RegularityVerdict::Violation { kind, node, witness } => Verdict::fail(
            "regularity",
            Witness { events: witness.iter().map(|&i| history[i].time).collect(), nodes: vec![node], detail: format!("{kind:?}") },
        ),
    })
}

fn stats(cmd: StatsCommand) -> Result<(), Failure> {
    match cmd {
        StatsCommand::Firstmover { n, nprime, trials, delta, seed } => {
            let est = estimate_firstmover_success(n, nprime, trials, seed)?;
            let bound = 2.0 * nprime as f64 * (1.0 / delta).ln();
            println!("trials {}", est.trials);
            println!("exactly one successful coin {} ({:.4})", est.exactly_one, est.estimate);
            println!("wilson 95% [{:.4}, {:.4}]", est.ci_low, est.ci_high);
            println!("first coin within {bound:.1} originals {:.4}", est.fraction_within(bound));
            Ok(())
        }
        StatsCommand::Scaling { from, ns, trials, c, n0, seed } => {
            let rows: Vec<MetricsRow> = match from {
                Some(path) => csv::Reader::from_path(path)?.deserialize().collect::<Result<_, _>>()?,
                None => {
                    let mut rows = Vec::new();
                    for &n in &ns {
                        let mut config = ExperimentConfig::new(Protocol::Rbc2, n);
                        config.seeds = Seeds::Count(trials);
                        config.seed = seed;
                        config.c = c;
                        config.n0 = n0;
                        rows.extend(run_experiment(&config)?.rows().cloned());
                    }
                    rows
                }
            };
            let mut groups: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
            for r in &rows {
                groups.entry(r.n).or_default().push(r.broadcasts as f64);
            }
            println!("n,runs,mean_broadcasts");
            let (xs, ys): (Vec<f64>, Vec<f64>) = groups
                .iter()
                .map(|(&n, v)| {
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    println!("{n},{},{mean:.3}", v.len());
                    (n as f64, mean)
                })
                .unzip();
            println!("exponent {:.4}", fit_scaling(&xs, &ys)?);
            Ok(())
        }
    }
}
