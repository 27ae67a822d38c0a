//! Experiment orchestration: one deterministic run per seed, every
//! applicable checker on each trace, CSV rows and sweep aggregates.

mod config;

use std::io::Write;
use std::path::Path;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{AdversaryKind, ExperimentConfig, Protocol, Seeds, Transport};

use crate::approximate::{
    check_contraction, check_halving, check_jump_provenance, check_mover_envelope, check_mover_interval, phase_ranges,
    run_mac_ac, run_mac_ac2, PhaseRow, StateMsg,
};
use crate::checkers::{
    check_agreement, check_coherence, check_epsilon_agreement, check_validity, phase_verdict, Observed, Verdict, Witness,
};
use crate::dyadic::Dyadic;
use crate::error::ConfigError;
use crate::lossy::{check_envelope, check_median_interval, check_step_contraction, run_small_ac, run_small_bac, ByzStrategy, SmallBacSetup};
use crate::randomized::{
    classify_trace, decisions, rbc_phase_bound, run_adopt_commit, run_rbc, BroadcastCounts, Conciliator,
};
use crate::sim::lossy::check_fairness;
use crate::sim::rng::derive_seed;
use crate::sim::{
    Adversary, Decision, LaggardAdversary, LockstepAdversary, LossyOptions, MacEngine, MacOptions, Message,
    Note, RandomAdversary, RunVerdict, Trace,
};
use crate::stats::{summarize, Summary};
use crate::store_collect::{check_regularity, extract_history, MacSc, RegularityVerdict, ScOp};

/// Index of the seed stream that draws random inputs.
const INPUT_STREAM: u64 = 1 << 40;

/// Bits of precision of randomly drawn approximate-consensus inputs.
const INPUT_BITS: u32 = 20;

/// Decimal digits of every rendered rational.
pub const DIGITS: usize = 12;

/// One CSV row. The column set is the same for every protocol; columns a
/// protocol does not produce stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub protocol: String,
    pub n: usize,
    pub f: usize,
    pub seed: u64,
    pub verdict: String,
    /// Every correct node produced an output.
    pub decided: bool,
    /// Common bit for binary protocols, smallest correct output otherwise.
    pub value: Option<String>,
    /// Highest phase any correct node output in.
    pub phases: Option<u64>,
    pub broadcasts: u64,
    pub n_rbc: Option<u64>,
    pub n_original: Option<u64>,
    pub n_follow_up: Option<u64>,
    pub n_coin: Option<u64>,
    pub n_dummy: Option<u64>,
    /// All decisions fall within the local-coin phase bound for `delta`.
    pub within_bound: Option<bool>,
    pub output_range: Option<String>,
    /// `range(V[p])` for p = 0, 1, ..., separated by `;`.
    pub ranges: Option<String>,
    pub wall_events: u64,
    pub forced_deliveries: Option<u64>,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub row: MetricsRow,
    pub verdicts: Vec<Verdict>,
    /// JSONL export of the trace, when requested.
    pub trace: Option<String>,
}

impl SeedRun {
    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<SeedRun>,
}

impl ExperimentReport {
    pub fn rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.runs.iter().map(|r| &r.row)
    }

    /// `(seed, verdict)` for every failed check.
    pub fn failures(&self) -> Vec<(u64, &Verdict)> {
        self.runs.iter().flat_map(|r| r.failures().map(move |v| (r.row.seed, v))).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        write_rows(self.rows(), w)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

pub fn write_rows<'a, W: Write>(rows: impl IntoIterator<Item = &'a MetricsRow>, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Thread pool sized by `MACSIM_WORKERS`, or rayon's default when unset.
pub fn worker_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var("MACSIM_WORKERS").ok().and_then(|s| s.parse::<usize>().ok()).filter(|&k| k > 0) {
        builder = builder.num_threads(k);
    }
    builder.build().expect("thread pool")
}

/// Runs every seed of `config` in parallel. Rows come back in seed order
/// and do not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    config.validate()?;
    let keep = config.trace_dir.is_some();
    let seeds = config.seed_list();
    let runs: Result<Vec<SeedRun>, ConfigError> =
        worker_pool().install(|| seeds.par_iter().map(|&s| run_seed(config, s, keep)).collect());
    let report = ExperimentReport { runs: runs? };
    if let Some(dir) = &config.trace_dir {
        write_traces(config, &report, dir).map_err(|e| ConfigError::new(format!("{}: {e}", dir.display())))?;
    }
    Ok(report)
}

fn write_traces(config: &ExperimentConfig, report: &ExperimentReport, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for run in &report.runs {
        if let Some(text) = &run.trace {
            let name = format!("{}-n{}-seed{}.jsonl", config.protocol, config.n, run.row.seed);
            std::fs::write(dir.join(name), text)?;
        }
    }
    Ok(())
}

enum Inputs {
    Bits(Vec<u8>),
    Values(Vec<Dyadic>),
    Labels(Vec<String>),
}

fn inputs_for(config: &ExperimentConfig, seed: u64) -> Result<Inputs, ConfigError> {
    let p = config.protocol;
    if let Some(given) = &config.inputs {
        return match p {
            Protocol::StoreCollect => Ok(Inputs::Labels(given.clone())),
            Protocol::AdoptCommit | Protocol::Rbc | Protocol::Rbc2 => given
                .iter()
                .map(|s| s.trim().parse::<u8>().map_err(|_| ConfigError::new(format!("input `{s}` is not binary"))))
                .collect::<Result<_, _>>()
                .map(Inputs::Bits),
            _ => given
                .iter()
                .map(|s| s.parse::<Dyadic>().map_err(|e| ConfigError::new(e.to_string())))
                .collect::<Result<_, _>>()
                .map(Inputs::Values),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, INPUT_STREAM));
    let n = config.n;
    Ok(match p {
        Protocol::StoreCollect => Inputs::Labels((0..n).map(|i| format!("v{i}")).collect()),
        Protocol::AdoptCommit | Protocol::Rbc | Protocol::Rbc2 => Inputs::Bits((0..n).map(|_| rng.gen_range(0..=1)).collect()),
        _ => Inputs::Values((0..n).map(|_| Dyadic::new(rng.gen_range(0..=1i64 << INPUT_BITS), INPUT_BITS)).collect()),
    })
}

fn mac_adversary(config: &ExperimentConfig, seed: u64) -> Box<dyn Adversary> {
    let crash = if config.f > 0 { config.crash_prob } else { 0.0 };
    match config.adversary {
        AdversaryKind::Lockstep => Box::new(LockstepAdversary),
        AdversaryKind::Laggard => Box::new(LaggardAdversary::new(seed, 0, 8).with_crash_prob(crash)),
        AdversaryKind::Random | AdversaryKind::Drop => Box::new(RandomAdversary::new(seed).with_crash_prob(crash)),
    }
}

/// One run of `config` under `seed` with all applicable checks.
pub fn run_seed(config: &ExperimentConfig, seed: u64, keep_trace: bool) -> Result<SeedRun, ConfigError> {
    config.validate()?;
    let inputs = inputs_for(config, seed)?;
    let mac = MacOptions { event_budget: config.event_budget, max_crashes: config.f, record_events: keep_trace };
    let mut adv = mac_adversary(config, seed);
    let lossy = || {
        let mut o = LossyOptions::new(config.channel());
        o.event_budget = config.event_budget;
        o.crash_prob = config.crash_prob;
        o
    };
    match (config.protocol, inputs) {
        (Protocol::StoreCollect, Inputs::Labels(labels)) => {
            let nodes = labels
                .iter()
                .enumerate()
                .map(|(i, l)| MacSc::new(i, [ScOp::Store(l.clone()), ScOp::Collect, ScOp::Store(format!("{l}'")), ScOp::Collect]))
                .collect();
            let trace = MacEngine::new(nodes, seed, mac).run(adv.as_mut());
            let verdicts = vec![termination(&trace), regularity(&trace)];
            Ok(finish(config, &trace, base_row(config, &trace), verdicts, keep_trace))
        }
        (Protocol::AdoptCommit, Inputs::Bits(bits)) => {
            let trace = run_adopt_commit(&bits, seed, mac, adv.as_mut())?;
            let obs = Observed::from_trace(&trace);
            let verdicts = vec![termination(&trace), check_validity(&obs), check_coherence(&obs), convergence(&bits, &obs)];
            let mut row = base_row(config, &trace);
            row.value = common_bit(&obs);
            Ok(finish(config, &trace, row, verdicts, keep_trace))
        }
        (Protocol::Rbc | Protocol::Rbc2, Inputs::Bits(bits)) => {
            let conciliator = match config.protocol {
                Protocol::Rbc => Conciliator::LocalCoin,
                _ => Conciliator::FirstMover { n0: config.n0, c: config.c },
            };
            let trace = run_rbc(&bits, conciliator, seed, mac, adv.as_mut())?;
            let obs = Observed::from_trace(&trace);
            let verdicts = vec![termination(&trace), check_validity(&obs), check_agreement(&obs)];
            let mut row = base_row(config, &trace);
            row.value = common_bit(&obs);
            if let Ok(c) = classify_trace(&trace) {
                let counts = BroadcastCounts::from_classification(&c);
                row.n_rbc = Some(counts.rbc);
                row.n_original = Some(counts.original);
                row.n_follow_up = Some(counts.follow_up);
                row.n_coin = Some(counts.coin);
                row.n_dummy = Some(counts.dummy);
            }
            if let Some(delta) = config.delta {
                let bound = rbc_phase_bound(config.n, delta);
                row.within_bound = Some(row.decided && decisions(&trace).iter().all(|d| d.2 <= bound));
            }
            Ok(finish(config, &trace, row, verdicts, keep_trace))
        }
        (Protocol::MacAc, Inputs::Values(values)) => {
            let trace = run_mac_ac(&values, config.epsilon()?, seed, mac, adv.as_mut())?;
            let rows = phase_ranges(&trace);
            let verdicts = vec![
                phase_verdict("halving", &trace, check_halving(&rows)),
                phase_verdict("mover-interval", &trace, check_mover_interval(&rows)),
                phase_verdict("jump-provenance", &trace, check_jump_provenance(&rows)),
            ];
            Ok(approximate_run(config, &trace, &rows, verdicts, keep_trace))
        }
        (Protocol::MacAc2, Inputs::Values(values)) => {
            let n_upper = config.n_upper.unwrap_or(config.n as u32);
            let trace = run_mac_ac2(&values, config.epsilon()?, n_upper, seed, mac, adv.as_mut())?;
            let rows = phase_ranges(&trace);
            let n = config.n as u32;
            let verdicts = vec![
                phase_verdict("contraction", &trace, check_contraction(&rows, n)),
                phase_verdict("mover-envelope", &trace, check_mover_envelope(&rows, n)),
            ];
            Ok(approximate_run(config, &trace, &rows, verdicts, keep_trace))
        }
        (Protocol::SmallAc, Inputs::Values(values)) => {
            let mut opts = lossy();
            opts.max_crashes = config.f;
            let trace = run_small_ac(&values, config.f, config.epsilon()?, seed, opts)?;
            let rows = phase_ranges(&trace);
            let verdicts = vec![
                phase_verdict("halving", &trace, check_halving(&rows)),
                phase_verdict("median-interval", &trace, check_median_interval(&rows)),
                fairness(&trace, config.delta_bound),
            ];
            Ok(approximate_run(config, &trace, &rows, verdicts, keep_trace))
        }
        (Protocol::SmallBac, Inputs::Values(values)) => {
            let strategy = config.byz.unwrap_or(ByzStrategy::Silent);
            let mut setup = SmallBacSetup::new(config.n, config.f, config.epsilon()?, strategy)?;
            setup.include_self_value = config.include_self_value;
            let trace = run_small_bac(&values, &setup, seed, lossy())?;
            let rows = phase_ranges(&trace);
            let h = config.n - setup.byzantine.len();
            let verdicts = vec![
                phase_verdict("step-contraction", &trace, check_step_contraction(&rows, h, config.n as u32)),
                phase_verdict("envelope", &trace, check_envelope(&rows, h, config.f)),
                fairness(&trace, config.delta_bound),
            ];
            Ok(approximate_run(config, &trace, &rows, verdicts, keep_trace))
        }
        _ => unreachable!("inputs match the protocol"),
    }
}

fn approximate_run<M: StateMsg>(
    config: &ExperimentConfig,
    trace: &Trace<M>,
    rows: &[PhaseRow],
    mut verdicts: Vec<Verdict>,
    keep_trace: bool,
) -> SeedRun {
    let obs = Observed::from_trace(trace);
    let eps = BigRational::from_float(config.epsilon.expect("validated")).expect("finite epsilon");
    verdicts.splice(0..0, [termination(trace), check_validity(&obs), check_epsilon_agreement(&obs, &eps)]);
    let mut row = base_row(config, trace);
    let outs: Vec<&Dyadic> = obs.outputs.iter().filter_map(|o| o.value.dyadic()).collect();
    if let (Some(lo), Some(hi)) = (outs.iter().min(), outs.iter().max()) {
        row.value = Some(lo.to_decimal(DIGITS));
        row.output_range = Some((*hi - *lo).to_decimal(DIGITS));
    }
    row.ranges = Some(rows.iter().map(|r| r.range().to_decimal(DIGITS)).collect::<Vec<_>>().join(";"));
    finish(config, trace, row, verdicts, keep_trace)
}

fn base_row<M>(config: &ExperimentConfig, trace: &Trace<M>) -> MetricsRow {
    let correct = (0..trace.n).filter(|&i| !trace.crashed[i] && !trace.byzantine[i]);
    let decided = correct.clone().all(|i| trace.outputs[i].is_some());
    let phases = trace
        .notes
        .iter()
        .filter(|r| !trace.byzantine[r.node])
        .filter_map(|r| match r.note {
            Note::Output { phase, .. } => phase,
            _ => None,
        })
        .max();
    MetricsRow {
        protocol: config.protocol.name().to_string(),
        n: config.n,
        f: config.f,
        seed: trace.seed,
        verdict: verdict_name(trace.verdict).to_string(),
        decided,
        value: None,
        phases,
        broadcasts: trace.broadcasts.len() as u64,
        n_rbc: None,
        n_original: None,
        n_follow_up: None,
        n_coin: None,
        n_dummy: None,
        within_bound: None,
        output_range: None,
        ranges: None,
        wall_events: trace.events_applied,
        forced_deliveries: config.protocol.is_lossy().then_some(trace.forced_deliveries),
        failures: 0,
    }
}

fn finish<M: Message>(config: &ExperimentConfig, trace: &Trace<M>, mut row: MetricsRow, verdicts: Vec<Verdict>, keep: bool) -> SeedRun {
    row.failures = verdicts.iter().filter(|v| !v.passed).count();
    for v in verdicts.iter().filter(|v| !v.passed) {
        log::warn!("{} seed {}: {v}", config.protocol, trace.seed);
    }
    SeedRun { row, verdicts, trace: keep.then(|| trace.to_jsonl_string()) }
}

pub fn verdict_name(v: RunVerdict) -> &'static str {
    match v {
        RunVerdict::Completed => "completed",
        RunVerdict::Timeout => "timeout",
        RunVerdict::Stalled => "stalled",
    }
}

fn common_bit(obs: &Observed) -> Option<String> {
    let mut bits = obs.outputs.iter().filter_map(|o| o.value.bit());
    let b = bits.next()?;
    bits.all(|c| c == b).then(|| b.to_string())
}

fn termination<M>(trace: &Trace<M>) -> Verdict {
    if trace.verdict == RunVerdict::Completed {
        return Verdict::pass("termination");
    }
    let last = trace.events.last().map(|e| e.time).into_iter().collect();
    let waiting = (0..trace.n).filter(|&i| !trace.crashed[i] && !trace.byzantine[i] && trace.outputs[i].is_none()).collect();
    Verdict::fail(
        "termination",
        Witness { events: last, nodes: waiting, detail: format!("run ended {} after {} events", verdict_name(trace.verdict), trace.events_applied) },
    )
}

/// Unanimous inputs force every adopt-commit output to commit that value.
fn convergence(inputs: &[u8], obs: &Observed) -> Verdict {
    let unanimous = inputs.iter().all(|&b| b == inputs[0]);
    let want = Decision::AdoptCommit { commit: true, value: inputs[0] };
    match obs.outputs.iter().find(|o| unanimous && o.value != want) {
        None => Verdict::pass("convergence"),
        Some(o) => Verdict::fail(
            "convergence",
            Witness { events: vec![o.time], nodes: vec![o.node], detail: format!("unanimous input {} but output {:?}", inputs[0], o.value) },
        ),
    }
}

fn regularity<M: Message>(trace: &Trace<M>) -> Verdict {
    let history = extract_history(trace);
    match check_regularity(&history) {
        Ok(RegularityVerdict::Pass) => Verdict::pass("regularity"),
        Ok(RegularityVerdict::Violation { kind, node, witness }) => Verdict::fail(
            "regularity",
            Witness {
                events: witness.iter().map(|&i| history[i].time).collect(),
                nodes: vec![node],
                detail: format!("{kind:?} (property {})", kind.property()),
            },
        ),
        Err(e) => Verdict::fail("regularity", Witness { detail: e.to_string(), ..Witness::default() }),
    }
}

fn fairness(trace: &Trace<crate::sim::Datagram>, delta: u64) -> Verdict {
    match check_fairness(trace, delta) {
        Ok(()) => Verdict::pass("fairness"),
        Err((from, to, round)) => Verdict::fail(
            "fairness",
            Witness { events: vec![round], nodes: vec![from, to], detail: format!("no delivery {from} -> {to} in the window ending at round {round}") },
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    N,
    Epsilon,
    Delta,
    Loss,
    DeltaBound,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n" => Ok(SweepParam::N),
            "epsilon" | "eps" => Ok(SweepParam::Epsilon),
            "delta" => Ok(SweepParam::Delta),
            "loss" => Ok(SweepParam::Loss),
            "Delta" => Ok(SweepParam::DeltaBound),
            _ => Err(format!("cannot sweep over `{s}`; use n, epsilon, delta, loss or Delta")),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Delta => "delta",
            SweepParam::Loss => "loss",
            SweepParam::DeltaBound => "Delta",
        }
    }

    fn apply(self, config: &mut ExperimentConfig, value: f64) -> Result<(), ConfigError> {
        let whole = || {
            (value >= 0.0 && value.fract() == 0.0)
                .then_some(value as u64)
                .ok_or_else(|| ConfigError::new(format!("{} takes whole values, got {value}", self.name())))
        };
        match self {
            SweepParam::N => config.n = whole()? as usize,
            SweepParam::Epsilon => config.epsilon = Some(value),
            SweepParam::Delta => config.delta = Some(value),
            SweepParam::Loss => config.loss = value,
            SweepParam::DeltaBound => config.delta_bound = whole()?,
        }
        Ok(())
    }
}

/// Aggregate of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub runs: usize,
    pub failures: usize,
    pub decided: usize,
    pub phases_mean: Option<f64>,
    pub phases_median: Option<f64>,
    pub phases_p95: Option<f64>,
    pub broadcasts_mean: f64,
    pub broadcasts_median: f64,
    pub broadcasts_p95: f64,
    pub events_mean: f64,
    pub events_median: f64,
    pub events_p95: f64,
}

/// Runs `base` once per value of `param` and folds each report into a row.
pub fn sweep(base: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>, ConfigError> {
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        let mut config = base.clone();
        config.trace_dir = None;
        param.apply(&mut config, value)?;
        let report = run_experiment(&config)?;
        out.push(aggregate(param, value, &report));
    }
    Ok(out)
}

fn aggregate(param: SweepParam, value: f64, report: &ExperimentReport) -> SweepRow {
    let rows: Vec<&MetricsRow> = report.rows().collect();
    let phases: Vec<f64> = rows.iter().filter_map(|r| r.phases).map(|p| p as f64).collect();
    let broadcasts: Vec<f64> = rows.iter().map(|r| r.broadcasts as f64).collect();
    let events: Vec<f64> = rows.iter().map(|r| r.wall_events as f64).collect();
    let p = summarize(&phases);
    let b = summarize(&broadcasts).expect("at least one seed");
    let e = summarize(&events).expect("at least one seed");
    SweepRow {
        param: param.name().to_string(),
        value,
        runs: rows.len(),
        failures: rows.iter().map(|r| r.failures).sum(),
        decided: rows.iter().filter(|r| r.decided).count(),
        phases_mean: p.map(|s: Summary| s.mean),
        phases_median: p.map(|s| s.median),
        phases_p95: p.map(|s| s.p95),
        broadcasts_mean: b.mean,
        broadcasts_median: b.median,
        broadcasts_p95: b.p95,
        events_mean: e.mean,
        events_median: e.median,
        events_p95: e.p95,
    }
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(p: Protocol, n: usize, seeds: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(p, n);
        c.seeds = Seeds::Count(seeds);
        c
    }

    #[test]
    fn mac_ac_hundred_seeds_without_failures() {
        let report = run_experiment(&config(Protocol::MacAc, 4, 100)).unwrap();
        assert_eq!(report.runs.len(), 100);
        assert!(report.failures().is_empty(), "{:?}", report.failures());
        assert!(report.rows().all(|r| r.phases == Some(6) || !r.decided));
    }

    #[test]
    fn every_protocol_runs_clean() {
        for p in Protocol::ALL {
            let mut c = config(p, 6, 5);
            c.f = 1;
            let report = run_experiment(&c).unwrap();
            assert!(report.failures().is_empty(), "{p}: {:?}", report.failures());
        }
    }

    #[test]
    fn csv_schema_is_shared() {
        let a = run_experiment(&config(Protocol::Rbc2, 4, 2)).unwrap().to_csv_string();
        let b = run_experiment(&config(Protocol::SmallAc, 3, 2)).unwrap().to_csv_string();
        assert_eq!(a.lines().next(), b.lines().next());
        assert!(a.lines().next().unwrap().contains("n_original"));
    }

    #[test]
    fn rows_do_not_depend_on_worker_count() {
        let c = config(Protocol::Rbc, 3, 16);
        let a = run_experiment(&c).unwrap().to_csv_string();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let rows: Vec<SeedRun> = single.install(|| c.seed_list().iter().map(|&s| run_seed(&c, s, false).unwrap()).collect());
        assert_eq!(a, ExperimentReport { runs: rows }.to_csv_string());
    }

    #[test]
    fn epsilon_sweep_tracks_phase_count() {
        let base = config(Protocol::MacAc, 4, 5);
        let values: Vec<f64> = (3..=10).map(|k| 2f64.powi(-k)).collect();
        let rows = sweep(&base, SweepParam::Epsilon, &values).unwrap();
        for (k, row) in (3..=10).zip(&rows) {
            assert_eq!(row.failures, 0);
            assert_eq!(row.phases_median, Some(k as f64));
        }
    }

    #[test]
    fn explicit_inputs_are_used() {
        let mut c = config(Protocol::AdoptCommit, 3, 3);
        c.inputs = Some(vec!["1".into(), "1".into(), "1".into()]);
        let report = run_experiment(&c).unwrap();
        assert!(report.rows().all(|r| r.value.as_deref() == Some("1")));
        c.inputs = Some(vec!["1".into(), "2".into(), "1".into()]);
        assert!(run_experiment(&c).is_err());
    }
}
