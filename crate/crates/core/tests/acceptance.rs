//! Acceptance suite. Prints one PASS/FAIL line per criterion with its
//! runtime against the budget, and exits nonzero if any criterion fails.
//! Numeric arguments select criteria: `cargo test --test acceptance -- 6 9`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use macsim::approximate::{
    check_contraction, check_halving, check_jump_provenance, check_mover_envelope, check_mover_interval, mac_ac2_phases, mac_ac_phases, phase_ranges,
    run_mac_ac, run_mac_ac2,
};
use macsim::checkers::{check_agreement, check_coherence, check_epsilon_agreement, check_validity, Observed};
use macsim::dyadic::Dyadic;
use macsim::harness::{run_experiment, run_seed, ExperimentConfig, Protocol, Seeds};
use macsim::lossy::{
    check_envelope, check_median_interval, check_step_contraction, run_small_ac, run_small_bac, ByzStrategy, SmallBacSetup,
};
use macsim::randomized::{decisions, estimate_firstmover_success, rbc_phase_bound, run_adopt_commit, run_rbc, AdoptCommit, Conciliator};
use macsim::sim::explore::{explore, explore_dedup, Leaf};
use macsim::sim::lossy::check_fairness;
use macsim::sim::{
    Adversary, Decision, LaggardAdversary, LossPolicy, LossyChannelConfig, LossyOptions, MacEngine, MacOptions, RandomAdversary,
    RunVerdict,
};
use macsim::stats::{fit_scaling, wilson_interval};
use macsim::store_collect::{check_regularity, extract_history, MacSc, ScOp};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn unit_inputs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Dyadic> {
    (0..n).map(|_| Dyadic::new(rng.gen_range(0..=1i64 << 20), 20)).collect()
}

fn eps_rational(eps: f64) -> BigRational {
    BigRational::from_float(eps).unwrap()
}

/// Random scheduling for even seeds, a starved node 0 for odd ones.
fn adversary(seed: u64, crash: f64) -> Box<dyn Adversary> {
    if seed % 2 == 0 {
        Box::new(RandomAdversary::new(seed).with_crash_prob(crash))
    } else {
        Box::new(LaggardAdversary::new(seed, 0, 6).with_crash_prob(crash))
    }
}

fn crashing(n: usize) -> MacOptions {
    MacOptions { max_crashes: n - 1, record_events: false, ..MacOptions::default() }
}

fn sc_script(i: usize, ops: usize) -> Vec<ScOp> {
    (0..ops).map(|k| if k % 2 == 0 { ScOp::Store(format!("{i}.{k}")) } else { ScOp::Collect }).collect()
}

fn store_collect() -> Outcome {
    let mut violations = 0u64;
    let mut opts = MacOptions::default();
    opts.max_crashes = 1;
    let root = MacEngine::new(vec![MacSc::new(0, sc_script(0, 3)), MacSc::new(1, sc_script(1, 3))], 0, opts);
    let stats = explore(&root, 12, |e, _| {
        if !check_regularity(&extract_history(e.trace())).is_ok_and(|v| v.is_pass()) {
            violations += 1;
        }
    });
    let random: u64 = [3usize, 5]
        .par_iter()
        .flat_map(|&n| (0..1000u64).into_par_iter().map(move |s| (n, s)))
        .filter(|&(n, seed)| {
            let nodes = (0..n).map(|i| MacSc::new(i, sc_script(i, 4))).collect();
            let mut adv = RandomAdversary::new(seed).with_crash_prob(0.01);
            let opts = MacOptions { max_crashes: n - 1, ..MacOptions::default() };
            let trace = MacEngine::new(nodes, seed, opts).run(&mut adv);
            !check_regularity(&extract_history(&trace)).is_ok_and(|v| v.is_pass())
        })
        .count() as u64;
    outcome(
        violations == 0 && random == 0,
        format!("{} exhaustive schedules at depth 12 and 2000 random runs, {} violations", stats.leaves(), violations + random),
    )
}

fn adopt_commit() -> Outcome {
    let mut leaves = 0u64;
    let mut bad = 0u64;
    for inputs in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
        let opts = MacOptions { max_crashes: 1, ..MacOptions::default() };
        let root = MacEngine::new(inputs.iter().map(|&x| AdoptCommit::new(x).unwrap()).collect(), 0, opts);
        explore_dedup(&root, 64, |e, leaf| {
            leaves += 1;
            let obs = Observed::from_trace(e.trace());
            let converged = inputs[0] != inputs[1]
                || obs.outputs.iter().all(|o| o.value == Decision::AdoptCommit { commit: true, value: inputs[0] });
            if leaf != Leaf::Finished || !check_validity(&obs).passed || !check_coherence(&obs).passed || !converged {
                bad += 1;
            }
        });
    }
    let random = [3usize, 4]
        .par_iter()
        .flat_map(|&n| (0..10_000u64).into_par_iter().map(move |s| (n, s)))
        .filter(|&(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xac);
            let inputs: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
            let trace = run_adopt_commit(&inputs, seed, crashing(n), adversary(seed, 0.01).as_mut()).unwrap();
            let obs = Observed::from_trace(&trace);
            let unanimous = inputs.iter().all(|&b| b == inputs[0]);
            let converged = !unanimous || obs.outputs.iter().all(|o| o.value == Decision::AdoptCommit { commit: true, value: inputs[0] });
            trace.verdict != RunVerdict::Completed || !check_validity(&obs).passed || !check_coherence(&obs).passed || !converged
        })
        .count();
    outcome(
        bad == 0 && random == 0,
        format!("{leaves} exhaustive leaves over 4 input pairs, 20000 random runs, {} violations", bad as usize + random),
    )
}

fn rbc() -> Outcome {
    let delta = 0.1;
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [2usize, 3] {
        let bound = rbc_phase_bound(n, delta);
        let results: Vec<(bool, bool, bool)> = (0..10_000u64)
            .into_par_iter()
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbc);
                let inputs: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
                let trace = run_rbc(&inputs, Conciliator::LocalCoin, seed, crashing(n), adversary(seed, 0.005).as_mut()).unwrap();
                let obs = Observed::from_trace(&trace);
                let safe = check_validity(&obs).passed && check_agreement(&obs).passed;
                let phases: Vec<u64> = decisions(&trace).iter().map(|d| d.2).collect();
                let span = phases.iter().max().zip(phases.iter().min()).is_none_or(|(hi, lo)| hi - lo <= 1);
                let done = trace.verdict == RunVerdict::Completed && phases.iter().all(|&p| p + 1 <= bound);
                (safe, span, done)
            })
            .collect();
        let unsafe_runs = results.iter().filter(|r| !r.0).count();
        let wide = results.iter().filter(|r| !r.1).count();
        let done = results.iter().filter(|r| r.2).count() as u64;
        let (lo, _) = wilson_interval(done, 10_000, 0.95).unwrap();
        ok &= unsafe_runs == 0 && wide == 0 && lo >= 1.0 - delta;
        parts.push(format!("n={n}: {unsafe_runs} violations, {wide} wide spans, {done}/10000 within {bound} phases (Wilson low {lo:.4})"));
    }
    outcome(ok, parts.join("; "))
}

fn first_mover() -> Outcome {
    let est = estimate_firstmover_success(4, 4, 5000, 2024).unwrap();
    let bound = 2.0 * 4.0 * 10f64.ln();
    let within = est.fraction_within(bound);
    outcome(
        est.ci_low >= 0.05 && within >= 0.9,
        format!("P(one success) {:.4}, Wilson low {:.4}; first coin within {bound:.1} originals in {within:.4}", est.estimate, est.ci_low),
    )
}

fn rbc2_scaling() -> Outcome {
    let ns = [4usize, 8, 16, 32];
    let mut means = Vec::new();
    let mut failures = 0;
    for &n in &ns {
        let mut config = ExperimentConfig::new(Protocol::Rbc2, n);
        config.seeds = Seeds::Count(200);
        config.seed = 5;
        config.c = 4.0;
        config.n0 = 1;
        let report = run_experiment(&config).unwrap();
        failures += report.failures().len();
        let rows: Vec<f64> = report.rows().map(|r| r.broadcasts as f64).collect();
        means.push(rows.iter().sum::<f64>() / rows.len() as f64);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let exponent = fit_scaling(&xs, &means).unwrap();
    let shown: Vec<String> = ns.iter().zip(&means).map(|(n, m)| format!("{n}:{m:.1}")).collect();
    outcome(
        failures == 0 && exponent <= 1.5,
        format!("c=4, n0=1 (desk-scale); mean broadcasts {}; exponent {exponent:.3}; {failures} failed checks", shown.join(" ")),
    )
}

fn mac_ac() -> Outcome {
    let eps = 1.0 / 64.0;
    assert_eq!(mac_ac_phases(eps).unwrap(), 6);
    let bad: Vec<(usize, u64, &str)> = [2usize, 4, 8]
        .par_iter()
        .flat_map(|&n| (0..1000u64).into_par_iter().map(move |s| (n, s)))
        .filter_map(|(n, seed)| {
            let inputs = unit_inputs(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xa1), n);
            let trace = run_mac_ac(&inputs, eps, seed, crashing(n), adversary(seed, 0.005).as_mut()).unwrap();
            let rows = phase_ranges(&trace);
            let obs = Observed::from_trace(&trace);
            let why = if trace.verdict != RunVerdict::Completed {
                "termination"
            } else if check_halving(&rows).is_err() {
                "halving"
            } else if !check_epsilon_agreement(&obs, &eps_rational(eps)).passed {
                "epsilon-agreement"
            } else if check_mover_interval(&rows).is_err() {
                "mover-interval"
            } else if check_jump_provenance(&rows).is_err() {
                "jump-provenance"
            } else if !check_validity(&obs).passed {
                "validity"
            } else {
                return None;
            };
            Some((n, seed, why))
        })
        .collect();
    outcome(bad.is_empty(), format!("3000 runs at n in {{2,4,8}}, eps=2^-6, p_end=6; failures {bad:?}"))
}

fn mac_ac2() -> Outcome {
    let eps = 1.0 / 8.0;
    let bad: Vec<(usize, u64, &str)> = [2usize, 4]
        .par_iter()
        .flat_map(|&n| (0..1000u64).into_par_iter().map(move |s| (n, s)))
        .filter_map(|(n, seed)| {
            let inputs = unit_inputs(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xa2), n);
            let trace = run_mac_ac2(&inputs, eps, n as u32, seed, crashing(n), adversary(seed, 0.002).as_mut()).unwrap();
            let rows = phase_ranges(&trace);
            let obs = Observed::from_trace(&trace);
            let why = if trace.verdict != RunVerdict::Completed {
                "termination"
            } else if check_contraction(&rows, n as u32).is_err() {
                "contraction"
            } else if check_mover_envelope(&rows, n as u32).is_err() {
                "mover-envelope"
            } else if !check_epsilon_agreement(&obs, &eps_rational(eps)).passed {
                "epsilon-agreement"
            } else {
                return None;
            };
            Some((n, seed, why))
        })
        .collect();
    let phases = [mac_ac2_phases(eps, 2).unwrap(), mac_ac2_phases(eps, 4).unwrap()];
    outcome(bad.is_empty(), format!("2000 runs at n in {{2,4}}, eps=2^-3, p_end {phases:?}; failures {bad:?}"))
}

fn small_ac() -> Outcome {
    let eps = 1.0 / 64.0;
    let delta = 4;
    let bad: Vec<(f64, u64, &str)> = [0.3f64, 0.6, 0.9]
        .par_iter()
        .flat_map(|&loss| (0..1000u64).into_par_iter().map(move |s| (loss, s)))
        .filter_map(|(loss, seed)| {
            let inputs = unit_inputs(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5a), 3);
            let channel = LossyChannelConfig { t: 1, delta, policy: LossPolicy::Iid { loss, duplicate: 0.05 } };
            let mut opts = LossyOptions::new(channel);
            opts.max_crashes = 1;
            opts.crash_prob = 0.002;
            let trace = run_small_ac(&inputs, 1, eps, seed, opts).unwrap();
            let rows = phase_ranges(&trace);
            let obs = Observed::from_trace(&trace);
            let why = if trace.verdict != RunVerdict::Completed {
                "termination"
            } else if check_fairness(&trace, delta).is_err() {
                "fairness"
            } else if check_halving(&rows).is_err() {
                "halving"
            } else if !check_epsilon_agreement(&obs, &eps_rational(eps)).passed {
                "epsilon-agreement"
            } else if check_median_interval(&rows).is_err() {
                "median-interval"
            } else if !check_validity(&obs).passed {
                "validity"
            } else {
                return None;
            };
            Some((loss, seed, why))
        })
        .collect();
    outcome(bad.is_empty(), format!("3000 runs, n=3 f=1, loss in {{0.3,0.6,0.9}}, Delta={delta}; failures {bad:?}"))
}

fn small_bac() -> Outcome {
    let (n, f, eps) = (6usize, 1usize, 0.01);
    let p_end = mac_ac2_phases(eps, n as u32).unwrap();
    let bad: Vec<(ByzStrategy, u64, &str)> = ByzStrategy::ALL
        .par_iter()
        .flat_map(|&s| (0..500u64).into_par_iter().map(move |seed| (s, seed)))
        .filter_map(|(strategy, seed)| {
            let inputs = unit_inputs(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xbac), n);
            let setup = SmallBacSetup::new(n, f, eps, strategy).unwrap();
            let channel = LossyChannelConfig { t: 1, delta: 4, policy: LossPolicy::Iid { loss: 0.3, duplicate: 0.0 } };
            let mut opts = LossyOptions::new(channel);
            opts.record_events = false;
            let trace = run_small_bac(&inputs, &setup, seed, opts).unwrap();
            let rows = phase_ranges(&trace);
            let obs = Observed::from_trace(&trace);
            let h = n - f;
            let why = if trace.verdict != RunVerdict::Completed {
                "termination"
            } else if !check_validity(&obs).passed {
                "validity"
            } else if !check_epsilon_agreement(&obs, &eps_rational(eps)).passed {
                "epsilon-agreement"
            } else if check_step_contraction(&rows, h, n as u32).is_err() {
                "step-contraction"
            } else if check_envelope(&rows, h, f).is_err() {
                "envelope"
            } else {
                return None;
            };
            Some((strategy, seed, why))
        })
        .collect();
    outcome(bad.is_empty(), format!("5 strategies x 500 runs, n=6 f=1, eps=0.01, p_end={p_end} (untruncated); failures {bad:?}"))
}

fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mismatches = Vec::new();
    for _ in 0..20 {
        let protocol = Protocol::ALL[rng.gen_range(0..Protocol::ALL.len())];
        let n = match protocol {
            Protocol::SmallBac => 6,
            _ => rng.gen_range(3..=5),
        };
        let mut config = ExperimentConfig::new(protocol, n);
        config.f = 1;
        if protocol.is_lossy() {
            config.loss = rng.gen_range(0.0..0.9);
        }
        let seed = rng.gen();
        let a = run_seed(&config, seed, true).unwrap();
        let b = run_seed(&config, seed, true).unwrap();
        let csv = |r: &macsim::harness::SeedRun| {
            let mut buf = Vec::new();
            macsim::harness::write_rows([&r.row], &mut buf).unwrap();
            buf
        };
        if a.trace != b.trace || csv(&a) != csv(&b) {
            mismatches.push((protocol, seed));
        }
    }
    outcome(mismatches.is_empty(), format!("20 (config, seed) pairs run twice; mismatches {mismatches:?}"))
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "store-collect regularity", 120, store_collect),
    (2, "adopt-commit", 120, adopt_commit),
    (3, "randomized binary consensus", 300, rbc),
    (4, "first-mover conciliator", 180, first_mover),
    (5, "doubling-estimate scaling", 900, rbc2_scaling),
    (6, "MAC-AC halving and movers", 180, mac_ac),
    (7, "MAC-AC2 contraction", 180, mac_ac2),
    (8, "SmallAC over lossy links", 300, small_ac),
    (9, "SmallBAC under the Byzantine catalog", 600, small_bac),
    (10, "determinism", 120, determinism),
];

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (num, name, budget, run) in CRITERIA {
        if !only.is_empty() && !only.contains(&num) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let ok = out.ok && in_time;
        failed += usize::from(!ok);
        let late = if in_time { "" } else { " OVER BUDGET" };
        println!(
            "criterion {num:>2} {}: {name}: {} [{:.1}s of {budget}s{late}]",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
