//! Anonymous adopt-commit, randomized binary consensus with local coins,
//! the first-mover conciliator, and their integration with a doubling size
//! estimate.

mod adopt_commit;
mod classify;
mod first_mover;
mod rbc;

use rayon::prelude::*;
use serde::Serialize;

pub use adopt_commit::{AcMsg, AdoptCommit, NonBinaryInput};
pub use classify::{classify_trace, BroadcastClass, Classification, Face, NotRandomized, Origin, PhaseTally};
pub use first_mover::{FirstMover, FmMsg};
pub use rbc::{rbc2_doubling_period, rbc_phase_bound, reveal_probability, Conciliator, Rbc, RbcMsg};

use crate::error::ConfigError;
use crate::sim::rng::derive_seed;
use crate::sim::{Adversary, Entry, MacEngine, MacOptions, Message, NodeId, Note, RandomAdversary, Trace};
use crate::stats::wilson_interval;

/// `(node, value, phase)` for every node that output, in output order.
pub fn decisions<M: Message>(trace: &Trace<M>) -> Vec<(NodeId, u8, u64)> {
    trace
        .notes
        .iter()
        .filter_map(|r| match &r.note {
            Note::Output { decision, phase } => Some((r.node, decision.bit()?, phase.unwrap_or(0))),
            _ => None,
        })
        .collect()
}

/// Binary inputs as recorded in the trace, by node.
pub fn binary_inputs<M: Message>(trace: &Trace<M>) -> Vec<Option<u8>> {
    let mut out = vec![None; trace.n];
    for r in &trace.notes {
        if let Note::BinaryInput { value } = r.note {
            out[r.node] = Some(value);
        }
    }
    out
}

pub fn check_binary_inputs(inputs: &[u8]) -> Result<(), ConfigError> {
    if inputs.is_empty() {
        return Err(ConfigError::new("at least one node is needed"));
    }
    match inputs.iter().find(|&&x| x > 1) {
        Some(x) => Err(ConfigError::new(format!("input {x} is not binary"))),
        None => Ok(()),
    }
}

pub fn run_adopt_commit(inputs: &[u8], seed: u64, opts: MacOptions, adversary: &mut dyn Adversary) -> Result<Trace<AcMsg>, ConfigError> {
    check_binary_inputs(inputs)?;
    let nodes = inputs.iter().map(|&x| AdoptCommit::new(x).expect("checked")).collect();
    Ok(MacEngine::new(nodes, seed, opts).run(adversary))
}

pub fn run_rbc(
    inputs: &[u8],
    conciliator: Conciliator,
    seed: u64,
    opts: MacOptions,
    adversary: &mut dyn Adversary,
) -> Result<Trace<RbcMsg>, ConfigError> {
    check_binary_inputs(inputs)?;
    if let Conciliator::FirstMover { n0, c } = conciliator {
        if n0 == 0 || c.is_nan() || c <= 0.0 {
            return Err(ConfigError::new("first-mover needs n0 >= 1 and c > 0"));
        }
    }
    let nodes = inputs.iter().map(|&x| Rbc::new(x, conciliator)).collect();
    Ok(MacEngine::new(nodes, seed, opts).run(adversary))
}

/// Broadcast totals split into adopt-commit traffic, original conciliator
/// broadcasts, and follow-ups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BroadcastCounts {
    pub rbc: u64,
    pub original: u64,
    pub follow_up: u64,
    pub coin: u64,
    pub dummy: u64,
}

impl BroadcastCounts {
    pub fn total(&self) -> u64 {
        self.rbc + self.original + self.follow_up
    }

    pub fn from_classification(c: &Classification) -> Self {
        let coin_originals: u64 = c.phases.values().map(|t| t.coin_originals).sum();
        let dummy: u64 = c.phases.values().map(|t| t.dummy_originals).sum();
        BroadcastCounts {
            rbc: c.other,
            original: c.originals(),
            follow_up: c.follow_ups(),
            coin: coin_originals + c.follow_ups(),
            dummy,
        }
    }
}

/// In every phase with exactly one successful original coin broadcast,
/// every node that left that phase through the conciliator carries the
/// coin's value. Returns the first `(phase, node)` that does not.
pub fn check_single_coin_agreement<M: Message>(trace: &Trace<M>) -> Result<(), (u64, NodeId)> {
    let Ok(classes) = classify_trace(trace) else { return Ok(()) };
    for (&phase, tally) in &classes.phases {
        if tally.successful_originals != 1 {
            continue;
        }
        let winner = classes
            .broadcasts
            .iter()
            .find(|b| b.phase == phase && b.success)
            .and_then(|b| b.value)
            .expect("one successful original");
        for node in 0..trace.n {
            let mut followed_up = false;
            for r in trace.notes_of(node) {
                match r.note {
                    Note::FollowUp { phase: q, .. } if q == phase => followed_up = true,
                    Note::BinaryPhase { phase: q, value, via: Entry::Move } if followed_up && q == phase + 1 => {
                        if value != winner {
                            return Err((phase, node));
                        }
                        break;
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstMoverEstimate {
    pub n: usize,
    pub n_prime: u64,
    pub trials: u64,
    /// Trials with exactly one successful original coin broadcast.
    pub exactly_one: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Per trial: rank of the first completed original coin broadcast among
    /// completed original broadcasts.
    pub first_coin_ranks: Vec<Option<u64>>,
    /// Per trial: total original broadcasts made.
    pub originals: Vec<u64>,
}

impl FirstMoverEstimate {
    /// Fraction of trials whose first completed coin came within `bound`
    /// completed original broadcasts.
    pub fn fraction_within(&self, bound: f64) -> f64 {
        let hits = self.first_coin_ranks.iter().filter(|r| r.is_some_and(|r| r as f64 <= bound)).count();
        hits as f64 / self.trials as f64
    }
}

/// Runs the standalone conciliator `trials` times under random
/// message-oblivious schedules; inputs alternate 0, 1, 0, ...
pub fn estimate_firstmover_success(n: usize, n_prime: u64, trials: u64, seed: u64) -> Result<FirstMoverEstimate, ConfigError> {
    if trials < 100 {
        return Err(ConfigError::new(format!("{trials} trials are too few; use at least 100")));
    }
    if n == 0 || n_prime < n as u64 {
        return Err(ConfigError::new(format!("size estimate {n_prime} is below n = {n}")));
    }
    let results: Vec<(bool, Option<u64>, u64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let run_seed = derive_seed(seed, t);
            let nodes = (0..n).map(|i| FirstMover::new((i % 2) as u8, n_prime)).collect();
            let trace = MacEngine::new(nodes, run_seed, MacOptions::default()).run(&mut RandomAdversary::new(run_seed));
            let c = classify_trace(&trace).expect("first-mover traces carry inputs");
            let tally = c.phases.get(&0).cloned().unwrap_or_default();
            (tally.successful_originals == 1, tally.first_coin_rank, c.originals())
        })
        .collect();
    let exactly_one = results.iter().filter(|r| r.0).count() as u64;
    let (ci_low, ci_high) = wilson_interval(exactly_one, trials, 0.95).expect("trials > 0");
    Ok(FirstMoverEstimate {
        n,
        n_prime,
        trials,
        exactly_one,
        estimate: exactly_one as f64 / trials as f64,
        ci_low,
        ci_high,
        first_coin_ranks: results.iter().map(|r| r.1).collect(),
        originals: results.iter().map(|r| r.2).collect(),
    })
}
