//! Approximate consensus over the abstract MAC layer with exact dyadic
//! states, and the per-phase table used to check convergence on traces.

mod mac_ac;
mod mac_ac2;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use mac_ac::MacAc;
pub use mac_ac2::MacAc2;

use crate::dyadic::{contraction_factor, range_of, Dyadic};
use crate::error::ConfigError;
use crate::sim::{Adversary, Entry, MacEngine, MacOptions, Message, NodeId, Note, Trace};

/// A state broadcast `(v, p)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApproxMsg {
    pub v: Dyadic,
    pub p: u64,
}

impl Message for ApproxMsg {
    fn phase(&self) -> Option<u64> {
        Some(self.p)
    }
}

/// Messages that carry an approximate-consensus state.
pub trait StateMsg: Message {
    fn state(&self) -> Option<(&Dyadic, u64)>;
}

impl StateMsg for ApproxMsg {
    fn state(&self) -> Option<(&Dyadic, u64)> {
        Some((&self.v, self.p))
    }
}

fn check_epsilon(eps: f64) -> Result<(), ConfigError> {
    if eps.is_nan() || eps <= 0.0 || eps > 1.0 {
        return Err(ConfigError::new(format!("epsilon {eps} is outside (0, 1]")));
    }
    Ok(())
}

/// Phases needed by MAC-AC: `ceil(log2(1/eps))`.
pub fn mac_ac_phases(eps: f64) -> Result<u64, ConfigError> {
    check_epsilon(eps)?;
    Ok((1.0 / eps).log2().ceil().max(0.0) as u64)
}

/// Phases needed by MAC-AC2 for an upper bound `n_upper` on the system size:
/// `ceil(ln eps / ln(1 - 2^-n_upper))`.
pub fn mac_ac2_phases(eps: f64, n_upper: u32) -> Result<u64, ConfigError> {
    check_epsilon(eps)?;
    if n_upper == 0 || n_upper > 52 {
        return Err(ConfigError::new(format!("n_upper {n_upper} is outside [1, 52]")));
    }
    let rate = (-(0.5f64.powi(n_upper as i32))).ln_1p();
    Ok((eps.ln() / rate).ceil().max(0.0) as u64)
}

pub fn check_unit_inputs(inputs: &[Dyadic]) -> Result<(), ConfigError> {
    if inputs.is_empty() {
        return Err(ConfigError::new("at least one node is needed"));
    }
    let (zero, one) = (Dyadic::zero(), Dyadic::one());
    match inputs.iter().find(|x| **x < zero || **x > one) {
        Some(x) => Err(ConfigError::new(format!("input {x} is outside [0, 1]"))),
        None => Ok(()),
    }
}

pub fn run_mac_ac(
    inputs: &[Dyadic],
    eps: f64,
    seed: u64,
    opts: MacOptions,
    adversary: &mut dyn Adversary,
) -> Result<Trace<ApproxMsg>, ConfigError> {
    check_unit_inputs(inputs)?;
    let p_end = mac_ac_phases(eps)?;
    let nodes = inputs.iter().map(|x| MacAc::new(x.clone(), p_end)).collect();
    Ok(MacEngine::new(nodes, seed, opts).run(adversary))
}

pub fn run_mac_ac2(
    inputs: &[Dyadic],
    eps: f64,
    n_upper: u32,
    seed: u64,
    opts: MacOptions,
    adversary: &mut dyn Adversary,
) -> Result<Trace<ApproxMsg>, ConfigError> {
    check_unit_inputs(inputs)?;
    if (n_upper as usize) < inputs.len() {
        log::warn!("n_upper {n_upper} is below n = {}; convergence is not guaranteed", inputs.len());
    }
    let p_end = mac_ac2_phases(eps, n_upper)?;
    let nodes = inputs.iter().map(|x| MacAc2::new(x.clone(), p_end)).collect();
    Ok(MacEngine::new(nodes, seed, opts).run(adversary))
}

/// `V[p]` with its extremes and the state common to every mover.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub phase: u64,
    /// `(node, v_node[p], how the node entered p)`, in recording order.
    pub states: Vec<(NodeId, Dyadic, Entry)>,
    pub min: Dyadic,
    pub max: Dyadic,
    /// Sender and value of the first acknowledged phase-`p` broadcast.
    pub first: Option<(NodeId, Dyadic)>,
}

impl PhaseRow {
    pub fn range(&self) -> Dyadic {
        &self.max - &self.min
    }

    pub fn movers(&self) -> impl Iterator<Item = (NodeId, &Dyadic)> {
        self.entered(Entry::Move)
    }

    pub fn jumpers(&self) -> impl Iterator<Item = (NodeId, &Dyadic)> {
        self.entered(Entry::Jump)
    }

    fn entered(&self, via: Entry) -> impl Iterator<Item = (NodeId, &Dyadic)> {
        self.states.iter().filter(move |s| s.2 == via).map(|(j, v, _)| (*j, v))
    }
}

/// Phase rows of an approximate-consensus trace, for every phase with a
/// non-empty `V[p]`.
pub fn phase_ranges<M: StateMsg>(trace: &Trace<M>) -> Vec<PhaseRow> {
    let mut states: BTreeMap<u64, Vec<(NodeId, Dyadic, Entry)>> = BTreeMap::new();
    for r in &trace.notes {
        if let Note::PhaseStart { phase, value, via } = &r.note {
            states.entry(*phase).or_default().push((r.node, value.clone(), *via));
        }
    }
    let mut first: BTreeMap<u64, (NodeId, Dyadic)> = BTreeMap::new();
    let mut acks: Vec<_> = trace.broadcasts.iter().filter_map(|b| Some((b.acked_at?, b))).collect();
    acks.sort_by_key(|(t, _)| *t);
    for (_, b) in acks {
        if let Some((v, p)) = b.payload.state() {
            first.entry(p).or_insert_with(|| (b.sender, v.clone()));
        }
    }
    states
        .into_iter()
        .map(|(phase, states)| {
            let (min, max) = range_of(states.iter().map(|s| &s.1)).expect("non-empty");
            PhaseRow { phase, min, max, first: first.remove(&phase), states }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PhaseViolation {
    #[error("phase {phase}: range exceeds the bound")]
    Range { phase: u64 },
    #[error("phase {phase}: mover {node} is outside the lemma interval")]
    Mover { phase: u64, node: NodeId },
    #[error("phase {phase}: jumper {node} copies no mover's state")]
    Provenance { phase: u64, node: NodeId },
    #[error("phase {phase}: no broadcast of phase {prev} was acknowledged")]
    NoCommonValue { phase: u64, prev: u64 },
}

/// `range(V[p]) * 2^p <= range(V[0])` for every phase.
pub fn check_halving(rows: &[PhaseRow]) -> Result<(), PhaseViolation> {
    let Some(base) = rows.first().map(PhaseRow::range) else { return Ok(()) };
    for row in rows {
        let scaled = &row.range() * &Dyadic::new(num_bigint::BigInt::from(1) << row.phase, 0);
        if scaled > base {
            return Err(PhaseViolation::Range { phase: row.phase });
        }
    }
    Ok(())
}

/// `range(V[p]) <= range(V[0]) (1 - 2^-n)^p` for every phase.
pub fn check_contraction(rows: &[PhaseRow], n: u32) -> Result<(), PhaseViolation> {
    let Some(base) = rows.first().map(PhaseRow::range) else { return Ok(()) };
    for row in rows {
        if row.range() > &base * &contraction_factor(n, row.phase as u32) {
            return Err(PhaseViolation::Range { phase: row.phase });
        }
    }
    Ok(())
}

fn check_movers<F>(rows: &[PhaseRow], interval: F) -> Result<(), PhaseViolation>
where
    F: Fn(&PhaseRow, &Dyadic) -> (Dyadic, Dyadic),
{
    for pair in rows.windows(2) {
        let (prev, row) = (&pair[0], &pair[1]);
        if row.movers().next().is_none() {
            continue;
        }
        let Some((ip, common)) = &prev.first else {
            return Err(PhaseViolation::NoCommonValue { phase: row.phase, prev: prev.phase });
        };
        let (lo, hi) = interval(prev, common);
        if let Some((node, _)) = row.movers().find(|(j, v)| j != ip && (*v < &lo || *v > &hi)) {
            return Err(PhaseViolation::Mover { phase: row.phase, node });
        }
    }
    Ok(())
}

/// Every mover other than `i_p` lands in `[(min_p + c)/2, (max_p + c)/2]`,
/// where `c` is the first acknowledged phase-`p` state.
pub fn check_mover_interval(rows: &[PhaseRow]) -> Result<(), PhaseViolation> {
    check_movers(rows, |prev, c| (Dyadic::midpoint(&prev.min, c), Dyadic::midpoint(&prev.max, c)))
}

/// Every mover other than `i_p` lands in
/// `[min_p + (c - min_p)/2^n, max_p - (max_p - c)/2^n]`.
pub fn check_mover_envelope(rows: &[PhaseRow], n: u32) -> Result<(), PhaseViolation> {
    let w = Dyadic::pow2_neg(n);
    check_movers(rows, |prev, c| {
        (&prev.min + &(&(c - &prev.min) * &w), &prev.max - &(&(&prev.max - c) * &w))
    })
}

/// Every jumper's phase state equals some mover's state in the same phase.
pub fn check_jump_provenance(rows: &[PhaseRow]) -> Result<(), PhaseViolation> {
    for row in rows {
        if let Some((node, _)) = row.jumpers().find(|(_, v)| !row.movers().any(|(_, m)| m == *v)) {
            return Err(PhaseViolation::Provenance { phase: row.phase, node });
        }
    }
    Ok(())
}

/// Outputs of all nodes that produced one, by node.
pub fn outputs<M: Message>(trace: &Trace<M>) -> Vec<(NodeId, Dyadic)> {
    trace
        .outputs
        .iter()
        .enumerate()
        .filter_map(|(i, d)| Some((i, d.as_ref()?.dyadic()?.clone())))
        .collect()
}
