//! Verdict predicates over traces and outputs, shared by tests, the
//! experiment harness and the CLI. All comparisons are exact.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use serde::Serialize;

use crate::approximate::{PhaseViolation, StateMsg};
use crate::dyadic::Dyadic;
use crate::sim::{BroadcastInfo, Decision, EventKind, Message, NodeId, Note, Trace, TraceLine};

/// Where a failure shows up: trace event times, the nodes involved, and a
/// one-line description.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Witness {
    pub events: Vec<u64>,
    pub nodes: Vec<NodeId>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub property: String,
    pub passed: bool,
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn pass(property: impl Into<String>) -> Self {
        Verdict { property: property.into(), passed: true, witness: None }
    }

    pub fn fail(property: impl Into<String>, witness: Witness) -> Self {
        Verdict { property: property.into(), passed: false, witness: Some(witness) }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.witness {
            None => write!(f, "PASS {}", self.property),
            Some(w) => write!(f, "FAIL {}: {} (nodes {:?}, events {:?})", self.property, w.detail, w.nodes, w.events),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputValue {
    Bit(u8),
    Value(Dyadic),
}

/// A value tagged with the node and trace time it was recorded at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamped<T> {
    pub node: NodeId,
    pub time: u64,
    pub value: T,
}

/// Inputs and outputs of the non-Byzantine nodes of a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Observed {
    pub inputs: Vec<Stamped<InputValue>>,
    pub outputs: Vec<Stamped<Decision>>,
}

impl Observed {
    pub fn from_trace<M>(trace: &Trace<M>) -> Self {
        let mut obs = Observed::default();
        for r in trace.notes.iter().filter(|r| !trace.byzantine[r.node]) {
            let (node, time) = (r.node, r.time);
            match &r.note {
                Note::BinaryInput { value } => obs.inputs.push(Stamped { node, time, value: InputValue::Bit(*value) }),
                Note::Input { value } => obs.inputs.push(Stamped { node, time, value: InputValue::Value(value.clone()) }),
                Note::Output { decision, .. } => obs.outputs.push(Stamped { node, time, value: decision.clone() }),
                _ => {}
            }
        }
        obs
    }

    fn dyadic_outputs(&self) -> impl Iterator<Item = (&Stamped<Decision>, &Dyadic)> {
        self.outputs.iter().filter_map(|o| Some((o, o.value.dyadic()?)))
    }
}

/// Binary runs: every output is some input. Approximate runs: every output
/// lies in the input range.
pub fn check_validity(obs: &Observed) -> Verdict {
    const P: &str = "validity";
    let bits: Vec<&Stamped<InputValue>> = obs.inputs.iter().filter(|i| matches!(i.value, InputValue::Bit(_))).collect();
    if !bits.is_empty() {
        for o in &obs.outputs {
            let Some(b) = o.value.bit() else { continue };
            if !bits.iter().any(|i| i.value == InputValue::Bit(b)) {
                return Verdict::fail(
                    P,
                    Witness { events: vec![o.time], nodes: vec![o.node], detail: format!("output {b} is no node's input") },
                );
            }
        }
        return Verdict::pass(P);
    }
    let values: Vec<(&Stamped<InputValue>, &Dyadic)> = obs
        .inputs
        .iter()
        .filter_map(|i| match &i.value {
            InputValue::Value(v) => Some((i, v)),
            InputValue::Bit(_) => None,
        })
        .collect();
    let (Some(lo), Some(hi)) = (values.iter().min_by(|a, b| a.1.cmp(b.1)), values.iter().max_by(|a, b| a.1.cmp(b.1))) else {
        return Verdict::pass(P);
    };
    for (o, v) in obs.dyadic_outputs() {
        let bound = if v < lo.1 {
            lo
        } else if v > hi.1 {
            hi
        } else {
            continue;
        };
        return Verdict::fail(
            P,
            Witness {
                events: vec![bound.0.time, o.time],
                nodes: vec![bound.0.node, o.node],
                detail: format!("output {v} lies outside the input range [{}, {}]", lo.1, hi.1),
            },
        );
    }
    Verdict::pass(P)
}

/// `max output - min output <= eps`.
pub fn check_epsilon_agreement(obs: &Observed, eps: &BigRational) -> Verdict {
    const P: &str = "epsilon-agreement";
    let lo = obs.dyadic_outputs().min_by(|a, b| a.1.cmp(b.1));
    let hi = obs.dyadic_outputs().max_by(|a, b| a.1.cmp(b.1));
    let (Some((lo_o, lo)), Some((hi_o, hi))) = (lo, hi) else { return Verdict::pass(P) };
    let spread = hi - lo;
    if spread.to_rational() <= *eps {
        return Verdict::pass(P);
    }
    Verdict::fail(
        P,
        Witness {
            events: vec![lo_o.time, hi_o.time],
            nodes: vec![lo_o.node, hi_o.node],
            detail: format!("outputs {lo} and {hi} are {spread} apart, more than {eps}"),
        },
    )
}

/// All binary outputs are equal.
pub fn check_agreement(obs: &Observed) -> Verdict {
    const P: &str = "agreement";
    let mut bits = obs.outputs.iter().filter_map(|o| Some((o, o.value.bit()?)));
    let Some((first, b)) = bits.next() else { return Verdict::pass(P) };
    match bits.find(|(_, c)| *c != b) {
        None => Verdict::pass(P),
        Some((other, c)) => Verdict::fail(
            P,
            Witness {
                events: vec![first.time, other.time],
                nodes: vec![first.node, other.node],
                detail: format!("outputs {b} and {c} differ"),
            },
        ),
    }
}

/// If some node commits to `v`, every adopt-commit output carries `v`.
pub fn check_coherence(obs: &Observed) -> Verdict {
    const P: &str = "coherence";
    let outs: Vec<(&Stamped<Decision>, bool, u8)> = obs
        .outputs
        .iter()
        .filter_map(|o| match o.value {
            Decision::AdoptCommit { commit, value } => Some((o, commit, value)),
            _ => None,
        })
        .collect();
    for (c, _, v) in outs.iter().filter(|x| x.1) {
        if let Some((o, commit, w)) = outs.iter().find(|x| x.2 != *v) {
            let kind = if *commit { "commit" } else { "adopt" };
            return Verdict::fail(
                P,
                Witness {
                    events: vec![c.time, o.time],
                    nodes: vec![c.node, o.node],
                    detail: format!("(commit, {v}) next to ({kind}, {w})"),
                },
            );
        }
    }
    Verdict::pass(P)
}

/// Wraps a phase-table check, pointing the witness at the offending phase
/// state in `trace`.
pub fn phase_verdict<M>(property: &str, trace: &Trace<M>, result: Result<(), PhaseViolation>) -> Verdict {
    let Err(violation) = result else { return Verdict::pass(property) };
    let (phase, node) = match violation {
        PhaseViolation::Mover { phase, node } | PhaseViolation::Provenance { phase, node } => (phase, Some(node)),
        PhaseViolation::Range { phase } | PhaseViolation::NoCommonValue { phase, .. } => (phase, None),
    };
    let events = trace
        .notes
        .iter()
        .filter(|r| node.is_none_or(|n| n == r.node))
        .filter(|r| matches!(r.note, Note::PhaseStart { phase: p, .. } if p == phase))
        .map(|r| r.time)
        .collect();
    Verdict::fail(property, Witness { events, nodes: node.into_iter().collect(), detail: violation.to_string() })
}

/// Payload of a trace read back from JSONL: the raw JSON plus the
/// approximate-consensus state when the payload carries one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LoadedMsg {
    pub raw: serde_json::Value,
    #[serde(skip)]
    state: Option<(Dyadic, u64)>,
}

impl LoadedMsg {
    pub fn new(raw: serde_json::Value) -> Self {
        let field = |a: &str, b: &str| raw.get(a).or_else(|| raw.get(b)).cloned();
        let state = match (field("v", "value"), field("p", "phase")) {
            (Some(serde_json::Value::String(v)), Some(p)) => v.parse().ok().zip(p.as_u64()),
            _ => None,
        };
        LoadedMsg { raw, state }
    }
}

impl Message for LoadedMsg {
    fn phase(&self) -> Option<u64> {
        self.state.as_ref().map(|s| s.1).or_else(|| self.raw.get("p").or_else(|| self.raw.get("phase"))?.as_u64())
    }
}

impl StateMsg for LoadedMsg {
    fn state(&self) -> Option<(&Dyadic, u64)> {
        self.state.as_ref().map(|(v, p)| (v, *p))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("trace has no header line")]
    MissingHeader,
    #[error("node {node} out of range for n = {n}")]
    BadNode { node: NodeId, n: usize },
}

/// Rebuilds a trace from its exported lines. Broadcast payloads come from
/// the segment and delivery records; a broadcast nobody received and whose
/// segment was not exported keeps a null payload.
pub fn load_trace(lines: &[TraceLine]) -> Result<Trace<LoadedMsg>, LoadError> {
    let Some(TraceLine::Header { n, seed, verdict, crashed, byzantine }) = lines.first() else {
        return Err(LoadError::MissingHeader);
    };
    let n = *n;
    let mut trace = Trace::new(n, *seed);
    trace.verdict = *verdict;
    for &i in crashed.iter().chain(byzantine) {
        if i >= n {
            return Err(LoadError::BadNode { node: i, n });
        }
    }
    crashed.iter().for_each(|&i| trace.crashed[i] = true);
    byzantine.iter().for_each(|&i| trace.byzantine[i] = true);
    let mut infos: BTreeMap<u64, BroadcastInfo<LoadedMsg>> = BTreeMap::new();
    for line in &lines[1..] {
        match line {
            TraceLine::Header { .. } => {}
            TraceLine::Note(r) => {
                if r.node >= n {
                    return Err(LoadError::BadNode { node: r.node, n });
                }
                if let Note::Output { decision, .. } = &r.note {
                    trace.outputs[r.node] = Some(decision.clone());
                }
                trace.notes.push(r.clone());
            }
            TraceLine::Event { event, payload } => {
                if event.node >= n {
                    return Err(LoadError::BadNode { node: event.node, n });
                }
                if event.kind == EventKind::Deliver && event.forced {
                    trace.forced_deliveries += 1;
                }
                if let Some(bid) = event.bid {
                    let info = infos.entry(bid).or_insert_with(|| BroadcastInfo {
                        bid,
                        sender: event.node,
                        seq: 0,
                        to: None,
                        time: event.time,
                        payload: LoadedMsg::new(serde_json::Value::Null),
                        acked_at: None,
                    });
                    match event.kind {
                        EventKind::Segment => {
                            info.sender = event.node;
                            info.time = event.time;
                        }
                        EventKind::Deliver if event.round.is_some() => {
                            info.to = Some(event.node);
                            if let Some(from) = payload.as_ref().and_then(|p| p.get("from")).and_then(|f| f.as_u64()) {
                                info.sender = from as NodeId;
                            }
                        }
                        EventKind::Ack => info.acked_at = Some(event.time),
                        _ => {}
                    }
                    if let Some(p) = payload {
                        if info.payload.raw.is_null() {
                            info.payload = LoadedMsg::new(p.clone());
                        }
                    }
                }
                trace.events.push(event.clone());
            }
        }
    }
    let count = infos.keys().next_back().map_or(0, |b| b + 1);
    trace.broadcasts = (0..count)
        .map(|bid| {
            infos.remove(&bid).unwrap_or(BroadcastInfo {
                bid,
                sender: 0,
                seq: 0,
                to: None,
                time: 0,
                payload: LoadedMsg::new(serde_json::Value::Null),
                acked_at: None,
            })
        })
        .collect();
    trace.events_applied = trace.events.len() as u64;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximate::{check_halving, check_mover_interval, phase_ranges, run_mac_ac};
    use crate::sim::{read_jsonl, MacOptions, RandomAdversary};

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    fn inputs(xs: &[&str]) -> Vec<Stamped<InputValue>> {
        xs.iter().enumerate().map(|(i, x)| Stamped { node: i, time: i as u64, value: InputValue::Value(d(x)) }).collect()
    }

    fn outputs(xs: &[&str]) -> Vec<Stamped<Decision>> {
        xs.iter()
            .enumerate()
            .map(|(i, x)| Stamped { node: i, time: 10 + i as u64, value: Decision::Value { value: d(x) } })
            .collect()
    }

    fn ac(xs: &[(bool, u8)]) -> Observed {
        let outputs = xs
            .iter()
            .enumerate()
            .map(|(i, &(commit, value))| Stamped { node: i, time: i as u64, value: Decision::AdoptCommit { commit, value } })
            .collect();
        Observed { inputs: Vec::new(), outputs }
    }

    fn rat(d: Dyadic) -> BigRational {
        d.to_rational()
    }

    #[test]
    fn validity_examples() {
        let ok = Observed { inputs: inputs(&["0", "1"]), outputs: outputs(&["0.5"]) };
        assert!(check_validity(&ok).passed);
        let bad = Observed { inputs: inputs(&["0"]), outputs: outputs(&["1"]) };
        let v = check_validity(&bad);
        assert!(!v.passed);
        assert_eq!(v.witness.unwrap().events, vec![0, 10]);
        let bits = Observed {
            inputs: vec![Stamped { node: 0, time: 0, value: InputValue::Bit(0) }],
            outputs: vec![Stamped { node: 1, time: 4, value: Decision::Bit { value: 1 } }],
        };
        assert!(!check_validity(&bits).passed);
    }

    #[test]
    fn epsilon_agreement_examples() {
        let close = Observed { inputs: Vec::new(), outputs: outputs(&["0.25", "0.2578125"]) };
        assert!(check_epsilon_agreement(&close, &rat(Dyadic::pow2_neg(6))).passed);
        let far = Observed { inputs: Vec::new(), outputs: outputs(&["0", "1"]) };
        assert!(!check_epsilon_agreement(&far, &rat(d("0.5"))).passed);
        let third = BigRational::new(1.into(), 3.into());
        assert!(check_epsilon_agreement(&Observed { inputs: Vec::new(), outputs: outputs(&["0", "0.25"]) }, &third).passed);
    }

    #[test]
    fn coherence_examples() {
        assert!(check_coherence(&ac(&[(true, 1), (false, 1)])).passed);
        assert!(!check_coherence(&ac(&[(true, 1), (false, 0)])).passed);
        assert!(check_coherence(&ac(&[(false, 0), (false, 1)])).passed);
        assert!(!check_agreement(&ac(&[(false, 0), (false, 1)])).passed);
        assert!(check_agreement(&ac(&[(true, 1), (false, 1)])).passed);
    }

    #[test]
    fn exported_trace_checks_like_the_original() {
        let inputs = [d("0"), d("1"), d("0.5"), d("0.125")];
        for seed in 0..10 {
            let opts = MacOptions { max_crashes: 1, ..MacOptions::default() };
            let t = run_mac_ac(&inputs, 0.125, seed, opts, &mut RandomAdversary::new(seed).with_crash_prob(0.01)).unwrap();
            let lines = read_jsonl(t.to_jsonl_string().as_bytes()).unwrap();
            let back = load_trace(&lines).unwrap();
            assert_eq!(back.outputs, t.outputs);
            assert_eq!(back.crashed, t.crashed);
            assert_eq!(phase_ranges(&back), phase_ranges(&t));
            assert!(phase_verdict("halving", &back, check_halving(&phase_ranges(&back))).passed);
            assert!(phase_verdict("mover", &back, check_mover_interval(&phase_ranges(&back))).passed);
            assert_eq!(Observed::from_trace(&back), Observed::from_trace(&t));
        }
    }

    #[test]
    fn exported_store_collect_trace_keeps_its_history() {
        use crate::sim::MacEngine;
        use crate::store_collect::{extract_history, MacSc, ScOp};
        let nodes = (0..3).map(|i| MacSc::new(i, [ScOp::Store(format!("x{i}")), ScOp::Collect])).collect();
        let t = MacEngine::new(nodes, 4, MacOptions::default()).run(&mut RandomAdversary::new(4));
        let back = load_trace(&read_jsonl(t.to_jsonl_string().as_bytes()).unwrap()).unwrap();
        assert_eq!(extract_history(&back), extract_history(&t));
    }
}
