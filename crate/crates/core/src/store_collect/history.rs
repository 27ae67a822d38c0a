use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ScValue, View};
use crate::sim::{Message, NodeId, Note, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Store,
    Collect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Inv,
    Resp,
}

/// One invocation or response edge. `time` is strictly increasing along
/// the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub time: u64,
    pub node: NodeId,
    pub op: OpKind,
    pub edge: Edge,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<ScValue>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub view: Option<View>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("event {index}: time does not increase")]
    TimeOrder { index: usize },
    #[error("event {index}: node {node} invokes while another operation is pending")]
    Overlap { index: usize, node: NodeId },
    #[error("event {index}: response without a matching invocation at node {node}")]
    Unmatched { index: usize, node: NodeId },
    #[error("event {index}: missing value or view")]
    MissingField { index: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `V(j) = ⊥` although a store by `j` precedes the collect.
    MissingStore,
    /// `V(j)` names a value `j` never stored.
    UnknownValue,
    /// `V(j)` comes from a store invoked after the collect returned.
    FutureValue,
    /// A newer store by `j` completed before the collect was invoked.
    StaleValue,
    /// A collect that follows another returned an older view.
    NonMonotone,
}

impl ViolationKind {
    /// Which half of the regularity definition is broken.
    pub fn property(&self) -> &'static str {
        match self {
            ViolationKind::NonMonotone => "II",
            _ => "I",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegularityVerdict {
    Pass,
    /// `witness` holds history indices of the operations involved.
    Violation { kind: ViolationKind, node: NodeId, witness: Vec<usize> },
}

impl RegularityVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, RegularityVerdict::Pass)
    }
}

struct Op {
    node: NodeId,
    kind: OpKind,
    inv: u64,
    inv_index: usize,
    resp: Option<u64>,
    value: Option<ScValue>,
    view: Option<View>,
}

impl Op {
    fn precedes(&self, other: &Op) -> bool {
        self.resp.is_some_and(|r| r < other.inv)
    }
}

/// Pulls the store-collect history out of a trace's notes.
pub fn extract_history<M: Message>(trace: &Trace<M>) -> Vec<HistoryEvent> {
    let mut out = Vec::new();
    for rec in &trace.notes {
        let (op, edge, value, view) = match &rec.note {
            Note::StoreInv { value } => (OpKind::Store, Edge::Inv, Some(value.clone()), None),
            Note::StoreResp { value } => (OpKind::Store, Edge::Resp, Some(value.clone()), None),
            Note::CollectInv => (OpKind::Collect, Edge::Inv, None, None),
            Note::CollectResp { view } => (OpKind::Collect, Edge::Resp, None, Some(view.clone())),
            _ => continue,
        };
        out.push(HistoryEvent { time: out.len() as u64, node: rec.node, op, edge, value, view });
    }
    out
}

pub fn write_history<W: Write>(history: &[HistoryEvent], mut w: W) -> io::Result<()> {
    for ev in history {
        serde_json::to_writer(&mut w, ev)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_history<R: BufRead>(r: R) -> Result<Vec<HistoryEvent>, HistoryError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| HistoryError::Parse { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HistoryError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

fn build_ops(history: &[HistoryEvent]) -> Result<Vec<Op>, HistoryError> {
    let mut ops: Vec<Op> = Vec::new();
    let mut open: std::collections::HashMap<NodeId, usize> = Default::default();
    let mut last_time = None;
    for (index, ev) in history.iter().enumerate() {
        if last_time.is_some_and(|t| ev.time <= t) {
            return Err(HistoryError::TimeOrder { index });
        }
        last_time = Some(ev.time);
        match ev.edge {
            Edge::Inv => {
                if open.contains_key(&ev.node) {
                    return Err(HistoryError::Overlap { index, node: ev.node });
                }
                if ev.op == OpKind::Store && ev.value.is_none() {
                    return Err(HistoryError::MissingField { index });
                }
                open.insert(ev.node, ops.len());
                ops.push(Op {
                    node: ev.node,
                    kind: ev.op,
                    inv: ev.time,
                    inv_index: index,
                    resp: None,
                    value: ev.value.clone(),
                    view: None,
                });
            }
            Edge::Resp => {
                let k = open.remove(&ev.node).ok_or(HistoryError::Unmatched { index, node: ev.node })?;
                let op = &mut ops[k];
                if op.kind != ev.op {
                    return Err(HistoryError::Unmatched { index, node: ev.node });
                }
                if op.kind == OpKind::Collect {
                    op.view = Some(ev.view.clone().ok_or(HistoryError::MissingField { index })?);
                }
                op.resp = Some(ev.time);
            }
        }
    }
    Ok(ops)
}

/// Checks both regularity properties; reports the first violation found.
/// Operations without a response are legal and constrain nothing as
/// collects.
pub fn check_regularity(history: &[HistoryEvent]) -> Result<RegularityVerdict, HistoryError> {
    let ops = build_ops(history)?;
    let stores: Vec<&Op> = ops.iter().filter(|o| o.kind == OpKind::Store).collect();
    let collects: Vec<&Op> = ops.iter().filter(|o| o.kind == OpKind::Collect && o.resp.is_some()).collect();
    let nodes: std::collections::BTreeSet<NodeId> = ops.iter().map(|o| o.node).collect();

    for c in &collects {
        let view = c.view.as_ref().expect("completed collect has a view");
        let mut owners = nodes.clone();
        owners.extend(view.iter().map(|(j, _)| j));
        for &j in &owners {
            let by_j = stores.iter().filter(|s| s.node == j);
            match view.get(j) {
                None => {
                    if let Some(s) = by_j.clone().find(|s| s.precedes(c)) {
                        return Ok(RegularityVerdict::Violation {
                            kind: ViolationKind::MissingStore,
                            node: j,
                            witness: vec![s.inv_index, c.inv_index],
                        });
                    }
                }
                Some(got) => {
                    let Some(s) = by_j.clone().find(|s| s.value.as_ref() == Some(got)) else {
                        return Ok(RegularityVerdict::Violation {
                            kind: ViolationKind::UnknownValue,
                            node: j,
                            witness: vec![c.inv_index],
                        });
                    };
                    if c.precedes(s) {
                        return Ok(RegularityVerdict::Violation {
                            kind: ViolationKind::FutureValue,
                            node: j,
                            witness: vec![s.inv_index, c.inv_index],
                        });
                    }
                    let seq = got.seq;
                    if let Some(newer) = by_j.clone().find(|t| t.value.as_ref().is_some_and(|v| v.seq > seq) && t.precedes(c)) {
                        return Ok(RegularityVerdict::Violation {
                            kind: ViolationKind::StaleValue,
                            node: j,
                            witness: vec![s.inv_index, newer.inv_index, c.inv_index],
                        });
                    }
                }
            }
        }
    }
    for c1 in &collects {
        for c2 in &collects {
            if !c1.precedes(c2) {
                continue;
            }
            let (v1, v2) = (c1.view.as_ref().expect("completed"), c2.view.as_ref().expect("completed"));
            if let Some((j, _)) = v1.iter().find(|(j, v)| v2.get(*j).is_none_or(|w| w.seq < v.seq)) {
                return Ok(RegularityVerdict::Violation {
                    kind: ViolationKind::NonMonotone,
                    node: j,
                    witness: vec![c1.inv_index, c2.inv_index],
                });
            }
        }
    }
    Ok(RegularityVerdict::Pass)
}
