use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Bid, Decision, Message, NodeId, Note};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Deliver,
    Ack,
    Crash,
    Segment,
    Tick,
    Drop,
}

/// One applied event. `bid` names the broadcast (MAC) or datagram (lossy).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: u64,
    pub kind: EventKind,
    pub node: NodeId,
    pub bid: Option<Bid>,
    pub phase: Option<u64>,
    /// Lossy transport only: the round the event happened in.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub round: Option<u64>,
    /// Lossy transport only: a drop the fairness rule turned into a delivery.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteRecord {
    pub time: u64,
    pub node: NodeId,
    /// The broadcast issued by the segment that produced the note, if any.
    pub bid: Option<Bid>,
    pub note: Note,
}

#[derive(Debug, Clone)]
pub struct BroadcastInfo<M> {
    pub bid: Bid,
    pub sender: NodeId,
    pub seq: u64,
    /// Set for point-to-point lossy datagrams.
    pub to: Option<NodeId>,
    pub time: u64,
    pub payload: M,
    /// Engine time of the acknowledgement.
    pub acked_at: Option<u64>,
}

impl<M> BroadcastInfo<M> {
    pub fn acked(&self) -> bool {
        self.acked_at.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunVerdict {
    /// Every live (honest) node produced an output.
    Completed,
    /// The event budget ran out first.
    Timeout,
    /// Nothing was enabled although some live node had not finished.
    Stalled,
}

/// Everything a run produced. Checkers read only this.
#[derive(Debug, Clone)]
pub struct Trace<M> {
    pub n: usize,
    pub seed: u64,
    /// Empty when event recording was disabled.
    pub events: Vec<TraceEvent>,
    pub notes: Vec<NoteRecord>,
    pub broadcasts: Vec<BroadcastInfo<M>>,
    pub outputs: Vec<Option<Decision>>,
    pub crashed: Vec<bool>,
    pub byzantine: Vec<bool>,
    pub verdict: RunVerdict,
    pub events_applied: u64,
    pub forced_deliveries: u64,
}

/// Line format of an exported trace. Events and notes share one stream,
/// ordered by time with events first at equal times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceLine {
    Header { n: usize, seed: u64, verdict: RunVerdict, crashed: Vec<NodeId>, byzantine: Vec<NodeId> },
    Event {
        #[serde(flatten)]
        event: TraceEvent,
        payload: Option<serde_json::Value>,
    },
    Note(NoteRecord),
}

impl<M: Message> Trace<M> {
    pub fn new(n: usize, seed: u64) -> Self {
        Trace {
            n,
            seed,
            events: Vec::new(),
            notes: Vec::new(),
            broadcasts: Vec::new(),
            outputs: vec![None; n],
            crashed: vec![false; n],
            byzantine: vec![false; n],
            verdict: RunVerdict::Completed,
            events_applied: 0,
            forced_deliveries: 0,
        }
    }

    pub fn broadcast(&self, bid: Bid) -> &BroadcastInfo<M> {
        &self.broadcasts[bid as usize]
    }

    /// Nodes that neither crashed nor are Byzantine.
    pub fn correct_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n).filter(|&i| !self.crashed[i] && !self.byzantine[i])
    }

    /// Notes of one node, in order.
    pub fn notes_of(&self, node: NodeId) -> impl Iterator<Item = &NoteRecord> + '_ {
        self.notes.iter().filter(move |r| r.node == node)
    }

    pub fn to_lines(&self) -> Vec<TraceLine> {
        let mut lines = vec![TraceLine::Header {
            n: self.n,
            seed: self.seed,
            verdict: self.verdict,
            crashed: (0..self.n).filter(|&i| self.crashed[i]).collect(),
            byzantine: (0..self.n).filter(|&i| self.byzantine[i]).collect(),
        }];
        let mut notes = self.notes.iter().peekable();
        for ev in &self.events {
            while let Some(note) = notes.next_if(|r| r.time < ev.time) {
                lines.push(TraceLine::Note(note.clone()));
            }
            let payload = ev
                .bid
                .filter(|_| matches!(ev.kind, EventKind::Deliver | EventKind::Segment))
                .map(|b| serde_json::to_value(&self.broadcast(b).payload).expect("payload serializes"));
            lines.push(TraceLine::Event { event: ev.clone(), payload });
        }
        lines.extend(notes.cloned().map(TraceLine::Note));
        lines
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for line in self.to_lines() {
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

/// Reads a trace export back as raw lines.
pub fn read_jsonl<R: BufRead>(r: R) -> io::Result<Vec<TraceLine>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
