//! The abstract MAC layer engine.
//!
//! A broadcast is delivered to every node alive at submission (the sender
//! included) and acknowledged to the sender once all still-live receivers
//! have it. If the sender crashes first, the acknowledgement never fires and
//! the adversary decides which pending receivers still get the message.
//! Deliveries run the receiver's handler at once unless its main thread holds
//! the lock; queued messages are drained as soon as the lock is released,
//! and a node with queued messages cannot run a segment.

use std::collections::{BTreeMap, VecDeque};
use std::hash::{Hash, Hasher};

use indexmap::IndexSet;

use super::adversary::{Adversary, Choice, SchedView};
use super::rng::NodeRng;
use super::trace::{BroadcastInfo, EventKind, NoteRecord, RunVerdict, Trace, TraceEvent};
use super::{Automaton, Bid, Ctx, Message, NodeId, Note, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Segment(NodeId),
    Deliver(Bid, NodeId),
    Ack(Bid),
}

/// Misuse of the engine by the caller; never caused by a protocol.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineFault {
    #[error("event {0:?} is not enabled")]
    NotEnabled(Event),
    #[error("node {0} has crashed")]
    Crashed(NodeId),
    #[error("node {0} is not at a broadcast point")]
    NotAtBroadcastPoint(NodeId),
    #[error("node {0} may not be crashed now")]
    CrashNotAllowed(NodeId),
}

#[derive(Debug, Clone)]
pub struct MacOptions {
    pub event_budget: u64,
    /// Upper bound on crashes; at least one node always survives.
    pub max_crashes: usize,
    /// Keep the per-event log. Notes and the broadcast table are always kept.
    pub record_events: bool,
}

impl Default for MacOptions {
    fn default() -> Self {
        MacOptions { event_budget: 1_000_000, max_crashes: 0, record_events: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Status {
    Ready,
    Waiting(Bid),
    Done,
}

#[derive(Clone)]
struct Slot<A> {
    automaton: A,
    status: Status,
    alive: bool,
    queue: VecDeque<Bid>,
    rng: NodeRng,
    seq: u64,
}

#[derive(Clone)]
pub struct MacEngine<A: Automaton> {
    nodes: Vec<Slot<A>>,
    enabled: IndexSet<Event>,
    /// Receivers still owed each unacknowledged broadcast.
    inflight: BTreeMap<Bid, Vec<NodeId>>,
    origin: Vec<(NodeId, u64)>,
    crashable: Vec<NodeId>,
    crashes: usize,
    unfinished: usize,
    time: u64,
    opts: MacOptions,
    trace: Trace<A::Msg>,
    notes: Vec<Note>,
}

impl<A: Automaton> MacEngine<A> {
    pub fn new(automata: Vec<A>, seed: u64, opts: MacOptions) -> Self {
        let n = automata.len();
        assert!(n > 0, "a run needs at least one node");
        let nodes = automata
            .into_iter()
            .enumerate()
            .map(|(i, automaton)| Slot {
                automaton,
                status: Status::Ready,
                alive: true,
                queue: VecDeque::new(),
                rng: NodeRng::for_node(seed, i),
                seq: 0,
            })
            .collect();
        let mut engine = MacEngine {
            nodes,
            enabled: (0..n).map(Event::Segment).collect(),
            inflight: BTreeMap::new(),
            origin: Vec::new(),
            crashable: Vec::new(),
            crashes: 0,
            unfinished: n,
            time: 0,
            opts,
            trace: Trace::new(n, seed),
            notes: Vec::new(),
        };
        engine.refresh_crashable();
        engine
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn automaton(&self, node: NodeId) -> &A {
        &self.nodes[node].automaton
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        self.nodes[node].alive
    }

    pub fn queue_len(&self, node: NodeId) -> usize {
        self.nodes[node].queue.len()
    }

    pub fn trace(&self) -> &Trace<A::Msg> {
        &self.trace
    }

    pub fn into_trace(self) -> Trace<A::Msg> {
        self.trace
    }

    /// Enabled events in the engine's deterministic order.
    pub fn enabled_events(&self) -> &IndexSet<Event> {
        &self.enabled
    }

    pub fn is_enabled(&self, event: Event) -> bool {
        self.enabled.contains(&event)
    }

    pub fn crashable(&self) -> &[NodeId] {
        &self.crashable
    }

    /// Every live node has returned.
    pub fn is_finished(&self) -> bool {
        self.unfinished == 0
    }

    pub fn view(&self) -> SchedView<'_> {
        SchedView { enabled: &self.enabled, origin: &self.origin, crashable: &self.crashable, time: self.time }
    }

    /// Unacknowledged broadcasts of `node` with receivers other than `node`
    /// still pending: exactly the deliveries a crash of `node` puts up for
    /// the adversary's choice.
    pub fn crash_pending(&self, node: NodeId) -> Vec<(Bid, Vec<NodeId>)> {
        self.inflight
            .iter()
            .filter(|(&bid, _)| self.origin[bid as usize].0 == node)
            .map(|(&bid, pending)| (bid, pending.iter().copied().filter(|&r| r != node).collect::<Vec<_>>()))
            .filter(|(_, pending)| !pending.is_empty())
            .collect()
    }

    /// Creates the broadcast record and enables its deliveries.
    pub fn submit_broadcast(&mut self, node: NodeId, payload: A::Msg) -> Result<Bid, EngineFault> {
        let slot = &self.nodes[node];
        if !slot.alive {
            return Err(EngineFault::Crashed(node));
        }
        if slot.status != Status::Ready {
            return Err(EngineFault::NotAtBroadcastPoint(node));
        }
        let bid = self.origin.len() as Bid;
        let seq = slot.seq;
        self.nodes[node].seq += 1;
        self.origin.push((node, seq));
        let receivers: Vec<NodeId> = (0..self.n()).filter(|&j| self.nodes[j].alive).collect();
        for &j in &receivers {
            self.enabled.insert(Event::Deliver(bid, j));
        }
        self.inflight.insert(bid, receivers);
        self.trace.broadcasts.push(BroadcastInfo {
            bid,
            sender: node,
            seq,
            to: None,
            time: self.time,
            payload,
            acked_at: None,
        });
        self.nodes[node].status = Status::Waiting(bid);
        self.enabled.swap_remove(&Event::Segment(node));
        Ok(bid)
    }

    pub fn apply(&mut self, event: Event) -> Result<(), EngineFault> {
        if !self.enabled.swap_remove(&event) {
            return Err(EngineFault::NotEnabled(event));
        }
        match event {
            Event::Deliver(bid, to) => self.apply_deliver(bid, to),
            Event::Ack(bid) => self.apply_ack(bid),
            Event::Segment(node) => self.apply_segment(node),
        }
        self.time += 1;
        self.trace.events_applied += 1;
        Ok(())
    }

    /// Crashes `node`; `keep(bid, receiver)` decides which receivers still
    /// owed one of its unacknowledged broadcasts get it.
    pub fn crash_with(&mut self, node: NodeId, mut keep: impl FnMut(Bid, NodeId) -> bool) -> Result<(), EngineFault> {
        if !self.crashable.contains(&node) {
            return Err(EngineFault::CrashNotAllowed(node));
        }
        let slot = &mut self.nodes[node];
        slot.alive = false;
        slot.queue.clear();
        if slot.status != Status::Done {
            self.unfinished -= 1;
        }
        self.crashes += 1;
        self.trace.crashed[node] = true;
        self.enabled.swap_remove(&Event::Segment(node));

        let mut finished = Vec::new();
        for (&bid, pending) in self.inflight.iter_mut() {
            if let Some(pos) = pending.iter().position(|&r| r == node) {
                pending.remove(pos);
                self.enabled.swap_remove(&Event::Deliver(bid, node));
            }
            let sender = self.origin[bid as usize].0;
            if sender == node {
                pending.retain(|&r| {
                    let kept = keep(bid, r);
                    if !kept {
                        self.enabled.swap_remove(&Event::Deliver(bid, r));
                    }
                    kept
                });
                self.enabled.swap_remove(&Event::Ack(bid));
                if pending.is_empty() {
                    finished.push(bid);
                }
            } else if pending.is_empty() && self.nodes[sender].alive {
                self.enabled.insert(Event::Ack(bid));
            }
        }
        for bid in finished {
            self.inflight.remove(&bid);
        }
        self.record(EventKind::Crash, node, None, None);
        self.refresh_crashable();
        self.time += 1;
        self.trace.events_applied += 1;
        Ok(())
    }

    /// Applies one adversary choice.
    pub fn step_with<Adv: Adversary + ?Sized>(&mut self, adversary: &mut Adv) -> Result<(), EngineFault> {
        match adversary.choose(&self.view()) {
            Choice::Event(i) => {
                let event = *self.enabled.get_index(i).ok_or(EngineFault::NotEnabled(Event::Segment(usize::MAX)))?;
                self.apply(event)
            }
            Choice::Crash(node) => {
                let origin = &self.origin;
                let mut keep = |bid: Bid, r: NodeId| {
                    let (sender, seq) = origin[bid as usize];
                    adversary.keep_delivery(sender, seq, r)
                };
                // `crash_with` borrows self mutably; resolve the subset first.
                let decisions: Vec<(Bid, NodeId, bool)> = self
                    .crash_pending(node)
                    .into_iter()
                    .flat_map(|(bid, rs)| rs.into_iter().map(move |r| (bid, r)))
                    .map(|(bid, r)| (bid, r, keep(bid, r)))
                    .collect();
                self.crash_with(node, |bid, r| decisions.iter().any(|&(b, x, k)| b == bid && x == r && k))
            }
        }
    }

    /// Runs to completion, budget exhaustion, or a stall.
    pub fn run<Adv: Adversary + ?Sized>(mut self, adversary: &mut Adv) -> Trace<A::Msg> {
        self.run_in_place(adversary);
        self.trace
    }

    pub fn run_in_place<Adv: Adversary + ?Sized>(&mut self, adversary: &mut Adv) {
        loop {
            if self.is_finished() {
                self.trace.verdict = RunVerdict::Completed;
                return;
            }
            if self.trace.events_applied >= self.opts.event_budget {
                self.trace.verdict = RunVerdict::Timeout;
                return;
            }
            if self.enabled.is_empty() {
                self.trace.verdict = RunVerdict::Stalled;
                return;
            }
            self.step_with(adversary).expect("adversary picked from the enabled set");
        }
    }

    fn apply_deliver(&mut self, bid: Bid, to: NodeId) {
        let pending = self.inflight.get_mut(&bid).expect("delivery of an in-flight broadcast");
        let pos = pending.iter().position(|&r| r == to).expect("receiver is pending");
        pending.swap_remove(pos);
        let done = pending.is_empty();
        let slot = &mut self.nodes[to];
        if slot.automaton.locked() || !slot.queue.is_empty() {
            slot.queue.push_back(bid);
        } else {
            self.handle(to, bid);
        }
        let payload_phase = self.trace.broadcasts[bid as usize].payload.phase();
        self.record(EventKind::Deliver, to, Some(bid), payload_phase);
        self.flush_notes(to, None);
        self.refresh_segment(to);
        if done {
            let sender = self.origin[bid as usize].0;
            if self.nodes[sender].alive {
                self.enabled.insert(Event::Ack(bid));
            } else {
                self.inflight.remove(&bid);
            }
        }
    }

    fn apply_ack(&mut self, bid: Bid) {
        let sender = self.origin[bid as usize].0;
        debug_assert_eq!(self.nodes[sender].status, Status::Waiting(bid));
        self.inflight.remove(&bid);
        self.trace.broadcasts[bid as usize].acked_at = Some(self.time);
        self.nodes[sender].status = Status::Ready;
        let phase = self.trace.broadcasts[bid as usize].payload.phase();
        self.record(EventKind::Ack, sender, Some(bid), phase);
        self.refresh_segment(sender);
    }

    fn apply_segment(&mut self, node: NodeId) {
        let slot = &mut self.nodes[node];
        debug_assert!(slot.queue.is_empty() || slot.automaton.locked());
        let step = {
            let mut ctx = Ctx::new(&mut slot.rng, &mut self.notes);
            slot.automaton.step(&mut ctx)
        };
        let mut bid = None;
        let mut phase = None;
        match step {
            Step::Broadcast(msg) => {
                phase = msg.phase();
                bid = Some(self.submit_broadcast(node, msg).expect("segment runs at a broadcast point"));
            }
            Step::Yield => {}
            Step::Output(decision) => {
                slot.status = Status::Done;
                self.unfinished -= 1;
                self.trace.outputs[node] = Some(decision);
            }
        }
        self.record(EventKind::Segment, node, bid, phase);
        self.flush_notes(node, bid);
        while !self.nodes[node].automaton.locked() {
            let Some(queued) = self.nodes[node].queue.pop_front() else { break };
            self.handle(node, queued);
            self.flush_notes(node, None);
        }
        self.refresh_segment(node);
    }

    /// Hashes everything that determines future behaviour and outputs,
    /// naming broadcasts by (sender, seq) so equal states reached along
    /// different paths collide.
    pub(crate) fn hash_state<H: Hasher>(&self, h: &mut H)
    where
        A: Hash,
    {
        for slot in &self.nodes {
            slot.automaton.hash(h);
            slot.alive.hash(h);
            slot.seq.hash(h);
            slot.rng.position().hash(h);
            match slot.status {
                Status::Waiting(bid) => (1u8, self.origin[bid as usize]).hash(h),
                other => (0u8, other == Status::Done).hash(h),
            }
            for &bid in &slot.queue {
                self.origin[bid as usize].hash(h);
                self.payload_key(bid).hash(h);
            }
        }
        let mut inflight: Vec<_> = self
            .inflight
            .iter()
            .map(|(&bid, pending)| {
                let mut p = pending.clone();
                p.sort_unstable();
                (self.origin[bid as usize], p, self.payload_key(bid))
            })
            .collect();
        inflight.sort();
        inflight.hash(h);
        self.crashes.hash(h);
        self.trace.outputs.hash(h);
    }

    fn payload_key(&self, bid: Bid) -> String {
        serde_json::to_string(&self.trace.broadcasts[bid as usize].payload).expect("payload serializes")
    }

    fn handle(&mut self, node: NodeId, bid: Bid) {
        let slot = &mut self.nodes[node];
        let mut ctx = Ctx::new(&mut slot.rng, &mut self.notes);
        slot.automaton.on_message(&self.trace.broadcasts[bid as usize].payload, &mut ctx);
    }

    fn refresh_segment(&mut self, node: NodeId) {
        let slot = &self.nodes[node];
        let ready = slot.alive && slot.status == Status::Ready && (slot.queue.is_empty() || slot.automaton.locked());
        if ready {
            self.enabled.insert(Event::Segment(node));
        } else {
            self.enabled.swap_remove(&Event::Segment(node));
        }
    }

    fn refresh_crashable(&mut self) {
        let alive: Vec<NodeId> = (0..self.n()).filter(|&i| self.nodes[i].alive).collect();
        self.crashable = if self.crashes < self.opts.max_crashes && alive.len() > 1 { alive } else { Vec::new() };
    }

    fn record(&mut self, kind: EventKind, node: NodeId, bid: Option<Bid>, phase: Option<u64>) {
        if self.opts.record_events {
            self.trace.events.push(TraceEvent { time: self.time, kind, node, bid, phase, round: None, forced: false });
        }
    }

    fn flush_notes(&mut self, node: NodeId, bid: Option<Bid>) {
        let time = self.time;
        self.trace.notes.extend(self.notes.drain(..).map(|note| NoteRecord { time, node, bid, note }));
    }
}
