//! Fair-lossy periodic broadcast.
//!
//! Time advances in rounds. A live node ticks once every `t` rounds and
//! sends its current `(id, v, p)` to every other honest node. Within a round
//! the scheduler interleaves ticks and datagram resolutions in random order
//! and resolves each datagram as a delivery, a drop, or a delivery plus a
//! duplicate. A drop is overridden by a forced delivery whenever letting it
//! through is the honest sender's last chance to reach that receiver within
//! `delta` rounds.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rng::{adversary_rng, byzantine_rng, NodeRng};
use super::trace::{BroadcastInfo, EventKind, NoteRecord, RunVerdict, Trace, TraceEvent};
use super::{Bid, Ctx, Decision, Message, NodeId, Note};
use crate::dyadic::Dyadic;

/// The `(id, v, p)` triple carried by every datagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datagram {
    pub from: NodeId,
    pub value: Dyadic,
    pub phase: u64,
}

impl Message for Datagram {
    fn phase(&self) -> Option<u64> {
        Some(self.phase)
    }
}

/// An honest node of a lossy-channel protocol. The receive handler and any
/// phase transition it triggers are one atomic step.
pub trait LossyAutomaton: Clone + Send {
    /// Current `(v, p)`, sent on every tick.
    fn state(&self) -> (Dyadic, u64);

    /// Runs once when the engine is built, before any datagram.
    fn start(&mut self, _ctx: &mut Ctx<'_>) {}

    fn on_datagram(&mut self, msg: &Datagram, ctx: &mut Ctx<'_>);

    /// Set once the node has output; it keeps ticking afterwards.
    fn output(&self) -> Option<Decision>;
}

/// Generator for a Byzantine node's datagrams. `honest[j]` is the current
/// `(v, p)` of node `j` if it is honest and alive; returning `None` means
/// staying silent towards `receiver`.
pub trait ByzantineBehaviour: Send + Sync {
    fn datagram(
        &self,
        rng: &mut ChaCha8Rng,
        receiver: NodeId,
        tick: u64,
        honest: &[Option<(Dyadic, u64)>],
    ) -> Option<(Dyadic, u64)>;
}

pub enum LossyNode<A> {
    Honest(A),
    Byzantine(Box<dyn ByzantineBehaviour>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossPolicy {
    /// Each datagram is dropped with probability `loss`, otherwise delivered
    /// and, with probability `duplicate`, queued again.
    Iid { loss: f64, duplicate: f64 },
    /// Every datagram the fairness rule permits is dropped.
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossyChannelConfig {
    /// Rounds between two ticks of a node.
    pub t: u64,
    /// Every window of `delta` rounds carries a delivery on each honest live pair.
    pub delta: u64,
    pub policy: LossPolicy,
}

impl LossyChannelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.t == 0 {
            return Err("broadcast period t must be at least 1".into());
        }
        if self.delta < self.t {
            return Err(format!("progress bound Delta={} is below the period t={}", self.delta, self.t));
        }
        if let LossPolicy::Iid { loss, duplicate } = self.policy {
            if !(0.0..=1.0).contains(&loss) || !(0.0..1.0).contains(&duplicate) {
                return Err("loss must lie in [0,1] and duplicate in [0,1)".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LossyOptions {
    pub channel: LossyChannelConfig,
    pub event_budget: u64,
    /// Crashes among honest nodes; at least one always survives.
    pub max_crashes: usize,
    pub crash_prob: f64,
    pub record_events: bool,
}

impl LossyOptions {
    pub fn new(channel: LossyChannelConfig) -> Self {
        LossyOptions { channel, event_budget: 1_000_000, max_crashes: 0, crash_prob: 0.0, record_events: true }
    }
}

/// How the scheduler wants a datagram resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Deliver,
    Drop,
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pending {
    Tick(NodeId),
    Datagram(Bid),
}

pub struct LossyEngine<A: LossyAutomaton> {
    honest: Vec<Option<A>>,
    byzantine: Vec<Option<Box<dyn ByzantineBehaviour>>>,
    alive: Vec<bool>,
    rngs: Vec<NodeRng>,
    opts: LossyOptions,
    seed: u64,
    round: u64,
    pending: Vec<Pending>,
    /// Completed rounds since the last delivery on each ordered pair.
    gap: Vec<Vec<u64>>,
    delivered_now: Vec<Vec<bool>>,
    ticks: Vec<u64>,
    crashes: usize,
    scheduler: ChaCha8Rng,
    time: u64,
    trace: Trace<Datagram>,
    notes: Vec<Note>,
}

impl<A: LossyAutomaton> LossyEngine<A> {
    pub fn new(nodes: Vec<LossyNode<A>>, seed: u64, opts: LossyOptions) -> Self {
        let n = nodes.len();
        let mut honest = Vec::with_capacity(n);
        let mut byzantine = Vec::with_capacity(n);
        for node in nodes {
            match node {
                LossyNode::Honest(a) => {
                    honest.push(Some(a));
                    byzantine.push(None);
                }
                LossyNode::Byzantine(b) => {
                    honest.push(None);
                    byzantine.push(Some(b));
                }
            }
        }
        let mut trace = Trace::new(n, seed);
        let mut rngs: Vec<NodeRng> = (0..n).map(|i| NodeRng::for_node(seed, i)).collect();
        for i in 0..n {
            trace.byzantine[i] = byzantine[i].is_some();
            if let Some(a) = honest[i].as_mut() {
                let mut notes = Vec::new();
                a.start(&mut Ctx::new(&mut rngs[i], &mut notes));
                trace.notes.extend(notes.into_iter().map(|note| NoteRecord { time: 0, node: i, bid: None, note }));
                trace.outputs[i] = a.output();
            }
        }
        let mut engine = LossyEngine {
            honest,
            byzantine,
            alive: vec![true; n],
            rngs,
            opts,
            seed,
            round: 0,
            pending: Vec::new(),
            gap: vec![vec![0; n]; n],
            delivered_now: vec![vec![false; n]; n],
            ticks: vec![0; n],
            crashes: 0,
            scheduler: adversary_rng(seed),
            time: 0,
            trace,
            notes: Vec::new(),
        };
        engine.start_round();
        engine
    }

    pub fn n(&self) -> usize {
        self.alive.len()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn node(&self, i: NodeId) -> Option<&A> {
        self.honest[i].as_ref()
    }

    pub fn trace(&self) -> &Trace<Datagram> {
        &self.trace
    }

    pub fn is_finished(&self) -> bool {
        (0..self.n()).all(|i| !self.alive[i] || self.honest[i].is_none() || self.trace.outputs[i].is_some())
    }

    /// Ticks still due and datagrams still unresolved in this round.
    pub fn pending_ticks(&self) -> Vec<NodeId> {
        self.pending.iter().filter_map(|p| if let Pending::Tick(i) = p { Some(*i) } else { None }).collect()
    }

    pub fn pending_datagrams(&self) -> Vec<Bid> {
        self.pending.iter().filter_map(|p| if let Pending::Datagram(b) = p { Some(*b) } else { None }).collect()
    }

    pub fn run(mut self) -> Trace<Datagram> {
        loop {
            if self.is_finished() {
                self.trace.verdict = RunVerdict::Completed;
                break;
            }
            if self.trace.events_applied >= self.opts.event_budget {
                self.trace.verdict = RunVerdict::Timeout;
                break;
            }
            self.step_random();
        }
        self.trace
    }

    /// One scheduler decision: a crash, a tick, or a datagram resolution.
    pub fn step_random(&mut self) {
        if self.opts.crash_prob > 0.0 && self.scheduler.gen_bool(self.opts.crash_prob) {
            let crashable = self.crashable();
            if let Some(&victim) = crashable.choose(&mut self.scheduler) {
                self.crash(victim);
                return;
            }
        }
        let idx = self.scheduler.gen_range(0..self.pending.len());
        match self.pending[idx] {
            Pending::Tick(i) => self.tick(i),
            Pending::Datagram(bid) => {
                let resolution = match self.opts.channel.policy {
                    LossPolicy::Adversarial => Resolution::Drop,
                    LossPolicy::Iid { loss, duplicate } => {
                        if self.scheduler.gen_bool(loss) {
                            Resolution::Drop
                        } else if duplicate > 0.0 && self.scheduler.gen_bool(duplicate) {
                            Resolution::Duplicate
                        } else {
                            Resolution::Deliver
                        }
                    }
                };
                self.resolve(bid, resolution);
            }
        }
    }

    fn crashable(&self) -> Vec<NodeId> {
        let live_honest: Vec<NodeId> = (0..self.n()).filter(|&i| self.alive[i] && self.honest[i].is_some()).collect();
        if self.crashes < self.opts.max_crashes && live_honest.len() > 1 {
            live_honest
        } else {
            Vec::new()
        }
    }

    pub fn crash(&mut self, node: NodeId) {
        assert!(self.alive[node], "node {node} already crashed");
        self.alive[node] = false;
        self.crashes += 1;
        self.trace.crashed[node] = true;
        self.pending.retain(|p| *p != Pending::Tick(node));
        self.record(EventKind::Crash, node, None, None, false);
        self.advance();
    }

    /// `node` sends its current state to every other honest node.
    pub fn tick(&mut self, node: NodeId) {
        let pos = self.pending.iter().position(|p| *p == Pending::Tick(node)).expect("tick is due");
        self.pending.swap_remove(pos);
        let tick = self.ticks[node];
        self.ticks[node] += 1;
        let own = self.honest[node].as_ref().map(|a| a.state());
        let views: Vec<Option<(Dyadic, u64)>> = if own.is_none() {
            (0..self.n()).map(|j| if self.alive[j] { self.honest[j].as_ref().map(|a| a.state()) } else { None }).collect()
        } else {
            Vec::new()
        };
        for j in 0..self.n() {
            if j == node || self.honest[j].is_none() {
                continue;
            }
            let content = match (&own, &self.byzantine[node]) {
                (Some(s), _) => Some(s.clone()),
                (None, Some(b)) => {
                    let mut rng = byzantine_rng(self.seed, node, j, tick);
                    b.datagram(&mut rng, j, tick, &views)
                }
                (None, None) => unreachable!("every node is honest or Byzantine"),
            };
            if let Some((value, phase)) = content {
                let bid = self.trace.broadcasts.len() as Bid;
                self.trace.broadcasts.push(BroadcastInfo {
                    bid,
                    sender: node,
                    seq: tick,
                    to: Some(j),
                    time: self.time,
                    payload: Datagram { from: node, value, phase },
                    acked_at: None,
                });
                self.pending.push(Pending::Datagram(bid));
            }
        }
        let phase = own.map(|s| s.1);
        self.record(EventKind::Tick, node, None, phase, false);
        self.advance();
    }

    /// Resolves one in-flight datagram. Returns true if a drop was turned
    /// into a forced delivery.
    pub fn resolve(&mut self, bid: Bid, wanted: Resolution) -> bool {
        let pos = self.pending.iter().position(|p| *p == Pending::Datagram(bid)).expect("datagram is in flight");
        self.pending.swap_remove(pos);
        let info = &self.trace.broadcasts[bid as usize];
        let (from, to) = (info.sender, info.to.expect("datagrams are addressed"));
        let phase = info.payload.phase;
        if !self.alive[to] {
            self.record(EventKind::Drop, to, Some(bid), Some(phase), false);
            self.advance();
            return false;
        }
        let must_deliver = self.honest[from].is_some()
            && !self.delivered_now[from][to]
            && self.gap[from][to] + self.opts.channel.t >= self.opts.channel.delta;
        let forced = wanted == Resolution::Drop && must_deliver;
        if wanted == Resolution::Drop && !forced {
            self.record(EventKind::Drop, to, Some(bid), Some(phase), false);
            self.advance();
            return false;
        }
        if forced {
            self.trace.forced_deliveries += 1;
            log::trace!("forced delivery {from} -> {to} in round {}", self.round);
        }
        self.delivered_now[from][to] = true;
        let automaton = self.honest[to].as_mut().expect("only honest nodes receive");
        if self.trace.outputs[to].is_none() {
            let mut ctx = Ctx::new(&mut self.rngs[to], &mut self.notes);
            automaton.on_datagram(&self.trace.broadcasts[bid as usize].payload, &mut ctx);
            if let Some(d) = automaton.output() {
                self.trace.outputs[to] = Some(d);
            }
        }
        self.record(EventKind::Deliver, to, Some(bid), Some(phase), forced);
        let time = self.time - 1;
        self.trace.notes.extend(self.notes.drain(..).map(|note| NoteRecord { time, node: to, bid: Some(bid), note }));
        if wanted == Resolution::Duplicate {
            let mut copy = self.trace.broadcasts[bid as usize].clone();
            copy.bid = self.trace.broadcasts.len() as Bid;
            self.pending.push(Pending::Datagram(copy.bid));
            self.trace.broadcasts.push(copy);
        }
        self.advance();
        forced
    }

    fn advance(&mut self) {
        while self.pending.is_empty() && !self.is_finished() {
            self.end_round();
            self.start_round();
        }
    }

    fn end_round(&mut self) {
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                self.gap[i][j] = if self.delivered_now[i][j] { 0 } else { self.gap[i][j] + 1 };
                self.delivered_now[i][j] = false;
            }
        }
        self.round += 1;
    }

    fn start_round(&mut self) {
        let t = self.opts.channel.t;
        for i in 0..self.n() {
            if self.alive[i] && (self.round + i as u64) % t == 0 {
                self.pending.push(Pending::Tick(i));
            }
        }
    }

    fn record(&mut self, kind: EventKind, node: NodeId, bid: Option<Bid>, phase: Option<u64>, forced: bool) {
        if self.opts.record_events {
            self.trace.events.push(TraceEvent { time: self.time, kind, node, bid, phase, round: Some(self.round), forced });
        }
        self.time += 1;
        self.trace.events_applied += 1;
    }
}

/// Checks the progress bound on a recorded lossy trace: between any two
/// rounds `delta` apart, every honest sender reached every honest receiver
/// while both were alive. Returns the first offending `(from, to, round)`.
pub fn check_fairness(trace: &Trace<Datagram>, delta: u64) -> Result<(), (NodeId, NodeId, u64)> {
    let n = trace.n;
    let mut crash_round = vec![u64::MAX; n];
    let mut last_round = 0;
    let mut deliveries = vec![vec![Vec::new(); n]; n];
    for ev in &trace.events {
        let round = ev.round.expect("lossy events carry rounds");
        last_round = last_round.max(round);
        match ev.kind {
            EventKind::Crash => crash_round[ev.node] = round,
            EventKind::Deliver => {
                let from = trace.broadcast(ev.bid.expect("deliveries name a datagram")).sender;
                deliveries[from][ev.node].push(round);
            }
            _ => {}
        }
    }
    for i in (0..n).filter(|&i| !trace.byzantine[i]) {
        for j in (0..n).filter(|&j| j != i && !trace.byzantine[j]) {
            // Only rounds completed with both endpoints alive are constrained;
            // the last round may have been cut short.
            let until = crash_round[i].min(crash_round[j]).min(last_round);
            let mut prev: Option<u64> = None;
            for &r in deliveries[i][j].iter().chain(std::iter::once(&until)) {
                let start = prev.map_or(0, |p| p + 1);
                if r >= start + delta {
                    return Err((i, j, start));
                }
                prev = Some(r);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts datagrams per sender and outputs after hearing `need` distinct ones.
    #[derive(Debug, Clone)]
    struct Listener {
        heard: Vec<bool>,
        need: usize,
    }

    impl LossyAutomaton for Listener {
        fn state(&self) -> (Dyadic, u64) {
            (Dyadic::zero(), 0)
        }

        fn on_datagram(&mut self, msg: &Datagram, _: &mut Ctx<'_>) {
            self.heard[msg.from] = true;
        }

        fn output(&self) -> Option<Decision> {
            (self.heard.iter().filter(|&&h| h).count() >= self.need).then_some(Decision::Done)
        }
    }

    fn engine(n: usize, channel: LossyChannelConfig, seed: u64) -> LossyEngine<Listener> {
        let nodes = (0..n).map(|_| LossyNode::Honest(Listener { heard: vec![false; n], need: n - 1 })).collect();
        LossyEngine::new(nodes, seed, LossyOptions::new(channel))
    }

    #[test]
    fn total_loss_still_progresses_through_forced_deliveries() {
        let channel = LossyChannelConfig { t: 1, delta: 3, policy: LossPolicy::Adversarial };
        let trace = engine(3, channel, 4).run();
        assert_eq!(trace.verdict, RunVerdict::Completed);
        assert!(trace.forced_deliveries > 0);
        assert!(trace.events.iter().filter(|e| e.kind == EventKind::Deliver).all(|e| e.forced));
        check_fairness(&trace, 3).unwrap();
    }

    #[test]
    fn forced_delivery_arrives_when_the_window_closes() {
        let channel = LossyChannelConfig { t: 1, delta: 2, policy: LossPolicy::Adversarial };
        let mut e = engine(2, channel, 0);
        // Round 0: gap 0, 0 + 1 < 2, drops are honoured.
        e.tick(0);
        let bid = e.pending_datagrams()[0];
        assert!(!e.resolve(bid, Resolution::Drop));
        e.tick(1);
        let bid = e.pending_datagrams()[0];
        assert!(!e.resolve(bid, Resolution::Drop));
        assert_eq!(e.round(), 1);
        // Round 1: gap 1, 1 + 1 >= 2, the drop is overridden.
        e.tick(0);
        let bid = e.pending_datagrams()[0];
        assert!(e.resolve(bid, Resolution::Drop));
        assert!(e.node(1).unwrap().heard[0]);
    }

    #[test]
    fn iid_loss_respects_fairness() {
        for (seed, loss) in [(1, 0.3), (2, 0.6), (3, 0.9), (4, 1.0)] {
            for (t, delta) in [(1, 1), (1, 4), (2, 5)] {
                let channel = LossyChannelConfig { t, delta, policy: LossPolicy::Iid { loss, duplicate: 0.1 } };
                let trace = engine(4, channel, seed).run();
                assert_eq!(trace.verdict, RunVerdict::Completed);
                check_fairness(&trace, delta).unwrap();
            }
        }
    }

    #[test]
    fn fairness_checker_flags_a_gap() {
        let channel = LossyChannelConfig { t: 1, delta: 5, policy: LossPolicy::Adversarial };
        let trace = engine(2, channel, 0).run();
        check_fairness(&trace, 5).unwrap();
        assert!(check_fairness(&trace, 2).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = LossyChannelConfig { t: 2, delta: 2, policy: LossPolicy::Adversarial };
        assert!(ok.validate().is_ok());
        assert!(LossyChannelConfig { delta: 1, ..ok }.validate().is_err());
        assert!(LossyChannelConfig { t: 0, ..ok }.validate().is_err());
        assert!(LossyChannelConfig { policy: LossPolicy::Iid { loss: 1.5, duplicate: 0.0 }, ..ok }.validate().is_err());
    }
}
