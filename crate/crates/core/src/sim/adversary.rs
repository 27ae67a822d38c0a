//! Schedulers. They see redacted event skeletons only: who sends, the
//! sender's broadcast counter, and who receives. Payloads and message types
//! stay hidden, so a coin broadcast and a dummy broadcast look the same.

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::mac::Event;
use super::rng::adversary_rng;
use super::NodeId;

/// Redacted form of an enabled event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Redacted {
    Segment { node: NodeId },
    Deliver { sender: NodeId, seq: u64, receiver: NodeId },
    Ack { sender: NodeId, seq: u64 },
}

impl Redacted {
    pub fn involves(&self, node: NodeId) -> bool {
        match *self {
            Redacted::Segment { node: m } => m == node,
            Redacted::Deliver { sender, receiver, .. } => sender == node || receiver == node,
            Redacted::Ack { sender, .. } => sender == node,
        }
    }
}

/// What the adversary is allowed to look at when choosing.
pub struct SchedView<'a> {
    pub(crate) enabled: &'a IndexSet<Event>,
    pub(crate) origin: &'a [(NodeId, u64)],
    pub(crate) crashable: &'a [NodeId],
    pub(crate) time: u64,
}

impl SchedView<'_> {
    pub fn len(&self) -> usize {
        self.enabled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.enabled.is_empty()
    }

    pub fn get(&self, index: usize) -> Redacted {
        match self.enabled[index] {
            Event::Segment(node) => Redacted::Segment { node },
            Event::Deliver(bid, receiver) => {
                let (sender, seq) = self.origin[bid as usize];
                Redacted::Deliver { sender, seq, receiver }
            }
            Event::Ack(bid) => {
                let (sender, seq) = self.origin[bid as usize];
                Redacted::Ack { sender, seq }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Redacted> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Nodes that may still be crashed.
    pub fn crashable(&self) -> &[NodeId] {
        self.crashable
    }

    pub fn time(&self) -> u64 {
        self.time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    /// Apply the enabled event at this index of the view.
    Event(usize),
    Crash(NodeId),
}

pub trait Adversary {
    fn choose(&mut self, view: &SchedView<'_>) -> Choice;

    /// Whether a receiver still pending on a crashed sender's unacknowledged
    /// broadcast gets it anyway.
    fn keep_delivery(&mut self, sender: NodeId, seq: u64, receiver: NodeId) -> bool;
}

/// Uniformly random scheduling with occasional crashes.
#[derive(Debug, Clone)]
pub struct RandomAdversary {
    rng: ChaCha8Rng,
    crash_prob: f64,
}

impl RandomAdversary {
    pub fn new(seed: u64) -> Self {
        RandomAdversary { rng: adversary_rng(seed), crash_prob: 0.0 }
    }

    /// Per-step probability of crashing a random crashable node.
    pub fn with_crash_prob(mut self, p: f64) -> Self {
        self.crash_prob = p;
        self
    }
}

impl Adversary for RandomAdversary {
    fn choose(&mut self, view: &SchedView<'_>) -> Choice {
        if self.crash_prob > 0.0 && !view.crashable().is_empty() && self.rng.gen_bool(self.crash_prob) {
            return Choice::Crash(*view.crashable().choose(&mut self.rng).expect("non-empty"));
        }
        Choice::Event(self.rng.gen_range(0..view.len()))
    }

    fn keep_delivery(&mut self, _: NodeId, _: u64, _: NodeId) -> bool {
        self.rng.gen_bool(0.5)
    }
}

/// Round-robin order: pending segments first, then deliveries by broadcast
/// and receiver, then acknowledgements. Never crashes anything.
#[derive(Debug, Clone, Default)]
pub struct LockstepAdversary;

impl Adversary for LockstepAdversary {
    fn choose(&mut self, view: &SchedView<'_>) -> Choice {
        let best = (0..view.len()).min_by_key(|&i| view.get(i)).expect("something is enabled");
        Choice::Event(best)
    }

    fn keep_delivery(&mut self, _: NodeId, _: u64, _: NodeId) -> bool {
        true
    }
}

/// Random scheduling that starves one node: any event touching it is
/// re-drawn up to `patience` times.
#[derive(Debug, Clone)]
pub struct LaggardAdversary {
    inner: RandomAdversary,
    slow: NodeId,
    patience: u32,
}

impl LaggardAdversary {
    pub fn new(seed: u64, slow: NodeId, patience: u32) -> Self {
        LaggardAdversary { inner: RandomAdversary::new(seed), slow, patience }
    }

    pub fn with_crash_prob(mut self, p: f64) -> Self {
        self.inner = self.inner.with_crash_prob(p);
        self
    }
}

impl Adversary for LaggardAdversary {
    fn choose(&mut self, view: &SchedView<'_>) -> Choice {
        let mut choice = self.inner.choose(view);
        for _ in 0..self.patience {
            match choice {
                Choice::Event(i) if view.get(i).involves(self.slow) => choice = self.inner.choose(view),
                _ => break,
            }
        }
        choice
    }

    fn keep_delivery(&mut self, sender: NodeId, seq: u64, receiver: NodeId) -> bool {
        self.inner.keep_delivery(sender, seq, receiver)
    }
}

/// One scripted step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pick {
    Segment(NodeId),
    Deliver { sender: NodeId, seq: u64, to: NodeId },
    Ack { sender: NodeId, seq: u64 },
    /// Crash a node; `keep` lists receivers that still get its in-flight broadcast.
    Crash { node: NodeId, keep: Vec<NodeId> },
}

/// Replays a fixed schedule, then continues in lockstep order.
#[derive(Debug, Clone)]
pub struct ScriptedAdversary {
    script: std::collections::VecDeque<Pick>,
    keep: Vec<NodeId>,
}

impl ScriptedAdversary {
    pub fn new(script: impl IntoIterator<Item = Pick>) -> Self {
        ScriptedAdversary { script: script.into_iter().collect(), keep: Vec::new() }
    }

    pub fn remaining(&self) -> usize {
        self.script.len()
    }
}

impl Adversary for ScriptedAdversary {
    fn choose(&mut self, view: &SchedView<'_>) -> Choice {
        let Some(pick) = self.script.pop_front() else {
            return LockstepAdversary.choose(view);
        };
        let want = match pick {
            Pick::Crash { node, keep } => {
                assert!(view.crashable().contains(&node), "scripted crash of {node} is not allowed");
                self.keep = keep;
                return Choice::Crash(node);
            }
            Pick::Segment(node) => Redacted::Segment { node },
            Pick::Deliver { sender, seq, to } => Redacted::Deliver { sender, seq, receiver: to },
            Pick::Ack { sender, seq } => Redacted::Ack { sender, seq },
        };
        match (0..view.len()).find(|&i| view.get(i) == want) {
            Some(i) => Choice::Event(i),
            None => panic!("scripted step {want:?} is not enabled at time {}", view.time()),
        }
    }

    fn keep_delivery(&mut self, _: NodeId, _: u64, receiver: NodeId) -> bool {
        self.keep.contains(&receiver)
    }
}
