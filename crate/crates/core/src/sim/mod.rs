//! Deterministic discrete-event simulation of the abstract MAC layer and of
//! fair-lossy periodic-broadcast channels.
//!
//! A run is a pure function of its configuration and seed. Nodes are
//! [`Automaton`]s whose main thread advances in atomic segments between
//! broadcast points; a message handler with priority over the main thread
//! processes deliveries. The engine records every applied event, every
//! protocol [`Note`], and every broadcast payload in a [`Trace`].

pub mod adversary;
pub mod explore;
pub mod lossy;
pub mod mac;
pub mod rng;
mod trace;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::store_collect::{ScValue, View};

pub use adversary::{
    Adversary, Choice, LaggardAdversary, LockstepAdversary, Pick, RandomAdversary, Redacted, SchedView, ScriptedAdversary,
};
pub use lossy::{ByzantineBehaviour, Datagram, LossPolicy, LossyAutomaton, LossyChannelConfig, LossyEngine, LossyNode, LossyOptions};
pub use mac::{EngineFault, Event, MacEngine, MacOptions};
pub use rng::NodeRng;
pub use trace::{read_jsonl, BroadcastInfo, EventKind, NoteRecord, RunVerdict, Trace, TraceEvent, TraceLine};

/// Engine-side node label in `[0, n)`. Anonymous protocols never see it.
pub type NodeId = usize;

/// Unique broadcast (or datagram) identifier within one run.
pub type Bid = u64;

/// What a protocol message exposes to the engine for trace rendering.
pub trait Message: Clone + fmt::Debug + Serialize + Send + Sync {
    /// Phase tag carried by the message, if the protocol is phased.
    fn phase(&self) -> Option<u64> {
        None
    }
}

/// Result of running one main-thread segment.
#[derive(Debug, Clone, PartialEq)]
pub enum Step<M> {
    /// Invoke `mac-broadcast` and block until its acknowledgement.
    Broadcast(M),
    /// Stop at a lock boundary; the main thread continues in the next segment.
    Yield,
    /// The main thread has returned its output.
    Output(Decision),
}

/// Final output of a node's main thread.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Bit { value: u8 },
    AdoptCommit { commit: bool, value: u8 },
    Value { value: Dyadic },
    Done,
}

impl Decision {
    pub fn bit(&self) -> Option<u8> {
        match self {
            Decision::Bit { value } | Decision::AdoptCommit { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn dyadic(&self) -> Option<&Dyadic> {
        match self {
            Decision::Value { value } => Some(value),
            _ => None,
        }
    }
}

/// How a node entered a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entry {
    Init,
    Move,
    Jump,
}

/// Protocol annotations recorded alongside engine events. Checkers work from
/// these and from the broadcast table, never from automaton internals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum Note {
    /// Input of a binary protocol.
    BinaryInput { value: u8 },
    /// Input of an approximate protocol.
    Input { value: Dyadic },
    /// `v_i[p]` of an approximate protocol.
    PhaseStart { phase: u64, value: Dyadic, via: Entry },
    /// Binary state carried into a phase by the randomized protocols.
    BinaryPhase { phase: u64, value: u8, via: Entry },
    /// Output of the main thread, with the phase it was produced in.
    Output { decision: Decision, phase: Option<u64> },
    /// Original conciliator broadcast: `coin` is `None` for a dummy.
    Original { phase: u64, round: u32, coin: Option<u8>, estimate: u64 },
    /// Follow-up coin broadcast after a coin was learned.
    FollowUp { phase: u64, value: u8 },
    StoreInv { value: ScValue },
    StoreResp { value: ScValue },
    CollectInv,
    CollectResp { view: View },
}

/// Per-segment environment handed to automata: the node's private random
/// stream and a sink for notes. It deliberately carries no `NodeId`.
pub struct Ctx<'a> {
    rng: &'a mut NodeRng,
    notes: &'a mut Vec<Note>,
}

impl<'a> Ctx<'a> {
    pub(crate) fn new(rng: &'a mut NodeRng, notes: &'a mut Vec<Note>) -> Self {
        Ctx { rng, notes }
    }

    /// Uniform draw from `[0, 1)`.
    pub fn random_unit(&mut self) -> f64 {
        self.rng.unit()
    }

    /// Fair local coin.
    pub fn flip(&mut self) -> u8 {
        self.rng.bit()
    }

    pub fn note(&mut self, note: Note) {
        self.notes.push(note);
    }
}

/// A node's protocol as a state machine with main-thread segments and a
/// message handler, executed under the handler-priority contract.
pub trait Automaton: Clone + Send {
    type Msg: Message;

    /// Runs the main thread from its current point to the next broadcast
    /// point, lock boundary, or return. Called only when the handler queue
    /// is empty or the main thread holds the lock.
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Step<Self::Msg>;

    /// Handles one delivered message. Never interrupted.
    fn on_message(&mut self, msg: &Self::Msg, ctx: &mut Ctx<'_>);

    /// Whether the main thread currently holds the node lock; deliveries are
    /// queued while it does.
    fn locked(&self) -> bool {
        false
    }
}
