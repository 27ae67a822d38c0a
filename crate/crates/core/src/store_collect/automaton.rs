use std::collections::VecDeque;

use serde::Serialize;

use super::{ScValue, View};
use crate::sim::{Automaton, Ctx, Decision, Message, NodeId, Note, Step};

/// One operation of a node's workload.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScOp {
    Store(String),
    Collect,
}

/// The single STORE-tagged message carrying a view.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScMsg {
    pub view: View,
}

impl Message for ScMsg {}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Pending {
    Store(ScValue),
    Collect(View),
}

/// MAC-SC client running a fixed script of operations back to back.
/// Unlike the consensus protocols this one needs its own id: views are
/// keyed by node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MacSc {
    id: NodeId,
    view: View,
    script: VecDeque<ScOp>,
    next_seq: u64,
    pending: Option<Pending>,
}

impl MacSc {
    pub fn new(id: NodeId, script: impl IntoIterator<Item = ScOp>) -> Self {
        MacSc { id, view: View::new(), script: script.into_iter().collect(), next_seq: 0, pending: None }
    }

    pub fn view(&self) -> &View {
        &self.view
    }
}

impl Automaton for MacSc {
    type Msg = ScMsg;

    fn step(&mut self, ctx: &mut Ctx<'_>) -> Step<ScMsg> {
        // Reaching here with an operation pending means its broadcast was acknowledged.
        match self.pending.take() {
            Some(Pending::Store(value)) => ctx.note(Note::StoreResp { value }),
            Some(Pending::Collect(view)) => ctx.note(Note::CollectResp { view }),
            None => {}
        }
        match self.script.pop_front() {
            None => Step::Output(Decision::Done),
            Some(ScOp::Store(value)) => {
                let value = ScValue { value, seq: self.next_seq };
                self.next_seq += 1;
                ctx.note(Note::StoreInv { value: value.clone() });
                let mut current = self.view.clone();
                current.insert(self.id, value.clone()).expect("own seq numbers are fresh");
                self.pending = Some(Pending::Store(value));
                Step::Broadcast(ScMsg { view: current })
            }
            Some(ScOp::Collect) => {
                ctx.note(Note::CollectInv);
                let current = self.view.clone();
                self.pending = Some(Pending::Collect(current.clone()));
                Step::Broadcast(ScMsg { view: current })
            }
        }
    }

    fn on_message(&mut self, msg: &ScMsg, _: &mut Ctx<'_>) {
        self.view.merge_from(&msg.view).expect("values are unique per (node, seq)");
    }
}
