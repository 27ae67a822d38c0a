use crate::dyadic::Dyadic;
use crate::sim::{Automaton, Ctx, Decision, Entry, Note, Step};

use super::ApproxMsg;

/// Lock-free approximate consensus keeping only `(v, p, jump)`: every
/// same-phase state is folded in by averaging.
///
/// Deliveries are held until the first segment has recorded the input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MacAc2 {
    p: u64,
    v: Dyadic,
    jump: bool,
    p_end: u64,
    started: bool,
    done: bool,
}

impl MacAc2 {
    pub fn new(input: Dyadic, p_end: u64) -> Self {
        MacAc2 { p: 0, v: input, jump: false, p_end, started: false, done: false }
    }

    pub fn phase(&self) -> u64 {
        self.p
    }

    pub fn value(&self) -> &Dyadic {
        &self.v
    }
}

impl Automaton for MacAc2 {
    type Msg = ApproxMsg;

    fn step(&mut self, ctx: &mut Ctx<'_>) -> Step<ApproxMsg> {
        assert!(!self.done, "stepped after output");
        let via = if !self.started {
            self.started = true;
            ctx.note(Note::Input { value: self.v.clone() });
            Entry::Init
        } else if self.jump {
            Entry::Jump
        } else {
            self.p += 1;
            Entry::Move
        };
        ctx.note(Note::PhaseStart { phase: self.p, value: self.v.clone(), via });
        if self.p >= self.p_end {
            self.done = true;
            let decision = Decision::Value { value: self.v.clone() };
            ctx.note(Note::Output { decision: decision.clone(), phase: Some(self.p) });
            return Step::Output(decision);
        }
        self.jump = false;
        Step::Broadcast(ApproxMsg { v: self.v.clone(), p: self.p })
    }

    fn on_message(&mut self, msg: &ApproxMsg, _: &mut Ctx<'_>) {
        if msg.p > self.p {
            self.p = msg.p;
            self.v = msg.v.clone();
            self.jump = true;
        } else if msg.p == self.p {
            self.v = Dyadic::midpoint(&self.v, &msg.v);
        }
    }

    fn locked(&self) -> bool {
        !self.started
    }
}
