use crate::dyadic::Dyadic;
use crate::sim::{Automaton, Ctx, Decision, Entry, Note, Step};

use super::ApproxMsg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Pc {
    Start,
    Broadcast,
    Lock,
    Update,
    Done,
}

/// Lock-based approximate consensus: each phase moves to the midpoint of the
/// smallest and largest same-phase states processed during the broadcast.
///
/// Deliveries are held until the first segment has recorded the input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MacAc {
    p: u64,
    v: Dyadic,
    jump: bool,
    vmin: Dyadic,
    vmax: Dyadic,
    p_end: u64,
    locked: bool,
    pc: Pc,
}

impl MacAc {
    pub fn new(input: Dyadic, p_end: u64) -> Self {
        MacAc { p: 0, vmin: input.clone(), vmax: input.clone(), v: input, jump: false, p_end, locked: true, pc: Pc::Start }
    }

    pub fn phase(&self) -> u64 {
        self.p
    }

    pub fn value(&self) -> &Dyadic {
        &self.v
    }

    fn reset(&mut self, via: Entry, ctx: &mut Ctx<'_>) {
        self.vmin = self.v.clone();
        self.vmax = self.v.clone();
        self.jump = false;
        ctx.note(Note::PhaseStart { phase: self.p, value: self.v.clone(), via });
    }

    fn finish(&mut self, ctx: &mut Ctx<'_>) -> Step<ApproxMsg> {
        self.pc = Pc::Done;
        self.locked = false;
        let decision = Decision::Value { value: self.v.clone() };
        ctx.note(Note::Output { decision: decision.clone(), phase: Some(self.p) });
        Step::Output(decision)
    }
}

impl Automaton for MacAc {
    type Msg = ApproxMsg;

    fn step(&mut self, ctx: &mut Ctx<'_>) -> Step<ApproxMsg> {
        match self.pc {
            Pc::Start => {
                ctx.note(Note::Input { value: self.v.clone() });
                self.reset(Entry::Init, ctx);
                if self.p >= self.p_end {
                    return self.finish(ctx);
                }
                self.locked = false;
                self.pc = Pc::Broadcast;
                Step::Yield
            }
            Pc::Broadcast => {
                self.pc = Pc::Lock;
                Step::Broadcast(ApproxMsg { v: self.v.clone(), p: self.p })
            }
            Pc::Lock => {
                self.locked = true;
                self.pc = Pc::Update;
                Step::Yield
            }
            Pc::Update => {
                // Update and the next reset under one lock. A jump already
                // reset the extremes when it happened.
                if self.jump {
                    self.jump = false;
                    ctx.note(Note::PhaseStart { phase: self.p, value: self.v.clone(), via: Entry::Jump });
                } else {
                    self.v = Dyadic::midpoint(&self.vmin, &self.vmax);
                    self.p += 1;
                    self.reset(Entry::Move, ctx);
                }
                if self.p >= self.p_end {
                    return self.finish(ctx);
                }
                self.locked = false;
                self.pc = Pc::Broadcast;
                Step::Yield
            }
            Pc::Done => unreachable!("stepped after output"),
        }
    }

    fn on_message(&mut self, msg: &ApproxMsg, _: &mut Ctx<'_>) {
        if msg.p > self.p {
            self.p = msg.p;
            self.v = msg.v.clone();
            self.vmin = msg.v.clone();
            self.vmax = msg.v.clone();
            self.jump = true;
        } else if msg.p == self.p {
            if msg.v > self.vmax {
                self.vmax = msg.v.clone();
            }
            if msg.v < self.vmin {
                self.vmin = msg.v.clone();
            }
        }
    }

    fn locked(&self) -> bool {
        self.locked
    }
}
