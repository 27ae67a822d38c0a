use serde::Serialize;

use crate::sim::{Automaton, Ctx, Decision, Message, Note, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "type", content = "v", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AcMsg {
    Value(u8),
    Proposal(u8),
}

impl Message for AcMsg {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Pc {
    Start,
    AfterValue,
    AfterProposal,
}

/// One-shot anonymous adopt-commit for binary inputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdoptCommit {
    v: u8,
    seen: [bool; 2],
    proposal: Option<u8>,
    pc: Pc,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("input {0} is not binary")]
pub struct NonBinaryInput(pub i64);

impl AdoptCommit {
    pub fn new(input: u8) -> Result<Self, NonBinaryInput> {
        if input > 1 {
            return Err(NonBinaryInput(input.into()));
        }
        Ok(AdoptCommit { v: input, seen: [false; 2], proposal: None, pc: Pc::Start })
    }
}

impl Automaton for AdoptCommit {
    type Msg = AcMsg;

    fn step(&mut self, ctx: &mut Ctx<'_>) -> Step<AcMsg> {
        match self.pc {
            Pc::Start => {
                ctx.note(Note::BinaryInput { value: self.v });
                self.pc = Pc::AfterValue;
                Step::Broadcast(AcMsg::Value(self.v))
            }
            Pc::AfterValue => {
                if let Some(p) = self.proposal {
                    self.v = p;
                }
                self.pc = Pc::AfterProposal;
                Step::Broadcast(AcMsg::Proposal(self.v))
            }
            Pc::AfterProposal => {
                let decision = Decision::AdoptCommit { commit: !self.seen[(1 - self.v) as usize], value: self.v };
                ctx.note(Note::Output { decision: decision.clone(), phase: None });
                Step::Output(decision)
            }
        }
    }

    fn on_message(&mut self, msg: &AcMsg, _: &mut Ctx<'_>) {
        match *msg {
            AcMsg::Value(v) => self.seen[v as usize] = true,
            AcMsg::Proposal(v) => self.proposal = Some(v),
        }
    }
}
