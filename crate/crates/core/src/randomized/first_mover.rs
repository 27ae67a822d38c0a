use serde::Serialize;

use super::rbc::reveal_probability;
use crate::sim::{Automaton, Ctx, Decision, Message, Note, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "type", content = "v", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FmMsg {
    Coin(u8),
    Dummy,
}

impl Message for FmMsg {}

/// Standalone single-phase first-mover conciliator.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstMover {
    v: u8,
    n_prime: f64,
    k: u32,
    coin: Option<u8>,
    followed_up: bool,
}

impl FirstMover {
    pub fn new(input: u8, n_prime: u64) -> Self {
        assert!(n_prime >= 1, "size estimate must be positive");
        FirstMover { v: input, n_prime: n_prime as f64, k: 0, coin: None, followed_up: false }
    }
}

impl Automaton for FirstMover {
    type Msg = FmMsg;

    fn step(&mut self, ctx: &mut Ctx<'_>) -> Step<FmMsg> {
        if self.k == 0 && !self.followed_up && self.coin.is_none() {
            ctx.note(Note::BinaryInput { value: self.v });
        }
        if self.followed_up {
            let value = self.coin.expect("set before the follow-up");
            let decision = Decision::Bit { value };
            ctx.note(Note::Output { decision: decision.clone(), phase: Some(0) });
            return Step::Output(decision);
        }
        match self.coin {
            None => {
                let k = self.k;
                self.k += 1;
                let estimate = self.n_prime as u64;
                if ctx.random_unit() < reveal_probability(k, self.n_prime) {
                    ctx.note(Note::Original { phase: 0, round: k, coin: Some(self.v), estimate });
                    Step::Broadcast(FmMsg::Coin(self.v))
                } else {
                    ctx.note(Note::Original { phase: 0, round: k, coin: None, estimate });
                    Step::Broadcast(FmMsg::Dummy)
                }
            }
            Some(value) => {
                self.followed_up = true;
                ctx.note(Note::FollowUp { phase: 0, value });
                Step::Broadcast(FmMsg::Coin(value))
            }
        }
    }

    fn on_message(&mut self, msg: &FmMsg, _: &mut Ctx<'_>) {
        if let FmMsg::Coin(v) = *msg {
            self.coin.get_or_insert(v);
        }
    }
}
