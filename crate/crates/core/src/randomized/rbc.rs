use serde::Serialize;

use crate::sim::{Automaton, Ctx, Decision, Entry, Message, Note, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RbcMsg {
    /// Announcement with no payload, kept for the broadcast count.
    Id,
    Value { v: u8, p: u64 },
    Proposal { v: u8, p: u64 },
    #[serde(rename = "VALUE2")]
    Value2 { v: u8, p: u64 },
    Coin { v: u8, p: u64 },
    Dummy { p: u64 },
}

impl Message for RbcMsg {
    fn phase(&self) -> Option<u64> {
        match *self {
            RbcMsg::Id => None,
            RbcMsg::Value { p, .. }
            | RbcMsg::Proposal { p, .. }
            | RbcMsg::Value2 { p, .. }
            | RbcMsg::Coin { p, .. }
            | RbcMsg::Dummy { p } => Some(p),
        }
    }
}

/// How a node picks its next value after seeing both values in a phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conciliator {
    LocalCoin,
    /// First-mover coin with size estimate `2^floor(p/c) * n0`.
    FirstMover { n0: u64, c: f64 },
}

impl Conciliator {
    pub fn estimate(&self, phase: u64) -> f64 {
        match *self {
            Conciliator::LocalCoin => 1.0,
            Conciliator::FirstMover { n0, c } => 2f64.powf((phase as f64 / c).floor()) * n0 as f64,
        }
    }
}

/// Probability of revealing the coin in round `k` with size estimate `n_prime`.
pub fn reveal_probability(k: u32, n_prime: f64) -> f64 {
    (2f64.powi(k as i32) / (2.0 * n_prime)).min(1.0)
}

/// Phase by which local-coin consensus terminates with probability `1 - delta`.
pub fn rbc_phase_bound(n: usize, delta: f64) -> u64 {
    (2f64.powi(n as i32 - 1) * (1.0 / delta).ln()).ceil() as u64
}

/// Doubling period for the size estimate that yields failure probability `delta`.
pub fn rbc2_doubling_period(delta: f64) -> f64 {
    (2.0 / delta).ln() / 0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Pc {
    Id,
    Top,
    AfterValue,
    AfterProposal,
    AfterValue2,
    Reveal,
    AfterFollowUp,
}

/// Randomized binary consensus: a reusable adopt-commit per phase followed
/// by a conciliator. Phase-tagged handler state lets nodes jump ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct Rbc {
    input: u8,
    v: u8,
    p: u64,
    p_old: u64,
    /// Highest phase a VALUE (resp. VALUE2) for each bit was heard in.
    seen: [Option<u64>; 2],
    seen2: [Option<u64>; 2],
    proposal: Option<(u8, u64)>,
    coin: Option<(u8, u64)>,
    conciliator: Conciliator,
    n_prime: f64,
    k: u32,
    pc: Pc,
    entry: Option<Entry>,
    restart: bool,
}

impl Rbc {
    pub fn new(input: u8, conciliator: Conciliator) -> Self {
        assert!(input <= 1, "binary input expected");
        let pc = match conciliator {
            Conciliator::LocalCoin => Pc::Top,
            Conciliator::FirstMover { .. } => Pc::Id,
        };
        Rbc {
            input,
            v: input,
            p: 0,
            p_old: 0,
            seen: [None; 2],
            seen2: [None; 2],
            proposal: None,
            coin: None,
            conciliator,
            n_prime: 1.0,
            k: 0,
            pc,
            entry: Some(Entry::Init),
            restart: false,
        }
    }

    pub fn local_coin(input: u8) -> Self {
        Rbc::new(input, Conciliator::LocalCoin)
    }

    pub fn first_mover(input: u8, n0: u64, c: f64) -> Self {
        Rbc::new(input, Conciliator::FirstMover { n0, c })
    }

    pub fn phase(&self) -> u64 {
        self.p
    }

    pub fn value(&self) -> u8 {
        self.v
    }

    fn jump_to(&mut self, v: u8, p: u64) {
        self.v = v;
        self.p = p;
        self.entry = Some(Entry::Jump);
    }

    fn advance(&mut self) {
        self.p += 1;
        self.entry = Some(Entry::Move);
    }

    fn raise(slot: &mut Option<u64>, p: u64) {
        if slot.is_none_or(|q| p >= q) {
            *slot = Some(p);
        }
    }
}

impl Automaton for Rbc {
    type Msg = RbcMsg;

    fn step(&mut self, ctx: &mut Ctx<'_>) -> Step<RbcMsg> {
        if std::mem::take(&mut self.restart) {
            self.pc = Pc::Top;
        }
        loop {
            match self.pc {
                Pc::Id => {
                    ctx.note(Note::BinaryInput { value: self.input });
                    self.pc = Pc::Top;
                    return Step::Broadcast(RbcMsg::Id);
                }
                Pc::Top => {
                    if self.conciliator == Conciliator::LocalCoin && self.entry == Some(Entry::Init) {
                        ctx.note(Note::BinaryInput { value: self.input });
                    }
                    if let Some(via) = self.entry.take() {
                        ctx.note(Note::BinaryPhase { phase: self.p, value: self.v, via });
                    }
                    self.p_old = self.p;
                    self.pc = Pc::AfterValue;
                    return Step::Broadcast(RbcMsg::Value { v: self.v, p: self.p });
                }
                Pc::AfterValue => {
                    if let Some((v, q)) = self.proposal.filter(|&(_, q)| q >= self.p) {
                        self.v = v;
                        self.p = q;
                    }
                    self.pc = Pc::AfterProposal;
                    return Step::Broadcast(RbcMsg::Proposal { v: self.v, p: self.p });
                }
                Pc::AfterProposal => {
                    let other = (1 - self.v) as usize;
                    if self.p_old != self.p {
                        self.entry = Some(Entry::Jump);
                        self.pc = Pc::Top;
                    } else if self.seen[other].is_none_or(|q| q < self.p) {
                        let decision = Decision::Bit { value: self.v };
                        ctx.note(Note::Output { decision: decision.clone(), phase: Some(self.p) });
                        return Step::Output(decision);
                    } else {
                        self.pc = Pc::AfterValue2;
                        return Step::Broadcast(RbcMsg::Value2 { v: self.v, p: self.p });
                    }
                }
                Pc::AfterValue2 => {
                    let other = 1 - self.v;
                    match self.seen2[other as usize] {
                        Some(q) if q > self.p => {
                            self.jump_to(other, q);
                            self.pc = Pc::Top;
                        }
                        Some(q) if q == self.p => match self.conciliator {
                            Conciliator::LocalCoin => {
                                self.v = ctx.flip();
                                self.advance();
                                self.pc = Pc::Top;
                            }
                            Conciliator::FirstMover { .. } => {
                                self.n_prime = self.conciliator.estimate(self.p);
                                self.k = 0;
                                self.pc = Pc::Reveal;
                            }
                        },
                        _ => {
                            self.advance();
                            self.pc = Pc::Top;
                        }
                    }
                }
                Pc::Reveal => {
                    let p = self.p;
                    match self.coin.filter(|&(_, q)| q >= p) {
                        None => {
                            let k = self.k;
                            self.k += 1;
                            let estimate = self.n_prime as u64;
                            if ctx.random_unit() < reveal_probability(k, self.n_prime) {
                                ctx.note(Note::Original { phase: p, round: k, coin: Some(self.v), estimate });
                                return Step::Broadcast(RbcMsg::Coin { v: self.v, p });
                            }
                            ctx.note(Note::Original { phase: p, round: k, coin: None, estimate });
                            return Step::Broadcast(RbcMsg::Dummy { p });
                        }
                        Some((value, _)) => {
                            ctx.note(Note::FollowUp { phase: p, value });
                            self.pc = Pc::AfterFollowUp;
                            return Step::Broadcast(RbcMsg::Coin { v: value, p });
                        }
                    }
                }
                Pc::AfterFollowUp => {
                    let (v, q) = self.coin.expect("set before the follow-up");
                    self.v = v;
                    self.p = q;
                    self.advance();
                    self.pc = Pc::Top;
                }
            }
        }
    }

    fn on_message(&mut self, msg: &RbcMsg, _: &mut Ctx<'_>) {
        match *msg {
            RbcMsg::Value { v, p } => Rbc::raise(&mut self.seen[v as usize], p),
            RbcMsg::Value2 { v, p } => Rbc::raise(&mut self.seen2[v as usize], p),
            RbcMsg::Proposal { v, p } => {
                if self.proposal.is_none_or(|(_, q)| p >= q) {
                    self.proposal = Some((v, p));
                }
            }
            RbcMsg::Coin { v, p } => {
                if p == self.p && self.coin.is_none_or(|(_, q)| p > q) {
                    self.coin = Some((v, p));
                } else if p > self.p {
                    // The main thread restarts at the loop top once its
                    // current broadcast completes.
                    self.jump_to(v, p + 1);
                    self.restart = true;
                }
            }
            RbcMsg::Id | RbcMsg::Dummy { .. } => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{LockstepAdversary, MacEngine, MacOptions};

    #[test]
    fn phase_bound_values() {
        assert_eq!(rbc_phase_bound(3, 0.01), 19);
        assert_eq!(rbc_phase_bound(2, 0.1), 5);
        assert!((rbc2_doubling_period(0.05) - 73.777).abs() < 1e-3);
    }

    #[test]
    fn reveal_probability_doubles_and_caps() {
        assert_eq!(reveal_probability(0, 4.0), 0.125);
        assert_eq!(reveal_probability(2, 4.0), 0.5);
        assert_eq!(reveal_probability(3, 4.0), 1.0);
        assert_eq!(reveal_probability(9, 4.0), 1.0);
    }

    #[test]
    fn size_estimate_doubles_every_c_phases() {
        let c = Conciliator::FirstMover { n0: 3, c: 4.0 };
        assert_eq!(c.estimate(0), 3.0);
        assert_eq!(c.estimate(3), 3.0);
        assert_eq!(c.estimate(4), 6.0);
        assert_eq!(c.estimate(9), 12.0);
    }

    #[test]
    fn solo_node_decides_in_phase_zero() {
        for node in [Rbc::local_coin(1), Rbc::first_mover(1, 1, 4.0)] {
            let trace = MacEngine::new(vec![node], 0, MacOptions::default()).run(&mut LockstepAdversary);
            assert_eq!(trace.outputs[0], Some(Decision::Bit { value: 1 }));
            let phase = trace.notes.iter().find_map(|r| match r.note {
                Note::Output { phase, .. } => phase,
                _ => None,
            });
            assert_eq!(phase, Some(0));
        }
    }

    #[test]
    fn unanimous_inputs_decide_without_conciliator() {
        let nodes = vec![Rbc::first_mover(0, 1, 4.0); 4];
        let trace = MacEngine::new(nodes, 3, MacOptions::default()).run(&mut LockstepAdversary);
        assert!(trace.outputs.iter().all(|o| *o == Some(Decision::Bit { value: 0 })));
        assert!(!trace.notes.iter().any(|r| matches!(r.note, Note::Original { .. } | Note::FollowUp { .. })));
    }

    #[test]
    fn coin_from_a_higher_phase_forces_a_jump() {
        let mut node = Rbc::first_mover(0, 1, 4.0);
        let mut rng = crate::sim::NodeRng::for_node(0, 0);
        let mut notes = Vec::new();
        let mut ctx = Ctx::new(&mut rng, &mut notes);
        node.on_message(&RbcMsg::Coin { v: 1, p: 5 }, &mut ctx);
        assert_eq!((node.value(), node.phase()), (1, 6));
        assert!(node.restart);
        // A same-phase coin is recorded instead.
        node.on_message(&RbcMsg::Coin { v: 0, p: 6 }, &mut ctx);
        assert_eq!(node.coin, Some((0, 6)));
    }

    #[test]
    fn handlers_keep_the_highest_phase() {
        let mut node = Rbc::local_coin(0);
        let mut rng = crate::sim::NodeRng::for_node(0, 0);
        let mut notes = Vec::new();
        let mut ctx = Ctx::new(&mut rng, &mut notes);
        node.on_message(&RbcMsg::Proposal { v: 1, p: 4 }, &mut ctx);
        node.on_message(&RbcMsg::Proposal { v: 0, p: 2 }, &mut ctx);
        assert_eq!(node.proposal, Some((1, 4)));
        node.on_message(&RbcMsg::Value { v: 1, p: 3 }, &mut ctx);
        node.on_message(&RbcMsg::Value { v: 1, p: 1 }, &mut ctx);
        assert_eq!(node.seen[1], Some(3));
    }
}
