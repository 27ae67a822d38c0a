use crate::dyadic::Dyadic;
use crate::sim::{Ctx, Datagram, Decision, Entry, LossyAutomaton, NodeId, Note};

/// Crash-tolerant approximate consensus over fair-lossy channels. A node
/// moves after hearing `n - f` distinct phase-`p` senders (itself included)
/// and jumps on any higher-phase state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallAc {
    id: NodeId,
    need: usize,
    p_end: u64,
    p: u64,
    v: Dyadic,
    vmin: Dyadic,
    vmax: Dyadic,
    heard: Vec<bool>,
    output: Option<Decision>,
}

impl SmallAc {
    /// `need` is the move threshold `n - f`.
    pub fn new(id: NodeId, n: usize, need: usize, input: Dyadic, p_end: u64) -> Self {
        let mut heard = vec![false; n];
        heard[id] = true;
        SmallAc { id, need, p_end, p: 0, vmin: input.clone(), vmax: input.clone(), v: input, heard, output: None }
    }

    pub fn heard_count(&self) -> usize {
        self.heard.iter().filter(|&&h| h).count()
    }

    fn enter(&mut self, p: u64, v: Dyadic, via: Entry, ctx: &mut Ctx<'_>) {
        self.p = p;
        self.vmin = v.clone();
        self.vmax = v.clone();
        self.v = v;
        self.heard.iter_mut().for_each(|h| *h = false);
        self.heard[self.id] = true;
        ctx.note(Note::PhaseStart { phase: self.p, value: self.v.clone(), via });
        self.check_done(ctx);
    }

    fn check_done(&mut self, ctx: &mut Ctx<'_>) {
        if self.p >= self.p_end && self.output.is_none() {
            let decision = Decision::Value { value: self.v.clone() };
            ctx.note(Note::Output { decision: decision.clone(), phase: Some(self.p) });
            self.output = Some(decision);
        }
    }
}

impl LossyAutomaton for SmallAc {
    fn state(&self) -> (Dyadic, u64) {
        (self.v.clone(), self.p)
    }

    fn start(&mut self, ctx: &mut Ctx<'_>) {
        ctx.note(Note::Input { value: self.v.clone() });
        ctx.note(Note::PhaseStart { phase: 0, value: self.v.clone(), via: Entry::Init });
        self.check_done(ctx);
    }

    fn on_datagram(&mut self, msg: &Datagram, ctx: &mut Ctx<'_>) {
        if msg.phase > self.p {
            self.enter(msg.phase, msg.value.clone(), Entry::Jump, ctx);
        } else if msg.phase == self.p && !self.heard[msg.from] {
            self.heard[msg.from] = true;
            if msg.value < self.vmin {
                self.vmin = msg.value.clone();
            } else if msg.value > self.vmax {
                self.vmax = msg.value.clone();
            }
            if self.heard_count() >= self.need {
                let v = Dyadic::midpoint(&self.vmin, &self.vmax);
                self.enter(self.p + 1, v, Entry::Move, ctx);
            }
        }
    }

    fn output(&self) -> Option<Decision> {
        self.output.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::NodeRng;

    fn dg(from: NodeId, value: &str, phase: u64) -> Datagram {
        Datagram { from, value: value.parse().unwrap(), phase }
    }

    #[test]
    fn moves_on_threshold_and_ignores_duplicates() {
        let mut rng = NodeRng::for_node(0, 0);
        let mut notes = Vec::new();
        let mut ctx = Ctx::new(&mut rng, &mut notes);
        let mut a = SmallAc::new(1, 4, 3, "0.5".parse().unwrap(), 4);
        a.on_datagram(&dg(0, "0", 1), &mut ctx);
        assert_eq!(a.state(), ("0".parse().unwrap(), 1));
        assert_eq!(a.heard_count(), 1);
        a.on_datagram(&dg(0, "0", 1), &mut ctx);
        a.on_datagram(&dg(0, "0", 1), &mut ctx);
        assert_eq!(a.heard_count(), 2);
        a.on_datagram(&dg(2, "1", 0), &mut ctx);
        assert_eq!(a.state().1, 1);
        a.on_datagram(&dg(2, "1", 1), &mut ctx);
        assert_eq!(a.state(), ("0.5".parse().unwrap(), 2));
    }
}
