use crate::dyadic::Dyadic;
use crate::sim::{Ctx, Datagram, Decision, Entry, LossyAutomaton, NodeId, Note};

/// The `f + 1` lowest and `f + 1` highest values fed in one phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrimStore {
    keep: usize,
    low: Vec<Dyadic>,
    high: Vec<Dyadic>,
}

impl TrimStore {
    pub fn new(f: usize) -> Self {
        TrimStore { keep: f + 1, low: Vec::new(), high: Vec::new() }
    }

    pub fn store(&mut self, v: &Dyadic) {
        if self.low.len() < self.keep {
            self.low.push(v.clone());
        } else if let Some(pos) = argmax(&self.low).filter(|&k| *v < self.low[k]) {
            self.low[pos] = v.clone();
        }
        if self.high.len() < self.keep {
            self.high.push(v.clone());
        } else if let Some(pos) = argmin(&self.high).filter(|&k| *v > self.high[k]) {
            self.high[pos] = v.clone();
        }
    }

    pub fn clear(&mut self) {
        self.low.clear();
        self.high.clear();
    }

    pub fn low(&self) -> &[Dyadic] {
        &self.low
    }

    pub fn high(&self) -> &[Dyadic] {
        &self.high
    }

    /// `(max(low) + min(high)) / 2`, or `None` before anything was stored.
    pub fn trimmed_midpoint(&self) -> Option<Dyadic> {
        let lo = &self.low[argmax(&self.low)?];
        let hi = &self.high[argmin(&self.high)?];
        Some(Dyadic::midpoint(lo, hi))
    }
}

fn argmax(xs: &[Dyadic]) -> Option<usize> {
    (0..xs.len()).max_by(|&a, &b| xs[a].cmp(&xs[b]))
}

fn argmin(xs: &[Dyadic]) -> Option<usize> {
    (0..xs.len()).min_by(|&a, &b| xs[a].cmp(&xs[b]))
}

/// Byzantine-tolerant approximate consensus over fair-lossy channels. A node
/// stores states of phase `p` or higher from unheard senders and, after
/// `n - f` senders (itself included), moves to the midpoint of the
/// `(f+1)`-st lowest and `(f+1)`-st highest stored values. Phases are never
/// skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallBac {
    id: NodeId,
    need: usize,
    p_end: u64,
    include_self: bool,
    p: u64,
    v: Dyadic,
    heard: Vec<bool>,
    store: TrimStore,
    output: Option<Decision>,
}

impl SmallBac {
    /// With `include_self` the node's own phase state is passed to the trim
    /// store at each phase start, in addition to counting towards `n - f`.
    pub fn new(id: NodeId, n: usize, f: usize, input: Dyadic, p_end: u64, include_self: bool) -> Self {
        let mut heard = vec![false; n];
        heard[id] = true;
        let mut store = TrimStore::new(f);
        if include_self {
            store.store(&input);
        }
        SmallBac { id, need: n - f, p_end, include_self, p: 0, v: input, heard, store, output: None }
    }

    pub fn store(&self) -> &TrimStore {
        &self.store
    }

    fn check_done(&mut self, ctx: &mut Ctx<'_>) {
        if self.p >= self.p_end && self.output.is_none() {
            let decision = Decision::Value { value: self.v.clone() };
            ctx.note(Note::Output { decision: decision.clone(), phase: Some(self.p) });
            self.output = Some(decision);
        }
    }
}

impl LossyAutomaton for SmallBac {
    fn state(&self) -> (Dyadic, u64) {
        (self.v.clone(), self.p)
    }

    fn start(&mut self, ctx: &mut Ctx<'_>) {
        ctx.note(Note::Input { value: self.v.clone() });
        ctx.note(Note::PhaseStart { phase: 0, value: self.v.clone(), via: Entry::Init });
        self.check_done(ctx);
    }

    fn on_datagram(&mut self, msg: &Datagram, ctx: &mut Ctx<'_>) {
        if msg.phase >= self.p && !self.heard[msg.from] {
            self.heard[msg.from] = true;
            self.store.store(&msg.value);
        }
        if self.heard.iter().filter(|&&h| h).count() >= self.need {
            if let Some(v) = self.store.trimmed_midpoint() {
                self.v = v;
                self.p += 1;
                self.heard.iter_mut().for_each(|h| *h = false);
                self.heard[self.id] = true;
                self.store.clear();
                if self.include_self {
                    self.store.store(&self.v);
                }
                ctx.note(Note::PhaseStart { phase: self.p, value: self.v.clone(), via: Entry::Move });
                self.check_done(ctx);
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
    use proptest::prelude::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    fn sorted(xs: &[Dyadic]) -> Vec<Dyadic> {
        let mut v = xs.to_vec();
        v.sort();
        v
    }

    #[test]
    fn trim_keeps_extremes() {
        let mut s = TrimStore::new(1);
        for x in ["0", "0.25", "0.5", "0.75", "100"] {
            s.store(&d(x));
        }
        assert_eq!(sorted(s.low()), vec![d("0"), d("0.25")]);
        assert_eq!(sorted(s.high()), vec![d("0.75"), d("100")]);
        assert_eq!(s.trimmed_midpoint(), Some(d("0.5")));
    }

    #[test]
    fn short_feed_is_kept_whole() {
        let mut s = TrimStore::new(2);
        s.store(&d("0.5"));
        s.store(&d("-3"));
        assert_eq!(sorted(s.low()), vec![d("-3"), d("0.5")]);
        assert_eq!(sorted(s.high()), vec![d("-3"), d("0.5")]);
    }

    proptest! {
        #[test]
        fn trim_is_order_independent(xs in proptest::collection::vec(-64i64..64, 0..12), f in 0usize..3, seed in any::<u64>()) {
            let values: Vec<Dyadic> = xs.iter().map(|&x| Dyadic::new(x, 3)).collect();
            let mut shuffled = values.clone();
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            let (mut a, mut b) = (TrimStore::new(f), TrimStore::new(f));
            values.iter().for_each(|v| a.store(v));
            shuffled.iter().for_each(|v| b.store(v));
            prop_assert_eq!(sorted(a.low()), sorted(b.low()));
            prop_assert_eq!(sorted(a.high()), sorted(b.high()));
            let all = sorted(&values);
            let k = all.len().min(f + 1);
            prop_assert_eq!(sorted(a.low()), all[..k].to_vec());
            prop_assert_eq!(sorted(a.high()), all[all.len() - k..].to_vec());
        }
    }
}
