//! Approximate consensus over fair-lossy channels: a crash-tolerant
//! protocol for `n >= 2f + 1` and a Byzantine-tolerant one for
//! `n >= 5f + 1`, both with periodic broadcast and bounded storage.

mod byzantine;
mod small_ac;
mod small_bac;

pub use byzantine::ByzStrategy;
pub use small_ac::SmallAc;
pub use small_bac::{SmallBac, TrimStore};

use crate::approximate::{check_unit_inputs, mac_ac2_phases, mac_ac_phases, PhaseRow, PhaseViolation, StateMsg};
use crate::dyadic::{range_of, Dyadic};
use crate::error::ConfigError;
use crate::sim::{Datagram, LossyEngine, LossyNode, LossyOptions, NodeId, Trace};

impl StateMsg for Datagram {
    fn state(&self) -> Option<(&Dyadic, u64)> {
        Some((&self.value, self.phase))
    }
}

fn check_channel(n: usize, opts: &LossyOptions) -> Result<(), ConfigError> {
    if n < 2 {
        return Err(ConfigError::new("lossy protocols need at least two nodes"));
    }
    opts.channel.validate().map_err(ConfigError::new)
}

pub fn run_small_ac(inputs: &[Dyadic], f: usize, eps: f64, seed: u64, opts: LossyOptions) -> Result<Trace<Datagram>, ConfigError> {
    let n = inputs.len();
    check_unit_inputs(inputs)?;
    check_channel(n, &opts)?;
    if n < 2 * f + 1 {
        return Err(ConfigError::new(format!("n = {n} is below 2f + 1 = {}", 2 * f + 1)));
    }
    if opts.max_crashes > f {
        return Err(ConfigError::new(format!("max_crashes {} exceeds f = {f}", opts.max_crashes)));
    }
    let p_end = mac_ac_phases(eps)?;
    let nodes = inputs.iter().enumerate().map(|(i, x)| LossyNode::Honest(SmallAc::new(i, n, n - f, x.clone(), p_end))).collect();
    Ok(LossyEngine::new(nodes, seed, opts).run())
}

/// Fault setup of a Byzantine run.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallBacSetup {
    pub f: usize,
    pub p_end: u64,
    pub include_self_value: bool,
    pub byzantine: Vec<NodeId>,
    pub strategy: ByzStrategy,
}

impl SmallBacSetup {
    /// The last `f` nodes are Byzantine and run `strategy`; `p_end` follows
    /// from `eps` and `n`. Own values go into the trim store.
    pub fn new(n: usize, f: usize, eps: f64, strategy: ByzStrategy) -> Result<Self, ConfigError> {
        let p_end = mac_ac2_phases(eps, n as u32)?;
        Ok(SmallBacSetup { f, p_end, include_self_value: true, byzantine: (n.saturating_sub(f)..n).collect(), strategy })
    }
}

/// `inputs[i]` is ignored for Byzantine nodes.
pub fn run_small_bac(inputs: &[Dyadic], setup: &SmallBacSetup, seed: u64, opts: LossyOptions) -> Result<Trace<Datagram>, ConfigError> {
    let n = inputs.len();
    let f = setup.f;
    check_channel(n, &opts)?;
    if n < 5 * f + 1 {
        return Err(ConfigError::new(format!("n = {n} is below 5f + 1 = {}", 5 * f + 1)));
    }
    let mut byz = vec![false; n];
    for &b in &setup.byzantine {
        if b >= n || byz[b] {
            return Err(ConfigError::new(format!("bad Byzantine node id {b}")));
        }
        byz[b] = true;
    }
    if setup.byzantine.len() + opts.max_crashes > f {
        return Err(ConfigError::new(format!("{} Byzantine nodes plus {} crashes exceed f = {f}", setup.byzantine.len(), opts.max_crashes)));
    }
    let honest: Vec<Dyadic> = (0..n).filter(|&i| !byz[i]).map(|i| inputs[i].clone()).collect();
    check_unit_inputs(&honest)?;
    let nodes = (0..n)
        .map(|i| {
            if byz[i] {
                LossyNode::Byzantine(Box::new(setup.strategy))
            } else {
                LossyNode::Honest(SmallBac::new(i, n, f, inputs[i].clone(), setup.p_end, setup.include_self_value))
            }
        })
        .collect();
    Ok(LossyEngine::new(nodes, seed, opts).run())
}

/// Lower and upper median of a non-empty multiset.
pub fn medians<'a>(values: impl IntoIterator<Item = &'a Dyadic>) -> Option<(Dyadic, Dyadic)> {
    let mut v: Vec<&Dyadic> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort();
    let m = v.len();
    Some((v[(m - 1) / 2].clone(), v[m / 2].clone()))
}

/// Interval for a mover into `p + 1` when a majority of `V[p]` was heard:
/// `[(min_p + median_hi)/2, (max_p + median_lo)/2]`. It lies inside the
/// median interval for any choice of median.
pub fn median_interval(row: &PhaseRow) -> (Dyadic, Dyadic) {
    let (lo, hi) = medians(row.states.iter().map(|s| &s.1)).expect("rows are non-empty");
    (Dyadic::midpoint(&row.min, &hi), Dyadic::midpoint(&row.max, &lo))
}

pub fn check_median_interval(rows: &[PhaseRow]) -> Result<(), PhaseViolation> {
    for pair in rows.windows(2) {
        let (lo, hi) = median_interval(&pair[0]);
        if let Some((node, _)) = pair[1].movers().find(|(_, v)| *v < &lo || *v > &hi) {
            return Err(PhaseViolation::Mover { phase: pair[1].phase, node });
        }
    }
    Ok(())
}

/// The `a_k`, `A_k` sequences of one phase, built from the value-sorted
/// honest states `w_1 <= ... <= w_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub w_low: Dyadic,
    pub w_mid: Dyadic,
    pub w_high: Dyadic,
}

impl Envelope {
    /// Needs at least `2f + 1` states.
    pub fn new(states: &[Dyadic], f: usize) -> Result<Self, ConfigError> {
        if states.len() < 2 * f + 1 {
            return Err(ConfigError::new(format!("{} honest states, need at least {}", states.len(), 2 * f + 1)));
        }
        let mut w: Vec<&Dyadic> = states.iter().collect();
        w.sort();
        Ok(Envelope { w_low: w[0].clone(), w_mid: w[2 * f].clone(), w_high: w[w.len() - 1].clone() })
    }

    /// `a_k = w_1 + 2^-k (w_{2f+1} - w_1)`.
    pub fn a(&self, k: u32) -> Dyadic {
        &self.w_low + &(&(&self.w_mid - &self.w_low) * &Dyadic::pow2_neg(k))
    }

    /// `A_k = w_h + 2^-k (w_{2f+1} - w_h)`.
    #[allow(non_snake_case)]
    pub fn A(&self, k: u32) -> Dyadic {
        &self.w_high + &(&(&self.w_mid - &self.w_high) * &Dyadic::pow2_neg(k))
    }

    pub fn contains(&self, k: u32, v: &Dyadic) -> bool {
        self.a(k) <= *v && *v <= self.A(k)
    }
}

/// For every phase whose honest state multiset is complete (`h` states),
/// checks that the `k`-th honest node to reach the next phase lands in
/// `[a_k, A_k]`.
pub fn check_envelope(rows: &[PhaseRow], h: usize, f: usize) -> Result<(), PhaseViolation> {
    for pair in rows.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        if prev.states.len() < h {
            continue;
        }
        let values: Vec<Dyadic> = prev.states.iter().map(|s| s.1.clone()).collect();
        let env = Envelope::new(&values, f).map_err(|_| PhaseViolation::Range { phase: prev.phase })?;
        for (k, (node, v, _)) in next.states.iter().enumerate() {
            if !env.contains(k as u32 + 1, v) {
                return Err(PhaseViolation::Mover { phase: next.phase, node: *node });
            }
        }
    }
    Ok(())
}

/// `range(V[p+1]) <= (1 - 2^-n) range(V[p])` whenever `V[p]` holds `h` states.
pub fn check_step_contraction(rows: &[PhaseRow], h: usize, n: u32) -> Result<(), PhaseViolation> {
    let factor = &Dyadic::one() - &Dyadic::pow2_neg(n);
    for pair in rows.windows(2) {
        if pair[0].states.len() >= h && pair[1].range() > &factor * &pair[0].range() {
            return Err(PhaseViolation::Range { phase: pair[1].phase });
        }
    }
    Ok(())
}

/// Outputs of honest nodes lie in the range of honest inputs. Returns the
/// first offending node.
pub fn check_honest_validity<M>(trace: &Trace<M>) -> Result<(), NodeId> {
    let inputs: Vec<Dyadic> = trace
        .notes
        .iter()
        .filter(|r| !trace.byzantine[r.node])
        .filter_map(|r| match &r.note {
            crate::sim::Note::Input { value } => Some(value.clone()),
            _ => None,
        })
        .collect();
    let Some((lo, hi)) = range_of(&inputs) else { return Ok(()) };
    for (i, out) in trace.outputs.iter().enumerate() {
        if trace.byzantine[i] {
            continue;
        }
        if let Some(v) = out.as_ref().and_then(|d| d.dyadic()) {
            if *v < lo || *v > hi {
                return Err(i);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximate::{check_halving, check_jump_provenance, outputs, phase_ranges};
    use crate::sim::lossy::check_fairness;
    use crate::sim::{Entry, LossPolicy, LossyChannelConfig, RunVerdict};

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    fn opts(loss: f64, delta: u64) -> LossyOptions {
        LossyOptions::new(LossyChannelConfig { t: 1, delta, policy: LossPolicy::Iid { loss, duplicate: 0.05 } })
    }

    #[test]
    fn resilience_is_enforced() {
        let five = vec![d("0.5"); 5];
        let setup = SmallBacSetup::new(5, 1, 0.1, ByzStrategy::Silent).unwrap();
        assert!(run_small_bac(&five, &setup, 0, opts(0.1, 3)).is_err());
        assert!(run_small_ac(&[d("0"), d("1")], 1, 0.1, 0, opts(0.1, 3)).is_err());
    }

    #[test]
    fn median_interval_example() {
        let row = PhaseRow {
            phase: 0,
            states: vec![(0, d("0"), Entry::Init), (1, d("0.5"), Entry::Init), (2, d("1"), Entry::Init)],
            min: d("0"),
            max: d("1"),
            first: None,
        };
        let (lo, hi) = median_interval(&row);
        assert_eq!((lo.clone(), hi.clone()), (d("0.25"), d("0.75")));
        let mover = Dyadic::midpoint(&d("0"), &d("1"));
        assert!(lo <= mover && mover <= hi);
    }

    #[test]
    fn envelope_closed_form_matches_recursion() {
        let env = Envelope::new(&[d("0.1875"), d("0"), d("1"), d("0.5"), d("0.75"), d("0.25")], 1).unwrap();
        assert_eq!(env.w_mid, d("0.25"));
        let (mut a, mut big_a) = (env.w_mid.clone(), env.w_mid.clone());
        assert_eq!(env.a(0), env.A(0));
        for k in 0..=10 {
            assert_eq!(env.a(k), a);
            assert_eq!(env.A(k), big_a);
            a = Dyadic::midpoint(&a, &env.w_low);
            big_a = Dyadic::midpoint(&big_a, &env.w_high);
        }
    }

    #[test]
    fn small_ac_halves_under_loss() {
        let inputs = [d("0"), d("0.5"), d("1")];
        for seed in 0..60 {
            let loss = [0.3, 0.6, 0.9][seed as usize % 3];
            let mut o = opts(loss, 4);
            o.max_crashes = 1;
            o.crash_prob = 0.002;
            let t = run_small_ac(&inputs, 1, 1.0 / 32.0, seed, o).unwrap();
            assert_eq!(t.verdict, RunVerdict::Completed);
            check_fairness(&t, 4).unwrap();
            let rows = phase_ranges(&t);
            check_halving(&rows).unwrap();
            check_median_interval(&rows).unwrap();
            check_jump_provenance(&rows).unwrap();
            let out = outputs(&t);
            let (lo, hi) = range_of(out.iter().map(|o| &o.1)).unwrap();
            assert!(&hi - &lo <= Dyadic::pow2_neg(5));
        }
    }

    #[test]
    fn small_bac_survives_the_catalog() {
        let inputs = [d("0"), d("0.25"), d("1"), d("0.5"), d("0.75"), d("0.5")];
        for strategy in ByzStrategy::ALL {
            for seed in 0..10 {
                let setup = SmallBacSetup::new(6, 1, 0.5, strategy).unwrap();
                let t = run_small_bac(&inputs, &setup, seed, opts(0.5, 3)).unwrap();
                assert_eq!(t.verdict, RunVerdict::Completed, "{strategy} {seed}");
                check_honest_validity(&t).unwrap();
                let rows = phase_ranges(&t);
                check_step_contraction(&rows, 5, 6).unwrap();
                check_envelope(&rows, 5, 1).unwrap_or_else(|e| panic!("{strategy} seed {seed}: {e}"));
            }
        }
    }

    #[test]
    fn leaving_out_the_own_value_can_break_contraction() {
        let inputs = [d("0"), d("0.25"), d("1"), d("0.5"), d("0.75"), d("0.5")];
        let broken = (0..20).any(|seed| {
            let mut setup = SmallBacSetup::new(6, 1, 0.5, ByzStrategy::Extremes).unwrap();
            setup.include_self_value = false;
            let t = run_small_bac(&inputs, &setup, seed, opts(0.5, 3)).unwrap();
            check_step_contraction(&phase_ranges(&t), 5, 6).is_err()
        });
        assert!(broken);
    }

    #[test]
    fn equal_inputs_are_kept_despite_extremes() {
        let x = d("0.625");
        let setup = SmallBacSetup::new(6, 1, 0.5, ByzStrategy::Extremes).unwrap();
        let t = run_small_bac(&vec![x.clone(); 6], &setup, 3, opts(0.4, 3)).unwrap();
        assert!(outputs(&t).iter().all(|(_, v)| *v == x));
    }
}
