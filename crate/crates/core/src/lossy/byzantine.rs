use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{range_of, Dyadic};
use crate::sim::{ByzantineBehaviour, NodeId};

/// Catalog of Byzantine datagram generators. Every strategy answers with
/// the phase the receiver is currently in, so its values are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByzStrategy {
    /// Alternates between `-10^6` and `10^6`.
    Extremes,
    /// Just below the honest minimum to even receivers, just above the
    /// honest maximum to odd ones.
    Equivocate,
    /// A random honest state plus a jitter of at most `2^-10`.
    Mimic,
    Silent,
    /// Uniform noise in `[-2, 3]` with a random phase near the honest ones.
    Random,
}

impl ByzStrategy {
    pub const ALL: [ByzStrategy; 5] =
        [ByzStrategy::Extremes, ByzStrategy::Equivocate, ByzStrategy::Mimic, ByzStrategy::Silent, ByzStrategy::Random];

    pub fn name(self) -> &'static str {
        match self {
            ByzStrategy::Extremes => "extremes",
            ByzStrategy::Equivocate => "equivocate",
            ByzStrategy::Mimic => "mimic",
            ByzStrategy::Silent => "silent",
            ByzStrategy::Random => "random",
        }
    }
}

impl fmt::Display for ByzStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ByzStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ByzStrategy::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| format!("unknown Byzantine strategy `{s}`"))
    }
}

const EXTREME: i64 = 1_000_000;

impl ByzantineBehaviour for ByzStrategy {
    fn datagram(
        &self,
        rng: &mut ChaCha8Rng,
        receiver: NodeId,
        tick: u64,
        honest: &[Option<(Dyadic, u64)>],
    ) -> Option<(Dyadic, u64)> {
        let phase = honest.get(receiver).cloned().flatten().map_or(0, |s| s.1);
        let live: Vec<&(Dyadic, u64)> = honest.iter().flatten().collect();
        let value = match self {
            ByzStrategy::Silent => return None,
            ByzStrategy::Extremes => Dyadic::from_int(if (tick + receiver as u64) % 2 == 0 { -EXTREME } else { EXTREME }),
            ByzStrategy::Equivocate => {
                let (lo, hi) = range_of(live.iter().map(|s| &s.0)).unwrap_or((Dyadic::zero(), Dyadic::one()));
                if receiver % 2 == 0 {
                    &lo - &Dyadic::one()
                } else {
                    &hi + &Dyadic::one()
                }
            }
            ByzStrategy::Mimic => {
                let base = live.get(rng.gen_range(0..live.len().max(1))).map_or(Dyadic::zero(), |s| s.0.clone());
                &base + &Dyadic::new(rng.gen_range(-1024i64..=1024), 20)
            }
            ByzStrategy::Random => {
                let top = live.iter().map(|s| s.1).max().unwrap_or(0);
                let value = Dyadic::new(rng.gen_range(-(2i64 << 20)..=(3i64 << 20)), 20);
                return Some((value, rng.gen_range(phase.saturating_sub(1)..=top + 2)));
            }
        };
        Some((value, phase))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn names_round_trip() {
        for b in ByzStrategy::ALL {
            assert_eq!(b.name().parse::<ByzStrategy>().unwrap(), b);
        }
        assert!("loud".parse::<ByzStrategy>().is_err());
    }

    #[test]
    fn equivocation_depends_on_the_receiver() {
        let honest = vec![Some((Dyadic::zero(), 3)), Some((Dyadic::one(), 3)), None];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = ByzStrategy::Equivocate.datagram(&mut rng, 0, 0, &honest).unwrap();
        let b = ByzStrategy::Equivocate.datagram(&mut rng, 1, 0, &honest).unwrap();
        assert_eq!(a, (Dyadic::from_int(-1), 3));
        assert_eq!(b, (Dyadic::from_int(2), 3));
        assert_eq!(ByzStrategy::Silent.datagram(&mut rng, 0, 0, &honest), None);
    }
}
