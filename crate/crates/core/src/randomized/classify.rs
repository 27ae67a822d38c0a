use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::sim::{Bid, EventKind, Message, Note, Trace};

/// Who made a conciliator broadcast and what it looked like.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    FollowUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Coin,
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BroadcastClass {
    pub bid: Bid,
    pub origin: Origin,
    pub face: Face,
    pub phase: u64,
    pub value: Option<u8>,
    pub completed: bool,
    /// Original coin broadcasts only: some follow-up with this value completed.
    pub success: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PhaseTally {
    pub coin_originals: u64,
    pub dummy_originals: u64,
    pub follow_ups: u64,
    pub completed_follow_ups: u64,
    pub successful_originals: u64,
    /// Among completed original broadcasts in acknowledgement order, the
    /// 1-based rank of the first coin broadcast. Needs the event log.
    pub first_coin_rank: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub broadcasts: Vec<BroadcastClass>,
    pub phases: BTreeMap<u64, PhaseTally>,
    /// Broadcasts outside the conciliator (adopt-commit traffic and ID).
    pub other: u64,
}

impl Classification {
    pub fn originals(&self) -> u64 {
        self.phases.values().map(|t| t.coin_originals + t.dummy_originals).sum()
    }

    pub fn follow_ups(&self) -> u64 {
        self.phases.values().map(|t| t.follow_ups).sum()
    }

    pub fn successful_coins(&self) -> u64 {
        self.phases.values().map(|t| t.successful_originals).sum()
    }

    /// Phases with no, exactly one, and several successful original coins.
    pub fn success_profile(&self) -> (u64, u64, u64) {
        let mut out = (0, 0, 0);
        for t in self.phases.values() {
            match t.successful_originals {
                0 => out.0 += 1,
                1 => out.1 += 1,
                _ => out.2 += 1,
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace has no binary-consensus notes")]
pub struct NotRandomized;

/// Classifies every conciliator broadcast in a randomized-consensus trace.
pub fn classify_trace<M: Message>(trace: &Trace<M>) -> Result<Classification, NotRandomized> {
    if !trace.notes.iter().any(|r| matches!(r.note, Note::BinaryInput { .. })) {
        return Err(NotRandomized);
    }
    let mut out = Classification::default();
    let mut tagged: HashMap<Bid, ()> = HashMap::new();
    for rec in &trace.notes {
        let (origin, face, phase, value) = match rec.note {
            Note::Original { phase, coin, .. } => {
                (Origin::Original, if coin.is_some() { Face::Coin } else { Face::Dummy }, phase, coin)
            }
            Note::FollowUp { phase, value } => (Origin::FollowUp, Face::Coin, phase, Some(value)),
            _ => continue,
        };
        let bid = rec.bid.expect("conciliator notes come from broadcasting segments");
        tagged.insert(bid, ());
        let completed = trace.broadcast(bid).acked();
        out.broadcasts.push(BroadcastClass { bid, origin, face, phase, value, completed, success: false });
    }
    out.other = trace.broadcasts.len() as u64 - tagged.len() as u64;

    let mut winners: BTreeMap<u64, BTreeSet<u8>> = BTreeMap::new();
    for b in out.broadcasts.iter().filter(|b| b.origin == Origin::FollowUp && b.completed) {
        winners.entry(b.phase).or_default().insert(b.value.expect("follow-ups carry a value"));
    }
    for b in &mut out.broadcasts {
        let tally = out.phases.entry(b.phase).or_default();
        match (b.origin, b.face) {
            (Origin::Original, Face::Coin) => {
                tally.coin_originals += 1;
                b.success = winners.get(&b.phase).is_some_and(|w| w.contains(&b.value.expect("coin")));
                if b.success {
                    tally.successful_originals += 1;
                }
            }
            (Origin::Original, Face::Dummy) => tally.dummy_originals += 1,
            (Origin::FollowUp, _) => {
                tally.follow_ups += 1;
                if b.completed {
                    tally.completed_follow_ups += 1;
                }
            }
        }
    }

    if !trace.events.is_empty() {
        let by_bid: HashMap<Bid, &BroadcastClass> = out.broadcasts.iter().map(|b| (b.bid, b)).collect();
        let mut ranks: BTreeMap<u64, u64> = BTreeMap::new();
        for ev in trace.events.iter().filter(|e| e.kind == EventKind::Ack) {
            let Some(b) = ev.bid.and_then(|bid| by_bid.get(&bid)) else { continue };
            if b.origin != Origin::Original {
                continue;
            }
            let rank = ranks.entry(b.phase).or_default();
            *rank += 1;
            let tally = out.phases.get_mut(&b.phase).expect("phase seen");
            if b.face == Face::Coin && tally.first_coin_rank.is_none() {
                tally.first_coin_rank = Some(*rank);
            }
        }
    }
    Ok(out)
}
