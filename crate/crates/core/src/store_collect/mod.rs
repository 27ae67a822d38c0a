//! Store-collect over the abstract MAC layer and a regularity checker for
//! the resulting histories.

mod automaton;
mod history;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::NodeId;

pub use automaton::{MacSc, ScMsg, ScOp};
pub use history::{check_regularity, extract_history, read_history, write_history, Edge, HistoryError, HistoryEvent, OpKind, RegularityVerdict, ViolationKind};

/// A stored value tagged with the storing node's sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScValue {
    pub value: String,
    pub seq: u64,
}

impl fmt::Display for ScValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.value, self.seq)
    }
}

/// Latest known value per node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct View(BTreeMap<NodeId, ScValue>);

// JSON object keys are strings, and inside a tagged note they reach us
// without serde_json's usual string-to-integer key coercion.
impl<'de> Deserialize<'de> for View {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize, PartialEq, Eq, PartialOrd, Ord)]
        #[serde(untagged)]
        enum Key {
            Int(NodeId),
            Str(String),
        }
        let raw = BTreeMap::<Key, ScValue>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| match k {
                Key::Int(i) => Ok((i, v)),
                Key::Str(s) => s.parse().map(|i| (i, v)).map_err(|_| serde::de::Error::custom(format!("bad node key `{s}`"))),
            })
            .collect::<Result<_, _>>()
            .map(View)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("node {node} has two different values with seq {seq}: {a} and {b}")]
pub struct MergeConflict {
    pub node: NodeId,
    pub seq: u64,
    pub a: String,
    pub b: String,
}

impl View {
    pub fn new() -> Self {
        View::default()
    }

    pub fn get(&self, node: NodeId) -> Option<&ScValue> {
        self.0.get(&node)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &ScValue)> + '_ {
        self.0.iter().map(|(&k, v)| (k, v))
    }

    /// Adds `value` for `node` unless the view already holds something newer.
    pub fn insert(&mut self, node: NodeId, value: ScValue) -> Result<(), MergeConflict> {
        match self.0.get(&node) {
            Some(old) if old.seq == value.seq && old.value != value.value => Err(MergeConflict {
                node,
                seq: value.seq,
                a: old.value.clone(),
                b: value.value,
            }),
            Some(old) if old.seq >= value.seq => Ok(()),
            _ => {
                self.0.insert(node, value);
                Ok(())
            }
        }
    }

    pub fn merge_from(&mut self, other: &View) -> Result<(), MergeConflict> {
        for (node, value) in other.iter() {
            self.insert(node, value.clone())?;
        }
        Ok(())
    }

    /// `self ⪯ other`: every entry here is matched by an equal or newer one there.
    pub fn precedes_or_equals(&self, other: &View) -> bool {
        self.iter().all(|(j, v)| other.get(j).is_some_and(|w| w.seq >= v.seq))
    }
}

impl FromIterator<(NodeId, ScValue)> for View {
    fn from_iter<I: IntoIterator<Item = (NodeId, ScValue)>>(iter: I) -> Self {
        View(iter.into_iter().collect())
    }
}

/// Pointwise newer-wins join.
pub fn merge_views(a: &View, b: &View) -> Result<View, MergeConflict> {
    let mut out = a.clone();
    out.merge_from(b)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(value: &str, seq: u64) -> ScValue {
        ScValue { value: value.into(), seq }
    }

    #[test]
    fn empty_is_identity() {
        let view: View = [(1, v("a", 0)), (2, v("b", 3))].into_iter().collect();
        assert_eq!(merge_views(&View::new(), &view).unwrap(), view);
        assert_eq!(merge_views(&view, &View::new()).unwrap(), view);
    }

    #[test]
    fn newer_wins() {
        let a: View = [(1, v("a", 1))].into_iter().collect();
        let b: View = [(1, v("b", 2))].into_iter().collect();
        let expected: View = [(1, v("b", 2))].into_iter().collect();
        assert_eq!(merge_views(&a, &b).unwrap(), expected);
        assert_eq!(merge_views(&b, &a).unwrap(), expected);
    }

    #[test]
    fn equal_seq_different_value_conflicts() {
        let a: View = [(1, v("a", 1))].into_iter().collect();
        let b: View = [(1, v("b", 1))].into_iter().collect();
        assert!(merge_views(&a, &b).is_err());
    }

    #[test]
    fn precedence_order() {
        let a: View = [(1, v("a", 1))].into_iter().collect();
        let b: View = [(1, v("b", 2)), (2, v("c", 0))].into_iter().collect();
        assert!(a.precedes_or_equals(&b));
        assert!(!b.precedes_or_equals(&a));
        assert!(View::new().precedes_or_equals(&a));
    }

    /// Views where each node's value is a function of its seq, so merges
    /// never conflict.
    fn arb_view() -> impl Strategy<Value = View> {
        prop::collection::btree_map(0usize..5, 0u64..6, 0..5)
            .prop_map(|m| m.into_iter().map(|(node, seq)| (node, v(&format!("{node}:{seq}"), seq))).collect())
    }

    proptest! {
        #[test]
        fn merge_is_a_join(a in arb_view(), b in arb_view(), c in arb_view()) {
            let ab = merge_views(&a, &b).unwrap();
            prop_assert_eq!(&ab, &merge_views(&b, &a).unwrap());
            prop_assert_eq!(merge_views(&ab, &c).unwrap(), merge_views(&a, &merge_views(&b, &c).unwrap()).unwrap());
            prop_assert_eq!(merge_views(&a, &a).unwrap(), a.clone());
            prop_assert!(a.precedes_or_equals(&ab) && b.precedes_or_equals(&ab));
        }
    }
}
