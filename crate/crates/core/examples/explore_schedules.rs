//! Exhaustive schedule enumeration for two store-collect clients, with and
//! without a crash. The full tree is cut at a depth bound; the deduplicating
//! walk covers complete runs by visiting each reachable state once.

use macsim::sim::explore::{explore, explore_dedup, Leaf};
use macsim::sim::{MacEngine, MacOptions};
use macsim::store_collect::{MacSc, ScOp};

fn main() {
    for crashes in [0, 1] {
        let opts = MacOptions { max_crashes: crashes, ..MacOptions::default() };
        let nodes = (0..2).map(|i| MacSc::new(i, [ScOp::Store(i.to_string()), ScOp::Collect])).collect();
        let root = MacEngine::new(nodes, 0, opts);
        let mut finished_views = std::collections::BTreeSet::new();
        let bounded = explore(&root, 12, |_, _| {});
        println!("max crashes {crashes}, depth 12: {} schedules, {} cut short", bounded.leaves(), bounded.truncated);
        let stats = explore_dedup(&root, 64, |e, leaf| {
            if leaf == Leaf::Finished {
                finished_views.insert(format!("{:?}", e.trace().outputs));
            }
        });
        println!("max crashes {crashes}, complete: {} states, {} distinct output vectors", stats.states, finished_views.len());
    }
}
