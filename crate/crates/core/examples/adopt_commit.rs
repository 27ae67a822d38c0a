//! Adopt-commit on every binary input pair of two nodes, explored over all
//! schedules with up to one crash.

use macsim::checkers::{check_coherence, check_validity, Observed};
use macsim::randomized::AdoptCommit;
use macsim::sim::explore::explore_dedup;
use macsim::sim::{MacEngine, MacOptions};

fn main() {
    for inputs in [[0u8, 0], [0, 1], [1, 1]] {
        let opts = MacOptions { max_crashes: 1, ..MacOptions::default() };
        let root = MacEngine::new(inputs.iter().map(|&b| AdoptCommit::new(b).unwrap()).collect(), 0, opts);
        let mut outcomes = std::collections::BTreeSet::new();
        let mut broken = 0;
        let stats = explore_dedup(&root, 64, |e, _| {
            let obs = Observed::from_trace(e.trace());
            broken += usize::from(!check_validity(&obs).passed || !check_coherence(&obs).passed);
            outcomes.insert(format!("{:?}", e.trace().outputs));
        });
        println!("inputs {inputs:?}: {} states, {} leaves, {broken} violations", stats.states, stats.leaves());
        for o in outcomes {
            println!("  {o}");
        }
    }
}
