//! Three clients store and collect over the MAC layer while the scheduler
//! crashes one of them; the resulting history is checked for regularity.

use macsim::sim::{MacEngine, MacOptions, RandomAdversary};
use macsim::store_collect::{check_regularity, extract_history, MacSc, ScOp};

fn main() {
    let nodes = (0..3)
        .map(|i| MacSc::new(i, [ScOp::Store(format!("a{i}")), ScOp::Collect, ScOp::Store(format!("b{i}")), ScOp::Collect]))
        .collect();
    let opts = MacOptions { max_crashes: 1, ..MacOptions::default() };
    let trace = MacEngine::new(nodes, 11, opts).run(&mut RandomAdversary::new(11).with_crash_prob(0.02));

    let history = extract_history(&trace);
    for ev in &history {
        let payload = match (&ev.value, &ev.view) {
            (Some(v), _) => v.to_string(),
            (_, Some(view)) => format!("{view:?}"),
            _ => String::new(),
        };
        println!("t={:<4} node {} {:?} {:?} {payload}", ev.time, ev.node, ev.op, ev.edge);
    }
    println!("crashed: {:?}", trace.crashed);
    println!("regularity: {:?}", check_regularity(&history).expect("well-formed history"));
}
