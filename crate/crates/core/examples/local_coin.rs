//! Randomized binary consensus with local coins: decision phases over many
//! seeds for three nodes with split inputs.

use std::collections::BTreeMap;

use macsim::randomized::{decisions, rbc_phase_bound, run_rbc, Conciliator};
use macsim::sim::{MacOptions, RandomAdversary};

fn main() {
    let mut histogram: BTreeMap<u64, u32> = BTreeMap::new();
    let mut values = [0u32; 2];
    for seed in 0..2000 {
        let trace = run_rbc(&[0, 1, 1], Conciliator::LocalCoin, seed, MacOptions::default(), &mut RandomAdversary::new(seed)).unwrap();
        let ds = decisions(&trace);
        let last = ds.iter().map(|d| d.2).max().unwrap();
        *histogram.entry(last).or_default() += 1;
        values[ds[0].1 as usize] += 1;
    }
    println!("decided 0: {}, decided 1: {}", values[0], values[1]);
    println!("phase bound for delta = 0.1: {}", rbc_phase_bound(3, 0.1));
    for (phase, count) in histogram {
        println!("last decision in phase {phase}: {count}");
    }
}
