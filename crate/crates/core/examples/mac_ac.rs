//! MAC-AC with four nodes: the per-phase table of states with its range,
//! next to the halving bound.

use macsim::approximate::{check_halving, check_mover_interval, phase_ranges, run_mac_ac};
use macsim::dyadic::Dyadic;
use macsim::sim::{MacOptions, RandomAdversary};

fn main() {
    let inputs: Vec<Dyadic> = ["0", "1", "3/8", "0.75"].iter().map(|s| s.parse().unwrap()).collect();
    let trace = run_mac_ac(&inputs, 1.0 / 64.0, 3, MacOptions::default(), &mut RandomAdversary::new(3)).unwrap();
    let rows = phase_ranges(&trace);
    let base = rows[0].range().to_f64();
    for row in &rows {
        let states: Vec<String> = row.states.iter().map(|(i, v, via)| format!("{i}:{v}({via:?})")).collect();
        let bound = base / 2f64.powi(row.phase as i32);
        println!("p={} range {:.6} bound {bound:.6}  {}", row.phase, row.range().to_f64(), states.join(" "));
    }
    println!("halving {:?}, mover interval {:?}", check_halving(&rows), check_mover_interval(&rows));
    println!("outputs {:?}", trace.outputs);
}
