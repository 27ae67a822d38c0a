//! MAC-AC2 keeps only (v, p): compare its measured per-phase range with
//! the (1 - 2^-n)^p contraction bound.

use macsim::approximate::{check_contraction, check_mover_envelope, mac_ac2_phases, phase_ranges, run_mac_ac2};
use macsim::dyadic::{contraction_factor, Dyadic};
use macsim::sim::{MacOptions, RandomAdversary};

fn main() {
    let n = 3u32;
    let eps = 0.05;
    let inputs = vec![Dyadic::zero(), Dyadic::one(), "1/4".parse().unwrap()];
    println!("p_end = {}", mac_ac2_phases(eps, n).unwrap());
    let trace = run_mac_ac2(&inputs, eps, n, 9, MacOptions::default(), &mut RandomAdversary::new(9)).unwrap();
    let rows = phase_ranges(&trace);
    for row in rows.iter().step_by(4) {
        let bound = &rows[0].range() * &contraction_factor(n, row.phase as u32);
        println!("p={:<3} range {:.8} bound {:.8}", row.phase, row.range().to_f64(), bound.to_f64());
    }
    println!("contraction {:?}, envelope {:?}", check_contraction(&rows, n), check_mover_envelope(&rows, n));
}
