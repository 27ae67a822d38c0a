//! Monte Carlo estimate of the first-mover conciliator's success chance
//! as the size estimate n' grows past the true n.

use macsim::randomized::estimate_firstmover_success;

fn main() {
    let n = 4;
    for n_prime in [4, 8, 16, 64] {
        let est = estimate_firstmover_success(n, n_prime, 2000, 7).unwrap();
        let mean_originals = est.originals.iter().sum::<u64>() as f64 / est.trials as f64;
        println!(
            "n={n} n'={n_prime:<3} P(one success)={:.3} [{:.3}, {:.3}] mean originals {mean_originals:.1}",
            est.estimate, est.ci_low, est.ci_high
        );
    }
}
