//! SmallBAC with one Byzantine node out of six, once per strategy in the
//! catalog. Reports the honest output spread and the checks.

use macsim::approximate::phase_ranges;
use macsim::dyadic::Dyadic;
use macsim::lossy::{check_envelope, check_honest_validity, check_step_contraction, run_small_bac, ByzStrategy, SmallBacSetup};
use macsim::sim::{LossPolicy, LossyChannelConfig, LossyOptions};

fn main() {
    let inputs: Vec<Dyadic> = ["0", "1/8", "1/2", "3/4", "1", "0"].iter().map(|s| s.parse().unwrap()).collect();
    let channel = LossyChannelConfig { t: 1, delta: 4, policy: LossPolicy::Iid { loss: 0.3, duplicate: 0.0 } };
    for strategy in ByzStrategy::ALL {
        let setup = SmallBacSetup::new(6, 1, 0.01, strategy).unwrap();
        let trace = run_small_bac(&inputs, &setup, 2, LossyOptions::new(channel)).unwrap();
        let outs: Vec<f64> = trace.outputs.iter().flatten().filter_map(|d| d.dyadic()).map(Dyadic::to_f64).collect();
        let spread = outs.iter().cloned().fold(f64::MIN, f64::max) - outs.iter().cloned().fold(f64::MAX, f64::min);
        let rows = phase_ranges(&trace);
        println!(
            "{strategy:<10} p_end {} spread {spread:.2e} validity {} contraction {} envelope {}",
            setup.p_end,
            check_honest_validity(&trace).is_ok(),
            check_step_contraction(&rows, 5, 6).is_ok(),
            check_envelope(&rows, 5, 1).is_ok(),
        );
    }
}
