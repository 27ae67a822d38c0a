//! SmallAC over a link that drops 90% of datagrams; fairness forces a
//! delivery in every window of Delta rounds.

use macsim::approximate::{check_halving, phase_ranges};
use macsim::dyadic::Dyadic;
use macsim::lossy::{check_median_interval, run_small_ac};
use macsim::sim::lossy::check_fairness;
use macsim::sim::{LossPolicy, LossyChannelConfig, LossyOptions};

fn main() {
    let inputs = vec![Dyadic::zero(), "5/8".parse().unwrap(), Dyadic::one()];
    for delta in [2, 4, 8, 16] {
        let channel = LossyChannelConfig { t: 1, delta, policy: LossPolicy::Iid { loss: 0.9, duplicate: 0.0 } };
        let trace = run_small_ac(&inputs, 1, 1.0 / 256.0, 1, LossyOptions::new(channel)).unwrap();
        let rows = phase_ranges(&trace);
        println!(
            "Delta={delta:<2} rounds {:?} events {} forced {} fairness {:?} halving {:?} median {:?}",
            trace.events.last().and_then(|e| e.round),
            trace.events_applied,
            trace.forced_deliveries,
            check_fairness(&trace, delta).is_ok(),
            check_halving(&rows).is_ok(),
            check_median_interval(&rows).is_ok(),
        );
    }
}
