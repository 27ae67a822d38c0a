use macsim::harness::{run_seed, AdversaryKind, ExperimentConfig, Protocol};
use proptest::prelude::*;

fn config(protocol: Protocol, n: usize, f: usize, laggard: bool) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(protocol, n);
    c.f = f;
    c.crash_prob = 0.05;
    if laggard && !protocol.is_lossy() {
        c.adversary = AdversaryKind::Laggard;
    }
    if protocol.is_approximate() {
        c.epsilon = Some(0.125);
    }
    c
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    (0..Protocol::ALL.len(), 3usize..=5, any::<bool>()).prop_map(|(i, n, laggard)| {
        let protocol = Protocol::ALL[i];
        match protocol {
            Protocol::SmallBac => config(protocol, 6, 1, false),
            Protocol::SmallAc => config(protocol, n, (n - 1) / 2, false),
            _ => config(protocol, n, n - 1, laggard),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_run_passes_its_checks_and_replays(config in arb_config(), seed in any::<u64>()) {
        let a = run_seed(&config, seed, true).unwrap();
        let failed: Vec<_> = a.failures().map(|v| v.to_string()).collect();
        prop_assert!(failed.is_empty(), "{} seed {seed}: {failed:?}", config.protocol);
        let b = run_seed(&config, seed, true).unwrap();
        prop_assert_eq!(&a.row, &b.row);
        prop_assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn explicit_inputs_bound_the_outputs(bits in proptest::collection::vec(0u32..(1 << 10), 4), seed in any::<u64>()) {
        let mut c = config(Protocol::MacAc, 4, 3, seed % 2 == 1);
        c.inputs = Some(bits.iter().map(|b| format!("{b}/1024")).collect());
        let run = run_seed(&c, seed, false).unwrap();
        prop_assert_eq!(run.failures().count(), 0);
        let lo = *bits.iter().min().unwrap() as f64 / 1024.0;
        let value: f64 = run.row.value.unwrap().parse().unwrap();
        prop_assert!(value >= lo - 1e-12);
    }
}
