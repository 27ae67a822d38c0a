//! Export a trace as JSON lines, read it back, and run the checkers on the
//! reloaded copy, the same path the `check` subcommand takes.

use num_rational::BigRational;

use macsim::approximate::{check_halving, phase_ranges, run_mac_ac};
use macsim::checkers::{check_epsilon_agreement, check_validity, load_trace, phase_verdict, Observed};
use macsim::dyadic::Dyadic;
use macsim::sim::{read_jsonl, Decision, MacOptions, Note, RandomAdversary};

fn main() {
    let inputs: Vec<Dyadic> = ["0", "1", "1/2"].iter().map(|s| s.parse().unwrap()).collect();
    let trace = run_mac_ac(&inputs, 0.125, 5, MacOptions::default(), &mut RandomAdversary::new(5)).unwrap();
    let text = trace.to_jsonl_string();
    println!("{} lines, first: {}", text.lines().count(), text.lines().next().unwrap());

    let loaded = load_trace(&read_jsonl(text.as_bytes()).unwrap()).unwrap();
    let obs = Observed::from_trace(&loaded);
    println!("{}", check_validity(&obs));
    println!("{}", check_epsilon_agreement(&obs, &BigRational::from_float(0.125).unwrap()));
    println!("{}", phase_verdict("halving", &loaded, check_halving(&phase_ranges(&loaded))));

    // A forged output outside the input range is caught with a witness.
    let mut forged = loaded.clone();
    for r in forged.notes.iter_mut().filter(|r| r.node == 1) {
        if let Note::Output { decision, .. } = &mut r.note {
            *decision = Decision::Value { value: Dyadic::from_int(2) };
        }
    }
    let verdict = check_validity(&Observed::from_trace(&forged));
    println!("{verdict}");
    println!("{}", serde_json::to_string(&verdict).unwrap());
}
