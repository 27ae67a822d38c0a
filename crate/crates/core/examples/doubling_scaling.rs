//! Total broadcasts of consensus with the doubling size estimate, and the
//! fitted log-log growth exponent.

use macsim::harness::{run_experiment, ExperimentConfig, Protocol, Seeds};
use macsim::stats::fit_scaling;

fn main() {
    let ns = [4usize, 8, 16, 32];
    let mut means = Vec::new();
    for &n in &ns {
        let mut config = ExperimentConfig::new(Protocol::Rbc2, n);
        config.seeds = Seeds::Count(50);
        let report = run_experiment(&config).unwrap();
        let rows: Vec<_> = report.rows().collect();
        let mean = rows.iter().map(|r| r.broadcasts as f64).sum::<f64>() / rows.len() as f64;
        let originals = rows.iter().filter_map(|r| r.n_original).sum::<u64>() as f64 / rows.len() as f64;
        println!("n={n:<3} mean broadcasts {mean:8.1}  mean originals {originals:6.1}");
        means.push(mean);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    println!("exponent {:.3}", fit_scaling(&xs, &means).unwrap());
}
