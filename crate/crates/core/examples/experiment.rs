//! The experiment harness: a TOML config, one CSV row per seed, and a
//! sweep over epsilon.

use macsim::harness::{run_experiment, sweep, write_sweep, ExperimentConfig, SweepParam};

const CONFIG: &str = r#"
protocol = "small_ac"
n = 5
f = 2
transport = "lossy"
seeds = 8
epsilon = 0.001
Delta = 6
loss = 0.5
"#;

fn main() {
    let config = ExperimentConfig::from_toml(CONFIG).unwrap();
    let report = run_experiment(&config).unwrap();
    report.write_csv(std::io::stdout()).unwrap();
    println!("failed checks: {}", report.failures().len());

    let values: Vec<f64> = (2..=8).map(|k| 10f64.powf(-f64::from(k) / 2.0)).collect();
    let rows = sweep(&config, SweepParam::Epsilon, &values).unwrap();
    write_sweep(&rows, std::io::stdout()).unwrap();
}
