use std::path::Path;
use std::process::{Command, Output};

fn macsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macsim")).args(args).env("MACSIM_WORKERS", "2").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_from_config_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let config = write(
        dir.path(),
        "ac.toml",
        &format!("protocol = \"mac_ac\"\nn = 4\nseeds = 100\nepsilon = 0.015625\noutput = {:?}\n", csv.to_str().unwrap()),
    );
    let out = macsim(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn invalid_configs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bac.toml", "protocol = \"small_bac\"\nn = 5\nf = 1\ntransport = \"lossy\"\nepsilon = 0.1\nbyz = \"mimic\"\n");
    let out = macsim(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("5f+1"));
    assert_eq!(macsim(&["run", "rbc", "--config", &config]).status.code(), Some(1));
    assert_eq!(macsim(&["run", "mac_ac", "--n", "3", "--epsilon", "1.5"]).status.code(), Some(1));
}

#[test]
fn exported_traces_pass_their_checks_and_forgeries_fail() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let out = macsim(&["run", "mac_ac", "--n", "3", "--seeds", "2", "--trace-dir", traces.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let file = std::fs::read_dir(&traces).unwrap().next().unwrap().unwrap().path();
    let file = file.to_str().unwrap();
    for property in ["validity", "halving", "mover-interval", "jump-provenance"] {
        let o = macsim(&["check", property, file]);
        assert_eq!(o.status.code(), Some(0), "{property}: {}", stdout(&o));
        assert!(stdout(&o).starts_with("PASS"));
    }
    assert_eq!(macsim(&["check", "epsilon-agreement", file, "--epsilon", "0.015625"]).status.code(), Some(0));

    let text = std::fs::read_to_string(file).unwrap();
    let forged: String = text
        .lines()
        .map(|l| if l.contains("\"note\":\"output\"") { l.replacen("\"value\":\"", "\"value\":\"7", 1) } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let bad = write(dir.path(), "forged.jsonl", &forged);
    let o = macsim(&["check", "validity", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("\"witness\""));
    assert_eq!(macsim(&["check", "nonsense", file]).status.code(), Some(1));
}

#[test]
fn regularity_accepts_histories_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("sc");
    assert_eq!(macsim(&["run", "store_collect", "--n", "3", "--f", "1", "--trace-dir", traces.to_str().unwrap()]).status.code(), Some(0));
    let file = std::fs::read_dir(&traces).unwrap().next().unwrap().unwrap().path();
    assert_eq!(macsim(&["check", "regularity", file.to_str().unwrap()]).status.code(), Some(0));

    let stale = [
        r#"{"time":0,"node":0,"op":"store","edge":"inv","value":{"value":"a","seq":0}}"#,
        r#"{"time":1,"node":0,"op":"store","edge":"resp"}"#,
        r#"{"time":2,"node":1,"op":"collect","edge":"inv"}"#,
        r#"{"time":3,"node":1,"op":"collect","edge":"resp","view":{}}"#,
    ]
    .join("\n");
    let history = write(dir.path(), "stale.jsonl", &stale);
    let o = macsim(&["check", "regularity", &history]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn sweep_and_stats_report() {
    let o = macsim(&["sweep", "--protocol", "mac_ac", "--n", "4", "--seeds", "4", "--vary", "epsilon", "--values", "0.125,0.015625"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().contains(",6.0,6.0,6.0,"));

    let o = macsim(&["stats", "firstmover", "--n", "4", "--nprime", "4", "--trials", "200"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("wilson 95%"));
    assert_eq!(macsim(&["stats", "firstmover", "--n", "4", "--nprime", "4", "--trials", "50"]).status.code(), Some(1));

    let o = macsim(&["stats", "scaling", "--ns", "4,8,16", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("exponent"));
}
