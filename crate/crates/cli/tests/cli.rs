use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kronrate")).args(args).output().expect("spawn kronrate")
}

fn run_config(command: &str, name: &str, extra: &[&str]) -> Output {
    let path = config(name);
    let mut args = vec![command, "--config", path.to_str().unwrap(), "--no-timestamp"];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn rows<'a>(v: &'a serde_json::Value, item: &str) -> Vec<&'a serde_json::Value> {
    v["rows"].as_array().unwrap().iter().filter(|r| r["item"] == item).collect()
}

#[test]
fn kappa_for_the_geometric_sequence() {
    let o = run_config("rate", "kappa_demo.toml", &["--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["schema"], "kronrate.result/1");
    let k = rows(&v, "kappa");
    assert_eq!(k.len(), 1);
    assert_eq!(k[0]["value"], "31");
    assert_eq!(k[0]["counterfunction"], "identity");
    assert!(v.get("timestamp").is_none());
    assert!(v.get("wall_time_ms").is_none());
}

#[test]
fn specker_witness_average() {
    let o = run_config("adversary", "specker_demo.toml", &["--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let w = rows(&v, "witness");
    assert_eq!(w.len(), 1);
    assert_eq!(w[0]["value"], "29/48");
}

#[test]
fn generous_candidate_has_no_witness() {
    let o = run_config("adversary", "generous_candidate.toml", &["--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(rows(&v, "witness").is_empty());
    assert_eq!(rows(&v, "no_witness").len(), 3);
}

#[test]
fn strong_law_schedule_refutes_and_reports_variance() {
    let o = run_config("adversary", "strong_law_schedule.toml", &["--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let var = rows(&v, "variance_sum");
    assert_eq!(var[0]["passed"], true);
    assert_eq!(rows(&v, "witness").len(), 4);
    assert!(rows(&v, "witness").iter().all(|r| r["passed"] == true));
    assert!(rows(&v, "index_bound").iter().all(|r| r["passed"] == true));
}

#[test]
fn kronecker_suite_passes() {
    let o = run_config("verify", "kronecker_suite.toml", &["--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["summary"]["checks"], 16);
    assert_eq!(v["summary"]["failed"], 0);
}

#[test]
fn chung_suite_passes_by_monte_carlo() {
    let o = run_config("verify", "chung_suite.toml", &["--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = json(&o);
    let tails = rows(&v, "tail");
    assert_eq!(tails.len(), 3);
    for t in tails {
        assert_eq!(t["value"], "319");
        assert_eq!(t["probability"]["kind"], "estimate");
        assert_eq!(t["probability"]["trials"], 10000);
        assert_eq!(t["passed"], true);
    }
}

#[test]
fn a_wrong_rate_exits_one() {
    let o = run_config("verify", "wrong_rate.toml", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn an_empty_grid_is_an_empty_record() {
    let o = run_config("rate", "empty_grid.toml", &["--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["rows"].as_array().unwrap().is_empty());
    assert_eq!(v["summary"]["checks"], 0);
}

#[test]
fn an_unknown_weight_family_exits_two() {
    let o = run_config("rate", "bad_weights.toml", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cubic"));
}

#[test]
fn unknown_keys_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.toml");
    std::fs::write(&path, "quantities = [\"kappa\"]\n\n[grid]\neps = [\"1\"]\nepsilon = [\"1\"]\n").unwrap();
    let o = run(&["rate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
}

#[test]
fn a_missing_config_exits_two() {
    let o = run(&["rate", "--config", "/nonexistent/kronrate.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_is_reproducible_without_timestamp() {
    for format in ["table", "csv", "json"] {
        let a = run_config("verify", "chung_suite.toml", &["--format", format]);
        let b = run_config("verify", "chung_suite.toml", &["--format", format]);
        assert_eq!(a.stdout, b.stdout, "{format}");
    }
}

#[test]
fn timestamp_is_recorded_by_default() {
    let path = config("kappa_demo.toml");
    let o = run(&["rate", "--config", path.to_str().unwrap(), "--format", "json"]);
    let v = json(&o);
    assert!(v["timestamp"].is_u64());
    assert!(v["wall_time_ms"].is_u64());
}

#[test]
fn csv_has_a_header_and_one_line_per_row() {
    let o = run_config("rate", "kappa_demo.toml", &["--format", "csv"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("schema,command,config_hash,item"));
    let body: Vec<_> = lines.collect();
    assert_eq!(body.len(), 3);
    assert!(body[0].contains(",kappa,1,,identity,31,"));
}

#[test]
fn out_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("record.json");
    let o = run_config("rate", "kappa_demo.toml", &["--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows(&v, "kappa")[0]["value"], "31");
}

#[test]
fn seed_and_trials_flags_override_the_config() {
    let o = run_config("verify", "chung_suite.toml", &["--format", "json", "--seed", "7", "--trials", "2000"]);
    let v = json(&o);
    let t = rows(&v, "tail");
    assert_eq!(t[0]["probability"]["seed"], 7);
    assert_eq!(t[0]["probability"]["trials"], 2000);
}

#[test]
fn config_hash_tracks_the_file_contents() {
    let a = json(&run_config("rate", "kappa_demo.toml", &["--format", "json"]));
    let b = json(&run_config("rate", "empty_grid.toml", &["--format", "json"]));
    assert_eq!(a["config_hash"].as_str().unwrap().len(), 64);
    assert_ne!(a["config_hash"], b["config_hash"]);
}
