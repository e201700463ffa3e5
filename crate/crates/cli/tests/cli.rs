use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eisen"))
}

fn jobs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../jobs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn schema() -> jsonschema::JSONSchema {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/output.schema.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    jsonschema::JSONSchema::compile(&v).expect("schema compiles")
}

fn assert_valid(s: &jsonschema::JSONSchema, v: &Value) {
    if let Err(errs) = s.validate(v) {
        let msgs: Vec<String> = errs.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("schema violations: {msgs:#?}\n{v:#}");
    }
}

#[test]
fn ke_half_period_is_zero() {
    let o = run(&["ke", "--p", "2", "--z", "1/2"]);
    assert!(o.status.success());
    let v = json(&o);
    let re: f64 = v["value"]["re"].as_str().unwrap().parse().unwrap();
    let im: f64 = v["value"]["im"].as_str().unwrap().parse().unwrap();
    assert!(re.hypot(im) < 1e-28);
    assert!(v["value"]["err_abs"].as_f64().unwrap() < 1e-29);
}

#[test]
fn every_command_matches_schema() {
    let s = schema();
    let zeta = jobs_dir().join("zeta8_zeta.toml");
    let cases: Vec<Vec<String>> = vec![
        vec!["ke", "--p", "3", "--q", "1", "--z", "1/3+1/5*i", "--s", "2"],
        vec!["dsum", "--i", "1,0", "--j", "0,0", "--z", "1/3,1/7", "--a", "1,2;0,1", "--direct"],
        vec!["cocycle-test", "--tuples", "2"],
        vec!["recognize", "--value", "1.6180339887498948482045868343656381177203091798057628621354486", "--degree", "3", "--height", "100"],
        vec!["--config", zeta.to_str().unwrap(), "--verbose-terms", "zeta"],
        vec!["--timing", "ke", "--p", "2", "--z", "1/3"],
        vec!["ke", "--d", "-5", "--p", "2", "--z", "1/3"],
    ]
    .into_iter()
    .map(|c| c.into_iter().map(String::from).collect())
    .collect();
    for c in &cases {
        let o = bin().args(c).output().unwrap();
        assert_valid(&s, &json(&o));
    }
}

#[test]
fn dsum_paths_agree() {
    let o = run(&["dsum", "--i", "2,0", "--j", "0,1", "--z", "1/3+1/5*i,2/7", "--a", "1,1+i;0,1", "--smooth", "1+i", "--direct"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!(v["path_difference"].as_f64().unwrap() < 1e-25, "{v:#}");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["ke", "--d", "-5", "--p", "2", "--z", "1/3"]).status.code(), Some(2));
    assert_eq!(run(&["ke", "--p", "2", "--z", "1"]).status.code(), Some(3));
    assert_eq!(run(&["recognize", "--value", "3.14159265358979", "--degree", "8"]).status.code(), Some(4));
    assert_eq!(run(&["zeta"]).status.code(), Some(2));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = std::fs::read_to_string(jobs_dir().join("zeta8_zeta.toml")).unwrap();
    let bad = good.replace("unit_index = 2", "unit_index = 0");
    let line = bad.lines().position(|l| l.starts_with("unit_index")).unwrap() + 1;
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, &bad).unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "zeta"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = json(&o)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains(&format!("bad.toml:{line}:")), "{msg}");

    let bad = good.replace("[units]", "[units]\nbogus = 1");
    std::fs::write(&path, &bad).unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "zeta"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(json(&o)["error"]["message"].as_str().unwrap().contains("bogus"));

    // a non-unit in the unit slot
    let bad = good.replace(r#"u = [["3", "2-2*i"]]"#, r#"u = [["3", "1"]]"#);
    std::fs::write(&path, &bad).unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "zeta"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn cache_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("ke.jsonl");
    let zeta = jobs_dir().join("zeta8_zeta.toml");
    let base = ["--config", zeta.to_str().unwrap(), "zeta"];
    let plain = run(&base);
    assert!(plain.status.success());
    let with = |extra: &[&str]| {
        let mut a = vec!["--cache", cache.to_str().unwrap()];
        a.extend_from_slice(extra);
        run(&a)
    };
    let cold = with(&base);
    let warm = with(&base);
    assert_eq!(plain.stdout, cold.stdout);
    assert_eq!(plain.stdout, warm.stdout);
    let stats = String::from_utf8_lossy(&warm.stderr);
    assert!(stats.contains("entries"), "{stats}");

    // a damaged record is skipped, the rest still serve
    let mut text = std::fs::read_to_string(&cache).unwrap();
    text.insert_str(0, "{not json\n");
    std::fs::write(&cache, text).unwrap();
    let again = with(&base);
    assert_eq!(plain.stdout, again.stdout);
    assert!(String::from_utf8_lossy(&again.stderr).contains("1 unreadable"));
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_valid(&schema(), &json(&o));
}
