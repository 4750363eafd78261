use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_balayage"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SINGLE_BALL: &str = r#"{
  "schema_version": 1,
  "experiment": "balayage",
  "kernel": { "dim": 3, "alpha": 2.0 },
  "domain": { "kind": "full_space", "dim": 3 },
  "nu": [{ "point": [2.0, 0.0, 0.0], "weight": 1.0 }],
  "mc": { "samples": 4000, "seed": 7 },
  "params": { "balls": [{ "center": [0.0, 0.0, 0.0], "radius": 1.0 }] }
}"#;

#[test]
fn run_writes_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SINGLE_BALL);
    let out = dir.path().join("out");
    let o = bin().arg("run").arg(&cfg).arg("--out-dir").arg(&out).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("balayage.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "balayage");
    let csv = std::fs::read_to_string(out.join("balayage.stages.csv")).unwrap();
    assert!(csv.starts_with("stage,level,function,value,stderr,samples\n"));
    assert!(!csv.contains('\r'));
    assert!(out.join("balayage.summary.txt").exists());
}

#[test]
fn subcommand_must_match_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SINGLE_BALL);
    let o = bin().arg("balayage").arg(&cfg).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = bin().arg("harnack").arg(&cfg).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn overlapping_balls_are_rejected_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = SINGLE_BALL.replace(
        r#""balls": [{ "center": [0.0, 0.0, 0.0], "radius": 1.0 }]"#,
        r#""balls": [{ "center": [0.0, 0.0, 0.0], "radius": 1.0 }, { "center": [1.5, 0.0, 0.0], "radius": 1.0 }]"#,
    );
    let cfg = write(dir.path(), "c.json", &text);
    let o = bin().arg("run").arg(&cfg).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_keys_name_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &SINGLE_BALL.replace("\"mc\"", "\"monte_carlo\""));
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 7"), "{}", stderr(&o));
}

#[test]
fn validate_accepts_every_shipped_config() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let o = bin().arg("validate").arg(&path).output().unwrap();
        assert_eq!(code(&o), 0, "{}: {}", path.display(), stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok"));
    }
}

#[test]
fn failed_checks_exit_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("grid-approx-riesz.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["params"]["options"]["relative_tolerance"] = serde_json::json!(1e-9);
    v["params"]["options"]["ladder"] = serde_json::json!([2, 4]);
    let cfg = write(dir.path(), "c.json", &v.to_string());
    let o = bin().args(["run", "--samples", "2000", "--format", "json"]).arg(&cfg).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(dir.path().join("grid-approx.json").exists());
    assert!(!dir.path().join("grid-approx.stages.csv").exists());
}

#[test]
fn reports_do_not_depend_on_the_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("skorokhod-riesz.json");
    let mut reports = Vec::new();
    for workers in ["1", "2"] {
        let out = dir.path().join(workers);
        let o = bin()
            .args(["run", "--samples", "3000", "--seed", "21", "--workers", workers])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(&out)
            .output()
            .unwrap();
        assert!(code(&o) == 0 || code(&o) == 3, "{}", stderr(&o));
        reports.push(std::fs::read(out.join("skorokhod.json")).unwrap());
        reports.push(std::fs::read(out.join("skorokhod.stages.csv")).unwrap());
    }
    assert!(reports[0] == reports[2], "JSON reports differ");
    assert!(reports[1] == reports[3], "CSV reports differ");
}
