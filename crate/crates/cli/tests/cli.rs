use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfl")).args(args).env("NFL_THREADS", "1").output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, train: &str) {
    let out = nfl(&["gen-task", "--train", train, "--test", "20", "--dim", "8", "--seed", "3", "--out", path(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn edit_manifest(dir: &Path, f: impl FnOnce(&mut Value)) {
    let p = dir.join("manifest.json");
    let mut m: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    f(&mut m);
    fs::write(&p, serde_json::to_string_pretty(&m).unwrap()).unwrap();
}

#[test]
fn gen_task_is_seeded() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    gen(a.path(), "10");
    gen(b.path(), "10");
    for f in ["manifest.json", "data.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let m: Value = serde_json::from_slice(&fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["examples"].as_array().unwrap().len(), 10);
}

#[test]
fn abduce_stage_stops_after_possibilities() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "10");
    let out = t.path().join("run");
    let o = nfl(&["run", "--task", path(&t.path().join("manifest.json")), "--stages", "abduce", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("possibilities.json").exists());
    assert!(out.join("report.json").exists());
    for f in ["space.json", "model.json", "solution.json"] {
        assert!(!out.join(f).exists(), "{f}");
    }
}

#[test]
fn rerun_report_is_byte_identical() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "40");
    let task = t.path().join("manifest.json");
    let run = |name: &str| {
        let out = t.path().join(name);
        let o = nfl(&["run", "--task", path(&task), "--epochs", "2", "--hidden", "16", "--seed", "1", "--out", path(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn resumed_run_matches_scratch() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "40");
    let task = t.path().join("manifest.json");
    let args = |out: &Path, extra: &[&str]| {
        let mut v: Vec<String> = ["run", "--task", path(&task), "--epochs", "2", "--hidden", "16", "--out", path(out)]
            .iter()
            .map(|s| s.to_string())
            .collect();
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    let call = |v: Vec<String>| {
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        let o = nfl(&refs);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    call(args(&a, &[]));
    call(args(&b, &["--stages", "space"]));
    call(args(&b, &["--resume"]));
    for f in ["space.json", "model.json", "solution.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unsatisfiable_task_exits_2() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "5");
    edit_manifest(t.path(), |m| {
        let bg = m["background"].as_str().unwrap().to_string();
        m["background"] = Value::String(format!("{bg}:- nn(1,X)."));
    });
    let o = nfl(&["abduce", "--task", path(&t.path().join("manifest.json")), "--out", path(&t.path().join("p.json"))]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_errors_exit_3() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "5");
    let task = t.path().join("manifest.json");
    let out = t.path().join("p.json");
    assert_eq!(nfl(&["abduce", "--task", path(&task), "--no-such-flag"]).status.code(), Some(3));
    assert_eq!(nfl(&["abduce", "--task", path(&t.path().join("missing.json")), "--out", path(&out)]).status.code(), Some(3));
    edit_manifest(t.path(), |m| m["schema_version"] = Value::from(99));
    assert_eq!(nfl(&["abduce", "--task", path(&task), "--out", path(&out)]).status.code(), Some(3));
    edit_manifest(t.path(), |m| {
        m["schema_version"] = Value::from(1);
        m["modeb"] = Value::from(vec!["plus(var(n)-, var(n)-"]);
    });
    assert_eq!(nfl(&["abduce", "--task", path(&task), "--out", path(&out)]).status.code(), Some(3));
}
