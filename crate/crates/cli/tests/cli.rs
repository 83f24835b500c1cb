use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn limitlaw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limitlaw")).args(args).output().expect("spawn limitlaw")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const KDE: &str = r#"{"experiment":"kde_gap","model":{"kind":"uniform","d":1},"c":0.5,"n_ladder":[1000],
"h_box":[[0.05,0.95]],"replicates":2,"seed":4}"#;

#[test]
fn rate_on_zero_function() {
    let dir = tempfile::tempdir().unwrap();
    let gf = write(dir.path(), "g.json", r#"{"d":1,"p":2,"masses":[0,0,0,0]}"#);
    let out = limitlaw(&["rate", "--input", gf.to_str().unwrap(), "--a", "0.5", "--deterministic"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "d,p,cells,total_mass,rate_ip,a,level,in_gamma,dist_to_gamma");
    assert_eq!(lines.next().unwrap(), "1,2,4,0.0,1.0,0.5,2.0,true,0.0");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"experiment":"kde_gap","bogus":1}"#);
    let out = limitlaw(&["kde-gap", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid config"));

    let kde = write(dir.path(), "kde.json", KDE);
    let out = limitlaw(&["uldp-slope", "--config", kde.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(limitlaw(&["kde-gap"]).status.code(), Some(2));
    assert_eq!(limitlaw(&["kde-gap", "--config", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(limitlaw(&["kde-gap", "--config", kde.to_str().unwrap(), "--workers", "0"]).status.code(), Some(2));

    let gf = write(dir.path(), "g.json", r#"{"d":1,"p":2,"masses":[0,0,-1,0]}"#);
    assert_eq!(limitlaw(&["rate", "--input", gf.to_str().unwrap(), "--a", "2"]).status.code(), Some(2));
}

#[test]
fn timestamp_only_without_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let kde = write(dir.path(), "kde.json", KDE);
    let p = kde.to_str().unwrap();
    let stamped = String::from_utf8(limitlaw(&["kde-gap", "--config", p]).stdout).unwrap();
    let plain = String::from_utf8(limitlaw(&["kde-gap", "--config", p, "--deterministic"]).stdout).unwrap();
    assert!(stamped.starts_with("# generated "));
    assert!(plain.starts_with("replicate,seed,n,c,model,kernel"));
    assert_eq!(stamped.lines().skip(1).collect::<Vec<_>>(), plain.lines().collect::<Vec<_>>());
}

#[test]
fn seed_override_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let kde = write(dir.path(), "kde.json", KDE);
    let p = kde.to_str().unwrap();
    let a = limitlaw(&["kde-gap", "--config", p, "--deterministic"]).stdout;
    let b = limitlaw(&["kde-gap", "--config", p, "--deterministic", "--seed", "99"]).stdout;
    assert_ne!(a, b);

    let out = dir.path().join("res.json");
    let status = limitlaw(&["kde-gap", "--config", p, "--deterministic", "--out", out.to_str().unwrap()]).status;
    assert!(status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["experiment"], "kde_gap");
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["rows"][0]["n"], 1000);
}
