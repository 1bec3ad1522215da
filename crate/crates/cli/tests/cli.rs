use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn selfsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn family_file(dir: &Path, l: u32, p: u64) -> PathBuf {
    let path = dir.join(format!("l{l}_p{p}.toml"));
    let text = format!(
        "prime = {p}\nbasis_form = \"diagonal\"\na0 = {{ unit = 1, valuation = 2 }}\n\
         a1 = {{ unit = 1, valuation = {} }}\na2 = {{ unit = -1, valuation = {} }}\n",
        2 * l + 2,
        4 * l + 2
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn invariants_reports_bound() {
    let dir = TempDir::new().unwrap();
    let f = family_file(dir.path(), 1, 3);
    let j = dir.path().join("inv.json");
    let out = selfsim(&["invariants", s(&f), "--json", s(&j)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("s = [2, 4, 6]") && text.contains("K = 1"));
    assert!(text.contains("σ(L) ≥ 3^1 = 3"));
    let v = read_json(&j);
    assert_eq!(v["K"], 1);
    assert_eq!(v["bound"], "3");

    let units = write(dir.path(), "u.toml", "prime = 5\nbasis_form = \"diagonal\"\na0 = 1\na1 = 2\na2 = -3\n");
    let out = selfsim(&["invariants", s(&units)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("K = 0") && stdout(&out).contains("= 1"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let solvable = write(dir.path(), "s.toml", "prime = 3\nbasis_form = \"diagonal\"\na0 = 9\na1 = 0\na2 = 1\n");
    assert_eq!(code(&selfsim(&["invariants", s(&solvable)])), 3);
    let garbled = write(dir.path(), "g.toml", "prime = 3\nbasis_form = [\n");
    assert_eq!(code(&selfsim(&["invariants", s(&garbled)])), 2);
    let not_prime = write(dir.path(), "n.toml", "prime = 6\nbasis_form = \"diagonal\"\na0 = 1\na1 = 1\na2 = 1\n");
    assert_eq!(code(&selfsim(&["invariants", s(&not_prime)])), 2);
    let f = family_file(dir.path(), 1, 3);
    // k must stay below the bound K.
    let out = selfsim(&["verify", s(&f), "--k", "1"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("k < K"));
    let f2 = family_file(dir.path(), 2, 3);
    assert_eq!(code(&selfsim(&["verify", s(&f2), "--k", "1", "--precision", "12"])), 5);
    assert_eq!(code(&selfsim(&["verify", s(&f2), "--k", "1", "--precision", "10"])), 3);
    assert_eq!(code(&selfsim(&["core", s(&f2), "--map", "1,2,3"])), 2);
    assert_eq!(code(&selfsim(&["invariants", "/nonexistent/file.toml"])), 1);
}

#[test]
fn verify_writes_replayable_certificate() {
    let dir = TempDir::new().unwrap();
    let f = family_file(dir.path(), 2, 3);
    let j = dir.path().join("cert.json");
    let out = selfsim(&["--jobs", "2", "verify", s(&f), "--k", "1", "--json", s(&j)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("13 subalgebras"));
    let cert = read_json(&j);
    assert_eq!(cert["schema"], "selfsim.certificate/v1");
    assert_eq!(cert["records"].as_array().unwrap().len(), 13);
    assert_eq!(cert["conclusion"], "NotSelfSimilarOfIndex");

    let out = selfsim(&["replay", s(&j)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("replay: identical"));

    // A tampered record no longer reproduces.
    let tampered = std::fs::read_to_string(&j).unwrap().replacen("\"passed\": true", "\"passed\": false", 1);
    let t = write(dir.path(), "t.json", &tampered);
    assert_eq!(code(&selfsim(&["replay", s(&t)])), 1);
}

#[test]
fn verify_larger_prime_at_index_p_squared() {
    let dir = TempDir::new().unwrap();
    let f = family_file(dir.path(), 3, 5);
    let out = selfsim(&["verify", s(&f), "--k", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn family_enumerate_core_ldiag() {
    let dir = TempDir::new().unwrap();
    let out = selfsim(&["family", "--l", "0", "--p", "3"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("(9, 9, -9)"));

    let f = family_file(dir.path(), 2, 3);
    let j = dir.path().join("enum.json");
    let out = selfsim(&["enumerate", s(&f), "--k", "1", "--json", s(&j)]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(&j)["count"], 13);

    let j = dir.path().join("core.json");
    let out = selfsim(&["core", s(&f), "--domain", "whole", "--map", "identity", "--json", s(&j)]);
    assert_eq!(code(&out), 0);
    let v = read_json(&j);
    assert_eq!(v["verdict"], "NotSimple");
    assert_eq!(v["core_index_exponent"], 0);
    let out = selfsim(&["core", s(&f), "--domain", "0,0,1,0,0,0", "--map", "zero"]);
    assert_eq!(code(&out), 0);
    // A non-morphism is rejected as a hypothesis failure.
    let out = selfsim(&["core", s(&f), "--map", "2,0,0,0,2,0,0,0,2"]);
    assert_eq!(code(&out), 4);

    let j1 = dir.path().join("a.json");
    let j2 = dir.path().join("b.json");
    for j in [&j1, &j2] {
        let out = selfsim(&["ldiag", "--trials", "25", "--seed", "4", "--p", "3", "--json", s(j)]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&j1).unwrap(), std::fs::read(&j2).unwrap());
    assert_eq!(read_json(&j1)["passes"], 25);
}
