use std::path::Path;
use std::process::Command;

use clap::Parser;
use serde_json::Value;
use tkey::cli::{run, Cli, Env, Failure};
use tkey::clock::ManualClock;

const T0: u64 = 58_000_000;

fn tkey(home: &Path, args: &[&str]) -> Result<String, Failure> {
    let cli = Cli::try_parse_from(std::iter::once("tkey").chain(args.iter().copied())).expect("arguments parse");
    let clock = ManualClock::new(T0 * 30);
    let mut out = Vec::new();
    let mut env = Env { home: home.to_path_buf(), clock: &clock, out: &mut out };
    run(cli, &mut env)?;
    Ok(String::from_utf8(out).unwrap())
}

fn field<'a>(out: &'a str, name: &str) -> &'a str {
    out.lines().find_map(|l| l.strip_prefix(name)).map(str::trim).unwrap_or_else(|| panic!("no {name} in {out}"))
}

fn enroll(home: &Path) -> String {
    let at = T0.to_string();
    let args = ["enroll", "--chain-length", "1000", "--at", &at, "--scheme", "naive", "--checkpoints", "4", "--cred-id", "alice"];
    tkey(home, &args).unwrap()
}

#[test]
fn enroll_otp_verify() {
    let home = tempfile::tempdir().unwrap();
    let out = enroll(home.path());
    assert!(out.starts_with("tkey://enroll?v=1&"), "{out}");
    assert!(out.contains(&format!("registered alice: slots {T0} to {}", T0 + 1000)));

    let slot = (T0 + 5).to_string();
    let out = tkey(home.path(), &["otp", "--at", &slot]).unwrap();
    let otp = field(&out, "otp").to_string();
    assert_eq!(otp.len(), 26);
    assert_eq!(field(&out, "words").split(' ').count(), 12);
    assert_eq!(field(&out, "payload"), format!("tkey://otp?v=1&t={slot}&p={otp}"));

    let out = tkey(home.path(), &["verify", "--cred-id", "alice", "--otp", &otp, "--at", &slot]).unwrap();
    assert!(out.starts_with(&format!("accepted slot {slot}")), "{out}");
    let replay = tkey(home.path(), &["verify", "--cred-id", "alice", "--otp", &otp, "--at", &slot]).unwrap_err();
    assert_eq!(replay.code, 1, "{}", replay.message);

    // Words, two slots late, inside the default window.
    let slot = (T0 + 7).to_string();
    let out = tkey(home.path(), &["otp", "--at", &slot]).unwrap();
    let words = field(&out, "words").to_string();
    let late = (T0 + 9).to_string();
    let out = tkey(home.path(), &["verify", "--cred-id", "alice", "--otp", &words, "--at", &late]).unwrap();
    assert!(out.starts_with(&format!("accepted slot {slot}")), "{out}");

    let again = tkey(home.path(), &["otp", "--at", &slot]).unwrap_err();
    assert_eq!(again.code, 1);
    let unknown = tkey(home.path(), &["verify", "--cred-id", "bob", "--otp", &otp]).unwrap_err();
    assert_eq!(unknown.code, 2);
}

#[test]
fn verbose_otp_reports_walk_length() {
    let home = tempfile::tempdir().unwrap();
    enroll(home.path());
    // Checkpoints at offsets 200, 400, 600, 800: slot 1 walks down from 200.
    let out = tkey(home.path(), &["otp", "--at", &(T0 + 1).to_string(), "-v"]).unwrap();
    assert_eq!(field(&out, "hashes"), format!("199 (from slot {})", T0 + 200));
    assert!(field(&out, "replan").ends_with("4 checkpoints"), "{out}");
}

#[test]
fn enroll_refuses_to_overwrite_state() {
    let home = tempfile::tempdir().unwrap();
    enroll(home.path());
    let err = tkey(home.path(), &["enroll", "--chain-length", "100"]).unwrap_err();
    assert_eq!(err.code, 2);
    assert!(err.message.contains("--force"));
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn experiments_append_results() {
    let home = tempfile::tempdir().unwrap();
    let results = home.path().join("out/results.jsonl");
    let r = results.to_str().unwrap();
    tkey(home.path(), &["simulate", "lemmas", "--N", "4096", "--k", "8", "--trials", "20", "--results", r]).unwrap();
    tkey(home.path(), &["simulate", "attacks", "--N", "65536", "--k", "8", "--T", "256,512", "--trials", "50", "--results", r])
        .unwrap();
    let out = tkey(
        home.path(),
        &["simulate", "checkpoints", "--chain-length", "20000", "--lambda", "0.001", "--q", "5", "--trials", "5", "--results", r],
    )
    .unwrap();
    assert!(out.contains("results appended"), "{out}");
    tkey(home.path(), &["bench", "--k", "4096", "--checkpoints", "6", "--worst", "2", "--logins", "3", "--results", r]).unwrap();

    let recs = records(&results);
    for name in ["image_size", "collision", "preimage_mean", "preimage_variance", "preimage_tail"] {
        assert!(recs.iter().any(|v| v["experiment"] == name), "missing {name}");
    }
    let bench = recs.iter().find(|v| v["experiment"] == "bench").expect("bench record");
    assert_eq!(bench["result"]["setup_hashes"], 4096);
    assert_eq!(bench["result"]["verify_hashes"], 4096);
    for v in &recs {
        assert!(v["config"].is_object() && v["result"].is_object() && v["unix_time"].is_u64(), "{v}");
    }
}

fn bin(home: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tkey")).args(args).env("TKEY_HOME", home).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let home = tempfile::tempdir().unwrap();
    let at = T0.to_string();
    let out = bin(home.path(), &["enroll", "--chain-length", "500", "--at", &at, "--cred-id", "alice"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(home.path().join("prover.state").exists());
    assert!(home.path().join("credentials.log").exists());

    let slot = (T0 + 3).to_string();
    let out = bin(home.path(), &["otp", "--at", &slot]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let otp = field(&stdout, "otp").to_string();

    let verify = |p: &str| bin(home.path(), &["verify", "--cred-id", "alice", "--otp", p, "--at", &slot]).status.code();
    assert_eq!(verify(&"a".repeat(26)), Some(1));
    assert_eq!(verify(&otp), Some(0));
    assert_eq!(verify(&otp), Some(1));
    assert_eq!(verify("short"), Some(2));
    assert_eq!(bin(home.path(), &["verify", "--bogus"]).status.code(), Some(2));
}
