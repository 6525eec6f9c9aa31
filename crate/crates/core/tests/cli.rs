use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use newsrisk::pipeline::Manifest;

const BIN: &str = env!("CARGO_BIN_EXE_newsrisk");

fn newsrisk(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, out: &str) {
    let toml = format!(
        r#"
[paths]
articles = "data/articles.jsonl"
universe = "data/universe.csv"
prices = "data/prices.csv"
marketcaps = "data/marketcaps.csv"
output = "{out}"

[window]
start = "2011Q1"
end = "2012Q4"
"#
    );
    fs::write(dir.join(format!("{out}.toml")), toml).unwrap();
}

fn with_fixture() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    let out = newsrisk(tmp.path(), &["fixture", "--dir", "data"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    tmp
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn downstream_stage_without_upstream_exits_2() {
    let tmp = with_fixture();
    write_config(tmp.path(), "out");
    let out = newsrisk(tmp.path(), &["--config", "out.toml", "networks"]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("newsrisk parse"), "{stderr}");

    let out = newsrisk(tmp.path(), &["--config", "out.toml", "report"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_parameters_exit_1() {
    let tmp = with_fixture();
    write_config(tmp.path(), "out");
    for args in [
        &["--config", "out.toml", "--lambda", "1.5", "parse"][..],
        &["--config", "out.toml", "--alpha", "-1", "parse"][..],
        &[
            "--config",
            "out.toml",
            "--quarters",
            "2012Q4..2011Q1",
            "parse",
        ][..],
        &["--config", "missing.toml", "parse"][..],
    ] {
        let out = newsrisk(tmp.path(), args);
        assert_eq!(code(&out), 1, "{args:?}");
    }
    fs::write(tmp.path().join("bad.toml"), "unknown_key = 3\n").unwrap();
    let out = newsrisk(tmp.path(), &["--config", "bad.toml", "parse"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_raw_input_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "out");
    let out = newsrisk(tmp.path(), &["--config", "out.toml", "parse"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn staged_run_matches_run_all_and_reruns_are_identical() {
    let tmp = with_fixture();
    write_config(tmp.path(), "staged");
    write_config(tmp.path(), "whole");
    for stage in ["parse", "networks", "rank", "risk", "backtest", "report"] {
        let out = newsrisk(tmp.path(), &["--config", "staged.toml", stage]);
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = newsrisk(tmp.path(), &["--config", "whole.toml", "run-all"]);
    assert!(out.status.success());
    let first = snapshot(&tmp.path().join("whole"));
    assert_eq!(snapshot(&tmp.path().join("staged")), first);

    let out = newsrisk(
        tmp.path(),
        &["--config", "whole.toml", "--threads", "1", "run-all"],
    );
    assert!(out.status.success());
    assert_eq!(snapshot(&tmp.path().join("whole")), first);
}

#[test]
fn rerunning_one_stage_leaves_upstream_untouched() {
    let tmp = with_fixture();
    write_config(tmp.path(), "out");
    let out = newsrisk(tmp.path(), &["--config", "out.toml", "run-all"]);
    assert!(out.status.success());
    let dir = tmp.path().join("out");
    let before = snapshot(&dir);
    let manifest_before = Manifest::load(&dir).unwrap();

    let out = newsrisk(
        tmp.path(),
        &["--config", "out.toml", "--alpha", "0.5", "rank"],
    );
    assert!(out.status.success());
    let after = snapshot(&dir);
    let manifest_after = Manifest::load(&dir).unwrap();

    for (name, bytes) in &before {
        let unchanged = after.iter().any(|(n, b)| n == name && b == bytes);
        let upstream = ["occurrences.csv", "matches.csv", "nodes.csv", "edges.csv"];
        if upstream.contains(&name.as_str()) {
            assert!(unchanged, "{name} changed");
        }
    }
    assert_ne!(
        manifest_before.stages["rank"].config_hash,
        manifest_after.stages["rank"].config_hash
    );
    assert_eq!(
        manifest_before.stages["parse"],
        manifest_after.stages["parse"]
    );
    assert_eq!(
        manifest_before.stages["networks"],
        manifest_after.stages["networks"]
    );
    assert_ne!(
        manifest_before.stages["rank"].outputs["centrality.csv"].sha256,
        manifest_after.stages["rank"].outputs["centrality.csv"].sha256
    );
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&newsrisk(tmp.path(), &["no-such-command"])), 1);
    assert_eq!(code(&newsrisk(tmp.path(), &["parse", "--alpha", "abc"])), 1);
    assert_eq!(code(&newsrisk(tmp.path(), &["--help"])), 0);
}
