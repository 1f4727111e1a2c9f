use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reframe-lab"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Copies the fixture bundle into a fresh directory.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["corpus.jsonl", "receptiveness.csv", "reasonability.csv", "run.toml"] {
        std::fs::copy(fixtures().join(f), dir.path().join(f)).unwrap();
    }
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(dir.join("run.toml"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn bundle(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
    }
    out
}

#[test]
fn strategies_dump_lists_instructions() {
    let o = bin().args(["strategies", "--dump"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("Paraphrase the following reply to the comment. Use at most 30 words"));
    assert!(text.contains("== gratitude"));
    let list = bin().arg("strategies").output().unwrap();
    assert_eq!(String::from_utf8(list.stdout).unwrap().lines().count(), 8);
}

#[test]
fn report_bundle_is_byte_identical_across_runs() {
    let a = workspace();
    let b = workspace();
    for dir in [&a, &b] {
        let o = run(dir.path(), &["report"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ba, bb) = (bundle(&a.path().join("out")), bundle(&b.path().join("out")));
    assert_eq!(ba.keys().collect::<Vec<_>>(), bb.keys().collect::<Vec<_>>());
    for (name, bytes) in &ba {
        assert_eq!(bytes, &bb[name], "{name} differs");
    }
    for expected in [
        "filtered.jsonl",
        "reframes.jsonl",
        "ingest_exclusions.csv",
        "generation.csv",
        "meaning_preservation.csv",
        "trigrams.csv",
        "trigram_overlap.csv",
        "receptiveness_factors.csv",
        "krippendorff_alpha.csv",
        "reasonability.csv",
        "coefficients.csv",
        "strategy_contrasts.csv",
        "emm_receptiveness.csv",
        "toxicity_contrasts.csv",
        "emm_toxicity.csv",
        "manifest.json",
    ] {
        assert!(ba.contains_key(expected), "missing {expected}");
    }
    let exclusions = String::from_utf8(ba["ingest_exclusions.csv"].clone()).unwrap();
    assert!(exclusions.contains("retained,3"), "{exclusions}");
    let reframes = String::from_utf8(ba["reframes.jsonl"].clone()).unwrap();
    assert_eq!(reframes.lines().count(), 24);
    let factors = String::from_utf8(ba["receptiveness_factors.csv"].clone()).unwrap();
    assert_eq!(factors.lines().count(), 1 + 7);
}

#[test]
fn stages_run_individually() {
    let dir = workspace();
    let p = dir.path();
    for args in [
        vec!["ingest"],
        vec!["generate", "--strategies", "hedging,gratitude"],
        vec!["generate"],
        vec!["validate"],
        vec!["trigrams", "--top", "3"],
        vec!["score-annotations", "--kind", "receptiveness"],
        vec!["score-annotations", "--kind", "reasonability"],
        vec!["analyze", "--model", "receptiveness"],
        vec!["analyze", "--model", "toxicity-interaction", "--reml"],
    ] {
        let o = run(p, &args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(p.join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["stages"]["analyze-toxicity"]["args"]["method"], "reml");
    assert!(manifest["stages"]["ingest"]["inputs"]["corpus.jsonl"].is_string());
    let gen = std::fs::read_to_string(p.join("out/generation.csv")).unwrap();
    assert!(gen.contains("gratitude,0,3,0,"), "{gen}");
}

#[test]
fn keep_subreddit_restores_excluded_pairs() {
    let dir = workspace();
    let o = run(dir.path(), &["ingest", "--keep-subreddit", "r/brexit"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let kept = std::fs::read_to_string(dir.path().join("out/filtered.jsonl")).unwrap();
    assert_eq!(kept.lines().count(), 4);
}

#[test]
fn analyze_without_annotations_is_a_data_error() {
    let dir = workspace();
    std::fs::remove_file(dir.path().join("receptiveness.csv")).unwrap();
    let o = run(dir.path(), &["analyze"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("receptiveness.csv"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let dir = workspace();
    std::fs::write(dir.path().join("run.toml"), "strategies = \"politeness\"\n").unwrap();
    let o = run(dir.path(), &["ingest"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let missing = bin().args(["--config", "/nonexistent/run.toml", "ingest"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn malformed_corpus_exits_4() {
    let dir = workspace();
    std::fs::write(dir.path().join("corpus.jsonl"), "{not json}\n").unwrap();
    let o = run(dir.path(), &["ingest"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn unreachable_provider_exits_3_and_keeps_partial_output() {
    let dir = workspace();
    let p = dir.path();
    assert!(run(p, &["ingest"]).status.success());
    let cfg = std::fs::read_to_string(p.join("run.toml")).unwrap().replace(
        "[providers.chat]\nmock = true\nretry_base_ms = 0",
        "[providers.chat]\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\ncredential_env = \"REFRAME_LAB_TEST_KEY\"\nmax_retries = 0\ntimeout_secs = 2.0\nretry_base_ms = 0",
    );
    std::fs::write(p.join("run.toml"), cfg).unwrap();
    let o = bin()
        .env("REFRAME_LAB_TEST_KEY", "k")
        .arg("--config")
        .arg(p.join("run.toml"))
        .args(["generate", "--strategies", "hedging"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(p.join("out/reframes.jsonl").is_file());

    let no_key = run(p, &["generate", "--strategies", "hedging"]);
    assert_eq!(no_key.status.code(), Some(2), "{}", stderr(&no_key));
}
