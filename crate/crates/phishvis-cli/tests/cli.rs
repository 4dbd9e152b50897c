//! CLI behavior: output formats, the visualize/train/evaluate round trip
//! at toy scale, and flag handling.

use std::process::{Command, Output};

use httpstub::StubServer;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phishvis"))
}

fn run(home: &std::path::Path, args: &[&str]) -> Output {
    binary()
        .env("PHISHVIS_HOME", home)
        .args(args)
        .output()
        .expect("spawn phishvis")
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "command failed ({}):\n{}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn visualize_writes_a_decodable_128px_png() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("page.html");
    std::fs::write(&input, b"<html><body>hello</body></html>").unwrap();
    let output_png = dir.path().join("page.png");

    let out = run(
        dir.path(),
        &[
            "visualize",
            input.to_str().unwrap(),
            "-o",
            output_png.to_str().unwrap(),
        ],
    );
    assert_ok(&out);

    let bytes = std::fs::read(&output_png).unwrap();
    let image = phishvis::bytevis::decode_png(&bytes).unwrap();
    assert_eq!(image.side(), 128);
}

#[test]
fn visualize_supports_other_orders_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("page.html");
    std::fs::write(&input, b"abc").unwrap();
    let output_png = dir.path().join("tiny.png");

    let out = run(
        dir.path(),
        &[
            "--json",
            "visualize",
            input.to_str().unwrap(),
            "-o",
            output_png.to_str().unwrap(),
            "--order",
            "3",
        ],
    );
    assert_ok(&out);
    let json: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(json["side"], 8);
    assert_eq!(json["bytes_in"], 3);
    let image = phishvis::bytevis::decode_png(&std::fs::read(&output_png).unwrap()).unwrap();
    assert_eq!(image.side(), 8);
}

#[test]
fn toy_corpus_train_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let manifest = corpus.join("manifest.jsonl");
    let model = dir.path().join("toy.pvm");

    let out = run(
        dir.path(),
        &[
            "--json",
            "gen-corpus",
            "-o",
            corpus.to_str().unwrap(),
            "--per-category",
            "5",
            "--seed",
            "3",
        ],
    );
    assert_ok(&out);
    let gen: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(gen["samples"], 50);
    assert_eq!(gen["train"], 40);
    assert_eq!(gen["test"], 10);
    assert_eq!(gen["phishing"], 25);

    // tiny but real training run; 8px inputs keep it fast
    let out = run(
        dir.path(),
        &[
            "--json",
            "train",
            "--manifest",
            manifest.to_str().unwrap(),
            "-o",
            model.to_str().unwrap(),
            "--steps",
            "60",
            "--seed",
            "3",
            "--input-side",
            "8",
        ],
    );
    assert_ok(&out);
    let trained: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(trained["samples"], 40);
    assert_eq!(trained["steps"], 60);

    let out = run(
        dir.path(),
        &[
            "--json",
            "evaluate",
            "--manifest",
            manifest.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
            "--split",
            "test",
        ],
    );
    assert_ok(&out);
    let report: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    let counts = &report["overall"]["counts"];
    let total = counts["tp"].as_u64().unwrap()
        + counts["tn"].as_u64().unwrap()
        + counts["fp"].as_u64().unwrap()
        + counts["fn"].as_u64().unwrap();
    assert_eq!(total, 10);
    // the toy task separates on size alone; even 60 steps should do well
    assert!(report["overall"]["accuracy"].as_f64().unwrap() >= 0.8);

    // human-readable evaluation prints percentages
    let out = run(
        dir.path(),
        &[
            "evaluate",
            "--manifest",
            manifest.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
        ],
    );
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("overall: accuracy"), "{text}");
    assert!(text.contains('%'), "{text}");
}

#[test]
fn check_reports_fresh_then_cached_in_human_output() {
    let stub = StubServer::start();
    stub.route_ok("/x", b"<html><body>content</body></html>");
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.pvm");
    phishvis::classifier::save_model(
        &phishvis::classifier::init_model(&phishvis::classifier::TrainConfig::default()).unwrap(),
        &model,
    )
    .unwrap();

    let out = run(
        dir.path(),
        &["check", &stub.url("/x"), "--model", model.to_str().unwrap()],
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("(fresh)"));

    let out = run(
        dir.path(),
        &["check", &stub.url("/x"), "--model", model.to_str().unwrap()],
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("(cached)"));

    // --force refetches
    let out = run(
        dir.path(),
        &[
            "check",
            &stub.url("/x"),
            "--model",
            model.to_str().unwrap(),
            "--force",
        ],
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("(fresh)"));
    assert_eq!(stub.hits(), 2);
}

#[test]
fn unsupported_scheme_exits_with_the_fetch_code() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.pvm");
    phishvis::classifier::save_model(
        &phishvis::classifier::init_model(&phishvis::classifier::TrainConfig::default()).unwrap(),
        &model,
    )
    .unwrap();
    let out = run(
        dir.path(),
        &["check", "ftp://example.org/", "--model", model.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheme"));
}

#[test]
fn missing_arguments_exit_with_usage_code() {
    let out = binary().arg("train").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
