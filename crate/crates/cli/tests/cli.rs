use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use suprahmm_core::classify::{BankKind, LabelSet};
use suprahmm_core::eval::{EvaluationReport, ReportMeta};
use suprahmm_core::features::write_wav;
use suprahmm_core::AudioClip;

const BIN: &str = env!("CARGO_BIN_EXE_suprahmm");

const TINY_SPEC: &str = r#"{
    "num_speakers": 3, "num_train_speakers": 2, "num_texts": 4, "num_train_texts": 2,
    "replicates": 1, "min_frames": 30, "max_frames": 45, "dim": 6
}"#;

const TINY_CONFIG: &str = r#"{
    "split": {"num_train_speakers": 2, "num_train_texts": 2},
    "bank": {"hmm": {"num_mixtures": 1, "baum_welch": {"max_iters": 3}},
             "gmm": {"num_mixtures": 2}, "vq_codebook_size": 4}
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("SUPRAHMM_SEED")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.json"), TINY_SPEC).unwrap();
    fs::write(dir.path().join("cfg.json"), TINY_CONFIG).unwrap();
    ok(
        dir.path(),
        &[
            "--config",
            "cfg.json",
            "synth",
            "--spec",
            "spec.json",
            "--out",
            "corpus",
        ],
    );
    dir
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().into(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn synth_is_deterministic_and_echoes_spec() {
    let dir = setup();
    ok(
        dir.path(),
        &[
            "--config",
            "cfg.json",
            "synth",
            "--spec",
            "spec.json",
            "--out",
            "again",
        ],
    );
    assert_eq!(
        dir_bytes(&dir.path().join("corpus/features")),
        dir_bytes(&dir.path().join("again/features"))
    );
    let index: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("corpus/corpus.json")).unwrap())
            .unwrap();
    assert_eq!(index["source"]["num_texts"], 4);
    assert_eq!(index["utterances"].as_array().unwrap().len(), 6 * 3 * 4);
}

#[test]
fn seed_env_overrides_config() {
    let dir = setup();
    let out = Command::new(BIN)
        .args([
            "--config",
            "cfg.json",
            "synth",
            "--spec",
            "spec.json",
            "--out",
            "seeded",
        ])
        .current_dir(dir.path())
        .env("SUPRAHMM_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    let prov: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("seeded/provenance.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(prov["config"]["synthetic"]["seed"], 99);
    assert_ne!(
        dir_bytes(&dir.path().join("corpus/features")),
        dir_bytes(&dir.path().join("seeded/features"))
    );
}

#[test]
fn train_is_byte_identical_and_chmm3_has_no_prosody_layer() {
    let dir = setup();
    let p = dir.path();
    for out in ["bank_a", "bank_b"] {
        ok(
            p,
            &[
                "--config", "cfg.json", "train", "--corpus", "corpus", "--out", out, "--kind",
                "CSPHMM3",
            ],
        );
    }
    let a = dir_bytes(&p.join("bank_a"));
    assert_eq!(a, dir_bytes(&p.join("bank_b")));
    assert_eq!(a.len(), 6 + 2, "six models, manifest and provenance");

    ok(
        p,
        &[
            "--config", "cfg.json", "train", "--corpus", "corpus", "--out", "bank_c", "--kind",
            "CHMM3",
        ],
    );
    let neutral = fs::read_to_string(p.join("bank_c/neutral.json")).unwrap();
    assert!(neutral.contains("suprahmm/circular-hmm") && !neutral.contains("supra\""));
    let csp = fs::read_to_string(p.join("bank_a/neutral.json")).unwrap();
    assert!(csp.contains("suprahmm/csphmm3"));
}

#[test]
fn evaluate_writes_reports_and_sweep() {
    let dir = setup();
    let p = dir.path();
    ok(
        p,
        &[
            "--config", "cfg.json", "train", "--corpus", "corpus", "--out", "bank",
        ],
    );
    ok(
        p,
        &[
            "--config",
            "cfg.json",
            "evaluate",
            "--bank",
            "bank",
            "--corpus",
            "corpus",
            "--out",
            "rep",
            "--alpha-sweep",
            "0,0.25,0.5,0.75,1",
        ],
    );
    let report =
        EvaluationReport::from_json(&fs::read_to_string(p.join("rep/report.json")).unwrap())
            .unwrap();
    for t in 0..6 {
        assert!((report.confusion.column_percentage_sum(t) - 100.0).abs() < 0.1);
    }
    assert_eq!(report.meta.alpha, Some(0.5));
    assert!(
        report.meta.config["config"].is_object(),
        "provenance embedded"
    );
    for tag in ["0", "0_25", "0_5", "0_75", "1"] {
        assert!(p.join(format!("rep/report_alpha_{tag}.json")).is_file());
        assert!(p.join(format!("rep/report_alpha_{tag}.txt")).is_file());
    }
    let text = ok(p, &["report", "rep/report.json", "rep/report_alpha_0.json"]);
    assert!(text.contains("first vs second"));

    // Sweep on a non-CSPHMM3 bank is a config error.
    ok(
        p,
        &[
            "--config", "cfg.json", "train", "--corpus", "corpus", "--out", "vq", "--kind", "VQ",
        ],
    );
    let out = run(
        p,
        &[
            "--config",
            "cfg.json",
            "evaluate",
            "--bank",
            "vq",
            "--corpus",
            "corpus",
            "--out",
            "r2",
            "--alpha-sweep",
            "0.5",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn noiseless_spec_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("cfg.json"), TINY_CONFIG).unwrap();
    fs::write(
        p.join("spec.json"),
        r#"{"num_speakers": 3, "num_train_speakers": 2, "num_texts": 4, "num_train_texts": 2,
            "replicates": 1, "min_frames": 30, "max_frames": 45, "dim": 6,
            "emission_sd": 0.01, "speaker_scale": 0.0, "acoustic_separation": 3.0}"#,
    )
    .unwrap();
    ok(
        p,
        &[
            "--config",
            "cfg.json",
            "synth",
            "--spec",
            "spec.json",
            "--out",
            "corpus",
        ],
    );
    ok(
        p,
        &[
            "--config", "cfg.json", "train", "--corpus", "corpus", "--out", "bank", "--kind",
            "CHMM3",
        ],
    );
    ok(
        p,
        &[
            "--config", "cfg.json", "evaluate", "--bank", "bank", "--corpus", "corpus", "--out",
            "rep",
        ],
    );
    let report =
        EvaluationReport::from_json(&fs::read_to_string(p.join("rep/report.json")).unwrap())
            .unwrap();
    assert_eq!(report.average_accuracy, 100.0);
}

#[test]
fn classify_checks_fingerprint() {
    let dir = setup();
    let p = dir.path();
    ok(
        p,
        &[
            "--config", "cfg.json", "train", "--corpus", "corpus", "--out", "bank",
        ],
    );
    let feat = "corpus/features/sadness-spk03-txt03-r0.feat";
    let prosody = "corpus/features/sadness-spk03-txt03-r0.prosody";
    let out = ok(
        p,
        &[
            "--config",
            "cfg.json",
            "classify",
            "--bank",
            "bank",
            "--features",
            feat,
            "--prosody",
            prosody,
            "--fingerprint",
            "synthetic:dim=6",
        ],
    );
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["scores"].as_object().unwrap().len(), 6);
    assert!(doc["label"].is_string());

    let out = run(
        p,
        &[
            "--config",
            "cfg.json",
            "classify",
            "--bank",
            "bank",
            "--features",
            feat,
            "--prosody",
            prosody,
        ],
    );
    assert_eq!(out.status.code(), Some(4));
}

fn write_report(path: &Path, accuracies_pct: u32, per_label: u32) {
    let labels = LabelSet::default();
    let correct = per_label * accuracies_pct / 100;
    let mut results = Vec::new();
    for l in 0..6 {
        for i in 0..per_label {
            let pred = if i < correct { l } else { (l + 1) % 6 };
            results.push((l, pred, vec![]));
        }
    }
    let meta = ReportMeta {
        bank_kind: BankKind::Chmm3,
        alpha: None,
        seeds: vec![1],
        split: "fixture".into(),
        fingerprint: "fp".into(),
        tool_version: "test".into(),
        config: serde_json::Value::Null,
    };
    let r = EvaluationReport::from_predictions(meta, &labels, results).unwrap();
    fs::write(path, r.to_json().unwrap()).unwrap();
}

fn ttest_json(dir: &Path, args: &[&str]) -> serde_json::Value {
    let mut full = vec!["ttest"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", "t.json"]);
    ok(dir, &full);
    serde_json::from_str(&fs::read_to_string(dir.join("t.json")).unwrap()).unwrap()
}

#[test]
fn ttest_cases() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_report(&p.join("a.json"), 80, 50);
    write_report(&p.join("b.json"), 78, 50);

    let same = ttest_json(p, &["--a", "a.json", "--b", "a.json"]);
    assert_eq!(same["result"]["t_value"], 0.0);
    assert_eq!(same["result"]["significant"], false);

    let t = ttest_json(
        p,
        &[
            "--a", "a.json", "--b", "b.json", "--sd-a", "2", "--sd-b", "2",
        ],
    );
    let r = &t["result"];
    assert!((r["mean_x"].as_f64().unwrap() - 80.0).abs() < 1e-9);
    assert!((r["mean_y"].as_f64().unwrap() - 78.0).abs() < 1e-9);
    assert!((r["t_value"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let z = ttest_json(p, &["--mean-a", "5", "--mean-b", "5", "--sd-pooled", "0"]);
    assert_eq!(z["result"]["t_value"], 0.0);
    assert_eq!(z["result"]["significant"], false);

    // Constant per-emotion accuracies give SD 0; unequal means make t undefined.
    let out = run(p, &["ttest", "--a", "a.json", "--b", "b.json"]);
    assert_eq!(out.status.code(), Some(1));
}

fn tone_wav(path: &Path, freq: f64) {
    let samples = (0..8000)
        .map(|i| 0.3 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin())
        .collect();
    write_wav(path, &AudioClip::new(samples, 16_000).unwrap()).unwrap();
}

#[test]
fn extract_reports_per_file_failures() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    tone_wav(&p.join("a.wav"), 200.0);
    tone_wav(&p.join("b.wav"), 300.0);
    let header = "id,path,speaker,emotion,text,replicate\n";
    fs::write(
        p.join("good.csv"),
        format!("{header}u1,a.wav,s1,neutral,t1,0\nu2,b.wav,s1,panic,t1,0\n"),
    )
    .unwrap();
    ok(p, &["extract", "--manifest", "good.csv", "--out", "feats"]);
    ok(p, &["extract", "--manifest", "good.csv", "--out", "feats2"]);
    let a = dir_bytes(&p.join("feats/features"));
    assert_eq!(a.len(), 4, "features and prosody for two utterances");
    assert_eq!(a, dir_bytes(&p.join("feats2/features")));

    fs::write(
        p.join("bad.csv"),
        format!("{header}u1,a.wav,s1,neutral,t1,0\nu3,missing.wav,s2,panic,t1,0\n"),
    )
    .unwrap();
    let out = run(p, &["extract", "--manifest", "bad.csv", "--out", "feats3"]);
    assert_ne!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("u3") && err.contains("missing.wav"), "{err}");
    assert!(p.join("feats3/features/u1.feat").is_file());
}

#[test]
fn config_and_io_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("bad.json"), r#"{"bank": {"alpha": 2.0}}"#).unwrap();
    assert_eq!(
        run(p, &["--config", "bad.json", "synth", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(p, &["--config", "absent.json", "synth", "--out", "x"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(p, &["train", "--corpus", "nowhere", "--out", "b"])
            .status
            .code(),
        Some(3)
    );
    fs::write(p.join("garbled.json"), "{ nope").unwrap();
    assert_eq!(
        run(p, &["--config", "garbled.json", "synth", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
}
