use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use suprahmm_core::classify::{BankKind, ModelBank, Observation};
use suprahmm_core::corpus::{
    make_split, read_corpus, read_manifest, synthesize_corpus, write_corpus, LoadedCorpus,
};
use suprahmm_core::eval::{
    evaluate_alpha_sweep, evaluate_split, pooled_sd, sample_sd, students_t, EvaluationReport,
    ReportMeta, SignificanceResult,
};
use suprahmm_core::features::{
    extract_features, prosody_track, read_features, read_wav, ProsodyTrack,
};
use suprahmm_core::{Error, SyntheticSpec, VERSION};

use crate::config::ExperimentConfig;

macro_rules! emitln {
    ($($arg:tt)*) => {
        emit(&(format!($($arg)*) + "\n"))?
    };
}
use crate::{Cli, Command, ModelArgs, TtestArgs};

/// Some inputs failed while the rest were processed.
#[derive(Debug)]
struct PartialFailure(usize);

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} input(s) failed", self.0)
    }
}

impl std::error::Error for PartialFailure {}

/// 2 config, 3 I/O, 4 incompatible features, 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::InvalidConfig(_) | Error::UnsupportedOrder(_) => 2,
                Error::Io { .. }
                | Error::MissingAudio(_)
                | Error::UnsupportedAudio(_)
                | Error::Wav(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Format { .. } => 3,
                Error::IncompatibleFeatures { .. } => 4,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}

/// The error chain, skipping causes already spelled out by their parent.
pub fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

/// Prints to stdout, treating a closed pipe as success.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
}

fn provenance<'a>(command: &'static str, cfg: &'a ExperimentConfig) -> Provenance<'a> {
    Provenance {
        tool: "suprahmm",
        version: VERSION,
        command,
        seed: cfg.bank.seed,
        config: cfg,
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    match cli.command {
        Command::Extract { manifest, out } => extract(cfg.finalize()?, &manifest, out),
        Command::Synth { spec, out } => {
            if let Some(path) = spec {
                let text = fs::read_to_string(&path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                cfg.synthetic = serde_json::from_str::<SyntheticSpec>(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            }
            synth(cfg.finalize()?, out)
        }
        Command::Train { corpus, out, model } => {
            train(apply_model_args(cfg, &model)?, &corpus, out)
        }
        Command::Evaluate {
            bank,
            corpus,
            out,
            alpha_sweep,
        } => {
            if let Some(sweep) = alpha_sweep {
                cfg.alpha_sweep = sweep;
            }
            evaluate(cfg.finalize()?, &bank, &corpus, out)
        }
        Command::Classify {
            bank,
            wav,
            features,
            prosody,
            fingerprint,
        } => classify(cfg.finalize()?, &bank, wav, features, prosody, fingerprint),
        Command::Ttest(args) => ttest(&args),
        Command::Report { reports, out } => report(&reports, out),
    }
}

fn apply_model_args(
    mut cfg: ExperimentConfig,
    model: &ModelArgs,
) -> anyhow::Result<ExperimentConfig> {
    if let Some(kind) = model.kind {
        cfg.bank.kind = kind;
    }
    if let Some(alpha) = model.alpha {
        cfg.bank.alpha = alpha;
    }
    cfg.finalize()
}

fn extract(
    cfg: ExperimentConfig,
    manifest: &Path,
    out: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let out = cfg.output_dir(out)?;
    let labels = cfg.label_set()?;
    let records = read_manifest(manifest, &labels)?;
    let results: Vec<Result<Observation, Error>> = records
        .par_iter()
        .map(|r| {
            let path = r.path.as_ref().ok_or(Error::EmptyInput("audio path"))?;
            if !path.is_file() {
                return Err(Error::MissingAudio(path.clone()));
            }
            let clip = read_wav(path, cfg.features.sample_rate_hz)?;
            let features = extract_features(&clip, &cfg.features)?;
            let track = prosody_track(&clip, &cfg.features)?;
            Observation::new(features, Some(track))
        })
        .collect();
    let mut ok_records = Vec::new();
    let mut observations = Vec::new();
    let mut failures = 0;
    for (r, res) in records.iter().zip(results) {
        match res {
            Ok(obs) => {
                ok_records.push(r.clone());
                observations.push(obs);
            }
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e}", r.id);
            }
        }
    }
    if !observations.is_empty() {
        let source = json!({ "provenance": provenance("extract", &cfg) });
        write_corpus(
            &out,
            &cfg.features.fingerprint(),
            &labels,
            source,
            &ok_records,
            &observations,
        )?;
    }
    emitln!(
        "extracted {} of {} utterances into {}",
        observations.len(),
        records.len(),
        out.display()
    );
    if failures > 0 {
        return Err(PartialFailure(failures).into());
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(cfg: ExperimentConfig, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let out = cfg.output_dir(out)?;
    let corpus = synthesize_corpus(&cfg.synthetic)?;
    corpus.write(&out)?;
    write_json(&out.join("provenance.json"), &provenance("synth", &cfg))?;
    let split = make_split(&corpus.records, &corpus.default_split())?;
    emitln!(
        "wrote {} utterances ({} emotions, seed {}) to {}; default split {} train / {} test",
        corpus.records.len(),
        corpus.labels.len(),
        cfg.synthetic.seed,
        out.display(),
        split.train.len(),
        split.test.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn corpus_split(
    cfg: &ExperimentConfig,
    corpus: &LoadedCorpus,
) -> anyhow::Result<(Vec<usize>, Vec<usize>, String)> {
    let spec = cfg.split.resolve(&corpus.records);
    let split = make_split(&corpus.records, &spec)?;
    Ok((split.train, split.test, spec.describe()))
}

fn train(
    cfg: ExperimentConfig,
    corpus_dir: &Path,
    out: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let out = cfg.output_dir(out)?;
    let corpus = read_corpus(corpus_dir)?;
    let (train_idx, _, split) = corpus_split(&cfg, &corpus)?;
    if train_idx.is_empty() {
        return Err(
            Error::InvalidConfig(format!("split leaves no training utterances ({split})")).into(),
        );
    }
    let train = corpus.labelled(&train_idx);
    let bank = ModelBank::train(&cfg.bank, corpus.labels(), corpus.fingerprint(), &train)?;
    bank.save(&out)?;
    write_json(
        &out.join("provenance.json"),
        &json!({
            "provenance": provenance("train", &cfg),
            "corpus_fingerprint": corpus.fingerprint(),
            "split": split,
            "train_utterances": train_idx.len(),
        }),
    )?;
    emitln!(
        "trained {} bank on {} utterances ({}) into {}",
        bank.kind(),
        train_idx.len(),
        split,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn alpha_tag(alpha: f64) -> String {
    format!("{alpha}").replace('.', "_")
}

fn evaluate(
    cfg: ExperimentConfig,
    bank_dir: &Path,
    corpus_dir: &Path,
    out: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let out = cfg.output_dir(out)?;
    let bank = ModelBank::load(bank_dir)?;
    let corpus = read_corpus(corpus_dir)?;
    let (_, test_idx, split) = corpus_split(&cfg, &corpus)?;
    if test_idx.is_empty() {
        return Err(
            Error::InvalidConfig(format!("split leaves no test utterances ({split})")).into(),
        );
    }
    let test = corpus.labelled(&test_idx);
    let mut meta = ReportMeta::for_bank(&bank, split);
    if let Ok(spec) = serde_json::from_value::<SyntheticSpec>(corpus.index.source.clone()) {
        if corpus.index.source.get("seed").is_some() {
            meta.seeds.push(spec.seed);
        }
    }
    meta.config = serde_json::to_value(provenance("evaluate", &cfg))?;

    let report = evaluate_split(&bank, &test, corpus.fingerprint(), meta.clone())?;
    write_report(&out, "report", &report)?;
    emitln!("{}", report.to_text());
    if !cfg.alpha_sweep.is_empty() {
        if bank.kind() != BankKind::Csphmm3 {
            bail!(Error::InvalidConfig(format!(
                "an alpha sweep needs a CSPHMM3 bank, not {}",
                bank.kind()
            )));
        }
        let reports =
            evaluate_alpha_sweep(&bank, &test, corpus.fingerprint(), &cfg.alpha_sweep, meta)?;
        for (alpha, r) in cfg.alpha_sweep.iter().zip(&reports) {
            write_report(&out, &format!("report_alpha_{}", alpha_tag(*alpha)), r)?;
            emitln!("alpha {alpha}: average accuracy {:.2}%", r.average_accuracy);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_report(dir: &Path, stem: &str, report: &EvaluationReport) -> anyhow::Result<()> {
    write_text(&dir.join(format!("{stem}.json")), &report.to_json()?)?;
    write_text(&dir.join(format!("{stem}.txt")), &report.to_text())
}

fn classify(
    cfg: ExperimentConfig,
    bank_dir: &Path,
    wav: Option<PathBuf>,
    features: Option<PathBuf>,
    prosody: Option<PathBuf>,
    fingerprint: Option<String>,
) -> anyhow::Result<ExitCode> {
    let bank = ModelBank::load(bank_dir)?;
    let (obs, fp) = if let Some(path) = wav {
        let clip = read_wav(&path, cfg.features.sample_rate_hz)?;
        let f = extract_features(&clip, &cfg.features)?;
        let p = prosody_track(&clip, &cfg.features)?;
        (Observation::new(f, Some(p))?, cfg.features.fingerprint())
    } else {
        let path = features.expect("clap enforces --features or --wav");
        let shift = cfg.features.frame_shift_ms;
        let f = read_features(&path, shift)?;
        let p = match prosody {
            Some(pp) => Some(ProsodyTrack::from_rows(
                read_features(&pp, shift)?.frames(),
            )?),
            None => None,
        };
        (
            Observation::new(f, p)?,
            fingerprint.unwrap_or_else(|| cfg.features.fingerprint()),
        )
    };
    let c = bank.classify(&obs, &fp)?;
    let scores: serde_json::Map<String, serde_json::Value> = bank
        .labels()
        .labels()
        .iter()
        .zip(&c.scores)
        .map(|(l, s)| (l.to_string(), json!(s)))
        .collect();
    let out = json!({
        "label": bank.labels().get(c.label).as_str(),
        "kind": bank.kind(),
        "alpha": bank.alpha(),
        "scores": scores,
        "provenance": provenance("classify", &cfg),
    });
    emitln!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn read_report(path: &Path) -> anyhow::Result<EvaluationReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(EvaluationReport::from_json(&text)?)
}

/// Mean and SD of a sample given by a report or an explicit mean.
fn ttest_sample(report: Option<&PathBuf>, mean: Option<f64>) -> anyhow::Result<(f64, Option<f64>)> {
    match (report, mean) {
        (Some(path), _) => {
            let r = read_report(path)?;
            Ok((r.average_accuracy, Some(sample_sd(&r.accuracies())?)))
        }
        (None, Some(m)) => Ok((m, None)),
        (None, None) => unreachable!("clap requires a report or a mean"),
    }
}

fn ttest(args: &TtestArgs) -> anyhow::Result<ExitCode> {
    let (mean_a, sd_a) = ttest_sample(args.a.as_ref(), args.mean_a)?;
    let (mean_b, sd_b) = ttest_sample(args.b.as_ref(), args.mean_b)?;
    let sd_a = args.sd_a.or(sd_a);
    let sd_b = args.sd_b.or(sd_b);
    let pooled = match (args.sd_pooled, sd_a, sd_b) {
        (Some(p), _, _) => p,
        (None, Some(x), Some(y)) => pooled_sd(x, y)?,
        _ => {
            return Err(Error::InvalidConfig(
                "explicit means need --sd-a and --sd-b, or --sd-pooled".into(),
            )
            .into())
        }
    };
    let result = SignificanceResult {
        sd_x: sd_a,
        sd_y: sd_b,
        ..students_t(mean_a, mean_b, pooled)?
    };
    emitln!("{}", ttest_text(&result));
    let doc = json!({
        "result": result,
        "provenance": { "tool": "suprahmm", "version": VERSION, "command": "ttest" },
    });
    match &args.out {
        Some(path) => write_json(path, &doc)?,
        None => emitln!("{}", serde_json::to_string_pretty(&doc)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn ttest_text(r: &SignificanceResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mean A {:.3}, mean B {:.3}", r.mean_x, r.mean_y);
    let _ = writeln!(s, "pooled SD {:.4}", r.sd_pooled);
    let _ = write!(s, "delta {:+.3} points", r.absolute_delta);
    if let Some(rel) = r.relative_delta {
        let _ = write!(s, " ({:+.2}% relative)", 100.0 * rel);
    }
    let _ = writeln!(s);
    let _ = write!(
        s,
        "t = {:.4}; critical {} at 0.05 (one-sided): {}",
        r.t_value,
        r.critical_value,
        if r.significant {
            "significant"
        } else {
            "not significant"
        }
    );
    s
}

fn report(paths: &[PathBuf], out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let reports = paths
        .iter()
        .map(|p| read_report(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let labels = &reports[0].confusion.labels;
    if reports.iter().any(|r| &r.confusion.labels != labels) {
        return Err(Error::InvalidConfig("reports use different label sets".into()).into());
    }
    let width = labels
        .labels()
        .iter()
        .map(|l| l.as_str().len())
        .max()
        .unwrap_or(0)
        .max(12)
        + 2;
    let mut text = String::from("Emotion recognition accuracy (%)\n");
    let _ = write!(text, "{:<w$}", "model", w = width);
    for l in labels.labels() {
        let _ = write!(text, "{:>w$}", l.as_str(), w = width);
    }
    let _ = writeln!(text, "{:>w$}", "average", w = width);
    for r in &reports {
        let name = match r.meta.alpha {
            Some(a) => format!("{} a={a}", r.meta.bank_kind),
            None => r.meta.bank_kind.to_string(),
        };
        let _ = write!(text, "{:<w$}", name, w = width);
        for e in &r.per_emotion {
            match e.accuracy {
                Some(a) => {
                    let _ = write!(text, "{:>w$.1}", a, w = width);
                }
                None => {
                    let _ = write!(text, "{:>w$}", "-", w = width);
                }
            }
        }
        let _ = writeln!(text, "{:>w$.1}", r.average_accuracy, w = width);
    }
    if let [a, b] = reports.as_slice() {
        let abs = a.average_accuracy - b.average_accuracy;
        let _ = write!(text, "\nfirst vs second: {abs:+.2} points");
        if b.average_accuracy != 0.0 {
            let _ = write!(
                text,
                " ({:+.2}% relative)",
                100.0 * (a.average_accuracy / b.average_accuracy - 1.0)
            );
        }
        let _ = writeln!(text);
    }
    for (p, r) in paths.iter().zip(&reports) {
        let _ = writeln!(text, "\n== {} ==\n{}", p.display(), r.to_text());
    }
    match out {
        Some(path) => write_text(&path, &text)?,
        None => emit(&text)?,
    }
    Ok(ExitCode::SUCCESS)
}
