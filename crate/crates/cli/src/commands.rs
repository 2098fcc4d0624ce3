use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};
use tweetmtl::data::metrics::{compute_metrics, fn_breakdown, MetricsReport};
use tweetmtl::data::synth::GENERATOR_VERSION;
use tweetmtl::data::{filter_dataset, synth_generate, Dataset};
use tweetmtl::encoder::{hashtag_corpus, pretrain_hashtag, PretrainedEncoder};
use tweetmtl::experiment::{comparison_configs, run_comparison, ComparisonReport, ModelInputs};
use tweetmtl::features::{extract_features, feature_matrix, PosLexicon, SentimentLexicon, FEATURE_NAMES};
use tweetmtl::model::{train, Architecture, TrainedModel};
use tweetmtl::record::{Label, TweetRecord};
use tweetmtl::stitch::StitchInit;
use tweetmtl::verify::{run_all, VerifyOptions};

use crate::config::RunConfig;
use crate::{ArchArg, Cli, Command, LexiconArgs, ModelFlags, UsageError};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let ctx = Ctx {
        config_file: cli.config.clone(),
    };
    match cli.command {
        Command::Synth(a) => {
            if let Some(n) = a.blackmarket {
                cfg.synth.blackmarket = n;
            }
            if let Some(n) = a.genuine {
                cfg.synth.genuine = n;
            }
            if let Some(d) = a.difficulty {
                cfg.synth.difficulty = d;
            }
            let cfg = cfg.finish();
            let data = synth_generate(&cfg.synth, cfg.seed)?;
            data.save(&a.out)?;
            info!("wrote {} records to {}", data.len(), a.out.display());
            ctx.provenance(
                &a.out,
                "synth",
                &cfg,
                &[],
                json!({ "generator": GENERATOR_VERSION, "records": data.len() }),
            )?;
        }
        Command::Filter(a) => {
            let cfg = cfg.finish();
            let data = Dataset::load(&a.input)?;
            let (kept, rejected) = filter_dataset(&data);
            kept.save(&a.out)?;
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &rejected {
                *counts.entry(r.reason.as_str()).or_default() += 1;
            }
            if let Some(path) = &a.rejections {
                let mut tsv = String::from("id\treason\n");
                for r in &rejected {
                    let _ = writeln!(tsv, "{}\t{}", r.id, r.reason.as_str());
                }
                write(path, tsv.as_bytes())?;
            }
            info!("kept {} of {} records", kept.len(), data.len());
            ctx.provenance(
                &a.out,
                "filter",
                &cfg,
                &[("input", &a.input)],
                json!({ "kept": kept.len(), "rejected": counts }),
            )?;
        }
        Command::PretrainEncoder(a) => {
            let e = &mut cfg.encoder;
            set(&mut e.epochs, a.epochs);
            set(&mut e.max_examples, a.max_examples);
            set(&mut e.embed_dim, a.embed_dim);
            set(&mut e.hidden, a.hidden);
            set(&mut e.char_dim, a.char_dim);
            set(&mut e.learning_rate, a.learning_rate);
            set(&mut e.min_hashtag_count, a.min_hashtag_count);
            let cfg = cfg.finish();
            let data = Dataset::load(&a.data)?;
            let corpus = hashtag_corpus(&data.records);
            info!("pre-training on {} hashtagged posts", corpus.len());
            let run = pretrain_hashtag(&corpus, &cfg.encoder)?;
            run.encoder.save(&a.out)?;
            let correct = corpus
                .iter()
                .filter(|(text, tags)| {
                    let p = run.predict_hashtag(text);
                    tags.iter().any(|t| run.encoder.hashtags.get(t) == Some(p))
                })
                .count();
            let accuracy = correct as f64 / corpus.len() as f64;
            info!("training hashtag accuracy {accuracy:.4}");
            let history = json!({
                "epoch_loss": run.history.epoch_loss,
                "examples": run.history.examples,
                "hashtag_classes": run.encoder.hashtags.len(),
                "train_accuracy": accuracy,
            });
            write_json(&suffixed(&a.out, "history.json"), &history)?;
            ctx.provenance(&a.out, "pretrain-encoder", &cfg, &[("data", &a.data)], history)?;
        }
        Command::Features(a) => {
            let cfg = cfg.finish();
            let data = Dataset::load(&a.data)?;
            let (sentiment, pos) = lexicons(&a.lexicons)?;
            let mut tsv = format!("id\t{}\n", FEATURE_NAMES.join("\t"));
            for r in &data.records {
                let f = extract_features(r, &sentiment, &pos);
                tsv.push_str(&r.id);
                for v in f.as_slice() {
                    let _ = write!(tsv, "\t{v}");
                }
                tsv.push('\n');
            }
            write(&a.out, tsv.as_bytes())?;
            ctx.provenance(
                &a.out,
                "features",
                &cfg,
                &lexicon_inputs(&[("data", &a.data)], &a.lexicons),
                json!({ "records": data.len() }),
            )?;
        }
        Command::Train(a) => {
            apply_model_flags(&mut cfg, &a.model);
            let mut cfg = cfg.finish();
            let encoder = PretrainedEncoder::load(&a.encoder)?;
            adopt_encoder(&mut cfg, &encoder);
            cfg.model.validate()?;
            let data = labeled(&a.data)?;
            let (sentiment, pos) = lexicons(&a.lexicons)?;
            let inputs = ModelInputs::from_records(&data.records, &encoder, &sentiment, &pos)?;
            let (model, history) = train(&cfg.model, &inputs.training_set())?;
            model.save(&a.out)?;
            write_json(&suffixed(&a.out, "history.json"), &history)?;
            if let Some(last) = history.epochs.last() {
                info!("final loss {:.6}, training macro F1 {:.4}", last.total, last.train_f1);
            }
            ctx.provenance(
                &a.out,
                "train",
                &cfg,
                &lexicon_inputs(&[("data", &a.data), ("encoder", &a.encoder)], &a.lexicons),
                json!({ "records": data.len() }),
            )?;
        }
        Command::Eval(a) => {
            apply_model_flags(&mut cfg, &a.flags);
            set(&mut cfg.k, a.k);
            let mut cfg = cfg.finish();
            let encoder = PretrainedEncoder::load(&a.encoder)?;
            adopt_encoder(&mut cfg, &encoder);
            let data = labeled(&a.data)?;
            let (sentiment, pos) = lexicons(&a.lexicons)?;
            let inputs = ModelInputs::from_records(&data.records, &encoder, &sentiment, &pos)?;
            let mut inputs_used = vec![("data", a.data.as_path()), ("encoder", a.encoder.as_path())];
            let report = match &a.model {
                Some(path) => {
                    let model = TrainedModel::load(path)?;
                    check_embed_dim(&model, &encoder)?;
                    inputs_used.push(("model", path.as_path()));
                    let report = score_checkpoint(&model, &inputs)?;
                    print!("{}", report.summary());
                    EvalReport {
                        comparison: None,
                        checkpoint: Some(report),
                    }
                }
                None => {
                    cfg.model.validate()?;
                    let report = run_comparison(&inputs, &comparison_configs(&cfg.model), cfg.k, cfg.seed)?;
                    print!("{}", report.table());
                    EvalReport {
                        comparison: Some(report),
                        checkpoint: None,
                    }
                }
            };
            write_json(&a.out, &report)?;
            ctx.provenance(
                &a.out,
                "eval",
                &cfg,
                &lexicon_inputs(&inputs_used, &a.lexicons),
                json!({ "records": data.len() }),
            )?;
        }
        Command::Predict(a) => {
            let mut cfg = cfg.finish();
            let encoder = PretrainedEncoder::load(&a.encoder)?;
            let model = TrainedModel::load(&a.model)?;
            check_embed_dim(&model, &encoder)?;
            adopt_encoder(&mut cfg, &encoder);
            cfg.model = model.config.clone();
            let records = match (&a.text, &a.input) {
                (Some(text), _) => vec![TweetRecord::from_text("text", text.clone())],
                (None, Some(path)) => Dataset::load(path)?.records,
                (None, None) => unreachable!("clap requires one source"),
            };
            let (sentiment, pos) = lexicons(&a.lexicons)?;
            let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
            let embeddings = encoder.encode_batch(&texts);
            let features = feature_matrix(&records, &sentiment, &pos);
            let preds = model.predict(&embeddings, &features)?;
            let mut out = String::new();
            for (r, p) in records.iter().zip(&preds) {
                let line = PredictionLine {
                    id: &r.id,
                    label: p.label,
                    probability: p.probabilities[1],
                    probabilities: p.probabilities,
                    retweets_5d: p.retweets_5d,
                    likes_5d: p.likes_5d,
                };
                out.push_str(&serde_json::to_string(&line)?);
                out.push('\n');
            }
            match &a.out {
                Some(path) => {
                    write(path, out.as_bytes())?;
                    let mut inputs = vec![("model", a.model.as_path()), ("encoder", a.encoder.as_path())];
                    if let Some(input) = &a.input {
                        inputs.push(("input", input.as_path()));
                    }
                    ctx.provenance(
                        path,
                        "predict",
                        &cfg,
                        &lexicon_inputs(&inputs, &a.lexicons),
                        json!({ "records": records.len() }),
                    )?;
                }
                None => std::io::stdout().write_all(out.as_bytes())?,
            }
        }
        Command::Verify(a) => {
            let report = run_all(VerifyOptions {
                inject_fault: a.inject_fault,
            });
            print!("{}", report.table());
            if let Some(path) = &a.out {
                write_json(path, &report)?;
            }
            if !report.passed() {
                eprintln!("verification failed");
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

struct Ctx {
    config_file: Option<PathBuf>,
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_file: Option<String>,
    inputs: BTreeMap<&'a str, String>,
    config: &'a RunConfig,
    details: Value,
}

impl Ctx {
    /// Writes `<artifact>.provenance.json` with the fully resolved config.
    fn provenance(
        &self,
        artifact: &Path,
        command: &str,
        cfg: &RunConfig,
        inputs: &[(&str, &Path)],
        details: Value,
    ) -> Result<()> {
        let p = Provenance {
            tool: "tweetmtl",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_file: self.config_file.as_ref().map(|p| p.display().to_string()),
            inputs: inputs.iter().map(|(k, v)| (*k, v.display().to_string())).collect(),
            config: cfg,
            details,
        };
        write_json(&suffixed(artifact, "provenance.json"), &p)
    }
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    label: Label,
    /// Probability of the blackmarket class.
    probability: f64,
    probabilities: [f64; 2],
    retweets_5d: Option<f64>,
    likes_5d: Option<f64>,
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<ComparisonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<CheckpointReport>,
}

#[derive(Serialize)]
struct CheckpointReport {
    method: String,
    metrics: MetricsReport,
    fn_breakdown: BTreeMap<String, f64>,
}

impl CheckpointReport {
    fn summary(&self) -> String {
        let m = &self.metrics;
        let mut s = format!(
            "{}: accuracy {:.4}, macro F1 {:.4}, weighted F1 {:.4}, blackmarket P/R/F1 {:.4}/{:.4}/{:.4}\n",
            self.method,
            m.accuracy,
            m.macro_avg.f1,
            m.weighted_avg.f1,
            m.per_class[1].precision,
            m.per_class[1].recall,
            m.per_class[1].f1
        );
        for (cat, pct) in &self.fn_breakdown {
            let _ = writeln!(s, "  {cat:<14}{pct:6.2}%");
        }
        s
    }
}

fn score_checkpoint(model: &TrainedModel, inputs: &ModelInputs) -> Result<CheckpointReport> {
    let preds: Vec<usize> = model
        .predict(&inputs.embeddings, &inputs.features)?
        .iter()
        .map(|p| p.label.index())
        .collect();
    Ok(CheckpointReport {
        method: model.config.architecture.label().to_string(),
        metrics: compute_metrics(&preds, &inputs.labels)?,
        fn_breakdown: fn_breakdown(&preds, &inputs.labels, &inputs.categories),
    })
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_model_flags(cfg: &mut RunConfig, f: &ModelFlags) {
    let m = &mut cfg.model;
    if let Some(a) = f.architecture {
        m.architecture = match a {
            ArchArg::Multitask => Architecture::Multitask,
            ArchArg::SingleTask => Architecture::SingleTask,
            ArchArg::FeatureConcat => Architecture::FeatureConcat,
        };
    }
    set(&mut m.lambda, f.lambda);
    set(&mut m.epochs, f.epochs);
    set(&mut m.batch_size, f.batch_size);
    set(&mut m.adam.learning_rate, f.learning_rate);
    set(&mut m.dropout, f.dropout);
    set(&mut m.widths, f.widths.clone());
    if f.identity_stitches {
        m.stitch_init = StitchInit::Identity;
    }
    if f.freeze_stitches {
        m.train_stitches = false;
    }
    if f.no_batchnorm {
        m.batchnorm = false;
    }
    if f.raw_targets {
        m.raw_targets = true;
    }
}

/// Replaces the encoder section with the loaded encoder's own settings.
fn adopt_encoder(cfg: &mut RunConfig, encoder: &PretrainedEncoder) {
    cfg.encoder = encoder.config;
    cfg.model.embed_dim = encoder.embed_dim();
}

fn check_embed_dim(model: &TrainedModel, encoder: &PretrainedEncoder) -> Result<()> {
    if model.config.embed_dim != encoder.embed_dim() {
        return Err(tweetmtl::Error::ConfigMismatch(format!(
            "model expects {}-dimensional embeddings but the encoder produces {}",
            model.config.embed_dim,
            encoder.embed_dim()
        ))
        .into());
    }
    Ok(())
}

fn labeled(path: &Path) -> Result<Dataset> {
    let data = Dataset::load(path)?;
    data.require_labels()?;
    if data.is_empty() {
        return Err(UsageError(format!("{} contains no records", path.display())).into());
    }
    Ok(data)
}

fn lexicons(a: &LexiconArgs) -> Result<(SentimentLexicon, PosLexicon)> {
    let sentiment = match &a.sentiment {
        Some(p) => SentimentLexicon::load(p)?,
        None => SentimentLexicon::bundled(),
    };
    let pos = match &a.pos {
        Some(p) => PosLexicon::load(p)?,
        None => PosLexicon::bundled(),
    };
    Ok((sentiment, pos))
}

fn lexicon_inputs<'a>(base: &[(&'a str, &'a Path)], a: &'a LexiconArgs) -> Vec<(&'a str, &'a Path)> {
    let mut v = base.to_vec();
    if let Some(p) = &a.sentiment {
        v.push(("sentiment", p.as_path()));
    }
    if let Some(p) = &a.pos {
        v.push(("pos", p.as_path()));
    }
    v
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    s.into()
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text.as_bytes())
}
