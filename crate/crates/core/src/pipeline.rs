//! End-to-end runs: configuration, fit → featurize → train → evaluate,
//! cross-corpus evaluation, artifact writing and the run manifest.
//!
//! Configuration is a flat TOML file; unknown keys are rejected. Relative
//! paths resolve against the configuration file's directory. Every random
//! stream is derived from the single `seed` with [`seed::derive`]:
//! `"subsample"` for training-set subsampling, `"mlp"` for the classifier, and
//! the topic-model kind (`"nmf"`, `"lsi"`, `"lda"`) for each topic model.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{train, MlpConfig, MlpModel, TrainConfig, TrainHistory};
use crate::corpus::{load_corpus, merge_corpora, Corpus, Split, StanceLabel};
use crate::embeddings::{load_embedding_table, EmbeddingPreset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{
    fit_transforms, EmbeddingTables, FeatureMatrix, FeatureSetConfig, Featurizer, FittedTransforms, TransformParams,
};
use crate::lexical::LexiconConfig;
use crate::metrics::{evaluate_with, render_confusion, render_report_jsonl, render_report_text, EvalReport};
use crate::seed;
use crate::topics::TopicParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 20 topics and at most 20,000 training pairs.
    Desk,
    /// Settings exactly as configured.
    Full,
}

impl Profile {
    pub const DESK_TOPICS: usize = 20;
    pub const DESK_TRAIN_PAIRS: usize = 20_000;
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::config("profile", format!("expected desk or full, got {other:?}"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Desk => "desk",
            Profile::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Corpus names, parallel to the stance and body file lists. Names must
    /// be distinct across train and test (they prefix pair ids); the part
    /// before the first `_` is the corpus family used by cross runs.
    pub train_names: Vec<String>,
    pub train_stances: Vec<PathBuf>,
    pub train_bodies: Vec<PathBuf>,
    pub test_names: Vec<String>,
    pub test_stances: Vec<PathBuf>,
    pub test_bodies: Vec<PathBuf>,

    pub bow_boc: bool,
    pub cooccurrence: bool,
    pub overlap_polarity_refuting: bool,
    pub nmf_concat: bool,
    pub lsi_concat: bool,
    pub nmf_cos: bool,
    pub lda_cos: bool,
    pub embedding_preset: String,
    pub infersent_table: Option<PathBuf>,
    pub bert_table: Option<PathBuf>,

    pub vocab_cap: usize,
    pub topic_vocab_cap: usize,
    pub topic_k: usize,
    pub nmf_iters: usize,
    pub lda_iters: usize,
    /// Unset means 50 / topic_k.
    pub lda_alpha: Option<f64>,
    pub lda_beta: f64,

    pub hidden_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// 0 disables early stopping and the holdout split.
    pub early_stop_patience: usize,
    pub holdout_fraction: f64,
    pub class_weighting: bool,

    /// 0 keeps every training pair.
    pub train_subsample: usize,
    pub profile: Profile,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub save_features: bool,
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let f = FeatureSetConfig::base();
        let t = TrainConfig::default();
        let topics = TopicParams::default();
        RunConfig {
            train_names: Vec::new(),
            train_stances: Vec::new(),
            train_bodies: Vec::new(),
            test_names: Vec::new(),
            test_stances: Vec::new(),
            test_bodies: Vec::new(),
            bow_boc: f.bow_boc,
            cooccurrence: f.cooccurrence,
            overlap_polarity_refuting: f.overlap_polarity_refuting,
            nmf_concat: f.nmf_concat,
            lsi_concat: f.lsi_concat,
            nmf_cos: f.nmf_cos,
            lda_cos: f.lda_cos,
            embedding_preset: EmbeddingPreset::None.as_str().into(),
            infersent_table: None,
            bert_table: None,
            vocab_cap: 5000,
            topic_vocab_cap: 5000,
            topic_k: topics.k,
            nmf_iters: topics.nmf_iters,
            lda_iters: topics.lda_iters,
            lda_alpha: None,
            lda_beta: topics.lda_beta,
            hidden_sizes: vec![600; 6],
            dropout_rate: 0.0,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            early_stop_patience: t.early_stop_patience.unwrap_or(0),
            holdout_fraction: t.holdout_fraction,
            class_weighting: t.class_weighting,
            train_subsample: 0,
            profile: Profile::Full,
            out_dir: PathBuf::from("out"),
            seed: 0,
            save_features: true,
            sequential: false,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.to_string().trim().to_string())
        })
    }

    /// Parses a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&src)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self
            .train_stances
            .iter_mut()
            .chain(&mut self.train_bodies)
            .chain(&mut self.test_stances)
            .chain(&mut self.test_bodies)
            .chain(self.infersent_table.iter_mut())
            .chain(self.bert_table.iter_mut())
        {
            resolve(base, p);
        }
        resolve(base, &mut self.out_dir);
    }

    /// Pins the desk settings; `Full` leaves the configuration unchanged.
    pub fn apply_profile(&mut self, profile: Profile) {
        self.profile = profile;
        if profile == Profile::Desk {
            self.topic_k = Profile::DESK_TOPICS;
            self.train_subsample = Profile::DESK_TRAIN_PAIRS;
        }
    }

    pub fn preset(&self) -> Result<EmbeddingPreset> {
        self.embedding_preset
            .parse()
            .map_err(|_| Error::config("embedding_preset", format!("unknown preset {:?}", self.embedding_preset)))
    }

    pub fn feature_set(&self) -> Result<FeatureSetConfig> {
        let f = FeatureSetConfig {
            bow_boc: self.bow_boc,
            cooccurrence: self.cooccurrence,
            overlap_polarity_refuting: self.overlap_polarity_refuting,
            nmf_concat: self.nmf_concat,
            lsi_concat: self.lsi_concat,
            nmf_cos: self.nmf_cos,
            lda_cos: self.lda_cos,
            embedding_preset: EmbeddingPreset::None,
        }
        .with_preset(self.preset()?);
        f.validate()?;
        Ok(f)
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let features = self.feature_set()?;
        let execution = self.execution();
        let train_cfg = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            early_stop_patience: (self.early_stop_patience > 0).then_some(self.early_stop_patience),
            holdout_fraction: self.holdout_fraction,
            class_weighting: self.class_weighting,
            seed: seed::derive(self.seed, "mlp"),
            execution,
        };
        train_cfg.validate()?;
        if self.topic_k == 0 {
            return Err(Error::config("topic_k", "must be positive"));
        }
        if self.vocab_cap == 0 || self.topic_vocab_cap == 0 {
            return Err(Error::config("vocab_cap", "must be positive"));
        }
        if self.lda_alpha.is_some_and(|a| a.is_nan() || a <= 0.0) || self.lda_beta.is_nan() || self.lda_beta <= 0.0 {
            return Err(Error::config("lda_alpha", "LDA hyperparameters must be positive"));
        }
        let probe = MlpConfig {
            input_dim: 1,
            hidden_sizes: self.hidden_sizes.clone(),
            dropout_rate: self.dropout_rate,
        };
        probe.validate()?;
        Ok(Experiment {
            features,
            transform: TransformParams {
                vocab_cap: self.vocab_cap,
                topic_vocab_cap: self.topic_vocab_cap,
                topic: TopicParams {
                    k: self.topic_k,
                    nmf_iters: self.nmf_iters,
                    lda_iters: self.lda_iters,
                    lda_alpha: self.lda_alpha,
                    lda_beta: self.lda_beta,
                    seed: self.seed,
                    execution,
                },
            },
            hidden_sizes: self.hidden_sizes.clone(),
            dropout_rate: self.dropout_rate,
            train: train_cfg,
            execution,
            lexicon: LexiconConfig::default(),
        })
    }

    /// Field-level checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        check_lists("train", &self.train_names, &self.train_stances, &self.train_bodies)?;
        check_lists("test", &self.test_names, &self.test_stances, &self.test_bodies)?;
        let mut names: Vec<&String> = self.train_names.iter().chain(&self.test_names).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config("test_names", format!("corpus name {:?} is used twice", w[0])));
        }
        let preset = self.preset()?;
        if preset.infersent().is_some() && self.infersent_table.is_none() {
            return Err(Error::config("infersent_table", format!("preset {preset} needs an InferSent-style table")));
        }
        if preset.bert().is_some() && self.bert_table.is_none() {
            return Err(Error::config("bert_table", format!("preset {preset} needs a BERT-style table")));
        }
        self.experiment().map(|_| ())
    }
}

fn check_lists(side: &str, names: &[String], stances: &[PathBuf], bodies: &[PathBuf]) -> Result<()> {
    if names.is_empty() {
        return Err(Error::config(format!("{side}_names"), "at least one corpus is required"));
    }
    if stances.len() != names.len() || bodies.len() != names.len() {
        return Err(Error::config(
            format!("{side}_stances"),
            format!("{side}_names, {side}_stances and {side}_bodies must have the same length"),
        ));
    }
    if let Some(bad) = names.iter().find(|n| n.is_empty() || n.contains(':')) {
        return Err(Error::config(format!("{side}_names"), format!("invalid corpus name {bad:?}")));
    }
    Ok(())
}

/// Corpus family: the name up to its first `_`.
pub fn corpus_family(name: &str) -> &str {
    name.split('_').next().unwrap_or(name)
}

fn load_side(names: &[String], stances: &[PathBuf], bodies: &[PathBuf], split: Split, family: Option<&str>) -> Result<Corpus> {
    let mut merged: Option<Corpus> = None;
    for ((name, s), b) in names.iter().zip(stances).zip(bodies) {
        if family.is_some_and(|f| corpus_family(name) != f) {
            continue;
        }
        let c = load_corpus(name, s, b)?;
        merged = Some(match merged {
            None => c,
            Some(m) => merge_corpora(&m, &c)?,
        });
    }
    let mut c = merged.ok_or_else(|| {
        Error::config(
            "train_names",
            format!("no corpus of family {:?} configured", family.unwrap_or_default()),
        )
    })?;
    c.split = split;
    Ok(c)
}

/// Seeded subsample of at most `n` pairs, kept in corpus order.
pub fn subsample(c: &Corpus, n: usize, seed_value: u64) -> Corpus {
    if n == 0 || n >= c.len() {
        return c.clone();
    }
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(seed_value, "subsample")));
    let mut keep = idx[..n].to_vec();
    keep.sort_unstable();
    c.select(&keep, c.split)
}

/// Everything that defines one fit → train → evaluate run, independent of
/// files.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub features: FeatureSetConfig,
    pub transform: TransformParams,
    pub hidden_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub train: TrainConfig,
    pub execution: Execution,
    pub lexicon: LexiconConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub predictions: Vec<StanceLabel>,
    pub history: TrainHistory,
    pub model: MlpModel,
    pub transforms: FittedTransforms,
    pub train_features: FeatureMatrix,
    pub test_features: FeatureMatrix,
    pub timings: BTreeMap<String, f64>,
}

/// Fits transforms on `train` (or reuses `prefit` after checking it was
/// fitted on exactly `train`), featurizes both sides, trains the classifier
/// and evaluates it on `test`. Nothing is fitted on `test`.
pub fn run_experiment(
    train_corpus: &Corpus,
    test_corpus: &Corpus,
    exp: &Experiment,
    tables: &EmbeddingTables,
    prefit: Option<FittedTransforms>,
) -> Result<ExperimentOutcome> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };
    let transforms = match prefit {
        Some(t) => {
            t.check_provenance(train_corpus)?;
            t
        }
        None => fit_transforms(train_corpus, &exp.features, &exp.transform)?,
    };
    lap("fit_transforms", &mut timings);
    let fz = Featurizer {
        features: &exp.features,
        transforms: &transforms,
        tables,
        lexicon: &exp.lexicon,
    };
    let train_features = fz.featurize(train_corpus, exp.execution)?;
    let test_features = fz.featurize(test_corpus, exp.execution)?;
    lap("featurize", &mut timings);
    let mlp = MlpConfig {
        input_dim: train_features.dim(),
        hidden_sizes: exp.hidden_sizes.clone(),
        dropout_rate: exp.dropout_rate,
    };
    let (model, history) = train(&train_features.rows, &train_corpus.labels(), &mlp, &exp.train)?;
    lap("train", &mut timings);
    let predictions = model.predict(&test_features.rows, exp.execution)?;
    let report = evaluate_with(&test_corpus.labels(), &predictions, exp.execution)?;
    lap("evaluate", &mut timings);
    Ok(ExperimentOutcome {
        report,
        predictions,
        history,
        model,
        transforms,
        train_features,
        test_features,
        timings,
    })
}

/// Train on one corpus, evaluate on another.
pub fn cross_evaluate(
    train_corpus: &Corpus,
    test_corpus: &Corpus,
    exp: &Experiment,
    tables: &EmbeddingTables,
    prefit: Option<FittedTransforms>,
) -> Result<EvalReport> {
    Ok(run_experiment(train_corpus, test_corpus, exp, tables, prefit)?.report)
}

pub fn file_digest(path: &Path) -> Result<String> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = r.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub derived_seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    pub train_corpus_digest: String,
    pub transforms_cache_hit: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub feature_dim: usize,
    pub timings_s: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub history: TrainHistory,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

fn load_tables(cfg: &RunConfig, preset: EmbeddingPreset) -> Result<EmbeddingTables> {
    let mut tables = EmbeddingTables::default();
    if preset.infersent().is_some() {
        let p = cfg.infersent_table.as_ref().ok_or_else(|| Error::config("infersent_table", "missing"))?;
        tables.infersent = Some(load_embedding_table(p)?);
    }
    if preset.bert().is_some() {
        let p = cfg.bert_table.as_ref().ok_or_else(|| Error::config("bert_table", "missing"))?;
        tables.bert = Some(load_embedding_table(p)?);
    }
    Ok(tables)
}

fn transforms_cache_key(train: &Corpus, exp: &Experiment) -> String {
    let f = &exp.features;
    let t = &exp.transform;
    let key = format!(
        "v1|{}|{}{}{}{}{}|{}|{}|{}|{}|{}|{:?}|{}|{}",
        train.text_digest(),
        u8::from(f.bow_boc),
        u8::from(f.needs(crate::topics::TopicKind::Nmf)),
        u8::from(f.needs(crate::topics::TopicKind::Lsi)),
        u8::from(f.needs(crate::topics::TopicKind::Lda)),
        u8::from(f.any_topic()),
        t.vocab_cap,
        t.topic_vocab_cap,
        t.topic.k,
        t.topic.nmf_iters,
        t.topic.lda_iters,
        t.topic.lda_alpha,
        t.topic.lda_beta,
        t.topic.seed,
    );
    hex::encode(Sha256::digest(key.as_bytes()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes report.txt, report.jsonl, report.json and confusion.txt.
pub fn write_reports(dir: &Path, title: &str, report: &EvalReport) -> Result<Vec<PathBuf>> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    let files = [
        ("report.txt", render_report_text(title, report)),
        ("report.jsonl", render_report_jsonl(title, report)),
        ("report.json", json + "\n"),
        ("confusion.txt", render_confusion(&report.confusion)),
    ];
    let mut out = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        write_text(&p, &text)?;
        out.push(p);
    }
    Ok(out)
}

/// Reads `report.json` from a run directory.
pub fn read_report(dir: &Path) -> Result<EvalReport> {
    let p = dir.join("report.json");
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", p.display())))
}

/// Which corpus family trains and which tests in a cross run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossDirection {
    pub train_family: String,
    pub test_family: String,
}

impl FromStr for CrossDirection {
    type Err = Error;

    /// `fnc-arc`, `arc-fnc`, or any `A-B` / `A→B` pair of family names.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("->")
            .or_else(|| s.split_once('→'))
            .or_else(|| s.split_once('-'))
            .ok_or_else(|| Error::InvalidArgument(format!("direction {s:?} is not of the form TRAIN-TEST")))?;
        let (a, b) = (a.trim().to_ascii_lowercase(), b.trim().to_ascii_lowercase());
        if a.is_empty() || b.is_empty() || a == b {
            return Err(Error::InvalidArgument(format!("invalid direction {s:?}")));
        }
        Ok(CrossDirection {
            train_family: a,
            test_family: b,
        })
    }
}

impl fmt::Display for CrossDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.train_family, self.test_family)
    }
}

/// Runs the configured experiment and writes every artifact under
/// `cfg.out_dir`. With a cross direction, training uses only the train-side
/// corpora of one family and testing only the test-side corpora of the other.
pub fn run(cfg: &RunConfig, direction: Option<&CrossDirection>) -> Result<RunOutcome> {
    cfg.validate()?;
    let exp = cfg.experiment()?;
    let preset = cfg.preset()?;
    let mut timings = BTreeMap::new();
    let started = Instant::now();

    let (train_family, test_family) = match direction {
        Some(d) => (Some(d.train_family.as_str()), Some(d.test_family.as_str())),
        None => (None, None),
    };
    let full_train = load_side(&cfg.train_names, &cfg.train_stances, &cfg.train_bodies, Split::Train, train_family)?;
    let test = load_side(&cfg.test_names, &cfg.test_stances, &cfg.test_bodies, Split::Test, test_family)?;
    let train_corpus = subsample(&full_train, cfg.train_subsample, cfg.seed);
    let tables = load_tables(cfg, preset)?;
    timings.insert("load".to_string(), started.elapsed().as_secs_f64());
    log::info!(
        "train: {} pairs ({} before subsampling), test: {} pairs",
        train_corpus.len(),
        full_train.len(),
        test.len()
    );

    let out = match direction {
        Some(d) => cfg.out_dir.join(format!("cross-{d}")),
        None => cfg.out_dir.clone(),
    };
    create_dir(&out)?;
    let cache_dir = cfg.out_dir.join("cache");
    create_dir(&cache_dir)?;
    let cache_path = cache_dir.join(format!("{}.bin", transforms_cache_key(&train_corpus, &exp)));
    let cached = if cache_path.exists() {
        match FittedTransforms::load(&cache_path) {
            Ok(t) => {
                log::info!("reusing fitted transforms from {}", cache_path.display());
                Some(t)
            }
            Err(e) => {
                log::warn!("ignoring unreadable transform cache {}: {e}", cache_path.display());
                None
            }
        }
    } else {
        None
    };
    let cache_hit = cached.is_some();
    let outcome = run_experiment(&train_corpus, &test, &exp, &tables, cached)?;
    if !cache_hit {
        outcome.transforms.save(&cache_path)?;
    }
    timings.extend(outcome.timings.clone());
    if outcome.history.is_flagged() {
        log::warn!(
            "training loss rose in epochs {:?}; consider a lower learning rate",
            outcome.history.loss_increases
        );
    }

    let mut artifacts = Vec::new();
    let model_path = out.join("model.bin");
    outcome.model.save(&model_path)?;
    artifacts.push(model_path);
    artifacts.push(cache_path.clone());
    if cfg.save_features {
        for (name, m) in [("train", &outcome.train_features), ("test", &outcome.test_features)] {
            let bin = out.join(format!("features_{name}.bin"));
            let sidecar = out.join(format!("features_{name}.layout"));
            m.write(&bin)?;
            m.write_layout_sidecar(&sidecar)?;
            artifacts.push(bin);
            artifacts.push(sidecar);
        }
    }
    let title = match direction {
        Some(d) => format!("{d} {preset}"),
        None => format!("{} -> {} {preset}", train_corpus.name, test.name),
    };
    artifacts.extend(write_reports(&out, &title, &outcome.report)?);
    let mut preds = String::from("pair_id,gold,predicted\n");
    for (p, pred) in test.pairs().iter().zip(&outcome.predictions) {
        preds.push_str(&format!("{},{},{}\n", p.pair_id, p.stance, pred));
    }
    let preds_path = out.join("predictions.csv");
    write_text(&preds_path, &preds)?;
    artifacts.push(preds_path);
    let history_path = out.join("history.json");
    let history = serde_json::to_string_pretty(&outcome.history).map_err(|e| Error::Format(e.to_string()))?;
    write_text(&history_path, &(history + "\n"))?;
    artifacts.push(history_path);

    let mut inputs = Vec::new();
    for p in cfg
        .train_stances
        .iter()
        .chain(&cfg.train_bodies)
        .chain(&cfg.test_stances)
        .chain(&cfg.test_bodies)
        .chain(cfg.infersent_table.iter().filter(|_| preset.infersent().is_some()))
        .chain(cfg.bert_table.iter().filter(|_| preset.bert().is_some()))
    {
        inputs.push(FileDigest {
            path: p.clone(),
            sha256: file_digest(p)?,
        });
    }
    let artifacts = artifacts
        .into_iter()
        .map(|p| {
            Ok(FileDigest {
                sha256: file_digest(&p)?,
                path: p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    timings.insert("total".to_string(), started.elapsed().as_secs_f64());
    let derived_seeds = ["subsample", "mlp", "nmf", "lsi", "lda"]
        .iter()
        .map(|t| (t.to_string(), seed::derive(cfg.seed, t)))
        .collect();
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: match direction {
            Some(d) => format!("cross {d}"),
            None => "run".to_string(),
        },
        config: cfg.clone(),
        derived_seeds,
        inputs,
        artifacts,
        train_corpus_digest: train_corpus.text_digest(),
        transforms_cache_hit: cache_hit,
        n_train: train_corpus.len(),
        n_test: test.len(),
        feature_dim: outcome.train_features.dim(),
        timings_s: timings,
    };
    let manifest_path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write_text(&manifest_path, &(text + "\n"))?;
    Ok(RunOutcome {
        report: outcome.report,
        history: outcome.history,
        manifest,
        out_dir: out,
    })
}

/// Loads the configured test corpora (all of them) merged into one.
pub fn load_test_corpus(cfg: &RunConfig) -> Result<Corpus> {
    load_side(&cfg.test_names, &cfg.test_stances, &cfg.test_bodies, Split::Test, None)
}

pub fn load_train_corpus(cfg: &RunConfig) -> Result<Corpus> {
    load_side(&cfg.train_names, &cfg.train_stances, &cfg.train_bodies, Split::Train, None)
}

/// Process exit status for an error: 2 for configuration problems and
/// missing or unreadable inputs, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Io { .. } | Error::Csv { .. } | Error::MissingBody(_) | Error::UnknownStance { .. } => 2,
        _ => 1,
    }
}
