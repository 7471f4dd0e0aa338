//! The mining pipeline: LangID training and paring, clustering, then
//! annotate -> doc-consistency -> wordlist -> decluster -> tfiif (gated)
//! -> negative -> dedup, with a manifest per stage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use longtail_core::anomaly::{anomaly_report_with, AnomalyCutoffs, AnomalyReport, DEFAULT_TOP_N};
use longtail_core::cluster::{
    add_singletons, agglomerative_cluster, fnr_distance_matrix, resplit, ClusterId, ClusterMap,
    Cut, Linkage,
};
use longtail_core::corpus::{
    corpus_stats, dedup, dedup_global, CorpusStats, DedupReport, Document, MonoCorpus, StageCount,
};
use longtail_core::filters::{
    annotate_document, apply_verdicts, build_frequency_wordlist, build_tfiif_wordlist,
    cluster_label, cluster_wordlists, filter_tfiif, negative_filter, rrr_gate, tokenize,
    wordlist_verdict, ClusterCorpora, Declustered, IifTable, NegativeFilterRule, RrrParams,
    RrrReport, StageReport, WordList, DEFAULT_IN_LANGUAGE_THRESHOLD, DEFAULT_KAPPA, DEFAULT_TAU,
    DEFAULT_WORDLIST_SIZE,
};
use longtail_core::langid::{
    evaluate, pare_languages, train, BatchMode, ConfusionMatrix, FeatureSpec, LangIdModel,
    ParingReport, ParingThresholds, Predictor, TrainConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{self, IngestMode, IngestReport};
use crate::model_file;

pub const DEFAULT_MIN_SENTENCES: usize = 25_000;
pub const DROP_DUPLICATE: &str = "duplicate";

pub const STAGE_ANNOTATE: &str = "annotate";
pub const STAGE_DOC_CONSISTENCY: &str = "doc_consistency";
pub const STAGE_WORDLIST: &str = "wordlist";
pub const STAGE_DECLUSTER: &str = "decluster";
pub const STAGE_TFIIF: &str = "tfiif";
pub const STAGE_NEGATIVE: &str = "negative";
pub const STAGE_DEDUP: &str = "dedup";

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Worker threads; has no effect on output bytes.
    pub workers: usize,
    /// Corpora below this size are flagged in the summary.
    pub min_sentences: usize,
    pub input: InputConfig,
    pub output: OutputConfig,
    pub langid: LangIdConfig,
    pub paring: ParingConfig,
    pub clustering: ClusteringConfig,
    pub stages: StagesConfig,
    pub anomaly: AnomalyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            workers: 1,
            min_sentences: DEFAULT_MIN_SENTENCES,
            input: InputConfig::default(),
            output: OutputConfig::default(),
            langid: LangIdConfig::default(),
            paring: ParingConfig::default(),
            clustering: ClusteringConfig::default(),
            stages: StagesConfig::default(),
            anomaly: AnomalyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// JSONL crawl.
    pub crawl: PathBuf,
    pub mode: IngestMode,
    /// Labeled `lang<TAB>text` LangID training data.
    pub train: Option<PathBuf>,
    /// Labeled held-out data; the training data stands in when absent.
    pub eval: Option<PathBuf>,
    /// Pretrained model; trained from `train` when absent.
    pub model: Option<PathBuf>,
    /// Internet frequency table; counted from the crawl when absent.
    pub iif: Option<PathBuf>,
    pub negative_rules: Option<PathBuf>,
    /// Directory of `<lang>.txt` reference corpora for anomaly scores; the
    /// training data stands in for missing languages.
    pub reference_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub write_annotated: bool,
    pub save_model: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            write_annotated: false,
            save_model: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LangIdConfig {
    pub ngram_orders: Vec<u32>,
    pub n_buckets: u32,
    pub hash_seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Mini-batch size; full-batch training when absent.
    pub batch_size: Option<usize>,
}

impl Default for LangIdConfig {
    fn default() -> Self {
        let spec = FeatureSpec::default();
        let train = TrainConfig::default();
        LangIdConfig {
            ngram_orders: spec.ngram_orders,
            n_buckets: spec.n_buckets,
            hash_seed: spec.hash_seed,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            seed: train.seed,
            batch_size: None,
        }
    }
}

impl LangIdConfig {
    pub fn feature_spec(&self) -> Result<FeatureSpec> {
        Ok(FeatureSpec::new(
            self.ngram_orders.iter().copied(),
            self.n_buckets,
            self.hash_seed,
        )?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed: self.seed,
            batch: self.batch_size.map_or(BatchMode::Full, BatchMode::Mini),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParingConfig {
    /// Retrain without the flagged languages. Off by default: the report is
    /// recorded either way.
    pub apply: bool,
    pub min_precision: f64,
    pub max_confusion: f64,
    pub min_examples: usize,
}

impl Default for ParingConfig {
    fn default() -> Self {
        let t = ParingThresholds::default();
        ParingConfig {
            apply: false,
            min_precision: t.min_precision,
            max_confusion: t.max_confusion,
            min_examples: t.min_examples,
        }
    }
}

impl ParingConfig {
    pub fn thresholds(&self) -> ParingThresholds {
        ParingThresholds {
            min_precision: self.min_precision,
            max_confusion: self.max_confusion,
            min_examples: self.min_examples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub distance_threshold: f64,
    /// Cut into exactly this many clusters instead of at the threshold.
    pub n_clusters: Option<usize>,
    pub max_size: usize,
    /// Languages forced into clusters of their own.
    pub singletons: Vec<String>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            distance_threshold: 0.8,
            n_clusters: None,
            max_size: 20,
            singletons: Vec::new(),
        }
    }
}

impl ClusteringConfig {
    pub fn cut(&self) -> Cut {
        match self.n_clusters {
            Some(k) => Cut::NClusters(k),
            None => Cut::DistanceThreshold(self.distance_threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggle {
    pub enabled: bool,
}

impl Default for Toggle {
    fn default() -> Self {
        Toggle { enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WordlistStage {
    pub enabled: bool,
    pub size: usize,
    pub threshold: f64,
}

impl Default for WordlistStage {
    fn default() -> Self {
        WordlistStage {
            enabled: true,
            size: DEFAULT_WORDLIST_SIZE,
            threshold: DEFAULT_IN_LANGUAGE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeclusterStage {
    pub enabled: bool,
    /// Second-pass model; the pipeline model is reused when absent.
    pub model: Option<PathBuf>,
}

impl Default for DeclusterStage {
    fn default() -> Self {
        DeclusterStage {
            enabled: true,
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfiifStage {
    pub enabled: bool,
    pub kappa: usize,
    pub tau: usize,
    pub threshold: f64,
    pub rho: f64,
    pub rrr_threshold: f64,
    pub min_crawl_removed: f64,
    pub min_recall: f64,
}

impl Default for TfiifStage {
    fn default() -> Self {
        let p = RrrParams::default();
        TfiifStage {
            enabled: true,
            kappa: DEFAULT_KAPPA,
            tau: DEFAULT_TAU,
            threshold: DEFAULT_IN_LANGUAGE_THRESHOLD,
            rho: p.rho,
            rrr_threshold: p.rrr_threshold,
            min_crawl_removed: p.min_crawl_removed,
            min_recall: p.min_recall,
        }
    }
}

impl TfiifStage {
    pub fn rrr_params(&self) -> RrrParams {
        RrrParams {
            rho: self.rho,
            rrr_threshold: self.rrr_threshold,
            min_crawl_removed: self.min_crawl_removed,
            min_recall: self.min_recall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupStage {
    pub enabled: bool,
    /// Keep a sentence only in the first language (lexicographic) holding it.
    pub global: bool,
}

impl Default for DedupStage {
    fn default() -> Self {
        DedupStage {
            enabled: true,
            global: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StagesConfig {
    pub annotate: Toggle,
    pub doc_consistency: Toggle,
    pub wordlist: WordlistStage,
    pub decluster: DeclusterStage,
    pub tfiif: TfiifStage,
    pub negative: Toggle,
    pub dedup: DedupStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyConfig {
    pub enabled: bool,
    pub top_n: usize,
    pub suspicious_below: f64,
    pub suspicious_min_sentences: usize,
    pub echo_above: f64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        let c = AnomalyCutoffs::default();
        AnomalyConfig {
            enabled: true,
            top_n: DEFAULT_TOP_N,
            suspicious_below: c.suspicious_below,
            suspicious_min_sentences: c.suspicious_min_sentences,
            echo_above: c.echo_above,
        }
    }
}

impl AnomalyConfig {
    pub fn cutoffs(&self) -> AnomalyCutoffs {
        AnomalyCutoffs {
            suspicious_below: self.suspicious_below,
            suspicious_min_sentences: self.suspicious_min_sentences,
            echo_above: self.echo_above,
        }
    }
}

fn unit_interval(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {x}")))
    }
}

impl PipelineConfig {
    /// Reads a TOML config; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input.crawl);
        fix(&mut self.output.dir);
        for p in [
            &mut self.input.train,
            &mut self.input.eval,
            &mut self.input.model,
            &mut self.input.iif,
            &mut self.input.negative_rules,
            &mut self.input.reference_dir,
            &mut self.stages.decluster.model,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.input.model.is_none() {
            self.langid.feature_spec()?;
            if self.langid.batch_size == Some(0) {
                return Err(Error::Config("batch_size must be at least 1".into()));
            }
        }
        unit_interval("paring.min_precision", self.paring.min_precision)?;
        unit_interval("paring.max_confusion", self.paring.max_confusion)?;
        if !self.clustering.distance_threshold.is_finite() {
            return Err(Error::Config(
                "clustering.distance_threshold must be finite".into(),
            ));
        }
        if self.clustering.max_size == 0 {
            return Err(Error::Config(
                "clustering.max_size must be at least 1".into(),
            ));
        }
        let w = &self.stages.wordlist;
        unit_interval("stages.wordlist.threshold", w.threshold)?;
        if w.enabled && w.size == 0 {
            return Err(Error::Config(
                "stages.wordlist.size must be at least 1".into(),
            ));
        }
        let t = &self.stages.tfiif;
        unit_interval("stages.tfiif.threshold", t.threshold)?;
        unit_interval("stages.tfiif.min_crawl_removed", t.min_crawl_removed)?;
        unit_interval("stages.tfiif.min_recall", t.min_recall)?;
        if t.enabled && (t.kappa == 0 || t.tau == 0) {
            return Err(Error::Config(
                "stages.tfiif kappa and tau must be at least 1".into(),
            ));
        }
        if !(t.rho.is_finite() && t.rho > 0.0) {
            return Err(Error::Config("stages.tfiif.rho must be positive".into()));
        }
        if self.anomaly.enabled && self.anomaly.top_n == 0 {
            return Err(Error::Config("anomaly.top_n must be at least 1".into()));
        }
        let needs_train = self.input.model.is_none()
            || self.stages.wordlist.enabled
            || self.stages.tfiif.enabled
            || self.paring.apply;
        if needs_train && self.input.train.is_none() {
            return Err(Error::Config(
                "input.train is required by the enabled stages".into(),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the worker count and the
    /// output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        c.output.dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

// ---------------------------------------------------------------------------
// Inputs

/// Everything a run reads, loaded up front.
#[derive(Debug, Clone, Default)]
pub struct PipelineInputs {
    pub documents: Vec<Document>,
    pub ingest: IngestReport,
    pub train: Vec<(String, String)>,
    pub eval: Vec<(String, String)>,
    pub model: Option<LangIdModel>,
    pub decluster_model: Option<LangIdModel>,
    pub iif: Option<IifTable>,
    pub rules: Vec<NegativeFilterRule>,
    pub references: BTreeMap<String, MonoCorpus>,
}

impl PipelineInputs {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let (documents, ingest) = io::load_documents(&config.input.crawl, config.input.mode)?;
        let labeled = |p: &Option<PathBuf>| p.as_deref().map(io::read_labeled).transpose();
        let model = |p: &Option<PathBuf>| p.as_deref().map(model_file::load).transpose();
        Ok(PipelineInputs {
            documents,
            ingest,
            train: labeled(&config.input.train)?.unwrap_or_default(),
            eval: labeled(&config.input.eval)?.unwrap_or_default(),
            model: model(&config.input.model)?,
            decluster_model: model(&config.stages.decluster.model)?,
            iif: config
                .input
                .iif
                .as_deref()
                .map(|p| io::read_iif(p, config.stages.tfiif.kappa))
                .transpose()?,
            rules: config
                .input
                .negative_rules
                .as_deref()
                .map(io::read_rules)
                .transpose()?
                .unwrap_or_default(),
            references: config
                .input
                .reference_dir
                .as_deref()
                .map(io::read_corpus_dir)
                .transpose()?
                .unwrap_or_default(),
        })
    }
}

// ---------------------------------------------------------------------------
// Manifests

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub config_hash: String,
    pub wall_ms: u64,
    /// Keyed by language, or by cluster label for cluster-level stages.
    pub entries: BTreeMap<String, StageReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rrr: Vec<RrrReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSummary {
    pub stats: CorpusStats,
    pub below_min_sentences: bool,
    pub funnel: Vec<StageCount>,
    pub dedup: Option<DedupReport>,
    pub rrr: Option<RrrReport>,
    pub anomaly: Option<AnomalyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min_sentences: usize,
    pub languages: BTreeMap<String, LanguageSummary>,
    pub clusters: BTreeMap<String, u32>,
    pub paring: ParingReport,
    pub ingest: IngestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub stages: Vec<StageManifest>,
    pub summary: Summary,
}

impl Manifest {
    /// Copy with wall times zeroed, for comparing runs.
    pub fn without_timings(&self) -> Manifest {
        let mut m = self.clone();
        for s in &mut m.stages {
            s.wall_ms = 0;
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Running

/// Result of a run held in memory.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub corpora: BTreeMap<String, MonoCorpus>,
    pub manifest: Manifest,
    pub model: LangIdModel,
    pub clusters: ClusterMap,
    pub annotated: Vec<Document>,
}

struct Recorder {
    hash: String,
    stages: Vec<StageManifest>,
}

impl Recorder {
    fn push(
        &mut self,
        stage: &str,
        started: Instant,
        entries: BTreeMap<String, StageReport>,
        rrr: Vec<RrrReport>,
    ) {
        self.stages.push(StageManifest {
            stage: stage.into(),
            config_hash: self.hash.clone(),
            wall_ms: started.elapsed().as_millis() as u64,
            entries,
            rrr,
        });
    }
}

fn cluster_entries(reports: &BTreeMap<ClusterId, StageReport>) -> BTreeMap<String, StageReport> {
    reports
        .iter()
        .map(|(&id, r)| (cluster_label(id), r.clone()))
        .collect()
}

fn train_corpora(train: &[(String, String)]) -> BTreeMap<String, MonoCorpus> {
    io::labeled_corpora(train)
}

/// `(text, lang)` pairs without the `excluded` languages.
fn text_label<'a>(rows: &'a [(String, String)], excluded: &[&str]) -> Vec<(&'a str, &'a str)> {
    rows.iter()
        .filter(|(l, _)| !excluded.contains(&l.as_str()))
        .map(|(l, t)| (t.as_str(), l.as_str()))
        .collect()
}

/// Trains (or takes) the model, pares, and clusters its languages.
pub fn prepare_model(
    config: &PipelineConfig,
    inputs: &PipelineInputs,
) -> Result<(LangIdModel, ParingReport, ClusterMap)> {
    let spec = config.langid.feature_spec();
    let train_cfg = config.langid.train_config();
    let mut model = match &inputs.model {
        Some(m) => m.clone(),
        None => train(&text_label(&inputs.train, &[]), &spec?, &train_cfg)?,
    };
    let held_out = |model: &LangIdModel| -> Result<ConfusionMatrix> {
        let rows = if inputs.eval.is_empty() {
            &inputs.train
        } else {
            &inputs.eval
        };
        let rows: Vec<(&str, &str)> = rows
            .iter()
            .filter(|(l, _)| model.lang_index(l).is_some())
            .map(|(l, t)| (t.as_str(), l.as_str()))
            .collect();
        Ok(evaluate(model, &rows)?)
    };
    let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
    for (l, _) in &inputs.train {
        *sizes.entry(l.clone()).or_insert(0) += 1;
    }
    let mut cm = held_out(&model)?;
    let paring = pare_languages(&cm, &sizes, &config.paring.thresholds());
    let dropped: Vec<&str> = paring.dropped().collect();
    if config.paring.apply && !dropped.is_empty() {
        if inputs.model.is_some() {
            return Err(Error::Config(
                "paring.apply needs a model trained by the pipeline".into(),
            ));
        }
        model = train(
            &text_label(&inputs.train, &dropped),
            &config.langid.feature_spec()?,
            &train_cfg,
        )?;
        cm = held_out(&model)?;
    }
    let dist = fnr_distance_matrix(&cm);
    let map = agglomerative_cluster(&dist, Linkage::Average, config.clustering.cut())?;
    let map = resplit(&map, &dist, config.clustering.max_size)?;
    let singles: Vec<&str> = config
        .clustering
        .singletons
        .iter()
        .map(String::as_str)
        .filter(|l| model.lang_index(l).is_some())
        .collect();
    let map = add_singletons(&map, singles);
    Ok((model, paring, map))
}

/// Runs every stage in memory on a pool of `config.workers` threads.
pub fn run(config: &PipelineConfig, inputs: &PipelineInputs) -> Result<PipelineRun> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| run_stages(config, inputs))
}

fn run_stages(config: &PipelineConfig, inputs: &PipelineInputs) -> Result<PipelineRun> {
    let (model, paring, clusters) = prepare_model(config, inputs)?;
    let mut rec = Recorder {
        hash: config.hash(),
        stages: Vec::new(),
    };
    let stages = &config.stages;
    let train = train_corpora(&inputs.train);

    // annotate
    let started = Instant::now();
    let annotated: Vec<Document> = if stages.annotate.enabled {
        inputs
            .documents
            .par_iter()
            .map(|d| annotate_document(d, &model, &clusters))
            .collect::<std::result::Result<_, _>>()?
    } else {
        for d in &inputs.documents {
            if !d.is_annotated() {
                return Err(longtail_core::Error::NotAnnotated(d.id.clone()).into());
            }
        }
        inputs.documents.clone()
    };
    if stages.annotate.enabled {
        let mut reports: BTreeMap<ClusterId, StageReport> = BTreeMap::new();
        for s in annotated.iter().flat_map(|d| &d.sentences) {
            let r = reports
                .entry(s.predicted_cluster.expect("annotated"))
                .or_default();
            r.input += 1;
            r.output += 1;
        }
        rec.push(
            STAGE_ANNOTATE,
            started,
            cluster_entries(&reports),
            Vec::new(),
        );
    }

    // doc-consistency
    let started = Instant::now();
    let mut by_cluster = if stages.doc_consistency.enabled {
        let mut out = ClusterCorpora::default();
        for d in &annotated {
            out.push_document(d)?;
        }
        rec.push(
            STAGE_DOC_CONSISTENCY,
            started,
            cluster_entries(&out.reports),
            Vec::new(),
        );
        out.corpora
    } else {
        let mut out: BTreeMap<ClusterId, MonoCorpus> = BTreeMap::new();
        for s in annotated.iter().flat_map(|d| &d.sentences) {
            let c = s
                .predicted_cluster
                .ok_or_else(|| longtail_core::Error::NotAnnotated(s.text.clone()))?;
            out.entry(c)
                .or_insert_with(|| MonoCorpus::new(cluster_label(c), Vec::new()))
                .sentences
                .push(s.text.clone());
        }
        out
    };

    // wordlist
    if stages.wordlist.enabled {
        let started = Instant::now();
        let lists: BTreeMap<String, WordList> = train
            .values()
            .map(|c| {
                Ok((
                    c.lang.clone(),
                    build_frequency_wordlist(c, stages.wordlist.size)?,
                ))
            })
            .collect::<Result<_>>()?;
        let mut reports = BTreeMap::new();
        for (&id, corpus) in by_cluster.iter_mut() {
            let members = cluster_wordlists(clusters.languages_in(id), &lists)?;
            let sets: Vec<_> = members.iter().map(|l| l.tokens()).collect();
            let verdicts: Vec<_> = corpus
                .sentences
                .par_iter()
                .map(|s| wordlist_verdict(s, &sets, stages.wordlist.threshold))
                .collect();
            let (kept, report) = apply_verdicts(corpus, verdicts);
            *corpus = kept;
            reports.insert(id, report);
        }
        rec.push(
            STAGE_WORDLIST,
            started,
            cluster_entries(&reports),
            Vec::new(),
        );
    }

    // decluster; when disabled, sentences follow the pipeline model's prediction
    let started = Instant::now();
    let second: &LangIdModel = match (&inputs.decluster_model, stages.decluster.enabled) {
        (Some(m), true) => m,
        _ => &model,
    };
    let mut split = Declustered::default();
    for (&id, corpus) in &by_cluster {
        let predicted: Vec<String> = corpus
            .sentences
            .par_iter()
            .map(|s| second.predict(s).lang)
            .collect();
        split.add_cluster(id, corpus, &predicted, &clusters);
    }
    if stages.decluster.enabled {
        rec.push(
            STAGE_DECLUSTER,
            started,
            cluster_entries(&split.reports),
            Vec::new(),
        );
    }
    let mut corpora = split.corpora;
    for lang in clusters.assignment.keys() {
        corpora
            .entry(lang.clone())
            .or_insert_with(|| MonoCorpus::new(lang.clone(), Vec::new()));
    }
    drop(by_cluster);
    for c in corpora.values_mut() {
        c.record_stage(STAGE_DECLUSTER);
    }

    // tfiif, gated per language
    let mut rrr_by_lang: BTreeMap<String, RrrReport> = BTreeMap::new();
    if stages.tfiif.enabled {
        let started = Instant::now();
        let iif = match &inputs.iif {
            Some(t) => Some(t.clone()),
            None if corpora.values().any(|c| !c.is_empty()) => {
                Some(crawl_iif(&inputs.documents, stages.tfiif.kappa)?)
            }
            None => None,
        };
        let eval = io::labeled_corpora(&inputs.eval);
        let params = stages.tfiif.rrr_params();
        let results: Vec<(String, MonoCorpus, StageReport, Option<RrrReport>)> = corpora
            .par_iter()
            .map(|(lang, corpus)| -> Result<_> {
                let Some(iif) = &iif else {
                    return Ok((lang.clone(), corpus.clone(), StageReport::default(), None));
                };
                let source = train
                    .get(lang)
                    .ok_or_else(|| longtail_core::Error::MissingWordlist(lang.clone()))?;
                let list = build_tfiif_wordlist(source, iif, stages.tfiif.tau)?;
                let gold = eval.get(lang).filter(|c| !c.is_empty()).unwrap_or(source);
                let (gold_kept, _) = filter_tfiif(gold, &list, stages.tfiif.threshold)?;
                let (filtered, report) = filter_tfiif(corpus, &list, stages.tfiif.threshold)?;
                let r_gold = gold_kept.len() as f64 / gold.len() as f64;
                let r_crawl = if corpus.is_empty() {
                    1.0
                } else {
                    filtered.len() as f64 / corpus.len() as f64
                };
                let mut gate = rrr_gate(r_gold, r_crawl, &params)?;
                gate.lang = Some(lang.clone());
                if gate.apply_filter {
                    Ok((lang.clone(), filtered, report, Some(gate)))
                } else {
                    let report = StageReport {
                        input: corpus.len(),
                        output: corpus.len(),
                        ..StageReport::default()
                    };
                    Ok((lang.clone(), corpus.clone(), report, Some(gate)))
                }
            })
            .collect::<Result<_>>()?;
        let mut entries = BTreeMap::new();
        let mut gates = Vec::new();
        for (lang, mut corpus, report, gate) in results {
            corpus.record_stage(STAGE_TFIIF);
            if let Some(g) = gate {
                rrr_by_lang.insert(lang.clone(), g.clone());
                gates.push(g);
            }
            entries.insert(lang.clone(), report);
            corpora.insert(lang, corpus);
        }
        rec.push(STAGE_TFIIF, started, entries, gates);
    }

    // negative
    if stages.negative.enabled {
        let started = Instant::now();
        let mut entries = BTreeMap::new();
        for corpus in corpora.values_mut() {
            let (mut kept, report) = negative_filter(corpus, &inputs.rules)?;
            kept.record_stage(STAGE_NEGATIVE);
            entries.insert(kept.lang.clone(), report);
            *corpus = kept;
        }
        rec.push(STAGE_NEGATIVE, started, entries, Vec::new());
    }

    // dedup
    let mut dedup_reports: BTreeMap<String, DedupReport> = BTreeMap::new();
    if stages.dedup.enabled {
        let started = Instant::now();
        let results: Vec<(MonoCorpus, DedupReport)> = if stages.dedup.global {
            dedup_global(&corpora.values().cloned().collect::<Vec<_>>())
        } else {
            corpora
                .values()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|c| dedup(c))
                .collect()
        };
        let mut entries = BTreeMap::new();
        for (mut c, r) in results {
            c.record_stage(STAGE_DEDUP);
            let mut report = StageReport {
                input: r.before,
                output: r.after,
                ..StageReport::default()
            };
            if r.before > r.after {
                report
                    .dropped_by_reason
                    .insert(DROP_DUPLICATE.into(), r.before - r.after);
            }
            entries.insert(c.lang.clone(), report);
            dedup_reports.insert(c.lang.clone(), r);
            corpora.insert(c.lang.clone(), c);
        }
        rec.push(STAGE_DEDUP, started, entries, Vec::new());
    }

    let cutoffs = config.anomaly.cutoffs();
    let languages = corpora
        .values()
        .map(|c| {
            let anomaly = if config.anomaly.enabled && !c.is_empty() {
                let reference = inputs
                    .references
                    .get(&c.lang)
                    .or_else(|| train.get(&c.lang));
                match reference {
                    Some(r) if !r.is_empty() => {
                        anomaly_report_with(c, r, config.anomaly.top_n, &cutoffs).ok()
                    }
                    _ => None,
                }
            } else {
                None
            };
            let summary = LanguageSummary {
                stats: corpus_stats(c),
                below_min_sentences: c.len() < config.min_sentences,
                funnel: c.stage_counts.clone(),
                dedup: dedup_reports.get(&c.lang).copied(),
                rrr: rrr_by_lang.get(&c.lang).cloned(),
                anomaly,
            };
            (c.lang.clone(), summary)
        })
        .collect();

    let manifest = Manifest {
        config_hash: rec.hash.clone(),
        stages: rec.stages,
        summary: Summary {
            min_sentences: config.min_sentences,
            languages,
            clusters: io::cluster_map_json(&clusters)
                .into_iter()
                .map(|(l, c)| (l.to_string(), c))
                .collect(),
            paring,
            ingest: inputs.ingest.clone(),
        },
    };
    Ok(PipelineRun {
        corpora,
        manifest,
        model,
        clusters,
        annotated,
    })
}

/// Token counts over every crawl sentence, as an internet frequency table.
pub fn crawl_iif(docs: &[Document], kappa: usize) -> Result<IifTable> {
    let per_doc: Vec<BTreeMap<String, u64>> = docs
        .par_iter()
        .map(|d| {
            let mut m = BTreeMap::new();
            for s in &d.sentences {
                for t in tokenize(&s.text) {
                    *m.entry(t).or_insert(0) += 1;
                }
            }
            m
        })
        .collect();
    let mut freqs: BTreeMap<String, u64> = BTreeMap::new();
    for m in per_doc {
        for (t, c) in m {
            *freqs.entry(t).or_insert(0) += c;
        }
    }
    Ok(IifTable::new(freqs, kappa)?)
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CORPORA_DIR: &str = "corpora";

/// Writes corpora, manifest, cluster map and optional extras under the
/// output directory.
pub fn write_outputs(config: &PipelineConfig, run: &PipelineRun) -> Result<()> {
    let dir = &config.output.dir;
    let corpora_dir = dir.join(CORPORA_DIR);
    std::fs::create_dir_all(&corpora_dir).map_err(|e| Error::io(&corpora_dir, e))?;
    for c in run.corpora.values() {
        io::write_corpus(&corpora_dir, c)?;
    }
    io::write_json(&dir.join(MANIFEST_FILE), &run.manifest)?;
    io::write_cluster_map(&dir.join("clusters.json"), &run.clusters)?;
    io::write_cluster_tsv(&dir.join("clusters.tsv"), &run.clusters)?;
    if config.output.write_annotated {
        io::write_documents(&dir.join("annotated.jsonl"), &run.annotated)?;
    }
    if config.output.save_model {
        model_file::save(&dir.join("langid.bin"), &run.model)?;
    }
    Ok(())
}

/// Loads inputs, runs and writes outputs.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    let inputs = PipelineInputs::load(config)?;
    let run = run(config, &inputs)?;
    write_outputs(config, &run)?;
    Ok(run)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = if dir.is_dir() {
        dir.join(MANIFEST_FILE)
    } else {
        dir.to_path_buf()
    };
    io::read_json(&path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let c = PipelineConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        let empty: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(empty, c);
    }

    #[test]
    fn hash_ignores_workers_and_output_dir() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            workers: 8,
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        let mut moved = a.clone();
        moved.output.dir = "elsewhere".into();
        assert_eq!(a.hash(), moved.hash());
        let mut c = a.clone();
        c.stages.wordlist.threshold = 0.3;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation() {
        let mut c = PipelineConfig::default();
        c.input.train = Some("t.tsv".into());
        c.validate().unwrap();
        c.workers = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.workers = 1;
        c.stages.tfiif.threshold = 1.5;
        assert!(c.validate().is_err());
        assert!(toml::from_str::<PipelineConfig>("[stages.nope]\nenabled = true").is_err());
        let no_train = PipelineConfig::default();
        assert!(no_train.validate().is_err());
    }
}
