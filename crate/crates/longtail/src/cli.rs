//! Command-line interface. Every command prints a JSON report on stdout, or
//! indented text with `--pretty`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use longtail_core::anomaly::{anomaly_report_with, AnomalyCutoffs, AnomalyReport, DEFAULT_TOP_N};
use longtail_core::cluster::{
    add_singletons, agglomerative_cluster, fnr_distance_matrix, resplit, ClusterId, Cut, Linkage,
};
use longtail_core::corpus::{corpus_stats, dedup, dedup_global};
use longtail_core::filters::{
    build_frequency_wordlist, build_tfiif_wordlist, cluster_label, consistency_histogram,
    decluster, filter_doc_consistency, filter_tfiif, filter_wordlist, negative_filter, rrr_gate,
    tokenize, IifTable, RrrParams, WordListKind, DEFAULT_IN_LANGUAGE_THRESHOLD, DEFAULT_KAPPA,
    DEFAULT_TAU, DEFAULT_WORDLIST_SIZE,
};
use longtail_core::langid::{
    evaluate, pare_languages, train_with_history, BatchMode, ConfusionMatrix, FeatureSpec,
    ParingThresholds, TrainConfig,
};
use longtail_core::metrics::{
    audit_score, build_bins, corpus_chrf, hit_rate, rtt_langid_chrf, sentence_chrf, AuditLabels,
    ChrfParams, FrequencyBins, RttMode, DEFAULT_BIN_BOUNDARIES,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::{self, IngestMode};
use crate::model_file;
use crate::pipeline::{self, PipelineConfig};
use crate::report;
use crate::translator::CommandTranslator;

#[derive(Debug, Parser)]
#[command(
    name = "longtail",
    version,
    about = "Mine and audit monolingual corpora for long-tail languages"
)]
pub struct Cli {
    /// Human-readable text instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and normalize a JSONL crawl.
    Ingest(IngestArgs),
    /// Train a LangID model from labeled TSV.
    TrainLangid(TrainArgs),
    /// Evaluate a model on labeled TSV.
    EvalLangid(EvalArgs),
    /// Flag languages with low precision, heavy confusion or little data.
    Pare(PareArgs),
    /// Cluster confusable languages from a confusion matrix.
    Cluster(ClusterArgs),
    /// Attach predicted language and cluster to every sentence.
    Annotate(AnnotateArgs),
    /// Run one filter.
    #[command(subcommand)]
    Filter(FilterCommand),
    /// Build wordlists, internet-frequency tables and frequency bins.
    #[command(subcommand)]
    Build(BuildCommand),
    /// Decide whether TF-IIF filtering is worth applying.
    Rrr(RrrArgs),
    /// Token-distribution anomaly scores.
    Anomaly(AnomalyArgs),
    /// Exact sentence deduplication.
    Dedup(DedupArgs),
    /// Corpus statistics.
    Stats(StatsArgs),
    /// Weighted score of audit label fractions.
    AuditScore(AuditArgs),
    /// Corpus-level ChrF.
    Chrf(ChrfArgs),
    /// Token hit-rate per frequency bin.
    Hitrate(HitrateArgs),
    /// Round-trip ChrF over LangID-accepted intermediates.
    Rtt(RttArgs),
    /// Run the full pipeline or summarize its manifest.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Normalized documents are written here.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Abort on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled `lang<TAB>text` file.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = FeatureSpec::default().ngram_orders)]
    pub orders: Vec<u32>,
    #[arg(long, default_value_t = FeatureSpec::default().n_buckets)]
    pub buckets: u32,
    #[arg(long, default_value_t = 0)]
    pub hash_seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mini-batch size; full-batch training when absent.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub eval: PathBuf,
    /// Confusion matrix JSON is written here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PareArgs {
    #[arg(long)]
    pub confusion: PathBuf,
    /// Labeled training data, for per-language example counts.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value_t = ParingThresholds::default().min_precision)]
    pub min_precision: f64,
    #[arg(long, default_value_t = ParingThresholds::default().max_confusion)]
    pub max_confusion: f64,
    #[arg(long, default_value_t = ParingThresholds::default().min_examples)]
    pub min_examples: usize,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub confusion: PathBuf,
    #[arg(long, default_value_t = 0.8, conflicts_with = "n_clusters")]
    pub threshold: f64,
    #[arg(long)]
    pub n_clusters: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub max_size: usize,
    /// Language forced into a cluster of its own; repeatable.
    #[arg(long = "singleton")]
    pub singletons: Vec<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub clusters: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum FilterCommand {
    /// Keep sentences whose cluster matches their document's; writes
    /// `cluster-<id>.txt` corpora.
    DocConsistency {
        /// Annotated JSONL.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        histogram_width: f64,
    },
    /// Keep sentences with enough tokens in a cluster language's wordlist.
    Wordlist {
        #[arg(long)]
        input: PathBuf,
        /// Cluster language; repeatable. Its list is `<wordlists>/<lang>.tsv`.
        #[arg(long = "lang", required = true)]
        langs: Vec<String>,
        #[arg(long)]
        wordlists: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IN_LANGUAGE_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Split `cluster-<id>.txt` corpora into per-language corpora.
    Decluster {
        #[arg(long)]
        input_dir: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Keep sentences with enough tokens in a TF-IIF wordlist.
    Tfiif {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        wordlist: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IN_LANGUAGE_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Drop sentences matched by hand-written rules.
    Negative {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lang: String,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum BuildCommand {
    /// Most frequent tokens of a corpus.
    Wordlist {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lang: String,
        #[arg(long, default_value_t = DEFAULT_WORDLIST_SIZE)]
        size: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Token counts of text files (`.jsonl` crawls or one sentence per line).
    Iif {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// TF-IIF wordlist of a corpus.
    TfiifList {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lang: String,
        #[arg(long)]
        iif: PathBuf,
        /// Used only when the table has no sidecar.
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: usize,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Frequency bins over a corpus's token ranking.
    Bins {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BIN_BOUNDARIES.to_vec())]
        boundaries: Vec<usize>,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RrrArgs {
    #[arg(long)]
    pub lang: Option<String>,
    /// Share of the gold set kept by the filter.
    #[arg(long, required_unless_present = "wordlist")]
    pub r_gold: Option<f64>,
    /// Share of the crawl kept by the filter.
    #[arg(long, required_unless_present = "wordlist")]
    pub r_crawl: Option<f64>,
    /// Measure both rates with this TF-IIF wordlist instead.
    #[arg(long, requires_all = ["gold", "crawl"], conflicts_with_all = ["r_gold", "r_crawl"])]
    pub wordlist: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub crawl: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_IN_LANGUAGE_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = RrrParams::default().rho)]
    pub rho: f64,
    #[arg(long, default_value_t = RrrParams::default().rrr_threshold)]
    pub rrr_threshold: f64,
    #[arg(long, default_value_t = RrrParams::default().min_crawl_removed)]
    pub min_crawl_removed: f64,
    #[arg(long, default_value_t = RrrParams::default().min_recall)]
    pub min_recall: f64,
}

#[derive(Debug, Args)]
pub struct AnomalyArgs {
    /// Corpus file, or a directory of `<lang>.txt` corpora for batch mode.
    #[arg(long)]
    pub input: PathBuf,
    /// Reference corpus file, or a directory in batch mode.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    pub top_n: usize,
    /// Batch mode: ranking by harmonic score written as TSV.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    /// Corpus files; repeatable.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Keep a sentence only in the first corpus (by language) holding it.
    #[arg(long)]
    pub global: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub cc: f64,
    #[arg(long, default_value_t = 0.0)]
    pub cb: f64,
    #[arg(long, default_value_t = 0.0)]
    pub ca: f64,
    #[arg(long, default_value_t = 0.0)]
    pub wd: f64,
}

#[derive(Debug, Args)]
pub struct ChrfArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Also list sentence-level scores.
    #[arg(long)]
    pub sentences: bool,
}

#[derive(Debug, Args)]
pub struct HitrateArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Bins JSON from `build bins`.
    #[arg(long)]
    pub bins: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Loose,
    Strict,
}

#[derive(Debug, Args)]
pub struct RttArgs {
    /// English source segments, one per line.
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub lang: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Loose)]
    pub mode: ModeArg,
    #[arg(long)]
    pub translator_cmd: String,
    /// LangID model that checks the intermediate language.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    /// Run every stage from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Funnel table of a manifest (file or output directory).
    Report {
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// A command's result: JSON, plus an optional dedicated text rendering.
pub struct Output {
    pub json: Value,
    pub text: Option<String>,
}

impl Output {
    fn json<T: Serialize>(value: &T) -> Result<Self> {
        Ok(Output {
            json: serde_json::to_value(value)?,
            text: None,
        })
    }
}

/// Parses `args` (program name first), runs the command and writes its
/// report. Returns the process exit code: 0, 1 for usage errors, 2 for data
/// errors.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            let text = if cli.pretty {
                out.text.unwrap_or_else(|| render_value(&out.json))
            } else {
                let mut s = serde_json::to_string_pretty(&out.json).expect("JSON value serializes");
                s.push('\n');
                s
            };
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn mode(strict: bool) -> IngestMode {
    if strict {
        IngestMode::Strict
    } else {
        IngestMode::Lenient
    }
}

fn file_lang(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::Usage(format!("cannot take a language from {}", path.display())))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(io::read_corpus(path, "")?.sentences)
}

fn unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Usage(format!("--{name} must lie in [0, 1]")))
    }
}

pub fn execute(command: &Command) -> Result<Output> {
    match command {
        Command::Ingest(a) => {
            let (docs, report) = io::load_documents(&a.input, mode(a.strict))?;
            if let Some(out) = &a.output {
                io::write_documents(out, &docs)?;
            }
            Output::json(&report)
        }
        Command::TrainLangid(a) => {
            let spec = FeatureSpec::new(a.orders.iter().copied(), a.buckets, a.hash_seed)?;
            let cfg = TrainConfig {
                epochs: a.epochs,
                learning_rate: a.learning_rate,
                seed: a.seed,
                batch: match a.batch_size {
                    Some(0) => return Err(Error::Usage("--batch-size must be at least 1".into())),
                    Some(n) => BatchMode::Mini(n),
                    None => BatchMode::Full,
                },
            };
            let rows = io::read_labeled(&a.train)?;
            let rows: Vec<(&str, &str)> =
                rows.iter().map(|(l, t)| (t.as_str(), l.as_str())).collect();
            let (model, history) = train_with_history(&rows, &spec, &cfg)?;
            model_file::save(&a.output, &model)?;
            Output::json(&json!({
                "languages": model.languages,
                "examples": rows.len(),
                "initial_loss": history.first(),
                "final_loss": history.last(),
                "model": a.output,
            }))
        }
        Command::EvalLangid(a) => {
            let model = model_file::load(&a.model)?;
            let rows = io::read_labeled(&a.eval)?;
            let rows: Vec<(&str, &str)> =
                rows.iter().map(|(l, t)| (t.as_str(), l.as_str())).collect();
            let cm = evaluate(&model, &rows)?;
            if let Some(out) = &a.output {
                io::write_json(out, &cm)?;
            }
            Output::json(&eval_summary(&cm))
        }
        Command::Pare(a) => {
            let cm: ConfusionMatrix = io::read_json(&a.confusion)?;
            let mut sizes = BTreeMap::new();
            for (l, _) in io::read_labeled(&a.train)? {
                *sizes.entry(l).or_insert(0) += 1;
            }
            let t = ParingThresholds {
                min_precision: a.min_precision,
                max_confusion: a.max_confusion,
                min_examples: a.min_examples,
            };
            Output::json(&pare_languages(&cm, &sizes, &t))
        }
        Command::Cluster(a) => {
            let cm: ConfusionMatrix = io::read_json(&a.confusion)?;
            let dist = fnr_distance_matrix(&cm);
            let cut = a
                .n_clusters
                .map_or(Cut::DistanceThreshold(a.threshold), Cut::NClusters);
            let map = agglomerative_cluster(&dist, Linkage::Average, cut)?;
            let map = resplit(&map, &dist, a.max_size)?;
            for s in &a.singletons {
                cm.index_of(s)?;
            }
            let map = add_singletons(&map, a.singletons.iter().map(String::as_str));
            if let Some(p) = &a.output {
                io::write_cluster_map(p, &map)?;
            }
            if let Some(p) = &a.tsv {
                io::write_cluster_tsv(p, &map)?;
            }
            Output::json(&io::cluster_map_json(&map))
        }
        Command::Annotate(a) => {
            let model = model_file::load(&a.model)?;
            let clusters = io::read_cluster_map(&a.clusters)?;
            let (docs, ingest) = io::load_documents(&a.input, mode(a.strict))?;
            let out: Vec<_> = docs
                .iter()
                .map(|d| longtail_core::filters::annotate_document(d, &model, &clusters))
                .collect::<std::result::Result<_, _>>()?;
            io::write_documents(&a.output, &out)?;
            Output::json(&ingest)
        }
        Command::Filter(f) => filter(f),
        Command::Build(b) => build(b),
        Command::Rrr(a) => rrr(a),
        Command::Anomaly(a) => anomaly(a),
        Command::Dedup(a) => {
            let mut corpora = Vec::new();
            for p in &a.inputs {
                corpora.push(io::read_corpus(p, &file_lang(p)?)?);
            }
            corpora.sort_by(|x, y| x.lang.cmp(&y.lang));
            if corpora.windows(2).any(|w| w[0].lang == w[1].lang) {
                return Err(Error::Usage("two inputs share a language".into()));
            }
            let results = if a.global {
                dedup_global(&corpora)
            } else {
                corpora.iter().map(dedup).collect()
            };
            let mut reports = BTreeMap::new();
            for (c, r) in results {
                io::write_corpus(&a.output_dir, &c)?;
                reports.insert(c.lang.clone(), r);
            }
            Output::json(&reports)
        }
        Command::Stats(a) => {
            let mut stats = BTreeMap::new();
            for p in &a.inputs {
                let c = io::read_corpus(p, &file_lang(p)?)?;
                stats.insert(c.lang.clone(), corpus_stats(&c));
            }
            Output::json(&stats)
        }
        Command::AuditScore(a) => {
            let labels = AuditLabels {
                cc: a.cc,
                cb: a.cb,
                ca: a.ca,
                wd: a.wd,
            };
            Output::json(&json!({ "labels": labels, "score": audit_score(&labels)? }))
        }
        Command::Chrf(a) => {
            let hyps = read_lines(&a.hyp)?;
            let refs = read_lines(&a.reference)?;
            let params = ChrfParams::default();
            let score = corpus_chrf(&hyps, &refs, &params)?;
            let mut out = json!({
                "score": score,
                "signature": params.signature(),
                "segments": hyps.len(),
            });
            if a.sentences {
                let per: Vec<f64> = hyps
                    .iter()
                    .zip(&refs)
                    .map(|(h, r)| sentence_chrf(h, r, &params))
                    .collect();
                out["sentence_scores"] = json!(per);
            }
            Output::json(&out)
        }
        Command::Hitrate(a) => {
            let hyps = read_lines(&a.hyp)?;
            let refs = read_lines(&a.reference)?;
            let bins: FrequencyBins = io::read_json(&a.bins)?;
            let mut out = Vec::new();
            for i in 0..bins.len() {
                let rate = hit_rate(&hyps, &refs, bins.bin(i))?;
                out.push(json!({
                    "bin": i,
                    "ranks": [bins.boundaries[i], bins.boundaries[i + 1]],
                    "tokens": bins.bin(i).len(),
                    "hit_rate": rate,
                }));
            }
            Output::json(&json!({ "truncated": bins.truncated, "bins": out }))
        }
        Command::Rtt(a) => {
            let sources = read_lines(&a.src)?;
            let model = model_file::load(&a.model)?;
            if model.lang_index(&a.lang).is_none() {
                return Err(longtail_core::Error::UnknownLanguage(a.lang.clone()).into());
            }
            let mut t = CommandTranslator::new(a.translator_cmd.clone());
            let mode = match a.mode {
                ModeArg::Loose => RttMode::Loose,
                ModeArg::Strict => RttMode::Strict,
            };
            Output::json(&rtt_langid_chrf(&sources, &a.lang, &mut t, &model, mode))
        }
        Command::Pipeline(PipelineCommand::Run { config, workers }) => {
            let mut config = PipelineConfig::load(config)?;
            if let Some(w) = workers {
                config.workers = *w;
                config.validate()?;
            }
            let run = pipeline::run_pipeline(&config)?;
            let funnel = report::funnel(&run.manifest);
            Ok(Output {
                text: Some(report::render_text(&funnel)),
                json: serde_json::to_value(&funnel)?,
            })
        }
        Command::Pipeline(PipelineCommand::Report { manifest }) => {
            let funnel = report::funnel(&pipeline::read_manifest(manifest)?);
            Ok(Output {
                text: Some(report::render_text(&funnel)),
                json: serde_json::to_value(&funnel)?,
            })
        }
    }
}

fn eval_summary(cm: &ConfusionMatrix) -> Value {
    let total: u64 = (0..cm.len()).map(|i| cm.row_sum(i)).sum();
    let correct: u64 = (0..cm.len()).map(|i| cm.counts[i][i]).sum();
    let per: BTreeMap<&str, Value> = cm
        .languages
        .iter()
        .enumerate()
        .map(|(i, l)| {
            (
                l.as_str(),
                json!({
                    "precision": cm.precision_at(i).value,
                    "recall": cm.recall_at(i).value,
                    "fnr": cm.fnr_at(i).value,
                    "support": cm.row_sum(i),
                }),
            )
        })
        .collect();
    json!({
        "accuracy": if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        "examples": total,
        "languages": per,
    })
}

fn filter(f: &FilterCommand) -> Result<Output> {
    match f {
        FilterCommand::DocConsistency {
            input,
            output_dir,
            histogram_width,
        } => {
            let (docs, _) = io::load_documents(input, IngestMode::Strict)?;
            let out = filter_doc_consistency(&docs)?;
            let hist = consistency_histogram(&docs, *histogram_width)?;
            for c in out.corpora.values() {
                io::write_corpus(output_dir, c)?;
            }
            let reports: BTreeMap<String, _> = out
                .reports
                .iter()
                .map(|(&id, r)| (cluster_label(id), r))
                .collect();
            Output::json(&json!({ "reports": reports, "histogram": hist }))
        }
        FilterCommand::Wordlist {
            input,
            langs,
            wordlists,
            threshold,
            output,
        } => {
            unit("threshold", *threshold)?;
            let corpus = io::read_corpus(input, &file_lang(input)?)?;
            let mut lists = BTreeMap::new();
            for l in langs {
                let p = wordlists.join(format!("{l}.tsv"));
                lists.insert(
                    l.clone(),
                    io::read_wordlist(&p, l, WordListKind::Frequency)?,
                );
            }
            let (kept, report) = filter_wordlist(&corpus, langs, &lists, *threshold)?;
            io::write_corpus_file(output, &kept)?;
            Output::json(&report)
        }
        FilterCommand::Decluster {
            input_dir,
            model,
            clusters,
            output_dir,
        } => {
            let model = model_file::load(model)?;
            let clusters = io::read_cluster_map(clusters)?;
            let mut by_cluster = BTreeMap::new();
            for (name, c) in io::read_corpus_dir(input_dir)? {
                let id = name
                    .strip_prefix("cluster-")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| {
                        Error::Usage(format!("{name}.txt is not named cluster-<id>.txt"))
                    })?;
                by_cluster.insert(ClusterId(id), c);
            }
            let out = decluster(&by_cluster, &model, &clusters);
            for c in out.corpora.values() {
                io::write_corpus(output_dir, c)?;
            }
            let reports: BTreeMap<String, _> = out
                .reports
                .iter()
                .map(|(&id, r)| (cluster_label(id), r))
                .collect();
            Output::json(&reports)
        }
        FilterCommand::Tfiif {
            input,
            wordlist,
            threshold,
            output,
        } => {
            unit("threshold", *threshold)?;
            let corpus = io::read_corpus(input, &file_lang(input)?)?;
            let list = io::read_wordlist(wordlist, &corpus.lang, WordListKind::Tfiif)?;
            let (kept, report) = filter_tfiif(&corpus, &list, *threshold)?;
            io::write_corpus_file(output, &kept)?;
            Output::json(&report)
        }
        FilterCommand::Negative {
            input,
            lang,
            rules,
            output,
        } => {
            let corpus = io::read_corpus(input, lang)?;
            let rules = io::read_rules(rules)?;
            let (kept, report) = negative_filter(&corpus, &rules)?;
            io::write_corpus_file(output, &kept)?;
            Output::json(&report)
        }
    }
}

fn build(b: &BuildCommand) -> Result<Output> {
    match b {
        BuildCommand::Wordlist {
            input,
            lang,
            size,
            output,
        } => {
            let list = build_frequency_wordlist(&io::read_corpus(input, lang)?, *size)?;
            io::write_wordlist(output, &list)?;
            Output::json(&json!({ "lang": lang, "entries": list.entries.len() }))
        }
        BuildCommand::Iif {
            inputs,
            kappa,
            output,
        } => {
            let mut freqs: BTreeMap<String, u64> = BTreeMap::new();
            let mut add = |s: &str| {
                for t in tokenize(s) {
                    *freqs.entry(t).or_insert(0) += 1;
                }
            };
            for p in inputs {
                if p.extension().is_some_and(|e| e == "jsonl") {
                    let (docs, _) = io::load_documents(p, IngestMode::Lenient)?;
                    docs.iter()
                        .flat_map(|d| &d.sentences)
                        .for_each(|s| add(&s.text));
                } else {
                    read_lines(p)?.iter().for_each(|s| add(s));
                }
            }
            let table = IifTable::new(freqs, *kappa)?;
            io::write_iif(output, &table)?;
            Output::json(
                &json!({ "tokens": table.freqs.len(), "kappa": table.kappa, "alpha": table.alpha }),
            )
        }
        BuildCommand::TfiifList {
            input,
            lang,
            iif,
            kappa,
            tau,
            output,
        } => {
            let table = io::read_iif(iif, *kappa)?;
            let list = build_tfiif_wordlist(&io::read_corpus(input, lang)?, &table, *tau)?;
            io::write_wordlist(output, &list)?;
            Output::json(
                &json!({ "lang": lang, "entries": list.entries.len(), "alpha": table.alpha }),
            )
        }
        BuildCommand::Bins {
            input,
            boundaries,
            output,
        } => {
            let list = build_frequency_wordlist(&io::read_corpus(input, "")?, usize::MAX)?;
            let ranked = list.entries.into_iter().map(|(t, _)| t).collect();
            let bins = build_bins(ranked, boundaries.clone())?;
            io::write_json(output, &bins)?;
            let sizes: Vec<usize> = (0..bins.len()).map(|i| bins.bin(i).len()).collect();
            Output::json(&json!({ "bins": sizes, "truncated": bins.truncated }))
        }
    }
}

fn rrr(a: &RrrArgs) -> Result<Output> {
    let params = RrrParams {
        rho: a.rho,
        rrr_threshold: a.rrr_threshold,
        min_crawl_removed: a.min_crawl_removed,
        min_recall: a.min_recall,
    };
    let (r_gold, r_crawl) = match (&a.wordlist, &a.gold, &a.crawl) {
        (Some(w), Some(g), Some(c)) => {
            unit("threshold", a.threshold)?;
            let lang = a.lang.clone().unwrap_or_default();
            let list = io::read_wordlist(w, &lang, WordListKind::Tfiif)?;
            let kept_share = |p: &Path| -> Result<f64> {
                let corpus = io::read_corpus(p, &lang)?;
                if corpus.is_empty() {
                    return Ok(1.0);
                }
                let (kept, _) = filter_tfiif(&corpus, &list, a.threshold)?;
                Ok(kept.len() as f64 / corpus.len() as f64)
            };
            (kept_share(g)?, kept_share(c)?)
        }
        _ => match (a.r_gold, a.r_crawl) {
            (Some(g), Some(c)) => (g, c),
            _ => {
                return Err(Error::Usage(
                    "give --r-gold and --r-crawl, or --wordlist with --gold and --crawl".into(),
                ))
            }
        },
    };
    let mut report = rrr_gate(r_gold, r_crawl, &params)?;
    report.lang = a.lang.clone();
    Output::json(&report)
}

fn anomaly(a: &AnomalyArgs) -> Result<Output> {
    let cutoffs = AnomalyCutoffs::default();
    if a.input.is_dir() {
        if !a.reference.is_dir() {
            return Err(Error::Usage(
                "batch mode needs a reference directory".into(),
            ));
        }
        let corpora = io::read_corpus_dir(&a.input)?;
        let refs = io::read_corpus_dir(&a.reference)?;
        let mut reports: Vec<AnomalyReport> = Vec::new();
        for (lang, c) in &corpora {
            if let Some(r) = refs.get(lang) {
                if !c.is_empty() && !r.is_empty() {
                    reports.push(anomaly_report_with(c, r, a.top_n, &cutoffs)?);
                }
            }
        }
        reports.sort_by(|x, y| {
            x.harmonic
                .total_cmp(&y.harmonic)
                .then_with(|| x.lang.cmp(&y.lang))
        });
        if let Some(p) = &a.tsv {
            let mut text =
                String::from("lang\tharmonic\toverlap_2n\teuclid_sim\tn_sentences\tflags\n");
            for r in &reports {
                let flags: Vec<String> = r
                    .flags
                    .iter()
                    .map(|f| {
                        serde_json::to_value(f)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default()
                    })
                    .collect();
                text.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    r.lang,
                    r.harmonic,
                    r.overlap_2n,
                    r.euclid_sim,
                    r.n_sentences,
                    flags.join(",")
                ));
            }
            io::write_string(p, &text)?;
        }
        return Output::json(&reports);
    }
    let lang = match &a.lang {
        Some(l) => l.clone(),
        None => file_lang(&a.input)?,
    };
    let corpus = io::read_corpus(&a.input, &lang)?;
    let reference = io::read_corpus(&a.reference, &lang)?;
    Output::json(&anomaly_report_with(
        &corpus, &reference, a.top_n, &cutoffs,
    )?)
}

/// Indented `key: value` rendering of a JSON value.
pub fn render_value(v: &Value) -> String {
    let mut out = String::new();
    render_into(v, 0, &mut out);
    out
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(a) if a.iter().all(|x| !x.is_object() && !x.is_array()) => Some(
            a.iter()
                .map(|x| scalar(x).unwrap_or_default())
                .collect::<Vec<_>>()
                .join(", "),
        ),
        _ => None,
    }
}

fn render_into(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                match scalar(x) {
                    Some(s) => out.push_str(&format!("{pad}{k}: {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render_into(x, depth + 1, out);
                    }
                }
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                match scalar(x) {
                    Some(s) => out.push_str(&format!("{pad}- {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}[{i}]\n"));
                        render_into(x, depth + 1, out);
                    }
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other).unwrap_or_default())),
    }
}
