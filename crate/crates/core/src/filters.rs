//! The filtering cascade: document consistency, percent-threshold wordlists,
//! declustering with a second predictor, TF-IIF wordlists gated by the
//! relative recall rate, and hand-written negative filters.
//!
//! Every filter keeps an order-preserving subset of its input and reports
//! what it dropped and why in a [`StageReport`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterId, ClusterMap};
use crate::corpus::{Document, MonoCorpus};
use crate::error::{Error, Result};
use crate::langid::{ConfusionMatrix, Predictor};
pub use crate::text::tokenize;
use crate::text::tokenize_cased;

pub const DROP_INCONSISTENT: &str = "inconsistent";
pub const DROP_EMPTY_TOKENS: &str = "empty_tokens";
pub const DROP_BELOW_THRESHOLD: &str = "below_threshold";
pub const DROP_OUT_OF_CLUSTER: &str = "out_of_cluster";
pub const DROP_NEGATIVE_RULE: &str = "negative_rule";

/// Sentence counts in and out of one stage.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageReport {
    #[serde(rename = "in")]
    pub input: usize,
    #[serde(rename = "out")]
    pub output: usize,
    pub dropped_by_reason: BTreeMap<String, usize>,
}

impl StageReport {
    pub fn drop(&mut self, reason: &str) {
        *self.dropped_by_reason.entry(reason.into()).or_insert(0) += 1;
    }

    pub fn dropped(&self) -> usize {
        self.dropped_by_reason.values().sum()
    }

    pub fn merge(&mut self, other: &StageReport) {
        self.input += other.input;
        self.output += other.output;
        for (k, v) in &other.dropped_by_reason {
            *self.dropped_by_reason.entry(k.clone()).or_insert(0) += v;
        }
    }
}

/// Label used for cluster-level corpora.
pub fn cluster_label(id: ClusterId) -> String {
    format!("cluster-{id}")
}

/// Per-sentence verdict of a filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Drop(&'static str),
}

/// Applies a per-sentence verdict, preserving order.
pub fn apply_verdicts<I>(corpus: &MonoCorpus, verdicts: I) -> (MonoCorpus, StageReport)
where
    I: IntoIterator<Item = Verdict>,
{
    let mut report = StageReport {
        input: corpus.len(),
        ..StageReport::default()
    };
    let mut kept = Vec::new();
    for (s, v) in corpus.sentences.iter().zip(verdicts) {
        match v {
            Verdict::Keep => kept.push(s.clone()),
            Verdict::Drop(reason) => report.drop(reason),
        }
    }
    report.output = kept.len();
    (corpus.with_sentences(kept), report)
}

// ---------------------------------------------------------------------------
// Document consistency

/// Predicts every sentence and attaches language, cluster and confidence.
pub fn annotate_document<P: Predictor + ?Sized>(
    doc: &Document,
    predictor: &P,
    clusters: &ClusterMap,
) -> Result<Document> {
    let mut out = doc.clone();
    for s in &mut out.sentences {
        let p = predictor.predict(&s.text);
        let cluster = clusters
            .cluster_of(&p.lang)
            .ok_or_else(|| Error::UnknownLanguage(p.lang.clone()))?;
        s.predicted_cluster = Some(cluster);
        s.predicted_lang = Some(p.lang);
        s.confidence = Some(p.confidence);
    }
    Ok(out)
}

fn sentence_clusters(doc: &Document) -> Result<Vec<ClusterId>> {
    doc.sentences
        .iter()
        .map(|s| {
            s.predicted_cluster
                .ok_or_else(|| Error::NotAnnotated(doc.id.clone()))
        })
        .collect()
}

fn modal(clusters: &[ClusterId]) -> Option<ClusterId> {
    let mut counts: BTreeMap<ClusterId, usize> = BTreeMap::new();
    for &c in clusters {
        *counts.entry(c).or_insert(0) += 1;
    }
    // Ascending id order, strict comparison: smallest id wins ties.
    let mut best: Option<(ClusterId, usize)> = None;
    for (c, n) in counts {
        if best.map_or(true, |(_, b)| n > b) {
            best = Some((c, n));
        }
    }
    best.map(|(c, _)| c)
}

/// Most frequently predicted cluster; ties go to the smallest cluster id.
pub fn document_cluster(doc: &Document) -> Result<ClusterId> {
    let clusters = sentence_clusters(doc)?;
    modal(&clusters).ok_or_else(|| Error::EmptyDocument(doc.id.clone()))
}

/// Fraction of the document's sentences sharing this sentence's cluster.
pub fn consistency_score(doc: &Document, sentence_index: usize) -> Result<f64> {
    let clusters = sentence_clusters(doc)?;
    let own = *clusters.get(sentence_index).ok_or(Error::IndexOutOfRange {
        index: sentence_index,
        len: clusters.len(),
    })?;
    let same = clusters.iter().filter(|&&c| c == own).count();
    Ok(same as f64 / clusters.len() as f64)
}

/// Sentence indices of `doc` kept by document-consistency filtering, with the
/// document cluster. Empty documents yield `None`.
pub fn consistent_sentences(doc: &Document) -> Result<Option<(ClusterId, Vec<usize>)>> {
    let clusters = sentence_clusters(doc)?;
    Ok(modal(&clusters).map(|doc_cluster| {
        let kept = clusters
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == doc_cluster)
            .map(|(i, _)| i)
            .collect();
        (doc_cluster, kept)
    }))
}

/// Cluster-level corpora plus a report per cluster. A cluster's `in` counts
/// sentences predicted in that cluster, whatever their document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterCorpora {
    pub corpora: BTreeMap<ClusterId, MonoCorpus>,
    pub reports: BTreeMap<ClusterId, StageReport>,
}

impl ClusterCorpora {
    /// Adds one annotated document.
    pub fn push_document(&mut self, doc: &Document) -> Result<()> {
        let Some((doc_cluster, kept)) = consistent_sentences(doc)? else {
            return Ok(());
        };
        for s in &doc.sentences {
            let c = s
                .predicted_cluster
                .expect("checked by consistent_sentences");
            let report = self.reports.entry(c).or_default();
            report.input += 1;
            if c != doc_cluster {
                report.drop(DROP_INCONSISTENT);
            }
        }
        let corpus = self
            .corpora
            .entry(doc_cluster)
            .or_insert_with(|| MonoCorpus::new(cluster_label(doc_cluster), Vec::new()));
        corpus
            .sentences
            .extend(kept.iter().map(|&i| doc.sentences[i].text.clone()));
        self.reports.entry(doc_cluster).or_default().output += kept.len();
        Ok(())
    }
}

/// Keeps a sentence iff its cluster equals its document's cluster, routing
/// kept sentences to that cluster's corpus.
pub fn filter_doc_consistency<'a, I>(docs: I) -> Result<ClusterCorpora>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut out = ClusterCorpora::default();
    for doc in docs {
        out.push_document(doc)?;
    }
    Ok(out)
}

/// Histogram of per-sentence consistency scores over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Bin `i` covers `[i * width, (i + 1) * width)`; the last bin is closed.
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width <= 1.0) {
            return Err(Error::InvalidParameter("bin width must be in (0, 1]"));
        }
        let n_bins = libm::ceil(1.0 / bin_width - 1e-9).max(1.0) as usize;
        Ok(Histogram {
            bin_width,
            counts: vec![0; n_bins],
        })
    }

    pub fn add(&mut self, score: f64) {
        let last = self.counts.len() - 1;
        // The epsilon keeps exact bin edges such as 3/10 on their closed side.
        let bin = (libm::floor(score / self.bin_width + 1e-9).max(0.0) as usize).min(last);
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Consistency scores of every sentence of every annotated document.
pub fn consistency_histogram<'a, I>(docs: I, bin_width: f64) -> Result<Histogram>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut h = Histogram::new(bin_width)?;
    for doc in docs {
        let clusters = sentence_clusters(doc)?;
        let mut counts: BTreeMap<ClusterId, usize> = BTreeMap::new();
        for &c in &clusters {
            *counts.entry(c).or_insert(0) += 1;
        }
        for c in &clusters {
            h.add(counts[c] as f64 / clusters.len() as f64);
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Wordlists

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordListKind {
    Frequency,
    Tfiif,
}

impl WordListKind {
    fn name(self) -> &'static str {
        match self {
            WordListKind::Frequency => "frequency",
            WordListKind::Tfiif => "tfiif",
        }
    }
}

/// Ranked `(token, score)` list, highest score first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordList {
    pub lang: String,
    pub kind: WordListKind,
    pub entries: Vec<(String, f64)>,
}

impl WordList {
    pub fn tokens(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|(t, _)| t.as_str()).collect()
    }

    fn ranked(lang: &str, kind: WordListKind, scores: BTreeMap<String, f64>, top: usize) -> Self {
        let mut entries: Vec<(String, f64)> =
            scores.into_iter().filter(|(_, s)| *s > 0.0).collect();
        // BTreeMap order is lexicographic, and the sort is stable.
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        entries.truncate(top);
        WordList {
            lang: lang.into(),
            kind,
            entries,
        }
    }
}

pub const DEFAULT_WORDLIST_SIZE: usize = 800;
pub const DEFAULT_IN_LANGUAGE_THRESHOLD: f64 = 0.2;

fn token_counts<'a>(sentences: impl IntoIterator<Item = &'a String>) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for s in sentences {
        for t in tokenize(s) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    counts
}

/// The `top` most frequent tokens; ties broken lexicographically.
pub fn build_frequency_wordlist(corpus: &MonoCorpus, top: usize) -> Result<WordList> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let scores = token_counts(&corpus.sentences)
        .into_iter()
        .map(|(t, c)| (t, c as f64))
        .collect();
    Ok(WordList::ranked(
        &corpus.lang,
        WordListKind::Frequency,
        scores,
        top,
    ))
}

/// Fraction of `tokens` present in `list`; `None` when there are no tokens.
pub fn in_list_fraction(tokens: &[String], list: &BTreeSet<&str>) -> Option<f64> {
    if tokens.is_empty() {
        return None;
    }
    let hits = tokens.iter().filter(|t| list.contains(t.as_str())).count();
    Some(hits as f64 / tokens.len() as f64)
}

fn threshold_verdict(tokens: &[String], lists: &[BTreeSet<&str>], threshold: f64) -> Verdict {
    if tokens.is_empty() {
        return Verdict::Drop(DROP_EMPTY_TOKENS);
    }
    let best = lists
        .iter()
        .filter_map(|l| in_list_fraction(tokens, l))
        .fold(0.0, f64::max);
    if best >= threshold {
        Verdict::Keep
    } else {
        Verdict::Drop(DROP_BELOW_THRESHOLD)
    }
}

/// Looks up the frequency wordlist of every language of a cluster.
pub fn cluster_wordlists<'a>(
    languages: &[String],
    lists: &'a BTreeMap<String, WordList>,
) -> Result<Vec<&'a WordList>> {
    languages
        .iter()
        .map(|l| {
            lists
                .get(l)
                .ok_or_else(|| Error::MissingWordlist(l.clone()))
        })
        .collect()
}

/// Keeps a sentence iff, for at least one language of the cluster, at least
/// `threshold` of its tokens are in that language's wordlist.
pub fn filter_wordlist(
    corpus: &MonoCorpus,
    cluster_languages: &[String],
    lists: &BTreeMap<String, WordList>,
    threshold: f64,
) -> Result<(MonoCorpus, StageReport)> {
    let lists = cluster_wordlists(cluster_languages, lists)?;
    let sets: Vec<BTreeSet<&str>> = lists.iter().map(|l| l.tokens()).collect();
    Ok(apply_verdicts(
        corpus,
        corpus
            .sentences
            .iter()
            .map(|s| wordlist_verdict(s, &sets, threshold)),
    ))
}

/// Per-sentence decision of [`filter_wordlist`].
pub fn wordlist_verdict(sentence: &str, sets: &[BTreeSet<&str>], threshold: f64) -> Verdict {
    threshold_verdict(&tokenize(sentence), sets, threshold)
}

// ---------------------------------------------------------------------------
// Declustering

/// Output of [`decluster`]: per-language corpora and a report per cluster.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Declustered {
    pub corpora: BTreeMap<String, MonoCorpus>,
    pub reports: BTreeMap<ClusterId, StageReport>,
}

/// Language a sentence of `cluster` is routed to, or `None` if the
/// predicted language lies outside the cluster.
pub fn decluster_target(
    predicted: &str,
    cluster: ClusterId,
    clusters: &ClusterMap,
) -> Option<String> {
    (clusters.cluster_of(predicted) == Some(cluster)).then(|| predicted.to_string())
}

/// Re-predicts every sentence with `predictor` (earlier predictions are
/// ignored) and routes it to the predicted language, dropping it if that
/// language is not a member of the sentence's cluster.
pub fn decluster<P: Predictor + ?Sized>(
    cluster_corpora: &BTreeMap<ClusterId, MonoCorpus>,
    predictor: &P,
    clusters: &ClusterMap,
) -> Declustered {
    let mut out = Declustered::default();
    for (&cluster, corpus) in cluster_corpora {
        let predicted: Vec<String> = corpus
            .sentences
            .iter()
            .map(|s| predictor.predict(s).lang)
            .collect();
        out.add_cluster(cluster, corpus, &predicted, clusters);
    }
    out
}

impl Declustered {
    /// Routes one cluster corpus given a predicted language per sentence.
    pub fn add_cluster(
        &mut self,
        cluster: ClusterId,
        corpus: &MonoCorpus,
        predicted: &[String],
        clusters: &ClusterMap,
    ) {
        for lang in clusters.languages_in(cluster) {
            self.corpora
                .entry(lang.clone())
                .or_insert_with(|| MonoCorpus::new(lang.clone(), Vec::new()));
        }
        let report = self.reports.entry(cluster).or_default();
        report.input += corpus.len();
        for (s, p) in corpus.sentences.iter().zip(predicted) {
            match decluster_target(p, cluster, clusters) {
                Some(lang) => {
                    report.output += 1;
                    self.corpora
                        .entry(lang.clone())
                        .or_insert_with(|| MonoCorpus::new(lang, Vec::new()))
                        .sentences
                        .push(s.clone());
                }
                None => report.drop(DROP_OUT_OF_CLUSTER),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// TF-IIF

pub const DEFAULT_KAPPA: usize = 80_000;
pub const DEFAULT_TAU: usize = 1000;

/// Token frequencies on the open web, clipped from below at `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IifTable {
    pub freqs: BTreeMap<String, u64>,
    pub kappa: usize,
    pub alpha: f64,
}

impl IifTable {
    /// Sets `alpha` to the frequency of the `kappa`-th most common token, or
    /// to the least common one when the table is shorter than `kappa`.
    pub fn new(freqs: BTreeMap<String, u64>, kappa: usize) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::InvalidParameter("kappa must be at least 1"));
        }
        let mut counts: Vec<u64> = freqs.values().copied().filter(|&c| c > 0).collect();
        if counts.is_empty() {
            return Err(Error::InvalidParameter("internet frequency table is empty"));
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let alpha = counts[(kappa - 1).min(counts.len() - 1)] as f64;
        Ok(IifTable {
            freqs,
            kappa,
            alpha,
        })
    }

    pub fn with_alpha(freqs: BTreeMap<String, u64>, kappa: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter("alpha must be positive"));
        }
        Ok(IifTable {
            freqs,
            kappa,
            alpha,
        })
    }

    /// `max(f(token, internet), alpha)`.
    pub fn clipped(&self, token: &str) -> f64 {
        (self.freqs.get(token).copied().unwrap_or(0) as f64).max(self.alpha)
    }
}

/// Scores every corpus token by `f(t, corpus) / max(f(t, internet), alpha)`
/// and keeps the top `tau`; ties broken lexicographically.
pub fn build_tfiif_wordlist(corpus: &MonoCorpus, iif: &IifTable, tau: usize) -> Result<WordList> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(iif.alpha > 0.0) {
        return Err(Error::InvalidParameter("alpha must be positive"));
    }
    let scores = token_counts(&corpus.sentences)
        .into_iter()
        .map(|(t, c)| {
            let s = c as f64 / iif.clipped(&t);
            (t, s)
        })
        .collect();
    Ok(WordList::ranked(
        &corpus.lang,
        WordListKind::Tfiif,
        scores,
        tau,
    ))
}

/// Keeps a sentence iff at least `threshold` of its tokens are in `list`.
pub fn filter_tfiif(
    corpus: &MonoCorpus,
    list: &WordList,
    threshold: f64,
) -> Result<(MonoCorpus, StageReport)> {
    if list.kind != WordListKind::Tfiif {
        return Err(Error::WrongListKind {
            expected: WordListKind::Tfiif.name(),
            found: list.kind.name(),
        });
    }
    let sets = [list.tokens()];
    Ok(apply_verdicts(
        corpus,
        corpus
            .sentences
            .iter()
            .map(|s| threshold_verdict(&tokenize(s), &sets, threshold)),
    ))
}

pub const DEFAULT_DISTRACTORS: [&str; 7] = ["en", "de", "es", "hi", "id", "ar", "ru"];

/// Maximum pairwise FDR of the distractors present in `cm` with respect to
/// `lang`. Distractors missing from the matrix (and `lang` itself) are skipped.
pub fn distractibility(cm: &ConfusionMatrix, lang: &str, distractors: &[&str]) -> Result<f64> {
    let l = cm.index_of(lang)?;
    Ok(distractors
        .iter()
        .filter(|&&d| d != lang)
        .filter_map(|d| cm.index_of(d).ok())
        .map(|d| cm.fdr_pair_at(d, l).value)
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrrParams {
    pub rho: f64,
    pub rrr_threshold: f64,
    pub min_crawl_removed: f64,
    pub min_recall: f64,
}

impl Default for RrrParams {
    fn default() -> Self {
        RrrParams {
            rho: 2.0,
            rrr_threshold: 1.0,
            min_crawl_removed: 0.2,
            min_recall: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrrReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    pub r_gold: f64,
    pub r_crawl: f64,
    pub rho: f64,
    /// `+inf` when the filter would remove the whole crawl.
    pub rrr: f64,
    pub crawl_emptied: bool,
    pub apply_filter: bool,
    pub reasons: Vec<String>,
}

// Absorbs rounding in thresholds such as 1 - 0.2.
const GATE_EPS: f64 = 1e-12;

/// Decides whether TF-IIF filtering is worth applying to a language, from the
/// share of the gold eval set (`r_gold`) and of the crawl (`r_crawl`) that the
/// filter keeps.
pub fn rrr_gate(r_gold: f64, r_crawl: f64, params: &RrrParams) -> Result<RrrReport> {
    if !(0.0..=1.0).contains(&r_gold) || !(0.0..=1.0).contains(&r_crawl) {
        return Err(Error::InvalidParameter("recall rates must lie in [0, 1]"));
    }
    let crawl_emptied = r_crawl == 0.0;
    let rrr = if crawl_emptied {
        f64::INFINITY
    } else {
        libm::pow(r_gold, params.rho) / r_crawl
    };
    let mut reasons = Vec::new();
    if crawl_emptied {
        reasons.push("crawl_emptied".into());
    }
    let flagged = rrr > params.rrr_threshold;
    if flagged {
        reasons.push("rrr_above_threshold".into());
    } else {
        reasons.push("rrr_not_above_threshold".into());
    }
    let removes_enough = r_crawl <= 1.0 - params.min_crawl_removed + GATE_EPS;
    if !removes_enough {
        reasons.push("too_little_removed".into());
    }
    let recall_ok = r_gold + GATE_EPS >= params.min_recall;
    if !recall_ok {
        reasons.push("gold_recall_too_low".into());
    }
    Ok(RrrReport {
        lang: None,
        r_gold,
        r_crawl,
        rho: params.rho,
        rrr,
        crawl_emptied,
        apply_filter: flagged && removes_enough && recall_ok,
        reasons,
    })
}

// ---------------------------------------------------------------------------
// Negative filters

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Substring,
    Token,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativeFilterRule {
    pub lang: String,
    pub rule: RuleKind,
    pub pattern: String,
    #[serde(default)]
    pub case_sensitive: bool,
}

impl NegativeFilterRule {
    pub fn validate(&self) -> Result<()> {
        if self.pattern.is_empty() {
            return Err(Error::InvalidParameter("negative filter pattern is empty"));
        }
        Ok(())
    }

    pub fn matches(&self, sentence: &str) -> bool {
        match (self.rule, self.case_sensitive) {
            (RuleKind::Substring, true) => sentence.contains(&self.pattern),
            (RuleKind::Substring, false) => sentence
                .to_lowercase()
                .contains(&self.pattern.to_lowercase()),
            (RuleKind::Token, true) => tokenize_cased(sentence).iter().any(|t| *t == self.pattern),
            (RuleKind::Token, false) => {
                let p = self.pattern.to_lowercase();
                tokenize(sentence).iter().any(|t| *t == p)
            }
        }
    }
}

/// Drops every sentence matched by a rule for `corpus.lang`; rules for other
/// languages are ignored.
pub fn negative_filter(
    corpus: &MonoCorpus,
    rules: &[NegativeFilterRule],
) -> Result<(MonoCorpus, StageReport)> {
    for r in rules {
        r.validate()?;
    }
    let rules: Vec<&NegativeFilterRule> = rules.iter().filter(|r| r.lang == corpus.lang).collect();
    Ok(apply_verdicts(
        corpus,
        corpus.sentences.iter().map(|s| {
            if rules.iter().any(|r| r.matches(s)) {
                Verdict::Drop(DROP_NEGATIVE_RULE)
            } else {
                Verdict::Keep
            }
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentenceRecord;

    pub(crate) fn annotated(id: &str, clusters: &[u32]) -> Document {
        Document {
            id: id.into(),
            url: None,
            sentences: clusters
                .iter()
                .enumerate()
                .map(|(i, &c)| SentenceRecord {
                    text: format!("{id} s{i} c{c}"),
                    predicted_lang: Some(format!("l{c}")),
                    predicted_cluster: Some(ClusterId(c)),
                    confidence: Some(1.0),
                })
                .collect(),
        }
    }

    fn corpus(lang: &str, s: &[&str]) -> MonoCorpus {
        MonoCorpus::new(lang, s.iter().map(|s| s.to_string()).collect())
    }

    fn twenty_nineteen_eighteen() -> Document {
        let mut c = vec![0u32; 20];
        c.extend([1; 19]);
        c.extend([2; 18]);
        annotated("d", &c)
    }

    #[test]
    fn document_cluster_examples() {
        assert_eq!(
            document_cluster(&twenty_nineteen_eighteen()).unwrap(),
            ClusterId(0)
        );
        assert_eq!(
            document_cluster(&annotated("x", &[3, 3])).unwrap(),
            ClusterId(3)
        );
        assert_eq!(
            document_cluster(&annotated("x", &[7, 7, 4, 4, 7, 4])).unwrap(),
            ClusterId(4)
        );
        assert_eq!(
            document_cluster(&annotated("e", &[])).unwrap_err(),
            Error::EmptyDocument("e".into())
        );
        let raw = Document::from_sentences("r", None, ["a"]);
        assert_eq!(
            document_cluster(&raw).unwrap_err(),
            Error::NotAnnotated("r".into())
        );
    }

    #[test]
    fn consistency_score_examples() {
        assert_eq!(consistency_score(&annotated("x", &[5]), 0).unwrap(), 1.0);
        let d = twenty_nineteen_eighteen();
        assert_eq!(consistency_score(&d, 25).unwrap(), 19.0 / 57.0);
        assert!(matches!(
            consistency_score(&d, 57),
            Err(Error::IndexOutOfRange { index: 57, len: 57 })
        ));
    }

    #[test]
    fn doc_consistency_keeps_modal_cluster() {
        let d = twenty_nineteen_eighteen();
        let out = filter_doc_consistency([&d]).unwrap();
        assert_eq!(out.corpora.len(), 1);
        let a = &out.corpora[&ClusterId(0)];
        assert_eq!(a.len(), 20);
        assert!(a.sentences.iter().all(|s| s.ends_with("c0")));
        assert_eq!(
            out.reports[&ClusterId(1)].dropped_by_reason[DROP_INCONSISTENT],
            19
        );
        assert_eq!(out.reports[&ClusterId(0)].output, 20);
    }

    #[test]
    fn homogeneous_document_is_kept_and_empty_skipped() {
        let out =
            filter_doc_consistency([&annotated("h", &[2, 2, 2]), &annotated("e", &[])]).unwrap();
        assert_eq!(out.corpora[&ClusterId(2)].len(), 3);
    }

    #[test]
    fn histogram_edges() {
        let mut h = Histogram::new(0.1).unwrap();
        assert_eq!(h.counts.len(), 10);
        h.add(0.3);
        h.add(1.0);
        h.add(0.0);
        h.add(0.2999);
        assert_eq!(h.counts[3], 1);
        assert_eq!(h.counts[2], 1);
        assert_eq!(h.counts[9], 1);
        assert_eq!(h.counts[0], 1);
        let docs = [annotated("a", &[1]), annotated("b", &[2])];
        let h = consistency_histogram(&docs, 0.1).unwrap();
        assert_eq!(h.counts[9], 2);
        assert_eq!(h.total(), 2);
    }

    #[test]
    fn frequency_wordlist_examples() {
        let w = build_frequency_wordlist(&corpus("x", &["a a b"]), 1).unwrap();
        assert_eq!(w.entries, [("a".to_string(), 2.0)]);
        let w = build_frequency_wordlist(&corpus("x", &["b a c"]), 10).unwrap();
        let toks: Vec<_> = w.entries.iter().map(|e| e.0.as_str()).collect();
        assert_eq!(toks, ["a", "b", "c"]);
        assert_eq!(
            build_frequency_wordlist(&corpus("x", &[]), 10).unwrap_err(),
            Error::EmptyCorpus
        );
    }

    #[test]
    fn wordlist_filter_examples() {
        let mut lists = BTreeMap::new();
        lists.insert(
            "x".to_string(),
            build_frequency_wordlist(&corpus("x", &["a b c d e"]), 800).unwrap(),
        );
        lists.insert(
            "y".to_string(),
            build_frequency_wordlist(&corpus("y", &["a q r s t"]), 800).unwrap(),
        );
        let langs = ["x".to_string(), "y".to_string()];
        let c = corpus(
            "cluster-0",
            &[
                "a b c",
                "a z1 z2 z3 z4 z5 z6 z7 z8 z9",
                "...",
                "q r zz zz zz",
            ],
        );
        let (out, rep) = filter_wordlist(&c, &langs, &lists, 0.2).unwrap();
        assert_eq!(out.sentences, ["a b c", "q r zz zz zz"]);
        assert_eq!(rep.dropped_by_reason[DROP_BELOW_THRESHOLD], 1);
        assert_eq!(rep.dropped_by_reason[DROP_EMPTY_TOKENS], 1);
        let missing = ["x".to_string(), "w".to_string()];
        assert_eq!(
            filter_wordlist(&c, &missing, &lists, 0.2).unwrap_err(),
            Error::MissingWordlist("w".into())
        );
    }

    #[test]
    fn tfiif_clipping() {
        let iif = IifTable::with_alpha([("rare".to_string(), 2u64)].into_iter().collect(), 10, 5.0)
            .unwrap();
        let c = MonoCorpus::new("x", vec!["rare ".repeat(10)]);
        let w = build_tfiif_wordlist(&c, &iif, 10).unwrap();
        assert_eq!(w.entries, [("rare".to_string(), 2.0)]);
        assert_eq!(w.kind, WordListKind::Tfiif);
    }

    #[test]
    fn iif_alpha_is_kappa_th_count() {
        let freqs: BTreeMap<String, u64> = [("a", 50u64), ("b", 40), ("c", 30), ("d", 20)]
            .into_iter()
            .map(|(t, c)| (t.to_string(), c))
            .collect();
        assert_eq!(IifTable::new(freqs.clone(), 2).unwrap().alpha, 40.0);
        assert_eq!(IifTable::new(freqs.clone(), 100).unwrap().alpha, 20.0);
        assert!(IifTable::new(freqs, 0).is_err());
    }

    #[test]
    fn tfiif_filter_rejects_frequency_list() {
        let w = build_frequency_wordlist(&corpus("x", &["a"]), 10).unwrap();
        assert!(matches!(
            filter_tfiif(&corpus("x", &["a"]), &w, 0.2),
            Err(Error::WrongListKind { .. })
        ));
    }

    #[test]
    fn distractibility_examples() {
        let langs = ["en", "de", "l", "fr"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        // row sum of l = 10
        let cm = ConfusionMatrix::from_counts(
            langs,
            vec![
                vec![7, 0, 3, 0],
                vec![0, 5, 5, 0],
                vec![0, 0, 10, 0],
                vec![0, 0, 9, 1],
            ],
        )
        .unwrap();
        assert_eq!(
            distractibility(&cm, "l", &DEFAULT_DISTRACTORS).unwrap(),
            0.5
        );
        assert_eq!(
            distractibility(&cm, "en", &DEFAULT_DISTRACTORS).unwrap(),
            0.0
        );
        assert!(distractibility(&cm, "zz", &DEFAULT_DISTRACTORS).is_err());
    }

    #[test]
    fn rrr_examples() {
        let p = RrrParams {
            rho: 1.0,
            ..RrrParams::default()
        };
        let r = rrr_gate(1.0, 1.0, &p).unwrap();
        assert_eq!(r.rrr, 1.0);
        assert!(!r.apply_filter);
        let r = rrr_gate(0.9, 0.3, &RrrParams::default()).unwrap();
        assert!((r.rrr - 2.7).abs() < 1e-12);
        assert!(r.apply_filter);
        let r = rrr_gate(0.75, 0.3, &RrrParams::default()).unwrap();
        assert!(!r.apply_filter);
        assert!(r.reasons.iter().any(|s| s == "gold_recall_too_low"));
        let r = rrr_gate(0.9, 0.0, &RrrParams::default()).unwrap();
        assert!(r.crawl_emptied && r.rrr.is_infinite());
        assert!(rrr_gate(1.1, 0.5, &RrrParams::default()).is_err());
    }

    #[test]
    fn negative_rules() {
        let rule = NegativeFilterRule {
            lang: "ar-MA".into(),
            rule: RuleKind::Substring,
            pattern: "casino".into(),
            case_sensitive: false,
        };
        let c = corpus("ar-MA", &["best CASINOS online", "hello there"]);
        let (out, rep) = negative_filter(&c, core::slice::from_ref(&rule)).unwrap();
        assert_eq!(out.sentences, ["hello there"]);
        assert_eq!(rep.dropped(), 1);
        assert_eq!(negative_filter(&c, &[]).unwrap().0, c);
        let other = NegativeFilterRule {
            lang: "xx".into(),
            ..rule.clone()
        };
        assert_eq!(negative_filter(&c, &[other]).unwrap().0, c);
        let token = NegativeFilterRule {
            rule: RuleKind::Token,
            pattern: "casino".into(),
            ..rule
        };
        assert_eq!(negative_filter(&c, &[token]).unwrap().0, c);
    }
}
