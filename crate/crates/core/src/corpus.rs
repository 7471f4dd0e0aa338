//! Documents, per-language corpora, exact deduplication and corpus statistics.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterId;
use crate::text::{normalize_sentence, tokenize};

/// One sentence of a crawled page plus its LangID annotation, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_cluster: Option<ClusterId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl SentenceRecord {
    /// An unannotated record; the text is normalized.
    pub fn new(text: &str) -> Self {
        SentenceRecord {
            text: normalize_sentence(text),
            predicted_lang: None,
            predicted_cluster: None,
            confidence: None,
        }
    }

    pub fn is_annotated(&self) -> bool {
        self.predicted_lang.is_some() && self.predicted_cluster.is_some()
    }
}

/// A crawled page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub sentences: Vec<SentenceRecord>,
}

impl Document {
    /// Builds a document from raw sentence strings, normalizing each one.
    pub fn from_sentences<I, S>(id: impl Into<String>, url: Option<String>, sentences: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Document {
            id: id.into(),
            url,
            sentences: sentences
                .into_iter()
                .map(|s| SentenceRecord::new(s.as_ref()))
                .collect(),
        }
    }

    /// Builds a document from a block of text, one sentence per line.
    pub fn from_text(id: impl Into<String>, url: Option<String>, text: &str) -> Self {
        Self::from_sentences(id, url, text.split('\n'))
    }

    pub fn is_annotated(&self) -> bool {
        self.sentences.iter().all(SentenceRecord::is_annotated)
    }
}

/// Sentence count surviving a named pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub count: usize,
}

/// A monolingual (or cluster-level) sentence list with its filtering funnel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MonoCorpus {
    pub lang: String,
    pub sentences: Vec<String>,
    /// Counts in the order stages were applied.
    #[serde(default)]
    pub stage_counts: Vec<StageCount>,
}

impl MonoCorpus {
    pub fn new(lang: impl Into<String>, sentences: Vec<String>) -> Self {
        MonoCorpus {
            lang: lang.into(),
            sentences,
            stage_counts: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Appends the current sentence count under `stage`.
    pub fn record_stage(&mut self, stage: impl Into<String>) {
        let count = self.sentences.len();
        debug_assert!(self.stage_counts.last().map_or(true, |s| s.count >= count));
        self.stage_counts.push(StageCount {
            stage: stage.into(),
            count,
        });
    }

    /// True when the recorded counts never increase.
    pub fn funnel_is_monotone(&self) -> bool {
        self.stage_counts
            .windows(2)
            .all(|w| w[0].count >= w[1].count)
    }

    /// Same language and funnel, different sentences.
    pub fn with_sentences(&self, sentences: Vec<String>) -> Self {
        MonoCorpus {
            lang: self.lang.clone(),
            sentences,
            stage_counts: self.stage_counts.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_sentences: usize,
    pub n_tokens: usize,
    pub n_chars: usize,
    pub chars_per_sentence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub before: usize,
    pub after: usize,
    pub factor: f64,
}

impl DedupReport {
    fn new(before: usize, after: usize) -> Self {
        let factor = if before == 0 {
            1.0
        } else {
            before as f64 / after.max(1) as f64
        };
        DedupReport {
            before,
            after,
            factor,
        }
    }
}

/// Removes exact duplicates, keeping the first occurrence.
pub fn dedup(corpus: &MonoCorpus) -> (MonoCorpus, DedupReport) {
    let mut seen = BTreeSet::new();
    let kept = dedup_with(&corpus.sentences, &mut seen);
    let report = DedupReport::new(corpus.len(), kept.len());
    (corpus.with_sentences(kept), report)
}

/// Deduplicates across all corpora: a sentence is kept only in the first
/// corpus (in slice order) where it appears.
pub fn dedup_global(corpora: &[MonoCorpus]) -> Vec<(MonoCorpus, DedupReport)> {
    let mut seen = BTreeSet::new();
    corpora
        .iter()
        .map(|c| {
            let kept = dedup_with(&c.sentences, &mut seen);
            let report = DedupReport::new(c.len(), kept.len());
            (c.with_sentences(kept), report)
        })
        .collect()
}

fn dedup_with<'a>(sentences: &'a [String], seen: &mut BTreeSet<&'a str>) -> Vec<String> {
    sentences
        .iter()
        .filter(|s| seen.insert(s.as_str()))
        .cloned()
        .collect()
}

pub fn corpus_stats(corpus: &MonoCorpus) -> CorpusStats {
    let n_sentences = corpus.len();
    let (n_tokens, n_chars) = corpus.sentences.iter().fold((0, 0), |(t, c), s| {
        (t + tokenize(s).len(), c + s.chars().count())
    });
    CorpusStats {
        n_sentences,
        n_tokens,
        n_chars,
        chars_per_sentence: n_chars as f64 / n_sentences.max(1) as f64,
    }
}
