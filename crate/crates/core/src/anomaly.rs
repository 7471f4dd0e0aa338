//! Token-distribution anomaly scores: how closely a mined corpus's most
//! frequent tokens track a reference distribution (normally the LangID
//! training data of the same language).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::MonoCorpus;
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const DEFAULT_TOP_N: usize = 40;
pub const SUSPICIOUS_BELOW: f64 = 0.70;
pub const SUSPICIOUS_MIN_SENTENCES: usize = 20_000;
pub const ECHO_ABOVE: f64 = 0.97;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionSource {
    Reference,
    Empirical,
}

/// Relative token frequencies, highest first (ties lexicographic). The
/// frequencies are over the whole token stream, so a truncated list sums to
/// at most 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDistribution {
    pub lang: String,
    pub entries: Vec<(String, f64)>,
    pub source: DistributionSource,
}

impl TokenDistribution {
    pub fn freq(&self, token: &str) -> f64 {
        self.entries
            .iter()
            .find(|(t, _)| t == token)
            .map_or(0.0, |e| e.1)
    }

    fn top(&self, n: usize) -> &[(String, f64)] {
        &self.entries[..n.min(self.entries.len())]
    }
}

/// Keeps the `top_n` most frequent tokens of `corpus`.
pub fn token_distribution(
    corpus: &MonoCorpus,
    top_n: usize,
    source: DistributionSource,
) -> Result<TokenDistribution> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for s in &corpus.sentences {
        for t in tokenize(s) {
            *counts.entry(t).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1));
    entries.truncate(top_n);
    Ok(TokenDistribution {
        lang: corpus.lang.clone(),
        entries: entries
            .into_iter()
            .map(|(t, c)| (t, c as f64 / total as f64))
            .collect(),
        source,
    })
}

/// Share of the empirical top-`n` tokens found among the reference top-`2n`.
pub fn two_n_overlap(
    empirical: &TokenDistribution,
    reference: &TokenDistribution,
    n: usize,
) -> f64 {
    let emp = empirical.top(n);
    if emp.is_empty() {
        return 0.0;
    }
    let reference: BTreeSet<&str> = reference
        .top(2 * n)
        .iter()
        .map(|(t, _)| t.as_str())
        .collect();
    let hits = emp
        .iter()
        .filter(|(t, _)| reference.contains(t.as_str()))
        .count();
    hits as f64 / emp.len() as f64
}

/// `max(0, 1 - d)` where `d` is the Euclidean distance between the empirical
/// top-`n` frequencies and the reference frequencies of the same tokens.
pub fn euclidean_similarity(
    empirical: &TokenDistribution,
    reference: &TokenDistribution,
    n: usize,
) -> f64 {
    let reference: BTreeMap<&str, f64> = reference
        .entries
        .iter()
        .map(|(t, f)| (t.as_str(), *f))
        .collect();
    let sq: f64 = empirical
        .top(n)
        .iter()
        .map(|(t, f)| {
            let diff = f - reference.get(t.as_str()).copied().unwrap_or(0.0);
            diff * diff
        })
        .sum();
    (1.0 - libm::sqrt(sq)).max(0.0)
}

/// Harmonic mean, defined as 0 when either input is 0.
pub fn harmonic(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyFlag {
    SuspiciousLow,
    TrainingEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub lang: String,
    pub overlap_2n: f64,
    pub euclid_sim: f64,
    pub harmonic: f64,
    pub n_sentences: usize,
    pub flags: BTreeSet<AnomalyFlag>,
}

/// Flag cutoffs of an [`AnomalyReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyCutoffs {
    pub suspicious_below: f64,
    pub suspicious_min_sentences: usize,
    pub echo_above: f64,
}

impl Default for AnomalyCutoffs {
    fn default() -> Self {
        AnomalyCutoffs {
            suspicious_below: SUSPICIOUS_BELOW,
            suspicious_min_sentences: SUSPICIOUS_MIN_SENTENCES,
            echo_above: ECHO_ABOVE,
        }
    }
}

/// Combines two component scores and applies the default flag cutoffs.
pub fn report_from_scores(
    lang: impl Into<String>,
    overlap_2n: f64,
    euclid_sim: f64,
    n_sentences: usize,
) -> AnomalyReport {
    report_with_cutoffs(
        lang,
        overlap_2n,
        euclid_sim,
        n_sentences,
        &AnomalyCutoffs::default(),
    )
}

pub fn report_with_cutoffs(
    lang: impl Into<String>,
    overlap_2n: f64,
    euclid_sim: f64,
    n_sentences: usize,
    cutoffs: &AnomalyCutoffs,
) -> AnomalyReport {
    let h = harmonic(overlap_2n, euclid_sim);
    let mut flags = BTreeSet::new();
    if h < cutoffs.suspicious_below && n_sentences > cutoffs.suspicious_min_sentences {
        flags.insert(AnomalyFlag::SuspiciousLow);
    }
    if h > cutoffs.echo_above {
        flags.insert(AnomalyFlag::TrainingEcho);
    }
    AnomalyReport {
        lang: lang.into(),
        overlap_2n,
        euclid_sim,
        harmonic: h,
        n_sentences,
        flags,
    }
}

/// Scores `corpus` against the full token distribution of `reference`.
pub fn anomaly_report(
    corpus: &MonoCorpus,
    reference: &MonoCorpus,
    n: usize,
) -> Result<AnomalyReport> {
    anomaly_report_with(corpus, reference, n, &AnomalyCutoffs::default())
}

pub fn anomaly_report_with(
    corpus: &MonoCorpus,
    reference: &MonoCorpus,
    n: usize,
    cutoffs: &AnomalyCutoffs,
) -> Result<AnomalyReport> {
    let emp = token_distribution(corpus, n, DistributionSource::Empirical)?;
    let reference = token_distribution(reference, usize::MAX, DistributionSource::Reference)?;
    Ok(report_with_cutoffs(
        corpus.lang.clone(),
        two_n_overlap(&emp, &reference, n),
        euclidean_similarity(&emp, &reference, n),
        corpus.len(),
        cutoffs,
    ))
}
