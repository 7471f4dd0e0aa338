//! Translation and corpus-quality metrics: character n-gram F-score (ChrF),
//! its rescaled form, frequency-bin hit-rate, round-trip ChrF gated by
//! LangID, and the weighted audit score.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langid::Predictor;
use crate::text::tokenize;

// ---------------------------------------------------------------------------
// ChrF

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChrfParams {
    pub max_char_order: usize,
    pub beta: f64,
}

impl Default for ChrfParams {
    fn default() -> Self {
        ChrfParams {
            max_char_order: 6,
            beta: 2.0,
        }
    }
}

impl ChrfParams {
    pub fn signature(&self) -> String {
        alloc::format!(
            "nrefs:1|case:mixed|eff:yes|nc:{}|nw:0|space:no",
            self.max_char_order
        )
    }
}

/// Per-order `[hyp, ref, match]` n-gram counts, summable across segments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChrfStats(pub Vec<[u64; 3]>);

impl ChrfStats {
    pub fn add(&mut self, other: &ChrfStats) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), [0; 3]);
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
    }
}

// Whitespace as understood by Python's `str.split()`.
fn is_split_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

fn char_ngrams(chars: &[char], n: usize) -> BTreeMap<&[char], u64> {
    let mut out = BTreeMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

pub fn chrf_statistics(hypothesis: &str, reference: &str, params: &ChrfParams) -> ChrfStats {
    let hyp: Vec<char> = hypothesis.chars().filter(|&c| !is_split_space(c)).collect();
    let rf: Vec<char> = reference.chars().filter(|&c| !is_split_space(c)).collect();
    let mut stats = Vec::with_capacity(params.max_char_order);
    for n in 1..=params.max_char_order {
        let h = char_ngrams(&hyp, n);
        let r = char_ngrams(&rf, n);
        let mut hyp_count = 0;
        let mut matches = 0;
        for (g, &c) in &h {
            hyp_count += c;
            if let Some(&rc) = r.get(g) {
                matches += c.min(rc);
            }
        }
        let ref_count: u64 = r.values().sum();
        // Hypothesis n-grams only count when the reference has any.
        let hyp_count = if r.is_empty() { 0 } else { hyp_count };
        stats.push([hyp_count, ref_count, matches]);
    }
    ChrfStats(stats)
}

/// F-beta score on the 0-100 scale from accumulated statistics, averaging
/// precision and recall over the orders where both sides have n-grams.
pub fn chrf_from_stats(stats: &ChrfStats, params: &ChrfParams) -> f64 {
    let factor = params.beta * params.beta;
    let mut avg_prec = 0.0;
    let mut avg_rec = 0.0;
    let mut effective = 0u32;
    for &[n_hyp, n_ref, n_match] in &stats.0 {
        if n_hyp > 0 && n_ref > 0 {
            avg_prec += n_match as f64 / n_hyp as f64;
            avg_rec += n_match as f64 / n_ref as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return 0.0;
    }
    avg_prec /= effective as f64;
    avg_rec /= effective as f64;
    if avg_prec + avg_rec == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec)
}

pub fn sentence_chrf(hypothesis: &str, reference: &str, params: &ChrfParams) -> f64 {
    chrf_from_stats(&chrf_statistics(hypothesis, reference, params), params)
}

/// Corpus-level score from statistics summed over all segments.
pub fn corpus_chrf<H, R>(hypotheses: &[H], references: &[R], params: &ChrfParams) -> Result<f64>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            hyp: hypotheses.len(),
            refs: references.len(),
        });
    }
    let mut total = ChrfStats(alloc::vec![[0; 3]; params.max_char_order]);
    for (h, r) in hypotheses.iter().zip(references) {
        total.add(&chrf_statistics(h.as_ref(), r.as_ref(), params));
    }
    Ok(chrf_from_stats(&total, params))
}

/// `0.75 * x - 0.15` clipped at zero, for ChrF on the 0-1 scale.
pub fn scaled_chrf(chrf_01: f64) -> f64 {
    if chrf_01 <= 0.2 {
        0.0
    } else {
        0.75 * chrf_01 - 0.15
    }
}

// ---------------------------------------------------------------------------
// Token-frequency hit-rate

pub const DEFAULT_BIN_BOUNDARIES: [usize; 6] = [0, 125, 500, 2000, 8000, 12800];

/// Bins over a frequency ranking: bin `i` holds ranks
/// `[boundaries[i], boundaries[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBins {
    pub ranked_tokens: Vec<String>,
    pub boundaries: Vec<usize>,
    /// The ranking was shorter than the last boundary.
    pub truncated: bool,
}

impl FrequencyBins {
    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bin(&self, i: usize) -> &[String] {
        let n = self.ranked_tokens.len();
        let lo = self.boundaries[i].min(n);
        let hi = self.boundaries[i + 1].min(n);
        &self.ranked_tokens[lo..hi]
    }
}

pub fn build_bins(ranked_tokens: Vec<String>, boundaries: Vec<usize>) -> Result<FrequencyBins> {
    if boundaries.len() < 2 {
        return Err(Error::InvalidBoundaries("need at least two boundaries"));
    }
    if boundaries[0] != 0 {
        return Err(Error::InvalidBoundaries("boundaries must start at 0"));
    }
    if boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidBoundaries(
            "boundaries must be strictly increasing",
        ));
    }
    let truncated = ranked_tokens.len() < *boundaries.last().unwrap();
    Ok(FrequencyBins {
        ranked_tokens,
        boundaries,
        truncated,
    })
}

fn counts(tokens: Vec<String>) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

/// Share of reference occurrences of `bin` tokens reproduced by the
/// hypotheses; a token earns at most as many hits per sentence as it has
/// reference occurrences. `None` when no reference contains a bin token.
pub fn hit_rate<H, R, S>(hypotheses: &[H], references: &[R], bin: &[S]) -> Result<Option<f64>>
where
    H: AsRef<str>,
    R: AsRef<str>,
    S: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            hyp: hypotheses.len(),
            refs: references.len(),
        });
    }
    let bin: alloc::collections::BTreeSet<&str> = bin.iter().map(AsRef::as_ref).collect();
    let mut hits = 0u64;
    let mut total = 0u64;
    for (h, r) in hypotheses.iter().zip(references) {
        let h = counts(tokenize(h.as_ref()));
        for (t, rc) in counts(tokenize(r.as_ref())) {
            if bin.contains(t.as_str()) {
                total += rc;
                hits += rc.min(h.get(&t).copied().unwrap_or(0));
            }
        }
    }
    Ok((total > 0).then(|| hits as f64 / total as f64))
}

// ---------------------------------------------------------------------------
// Round-trip ChrF

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslatorError(pub String);

impl fmt::Display for TranslatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "translation failed: {}", self.0)
    }
}

pub trait Translator {
    fn translate(
        &mut self,
        text: &str,
        source: &str,
        target: &str,
    ) -> core::result::Result<String, TranslatorError>;

    /// Translates many segments; results are returned in input order.
    fn translate_batch(
        &mut self,
        texts: &[&str],
        source: &str,
        target: &str,
    ) -> Vec<core::result::Result<String, TranslatorError>> {
        texts
            .iter()
            .map(|t| self.translate(t, source, target))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RttMode {
    Loose,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RttScore {
    Valid(f64),
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RttResult {
    pub lang: String,
    pub mode: RttMode,
    pub score: RttScore,
    pub valid_fraction: f64,
}

pub const MIN_VALID_FRACTION: f64 = 0.10;
pub const PIVOT_LANG: &str = "en";

/// Round-trips English `sources` through `lang`, keeping only sources whose
/// intermediate translation is identified as `lang`. Translator failures in
/// either direction exclude the source.
pub fn rtt_langid_chrf<T, P>(
    sources: &[String],
    lang: &str,
    translator: &mut T,
    predictor: &P,
    mode: RttMode,
) -> RttResult
where
    T: Translator + ?Sized,
    P: Predictor + ?Sized,
{
    let src: Vec<&str> = sources.iter().map(String::as_str).collect();
    let forward = translator.translate_batch(&src, PIVOT_LANG, lang);
    let mut kept_idx = Vec::new();
    let mut intermediates = Vec::new();
    for (i, m) in forward.into_iter().enumerate() {
        if let Ok(m) = m {
            if predictor.predict(&m).lang == lang {
                kept_idx.push(i);
                intermediates.push(m);
            }
        }
    }
    let inter: Vec<&str> = intermediates.iter().map(String::as_str).collect();
    let back = translator.translate_batch(&inter, lang, PIVOT_LANG);
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for (i, b) in kept_idx.into_iter().zip(back) {
        if let Ok(b) = b {
            hyps.push(b);
            refs.push(sources[i].as_str());
        }
    }
    let valid_fraction = if sources.is_empty() {
        0.0
    } else {
        hyps.len() as f64 / sources.len() as f64
    };
    let score = if valid_fraction < MIN_VALID_FRACTION {
        RttScore::Invalid
    } else {
        let loose = corpus_chrf(&hyps, &refs, &ChrfParams::default()).expect("equal lengths");
        RttScore::Valid(match mode {
            RttMode::Loose => loose,
            RttMode::Strict => loose * valid_fraction,
        })
    };
    RttResult {
        lang: lang.into(),
        mode,
        score,
        valid_fraction,
    }
}

// ---------------------------------------------------------------------------
// Audit score

/// Fractions of audited sentences labeled correct, correct but low quality,
/// correct but ambiguous dialect, and correct but wrong dialect.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditLabels {
    pub cc: f64,
    pub cb: f64,
    pub ca: f64,
    pub wd: f64,
}

const FRACTION_EPS: f64 = 1e-9;

pub fn audit_score(labels: &AuditLabels) -> Result<f64> {
    let AuditLabels { cc, cb, ca, wd } = *labels;
    if [cc, cb, ca, wd].iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidFractions(
            "label fractions must lie in [0, 1]",
        ));
    }
    if cc + cb + ca + wd > 1.0 + FRACTION_EPS {
        return Err(Error::InvalidFractions(
            "label fractions sum to more than 1",
        ));
    }
    Ok(1.0 * cc + 0.5 * cb + 0.3 * ca + 0.2 * wd)
}
