//! Character n-gram language identification.
//!
//! Texts are turned into L1-normalized bags of hashed character n-grams and
//! scored by a linear softmax classifier. The [`Predictor`] trait is the seam
//! used by the filtering stages, so any other classifier (an MLP, an external
//! semi-supervised model) can be dropped in.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which n-grams are extracted and how they are hashed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub ngram_orders: Vec<u32>,
    pub n_buckets: u32,
    pub hash_seed: u64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            ngram_orders: vec![1, 2, 3, 4],
            n_buckets: 1 << 20,
            hash_seed: 0,
        }
    }
}

impl FeatureSpec {
    pub const MIN_BUCKETS: u32 = 1 << 10;

    pub fn new(
        orders: impl IntoIterator<Item = u32>,
        n_buckets: u32,
        hash_seed: u64,
    ) -> Result<Self> {
        let ngram_orders: BTreeSet<u32> = orders.into_iter().collect();
        let spec = FeatureSpec {
            ngram_orders: ngram_orders.into_iter().collect(),
            n_buckets,
            hash_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ngram_orders.is_empty() {
            return Err(Error::InvalidFeatureSpec("no n-gram orders"));
        }
        if self.ngram_orders.contains(&0) {
            return Err(Error::InvalidFeatureSpec("n-gram orders must be >= 1"));
        }
        if self.ngram_orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFeatureSpec(
                "n-gram orders must be sorted and unique",
            ));
        }
        if !self.n_buckets.is_power_of_two() || self.n_buckets < Self::MIN_BUCKETS {
            return Err(Error::InvalidFeatureSpec(
                "bucket count must be a power of two >= 1024",
            ));
        }
        Ok(())
    }

    /// Bucket of a single n-gram.
    pub fn bucket(&self, ngram: &[char]) -> u32 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.hash_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut buf = [0u8; 4];
        for c in ngram {
            for b in c.encode_utf8(&mut buf).bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        // splitmix64 finalizer
        h ^= h >> 30;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 27;
        h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
        (h & u64::from(self.n_buckets - 1)) as u32
    }
}

/// Sparse feature vector: `(bucket, weight)` pairs sorted by bucket.
pub type SparseVec = Vec<(u32, f64)>;

/// Counts every character n-gram of the configured orders, hashes them into
/// buckets and L1-normalizes. Empty text gives the empty (zero) vector.
pub fn extract_features(text: &str, spec: &FeatureSpec) -> SparseVec {
    let chars: Vec<char> = text.chars().collect();
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    let mut total = 0u32;
    for &n in &spec.ngram_orders {
        let n = n as usize;
        if n == 0 || n > chars.len() {
            continue;
        }
        for gram in chars.windows(n) {
            *counts.entry(spec.bucket(gram)).or_insert(0) += 1;
            total += 1;
        }
    }
    let total = f64::from(total);
    counts
        .into_iter()
        .map(|(b, c)| (b, f64::from(c) / total))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub lang: String,
    pub confidence: f64,
}

/// Anything that maps a sentence to a language and a confidence.
pub trait Predictor {
    /// Languages the predictor can emit, in model order.
    fn languages(&self) -> &[String];
    fn predict(&self, text: &str) -> Prediction;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn languages(&self) -> &[String] {
        (**self).languages()
    }
    fn predict(&self, text: &str) -> Prediction {
        (**self).predict(text)
    }
}

/// Linear softmax classifier over hashed n-gram features.
#[derive(Debug, Clone, PartialEq)]
pub struct LangIdModel {
    pub spec: FeatureSpec,
    pub languages: Vec<String>,
    /// Row-major `[languages.len() x spec.n_buckets]`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub version: u32,
}

impl LangIdModel {
    pub const VERSION: u32 = 1;

    /// An all-zero model.
    pub fn zeros(spec: FeatureSpec, languages: Vec<String>) -> Result<Self> {
        spec.validate()?;
        let n = languages.len();
        let model = LangIdModel {
            weights: vec![0.0; n * spec.n_buckets as usize],
            bias: vec![0.0; n],
            spec,
            languages,
            version: Self::VERSION,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let unique: BTreeSet<&String> = self.languages.iter().collect();
        if unique.len() != self.languages.len() {
            return Err(Error::InvalidParameter("duplicate language in model"));
        }
        if self.weights.len() != self.languages.len() * self.spec.n_buckets as usize
            || self.bias.len() != self.languages.len()
        {
            return Err(Error::InvalidParameter(
                "weight matrix shape does not match model",
            ));
        }
        if !self.weights.iter().chain(&self.bias).all(|w| w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weight"));
        }
        Ok(())
    }

    pub fn lang_index(&self, lang: &str) -> Option<usize> {
        self.languages.iter().position(|l| l == lang)
    }

    fn row(&self, lang: usize) -> &[f32] {
        let n = self.spec.n_buckets as usize;
        &self.weights[lang * n..(lang + 1) * n]
    }

    pub fn logits(&self, features: &[(u32, f64)]) -> Vec<f64> {
        (0..self.languages.len())
            .map(|l| {
                let row = self.row(l);
                features
                    .iter()
                    .fold(f64::from(self.bias[l]), |acc, &(b, x)| {
                        acc + f64::from(row[b as usize]) * x
                    })
            })
            .collect()
    }

    /// Softmax distribution over `languages`.
    pub fn probabilities(&self, text: &str) -> Vec<f64> {
        softmax(&self.logits(&extract_features(text, &self.spec)))
    }
}

impl Predictor for LangIdModel {
    fn languages(&self) -> &[String] {
        &self.languages
    }

    fn predict(&self, text: &str) -> Prediction {
        let probs = self.probabilities(text);
        let best = argmax(&probs);
        Prediction {
            lang: self.languages[best].clone(),
            confidence: probs[best],
        }
    }
}

/// First index of the maximum.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// Gradient over the whole training set with a backtracking line search;
    /// the training loss never increases between epochs.
    Full,
    /// Shuffled mini-batches of the given size with a fixed step.
    Mini(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub batch: BatchMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            learning_rate: 64.0,
            seed: 0,
            batch: BatchMode::Full,
        }
    }
}

/// Trains a model; languages are ordered lexicographically.
pub fn train<T, L>(
    labeled: &[(T, L)],
    spec: &FeatureSpec,
    config: &TrainConfig,
) -> Result<LangIdModel>
where
    T: AsRef<str>,
    L: AsRef<str>,
{
    train_with_history(labeled, spec, config).map(|(m, _)| m)
}

/// Like [`train`], also returning the mean training cross-entropy before the
/// first epoch and after every epoch.
pub fn train_with_history<T, L>(
    labeled: &[(T, L)],
    spec: &FeatureSpec,
    config: &TrainConfig,
) -> Result<(LangIdModel, Vec<f64>)>
where
    T: AsRef<str>,
    L: AsRef<str>,
{
    spec.validate()?;
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidParameter("learning rate must be positive"));
    }
    let languages: Vec<String> = labeled
        .iter()
        .map(|(_, l)| String::from(l.as_ref()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if languages.len() < 2 {
        return Err(Error::DegenerateData(languages.len()));
    }

    // Canonical example order makes full-batch sums independent of input order.
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    order.sort_by(|&a, &b| {
        (labeled[a].0.as_ref(), labeled[a].1.as_ref())
            .cmp(&(labeled[b].0.as_ref(), labeled[b].1.as_ref()))
    });

    let raw: Vec<(SparseVec, usize)> = order
        .iter()
        .map(|&i| {
            let (text, lang) = &labeled[i];
            let y = languages
                .binary_search_by(|l| l.as_str().cmp(lang.as_ref()))
                .unwrap();
            (extract_features(text.as_ref(), spec), y)
        })
        .collect();

    // Only buckets seen in training can get non-zero weight; train on those.
    let used: Vec<u32> = raw
        .iter()
        .flat_map(|(f, _)| f.iter().map(|&(b, _)| b))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let examples: Vec<Example> = raw
        .into_iter()
        .map(|(f, y)| Example {
            features: f
                .into_iter()
                .map(|(b, x)| (used.binary_search(&b).unwrap(), x))
                .collect(),
            label: y,
        })
        .collect();

    // Features are L1-normalized, so raw gradients of rare n-grams are tiny.
    // Dividing by each feature's mean activation gives every weight a step
    // of comparable size; the result is still a descent direction.
    let mut mean_activation = vec![0.0; used.len()];
    for ex in &examples {
        for &(j, x) in &ex.features {
            mean_activation[j] += x;
        }
    }
    let n_examples = examples.len() as f64;
    mean_activation.iter_mut().for_each(|m| *m /= n_examples);

    let mut params = Params::zeros(languages.len(), used.len());
    let mut history = vec![params.loss(&examples)];
    match config.batch {
        BatchMode::Full => {
            let mut step = config.learning_rate;
            let mut loss = history[0];
            for _ in 0..config.epochs {
                let grad = params.gradient(examples.iter());
                let direction = grad.preconditioned(&mean_activation);
                let slope = grad.dot(&direction);
                if slope == 0.0 {
                    history.push(loss);
                    continue;
                }
                let mut accepted = false;
                for _ in 0..40 {
                    let candidate = params.stepped(&direction, step);
                    let candidate_loss = candidate.loss(&examples);
                    if candidate_loss <= loss - 1e-4 * step * slope {
                        params = candidate;
                        loss = candidate_loss;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                history.push(loss);
                if accepted {
                    step = (step * 2.0).min(config.learning_rate);
                }
            }
        }
        BatchMode::Mini(size) => {
            let size = size.max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut idx: Vec<usize> = (0..examples.len()).collect();
            for _ in 0..config.epochs {
                idx.shuffle(&mut rng);
                for chunk in idx.chunks(size) {
                    let grad = params.gradient(chunk.iter().map(|&i| &examples[i]));
                    params = params
                        .stepped(&grad.preconditioned(&mean_activation), config.learning_rate);
                }
                history.push(params.loss(&examples));
            }
        }
    }

    let n_buckets = spec.n_buckets as usize;
    let mut weights = vec![0.0f32; languages.len() * n_buckets];
    for l in 0..languages.len() {
        for (j, &b) in used.iter().enumerate() {
            weights[l * n_buckets + b as usize] = params.w[l * used.len() + j] as f32;
        }
    }
    let model = LangIdModel {
        spec: spec.clone(),
        bias: params.b.iter().map(|&b| b as f32).collect(),
        languages,
        weights,
        version: LangIdModel::VERSION,
    };
    model.validate()?;
    Ok((model, history))
}

struct Example {
    features: Vec<(usize, f64)>,
    label: usize,
}

/// Dense parameters over the compacted feature space.
#[derive(Clone)]
struct Params {
    n_lang: usize,
    n_feat: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Params {
    fn zeros(n_lang: usize, n_feat: usize) -> Self {
        Params {
            n_lang,
            n_feat,
            w: vec![0.0; n_lang * n_feat],
            b: vec![0.0; n_lang],
        }
    }

    fn logits(&self, ex: &Example) -> Vec<f64> {
        (0..self.n_lang)
            .map(|l| {
                let row = &self.w[l * self.n_feat..(l + 1) * self.n_feat];
                ex.features
                    .iter()
                    .fold(self.b[l], |acc, &(j, x)| acc + row[j] * x)
            })
            .collect()
    }

    fn loss(&self, examples: &[Example]) -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let total: f64 = examples
            .iter()
            .map(|ex| {
                let z = self.logits(ex);
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + libm::log(z.iter().map(|&v| libm::exp(v - max)).sum::<f64>());
                lse - z[ex.label]
            })
            .sum();
        total / examples.len() as f64
    }

    fn gradient<'a>(&self, batch: impl Iterator<Item = &'a Example>) -> Params {
        let mut g = Params::zeros(self.n_lang, self.n_feat);
        let mut n = 0usize;
        for ex in batch {
            n += 1;
            let p = softmax(&self.logits(ex));
            for (l, &pl) in p.iter().enumerate() {
                let d = pl - if l == ex.label { 1.0 } else { 0.0 };
                g.b[l] += d;
                let row = &mut g.w[l * self.n_feat..(l + 1) * self.n_feat];
                for &(j, x) in &ex.features {
                    row[j] += d * x;
                }
            }
        }
        let scale = 1.0 / n.max(1) as f64;
        g.w.iter_mut()
            .chain(g.b.iter_mut())
            .for_each(|v| *v *= scale);
        g
    }

    fn dot(&self, other: &Params) -> f64 {
        self.w
            .iter()
            .chain(&self.b)
            .zip(other.w.iter().chain(&other.b))
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Divides each weight's entry by the mean activation of its feature.
    fn preconditioned(&self, mean_activation: &[f64]) -> Params {
        let mut out = self.clone();
        for row in out.w.chunks_mut(self.n_feat) {
            for (v, m) in row.iter_mut().zip(mean_activation) {
                *v /= m;
            }
        }
        out
    }

    fn stepped(&self, grad: &Params, step: f64) -> Params {
        let mut out = self.clone();
        for (p, g) in out.w.iter_mut().zip(&grad.w) {
            *p -= step * g;
        }
        for (p, g) in out.b.iter_mut().zip(&grad.b) {
            *p -= step * g;
        }
        out
    }
}

/// `counts[true][predicted]` over a common language list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub languages: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// A rate plus whether its denominator was zero (in which case the value is 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub zero_denominator: bool,
}

impl Rate {
    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            Rate {
                value: 0.0,
                zero_denominator: true,
            }
        } else {
            Rate {
                value: num as f64 / den as f64,
                zero_denominator: false,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    Precision,
    Recall,
    Fnr,
    FdrPair,
}

impl ConfusionMatrix {
    pub fn zeros(languages: Vec<String>) -> Self {
        let n = languages.len();
        ConfusionMatrix {
            languages,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(languages: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = languages.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("confusion matrix must be square"));
        }
        if languages.iter().collect::<BTreeSet<_>>().len() != n {
            return Err(Error::InvalidParameter(
                "duplicate language in confusion matrix",
            ));
        }
        Ok(ConfusionMatrix { languages, counts })
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn index_of(&self, lang: &str) -> Result<usize> {
        self.languages
            .iter()
            .position(|l| l == lang)
            .ok_or_else(|| Error::UnknownLanguage(lang.into()))
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn precision_at(&self, i: usize) -> Rate {
        Rate::ratio(self.counts[i][i], self.col_sum(i))
    }

    pub fn recall_at(&self, i: usize) -> Rate {
        Rate::ratio(self.counts[i][i], self.row_sum(i))
    }

    pub fn fnr_at(&self, i: usize) -> Rate {
        let r = self.recall_at(i);
        Rate {
            value: if r.zero_denominator {
                0.0
            } else {
                1.0 - r.value
            },
            ..r
        }
    }

    /// Share of the true examples of `i` that were predicted as `j`.
    pub fn pairwise_fnr_at(&self, i: usize, j: usize) -> Rate {
        Rate::ratio(self.counts[i][j], self.row_sum(i))
    }

    /// Examples of distractor `d` predicted as `l`, over the true examples of `l`.
    pub fn fdr_pair_at(&self, d: usize, l: usize) -> Rate {
        Rate::ratio(self.counts[d][l], self.row_sum(l))
    }
}

/// Looks up a rate by language code. `other` is the distractor for
/// [`RateKind::FdrPair`] and is required there.
pub fn rate(cm: &ConfusionMatrix, kind: RateKind, lang: &str, other: Option<&str>) -> Result<Rate> {
    let l = cm.index_of(lang)?;
    Ok(match kind {
        RateKind::Precision => cm.precision_at(l),
        RateKind::Recall => cm.recall_at(l),
        RateKind::Fnr => cm.fnr_at(l),
        RateKind::FdrPair => {
            let d = other.ok_or(Error::InvalidParameter(
                "fdr_pair requires a distractor language",
            ))?;
            cm.fdr_pair_at(cm.index_of(d)?, l)
        }
    })
}

/// Tallies predictions; labels must be languages of the predictor.
pub fn evaluate<P, T, L>(predictor: &P, eval: &[(T, L)]) -> Result<ConfusionMatrix>
where
    P: Predictor + ?Sized,
    T: AsRef<str>,
    L: AsRef<str>,
{
    let mut cm = ConfusionMatrix::zeros(predictor.languages().to_vec());
    for (text, lang) in eval {
        let t = cm.index_of(lang.as_ref())?;
        let p = cm.index_of(&predictor.predict(text.as_ref()).lang)?;
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParingThresholds {
    pub min_precision: f64,
    pub max_confusion: f64,
    pub min_examples: usize,
}

impl Default for ParingThresholds {
    fn default() -> Self {
        ParingThresholds {
            min_precision: 0.33,
            max_confusion: 0.50,
            min_examples: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    LowPrecision,
    HighConfusion,
    TooFewExamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageParing {
    pub lang: String,
    pub precision: f64,
    pub max_confusion: f64,
    /// Language responsible for `max_confusion`, if any other language exists.
    pub confused_with: Option<String>,
    pub n_train: usize,
    pub dropped: bool,
    pub reasons: Vec<DropReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParingReport {
    pub thresholds: ParingThresholds,
    pub languages: Vec<LanguageParing>,
}

impl ParingReport {
    pub fn dropped(&self) -> impl Iterator<Item = &str> {
        self.languages
            .iter()
            .filter(|l| l.dropped)
            .map(|l| l.lang.as_str())
    }
}

/// Flags languages with low precision, heavy confusion with another language
/// (pairwise FNR or FDR) or too little training data.
pub fn pare_languages(
    cm: &ConfusionMatrix,
    train_sizes: &BTreeMap<String, usize>,
    thresholds: &ParingThresholds,
) -> ParingReport {
    let languages = (0..cm.len())
        .map(|l| {
            let precision = cm.precision_at(l).value;
            let mut max_confusion = 0.0;
            let mut confused_with = None;
            for d in (0..cm.len()).filter(|&d| d != l) {
                let c = cm
                    .pairwise_fnr_at(l, d)
                    .value
                    .max(cm.fdr_pair_at(d, l).value);
                if confused_with.is_none() || c > max_confusion {
                    max_confusion = c;
                    confused_with = Some(cm.languages[d].clone());
                }
            }
            let n_train = train_sizes.get(&cm.languages[l]).copied().unwrap_or(0);
            let mut reasons = Vec::new();
            if precision < thresholds.min_precision {
                reasons.push(DropReason::LowPrecision);
            }
            if max_confusion > thresholds.max_confusion {
                reasons.push(DropReason::HighConfusion);
            }
            if n_train < thresholds.min_examples {
                reasons.push(DropReason::TooFewExamples);
            }
            LanguageParing {
                lang: cm.languages[l].clone(),
                precision,
                max_confusion,
                confused_with,
                n_train,
                dropped: !reasons.is_empty(),
                reasons,
            }
        })
        .collect();
    ParingReport {
        thresholds: *thresholds,
        languages,
    }
}
