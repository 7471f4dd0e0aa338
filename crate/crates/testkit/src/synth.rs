//! Synthetic "languages" with distinct character distributions, labeled
//! LangID data and a polluted multi-document crawl with ground truth.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The high-resource distractor.
pub const DISTRACTOR: &str = "en";
/// Spam marker injected into one language's documents.
pub const SPAM_TOKEN: &str = "casino";
pub const SPAM_LANG: &str = "qac";

struct LanguageSpec {
    code: &'static str,
    letters: &'static str,
}

const LANGUAGES: [LanguageSpec; 6] = [
    LanguageSpec {
        code: "en",
        letters: "etaoinshrdlucmfwypvbgk",
    },
    LanguageSpec {
        code: "qaa",
        letters: "aeioukmnptl",
    },
    LanguageSpec {
        code: "qab",
        letters: "aāeēiīoōuūhkmnprtw",
    },
    LanguageSpec {
        code: "qac",
        letters: "аеиоуклмнпрстд",
    },
    LanguageSpec {
        code: "qad",
        letters: "αεηιοκλμνπρστ",
    },
    LanguageSpec {
        code: "qae",
        letters: "aeıioöuüçşğdkmnrt",
    },
];

/// Lines that carry no language.
const BOILERPLATE: [&str; 4] = ["© 2021", "404 | 500", ">>> 12 / 48 <<<", "* * *"];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_docs: usize,
    /// Chance that a crawl sentence is swapped for one in another language.
    pub pollution: f64,
    pub train_per_lang: usize,
    pub eval_per_lang: usize,
    pub vocab_size: usize,
    /// Share of crawl documents written in the distractor language.
    pub distractor_share: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_docs: 2000,
            pollution: 0.10,
            train_per_lang: 300,
            eval_per_lang: 150,
            vocab_size: 400,
            distractor_share: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSentence {
    pub text: String,
    /// `None` for boilerplate and spam.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDoc {
    pub id: String,
    pub url: String,
    pub sentences: Vec<SynthSentence>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub languages: Vec<String>,
    /// `(lang, text)` pairs.
    pub train: Vec<(String, String)>,
    pub eval: Vec<(String, String)>,
    pub crawl: Vec<SynthDoc>,
}

struct Lexicon {
    code: &'static str,
    words: Vec<String>,
    zipf: WeightedIndex<f64>,
    /// Recurring per-language lines such as menus.
    stock: Vec<String>,
}

impl Lexicon {
    fn new(spec: &LanguageSpec, vocab: usize, rng: &mut ChaCha8Rng) -> Self {
        let letters: Vec<char> = spec.letters.chars().collect();
        let letter_w =
            WeightedIndex::new((0..letters.len()).map(|r| 1.0 / (r as f64 + 1.5))).unwrap();
        let mut seen = BTreeSet::new();
        let mut words = Vec::with_capacity(vocab);
        while words.len() < vocab {
            let len = rng.gen_range(2..=8);
            let w: String = (0..len).map(|_| letters[letter_w.sample(rng)]).collect();
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        let zipf = WeightedIndex::new((0..vocab).map(|r| 1.0 / (r as f64 + 1.0))).unwrap();
        let mut lex = Lexicon {
            code: spec.code,
            words,
            zipf,
            stock: Vec::new(),
        };
        lex.stock = (0..10).map(|_| lex.sentence(rng)).collect();
        lex
    }

    fn word(&self, rng: &mut ChaCha8Rng) -> &str {
        &self.words[self.zipf.sample(rng)]
    }

    fn sentence(&self, rng: &mut ChaCha8Rng) -> String {
        let n = rng.gen_range(5..=14);
        let mut s = String::new();
        for i in 0..n {
            let w = self.word(rng);
            if i == 0 {
                let mut cs = w.chars();
                let first = cs.next().unwrap();
                s.extend(first.to_uppercase());
                s.push_str(cs.as_str());
            } else {
                s.push(' ');
                s.push_str(w);
            }
        }
        s.push('.');
        s
    }
}

/// Generates the whole data set deterministically from `config.seed`.
pub fn generate(config: &SynthConfig) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lexicons: Vec<Lexicon> = LANGUAGES
        .iter()
        .map(|spec| Lexicon::new(spec, config.vocab_size, &mut rng))
        .collect();

    let mut train = Vec::new();
    let mut eval = Vec::new();
    for lex in &lexicons {
        for _ in 0..config.train_per_lang {
            train.push((lex.code.to_string(), lex.sentence(&mut rng)));
        }
        for _ in 0..config.eval_per_lang {
            eval.push((lex.code.to_string(), lex.sentence(&mut rng)));
        }
    }
    train.shuffle(&mut rng);
    eval.shuffle(&mut rng);

    let n_low = lexicons.len() - 1;
    let mut crawl = Vec::with_capacity(config.n_docs);
    for d in 0..config.n_docs {
        let main = if rng.gen_bool(config.distractor_share) {
            0
        } else {
            1 + rng.gen_range(0..n_low)
        };
        let n_sent = rng.gen_range(4..=12);
        let mut sentences = Vec::with_capacity(n_sent + 2);
        for _ in 0..n_sent {
            let lang = if rng.gen_bool(config.pollution) {
                let mut other = rng.gen_range(0..lexicons.len() - 1);
                if other >= main {
                    other += 1;
                }
                other
            } else {
                main
            };
            let lex = &lexicons[lang];
            let text = if rng.gen_bool(0.05) {
                lex.stock.choose(&mut rng).unwrap().clone()
            } else {
                lex.sentence(&mut rng)
            };
            sentences.push(SynthSentence {
                text,
                label: Some(lex.code.to_string()),
            });
        }
        if lexicons[main].code == SPAM_LANG && rng.gen_bool(0.3) {
            let lex = &lexicons[main];
            let at = rng.gen_range(0..sentences.len());
            let text = format!(
                "{} {} {}",
                lex.sentence(&mut rng),
                SPAM_TOKEN,
                lex.word(&mut rng)
            );
            sentences.insert(at, SynthSentence { text, label: None });
        }
        if rng.gen_bool(0.3) {
            let line = BOILERPLATE.choose(&mut rng).unwrap().to_string();
            sentences.push(SynthSentence {
                text: line,
                label: None,
            });
        }
        crawl.push(SynthDoc {
            id: format!("doc{d:05}"),
            url: format!("https://example.org/{}/{d}", lexicons[main].code),
            sentences,
        });
    }

    SynthData {
        languages: lexicons.iter().map(|l| l.code.to_string()).collect(),
        train,
        eval,
        crawl,
    }
}

impl SynthData {
    /// Gold labels per distinct crawl sentence text.
    pub fn labels(&self) -> BTreeMap<&str, BTreeSet<Option<&str>>> {
        let mut m: BTreeMap<&str, BTreeSet<Option<&str>>> = BTreeMap::new();
        for d in &self.crawl {
            for s in &d.sentences {
                m.entry(s.text.as_str())
                    .or_default()
                    .insert(s.label.as_deref());
            }
        }
        m
    }

    /// Distinct crawl texts labeled `lang`.
    pub fn gold_texts(&self, lang: &str) -> BTreeSet<&str> {
        self.crawl
            .iter()
            .flat_map(|d| &d.sentences)
            .filter(|s| s.label.as_deref() == Some(lang))
            .map(|s| s.text.as_str())
            .collect()
    }

    /// Precision and recall of a mined corpus against the generator labels.
    /// Texts are compared after whitespace normalization by the caller.
    pub fn score(&self, lang: &str, mined: &[String]) -> (f64, f64) {
        let labels = self.labels();
        let correct = mined
            .iter()
            .filter(|t| {
                labels
                    .get(t.as_str())
                    .is_some_and(|l| l.contains(&Some(lang)))
            })
            .count();
        let precision = if mined.is_empty() {
            0.0
        } else {
            correct as f64 / mined.len() as f64
        };
        let gold = self.gold_texts(lang);
        let mined: BTreeSet<&str> = mined.iter().map(String::as_str).collect();
        let found = gold.iter().filter(|t| mined.contains(*t)).count();
        let recall = if gold.is_empty() {
            1.0
        } else {
            found as f64 / gold.len() as f64
        };
        (precision, recall)
    }
}
