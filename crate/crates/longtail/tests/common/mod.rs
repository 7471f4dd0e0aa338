#![allow(dead_code)]

use std::path::Path;

use longtail::io;
use longtail::pipeline::PipelineConfig;
use longtail_core::corpus::Document;
use longtail_core::filters::{NegativeFilterRule, RuleKind};
use longtail_testkit::synth::{SynthData, SPAM_LANG, SPAM_TOKEN};

/// Writes crawl, labeled data and negative rules under `dir` and returns a
/// config reading them, with a LangID model small enough for tests.
pub fn write_synth(dir: &Path, data: &SynthData) -> PipelineConfig {
    let docs: Vec<Document> = data
        .crawl
        .iter()
        .map(|d| {
            Document::from_sentences(
                d.id.clone(),
                Some(d.url.clone()),
                d.sentences.iter().map(|s| s.text.as_str()),
            )
        })
        .collect();
    io::write_documents(&dir.join("crawl.jsonl"), &docs).unwrap();
    io::write_labeled(&dir.join("train.tsv"), &data.train).unwrap();
    io::write_labeled(&dir.join("eval.tsv"), &data.eval).unwrap();
    let rules = vec![NegativeFilterRule {
        lang: SPAM_LANG.into(),
        rule: RuleKind::Token,
        pattern: SPAM_TOKEN.into(),
        case_sensitive: false,
    }];
    io::write_json(&dir.join("rules.json"), &rules).unwrap();

    let mut config = PipelineConfig::default();
    config.input.crawl = dir.join("crawl.jsonl");
    config.input.train = Some(dir.join("train.tsv"));
    config.input.eval = Some(dir.join("eval.tsv"));
    config.input.negative_rules = Some(dir.join("rules.json"));
    config.output.dir = dir.join("out");
    config.langid.ngram_orders = vec![1, 2, 3];
    config.langid.n_buckets = 1 << 16;
    config.langid.epochs = 40;
    config
}
