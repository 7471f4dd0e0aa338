//! Funnel summaries of pipeline manifests.

use std::collections::BTreeMap;
use std::fmt::Write;

use longtail_core::corpus::CorpusStats;
use serde::{Deserialize, Serialize};

use crate::pipeline::Manifest;

/// Sentence counts left after each stage, one row per manifest key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelReport {
    pub config_hash: String,
    pub stages: Vec<String>,
    /// `rows[key][k]` is the `out` count of stage `k`, if the key appears there.
    pub rows: BTreeMap<String, Vec<Option<usize>>>,
    /// Per stage, the sum over all rows.
    pub totals: Vec<usize>,
    pub stats: BTreeMap<String, CorpusStats>,
    pub below_min_sentences: Vec<String>,
}

pub fn funnel(manifest: &Manifest) -> FunnelReport {
    let stages: Vec<String> = manifest.stages.iter().map(|s| s.stage.clone()).collect();
    let mut rows: BTreeMap<String, Vec<Option<usize>>> = BTreeMap::new();
    for (k, stage) in manifest.stages.iter().enumerate() {
        for (key, r) in &stage.entries {
            rows.entry(key.clone())
                .or_insert_with(|| vec![None; stages.len()])[k] = Some(r.output);
        }
    }
    let totals = (0..stages.len())
        .map(|k| rows.values().filter_map(|r| r[k]).sum())
        .collect();
    let langs = &manifest.summary.languages;
    FunnelReport {
        config_hash: manifest.config_hash.clone(),
        stages,
        rows,
        totals,
        stats: langs.iter().map(|(l, s)| (l.clone(), s.stats)).collect(),
        below_min_sentences: langs
            .iter()
            .filter(|(_, s)| s.below_min_sentences)
            .map(|(l, _)| l.clone())
            .collect(),
    }
}

/// Fixed-width text table.
pub fn render_text(report: &FunnelReport) -> String {
    let key_w = report
        .rows
        .keys()
        .map(|k| k.chars().count())
        .chain([5])
        .max()
        .unwrap_or(5);
    let col_w: Vec<usize> = report
        .stages
        .iter()
        .zip(&report.totals)
        .map(|(s, t)| s.len().max(t.to_string().len()))
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:<key_w$}", "key");
    for (s, w) in report.stages.iter().zip(&col_w) {
        let _ = write!(out, "  {s:>w$}");
    }
    out.push('\n');
    for (key, cells) in &report.rows {
        let _ = write!(out, "{key:<key_w$}");
        for (c, w) in cells.iter().zip(&col_w) {
            let cell = c.map_or_else(|| "-".to_string(), |n| n.to_string());
            let _ = write!(out, "  {cell:>w$}");
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<key_w$}", "total");
    for (t, w) in report.totals.iter().zip(&col_w) {
        let _ = write!(out, "  {t:>w$}");
    }
    out.push('\n');
    if !report.stats.is_empty() {
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<key_w$}  {:>9}  {:>9}  {:>10}",
            "lang", "sentences", "tokens", "chars/sent"
        );
        for (l, s) in &report.stats {
            let _ = writeln!(
                out,
                "{l:<key_w$}  {:>9}  {:>9}  {:>10.1}",
                s.n_sentences, s.n_tokens, s.chars_per_sentence
            );
        }
    }
    if !report.below_min_sentences.is_empty() {
        let _ = writeln!(
            out,
            "\nbelow minimum size: {}",
            report.below_min_sentences.join(", ")
        );
    }
    out
}
