//! Sentence normalization and the shared tokenizer.
//!
//! Every component that counts tokens (wordlists, TF-IIF, anomaly scores,
//! hit-rate, corpus statistics) goes through [`tokenize`] so that counts are
//! comparable across stages.

use alloc::string::String;
use alloc::vec::Vec;

use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

/// Trims, collapses internal whitespace runs to a single space and applies
/// canonical composition (NFC).
pub fn normalize_sentence(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.nfc());
    }
    out
}

fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// Splits on Unicode whitespace, strips leading and trailing punctuation from
/// every token and case-folds. Tokens that were pure punctuation disappear.
pub fn tokenize(text: &str) -> Vec<String> {
    tokens(text).map(str::to_lowercase).collect()
}

/// Like [`tokenize`] but keeps the original case.
pub fn tokenize_cased(text: &str) -> Vec<String> {
    tokens(text).map(String::from).collect()
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(is_punctuation))
        .filter(|w| !w.is_empty())
}
