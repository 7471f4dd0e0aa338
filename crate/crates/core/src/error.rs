use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("training data must contain at least two distinct languages (found {0})")]
    DegenerateData(usize),
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
    #[error("invalid feature spec: {0}")]
    InvalidFeatureSpec(&'static str),
    #[error("invalid dendrogram cut: {0}")]
    InvalidCut(String),
    #[error("distance matrix is not square, symmetric and zero-diagonal")]
    InvalidDistanceMatrix,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("document `{0}` has no sentences")]
    EmptyDocument(String),
    #[error("document `{0}` is not annotated")]
    NotAnnotated(String),
    #[error("sentence index {index} out of range for a document of {len} sentences")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no wordlist for language `{0}`")]
    MissingWordlist(String),
    #[error("expected a {expected} wordlist, got {found}")]
    WrongListKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid bin boundaries: {0}")]
    InvalidBoundaries(&'static str),
    #[error("hypothesis and reference lists differ in length ({hyp} vs {refs})")]
    LengthMismatch { hyp: usize, refs: usize },
    #[error("invalid audit label fractions: {0}")]
    InvalidFractions(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
