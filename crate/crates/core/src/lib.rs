//! Core algorithms for mining monolingual text for long-tail languages from a
//! web crawl: language identification, confusable-language clustering, the
//! sentence filtering cascade, token-distribution anomaly scores and
//! evaluation metrics.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod anomaly;
pub mod cluster;
pub mod corpus;
pub mod error;
pub mod filters;
pub mod langid;
pub mod metrics;
pub mod text;

pub use cluster::{ClusterId, ClusterMap, DistanceMatrix};
pub use corpus::{Document, MonoCorpus, SentenceRecord};
pub use error::{Error, Result};
pub use langid::{ConfusionMatrix, LangIdModel, Prediction, Predictor};
