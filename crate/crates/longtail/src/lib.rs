//! File formats, the mining pipeline and the command-line interface on top
//! of `longtail-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod model_file;
pub mod pipeline;
pub mod report;
pub mod translator;

pub use error::{Error, Result};
