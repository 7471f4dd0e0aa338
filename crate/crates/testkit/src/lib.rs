//! Test support: straightforward reference implementations used as oracles
//! and a generator for synthetic multilingual crawls.
//!
//! Nothing here depends on `longtail-core`, so the oracles cannot share bugs
//! with the code they check.

pub mod oracle;
pub mod synth;
