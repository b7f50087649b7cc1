//! Zero-shot classification over precomputed visual features.
//!
//! The crate implements a latent-attribute network with a semantic
//! embedding module and a feedback path ([`model`]), the attribute
//! correlation transfer and prototype decision rules it relies on
//! ([`attribute_space`]), a transductive ensemble co-training loop that
//! pseudo-labels unseen-class samples with a voting panel ([`ect`]), and
//! evaluation helpers ([`eval`]).
//!
//! Inner loops run on rayon when the `parallel` feature is enabled (the
//! default); every result is identical with the feature disabled.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribute_space;
pub mod dataset;
pub mod ect;
mod error;
pub mod eval;
pub mod exec;
pub mod model;
pub mod numfmt;
pub mod regressors;
pub mod tensor;

pub use error::{Error, Result};
