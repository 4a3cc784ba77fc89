//! Tone-bias auditing for user–assistant dialogue corpora.
//!
//! The pipeline runs in stages, and each stage is its own module:
//!
//! - [`corpus`]: dialogue data model, JSONL ingestion, the seeded template
//!   generator and prompt-pack emitter.
//! - [`preprocess`]: normalization, tokenization, rule-based lemmatization and
//!   the 3..=200 token length filter.
//! - [`weaklabel`]: lexicon scoring, external score loading and
//!   confidence-threshold labeling.
//! - [`features`]: TF-IDF and mean-pooled embedding encodings.
//! - [`models`]: multinomial naive Bayes, logistic regression, a Pegasos
//!   linear SVM and Platt calibration.
//! - [`ensemble`]: soft voting and logistic stacking.
//! - [`eval`]: stratified splits, metrics, threshold sweeps, skew statistics
//!   and report emission.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod hashing;
pub mod models;
pub mod par;
pub mod preprocess;
pub mod weaklabel;

pub use error::{Error, Result};
