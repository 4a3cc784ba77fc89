//! Splits, metrics, threshold sweeps, skew statistics and audit reports.

mod metrics;
mod report;
mod skew;
mod split;
mod sweep;

use thiserror::Error;

pub use metrics::{compute_metrics, ClassMetrics, Confusion, Metrics};
pub use report::{emit_report, fmt6, ReportFile, SkewEntry};
pub use skew::{binomial_two_sided, skew_report, SkewReport};
pub use split::{label_holdout, stratified_folds, stratified_split, Split, SplitSpec};
pub use sweep::{threshold_sweep, LabelSummary, SweepConfig, SweepResult, SweepRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("length mismatch: {truth} true labels, {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {0} is not in {{-1, +1}}")]
    InvalidLabel(i8),
    #[error("no POSITIVE or NEGATIVE labels to test")]
    NoConfidentLabels,
    #[error("tau {0} outside (0.5, 1]")]
    InvalidTau(f64),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("tau {tau}: too few labeled samples ({positive} positive, {negative} negative)")]
    InsufficientLabeled { tau: f64, positive: usize, negative: usize },
    #[error("dense encoding requested without a vector table")]
    MissingVectors,
    #[error(transparent)]
    Label(#[from] crate::weaklabel::LabelError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Ensemble(#[from] crate::ensemble::EnsembleError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::InvalidSplit(_) => "InvalidSplit",
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::InvalidLabel(_) => "InvalidLabel",
            Self::NoConfidentLabels => "NoConfidentLabels",
            Self::InvalidTau(_) => "InvalidTau",
            Self::EmptyInput(_) => "EmptyInput",
            Self::InsufficientLabeled { .. } => "InsufficientLabeled",
            Self::MissingVectors => "MissingVectors",
            Self::Label(e) => e.code(),
            Self::Feature(e) => e.code(),
            Self::Model(e) => e.code(),
            Self::Ensemble(e) => e.code(),
            Self::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
