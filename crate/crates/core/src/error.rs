use thiserror::Error;

use crate::corpus::CorpusError;
use crate::ensemble::EnsembleError;
use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::models::ModelError;
use crate::preprocess::PreprocessError;
use crate::weaklabel::LabelError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for pipeline-level operations that cross module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    /// Stable machine-readable name of the underlying error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Corpus(e) => e.code(),
            Error::Preprocess(e) => e.code(),
            Error::Label(e) => e.code(),
            Error::Feature(e) => e.code(),
            Error::Model(e) => e.code(),
            Error::Ensemble(e) => e.code(),
            Error::Eval(e) => e.code(),
        }
    }

    /// True for errors caused by invalid input or configuration, as opposed to
    /// failures while running an otherwise valid job.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Corpus(e) => !matches!(e, CorpusError::Io { .. }),
            Error::Preprocess(_) => true,
            Error::Label(e) => !matches!(e, LabelError::Io { .. }),
            Error::Feature(e) => !matches!(e, FeatureError::Io { .. }),
            Error::Model(e) => matches!(
                e,
                ModelError::InvalidHyperparameter { .. }
                    | ModelError::SingleClass
                    | ModelError::TooFewSamples { .. }
                    | ModelError::NegativeFeature { .. }
                    | ModelError::VocabularyMismatch { .. }
                    | ModelError::UnsupportedVersion(_)
            ),
            Error::Ensemble(e) => !matches!(e, EnsembleError::Model(_)),
            Error::Eval(e) => matches!(
                e,
                EvalError::InvalidSplit(_)
                    | EvalError::LengthMismatch { .. }
                    | EvalError::NoConfidentLabels
                    | EvalError::InvalidTau(_)
                    | EvalError::EmptyInput(_)
            ),
        }
    }
}
