//! Tone classifiers with calibrated binary posteriors.
//!
//! Labels are `+1` (positive tone) and `-1` (negative tone). Every trained
//! model exposes `p(+1 | x)` through [`ProbModel::proba`]; naive Bayes and
//! logistic regression are natively probabilistic, the SVM goes through Platt
//! calibration on a held-out slice of its training data.

mod logreg;
mod mnb;
mod platt;
mod select;
mod svm;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::SparseVector;
use crate::hashing::sha256_hex;

pub use logreg::{minimize, predict_logreg, train_logreg, GdConfig, GdOutcome, LogisticObjective};
pub use mnb::{predict_mnb, train_mnb, validate_alpha, MnbModel, ALPHA_RANGE};
pub use platt::{platt_calibrate, platt_loss, platt_targets, CalibrationParams};
pub use select::{select_and_train, HyperGrid, Selection};
pub use svm::{hinge_total, svm_objective, train_svm};

pub(crate) const NEG: usize = 0;
pub(crate) const POS: usize = 1;

/// Regularization grid edges for logistic regression and the SVM.
pub const C_RANGE: (f64, f64) = (0.1, 3.0);

/// Fraction of the training split held out for SVM calibration.
pub const CALIBRATION_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("need at least {needed} samples per class, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("feature {index} has negative value {value}; naive Bayes needs nonnegative counts")]
    NegativeFeature { index: usize, value: f64 },
    #[error("{name}={value} outside [{}, {}]", range.0, range.1)]
    InvalidHyperparameter {
        name: &'static str,
        value: f64,
        range: (f64, f64),
    },
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("labels and rows differ in length ({rows} rows, {labels} labels)")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {0} is not in {{-1, +1}}")]
    InvalidLabel(i8),
    #[error("optimization produced non-finite values")]
    NonFinite,
    #[error("SVM posteriors need calibration parameters")]
    MissingCalibration,
    #[error("model was fitted on feature space {expected}, current space is {got}")]
    VocabularyMismatch { expected: String, got: String },
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::SingleClass => "SingleClass",
            Self::TooFewSamples { .. } => "TooFewSamples",
            Self::NegativeFeature { .. } => "NegativeFeature",
            Self::InvalidHyperparameter { .. } => "InvalidHyperparameter",
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::InvalidLabel(_) => "InvalidLabel",
            Self::NonFinite => "NonFinite",
            Self::MissingCalibration => "MissingCalibration",
            Self::VocabularyMismatch { .. } => "VocabularyMismatch",
            Self::UnsupportedVersion(_) => "UnsupportedVersion",
            Self::Format(_) => "MalformedModel",
            Self::Io { .. } => "IoError",
        }
    }
}

/// Returns `(n_neg, n_pos)` after checking lengths and label values.
pub(crate) fn check_binary(rows: usize, y: &[i8]) -> Result<(usize, usize), ModelError> {
    if rows != y.len() {
        return Err(ModelError::LengthMismatch { rows, labels: y.len() });
    }
    let mut counts = (0, 0);
    for &label in y {
        match label {
            -1 => counts.0 += 1,
            1 => counts.1 += 1,
            other => return Err(ModelError::InvalidLabel(other)),
        }
    }
    if counts.0 == 0 || counts.1 == 0 {
        return Err(ModelError::SingleClass);
    }
    Ok(counts)
}

pub(crate) fn check_dim(expected: usize, x: &SparseVector) -> Result<(), ModelError> {
    if x.dim != expected {
        return Err(ModelError::DimensionMismatch { expected, got: x.dim });
    }
    Ok(())
}

pub fn validate_c(c: f64) -> Result<f64, ModelError> {
    if c.is_finite() && (C_RANGE.0..=C_RANGE.1).contains(&c) {
        Ok(c)
    } else {
        Err(ModelError::InvalidHyperparameter {
            name: "C",
            value: c,
            range: C_RANGE,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    LogReg,
    Svm,
}

/// Linear decision function `w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub kind: LinearKind,
    #[serde(rename = "C")]
    pub c: f64,
    /// Training objective at the returned parameters.
    pub objective: f64,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn decision(&self, x: &SparseVector) -> Result<f64, ModelError> {
        check_dim(self.dim(), x)?;
        Ok(x.dot(&self.w) + self.b)
    }
}

/// Per-column offsets that make dense embedding features usable as naive
/// Bayes counts: `x' = max(x - min_train, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureShift {
    pub offsets: Vec<f64>,
}

impl FeatureShift {
    /// Returns `None` when every training value is already nonnegative.
    pub fn fit(x: &[SparseVector], dim: usize) -> Option<Self> {
        let mut mins = vec![0.0f64; dim];
        for row in x {
            for (i, v) in row.iter() {
                mins[i] = mins[i].min(v);
            }
        }
        mins.iter().any(|m| *m < 0.0).then_some(Self { offsets: mins })
    }

    pub fn apply(&self, x: &SparseVector) -> SparseVector {
        let mut dense = x.to_dense();
        for (d, off) in dense.iter_mut().zip(&self.offsets) {
            *d = (*d - off).max(0.0);
        }
        SparseVector::from_dense(&dense)
    }
}

/// The underlying fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Classifier {
    Mnb(MnbModel),
    Linear(LinearModel),
}

impl Classifier {
    pub fn dim(&self) -> usize {
        match self {
            Classifier::Mnb(m) => m.dim(),
            Classifier::Linear(m) => m.dim(),
        }
    }
}

/// Unified posterior: naive Bayes and logistic regression natively, the SVM
/// through its calibration map over margins.
pub fn predict_proba(model: &Classifier, calib: Option<&CalibrationParams>, x: &SparseVector) -> Result<f64, ModelError> {
    match model {
        Classifier::Mnb(m) => predict_mnb(m, x),
        Classifier::Linear(m) => match m.kind {
            LinearKind::LogReg => predict_logreg(m, x),
            LinearKind::Svm => {
                let c = calib.ok_or(ModelError::MissingCalibration)?;
                Ok(c.prob(m.decision(x)?))
            }
        },
    }
}

/// A classifier bundled with everything needed to produce `p(+1 | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbModel {
    pub spec: BaseSpec,
    pub classifier: Classifier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<FeatureShift>,
}

impl ProbModel {
    pub fn dim(&self) -> usize {
        self.classifier.dim()
    }

    pub fn proba(&self, x: &SparseVector) -> Result<f64, ModelError> {
        match &self.shift {
            Some(s) => {
                check_dim(self.dim(), x)?;
                predict_proba(&self.classifier, self.calibration.as_ref(), &s.apply(x))
            }
            None => predict_proba(&self.classifier, self.calibration.as_ref(), x),
        }
    }

    /// Stable content hash, embedded by ensembles that reference this model.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("model serializes").as_bytes())
    }
}

/// Base model family with its hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum BaseSpec {
    Mnb { alpha: f64 },
    LogReg { #[serde(rename = "C")] c: f64 },
    Svm { #[serde(rename = "C")] c: f64 },
}

impl BaseSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            BaseSpec::Mnb { .. } => ModelKind::Mnb,
            BaseSpec::LogReg { .. } => ModelKind::LogReg,
            BaseSpec::Svm { .. } => ModelKind::Svm,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BaseSpec::Mnb { alpha } => format!("mnb(alpha={alpha})"),
            BaseSpec::LogReg { c } => format!("logreg(C={c})"),
            BaseSpec::Svm { c } => format!("svm(C={c})"),
        }
    }
}

/// Model selector used by the CLI and the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mnb,
    LogReg,
    Svm,
    Vote,
    Stack,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Mnb, ModelKind::LogReg, ModelKind::Svm, ModelKind::Vote, ModelKind::Stack];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mnb => "mnb",
            ModelKind::LogReg => "logreg",
            ModelKind::Svm => "svm",
            ModelKind::Vote => "vote",
            ModelKind::Stack => "stack",
        }
    }

    pub fn is_base(self) -> bool {
        matches!(self, ModelKind::Mnb | ModelKind::LogReg | ModelKind::Svm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mnb" => Ok(ModelKind::Mnb),
            "logreg" => Ok(ModelKind::LogReg),
            "svm" => Ok(ModelKind::Svm),
            "vote" => Ok(ModelKind::Vote),
            "stack" => Ok(ModelKind::Stack),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

/// Solver settings shared by all base models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub svm_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-6,
            svm_epochs: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn gd(&self) -> GdConfig {
        GdConfig {
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Trains one base model. The SVM holds out a label-stratified 20% slice of
/// `x` to fit its Platt map and trains on the rest.
pub fn train_base(spec: BaseSpec, x: &[SparseVector], y: &[i8], dim: usize, cfg: &TrainConfig) -> Result<ProbModel, ModelError> {
    match spec {
        BaseSpec::Mnb { alpha } => {
            let shift = FeatureShift::fit(x, dim);
            let model = match &shift {
                Some(s) => {
                    let shifted: Vec<SparseVector> = x.iter().map(|r| s.apply(r)).collect();
                    train_mnb(&shifted, y, dim, alpha)?
                }
                None => train_mnb(x, y, dim, alpha)?,
            };
            Ok(ProbModel {
                spec,
                classifier: Classifier::Mnb(model),
                calibration: None,
                shift,
            })
        }
        BaseSpec::LogReg { c } => Ok(ProbModel {
            spec,
            classifier: Classifier::Linear(train_logreg(x, y, dim, c, cfg.gd())?),
            calibration: None,
            shift: None,
        }),
        BaseSpec::Svm { c } => {
            validate_c(c)?;
            check_binary(x.len(), y)?;
            let (fit_idx, cal_idx) = crate::eval::label_holdout(y, CALIBRATION_FRACTION, cfg.seed);
            let pick = |idx: &[usize]| -> (Vec<SparseVector>, Vec<i8>) {
                (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
            };
            let (fx, fy) = pick(&fit_idx);
            let model = train_svm(&fx, &fy, dim, c, cfg.svm_epochs, cfg.seed)?;
            let margins = cal_idx
                .iter()
                .map(|&i| Ok((model.decision(&x[i])?, y[i])))
                .collect::<Result<Vec<_>, ModelError>>()?;
            let calibration = platt_calibrate(&margins)?;
            Ok(ProbModel {
                spec,
                classifier: Classifier::Linear(model),
                calibration: Some(calibration),
                shift: None,
            })
        }
    }
}

pub const MODEL_FORMAT: &str = "tonebias-model";
pub const MODEL_VERSION: u32 = 1;

/// Versioned on-disk model bound to the feature space it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub encoding: String,
    pub feature_dim: usize,
    pub space_hash: String,
    pub model: ProbModel,
}

impl ModelFile {
    pub fn new(model: ProbModel, encoding: &str, space_hash: String) -> Self {
        Self {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_VERSION,
            encoding: encoding.to_owned(),
            feature_dim: model.dim(),
            space_hash,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    /// Parses a model file and checks it against the current feature space.
    pub fn from_json(text: &str, expected_space_hash: Option<&str>) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(ModelError::Format(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(ModelError::UnsupportedVersion(file.version));
        }
        if file.model.dim() != file.feature_dim {
            return Err(ModelError::DimensionMismatch {
                expected: file.feature_dim,
                got: file.model.dim(),
            });
        }
        if let Some(expected) = expected_space_hash {
            if file.space_hash != expected {
                return Err(ModelError::VocabularyMismatch {
                    expected: file.space_hash,
                    got: expected.to_owned(),
                });
            }
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path, expected_space_hash: Option<&str>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, expected_space_hash)
    }
}
