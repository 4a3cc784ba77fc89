//! Soft voting and logistic stacking over calibrated base-model posteriors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::stratified_folds;
use crate::features::SparseVector;
use crate::models::{minimize, train_base, BaseSpec, LogisticObjective, ModelError, ProbModel, TrainConfig};
use crate::par::{self, Exec};
use crate::weaklabel::sigmoid;

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("weights must be nonnegative and sum to 1: {0}")]
    WeightSimplexViolation(String),
    #[error("expected {expected} posteriors, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("posterior {0} outside [0, 1]")]
    InvalidPosterior(f64),
    #[error("stacking with {folds} folds needs at least {folds} samples per class, smallest class has {got}")]
    TooFewSamples { folds: usize, got: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("fold count must be at least 2, got {0}")]
    InvalidFolds(usize),
    #[error("stacking decision threshold {0} outside (0, 1)")]
    InvalidTau(f64),
    #[error("base model {index} does not match the ensemble (expected hash {expected}, got {got})")]
    BaseModelMismatch {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("ensemble file: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl EnsembleError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::WeightSimplexViolation(_) => "WeightSimplexViolation",
            Self::ArityMismatch { .. } => "ArityMismatch",
            Self::InvalidPosterior(_) => "InvalidPosterior",
            Self::TooFewSamples { .. } => "TooFewSamples",
            Self::SingleClass => "SingleClass",
            Self::InvalidFolds(_) => "InvalidFolds",
            Self::InvalidTau(_) => "InvalidTau",
            Self::BaseModelMismatch { .. } => "BaseModelMismatch",
            Self::Format(_) => "MalformedEnsemble",
            Self::Model(e) => e.code(),
        }
    }
}

/// Convex combination weights for soft voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftVoteConfig {
    pub weights: Vec<f64>,
}

impl SoftVoteConfig {
    pub fn new(weights: Vec<f64>) -> Result<Self, EnsembleError> {
        if weights.is_empty() {
            return Err(EnsembleError::WeightSimplexViolation("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(EnsembleError::WeightSimplexViolation(format!("weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(EnsembleError::WeightSimplexViolation(format!("sum is {sum}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Result<Self, EnsembleError> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }
}

/// `p_ens = Σ_k w_k p_k`, clamped to `[min p_k, max p_k]` to absorb rounding.
pub fn soft_vote(p: &[f64], cfg: &SoftVoteConfig) -> Result<f64, EnsembleError> {
    if p.len() != cfg.k() {
        return Err(EnsembleError::ArityMismatch {
            expected: cfg.k(),
            got: p.len(),
        });
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(EnsembleError::InvalidPosterior(*bad));
    }
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mixed: f64 = p.iter().zip(&cfg.weights).map(|(p, w)| p * w).sum();
    Ok(mixed.clamp(lo, hi))
}

/// `+1` iff `p > 0.5`; an exact tie goes to `-1`.
pub fn ensemble_label(p: f64) -> i8 {
    if p > 0.5 { 1 } else { -1 }
}

/// Logistic combiner `p = σ(β₀ + βᵀz)` over base posteriors `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub k: usize,
    pub folds: usize,
    pub decision_tau: f64,
}

pub fn validate_stack_tau(tau: f64) -> Result<f64, EnsembleError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(tau)
    } else {
        Err(EnsembleError::InvalidTau(tau))
    }
}

/// Returns `(p_ens, label)`; the label is `+1` iff `p_ens ≥ decision_tau`.
pub fn predict_stacking(stack: &StackModel, z: &[f64]) -> Result<(f64, i8), EnsembleError> {
    if z.len() != stack.k {
        return Err(EnsembleError::ArityMismatch {
            expected: stack.k,
            got: z.len(),
        });
    }
    let logit = stack.beta0 + stack.beta.iter().zip(z).map(|(b, z)| b * z).sum::<f64>();
    let p = sigmoid(logit);
    Ok((p, if p >= stack.decision_tau { 1 } else { -1 }))
}

/// Fits the unregularized logistic meta-model on `(z, y)` pairs.
///
/// The solver works on `z - 0.5` so that uninformative posteriors leave
/// `β = 0` and put the class prior into the intercept; the returned `β₀` is
/// mapped back to the uncentered form.
pub fn fit_meta(z: &[Vec<f64>], y: &[i8], cfg: &TrainConfig) -> Result<(f64, Vec<f64>), EnsembleError> {
    let k = z.first().map_or(0, Vec::len);
    if z.len() != y.len() {
        return Err(ModelError::LengthMismatch { rows: z.len(), labels: y.len() }.into());
    }
    if let Some(row) = z.iter().find(|r| r.len() != k) {
        return Err(EnsembleError::ArityMismatch { expected: k, got: row.len() });
    }
    let rows: Vec<SparseVector> = z
        .iter()
        .map(|r| SparseVector::from_dense(&r.iter().map(|v| v - 0.5).collect::<Vec<_>>()))
        .collect();
    let obj = LogisticObjective {
        x: &rows,
        y,
        c: 1.0,
        l2: false,
    };
    let out = minimize(&obj, k, cfg.gd())?;
    let beta0 = out.b - 0.5 * out.w.iter().sum::<f64>();
    Ok((beta0, out.w))
}

/// Stacking fit with its out-of-fold bookkeeping.
#[derive(Debug, Clone)]
pub struct StackFit {
    pub model: StackModel,
    /// Base models refitted on all training rows.
    pub bases: Vec<ProbModel>,
    /// One out-of-fold posterior row per training sample, in input order.
    pub oof: Vec<Vec<f64>>,
    /// Sample indices held out by each fold.
    pub fold_members: Vec<Vec<usize>>,
}

/// Trains each base on the complement of every stratified fold, records the
/// held-out posteriors, fits the meta-model on them, then refits the bases on
/// all of `x`.
#[allow(clippy::too_many_arguments)]
pub fn fit_stacking(
    specs: &[BaseSpec],
    x: &[SparseVector],
    y: &[i8],
    dim: usize,
    folds: usize,
    decision_tau: f64,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<StackFit, EnsembleError> {
    if folds < 2 {
        return Err(EnsembleError::InvalidFolds(folds));
    }
    validate_stack_tau(decision_tau)?;
    if specs.is_empty() {
        return Err(EnsembleError::ArityMismatch { expected: 1, got: 0 });
    }
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch { rows: x.len(), labels: y.len() }.into());
    }
    let n_pos = y.iter().filter(|&&v| v > 0).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EnsembleError::SingleClass);
    }
    if n_pos.min(n_neg) < folds {
        return Err(EnsembleError::TooFewSamples {
            folds,
            got: n_pos.min(n_neg),
        });
    }

    let fold_members = stratified_folds(y, folds, cfg.seed);
    let fold_ids: Vec<usize> = (0..folds).collect();
    let per_fold = par::try_map(exec, &fold_ids, |&f| -> Result<Vec<(usize, Vec<f64>)>, ModelError> {
        let held = &fold_members[f];
        let mut is_held = vec![false; x.len()];
        held.iter().for_each(|&i| is_held[i] = true);
        let (tx, ty): (Vec<SparseVector>, Vec<i8>) = (0..x.len())
            .filter(|&i| !is_held[i])
            .map(|i| (x[i].clone(), y[i]))
            .unzip();
        let fold_cfg = cfg.with_seed(cfg.seed.wrapping_add(f as u64 + 1));
        let models = specs
            .iter()
            .map(|&s| train_base(s, &tx, &ty, dim, &fold_cfg))
            .collect::<Result<Vec<_>, _>>()?;
        held.iter()
            .map(|&i| Ok((i, models.iter().map(|m| m.proba(&x[i])).collect::<Result<Vec<_>, _>>()?)))
            .collect()
    })?;
    let mut oof: Vec<Option<Vec<f64>>> = vec![None; x.len()];
    for (i, row) in per_fold.into_iter().flatten() {
        debug_assert!(oof[i].is_none(), "sample {i} held out twice");
        oof[i] = Some(row);
    }
    let oof: Vec<Vec<f64>> = oof.into_iter().map(|r| r.expect("every sample is held out once")).collect();

    let (beta0, beta) = fit_meta(&oof, y, cfg)?;
    let bases = par::try_map(exec, specs, |&s| train_base(s, x, y, dim, cfg))?;
    Ok(StackFit {
        model: StackModel {
            beta0,
            beta,
            k: specs.len(),
            folds,
            decision_tau,
        },
        bases,
        oof,
        fold_members,
    })
}

/// How base posteriors are combined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "combiner", rename_all = "lowercase")]
pub enum Combiner {
    Vote(SoftVoteConfig),
    Stack(StackModel),
}

/// A combiner together with the base models it was built on. The hashes pin
/// the exact bases; predicting with anything else is refused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub combiner: Combiner,
    pub base_hashes: Vec<String>,
    pub bases: Vec<ProbModel>,
}

impl Ensemble {
    pub fn new(combiner: Combiner, bases: Vec<ProbModel>) -> Result<Self, EnsembleError> {
        let k = match &combiner {
            Combiner::Vote(cfg) => cfg.k(),
            Combiner::Stack(s) => s.k,
        };
        if k != bases.len() {
            return Err(EnsembleError::ArityMismatch {
                expected: k,
                got: bases.len(),
            });
        }
        let base_hashes = bases.iter().map(ProbModel::hash).collect();
        Ok(Self {
            combiner,
            base_hashes,
            bases,
        })
    }

    pub fn vote(bases: Vec<ProbModel>, cfg: SoftVoteConfig) -> Result<Self, EnsembleError> {
        Self::new(Combiner::Vote(cfg), bases)
    }

    pub fn stack(fit: StackFit) -> Result<Self, EnsembleError> {
        Self::new(Combiner::Stack(fit.model), fit.bases)
    }

    /// Checks that `bases` are exactly the models this ensemble was built on.
    pub fn check_bases(&self, bases: &[ProbModel]) -> Result<(), EnsembleError> {
        if bases.len() != self.base_hashes.len() {
            return Err(EnsembleError::ArityMismatch {
                expected: self.base_hashes.len(),
                got: bases.len(),
            });
        }
        for (index, (m, expected)) in bases.iter().zip(&self.base_hashes).enumerate() {
            let got = m.hash();
            if &got != expected {
                return Err(EnsembleError::BaseModelMismatch {
                    index,
                    expected: expected.clone(),
                    got,
                });
            }
        }
        Ok(())
    }

    /// Combines externally supplied base models after verifying them.
    pub fn predict_with(&self, bases: &[ProbModel], x: &SparseVector) -> Result<(f64, i8), EnsembleError> {
        self.check_bases(bases)?;
        let z = bases.iter().map(|m| m.proba(x)).collect::<Result<Vec<_>, _>>()?;
        match &self.combiner {
            Combiner::Vote(cfg) => {
                let p = soft_vote(&z, cfg)?;
                Ok((p, ensemble_label(p)))
            }
            Combiner::Stack(s) => predict_stacking(s, &z),
        }
    }

    pub fn predict(&self, x: &SparseVector) -> Result<(f64, i8), EnsembleError> {
        self.predict_with(&self.bases, x)
    }
}

pub const ENSEMBLE_FORMAT: &str = "tonebias-ensemble";
pub const ENSEMBLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub format: String,
    pub version: u32,
    pub encoding: String,
    pub space_hash: String,
    pub ensemble: Ensemble,
}

impl EnsembleFile {
    pub fn new(ensemble: Ensemble, encoding: &str, space_hash: String) -> Self {
        Self {
            format: ENSEMBLE_FORMAT.to_owned(),
            version: ENSEMBLE_VERSION,
            encoding: encoding.to_owned(),
            space_hash,
            ensemble,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("ensemble serializes");
        s.push('\n');
        s
    }

    /// Parses and verifies that the embedded bases match their recorded hashes.
    pub fn from_json(text: &str) -> Result<Self, EnsembleError> {
        let file: EnsembleFile = serde_json::from_str(text).map_err(|e| EnsembleError::Format(e.to_string()))?;
        if file.format != ENSEMBLE_FORMAT {
            return Err(EnsembleError::Format(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != ENSEMBLE_VERSION {
            return Err(ModelError::UnsupportedVersion(file.version).into());
        }
        file.ensemble.check_bases(&file.ensemble.bases)?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), EnsembleError> {
        std::fs::write(path, self.to_json()).map_err(|source| {
            ModelError::Io {
                path: path.display().to_string(),
                source,
            }
            .into()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blobs(n_per_class: usize) -> (Vec<SparseVector>, Vec<i8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n_per_class {
            let s = (i % 7) as f64 * 0.1;
            x.push(SparseVector::from_dense(&[1.0 + s, 0.3 + s / 2.0]));
            y.push(1);
            x.push(SparseVector::from_dense(&[0.3 + s / 3.0, 1.0 + s]));
            y.push(-1);
        }
        (x, y)
    }

    #[test]
    fn vote_examples() {
        let one = SoftVoteConfig::new(vec![1.0]).unwrap();
        assert_eq!(soft_vote(&[0.37], &one).unwrap(), 0.37);
        let half = SoftVoteConfig::uniform(2).unwrap();
        assert!((soft_vote(&[0.8, 0.6], &half).unwrap() - 0.7).abs() < 1e-12);
        let vertex = SoftVoteConfig::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(soft_vote(&[0.9, 0.1], &vertex).unwrap(), 0.9);
    }

    #[test]
    fn vote_errors() {
        assert!(matches!(SoftVoteConfig::new(vec![0.6, 0.6]), Err(EnsembleError::WeightSimplexViolation(_))));
        assert!(matches!(SoftVoteConfig::new(vec![1.5, -0.5]), Err(EnsembleError::WeightSimplexViolation(_))));
        let half = SoftVoteConfig::uniform(2).unwrap();
        assert!(matches!(soft_vote(&[0.5], &half), Err(EnsembleError::ArityMismatch { .. })));
    }

    #[test]
    fn labels_and_tie_rule() {
        assert_eq!(ensemble_label(0.7), 1);
        assert_eq!(ensemble_label(0.3), -1);
        assert_eq!(ensemble_label(0.5), -1);
    }

    #[test]
    fn stacking_prediction_examples() {
        let mut s = StackModel { beta0: 0.0, beta: vec![0.0, 0.0], k: 2, folds: 5, decision_tau: 0.5 };
        assert_eq!(predict_stacking(&s, &[0.2, 0.9]).unwrap(), (0.5, 1));
        s.beta0 = 10.0;
        let (p, label) = predict_stacking(&s, &[0.0, 0.0]).unwrap();
        assert!(p > 0.9999 && label == 1);
        assert!(matches!(predict_stacking(&s, &[0.1]), Err(EnsembleError::ArityMismatch { .. })));
    }

    #[test]
    fn out_of_fold_rows_partition_the_training_set() {
        let (x, y) = blobs(20);
        for folds in [2, 5] {
            let fit = fit_stacking(&[BaseSpec::LogReg { c: 1.0 }], &x, &y, 2, folds, 0.5, &TrainConfig::default(), Exec::Sequential).unwrap();
            assert_eq!(fit.oof.len(), 40);
            let mut all: Vec<usize> = fit.fold_members.concat();
            all.sort_unstable();
            assert_eq!(all, (0..40).collect::<Vec<_>>());
        }
    }

    #[test]
    fn uninformative_bases_give_prior_intercept() {
        let z = vec![vec![0.5]; 10];
        let y = [1, 1, 1, 1, 1, 1, -1, -1, -1, -1];
        let (beta0, beta) = fit_meta(&z, &y, &TrainConfig::default()).unwrap();
        assert!(beta[0].abs() < 1e-9);
        let p = sigmoid(beta0 + 0.5 * beta[0]);
        assert!((p - 0.6).abs() < 1e-6);
    }

    #[test]
    fn single_base_stack_preserves_ranking() {
        let (x, y) = blobs(25);
        let cfg = TrainConfig::default();
        let fit = fit_stacking(&[BaseSpec::LogReg { c: 1.0 }], &x, &y, 2, 5, 0.5, &cfg, Exec::Parallel).unwrap();
        assert!(fit.model.beta[0] > 0.0);
        let ens = Ensemble::stack(fit).unwrap();
        let probes: Vec<SparseVector> = (0..30).map(|i| SparseVector::from_dense(&[i as f64 * 0.07, 1.0 - i as f64 * 0.03])).collect();
        let base: Vec<f64> = probes.iter().map(|p| ens.bases[0].proba(p).unwrap()).collect();
        let stacked: Vec<f64> = probes.iter().map(|p| ens.predict(p).unwrap().0).collect();
        let order = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            idx
        };
        assert_eq!(order(&base), order(&stacked));
    }

    #[test]
    fn stacking_is_deterministic_across_exec_modes() {
        let (x, y) = blobs(15);
        let specs = [BaseSpec::LogReg { c: 1.0 }, BaseSpec::Svm { c: 1.0 }];
        let cfg = TrainConfig::default().with_seed(3);
        let a = fit_stacking(&specs, &x, &y, 2, 3, 0.5, &cfg, Exec::Sequential).unwrap();
        let b = fit_stacking(&specs, &x, &y, 2, 3, 0.5, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.oof, b.oof);
    }

    #[test]
    fn stacking_guards() {
        let (x, y) = blobs(3);
        let specs = [BaseSpec::LogReg { c: 1.0 }];
        let cfg = TrainConfig::default();
        assert!(matches!(fit_stacking(&specs, &x, &y, 2, 5, 0.5, &cfg, Exec::Sequential), Err(EnsembleError::TooFewSamples { .. })));
        assert!(matches!(fit_stacking(&specs, &x, &[1; 6], 2, 2, 0.5, &cfg, Exec::Sequential), Err(EnsembleError::SingleClass)));
        assert!(matches!(fit_stacking(&specs, &x, &y, 2, 1, 0.5, &cfg, Exec::Sequential), Err(EnsembleError::InvalidFolds(1))));
    }

    #[test]
    fn serialized_ensemble_refuses_foreign_bases() {
        let (x, y) = blobs(20);
        let cfg = TrainConfig::default();
        let lr = train_base(BaseSpec::LogReg { c: 1.0 }, &x, &y, 2, &cfg).unwrap();
        let svm = train_base(BaseSpec::Svm { c: 1.0 }, &x, &y, 2, &cfg).unwrap();
        let ens = Ensemble::vote(vec![lr.clone(), svm.clone()], SoftVoteConfig::uniform(2).unwrap()).unwrap();
        let file = EnsembleFile::new(ens, "tfidf", "h".into());
        let back = EnsembleFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        let other = train_base(BaseSpec::LogReg { c: 3.0 }, &x, &y, 2, &cfg).unwrap();
        let probe = SparseVector::from_dense(&[1.0, 0.2]);
        assert!(back.ensemble.predict_with(&[lr, svm], &probe).is_ok());
        let err = back.ensemble.predict_with(&[other, back.ensemble.bases[1].clone()], &probe).unwrap_err();
        assert!(matches!(err, EnsembleError::BaseModelMismatch { index: 0, .. }));

        let mut tampered = file.clone();
        tampered.ensemble.bases.swap(0, 1);
        assert!(matches!(EnsembleFile::from_json(&tampered.to_json()), Err(EnsembleError::BaseModelMismatch { .. })));
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("nonzero", |raw| {
            let s: f64 = raw.iter().sum();
            (s > 1e-6).then(|| raw.iter().map(|v| v / s).collect())
        })
    }

    proptest! {
        #[test]
        fn vote_is_bounded_and_permutation_equivariant(
            (p, w) in (1usize..6).prop_flat_map(|k| (prop::collection::vec(0.0f64..=1.0, k), simplex(k))),
            rot in 0usize..6,
        ) {
            let Ok(cfg) = SoftVoteConfig::new(w.clone()) else { return Ok(()); };
            let v = soft_vote(&p, &cfg).unwrap();
            let lo = p.iter().copied().fold(1.0, f64::min);
            let hi = p.iter().copied().fold(0.0, f64::max);
            prop_assert!(lo <= v && v <= hi);
            let r = rot % p.len();
            let (mut p2, mut w2) = (p.clone(), w.clone());
            p2.rotate_left(r);
            w2.rotate_left(r);
            let v2 = soft_vote(&p2, &SoftVoteConfig::new(w2).unwrap()).unwrap();
            prop_assert!((v - v2).abs() < 1e-12);
        }

        #[test]
        fn uniform_vote_of_equal_posteriors_is_exact(p in 0.0f64..=1.0, k in 1usize..8) {
            let cfg = SoftVoteConfig::uniform(k).unwrap();
            prop_assert_eq!(soft_vote(&vec![p; k], &cfg).unwrap(), p);
        }

        #[test]
        fn stacking_is_monotone_in_positive_coefficients(
            beta in prop::collection::vec(0.01f64..5.0, 1..4),
            beta0 in -3.0f64..3.0,
            z in prop::collection::vec(0.0f64..1.0, 4),
            bump in 0.0f64..0.5,
        ) {
            let k = beta.len();
            let s = StackModel { beta0, beta, k, folds: 2, decision_tau: 0.5 };
            let base = predict_stacking(&s, &z[..k]).unwrap().0;
            let mut up = z[..k].to_vec();
            up[0] += bump;
            prop_assert!(predict_stacking(&s, &up).unwrap().0 >= base);
        }
    }
}
