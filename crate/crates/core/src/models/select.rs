use serde::{Deserialize, Serialize};

use super::{train_base, BaseSpec, ModelError, ModelKind, ProbModel, TrainConfig};
use crate::ensemble::ensemble_label;
use crate::eval::{compute_metrics, label_holdout};
use crate::features::SparseVector;

/// Hyperparameter grids searched by [`select_and_train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub alphas: Vec<f64>,
    pub cs: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            alphas: vec![0.1, 0.5, 1.0],
            cs: vec![0.1, 0.5, 1.0, 2.0, 3.0],
        }
    }
}

impl HyperGrid {
    pub fn candidates(&self, kind: ModelKind) -> Vec<BaseSpec> {
        match kind {
            ModelKind::Mnb => self.alphas.iter().map(|&alpha| BaseSpec::Mnb { alpha }).collect(),
            ModelKind::LogReg => self.cs.iter().map(|&c| BaseSpec::LogReg { c }).collect(),
            ModelKind::Svm => self.cs.iter().map(|&c| BaseSpec::Svm { c }).collect(),
            ModelKind::Vote | ModelKind::Stack => Vec::new(),
        }
    }
}

/// Outcome of a grid search: the chosen spec, the model refitted on all the
/// training data, and the validation macro-F1 of every candidate.
#[derive(Debug, Clone)]
pub struct Selection {
    pub spec: BaseSpec,
    pub model: ProbModel,
    pub scores: Vec<(BaseSpec, f64)>,
}

/// Picks the candidate with the best macro-F1 on a label-stratified 20%
/// validation slice (ties go to the earlier grid entry), then refits it on
/// all of `x`.
pub fn select_and_train(
    kind: ModelKind,
    x: &[SparseVector],
    y: &[i8],
    dim: usize,
    grid: &HyperGrid,
    cfg: &TrainConfig,
) -> Result<Selection, ModelError> {
    let candidates = grid.candidates(kind);
    let Some(&first) = candidates.first() else {
        return Err(ModelError::Format(format!("{kind} is not a base model or its grid is empty")));
    };
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best = (first, f64::NEG_INFINITY);
    if candidates.len() > 1 {
        let (fit_idx, val_idx) = label_holdout(y, 0.2, cfg.seed);
        let fx: Vec<SparseVector> = fit_idx.iter().map(|&i| x[i].clone()).collect();
        let fy: Vec<i8> = fit_idx.iter().map(|&i| y[i]).collect();
        let vy: Vec<i8> = val_idx.iter().map(|&i| y[i]).collect();
        for spec in candidates {
            let model = train_base(spec, &fx, &fy, dim, cfg)?;
            let pred = val_idx
                .iter()
                .map(|&i| model.proba(&x[i]).map(ensemble_label))
                .collect::<Result<Vec<i8>, _>>()?;
            let f1 = compute_metrics(&vy, &pred).map(|m| m.macro_f1).unwrap_or(0.0);
            scores.push((spec, f1));
            if f1 > best.1 {
                best = (spec, f1);
            }
        }
    }
    let model = train_base(best.0, x, y, dim, cfg)?;
    Ok(Selection {
        spec: best.0,
        model,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_matches_documented_ranges() {
        let g = HyperGrid::default();
        assert_eq!(g.candidates(ModelKind::Mnb).len(), 3);
        assert_eq!(g.candidates(ModelKind::Svm).len(), 5);
        assert!(g.candidates(ModelKind::Vote).is_empty());
    }

    #[test]
    fn selection_is_deterministic_and_scores_every_candidate() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let jitter = ((i * 37) % 11) as f64 * 0.05;
            let label = if i % 2 == 0 { 1 } else { -1 };
            let v = if label > 0 { [1.0 + jitter, 0.3] } else { [0.3, 1.0 + jitter] };
            x.push(SparseVector::from_dense(&v));
            y.push(label);
        }
        let cfg = TrainConfig::default().with_seed(2);
        let a = select_and_train(ModelKind::LogReg, &x, &y, 2, &HyperGrid::default(), &cfg).unwrap();
        let b = select_and_train(ModelKind::LogReg, &x, &y, 2, &HyperGrid::default(), &cfg).unwrap();
        assert_eq!(a.spec, b.spec);
        assert_eq!(a.scores.len(), 5);
        assert_eq!(a.model, b.model);
    }
}
