use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// 2×2 confusion counts with `+1` as the reference class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_neg: usize,
    pub false_pos: usize,
    pub true_neg: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_neg + self.false_pos + self.true_neg
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub pos: ClassMetrics,
    pub neg: ClassMetrics,
    pub macro_f1: f64,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

/// `tp`, `fp`, `fn` from the point of view of one class.
fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    ClassMetrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        // harmonic mean of precision and recall, in count form
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
    }
}

/// Binary metrics over labels in `{-1, +1}`. Every 0/0 ratio is taken as 0.
pub fn compute_metrics(y_true: &[i8], y_pred: &[i8]) -> Result<Metrics, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput("no labels to score".into()));
    }
    let mut c = Confusion::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => c.true_pos += 1,
            (1, -1) => c.false_neg += 1,
            (-1, 1) => c.false_pos += 1,
            (-1, -1) => c.true_neg += 1,
            (1 | -1, bad) | (bad, _) => return Err(EvalError::InvalidLabel(bad)),
        }
    }
    let pos = class_metrics(c.true_pos, c.false_pos, c.false_neg);
    let neg = class_metrics(c.true_neg, c.false_neg, c.false_pos);
    Ok(Metrics {
        accuracy: ratio(c.true_pos + c.true_neg, c.total()),
        pos,
        neg,
        macro_f1: (pos.f1 + neg.f1) / 2.0,
        confusion: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor() {
        let y = [1, -1, 1, 1, -1];
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
    }

    #[test]
    fn hand_cases() {
        let m = compute_metrics(&[1, 1, -1, -1], &[1, -1, -1, -1]).unwrap();
        assert!((m.pos.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.neg.f1 - 0.8).abs() < 1e-12);
        assert!((m.macro_f1 - 0.7333).abs() < 1e-4);

        let truth: Vec<i8> = (0..100).map(|i| if i < 90 { 1 } else { -1 }).collect();
        let m = compute_metrics(&truth, &[1; 100]).unwrap();
        assert!((m.accuracy - 0.9).abs() < 1e-12);
        assert!((m.pos.f1 - 0.9474).abs() < 1e-4);
        assert_eq!(m.neg.f1, 0.0);
        assert!((m.macro_f1 - 0.4737).abs() < 1e-4);
    }

    #[test]
    fn errors() {
        assert!(matches!(compute_metrics(&[1], &[1, -1]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(compute_metrics(&[1, 0], &[1, 1]), Err(EvalError::InvalidLabel(0))));
        assert!(matches!(compute_metrics(&[], &[]), Err(EvalError::EmptyInput(_))));
    }
}
