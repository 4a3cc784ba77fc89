use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::weaklabel::sigmoid;

/// Sigmoid map over SVM margins: `p(+1 | m) = 1 / (1 + exp(A m + B))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub a: f64,
    pub b: f64,
}

impl CalibrationParams {
    pub fn prob(&self, margin: f64) -> f64 {
        sigmoid(-(self.a * margin + self.b))
    }
}

const MAX_ITERS: usize = 100;
const MIN_STEP: f64 = 1e-10;
const RIDGE: f64 = 1e-12;
const EPS: f64 = 1e-5;

/// Negative log-likelihood of `targets` under the sigmoid `(a, b)`.
pub fn platt_loss(margins: &[(f64, i8)], targets: &[f64], a: f64, b: f64) -> f64 {
    margins
        .iter()
        .zip(targets)
        .map(|(&(m, _), &t)| {
            let f = a * m + b;
            // -[t ln p + (1 - t) ln(1 - p)] with p = σ(-f)
            if f >= 0.0 {
                t * f + (-f).exp().ln_1p()
            } else {
                (t - 1.0) * f + f.exp().ln_1p()
            }
        })
        .sum()
}

/// Smoothed Platt targets: `(N+ + 1)/(N+ + 2)` for positives and
/// `1/(N- + 2)` for negatives.
pub fn platt_targets(margins: &[(f64, i8)]) -> Vec<f64> {
    let n_pos = margins.iter().filter(|(_, y)| *y > 0).count() as f64;
    let n_neg = margins.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    margins.iter().map(|(_, y)| if *y > 0 { hi } else { lo }).collect()
}

/// Fits `(A, B)` by Newton iterations with backtracking on the smoothed
/// log-loss. Constant margins carry no information, and the fit returns the
/// class prior (`A = 0`).
pub fn platt_calibrate(margins: &[(f64, i8)]) -> Result<CalibrationParams, ModelError> {
    let n_pos = margins.iter().filter(|(_, y)| *y > 0).count();
    let n_neg = margins.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ModelError::SingleClass);
    }
    if n_pos < 2 || n_neg < 2 {
        return Err(ModelError::TooFewSamples {
            needed: 2,
            got: n_pos.min(n_neg),
        });
    }
    if margins.iter().any(|(m, _)| !m.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let first = margins[0].0;
    if margins.iter().all(|(m, _)| *m == first) {
        return Ok(CalibrationParams {
            a: 0.0,
            b: (n_neg as f64 / n_pos as f64).ln(),
        });
    }
    let targets = platt_targets(margins);
    let mut a = 0.0;
    let mut b = ((n_neg as f64 + 1.0) / (n_pos as f64 + 1.0)).ln();
    let mut f = platt_loss(margins, &targets, a, b);
    for _ in 0..MAX_ITERS {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (RIDGE, RIDGE, 0.0, 0.0, 0.0);
        for (&(m, _), &t) in margins.iter().zip(&targets) {
            let p = sigmoid(-(a * m + b));
            let q = 1.0 - p;
            let d2 = p * q;
            h11 += m * m * d2;
            h22 += d2;
            h21 += m * d2;
            let d1 = t - p;
            g1 += m * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_loss(margins, &targets, na, nb);
            if nf < f + 1e-4 * step * gd {
                a = na;
                b = nb;
                f = nf;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(CalibrationParams { a, b })
}
