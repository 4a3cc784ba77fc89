use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_binary, check_dim, validate_c, LinearKind, LinearModel, ModelError};
use crate::features::SparseVector;

/// Primal hinge objective `½‖w‖² + C Σ max(0, 1 - y (w·x + b))`.
///
/// The bias enters the Pegasos updates as an extra constant feature, so
/// `b²` is included in the regularizer here as well.
pub fn svm_objective(x: &[SparseVector], y: &[i8], w: &[f64], b: f64, c: f64) -> f64 {
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    reg + c * hinge_total(x, y, w, b)
}

pub fn hinge_total(x: &[SparseVector], y: &[i8], w: &[f64], b: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| (1.0 - f64::from(yi) * (row.dot(w) + b)).max(0.0))
        .sum()
}

/// Pegasos stochastic subgradient descent with `λ = 1 / (C n)` and step
/// `η_t = 1 / (λ t)`. Each epoch visits every sample once in a seeded
/// shuffled order; iterates are projected onto the ball of radius `1/√λ`.
pub fn train_svm(
    x: &[SparseVector],
    y: &[i8],
    dim: usize,
    c: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel, ModelError> {
    validate_c(c)?;
    check_binary(x.len(), y)?;
    for row in x {
        check_dim(dim, row)?;
    }
    let n = x.len();
    let lambda = 1.0 / (c * n as f64);
    let radius2 = 1.0 / lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();

    // w = scale · v, with the bias as coordinate `dim`.
    let mut v = vec![0.0; dim + 1];
    let mut scale = 1.0;
    let mut sq_norm = 0.0; // ‖v‖² tracked incrementally
    let mut t: u64 = 0;
    for _ in 0..epochs.max(1) {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = &x[i];
            let yi = f64::from(y[i]);
            let margin = scale * (row.dot(&v[..dim]) + v[dim]);
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|e| *e = 0.0);
                scale = 1.0;
                sq_norm = 0.0;
            } else {
                scale *= shrink;
            }
            if yi * margin < 1.0 {
                let step = eta * yi / scale;
                for (j, val) in row.iter() {
                    sq_norm += 2.0 * v[j] * step * val + step * step * val * val;
                    v[j] += step * val;
                }
                sq_norm += 2.0 * v[dim] * step + step * step;
                v[dim] += step;
            }
            let norm2 = scale * scale * sq_norm;
            if norm2 > radius2 {
                scale *= (radius2 / norm2).sqrt();
            }
            if scale < 1e-100 {
                v.iter_mut().for_each(|e| *e *= scale);
                sq_norm = v.iter().map(|e| e * e).sum();
                scale = 1.0;
            }
        }
    }
    let full: Vec<f64> = v.iter().map(|e| e * scale).collect();
    let (w, b) = (full[..dim].to_vec(), full[dim]);
    let objective = svm_objective(x, y, &w, b, c);
    Ok(LinearModel {
        w,
        b,
        kind: LinearKind::Svm,
        c,
        objective,
    })
}
