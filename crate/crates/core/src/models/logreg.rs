use super::{check_binary, check_dim, validate_c, LinearKind, LinearModel, ModelError};
use crate::features::SparseVector;
use crate::weaklabel::sigmoid;

/// `ln(1 + exp(-z))` without overflow.
pub(crate) fn log1p_exp_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Regularized logistic loss
/// `J(w, b) = (l2 ? ½‖w‖² : 0) + c · Σ ln(1 + exp(-y (w·x + b)))`.
/// The bias is never regularized.
#[derive(Debug, Clone, Copy)]
pub struct LogisticObjective<'a> {
    pub x: &'a [SparseVector],
    pub y: &'a [i8],
    pub c: f64,
    pub l2: bool,
}

impl LogisticObjective<'_> {
    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        self.x.iter().map(|row| row.dot(w) + b).collect()
    }

    pub fn value(&self, w: &[f64], b: f64) -> f64 {
        let loss: f64 = self
            .margins(w, b)
            .iter()
            .zip(self.y)
            .map(|(m, &yi)| log1p_exp_neg(f64::from(yi) * m))
            .sum();
        let reg = if self.l2 { 0.5 * w.iter().map(|v| v * v).sum::<f64>() } else { 0.0 };
        reg + self.c * loss
    }

    /// Returns `(value, grad_w, grad_b)`.
    pub fn value_and_gradient(&self, w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
        let mut gw = if self.l2 { w.to_vec() } else { vec![0.0; w.len()] };
        let mut gb = 0.0;
        let mut loss = 0.0;
        for (row, &yi) in self.x.iter().zip(self.y) {
            let yf = f64::from(yi);
            let z = yf * (row.dot(w) + b);
            loss += log1p_exp_neg(z);
            // d/dm ln(1 + exp(-y m)) = -y σ(-y m)
            let coef = -self.c * yf * sigmoid(-z);
            for (i, v) in row.iter() {
                gw[i] += coef * v;
            }
            gb += coef;
        }
        let reg = if self.l2 { 0.5 * w.iter().map(|v| v * v).sum::<f64>() } else { 0.0 };
        (reg + self.c * loss, gw, gb)
    }
}

/// Stopping controls for gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome {
    pub w: Vec<f64>,
    pub b: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-20;

/// Full-batch gradient descent with Armijo backtracking. Trial steps use the
/// Barzilai-Borwein estimate from the previous iteration; every accepted step
/// decreases the objective, so the result never exceeds the starting value.
/// Stops once `‖∇J‖∞ < tol` or after `max_iters` iterations.
pub fn minimize(obj: &LogisticObjective<'_>, dim: usize, cfg: GdConfig) -> Result<GdOutcome, ModelError> {
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let (mut f, mut gw, mut gb) = obj.value_and_gradient(&w, b);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, f64, Vec<f64>, f64)> = None;
    for iter in 0..cfg.max_iters {
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if !gmax.is_finite() || !f.is_finite() {
            return Err(ModelError::NonFinite);
        }
        if gmax < cfg.tol {
            return Ok(GdOutcome { w, b, objective: f, iterations: iter, converged: true });
        }
        if let Some((pw, pb, pgw, pgb)) = prev.take() {
            // BB1 step: s·s / s·r with s = θ - θ_prev, r = g - g_prev
            let mut ss = (b - pb) * (b - pb);
            let mut sr = (b - pb) * (gb - pgb);
            for i in 0..dim {
                let s = w[i] - pw[i];
                ss += s * s;
                sr += s * (gw[i] - pgw[i]);
            }
            if sr > 0.0 && ss > 0.0 {
                step = ss / sr;
            } else {
                step = (step * 2.0).min(1e6);
            }
        }
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        let mut t = step;
        loop {
            let nw: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - t * gi).collect();
            let nb = b - t * gb;
            let nf = obj.value(&nw, nb);
            if nf.is_finite() && nf <= f - ARMIJO * t * gnorm2 {
                let (vf, vgw, vgb) = obj.value_and_gradient(&nw, nb);
                prev = Some((std::mem::replace(&mut w, nw), b, std::mem::replace(&mut gw, vgw), gb));
                b = nb;
                gb = vgb;
                f = vf;
                step = t;
                break;
            }
            t *= SHRINK;
            if t < MIN_STEP {
                // No further decrease is representable; treat as converged.
                return Ok(GdOutcome { w, b, objective: f, iterations: iter, converged: true });
            }
        }
    }
    Ok(GdOutcome { w, b, objective: f, iterations: cfg.max_iters, converged: false })
}

/// Fits L2-regularized logistic regression.
pub fn train_logreg(x: &[SparseVector], y: &[i8], dim: usize, c: f64, cfg: GdConfig) -> Result<LinearModel, ModelError> {
    validate_c(c)?;
    check_binary(x.len(), y)?;
    for row in x {
        check_dim(dim, row)?;
    }
    let obj = LogisticObjective { x, y, c, l2: true };
    let out = minimize(&obj, dim, cfg)?;
    Ok(LinearModel {
        w: out.w,
        b: out.b,
        kind: LinearKind::LogReg,
        c,
        objective: out.objective,
    })
}

/// `p = σ(w·x + b)`.
pub fn predict_logreg(model: &LinearModel, x: &SparseVector) -> Result<f64, ModelError> {
    Ok(sigmoid(model.decision(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn pts(xs: &[(f64, f64)]) -> Vec<SparseVector> {
        xs.iter().map(|&(a, b)| SparseVector::from_dense(&[a, b])).collect()
    }

    #[test]
    fn separable_four_points_fit_perfectly() {
        let x = pts(&[(2.0, 1.0), (1.0, 2.0), (-1.0, -2.0), (-2.0, -1.0)]);
        let y = [1, 1, -1, -1];
        let m = train_logreg(&x, &y, 2, 1.0, GdConfig::default()).unwrap();
        let preds: Vec<i8> = x.iter().map(|r| if predict_logreg(&m, r).unwrap() > 0.5 { 1 } else { -1 }).collect();
        assert_eq!(preds, y);
    }

    #[test]
    fn objective_never_exceeds_origin() {
        let x = pts(&[(1.0, 0.0), (0.5, 0.5), (0.0, 1.0), (1.0, 1.0), (0.2, 0.1)]);
        let y = [1, -1, 1, -1, 1];
        let m = train_logreg(&x, &y, 2, 3.0, GdConfig::default()).unwrap();
        let obj = LogisticObjective { x: &x, y: &y, c: 3.0, l2: true };
        assert!(m.objective <= obj.value(&[0.0, 0.0], 0.0));
        assert!((obj.value(&m.w, m.b) - m.objective).abs() < 1e-12);
    }

    #[test]
    fn flipped_labels_negate_the_solution() {
        let x = pts(&[(1.0, 0.3), (0.4, -0.2), (-0.7, 0.9), (0.1, 0.1), (-1.0, -0.5)]);
        let y = [1, 1, -1, -1, 1];
        let flipped: Vec<i8> = y.iter().map(|v| -v).collect();
        let a = train_logreg(&x, &y, 2, 0.5, GdConfig::default()).unwrap();
        let b = train_logreg(&x, &flipped, 2, 0.5, GdConfig::default()).unwrap();
        for (u, v) in a.w.iter().zip(&b.w) {
            assert!((u + v).abs() < 1e-9);
        }
        assert!((a.b + b.b).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<SparseVector> = (0..12)
            .map(|_| SparseVector::from_dense(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0)]))
            .collect();
        let y: Vec<i8> = (0..12).map(|i| if i % 3 == 0 { -1 } else { 1 }).collect();
        let obj = LogisticObjective { x: &x, y: &y, c: 2.0, l2: true };
        let h = 1e-5;
        for _ in 0..10 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let (_, gw, gb) = obj.value_and_gradient(&w, b);
            for k in 0..=3 {
                let eval = |d: f64| {
                    let mut w2 = w.clone();
                    let mut b2 = b;
                    if k < 3 { w2[k] += d } else { b2 += d }
                    obj.value(&w2, b2)
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = if k < 3 { gw[k] } else { gb };
                assert!((an - fd).abs() / an.abs().max(1e-8) <= 1e-5, "k={k} an={an} fd={fd}");
            }
        }
    }

    #[test]
    fn predict_examples() {
        let zero = LinearModel { w: vec![0.0], b: 0.0, kind: LinearKind::LogReg, c: 1.0, objective: 0.0 };
        let x = SparseVector::from_dense(&[1.0]);
        assert_eq!(predict_logreg(&zero, &x).unwrap(), 0.5);
        let ln3 = LinearModel { b: 3.0f64.ln(), ..zero.clone() };
        assert!((predict_logreg(&ln3, &x).unwrap() - 0.75).abs() < 1e-15);
        let mut last = 0.0;
        for b in [0.0, 1.0, 5.0, 20.0, 40.0] {
            let p = predict_logreg(&LinearModel { b, ..zero.clone() }, &x).unwrap();
            assert!(p >= last);
            last = p;
        }
        assert!((last - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = pts(&[(1.0, 0.0), (0.0, 1.0)]);
        assert!(matches!(train_logreg(&x, &[1, 1], 2, 1.0, GdConfig::default()), Err(ModelError::SingleClass)));
        assert!(matches!(train_logreg(&x, &[1, -1], 2, 5.0, GdConfig::default()), Err(ModelError::InvalidHyperparameter { .. })));
    }

    #[test]
    fn log1p_exp_neg_is_stable() {
        assert!((log1p_exp_neg(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log1p_exp_neg(-800.0) - 800.0).abs() < 1e-9);
        assert!(log1p_exp_neg(800.0) >= 0.0);
    }
}
