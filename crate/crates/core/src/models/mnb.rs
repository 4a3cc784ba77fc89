use serde::{Deserialize, Serialize};

use super::{check_binary, check_dim, ModelError, NEG, POS};
use crate::features::SparseVector;

/// Smoothing grid edges for naive Bayes.
pub const ALPHA_RANGE: (f64, f64) = (0.1, 1.0);

/// Multinomial naive Bayes over nonnegative (possibly fractional) counts.
///
/// Class slot 0 is the negative class, slot 1 the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
    pub alpha: f64,
}

impl MnbModel {
    pub fn dim(&self) -> usize {
        self.log_likelihood[0].len()
    }

    /// Unnormalized log posterior per class.
    pub fn joint_log_likelihood(&self, x: &SparseVector) -> [f64; 2] {
        let mut out = self.log_prior;
        for (c, ll) in self.log_likelihood.iter().enumerate() {
            out[c] += x.iter().map(|(i, v)| v * ll[i]).sum::<f64>();
        }
        out
    }
}

pub fn validate_alpha(alpha: f64) -> Result<f64, ModelError> {
    if alpha.is_finite() && (ALPHA_RANGE.0..=ALPHA_RANGE.1).contains(&alpha) {
        Ok(alpha)
    } else {
        Err(ModelError::InvalidHyperparameter {
            name: "alpha",
            value: alpha,
            range: ALPHA_RANGE,
        })
    }
}

/// `log_likelihood(c, t) = ln((count(c, t) + alpha) / (sum_t' count(c, t') + alpha |V|))`,
/// `log_prior(c) = ln(n_c / n)`.
pub fn train_mnb(x: &[SparseVector], y: &[i8], dim: usize, alpha: f64) -> Result<MnbModel, ModelError> {
    validate_alpha(alpha)?;
    let (n_neg, n_pos) = check_binary(x.len(), y)?;
    let mut counts = [vec![0.0; dim], vec![0.0; dim]];
    for (row, &label) in x.iter().zip(y) {
        check_dim(dim, row)?;
        let c = if label > 0 { POS } else { NEG };
        for (i, v) in row.iter() {
            if v < 0.0 || !v.is_finite() {
                return Err(ModelError::NegativeFeature { index: i, value: v });
            }
            counts[c][i] += v;
        }
    }
    let n = (n_neg + n_pos) as f64;
    let log_prior = [(n_neg as f64 / n).ln(), (n_pos as f64 / n).ln()];
    let log_likelihood = counts.map(|cnt| {
        let total: f64 = cnt.iter().sum::<f64>() + alpha * dim as f64;
        cnt.iter().map(|c| ((c + alpha) / total).ln()).collect()
    });
    Ok(MnbModel {
        log_prior,
        log_likelihood,
        alpha,
    })
}

/// Posterior of the positive class, normalized in log space.
pub fn predict_mnb(model: &MnbModel, x: &SparseVector) -> Result<f64, ModelError> {
    check_dim(model.dim(), x)?;
    let [neg, pos] = model.joint_log_likelihood(x);
    let m = neg.max(pos);
    let lse = m + ((neg - m).exp() + (pos - m).exp()).ln();
    Ok((pos - lse).exp().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    // vocab: bad=0, good=1, great=2
    fn toy() -> (Vec<SparseVector>, Vec<i8>) {
        let x = vec![
            SparseVector::from_pairs(3, [(1, 1.0)]),
            SparseVector::from_pairs(3, [(1, 1.0), (2, 1.0)]),
            SparseVector::from_pairs(3, [(0, 1.0)]),
        ];
        (x, vec![1, 1, -1])
    }

    #[test]
    fn toy_posterior_matches_hand_bayes() {
        let (x, y) = toy();
        let m = train_mnb(&x, &y, 3, 1.0).unwrap();
        let p = predict_mnb(&m, &SparseVector::from_pairs(3, [(1, 1.0)])).unwrap();
        // prior 2/3 vs 1/3; P(good|+) = 3/6, P(good|-) = 1/4
        let oracle = (2.0 / 3.0 * 0.5) / (2.0 / 3.0 * 0.5 + 1.0 / 3.0 * 0.25);
        assert!((p - oracle).abs() < 1e-12);
        assert!((p - 0.8).abs() < 1e-9);
    }

    #[test]
    fn likelihoods_and_priors_normalize() {
        let (x, y) = toy();
        let m = train_mnb(&x, &y, 3, 0.3).unwrap();
        for ll in &m.log_likelihood {
            assert!((ll.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!((m.log_prior.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_returns_prior() {
        let (x, y) = toy();
        let m = train_mnb(&x, &y, 3, 1.0).unwrap();
        let p = predict_mnb(&m, &SparseVector::zeros(3)).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_corpus_gives_even_odds_on_neutral_doc() {
        // Classes are token renamings: {a,b} for +1 and {c,d} for -1; probe holds
        // one token from each side.
        let x = vec![
            SparseVector::from_pairs(4, [(0, 2.0), (1, 1.0)]),
            SparseVector::from_pairs(4, [(2, 2.0), (3, 1.0)]),
        ];
        let m = train_mnb(&x, &[1, -1], 4, 0.5).unwrap();
        let p = predict_mnb(&m, &SparseVector::from_pairs(4, [(0, 1.0), (2, 1.0)])).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn doubled_evidence_moves_toward_favored_class() {
        let (x, y) = toy();
        let m = train_mnb(&x, &y, 3, 1.0).unwrap();
        let once = SparseVector::from_pairs(3, [(0, 1.0)]);
        let twice = SparseVector::from_pairs(3, [(0, 2.0)]);
        let prior = predict_mnb(&m, &SparseVector::zeros(3)).unwrap();
        let p1 = predict_mnb(&m, &once).unwrap();
        let p2 = predict_mnb(&m, &twice).unwrap();
        assert!(p1 < prior && p2 < p1);
        // direct recomputation: odds multiply by the likelihood ratio per count
        let lr: f64 = (1.0 / 6.0) / (2.0 / 4.0);
        let odds = |k: i32| (2.0 / 3.0) / (1.0 / 3.0) * lr.powi(k);
        assert!((p2 - odds(2) / (1.0 + odds(2))).abs() < 1e-12);
    }

    #[test]
    fn alpha_grid_edges() {
        let (x, y) = toy();
        assert!(train_mnb(&x, &y, 3, 0.1).is_ok());
        assert!(train_mnb(&x, &y, 3, 1.0).is_ok());
        assert!(matches!(train_mnb(&x, &y, 3, 0.0), Err(ModelError::InvalidHyperparameter { .. })));
        assert!(matches!(train_mnb(&x, &y, 3, 1.5), Err(ModelError::InvalidHyperparameter { .. })));
    }

    #[test]
    fn rejects_negative_features_and_single_class() {
        let x = vec![SparseVector::from_pairs(2, [(0, -1.0)]), SparseVector::from_pairs(2, [(1, 1.0)])];
        assert!(matches!(train_mnb(&x, &[1, -1], 2, 1.0), Err(ModelError::NegativeFeature { .. })));
        let (x, _) = toy();
        assert!(matches!(train_mnb(&x, &[1, 1, 1], 3, 1.0), Err(ModelError::SingleClass)));
        let m = train_mnb(&toy().0, &toy().1, 3, 1.0).unwrap();
        assert!(matches!(predict_mnb(&m, &SparseVector::zeros(5)), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn long_documents_do_not_underflow() {
        let (x, y) = toy();
        let m = train_mnb(&x, &y, 3, 1.0).unwrap();
        let p = predict_mnb(&m, &SparseVector::from_pairs(3, [(0, 150.0), (1, 50.0)])).unwrap();
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }

    proptest::proptest! {
        #[test]
        fn agrees_with_direct_bayes_arithmetic(
            rows in proptest::collection::vec(proptest::collection::vec(0u8..4, 1..=10), 2..=10),
            labels in proptest::collection::vec(proptest::bool::ANY, 10),
            probe in proptest::collection::vec(0u8..4, 10),
            alpha in 0.1f64..=1.0,
        ) {
            let dim = rows[0].len();
            let x: Vec<SparseVector> = rows
                .iter()
                .map(|r| SparseVector::from_dense(&(0..dim).map(|i| f64::from(*r.get(i).unwrap_or(&0))).collect::<Vec<_>>()))
                .collect();
            let mut y: Vec<i8> = labels[..x.len()].iter().map(|&b| if b { 1 } else { -1 }).collect();
            y[0] = 1;
            y[1] = -1;
            let q: Vec<f64> = probe[..dim].iter().map(|&c| f64::from(c)).collect();
            let m = train_mnb(&x, &y, dim, alpha).unwrap();
            let p = predict_mnb(&m, &SparseVector::from_dense(&q)).unwrap();

            // prior × product of smoothed term probabilities, no logs
            let joint = |class: i8| {
                let members: Vec<usize> = (0..x.len()).filter(|&i| y[i] == class).collect();
                let count = |t: usize| members.iter().map(|&i| x[i].get(t)).sum::<f64>();
                let total: f64 = (0..dim).map(count).sum::<f64>() + alpha * dim as f64;
                let prior = members.len() as f64 / x.len() as f64;
                (0..dim).fold(prior, |acc, t| acc * ((count(t) + alpha) / total).powf(q[t]))
            };
            let (pos, neg) = (joint(1), joint(-1));
            proptest::prop_assert!((p - pos / (pos + neg)).abs() <= 1e-9, "{} vs {}", p, pos / (pos + neg));
        }
    }
}
