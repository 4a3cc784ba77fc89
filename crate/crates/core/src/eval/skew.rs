use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::weaklabel::ToneLabel;

/// Sign imbalance among confident labels with a two-sided exact binomial
/// test against rate 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewReport {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_neutral: usize,
    pub skew: f64,
    pub p_value: f64,
    pub tau: f64,
}

pub fn skew_report(labels: &[ToneLabel], tau: f64) -> Result<SkewReport, EvalError> {
    let count = |l: ToneLabel| labels.iter().filter(|&&x| x == l).count();
    let (n_pos, n_neg, n_neutral) = (count(ToneLabel::Positive), count(ToneLabel::Negative), count(ToneLabel::Neutral));
    if n_pos + n_neg == 0 {
        return Err(EvalError::NoConfidentLabels);
    }
    Ok(SkewReport {
        n_pos,
        n_neg,
        n_neutral,
        skew: (n_pos as f64 - n_neg as f64) / (n_pos + n_neg) as f64,
        p_value: binomial_two_sided(n_pos, n_neg),
        tau,
    })
}

const RESCALE: f64 = 1.157_920_892_373_162e77; // 2^256

/// `min(1, 2 · P[X ≥ max(a, b)])` for `X ~ Binomial(a + b, 1/2)`, floored at
/// the smallest positive normal double.
///
/// `C(n, k)` is built as a running product with a separately tracked binary
/// exponent, so nothing overflows and the relative error stays near one ulp
/// per factor; the tail is then summed as ratios to the first term.
pub fn binomial_two_sided(a: usize, b: usize) -> f64 {
    let n = a + b;
    let k = a.max(b);
    if 2 * k <= n + 1 {
        // k sits at the center, so the doubled tail reaches 1
        return 1.0;
    }
    // C(n, k) = prod_{i=1}^{n-k} (k + i) / i
    let mut mant = 1.0f64;
    let mut exp2: i64 = 0;
    for i in 1..=(n - k) {
        mant *= (k + i) as f64 / i as f64;
        if mant > RESCALE {
            mant /= RESCALE;
            exp2 += 256;
        }
    }
    // tail / pmf(k) = sum_{j >= k} C(n, j) / C(n, k)
    let mut ratio_sum = 0.0;
    let mut r = 1.0f64;
    for j in k..=n {
        ratio_sum += r;
        r *= (n - j) as f64 / (j + 1) as f64;
        if r < 1e-18 * ratio_sum {
            break;
        }
    }
    // p = 2 · C(n, k) · ratio_sum · 2^-n
    let mut p = 2.0 * mant * ratio_sum;
    let mut shift = exp2 - n as i64;
    while shift > 0 {
        let step = shift.min(512);
        p *= 2f64.powi(step as i32);
        shift -= step;
    }
    while shift < 0 && p > 0.0 {
        let step = (-shift).min(512);
        p *= 2f64.powi(-(step as i32));
        shift += step;
    }
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(p: usize, n: usize, z: usize) -> Vec<ToneLabel> {
        let mut v = vec![ToneLabel::Positive; p];
        v.extend(std::iter::repeat_n(ToneLabel::Negative, n));
        v.extend(std::iter::repeat_n(ToneLabel::Neutral, z));
        v
    }

    // direct summation of exact binomial coefficients, fine for small n
    fn small_oracle(a: u32, b: u32) -> f64 {
        let n = a + b;
        let k = a.max(b);
        let choose = |n: u32, j: u32| (0..j).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1));
        let tail: u128 = (k..=n).map(|j| choose(n, j)).sum();
        (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0)
    }

    #[test]
    fn symmetric_and_lopsided_cases() {
        let r = skew_report(&labels(50, 50, 7), 0.6).unwrap();
        assert_eq!(r.skew, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(r.n_neutral, 7);
        let r = skew_report(&labels(90, 10, 0), 0.85).unwrap();
        assert!((r.skew - 0.8).abs() < 1e-15);
        assert!(r.p_value < 1e-15 && r.p_value > 0.0);
    }

    #[test]
    fn no_confident_labels() {
        assert!(matches!(skew_report(&labels(0, 0, 4), 0.6), Err(EvalError::NoConfidentLabels)));
    }

    #[test]
    fn small_n_matches_direct_sum() {
        for a in 0..60u32 {
            for b in 0..60u32 {
                if a + b == 0 {
                    continue;
                }
                let got = binomial_two_sided(a as usize, b as usize);
                let want = small_oracle(a, b);
                assert!((got - want).abs() <= 1e-12 * want.max(1e-300).max(1.0), "{a} {b}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn extreme_imbalance_stays_positive() {
        let p = binomial_two_sided(10_000, 0);
        assert_eq!(p, f64::MIN_POSITIVE);
        assert_eq!(binomial_two_sided(1, 0), 1.0);
    }

    proptest! {
        #[test]
        fn antisymmetric(a in 0usize..3000, b in 0usize..3000) {
            prop_assume!(a + b > 0);
            let x = skew_report(&labels(a, b, 0), 0.7).unwrap();
            let y = skew_report(&labels(b, a, 0), 0.7).unwrap();
            prop_assert_eq!(x.skew, -y.skew);
            prop_assert_eq!(x.p_value, y.p_value);
            prop_assert!((-1.0..=1.0).contains(&x.skew));
            prop_assert!(x.p_value > 0.0 && x.p_value <= 1.0);
        }
    }
}
