use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Result<Self, EvalError> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(EvalError::InvalidSplit(format!("test fraction {test_fraction} outside (0, 1)")));
        }
        Ok(Self { test_fraction, seed })
    }
}

/// Sorted index partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Strata with a single member; those go to train.
    pub singleton_strata: usize,
}

/// Splits indices so that every stratum sends `floor` or `ceil` of
/// `size × fraction` to test, with the extra units handed out by largest
/// remainder so the global test count is `round(n × fraction)` whenever the
/// strata allow it. Single-member strata stay in train.
pub fn stratified_split<K: Ord + Clone>(keys: &[K], spec: &SplitSpec) -> Result<Split, EvalError> {
    SplitSpec::new(spec.test_fraction, spec.seed)?;
    if keys.is_empty() {
        return Err(EvalError::EmptyInput("nothing to split".into()));
    }
    let mut strata: BTreeMap<&K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        strata.entry(k).or_default().push(i);
    }
    let f = spec.test_fraction;
    let target = (keys.len() as f64 * f).round() as usize;
    let mut take: Vec<usize> = Vec::with_capacity(strata.len());
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    let mut singletons = 0;
    for (s, members) in strata.values().enumerate() {
        if members.len() == 1 {
            singletons += 1;
            take.push(0);
            continue;
        }
        let quota = members.len() as f64 * f;
        let base = quota.floor() as usize;
        take.push(base);
        let frac = quota - base as f64;
        if frac > 0.0 {
            remainders.push((frac, s));
        }
    }
    let assigned: usize = take.iter().sum();
    let extra = target.saturating_sub(assigned);
    // Largest remainder first; ties keep stratum order.
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, s) in remainders.iter().take(extra) {
        take[s] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(keys.len() - target);
    let mut test = Vec::with_capacity(target);
    for (members, &k) in strata.into_values().zip(&take) {
        let mut shuffled = members;
        shuffled.shuffle(&mut rng);
        test.extend_from_slice(&shuffled[..k]);
        train.extend_from_slice(&shuffled[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        test,
        singleton_strata: singletons,
    })
}

/// Label-stratified holdout used for calibration and model selection.
/// Returns `(fit, holdout)` index lists.
pub fn label_holdout(y: &[i8], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    match stratified_split(y, &SplitSpec { test_fraction: fraction, seed }) {
        Ok(s) => (s.train, s.test),
        Err(_) => ((0..y.len()).collect(), Vec::new()),
    }
}

/// Assigns every index to one of `k` folds, dealing each label's shuffled
/// members round-robin so class proportions are preserved. Returns the
/// sorted members of each fold.
pub fn stratified_folds(y: &[i8], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let k = k.max(1);
    let mut by_label: BTreeMap<i8, Vec<usize>> = BTreeMap::new();
    for (i, &label) in y.iter().enumerate() {
        by_label.entry(label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut members in by_label.into_values() {
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}
