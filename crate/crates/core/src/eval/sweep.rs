use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{compute_metrics, stratified_split, EvalError, Metrics, SplitSpec};
use crate::corpus::Corpus;
use crate::ensemble::{ensemble_label, fit_stacking, predict_stacking, soft_vote, SoftVoteConfig};
use crate::features::{count_transform, fit_vocab_min_df, EncodingKind, Encoder, SparseVector, VectorTable, Vocabulary};
use crate::models::{select_and_train, HyperGrid, ModelKind, ProbModel, TrainConfig};
use crate::par::{self, Exec};
use crate::preprocess::CleanDoc;
use crate::weaklabel::{label_corpus, validate_tau, LabelCounts, LabelingConfig, ScorerKind, ToneScore};

/// Fewest samples per class a threshold must leave for the sweep to train.
const MIN_PER_CLASS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
    pub models: Vec<ModelKind>,
    pub encodings: Vec<EncodingKind>,
    pub seed: u64,
    pub test_fraction: f64,
    pub grid: HyperGrid,
    pub train: TrainConfig,
    pub vote_bases: Vec<ModelKind>,
    /// Uniform over `vote_bases` when absent.
    pub vote_weights: Option<Vec<f64>>,
    pub stack_bases: Vec<ModelKind>,
    pub stack_folds: usize,
    pub stack_tau: f64,
    pub min_df: usize,
    /// Feed naive Bayes raw term counts instead of TF-IDF weights.
    pub mnb_counts: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            taus: vec![0.60, 0.85],
            models: ModelKind::ALL.to_vec(),
            encodings: vec![EncodingKind::Tfidf],
            seed: 0,
            test_fraction: 0.2,
            grid: HyperGrid::default(),
            train: TrainConfig::default(),
            vote_bases: vec![ModelKind::LogReg, ModelKind::Svm],
            vote_weights: None,
            stack_bases: vec![ModelKind::LogReg, ModelKind::Svm],
            stack_folds: 5,
            stack_tau: 0.5,
            min_df: 1,
            mnb_counts: false,
            exec: Exec::default(),
        }
    }
}

/// One `(τ, model, encoding)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub model: ModelKind,
    pub encoding: EncodingKind,
    /// Selected hyperparameters, e.g. `logreg(C=1)`.
    pub hyper: String,
    pub metrics: Metrics,
    pub n_labeled: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_discarded_neutral: usize,
    pub per_topic: BTreeMap<String, Metrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub tau: f64,
    pub counts: LabelCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Ordered by τ, then encoding, then model, as configured.
    pub rows: Vec<SweepRow>,
    pub labels: Vec<LabelSummary>,
}

impl SweepResult {
    pub fn row(&self, tau: f64, model: ModelKind, encoding: EncodingKind) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.tau == tau && r.model == model && r.encoding == encoding)
    }
}

/// Labeled, split data for one threshold.
struct Prepared<'a> {
    tau: f64,
    counts: LabelCounts,
    train: Vec<(&'a CleanDoc, i8)>,
    test: Vec<(&'a CleanDoc, i8, &'a str)>,
}

/// Features for one cell. Naive Bayes may read raw counts instead.
struct CellData {
    encoder: Encoder,
    x_train: Vec<SparseVector>,
    x_test: Vec<SparseVector>,
    mnb_train: Option<Vec<SparseVector>>,
    mnb_test: Option<Vec<SparseVector>>,
}

impl CellData {
    fn train_for(&self, kind: ModelKind) -> &[SparseVector] {
        match (&self.mnb_train, kind) {
            (Some(x), ModelKind::Mnb) => x,
            _ => &self.x_train,
        }
    }

    fn test_for(&self, kind: ModelKind) -> &[SparseVector] {
        match (&self.mnb_test, kind) {
            (Some(x), ModelKind::Mnb) => x,
            _ => &self.x_test,
        }
    }
}

/// For every τ: relabel, drop NEUTRAL, split 80/20 by (label, topic), then
/// train and evaluate each model on each encoding. Cells run through
/// [`par`] and are reassembled in configuration order.
pub fn threshold_sweep(
    corpus: &Corpus,
    docs: &[CleanDoc],
    scores: &BTreeMap<String, ToneScore>,
    vectors: Option<&Arc<VectorTable>>,
    cfg: &SweepConfig,
) -> Result<SweepResult, EvalError> {
    if cfg.taus.is_empty() {
        return Err(EvalError::EmptyInput("no thresholds".into()));
    }
    if cfg.models.is_empty() || cfg.encodings.is_empty() {
        return Err(EvalError::EmptyInput("no models or encodings".into()));
    }
    for &tau in &cfg.taus {
        validate_tau(tau).map_err(|_| EvalError::InvalidTau(tau))?;
    }
    if cfg.encodings.contains(&EncodingKind::Dense) && vectors.is_none() {
        return Err(EvalError::MissingVectors);
    }
    let split_spec = SplitSpec::new(cfg.test_fraction, cfg.seed)?;
    if cfg.models.contains(&ModelKind::Vote) {
        vote_config(cfg)?;
    }

    let doc_by_id: HashMap<&str, &CleanDoc> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let topic_by_id: HashMap<&str, &str> = corpus.samples.iter().map(|s| (s.id.as_str(), s.topic.as_str())).collect();

    let mut prepared = Vec::with_capacity(cfg.taus.len());
    for &tau in &cfg.taus {
        let set = label_corpus(corpus, docs, scores, &LabelingConfig::new(tau, ScorerKind::Lexicon)?)?;
        if set.counts.positive < MIN_PER_CLASS || set.counts.negative < MIN_PER_CLASS {
            return Err(EvalError::InsufficientLabeled {
                tau,
                positive: set.counts.positive,
                negative: set.counts.negative,
            });
        }
        let confident: Vec<(&CleanDoc, i8, &str)> = set
            .records
            .iter()
            .filter_map(|r| {
                let y = r.label.sign()?;
                let doc = doc_by_id[r.id.as_str()];
                Some((doc, y, topic_by_id[r.id.as_str()]))
            })
            .collect();
        let keys: Vec<(i8, &str)> = confident.iter().map(|(_, y, t)| (*y, *t)).collect();
        let split = stratified_split(&keys, &split_spec)?;
        prepared.push(Prepared {
            tau,
            counts: set.counts,
            train: split.train.iter().map(|&i| (confident[i].0, confident[i].1)).collect(),
            test: split.test.iter().map(|&i| confident[i]).collect(),
        });
    }

    let cells: Vec<(usize, EncodingKind)> = (0..prepared.len())
        .flat_map(|t| cfg.encodings.iter().map(move |&e| (t, e)))
        .collect();
    let per_cell = par::try_map(cfg.exec, &cells, |&(t, enc)| run_cell(&prepared[t], enc, vectors, cfg))?;

    Ok(SweepResult {
        rows: per_cell.into_iter().flatten().collect(),
        labels: prepared
            .iter()
            .map(|p| LabelSummary {
                tau: p.tau,
                counts: p.counts,
            })
            .collect(),
    })
}

fn vote_config(cfg: &SweepConfig) -> Result<SoftVoteConfig, EvalError> {
    Ok(match &cfg.vote_weights {
        Some(w) if w.len() != cfg.vote_bases.len() => {
            return Err(crate::ensemble::EnsembleError::ArityMismatch {
                expected: cfg.vote_bases.len(),
                got: w.len(),
            }
            .into())
        }
        Some(w) => SoftVoteConfig::new(w.clone())?,
        None => SoftVoteConfig::uniform(cfg.vote_bases.len())?,
    })
}

fn build_features(p: &Prepared<'_>, enc: EncodingKind, vectors: Option<&Arc<VectorTable>>, cfg: &SweepConfig) -> Result<CellData, EvalError> {
    let train_docs: Vec<&CleanDoc> = p.train.iter().map(|(d, _)| *d).collect();
    let test_docs: Vec<&CleanDoc> = p.test.iter().map(|(d, _, _)| *d).collect();
    let (encoder, vocab): (Encoder, Option<Vocabulary>) = match enc {
        EncodingKind::Tfidf => {
            let owned: Vec<CleanDoc> = train_docs.iter().map(|d| (*d).clone()).collect();
            let vocab = fit_vocab_min_df(&owned, cfg.min_df)?;
            (Encoder::Tfidf(vocab.clone()), Some(vocab))
        }
        EncodingKind::Dense => (Encoder::Dense(Arc::clone(vectors.ok_or(EvalError::MissingVectors)?)), None),
    };
    let x_train = encoder.encode_all(&train_docs, cfg.exec);
    let x_test = encoder.encode_all(&test_docs, cfg.exec);
    let (mnb_train, mnb_test) = match (&vocab, cfg.mnb_counts) {
        (Some(v), true) => (
            Some(par::map(cfg.exec, &train_docs, |d| count_transform(d, v))),
            Some(par::map(cfg.exec, &test_docs, |d| count_transform(d, v))),
        ),
        _ => (None, None),
    };
    Ok(CellData {
        encoder,
        x_train,
        x_test,
        mnb_train,
        mnb_test,
    })
}

fn run_cell(p: &Prepared<'_>, enc: EncodingKind, vectors: Option<&Arc<VectorTable>>, cfg: &SweepConfig) -> Result<Vec<SweepRow>, EvalError> {
    let data = build_features(p, enc, vectors, cfg)?;
    let dim = data.encoder.dim();
    let y_train: Vec<i8> = p.train.iter().map(|(_, y)| *y).collect();
    let y_test: Vec<i8> = p.test.iter().map(|(_, y, _)| *y).collect();

    let mut needed: BTreeSet<ModelKind> = cfg.models.iter().copied().filter(|m| m.is_base()).collect();
    if cfg.models.contains(&ModelKind::Vote) {
        needed.extend(cfg.vote_bases.iter().copied());
    }
    if cfg.models.contains(&ModelKind::Stack) {
        needed.extend(cfg.stack_bases.iter().copied());
    }
    let needed: Vec<ModelKind> = needed.into_iter().collect();
    let train_cfg = cfg.train.with_seed(cfg.seed);
    let selected = par::try_map(cfg.exec, &needed, |&kind| {
        select_and_train(kind, data.train_for(kind), &y_train, dim, &cfg.grid, &train_cfg)
    })?;
    let by_kind: BTreeMap<ModelKind, &ProbModel> = needed.iter().copied().zip(selected.iter().map(|s| &s.model)).collect();
    let posteriors = |kind: ModelKind| -> Result<Vec<f64>, EvalError> {
        let m = by_kind[&kind];
        Ok(data.test_for(kind).iter().map(|x| m.proba(x)).collect::<Result<_, _>>()?)
    };

    let mut rows = Vec::with_capacity(cfg.models.len());
    for &model in &cfg.models {
        let (hyper, pred): (String, Vec<i8>) = match model {
            ModelKind::Mnb | ModelKind::LogReg | ModelKind::Svm => {
                let p = posteriors(model)?;
                (by_kind[&model].spec.describe(), p.into_iter().map(ensemble_label).collect())
            }
            ModelKind::Vote => {
                let vote = vote_config(cfg)?;
                let per_base = cfg.vote_bases.iter().map(|&k| posteriors(k)).collect::<Result<Vec<_>, _>>()?;
                let pred = (0..y_test.len())
                    .map(|i| {
                        let z: Vec<f64> = per_base.iter().map(|p| p[i]).collect();
                        soft_vote(&z, &vote).map(ensemble_label)
                    })
                    .collect::<Result<_, _>>()?;
                (describe_combo("vote", &cfg.vote_bases, &by_kind), pred)
            }
            ModelKind::Stack => {
                let specs: Vec<_> = cfg.stack_bases.iter().map(|k| by_kind[k].spec).collect();
                let fit = fit_stacking(&specs, &data.x_train, &y_train, dim, cfg.stack_folds, cfg.stack_tau, &train_cfg, cfg.exec)?;
                let pred = data
                    .x_test
                    .iter()
                    .map(|x| {
                        let z = fit.bases.iter().map(|m| m.proba(x)).collect::<Result<Vec<_>, _>>()?;
                        Ok(predict_stacking(&fit.model, &z)?.1)
                    })
                    .collect::<Result<_, EvalError>>()?;
                (describe_combo("stack", &cfg.stack_bases, &by_kind), pred)
            }
        };
        let metrics = compute_metrics(&y_test, &pred)?;
        let mut topic_idx: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, (_, _, topic)) in p.test.iter().enumerate() {
            topic_idx.entry(topic).or_default().push(i);
        }
        let per_topic = topic_idx
            .into_iter()
            .map(|(topic, idx)| {
                let t: Vec<i8> = idx.iter().map(|&i| y_test[i]).collect();
                let q: Vec<i8> = idx.iter().map(|&i| pred[i]).collect();
                Ok((topic.to_owned(), compute_metrics(&t, &q)?))
            })
            .collect::<Result<_, EvalError>>()?;
        rows.push(SweepRow {
            tau: p.tau,
            model,
            encoding: enc,
            hyper,
            metrics,
            n_labeled: p.train.len() + p.test.len(),
            n_train: p.train.len(),
            n_test: p.test.len(),
            n_discarded_neutral: p.counts.neutral,
            per_topic,
        });
    }
    Ok(rows)
}

fn describe_combo(name: &str, bases: &[ModelKind], by_kind: &BTreeMap<ModelKind, &ProbModel>) -> String {
    let parts: Vec<String> = bases.iter().map(|k| by_kind[k].spec.describe()).collect();
    format!("{name}[{}]", parts.join("+"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, Condition, GenSpec};
    use crate::preprocess::{clean_corpus, LengthBounds, Lemmatizer};
    use crate::weaklabel::{index_scores, score_docs, ScoreNoise, SentimentLexicon};

    fn fixture(n: usize, noise: f64) -> (Corpus, Vec<CleanDoc>, BTreeMap<String, ToneScore>) {
        let corpus = generate_synthetic(&GenSpec::new(n, &[(Condition::Positive, 0.5), (Condition::Negative, 0.5)], 7)).unwrap();
        let docs = clean_corpus(&corpus, Lemmatizer::builtin(), LengthBounds::default(), Exec::Sequential);
        let kept: Vec<CleanDoc> = docs.iter().filter(|d| d.kept).cloned().collect();
        let noise = ScoreNoise::new(noise, 7).unwrap();
        let scores = index_scores(score_docs(&kept, SentimentLexicon::builtin(), Some(noise), Exec::Sequential).unwrap()).unwrap();
        (corpus, docs, scores)
    }

    #[test]
    fn arity_and_monotone_label_sizes() {
        let (corpus, docs, scores) = fixture(300, 1.0);
        let cfg = SweepConfig {
            taus: vec![0.6],
            models: vec![ModelKind::Mnb, ModelKind::LogReg, ModelKind::Vote],
            ..SweepConfig::default()
        };
        let r = threshold_sweep(&corpus, &docs, &scores, None, &cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        let cfg = SweepConfig {
            taus: vec![0.55, 0.7, 0.9],
            models: vec![ModelKind::LogReg],
            ..SweepConfig::default()
        };
        let r = threshold_sweep(&corpus, &docs, &scores, None, &cfg).unwrap();
        let sizes: Vec<usize> = r.rows.iter().map(|row| row.n_labeled).collect();
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{sizes:?}");
    }

    #[test]
    fn exec_modes_agree() {
        let (corpus, docs, scores) = fixture(200, 1.0);
        let mut cfg = SweepConfig {
            taus: vec![0.6, 0.8],
            ..SweepConfig::default()
        };
        cfg.exec = Exec::Sequential;
        let a = threshold_sweep(&corpus, &docs, &scores, None, &cfg).unwrap();
        cfg.exec = Exec::Parallel;
        let b = threshold_sweep(&corpus, &docs, &scores, None, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn guards() {
        let (corpus, docs, scores) = fixture(100, 0.0);
        let cfg = SweepConfig {
            taus: vec![1.0],
            ..SweepConfig::default()
        };
        assert!(matches!(threshold_sweep(&corpus, &docs, &scores, None, &cfg), Err(EvalError::InsufficientLabeled { .. })));
        let cfg = SweepConfig {
            taus: vec![0.4],
            ..SweepConfig::default()
        };
        assert!(matches!(threshold_sweep(&corpus, &docs, &scores, None, &cfg), Err(EvalError::InvalidTau(_))));
        let cfg = SweepConfig {
            encodings: vec![EncodingKind::Dense],
            ..SweepConfig::default()
        };
        assert!(matches!(threshold_sweep(&corpus, &docs, &scores, None, &cfg), Err(EvalError::MissingVectors)));
    }
}
