//! Weak tone labeling from scorer posteriors.
//!
//! A scorer produces `p_positive` for every kept response; a label is
//! committed only when one side clears the confidence threshold `tau`, and
//! everything else is NEUTRAL (an abstention, not a third scored class).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::hashing::sha256_hex;
use crate::par::{self, Exec};
use crate::preprocess::{CleanDoc, Lemmatizer};

/// Text of the bundled lexicon.
pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.txt");

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("lexicon has no entries (needs at least one positive and one negative weight)")]
    EmptyLexicon,
    #[error("lexicon line {line_no}: {detail}")]
    MalformedLexicon { line_no: usize, detail: String },
    #[error("malformed score record at line {line_no}: {detail}")]
    MalformedRecord { line_no: usize, detail: String },
    #[error("p_positive {p} for {id:?} is outside [0, 1]")]
    OutOfRange { id: String, p: f64 },
    #[error("no score for sample {0:?}")]
    MissingScore(String),
    #[error("duplicate score for sample {0:?}")]
    DuplicateScore(String),
    #[error("document {0:?} did not pass the length filter")]
    FilteredDocument(String),
    #[error("confidence threshold must satisfy 0.5 < tau <= 1, got {0}")]
    InvalidTau(f64),
    #[error("logistic scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("noise scale must be nonnegative and finite, got {0}")]
    InvalidNoise(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl LabelError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyLexicon => "EmptyLexicon",
            Self::MalformedLexicon { .. } => "MalformedLexicon",
            Self::MalformedRecord { .. } => "MalformedRecord",
            Self::OutOfRange { .. } => "OutOfRange",
            Self::MissingScore(_) => "MissingScore",
            Self::DuplicateScore(_) => "DuplicateScore",
            Self::FilteredDocument(_) => "FilteredDocument",
            Self::InvalidTau(_) => "InvalidTau",
            Self::InvalidScale(_) => "InvalidScale",
            Self::InvalidNoise(_) => "InvalidNoise",
            Self::Io { .. } => "IoError",
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Scorer posterior for one sample. `p_negative` is `1 - p_positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneScore {
    pub id: String,
    pub p_positive: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ToneLabel {
    Positive,
    Negative,
    Neutral,
}

impl ToneLabel {
    /// `+1` / `-1` for committed labels, `None` for abstentions.
    pub fn sign(self) -> Option<i8> {
        match self {
            ToneLabel::Positive => Some(1),
            ToneLabel::Negative => Some(-1),
            ToneLabel::Neutral => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ToneLabel::Positive => "POSITIVE",
            ToneLabel::Negative => "NEGATIVE",
            ToneLabel::Neutral => "NEUTRAL",
        }
    }
}

impl fmt::Display for ToneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    #[default]
    Lexicon,
    External,
}

impl FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexicon" => Ok(ScorerKind::Lexicon),
            "external" => Ok(ScorerKind::External),
            other => Err(format!("unknown scorer {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelingConfig {
    pub tau: f64,
    pub scorer: ScorerKind,
}

impl LabelingConfig {
    pub fn new(tau: f64, scorer: ScorerKind) -> Result<Self, LabelError> {
        validate_tau(tau)?;
        Ok(Self { tau, scorer })
    }
}

/// Checks `0.5 < tau <= 1`. Above one half, the two polarity conditions
/// cannot both hold.
pub fn validate_tau(tau: f64) -> Result<f64, LabelError> {
    if tau.is_finite() && tau > 0.5 && tau <= 1.0 {
        Ok(tau)
    } else {
        Err(LabelError::InvalidTau(tau))
    }
}

/// Signed token weights with a logistic scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    weights: HashMap<String, f64>,
    scale: f64,
}

impl SentimentLexicon {
    /// Builds a lexicon from `(token, weight)` pairs. Tokens are lemmatized so
    /// they match cleaned documents; surface forms sharing a lemma must agree
    /// on the weight.
    pub fn from_pairs<I, S>(pairs: I, scale: f64, lemmatizer: &Lemmatizer) -> Result<Self, LabelError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(LabelError::InvalidScale(scale));
        }
        let mut weights = HashMap::new();
        for (i, (tok, w)) in pairs.into_iter().enumerate() {
            let tok = tok.as_ref().to_lowercase();
            if !w.is_finite() {
                return Err(LabelError::MalformedLexicon {
                    line_no: i + 1,
                    detail: format!("non-finite weight for {tok:?}"),
                });
            }
            let lemma = lemmatizer.lemmatize_token(&tok);
            if let Some(prev) = weights.insert(lemma.clone(), w) {
                if prev != w {
                    return Err(LabelError::MalformedLexicon {
                        line_no: i + 1,
                        detail: format!("{tok:?} lemmatizes to {lemma:?}, already weighted {prev}"),
                    });
                }
            }
        }
        let has_pos = weights.values().any(|&w| w > 0.0);
        let has_neg = weights.values().any(|&w| w < 0.0);
        if !(has_pos && has_neg) {
            return Err(LabelError::EmptyLexicon);
        }
        Ok(Self { weights, scale })
    }

    /// Parses `token weight` lines; `#` starts a comment.
    pub fn parse(text: &str, scale: f64, lemmatizer: &Lemmatizer) -> Result<Self, LabelError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let bad = |detail: String| LabelError::MalformedLexicon { line_no: i + 1, detail };
            if cols.len() != 2 {
                return Err(bad(format!("expected `token weight`, found {} columns", cols.len())));
            }
            let w: f64 = cols[1].parse().map_err(|_| bad(format!("bad weight {:?}", cols[1])))?;
            pairs.push((cols[0].to_owned(), w));
        }
        Self::from_pairs(pairs, scale, lemmatizer)
    }

    pub fn load(path: &Path, scale: f64, lemmatizer: &Lemmatizer) -> Result<Self, LabelError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabelError::io(path, e))?;
        Self::parse(&text, scale, lemmatizer)
    }

    /// The bundled lexicon with scale 1.
    pub fn builtin() -> &'static SentimentLexicon {
        static LEX: OnceLock<SentimentLexicon> = OnceLock::new();
        LEX.get_or_init(|| {
            SentimentLexicon::parse(DEFAULT_LEXICON, 1.0, Lemmatizer::builtin()).expect("bundled lexicon is valid")
        })
    }

    pub fn weight(&self, token: &str) -> Option<f64> {
        self.weights.get(token).copied()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The same lexicon with every weight negated.
    pub fn negated(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|(k, v)| (k.clone(), -v)).collect(),
            scale: self.scale,
        }
    }

    /// Sum of matched weights, one term per token occurrence.
    pub fn raw_score(&self, tokens: &[String]) -> f64 {
        tokens.iter().filter_map(|t| self.weights.get(t)).sum()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `p_positive = sigmoid(k * s)` where `s` sums the weights of matched tokens.
pub fn lexicon_score(doc: &CleanDoc, lexicon: &SentimentLexicon) -> Result<ToneScore, LabelError> {
    if lexicon.is_empty() {
        return Err(LabelError::EmptyLexicon);
    }
    if !doc.kept {
        return Err(LabelError::FilteredDocument(doc.id.clone()));
    }
    let s = lexicon.raw_score(&doc.tokens);
    Ok(ToneScore {
        id: doc.id.clone(),
        p_positive: sigmoid(lexicon.scale * s),
    })
}

/// Gaussian perturbation of the lexicon logit, standing in for the
/// disagreement between a lexicon and a learned scorer.
///
/// Each document draws from its own stream keyed by `(seed, id)`, so the
/// perturbation does not depend on corpus order or scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreNoise {
    pub logit_sd: f64,
    pub seed: u64,
}

/// Logit noise used for the bundled synthetic audit: enough disagreement
/// near the decision boundary that a stricter threshold visibly helps, while
/// confident labels stay mostly consistent with the template tone.
pub const CALIBRATED_LOGIT_SD: f64 = 2.0;

impl ScoreNoise {
    pub fn new(logit_sd: f64, seed: u64) -> Result<Self, LabelError> {
        if !(logit_sd.is_finite() && logit_sd >= 0.0) {
            return Err(LabelError::InvalidNoise(logit_sd));
        }
        Ok(Self { logit_sd, seed })
    }

    fn draw(&self, id: &str) -> f64 {
        if self.logit_sd == 0.0 {
            return 0.0;
        }
        let digest = sha256_hex(format!("{}\u{0}{}", self.seed, id).as_bytes());
        let stream = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        Normal::new(0.0, self.logit_sd).expect("validated sd").sample(&mut rng)
    }
}

/// Scores every kept document with the lexicon, optionally perturbing the
/// logit. Filtered documents are skipped. Output follows `docs` order.
pub fn score_docs(
    docs: &[CleanDoc],
    lexicon: &SentimentLexicon,
    noise: Option<ScoreNoise>,
    exec: Exec,
) -> Result<Vec<ToneScore>, LabelError> {
    if lexicon.is_empty() {
        return Err(LabelError::EmptyLexicon);
    }
    let kept: Vec<&CleanDoc> = docs.iter().filter(|d| d.kept).collect();
    Ok(par::map(exec, &kept, |d| {
        let logit = lexicon.scale * lexicon.raw_score(&d.tokens) + noise.map_or(0.0, |n| n.draw(&d.id));
        ToneScore {
            id: d.id.clone(),
            p_positive: sigmoid(logit),
        }
    }))
}

#[derive(Deserialize)]
struct RawScore {
    id: Option<String>,
    p_positive: Option<f64>,
}

/// Parses scores JSONL. With `corpus` given, every corpus id must be scored.
pub fn read_scores<R: BufRead>(reader: R, corpus: Option<&Corpus>) -> Result<BTreeMap<String, ToneScore>, LabelError> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| LabelError::Io {
            path: "<scores>".into(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: String| LabelError::MalformedRecord { line_no, detail };
        let raw: RawScore = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let id = raw.id.ok_or_else(|| bad("missing field `id`".into()))?;
        let p = raw.p_positive.ok_or_else(|| bad("missing field `p_positive`".into()))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(LabelError::OutOfRange { id, p });
        }
        if out.contains_key(&id) {
            return Err(LabelError::DuplicateScore(id));
        }
        out.insert(id.clone(), ToneScore { id, p_positive: p });
    }
    if let Some(corpus) = corpus {
        for id in corpus.ids() {
            if !out.contains_key(id) {
                return Err(LabelError::MissingScore(id.to_owned()));
            }
        }
    }
    Ok(out)
}

/// Loads the scorer-bridge output.
pub fn load_external_scores(path: &Path, corpus: Option<&Corpus>) -> Result<BTreeMap<String, ToneScore>, LabelError> {
    let file = std::fs::File::open(path).map_err(|e| LabelError::io(path, e))?;
    read_scores(BufReader::new(file), corpus).map_err(|e| match e {
        LabelError::Io { source, .. } => LabelError::io(path, source),
        other => other,
    })
}

/// Serializes scores in the wire format read by [`read_scores`].
pub fn scores_to_jsonl<'a>(scores: impl IntoIterator<Item = &'a ToneScore>) -> String {
    let mut out = String::new();
    for s in scores {
        out.push_str(&serde_json::to_string(s).expect("score serializes"));
        out.push('\n');
    }
    out
}

/// POSITIVE if `p >= tau`, NEGATIVE if `1 - p >= tau`, otherwise NEUTRAL.
pub fn assign_label(score: &ToneScore, cfg: &LabelingConfig) -> ToneLabel {
    label_for(score.p_positive, cfg.tau)
}

pub fn label_for(p_positive: f64, tau: f64) -> ToneLabel {
    if p_positive >= tau {
        ToneLabel::Positive
    } else if 1.0 - p_positive >= tau {
        ToneLabel::Negative
    } else {
        ToneLabel::Neutral
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub id: String,
    pub label: ToneLabel,
    pub p_positive: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub tau: f64,
    pub records: Vec<LabeledRecord>,
    pub counts: LabelCounts,
}

impl LabelSet {
    /// Ids with a committed polarity.
    pub fn confident_ids(&self) -> HashSet<&str> {
        self.records
            .iter()
            .filter(|r| r.label != ToneLabel::Neutral)
            .map(|r| r.id.as_str())
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("label serializes"));
            out.push('\n');
        }
        out
    }
}

/// Labels every kept document, in corpus order. `docs` must contain one
/// cleaned document per corpus sample.
pub fn label_corpus(
    corpus: &Corpus,
    docs: &[CleanDoc],
    scores: &BTreeMap<String, ToneScore>,
    cfg: &LabelingConfig,
) -> Result<LabelSet, LabelError> {
    validate_tau(cfg.tau)?;
    let kept: HashMap<&str, &CleanDoc> = docs.iter().filter(|d| d.kept).map(|d| (d.id.as_str(), d)).collect();
    let mut records = Vec::new();
    let mut counts = LabelCounts::default();
    for id in corpus.ids() {
        if !kept.contains_key(id) {
            continue;
        }
        let score = scores.get(id).ok_or_else(|| LabelError::MissingScore(id.to_owned()))?;
        let label = assign_label(score, cfg);
        match label {
            ToneLabel::Positive => counts.positive += 1,
            ToneLabel::Negative => counts.negative += 1,
            ToneLabel::Neutral => counts.neutral += 1,
        }
        records.push(LabeledRecord {
            id: id.to_owned(),
            label,
            p_positive: score.p_positive,
        });
    }
    Ok(LabelSet {
        tau: cfg.tau,
        records,
        counts,
    })
}

/// Collects scores into the map consumed by [`label_corpus`].
pub fn index_scores(scores: Vec<ToneScore>) -> Result<BTreeMap<String, ToneScore>, LabelError> {
    let mut out = BTreeMap::new();
    for s in scores {
        if out.contains_key(&s.id) {
            return Err(LabelError::DuplicateScore(s.id));
        }
        out.insert(s.id.clone(), s);
    }
    Ok(out)
}
