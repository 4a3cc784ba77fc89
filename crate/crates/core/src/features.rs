//! Sparse TF-IDF and dense mean-pooled document encodings.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::sha256_hex;
use crate::par::{self, Exec};
use crate::preprocess::CleanDoc;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no kept documents to fit a vocabulary on")]
    EmptyCorpus,
    #[error("vector table is empty")]
    EmptyTable,
    #[error("vector table line {line_no}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line_no: usize,
        expected: usize,
        found: usize,
    },
    #[error("vector table line {line_no}: {detail}")]
    MalformedLine { line_no: usize, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl FeatureError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyCorpus => "EmptyCorpus",
            Self::EmptyTable => "EmptyTable",
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::MalformedLine { .. } => "MalformedLine",
            Self::Io { .. } => "IoError",
        }
    }
}

/// Sparse row with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a vector from unsorted `(index, value)` pairs, summing duplicates
    /// and dropping exact zeros.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            assert!((i as usize) < dim, "index {i} out of range for dim {dim}");
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().filter(|(_, v)| *v != 0.0).unzip();
        Self { dim, indices, values }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_pairs(values.len(), values.iter().enumerate().map(|(i, v)| (i as u32, *v)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.iter().map(|(i, v)| w[i] * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&(index as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }
}

/// Term → column map fitted on training documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, df: Vec<usize>, n_docs: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { terms, df, n_docs, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn df(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.df[i])
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf_at(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[index] as f64)).ln() + 1.0
    }

    /// Audit dump: one `term index df` line per term, in index order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            out.push_str(&format!("{t} {i} {}\n", self.df[i]));
        }
        out
    }

    pub fn hash(&self) -> String {
        sha256_hex(format!("tfidf n_docs={}\n{}", self.n_docs, self.dump()).as_bytes())
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }
}

/// Fits a vocabulary over the kept documents with no document-frequency
/// pruning.
pub fn fit_vocab(docs: &[CleanDoc]) -> Result<Vocabulary, FeatureError> {
    fit_vocab_min_df(docs, 1)
}

/// Like [`fit_vocab`] but drops terms seen in fewer than `min_df` documents.
/// Terms are indexed in lexicographic order.
pub fn fit_vocab_min_df(docs: &[CleanDoc], min_df: usize) -> Result<Vocabulary, FeatureError> {
    let kept: Vec<&CleanDoc> = docs.iter().filter(|d| d.kept).collect();
    if kept.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &kept {
        let mut uniq: Vec<&str> = d.tokens.iter().map(String::as_str).collect();
        uniq.sort_unstable();
        uniq.dedup();
        for t in uniq {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let (terms, counts): (Vec<String>, Vec<usize>) = df
        .into_iter()
        .filter(|(_, c)| *c >= min_df.max(1))
        .map(|(t, c)| (t.to_owned(), c))
        .unzip();
    Ok(Vocabulary::from_parts(terms, counts, kept.len()))
}

/// Raw term counts times smoothed idf, then L2-normalized. Out-of-vocabulary
/// tokens are ignored; a document with none in vocabulary maps to zero.
pub fn tfidf_transform(doc: &CleanDoc, vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in &doc.tokens {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let weighted: Vec<(u32, f64)> = counts.into_iter().map(|(i, tf)| (i as u32, tf * vocab.idf_at(i))).collect();
    let norm = weighted.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return SparseVector::zeros(vocab.len());
    }
    let (indices, values) = weighted.into_iter().map(|(i, v)| (i, v / norm)).unzip();
    SparseVector {
        dim: vocab.len(),
        indices,
        values,
    }
}

/// Raw in-vocabulary term counts, unweighted. Naive Bayes can use these in
/// place of TF-IDF weights.
pub fn count_transform(doc: &CleanDoc, vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in &doc.tokens {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    SparseVector::from_pairs(vocab.len(), counts.into_iter().map(|(i, c)| (i as u32, c)))
}

/// Pretrained term vectors of a fixed width.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    hash: String,
}

impl VectorTable {
    pub fn from_entries<I>(entries: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut text = String::new();
        for (term, v) in entries {
            text.push_str(&term);
            for x in &v {
                text.push(' ');
                text.push_str(&format!("{x:?}"));
            }
            text.push('\n');
        }
        Self::parse(&text)
    }

    /// Parses `term v1 ... vd` lines.
    pub fn parse(text: &str) -> Result<Self, FeatureError> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let term = cols.next().expect("nonempty line").to_owned();
            let values = cols
                .map(|c| {
                    c.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| FeatureError::MalformedLine {
                            line_no,
                            detail: format!("bad value {c:?}"),
                        })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if values.is_empty() {
                return Err(FeatureError::MalformedLine {
                    line_no,
                    detail: format!("term {term:?} has no values"),
                });
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(FeatureError::DimensionMismatch {
                        line_no,
                        expected: d,
                        found: values.len(),
                    })
                }
                Some(_) => {}
            }
            if vectors.insert(term.clone(), values).is_some() {
                return Err(FeatureError::MalformedLine {
                    line_no,
                    detail: format!("duplicate term {term:?}"),
                });
            }
        }
        let dim = dim.ok_or(FeatureError::EmptyTable)?;
        Ok(Self {
            dim,
            vectors,
            hash: sha256_hex(text.as_bytes()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }
}

pub fn load_vector_table(path: &Path) -> Result<VectorTable, FeatureError> {
    let file = std::fs::File::open(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.push_str(&line);
        text.push('\n');
    }
    VectorTable::parse(&text)
}

/// Arithmetic mean of the in-table token vectors; zero if none match.
pub fn mean_pool(doc: &CleanDoc, table: &VectorTable) -> Vec<f64> {
    let mut sum = vec![0.0; table.dim()];
    let mut hits = 0usize;
    for t in &doc.tokens {
        if let Some(v) = table.get(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            hits += 1;
        }
    }
    if hits > 0 {
        let n = hits as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sum
}

/// Document encoding selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Tfidf,
    Dense,
}

impl EncodingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncodingKind::Tfidf => "tfidf",
            EncodingKind::Dense => "dense",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tfidf" => Ok(EncodingKind::Tfidf),
            "dense" => Ok(EncodingKind::Dense),
            other => Err(format!("unknown encoding {other:?}")),
        }
    }
}

/// A fitted encoder mapping cleaned documents into a fixed feature space.
#[derive(Debug, Clone)]
pub enum Encoder {
    Tfidf(Vocabulary),
    Dense(Arc<VectorTable>),
}

impl Encoder {
    pub fn kind(&self) -> EncodingKind {
        match self {
            Encoder::Tfidf(_) => EncodingKind::Tfidf,
            Encoder::Dense(_) => EncodingKind::Dense,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Encoder::Tfidf(v) => v.len(),
            Encoder::Dense(t) => t.dim(),
        }
    }

    /// Identifies the feature space; serialized models are bound to it.
    pub fn space_hash(&self) -> String {
        match self {
            Encoder::Tfidf(v) => v.hash(),
            Encoder::Dense(t) => sha256_hex(format!("dense {}", t.hash()).as_bytes()),
        }
    }

    pub fn encode(&self, doc: &CleanDoc) -> SparseVector {
        match self {
            Encoder::Tfidf(v) => tfidf_transform(doc, v),
            Encoder::Dense(t) => SparseVector::from_dense(&mean_pool(doc, t)),
        }
    }

    pub fn encode_all(&self, docs: &[&CleanDoc], exec: Exec) -> Vec<SparseVector> {
        par::map(exec, docs, |d| self.encode(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(tokens: &[&str]) -> CleanDoc {
        CleanDoc {
            id: tokens.join("_"),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            kept: true,
            raw_len: tokens.len(),
        }
    }

    #[test]
    fn fit_vocab_counts_documents() {
        let v = fit_vocab(&[doc(&["a", "b"]), doc(&["b", "c"])]).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!((v.index_of("a"), v.index_of("b"), v.index_of("c")), (Some(0), Some(1), Some(2)));
        assert_eq!((v.df("a"), v.df("b"), v.df("c")), (Some(1), Some(2), Some(1)));
        assert_eq!(v.n_docs(), 2);
        let v = fit_vocab(&[doc(&["a", "a"])]).unwrap();
        assert_eq!(v.df("a"), Some(1));
        assert!(matches!(fit_vocab(&[]), Err(FeatureError::EmptyCorpus)));
    }

    #[test]
    fn fit_vocab_is_deterministic_and_prunes() {
        let docs = [doc(&["z", "y"]), doc(&["y", "x"]), doc(&["x", "w", "y"])];
        let a = fit_vocab(&docs).unwrap();
        let b = fit_vocab(&[docs[2].clone(), docs[0].clone(), docs[1].clone()]).unwrap();
        assert_eq!(a.dump(), b.dump());
        assert_eq!(a.hash(), b.hash());
        let pruned = fit_vocab_min_df(&docs, 2).unwrap();
        assert_eq!(pruned.dump(), "x 0 2\ny 1 3\n");
    }

    #[test]
    fn tfidf_hand_oracle() {
        // idf(good) = ln(3/2) + 1, idf(movie) = ln(3/3) + 1 = 1; tf(good) = 2.
        let d1 = doc(&["good", "good", "movie"]);
        let v = fit_vocab(&[d1.clone(), doc(&["bad", "movie"])]).unwrap();
        let x = tfidf_transform(&d1, &v);
        let g = 2.0 * ((1.5f64).ln() + 1.0);
        let n = (g * g + 1.0).sqrt();
        assert!((x.get(v.index_of("good").unwrap()) - g / n).abs() < 1e-12);
        assert!((x.get(v.index_of("movie").unwrap()) - 1.0 / n).abs() < 1e-12);
        assert!((x.get(v.index_of("good").unwrap()) - 0.9422).abs() < 1e-4);
        assert!((x.get(v.index_of("movie").unwrap()) - 0.3352).abs() < 1e-4);
        assert_eq!(x.get(v.index_of("bad").unwrap()), 0.0);
    }

    #[test]
    fn tfidf_out_of_vocabulary_is_zero() {
        let v = fit_vocab(&[doc(&["a", "b"])]).unwrap();
        let x = tfidf_transform(&doc(&["q", "r"]), &v);
        assert!(x.is_zero());
        assert_eq!(x.dim, 2);
    }

    #[test]
    fn vector_table_parsing() {
        let t = VectorTable::parse("a 1 2 3 4\nb 0 0 0 1\n").unwrap();
        assert_eq!((t.dim(), t.len()), (4, 2));
        let err = VectorTable::parse("a 1 2 3 4\nb 1 2 3\n").unwrap_err();
        assert!(matches!(err, FeatureError::DimensionMismatch { line_no: 2, expected: 4, found: 3 }));
        assert!(matches!(VectorTable::parse(""), Err(FeatureError::EmptyTable)));
        assert!(matches!(VectorTable::parse("a 1 x\n"), Err(FeatureError::MalformedLine { line_no: 1, .. })));
        assert!(matches!(VectorTable::parse("a\n"), Err(FeatureError::MalformedLine { .. })));
        assert!(matches!(VectorTable::parse("a 1\na 2\n"), Err(FeatureError::MalformedLine { line_no: 2, .. })));
    }

    #[test]
    fn mean_pool_examples() {
        let t = VectorTable::parse("w 1 2\nv 3 -2\n").unwrap();
        assert_eq!(mean_pool(&doc(&["x", "y"]), &t), vec![0.0, 0.0]);
        assert_eq!(mean_pool(&doc(&["w"]), &t), vec![1.0, 2.0]);
        assert_eq!(mean_pool(&doc(&["w", "v"]), &t), vec![2.0, 0.0]);
        assert_eq!(mean_pool(&doc(&["w", "w", "v", "zz"]), &t), vec![5.0 / 3.0, 2.0 / 3.0]);
    }

    fn arb_doc() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c"), Just("d"), Just("e"), Just("oov")], 0..12)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #[test]
        fn tfidf_norm_is_one_or_zero(train in proptest::collection::vec(arb_doc(), 1..6), probe in arb_doc()) {
            let docs: Vec<CleanDoc> = train
                .into_iter()
                .map(|t| CleanDoc { id: "t".into(), raw_len: t.len(), tokens: t, kept: true })
                .collect();
            let v = fit_vocab(&docs).unwrap();
            let probe = CleanDoc { id: "p".into(), raw_len: probe.len(), tokens: probe, kept: true };
            let x = tfidf_transform(&probe, &v);
            let any_in = probe.tokens.iter().any(|t| v.index_of(t).is_some());
            if any_in {
                prop_assert!((x.norm() - 1.0).abs() < 1e-9);
            } else {
                prop_assert!(x.is_zero());
            }
            prop_assert!(x.indices.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn idf_scaling_leaves_vector_unchanged(train in proptest::collection::vec(arb_doc(), 1..6), scale in 0.01f64..100.0) {
            let docs: Vec<CleanDoc> = train
                .into_iter()
                .map(|t| CleanDoc { id: "t".into(), raw_len: t.len(), tokens: t, kept: true })
                .collect();
            let v = fit_vocab(&docs).unwrap();
            for d in &docs {
                let x = tfidf_transform(d, &v);
                // Recompute with every idf scaled by `scale`, then normalize.
                let mut counts = BTreeMap::new();
                for t in &d.tokens {
                    if let Some(i) = v.index_of(t) {
                        *counts.entry(i).or_insert(0.0) += 1.0;
                    }
                }
                let w: Vec<(usize, f64)> = counts.into_iter().map(|(i, c)| (i, c * v.idf_at(i) * scale)).collect();
                let n = w.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
                for (i, val) in w {
                    prop_assert!((x.get(i) - val / n).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn mean_pool_permutation_invariant(mut toks in arb_doc(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let t = VectorTable::parse("a 1 0.5\nb -2 3\nc 0.25 0.25\nd 7 -1\n").unwrap();
            let before = mean_pool(&CleanDoc { id: "x".into(), raw_len: toks.len(), tokens: toks.clone(), kept: true }, &t);
            toks.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let after = mean_pool(&CleanDoc { id: "x".into(), raw_len: toks.len(), tokens: toks, kept: true }, &t);
            for (a, b) in before.iter().zip(&after) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
