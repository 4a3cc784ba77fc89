//! Dialogue data model and corpus I/O.

mod generate;
mod templates;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{emit_prompt_pack, generate_synthetic, prompt_pack, GenSpec, PromptRecord, TONE_DIRECTIVE};
pub use templates::TOPICS;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record at line {line_no}: {detail}")]
    MalformedRecord { line_no: usize, detail: String },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MalformedRecord { .. } => "MalformedRecord",
            Self::DuplicateId(_) => "DuplicateId",
            Self::InvalidSpec(_) => "InvalidSpec",
            Self::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Tone condition under which a response was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    #[default]
    Neutral,
    Positive,
    Negative,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Neutral, Condition::Positive, Condition::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Neutral => "neutral",
            Condition::Positive => "positive",
            Condition::Negative => "negative",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neutral" => Ok(Condition::Neutral),
            "positive" => Ok(Condition::Positive),
            "negative" => Ok(Condition::Negative),
            other => Err(format!("unknown condition {other:?}")),
        }
    }
}

/// One user prompt paired with the assistant's response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub topic: String,
    pub prompt_text: String,
    pub response_text: String,
    pub condition: Condition,
    pub source_model: String,
}

/// An ordered collection of samples with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub samples: Vec<Sample>,
    pub meta: BTreeMap<String, String>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and empty ids or responses.
    pub fn new(samples: Vec<Sample>, meta: BTreeMap<String, String>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.id.is_empty() || s.response_text.is_empty() {
                return Err(CorpusError::MalformedRecord {
                    line_no: i + 1,
                    detail: "id and response_text must be nonempty".into(),
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self { samples, meta })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    /// Serializes the samples as JSONL, one object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let file = std::fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CorpusError::io(path, e))
    }
}

#[derive(Deserialize)]
struct RawSample {
    id: Option<String>,
    topic: Option<String>,
    prompt_text: Option<String>,
    response_text: Option<String>,
    #[serde(default)]
    condition: Option<Condition>,
    #[serde(default)]
    source_model: Option<String>,
}

fn parse_sample(line: &str, line_no: usize) -> Result<Sample, CorpusError> {
    let malformed = |detail: String| CorpusError::MalformedRecord { line_no, detail };
    let raw: RawSample = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let require = |v: Option<String>, field: &str| v.ok_or_else(|| malformed(format!("missing field `{field}`")));
    let sample = Sample {
        id: require(raw.id, "id")?,
        topic: require(raw.topic, "topic")?,
        prompt_text: require(raw.prompt_text, "prompt_text")?,
        response_text: require(raw.response_text, "response_text")?,
        condition: raw.condition.unwrap_or_default(),
        source_model: raw.source_model.unwrap_or_default(),
    };
    if sample.id.is_empty() {
        return Err(malformed("empty `id`".into()));
    }
    if sample.response_text.is_empty() {
        return Err(malformed("empty `response_text`".into()));
    }
    Ok(sample)
}

/// Parses corpus JSONL from a reader. Blank lines are skipped but still
/// counted for line numbers.
pub fn read_jsonl<R: BufRead>(reader: R, source: &str) -> Result<Corpus, CorpusError> {
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    let mut lines = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: source.to_owned(),
            source: e,
        })?;
        lines = line_no;
        if line.trim().is_empty() {
            continue;
        }
        let sample = parse_sample(&line, line_no)?;
        if !seen.insert(sample.id.clone()) {
            return Err(CorpusError::DuplicateId(sample.id));
        }
        samples.push(sample);
    }
    let mut meta = BTreeMap::new();
    meta.insert("source".to_owned(), source.to_owned());
    meta.insert("line_count".to_owned(), lines.to_string());
    Ok(Corpus { samples, meta })
}

/// Loads a corpus from a JSONL file, preserving line order.
pub fn ingest_jsonl(path: &Path) -> Result<Corpus, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_jsonl(BufReader::new(file), &path.display().to_string())
}

/// Splits `n` into integer counts proportional to `weights` using the
/// largest-remainder method. Ties in the fractional part go to the earlier
/// entry. The counts always sum to `n`.
pub fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn line(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","topic":"health","prompt_text":"q?","response_text":"an answer here","condition":"positive","source_model":"m"}}"#
        )
    }

    #[test]
    fn empty_file_gives_empty_corpus() {
        let c = read_jsonl(Cursor::new(""), "mem").unwrap();
        assert!(c.is_empty());
        assert_eq!(c.meta["line_count"], "0");
    }

    #[test]
    fn preserves_file_order() {
        let text = [line("c"), line("a"), line("b")].join("\n");
        let c = read_jsonl(Cursor::new(text), "mem").unwrap();
        assert_eq!(c.ids().collect::<Vec<_>>(), ["c", "a", "b"]);
        assert_eq!(c.meta["line_count"], "3");
        assert_eq!(c.meta["source"], "mem");
    }

    #[test]
    fn missing_response_is_malformed_at_its_line() {
        let bad = r#"{"id":"b","topic":"t","prompt_text":"q","condition":"neutral","source_model":"m"}"#;
        let text = format!("{}\n{}\n{}", line("a"), bad, line("c"));
        match read_jsonl(Cursor::new(text), "mem") {
            Err(CorpusError::MalformedRecord { line_no, .. }) => assert_eq!(line_no, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unparseable_and_bad_condition_lines_are_malformed() {
        let err = read_jsonl(Cursor::new("{not json"), "mem").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRecord { line_no: 1, .. }));
        let bad = r#"{"id":"b","topic":"t","prompt_text":"q","response_text":"r","condition":"cheery"}"#;
        let err = read_jsonl(Cursor::new(bad), "mem").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRecord { line_no: 1, .. }));
    }

    #[test]
    fn condition_defaults_to_neutral() {
        let text = r#"{"id":"a","topic":"t","prompt_text":"q","response_text":"r r r"}"#;
        let c = read_jsonl(Cursor::new(text), "mem").unwrap();
        assert_eq!(c.samples[0].condition, Condition::Neutral);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = [line("a"), line("a")].join("\n");
        assert!(matches!(read_jsonl(Cursor::new(text), "mem"), Err(CorpusError::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(10, &[0.5, 0.5]), vec![5, 5]);
        assert_eq!(largest_remainder(10, &[1.0 / 3.0; 3]), vec![4, 3, 3]);
        assert_eq!(largest_remainder(7, &[0.15, 0.25, 0.6]), vec![1, 2, 4]);
        assert_eq!(largest_remainder(0, &[1.0]), vec![0]);
    }

    fn arb_sample() -> impl Strategy<Value = Sample> {
        (
            "[a-z0-9]{1,8}",
            "[a-z]{1,8}",
            "\\PC{0,30}",
            "\\PC{1,30}",
            prop_oneof![Just(Condition::Neutral), Just(Condition::Positive), Just(Condition::Negative)],
            "\\PC{0,10}",
        )
            .prop_map(|(id, topic, prompt_text, response_text, condition, source_model)| Sample {
                id,
                topic,
                prompt_text,
                response_text,
                condition,
                source_model,
            })
    }

    proptest! {
        #[test]
        fn write_then_ingest_is_identity(samples in proptest::collection::vec(arb_sample(), 0..12)) {
            let mut uniq = Vec::new();
            let mut seen = HashSet::new();
            for s in samples {
                if seen.insert(s.id.clone()) {
                    uniq.push(s);
                }
            }
            let corpus = Corpus::new(uniq, BTreeMap::new()).unwrap();
            let back = read_jsonl(Cursor::new(corpus.to_jsonl()), "mem").unwrap();
            prop_assert_eq!(back.samples, corpus.samples);
        }

        #[test]
        fn largest_remainder_sums_to_n(n in 0usize..5000, ws in proptest::collection::vec(0.0f64..1.0, 1..8)) {
            prop_assume!(ws.iter().sum::<f64>() > 0.0);
            let counts = largest_remainder(n, &ws);
            prop_assert_eq!(counts.iter().sum::<usize>(), n);
            let total: f64 = ws.iter().sum();
            for (c, w) in counts.iter().zip(&ws) {
                let q = n as f64 * w / total;
                prop_assert!((*c as f64 - q).abs() < 1.0 + 1e-9);
            }
        }
    }
}
