//! Text normalization, tokenization, lemmatization and length filtering.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Sample};
use crate::par::{self, Exec};

/// Inclusive token-count bounds applied to raw responses.
pub const DEFAULT_MIN_TOKENS: usize = 3;
pub const DEFAULT_MAX_TOKENS: usize = 200;

/// Text of the bundled exception table.
pub const DEFAULT_EXCEPTIONS: &str = include_str!("../data/exceptions.txt");

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("invalid length bounds: min={min}, max={max}")]
    InvalidBounds { min: usize, max: usize },
    #[error("malformed exception table line {line_no}: {detail}")]
    MalformedLine { line_no: usize, detail: String },
    #[error("exception table maps {surface:?} to {lemma:?}, which is itself mapped to {other:?}")]
    ChainedException {
        surface: String,
        lemma: String,
        other: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl PreprocessError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::InvalidBounds { .. } => "InvalidBounds",
            Self::MalformedLine { .. } => "MalformedLine",
            Self::ChainedException { .. } => "ChainedException",
            Self::Io { .. } => "IoError",
        }
    }
}

/// A cleaned assistant response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDoc {
    pub id: String,
    /// Lemmatized lowercase tokens.
    pub tokens: Vec<String>,
    /// Whether the document passed the length filter.
    pub kept: bool,
    /// Token count before lemmatization.
    pub raw_len: usize,
}

/// Lowercases, replaces every character outside letters, digits, apostrophes
/// and whitespace by a space, collapses whitespace runs and trims.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() || ch == '\'' {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        } else {
            pending_space = true;
        }
    }
    out
}

/// Splits normalized text on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Irregular-form table consulted before the suffix rules.
///
/// Every lemma in the table is a fixed point: a token that appears as a lemma
/// is returned unchanged. Loading rejects tables where a lemma is itself a
/// surface form mapped elsewhere, which would break idempotence.
#[derive(Debug, Clone, Default)]
pub struct ExceptionTable {
    map: HashMap<String, String>,
}

impl ExceptionTable {
    pub fn parse(text: &str) -> Result<Self, PreprocessError> {
        let mut map: HashMap<String, String> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(PreprocessError::MalformedLine {
                    line_no,
                    detail: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            let surface = cols[0].to_lowercase();
            let lemma = cols[1].to_lowercase();
            if let Some(prev) = map.get(&surface) {
                if *prev != lemma {
                    return Err(PreprocessError::MalformedLine {
                        line_no,
                        detail: format!("{surface:?} already maps to {prev:?}"),
                    });
                }
            }
            map.insert(surface, lemma);
        }
        for (surface, lemma) in &map {
            if let Some(other) = map.get(lemma) {
                if other != lemma {
                    return Err(PreprocessError::ChainedException {
                        surface: surface.clone(),
                        lemma: lemma.clone(),
                        other: other.clone(),
                    });
                }
            }
        }
        Ok(Self { map })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PreprocessError> {
        let text = std::fs::read_to_string(path).map_err(|source| PreprocessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The bundled table of irregular English forms.
    pub fn builtin() -> &'static ExceptionTable {
        static TABLE: OnceLock<ExceptionTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            ExceptionTable::parse(DEFAULT_EXCEPTIONS).expect("bundled exception table is valid")
        })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Deterministic rule-based lemmatizer.
#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: ExceptionTable,
    lemma_set: std::collections::HashSet<String>,
}

impl Default for Lemmatizer {
    fn default() -> Self {
        Self::new(ExceptionTable::builtin().clone())
    }
}

impl Lemmatizer {
    pub fn new(exceptions: ExceptionTable) -> Self {
        let lemma_set = exceptions.map.values().cloned().collect();
        Self {
            exceptions,
            lemma_set,
        }
    }

    /// Shared instance over the bundled exception table.
    pub fn builtin() -> &'static Lemmatizer {
        static LEM: OnceLock<Lemmatizer> = OnceLock::new();
        LEM.get_or_init(Lemmatizer::default)
    }

    pub fn exceptions(&self) -> &ExceptionTable {
        &self.exceptions
    }

    /// Lemmatizes one token. Rules are tried in a fixed order (exception
    /// table, `ies`→`y`, `sses`→`ss`, final `s`, then `ing`/`ed`), the first
    /// match is applied and the process repeats until no rule fires. Every
    /// rule shortens the token, so the loop terminates, and the result is a
    /// fixed point of the whole procedure.
    pub fn lemmatize_token(&self, token: &str) -> String {
        let mut cur = token.to_owned();
        loop {
            if self.lemma_set.contains(&cur) {
                return cur;
            }
            if let Some(lemma) = self.exceptions.map.get(&cur) {
                return lemma.clone();
            }
            match apply_suffix_rule(&cur) {
                Some(next) => cur = next,
                None => return cur,
            }
        }
    }

    pub fn lemmatize(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().map(|t| self.lemmatize_token(t)).collect()
    }
}

fn apply_suffix_rule(tok: &str) -> Option<String> {
    let chars: Vec<char> = tok.chars().collect();
    let n = chars.len();
    if n > 4 && tok.ends_with("ies") {
        return Some(format!("{}y", &tok[..tok.len() - 3]));
    }
    if tok.ends_with("sses") {
        return Some(tok[..tok.len() - 2].to_owned());
    }
    if n > 3 && chars[n - 1] == 's' {
        let prev = chars[n - 2];
        if prev.is_alphabetic() && prev != 's' && prev != 'u' && prev != 'i' {
            return Some(tok[..tok.len() - 1].to_owned());
        }
    }
    for suffix in ["ing", "ed"] {
        if let Some(stem) = tok.strip_suffix(suffix) {
            if stem.chars().count() >= 3 && stem.chars().all(char::is_alphabetic) {
                return Some(stem.to_owned());
            }
        }
    }
    None
}

/// Lemmatizes with the bundled exception table.
pub fn lemmatize(tokens: &[String]) -> Vec<String> {
    Lemmatizer::builtin().lemmatize(tokens)
}

/// Inclusive token-count window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBounds {
    pub min: usize,
    pub max: usize,
}

impl Default for LengthBounds {
    fn default() -> Self {
        Self {
            min: DEFAULT_MIN_TOKENS,
            max: DEFAULT_MAX_TOKENS,
        }
    }
}

impl LengthBounds {
    pub fn new(min: usize, max: usize) -> Result<Self, PreprocessError> {
        if min < 1 || min > max {
            return Err(PreprocessError::InvalidBounds { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, raw_len: usize) -> bool {
        (self.min..=self.max).contains(&raw_len)
    }
}

/// Sets `doc.kept` from its raw token count.
pub fn length_filter(mut doc: CleanDoc, min: usize, max: usize) -> Result<CleanDoc, PreprocessError> {
    let bounds = LengthBounds::new(min, max)?;
    doc.kept = bounds.contains(doc.raw_len);
    Ok(doc)
}

/// Runs the full cleaning chain on one response.
pub fn clean_text(id: &str, text: &str, lemmatizer: &Lemmatizer, bounds: LengthBounds) -> CleanDoc {
    let raw = tokenize(&normalize(text));
    let raw_len = raw.len();
    CleanDoc {
        id: id.to_owned(),
        tokens: lemmatizer.lemmatize(&raw),
        kept: bounds.contains(raw_len),
        raw_len,
    }
}

/// Cleans the response text of every sample, in corpus order.
pub fn clean_corpus(corpus: &Corpus, lemmatizer: &Lemmatizer, bounds: LengthBounds, exec: Exec) -> Vec<CleanDoc> {
    par::map(exec, &corpus.samples, |s: &Sample| {
        clean_text(&s.id, &s.response_text, lemmatizer, bounds)
    })
}
