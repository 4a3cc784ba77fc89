//! Run configuration: a JSON file merged with command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use tonebias::features::EncodingKind;
use tonebias::models::{HyperGrid, ModelKind, TrainConfig};
use tonebias::preprocess::{DEFAULT_MAX_TOKENS, DEFAULT_MIN_TOKENS};

use crate::CliError;

/// Settings shared by the pipeline subcommands. Every field is optional in
/// both the config file and on the command line; flags win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus JSONL.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// External scores JSONL (`{"id", "p_positive"}` per line); the built-in
    /// lexicon scorer is used when absent.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Lexicon file (`token weight` per line).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Lemmatizer exception table (`form lemma` per line).
    #[arg(long)]
    pub exceptions: Option<PathBuf>,
    /// Term vector table for the dense encoding.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Thresholds for sweep/audit, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Threshold for label/train.
    #[arg(long, alias = "tau")]
    pub label_tau: Option<f64>,
    /// Subset of mnb,logreg,svm,vote,stack.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Subset of tfidf,dense.
    #[arg(long, value_delimiter = ',')]
    pub encodings: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long = "cs", value_delimiter = ',')]
    pub cs: Option<Vec<f64>>,
    /// Standard deviation of Gaussian noise added to lexicon logits.
    #[arg(long)]
    pub score_noise: Option<f64>,
    #[arg(long)]
    pub lexicon_scale: Option<f64>,
    #[arg(long)]
    pub min_df: Option<usize>,
    /// Feed naive Bayes raw term counts instead of TF-IDF weights.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mnb_counts: Option<bool>,
    /// Soft-vote weights over the vote bases (logreg, svm), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub vote_weights: Option<Vec<f64>>,
    #[arg(long)]
    pub stack_folds: Option<usize>,
    /// Decision threshold of the stacking meta-model.
    #[arg(long)]
    pub stack_tau: Option<f64>,
    #[arg(long)]
    pub min_tokens: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub svm_epochs: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

macro_rules! merge_fields {
    ($flags:ident, $file:ident, $($f:ident),* $(,)?) => {
        RunConfig { $($f: $flags.$f.or($file.$f)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Flags take precedence over the file.
    pub fn merged_over(self, file: RunConfig) -> RunConfig {
        let flags = self;
        merge_fields!(
            flags, file, corpus, scores, lexicon, exceptions, vectors, out_dir, taus, label_tau, models, encodings, seed,
            test_fraction, alphas, cs, score_noise, lexicon_scale, min_df, mnb_counts, vote_weights, stack_folds,
            stack_tau, min_tokens, max_tokens, svm_epochs, max_iters,
        )
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let models = match &self.models {
            Some(m) => m.iter().map(|s| s.parse::<ModelKind>().map_err(CliError::Config)).collect::<Result<Vec<_>, _>>()?,
            None => vec![ModelKind::Mnb, ModelKind::LogReg, ModelKind::Svm, ModelKind::Vote, ModelKind::Stack],
        };
        let encodings = match &self.encodings {
            Some(e) => e.iter().map(|s| s.parse::<EncodingKind>().map_err(CliError::Config)).collect::<Result<Vec<_>, _>>()?,
            None => vec![EncodingKind::Tfidf],
        };
        let grid = HyperGrid::default();
        let train = TrainConfig::default();
        Ok(Resolved {
            corpus: self.corpus.clone(),
            scores: self.scores.clone(),
            lexicon: self.lexicon.clone(),
            exceptions: self.exceptions.clone(),
            vectors: self.vectors.clone(),
            taus: self.taus.clone().unwrap_or_else(|| vec![0.60, 0.85]),
            label_tau: self.label_tau.unwrap_or(0.85),
            models,
            encodings,
            seed: self.seed.unwrap_or(0),
            test_fraction: self.test_fraction.unwrap_or(0.2),
            alphas: self.alphas.clone().unwrap_or(grid.alphas),
            cs: self.cs.clone().unwrap_or(grid.cs),
            score_noise: self.score_noise.unwrap_or(0.0),
            lexicon_scale: self.lexicon_scale.unwrap_or(1.0),
            min_df: self.min_df.unwrap_or(1),
            mnb_counts: self.mnb_counts.unwrap_or(false),
            vote_weights: self.vote_weights.clone(),
            stack_folds: self.stack_folds.unwrap_or(5),
            stack_tau: self.stack_tau.unwrap_or(0.5),
            min_tokens: self.min_tokens.unwrap_or(DEFAULT_MIN_TOKENS),
            max_tokens: self.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
            svm_epochs: self.svm_epochs.unwrap_or(train.svm_epochs),
            max_iters: self.max_iters.unwrap_or(train.max_iters),
        })
    }
}

/// Fully defaulted configuration. Its JSON form (which leaves out the output
/// directory) is what the run manifest hashes.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub corpus: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub exceptions: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub taus: Vec<f64>,
    pub label_tau: f64,
    pub models: Vec<ModelKind>,
    pub encodings: Vec<EncodingKind>,
    pub seed: u64,
    pub test_fraction: f64,
    pub alphas: Vec<f64>,
    pub cs: Vec<f64>,
    pub score_noise: f64,
    pub lexicon_scale: f64,
    pub min_df: usize,
    pub mnb_counts: bool,
    pub vote_weights: Option<Vec<f64>>,
    pub stack_folds: usize,
    pub stack_tau: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub svm_epochs: usize,
    pub max_iters: usize,
}

impl Resolved {
    pub fn corpus_path(&self) -> Result<&Path, CliError> {
        self.corpus.as_deref().ok_or_else(|| CliError::Config("--corpus is required".into()))
    }

    pub fn grid(&self) -> HyperGrid {
        HyperGrid {
            alphas: self.alphas.clone(),
            cs: self.cs.clone(),
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            max_iters: self.max_iters,
            svm_epochs: self.svm_epochs,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}
