use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use tonebias::corpus::{emit_prompt_pack, generate_synthetic, ingest_jsonl, Condition, Corpus, GenSpec};
use tonebias::ensemble::{fit_stacking, validate_stack_tau, Ensemble, EnsembleFile, SoftVoteConfig};
use tonebias::eval::{emit_report, skew_report, threshold_sweep, EvalError, SkewEntry, SplitSpec, SweepConfig};
use tonebias::features::{count_transform, fit_vocab_min_df, load_vector_table, EncodingKind, Encoder, SparseVector, VectorTable};
use tonebias::models::{select_and_train, validate_alpha, validate_c, ModelFile, ModelKind};
use tonebias::par::Exec;
use tonebias::preprocess::{clean_corpus, CleanDoc, ExceptionTable, LengthBounds, Lemmatizer};
use tonebias::weaklabel::{
    label_corpus, load_external_scores, score_docs, scores_to_jsonl, validate_tau, LabelSet, LabelingConfig, ScoreNoise,
    ScorerKind, SentimentLexicon, ToneLabel, ToneScore, DEFAULT_LEXICON,
};

use crate::config::{Resolved, RunConfig};
use crate::{CliError, GenArgs, PipelineArgs, TrainArgs};

const EXEC: Exec = Exec::Parallel;

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write(path: &Path, body: &str) -> Result<String, CliError> {
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(body.as_bytes())))
}

fn gen_spec(a: &GenArgs) -> GenSpec {
    let mix: Vec<(Condition, f64)> = [
        (Condition::Positive, a.positive),
        (Condition::Negative, a.negative),
        (Condition::Neutral, a.neutral),
    ]
    .into_iter()
    .filter(|(_, w)| *w != 0.0)
    .collect();
    GenSpec::new(a.n, &mix, a.seed)
}

pub fn generate(a: &GenArgs) -> Result<(), CliError> {
    let corpus = generate_synthetic(&gen_spec(a))?;
    corpus.write_jsonl(&a.out)?;
    println!("wrote {} samples to {}", corpus.len(), a.out.display());
    Ok(())
}

pub fn promptpack(a: &GenArgs) -> Result<(), CliError> {
    let n = emit_prompt_pack(&gen_spec(a), &a.out)?;
    println!("wrote {n} prompts to {}", a.out.display());
    Ok(())
}

fn resolve(args: &PipelineArgs) -> Result<(Resolved, Option<PathBuf>), CliError> {
    let file = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let merged = args.run.clone().merged_over(file);
    let cfg = merged.resolve()?;
    for &a in &cfg.alphas {
        validate_alpha(a)?;
    }
    for &c in &cfg.cs {
        validate_c(c)?;
    }
    for &t in &cfg.taus {
        validate_tau(t)?;
    }
    validate_tau(cfg.label_tau)?;
    validate_stack_tau(cfg.stack_tau)?;
    SplitSpec::new(cfg.test_fraction, cfg.seed)?;
    LengthBounds::new(cfg.min_tokens, cfg.max_tokens)?;
    ScoreNoise::new(cfg.score_noise, cfg.seed)?;
    if let Some(w) = &cfg.vote_weights {
        SoftVoteConfig::new(w.clone())?;
    }
    if cfg.stack_folds < 2 {
        return Err(tonebias::ensemble::EnsembleError::InvalidFolds(cfg.stack_folds).into());
    }
    Ok((cfg, merged.out_dir))
}

fn out_dir(dir: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = dir.ok_or_else(|| CliError::Config("--out-dir is required".into()))?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Inputs loaded and scored once per command.
struct Loaded {
    corpus: Corpus,
    docs: Vec<CleanDoc>,
    scores: BTreeMap<String, ToneScore>,
    vectors: Option<Arc<VectorTable>>,
    inputs: BTreeMap<&'static str, serde_json::Value>,
}

fn load(cfg: &Resolved, need_scores: bool) -> Result<Loaded, CliError> {
    let mut inputs = BTreeMap::new();
    let mut record = |name: &'static str, path: &Path| -> Result<(), CliError> {
        inputs.insert(name, json!({ "path": path.display().to_string(), "sha256": sha256_file(path)? }));
        Ok(())
    };
    let corpus_path = cfg.corpus_path()?;
    record("corpus", corpus_path)?;
    let corpus = ingest_jsonl(corpus_path)?;

    let custom;
    let lemmatizer = match &cfg.exceptions {
        Some(p) => {
            record("exceptions", p)?;
            custom = Lemmatizer::new(ExceptionTable::load(p)?);
            &custom
        }
        None => Lemmatizer::builtin(),
    };
    let bounds = LengthBounds::new(cfg.min_tokens, cfg.max_tokens)?;
    let docs = clean_corpus(&corpus, lemmatizer, bounds, EXEC);

    let vectors = match &cfg.vectors {
        Some(p) => {
            record("vectors", p)?;
            Some(Arc::new(load_vector_table(p)?))
        }
        None => None,
    };

    let scores = if !need_scores {
        BTreeMap::new()
    } else if let Some(p) = &cfg.scores {
        record("scores", p)?;
        let mut all = load_external_scores(p, Some(&corpus))?;
        let kept: std::collections::HashSet<&str> = docs.iter().filter(|d| d.kept).map(|d| d.id.as_str()).collect();
        all.retain(|id, _| kept.contains(id.as_str()));
        all
    } else {
        let lexicon = match &cfg.lexicon {
            Some(p) => {
                record("lexicon", p)?;
                SentimentLexicon::load(p, cfg.lexicon_scale, lemmatizer)?
            }
            None => SentimentLexicon::parse(DEFAULT_LEXICON, cfg.lexicon_scale, lemmatizer)?,
        };
        let noise = (cfg.score_noise > 0.0).then(|| ScoreNoise::new(cfg.score_noise, cfg.seed)).transpose()?;
        score_docs(&docs, &lexicon, noise, EXEC)?.into_iter().map(|s| (s.id.clone(), s)).collect()
    };
    Ok(Loaded {
        corpus,
        docs,
        scores,
        vectors,
        inputs,
    })
}

fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &Resolved,
    inputs: &BTreeMap<&'static str, serde_json::Value>,
    outputs: &BTreeMap<String, String>,
) -> Result<(), CliError> {
    let config = serde_json::to_value(cfg).expect("config serializes");
    let config_hash = hex(&Sha256::digest(config.to_string().as_bytes()));
    let manifest = json!({
        "command": command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": config,
        "config_hash": config_hash,
        "inputs": inputs,
        "outputs": outputs,
    });
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    body.push('\n');
    write(&dir.join("run.json"), &body)?;
    Ok(())
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn ingest(args: &PipelineArgs) -> Result<(), CliError> {
    let (cfg, dir) = resolve(args)?;
    let dir = out_dir(dir)?;
    let data = load(&cfg, false)?;
    let kept = data.docs.iter().filter(|d| d.kept).count();
    let mut outputs = BTreeMap::new();
    outputs.insert("docs.jsonl".to_owned(), write(&dir.join("docs.jsonl"), &jsonl(&data.docs))?);
    write_manifest(&dir, "ingest", &cfg, &data.inputs, &outputs)?;
    println!("ingested {} samples; {kept} kept after length filtering", data.corpus.len());
    Ok(())
}

fn label_at(data: &Loaded, tau: f64) -> Result<LabelSet, CliError> {
    Ok(label_corpus(&data.corpus, &data.docs, &data.scores, &LabelingConfig::new(tau, ScorerKind::Lexicon)?)?)
}

pub fn label(args: &PipelineArgs) -> Result<(), CliError> {
    let (cfg, dir) = resolve(args)?;
    let dir = out_dir(dir)?;
    let data = load(&cfg, true)?;
    let set = label_at(&data, cfg.label_tau)?;
    let mut outputs = BTreeMap::new();
    outputs.insert("scores.jsonl".to_owned(), write(&dir.join("scores.jsonl"), &scores_to_jsonl(data.scores.values()))?);
    outputs.insert("labels.jsonl".to_owned(), write(&dir.join("labels.jsonl"), &set.to_jsonl())?);
    write_manifest(&dir, "label", &cfg, &data.inputs, &outputs)?;
    println!(
        "tau={} POSITIVE={} NEGATIVE={} NEUTRAL={}",
        cfg.label_tau, set.counts.positive, set.counts.negative, set.counts.neutral
    );
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let (cfg, dir) = resolve(&args.pipeline)?;
    let dir = out_dir(dir)?;
    let kind: ModelKind = args.model.parse().map_err(CliError::Config)?;
    let encoding: EncodingKind = args.encoding.parse().map_err(CliError::Config)?;
    let data = load(&cfg, true)?;
    let set = label_at(&data, cfg.label_tau)?;
    let by_id: BTreeMap<&str, &CleanDoc> = data.docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let (docs, y): (Vec<&CleanDoc>, Vec<i8>) = set
        .records
        .iter()
        .filter_map(|r| Some((by_id[r.id.as_str()], r.label.sign()?)))
        .unzip();
    if docs.is_empty() {
        return Err(EvalError::NoConfidentLabels.into());
    }
    let encoder = match encoding {
        EncodingKind::Tfidf => {
            let owned: Vec<CleanDoc> = docs.iter().map(|d| (*d).clone()).collect();
            Encoder::Tfidf(fit_vocab_min_df(&owned, cfg.min_df)?)
        }
        EncodingKind::Dense => Encoder::Dense(data.vectors.clone().ok_or(EvalError::MissingVectors)?),
    };
    let mut x = encoder.encode_all(&docs, EXEC);
    let dim = encoder.dim();
    let train_cfg = cfg.train();
    let grid = cfg.grid();
    let mut outputs = BTreeMap::new();
    let body = match kind {
        ModelKind::Mnb | ModelKind::LogReg | ModelKind::Svm => {
            if kind == ModelKind::Mnb && cfg.mnb_counts {
                if let Encoder::Tfidf(v) = &encoder {
                    x = docs.iter().map(|d| count_transform(d, v)).collect::<Vec<SparseVector>>();
                }
            }
            let sel = select_and_train(kind, &x, &y, dim, &grid, &train_cfg)?;
            println!("selected {}", sel.spec.describe());
            ModelFile::new(sel.model, encoding.as_str(), encoder.space_hash()).to_json()
        }
        ModelKind::Vote | ModelKind::Stack => {
            let bases = [ModelKind::LogReg, ModelKind::Svm]
                .iter()
                .map(|&k| select_and_train(k, &x, &y, dim, &grid, &train_cfg))
                .collect::<Result<Vec<_>, _>>()?;
            let ensemble = if kind == ModelKind::Vote {
                let weights = match &cfg.vote_weights {
                    Some(w) => SoftVoteConfig::new(w.clone())?,
                    None => SoftVoteConfig::uniform(bases.len())?,
                };
                Ensemble::vote(bases.into_iter().map(|s| s.model).collect(), weights)?
            } else {
                let specs: Vec<_> = bases.iter().map(|s| s.spec).collect();
                Ensemble::stack(fit_stacking(&specs, &x, &y, dim, cfg.stack_folds, cfg.stack_tau, &train_cfg, EXEC)?)?
            };
            EnsembleFile::new(ensemble, encoding.as_str(), encoder.space_hash()).to_json()
        }
    };
    outputs.insert("model.json".to_owned(), write(&dir.join("model.json"), &body)?);
    if let Encoder::Tfidf(v) = &encoder {
        outputs.insert("vocab.txt".to_owned(), write(&dir.join("vocab.txt"), &v.dump())?);
    }
    write_manifest(&dir, "train", &cfg, &data.inputs, &outputs)?;
    println!("trained {kind} on {} labeled responses ({encoding}, {dim} features)", y.len());
    Ok(())
}

fn skew_entries(data: &Loaded, corpus_name: &str, sets: &[LabelSet]) -> Result<Vec<SkewEntry>, CliError> {
    let sample_by_id: BTreeMap<&str, (&str, Condition)> = data
        .corpus
        .samples
        .iter()
        .map(|s| (s.id.as_str(), (s.topic.as_str(), s.condition)))
        .collect();
    let mut entries = Vec::new();
    for set in sets {
        let mut slices: BTreeMap<(String, String), Vec<ToneLabel>> = BTreeMap::new();
        for r in &set.records {
            let (topic, condition) = sample_by_id[r.id.as_str()];
            slices.entry(("all".into(), "all".into())).or_default().push(r.label);
            slices.entry((condition.to_string(), "all".into())).or_default().push(r.label);
            slices.entry(("all".into(), topic.to_owned())).or_default().push(r.label);
        }
        for ((condition, topic), labels) in slices {
            match skew_report(&labels, set.tau) {
                Ok(report) => entries.push(SkewEntry {
                    corpus: corpus_name.to_owned(),
                    condition,
                    topic,
                    report,
                }),
                Err(EvalError::NoConfidentLabels) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(entries)
}

/// `sweep` evaluates models; `audit` additionally writes scores, labels and
/// skew statistics.
pub fn sweep(args: &PipelineArgs, audit: bool) -> Result<(), CliError> {
    let (cfg, dir) = resolve(args)?;
    let dir = out_dir(dir)?;
    let data = load(&cfg, true)?;
    let sweep_cfg = SweepConfig {
        taus: cfg.taus.clone(),
        models: cfg.models.clone(),
        encodings: cfg.encodings.clone(),
        seed: cfg.seed,
        test_fraction: cfg.test_fraction,
        grid: cfg.grid(),
        train: cfg.train(),
        vote_weights: cfg.vote_weights.clone(),
        stack_folds: cfg.stack_folds,
        stack_tau: cfg.stack_tau,
        min_df: cfg.min_df,
        mnb_counts: cfg.mnb_counts,
        exec: EXEC,
        ..SweepConfig::default()
    };
    let result = threshold_sweep(&data.corpus, &data.docs, &data.scores, data.vectors.as_ref(), &sweep_cfg)?;

    let mut outputs = BTreeMap::new();
    let mut skews = Vec::new();
    if audit {
        let sets = cfg.taus.iter().map(|&t| label_at(&data, t)).collect::<Result<Vec<_>, _>>()?;
        let name = cfg
            .corpus_path()?
            .file_name()
            .map_or_else(|| "corpus".to_owned(), |n| n.to_string_lossy().into_owned());
        skews = skew_entries(&data, &name, &sets)?;
        outputs.insert("scores.jsonl".to_owned(), write(&dir.join("scores.jsonl"), &scores_to_jsonl(data.scores.values()))?);
        for set in &sets {
            let file = format!("labels-{}.jsonl", set.tau);
            outputs.insert(file.clone(), write(&dir.join(&file), &set.to_jsonl())?);
        }
    }
    for f in emit_report(&result, &skews, &dir)? {
        outputs.insert(f.name, f.sha256);
    }
    write_manifest(&dir, if audit { "audit" } else { "sweep" }, &cfg, &data.inputs, &outputs)?;
    for row in &result.rows {
        println!(
            "tau={} model={} encoding={} accuracy={:.4} macro_f1={:.4}",
            row.tau, row.model, row.encoding, row.metrics.accuracy, row.metrics.macro_f1
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}
