//! Seeded synthetic corpus generation and prompt-pack emission.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::templates::{ToneTemplates, NEGATIVE, NEUTRAL, POSITIVE, TOPIC_TEMPLATES};
use super::{largest_remainder, Condition, Corpus, CorpusError, Sample, TOPICS};

/// Prefix shared by every tone instruction in a prompt pack. Neutral prompts
/// never contain it.
pub const TONE_DIRECTIVE: &str = "Respond in a clearly";

const SOURCE_MODEL: &str = "template-v1";

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n_samples: usize,
    pub topic_mix: BTreeMap<String, f64>,
    pub condition_mix: BTreeMap<Condition, f64>,
    pub seed: u64,
}

impl GenSpec {
    /// Uniform topic mix over every built-in topic.
    pub fn new(n_samples: usize, condition_mix: &[(Condition, f64)], seed: u64) -> Self {
        let share = 1.0 / TOPICS.len() as f64;
        Self {
            n_samples,
            topic_mix: TOPICS.iter().map(|t| (t.to_string(), share)).collect(),
            condition_mix: condition_mix.iter().copied().collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.n_samples == 0 {
            return Err(CorpusError::InvalidSpec("n_samples must be at least 1".into()));
        }
        check_mix("topic_mix", self.topic_mix.values())?;
        check_mix("condition_mix", self.condition_mix.values())?;
        for topic in self.topic_mix.keys() {
            if !TOPICS.contains(&topic.as_str()) {
                return Err(CorpusError::InvalidSpec(format!(
                    "unknown topic {topic:?}; known topics: {}",
                    TOPICS.join(", ")
                )));
            }
        }
        Ok(())
    }
}

fn check_mix<'a>(name: &str, values: impl Iterator<Item = &'a f64>) -> Result<(), CorpusError> {
    let values: Vec<f64> = values.copied().collect();
    if values.is_empty() {
        return Err(CorpusError::InvalidSpec(format!("{name} is empty")));
    }
    if values.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(CorpusError::InvalidSpec(format!("{name} has a negative or non-finite proportion")));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidSpec(format!("{name} sums to {sum}, expected 1")));
    }
    Ok(())
}

struct Slot {
    id: String,
    topic: &'static str,
    condition: Condition,
}

/// Realizes the topic and condition mixes by largest remainder and pairs them
/// up in a seeded random order.
fn assign_slots(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Vec<Slot> {
    let n = spec.n_samples;
    let topic_weights: Vec<f64> = spec.topic_mix.values().copied().collect();
    let mut topics: Vec<&'static str> = Vec::with_capacity(n);
    for (name, count) in spec.topic_mix.keys().zip(largest_remainder(n, &topic_weights)) {
        let name = TOPICS.iter().find(|t| **t == name.as_str()).expect("validated topic");
        topics.extend(std::iter::repeat_n(*name, count));
    }
    let cond_weights: Vec<f64> = spec.condition_mix.values().copied().collect();
    let mut conditions: Vec<Condition> = Vec::with_capacity(n);
    for (cond, count) in spec.condition_mix.keys().zip(largest_remainder(n, &cond_weights)) {
        conditions.extend(std::iter::repeat_n(*cond, count));
    }
    topics.shuffle(rng);
    conditions.shuffle(rng);
    topics
        .into_iter()
        .zip(conditions)
        .enumerate()
        .map(|(i, (topic, condition))| Slot {
            id: format!("gen{}-{:06}", spec.seed, i),
            topic,
            condition,
        })
        .collect()
}

fn tone_templates(c: Condition) -> &'static ToneTemplates {
    match c {
        Condition::Neutral => &NEUTRAL,
        Condition::Positive => &POSITIVE,
        Condition::Negative => &NEGATIVE,
    }
}

fn topic_templates(topic: &str) -> &'static super::templates::TopicTemplates {
    TOPIC_TEMPLATES.iter().find(|t| t.name == topic).expect("validated topic")
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &'a [&'a str]) -> &'a str {
    xs.choose(rng).expect("template lists are nonempty")
}

/// Generates a synthetic corpus from slot-filled templates. Identical specs
/// produce identical corpora.
pub fn generate_synthetic(spec: &GenSpec) -> Result<Corpus, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let slots = assign_slots(spec, &mut rng);
    let mut samples = Vec::with_capacity(slots.len());
    for slot in slots {
        let tt = topic_templates(slot.topic);
        let subject = pick(&mut rng, tt.subjects);
        let prompt_text = pick(&mut rng, tt.questions).replace("{s}", subject);
        let body = pick(&mut rng, tt.bodies).replace("{s}", subject);
        let tone = tone_templates(slot.condition);
        let opener = pick(&mut rng, tone.openers);
        let closer = pick(&mut rng, tone.closers);
        samples.push(Sample {
            id: slot.id,
            topic: slot.topic.to_owned(),
            prompt_text,
            response_text: format!("{opener} {body} {closer}"),
            condition: slot.condition,
            source_model: SOURCE_MODEL.to_owned(),
        });
    }
    let mut meta = BTreeMap::new();
    meta.insert("generator".to_owned(), SOURCE_MODEL.to_owned());
    meta.insert("seed".to_owned(), spec.seed.to_string());
    Corpus::new(samples, meta)
}

/// One instruction for an external model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub topic: String,
    pub condition: Condition,
    pub prompt: String,
}

fn render_prompt(question: &str, condition: Condition) -> String {
    let mut p = String::from(
        "You are a digital personal assistant. Reply to the user's message in two to four sentences.",
    );
    match condition {
        Condition::Neutral => {}
        Condition::Positive => {
            p.push(' ');
            p.push_str(TONE_DIRECTIVE);
            p.push_str(" positive, upbeat tone.");
        }
        Condition::Negative => {
            p.push(' ');
            p.push_str(TONE_DIRECTIVE);
            p.push_str(" negative, critical tone.");
        }
    }
    p.push_str("\nUser: ");
    p.push_str(question);
    p
}

/// Builds the prompt records for `spec`. Ids, topics and conditions line up
/// with [`generate_synthetic`] for the same spec.
pub fn prompt_pack(spec: &GenSpec) -> Result<Vec<PromptRecord>, CorpusError> {
    let corpus = generate_synthetic(spec)?;
    Ok(corpus
        .samples
        .into_iter()
        .map(|s| PromptRecord {
            prompt: render_prompt(&s.prompt_text, s.condition),
            id: s.id,
            topic: s.topic,
            condition: s.condition,
        })
        .collect())
}

/// Writes the prompt pack for `spec` as JSONL and returns the prompt count.
pub fn emit_prompt_pack(spec: &GenSpec, out_path: &Path) -> Result<usize, CorpusError> {
    let records = prompt_pack(spec)?;
    let mut buf = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut buf, r).expect("prompt record serializes");
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(out_path).map_err(|e| CorpusError::io(out_path, e))?;
    f.write_all(&buf).map_err(|e| CorpusError::io(out_path, e))?;
    Ok(records.len())
}
