use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tonebias::corpus::{generate_synthetic, Condition, GenSpec};
use tonebias::eval::{threshold_sweep, SweepConfig};
use tonebias::models::ModelKind;
use tonebias::par::Exec;
use tonebias::preprocess::{clean_corpus, LengthBounds, Lemmatizer};
use tonebias::weaklabel::{index_scores, score_docs, ScoreNoise, SentimentLexicon, CALIBRATED_LOGIT_SD};

fn sweep(c: &mut Criterion) {
    let corpus = generate_synthetic(&GenSpec::new(600, &[(Condition::Positive, 0.5), (Condition::Negative, 0.5)], 42)).unwrap();
    let docs = clean_corpus(&corpus, Lemmatizer::builtin(), LengthBounds::default(), Exec::Parallel);
    let noise = ScoreNoise::new(CALIBRATED_LOGIT_SD, 42).unwrap();
    let scores = index_scores(score_docs(&docs, SentimentLexicon::builtin(), Some(noise), Exec::Parallel).unwrap()).unwrap();

    let mut group = c.benchmark_group("threshold_sweep");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let cfg = SweepConfig {
            models: vec![ModelKind::Mnb, ModelKind::LogReg, ModelKind::Svm, ModelKind::Vote],
            exec,
            ..SweepConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| threshold_sweep(&corpus, &docs, &scores, None, cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
