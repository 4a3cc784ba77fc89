use std::io::Cursor;

use tonebias::corpus::{generate_synthetic, Condition, GenSpec};
use tonebias::par::Exec;
use tonebias::preprocess::{clean_corpus, LengthBounds, Lemmatizer};
use tonebias::weaklabel::{load_external_scores, read_scores, score_docs, scores_to_jsonl, LabelError, SentimentLexicon};

fn corpus(n: usize) -> tonebias::corpus::Corpus {
    generate_synthetic(&GenSpec::new(n, &[(Condition::Positive, 0.4), (Condition::Negative, 0.4), (Condition::Neutral, 0.2)], 5))
        .unwrap()
}

#[test]
fn scores_round_trip_through_the_wire_format() {
    let corpus = corpus(50);
    let docs = clean_corpus(&corpus, Lemmatizer::builtin(), LengthBounds::default(), Exec::Sequential);
    let scores = score_docs(&docs, SentimentLexicon::builtin(), None, Exec::Sequential).unwrap();
    assert_eq!(scores.len(), 50);
    let text = scores_to_jsonl(&scores);

    // one object per line, in corpus order, with exactly the two wire fields
    let ids: Vec<&str> = corpus.ids().collect();
    for (line, id) in text.lines().zip(&ids) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 2);
        assert_eq!(obj["id"], *id);
        assert!(obj["p_positive"].is_f64());
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.jsonl");
    std::fs::write(&path, &text).unwrap();
    let loaded = load_external_scores(&path, Some(&corpus)).unwrap();
    assert_eq!(loaded.len(), 50);
    for s in &scores {
        assert_eq!(loaded[&s.id], *s);
    }
}

#[test]
fn wire_format_violations_are_reported() {
    let corpus = corpus(3);
    let ids: Vec<&str> = corpus.ids().collect();
    let missing = format!("{{\"id\":\"{}\",\"p_positive\":0.2}}\n", ids[0]);
    assert!(matches!(read_scores(Cursor::new(missing), Some(&corpus)), Err(LabelError::MissingScore(_))));
    let out_of_range = "{\"id\":\"a\",\"p_positive\":1.5}\n";
    assert!(matches!(read_scores(Cursor::new(out_of_range), None), Err(LabelError::OutOfRange { .. })));
    let dup = "{\"id\":\"a\",\"p_positive\":0.5}\n{\"id\":\"a\",\"p_positive\":0.6}\n";
    assert!(matches!(read_scores(Cursor::new(dup), None), Err(LabelError::DuplicateScore(_))));
    let malformed = "{\"id\":\"a\"}\n";
    assert!(matches!(read_scores(Cursor::new(malformed), None), Err(LabelError::MalformedRecord { line_no: 1, .. })));
}
