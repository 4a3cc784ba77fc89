use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, SkewReport, SweepResult};
use crate::hashing::sha256_hex;

/// Skew statistics for one slice of a corpus at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewEntry {
    pub corpus: String,
    /// Generation condition, or `all`.
    pub condition: String,
    /// Topic, or `all`.
    pub topic: String,
    #[serde(flatten)]
    pub report: SkewReport,
}

/// A written report file and the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFile {
    pub name: String,
    pub sha256: String,
}

/// Fixed six-decimal rendering used in every tabular output.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

const METRICS_HEADER: &str = "tau,model,encoding,accuracy,precision_pos,recall_pos,f1_pos,precision_neg,recall_neg,f1_neg,macro_f1,n_train,n_test,n_discarded_neutral";

fn metrics_csv(sweep: &SweepResult) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in &sweep.rows {
        let m = &r.metrics;
        let cells = [
            fmt6(r.tau),
            r.model.to_string(),
            r.encoding.to_string(),
            fmt6(m.accuracy),
            fmt6(m.pos.precision),
            fmt6(m.pos.recall),
            fmt6(m.pos.f1),
            fmt6(m.neg.precision),
            fmt6(m.neg.recall),
            fmt6(m.neg.f1),
            fmt6(m.macro_f1),
            r.n_train.to_string(),
            r.n_test.to_string(),
            r.n_discarded_neutral.to_string(),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn plotdata_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("tau,model,encoding,topic,metric,value\n");
    for r in &sweep.rows {
        let head = format!("{},{},{}", fmt6(r.tau), r.model, r.encoding);
        let m = &r.metrics;
        for (name, v) in [
            ("accuracy", m.accuracy),
            ("macro_f1", m.macro_f1),
            ("f1_pos", m.pos.f1),
            ("f1_neg", m.neg.f1),
        ] {
            let _ = writeln!(out, "{head},all,{name},{}", fmt6(v));
        }
        for (topic, tm) in &r.per_topic {
            let _ = writeln!(out, "{head},{topic},accuracy,{}", fmt6(tm.accuracy));
            let _ = writeln!(out, "{head},{topic},macro_f1,{}", fmt6(tm.macro_f1));
        }
    }
    out
}

fn report_md(sweep: &SweepResult, skews: &[SkewEntry]) -> String {
    let mut out = String::from("# Tone-bias audit\n\n## Weak labels\n\n| tau | positive | negative | neutral |\n|---|---|---|---|\n");
    for l in &sweep.labels {
        let _ = writeln!(out, "| {} | {} | {} | {} |", fmt6(l.tau), l.counts.positive, l.counts.negative, l.counts.neutral);
    }
    out.push_str("\n## Held-out metrics\n\n| tau | model | encoding | selected | accuracy | macro-F1 | n_train | n_test |\n|---|---|---|---|---|---|---|---|\n");
    for r in &sweep.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            fmt6(r.tau),
            r.model,
            r.encoding,
            r.hyper,
            fmt6(r.metrics.accuracy),
            fmt6(r.metrics.macro_f1),
            r.n_train,
            r.n_test
        );
    }
    if sweep.labels.len() >= 2 {
        let lo = sweep.labels.first().map(|l| l.tau).unwrap_or_default();
        let hi = sweep.labels.last().map(|l| l.tau).unwrap_or_default();
        let _ = write!(
            out,
            "\n## Threshold effect\n\nChange in macro-F1 from tau={} to tau={}.\n\n| model | encoding | delta |\n|---|---|---|\n",
            fmt6(lo),
            fmt6(hi)
        );
        for r in sweep.rows.iter().filter(|r| r.tau == lo) {
            if let Some(h) = sweep.row(hi, r.model, r.encoding) {
                let _ = writeln!(out, "| {} | {} | {} |", r.model, r.encoding, fmt6(h.metrics.macro_f1 - r.metrics.macro_f1));
            }
        }
    }
    out.push_str("\n## Tonal skew\n\n");
    if skews.is_empty() {
        out.push_str("No skew statistics.\n");
    } else {
        out.push_str("| corpus | condition | topic | tau | positive | negative | neutral | skew | p-value |\n|---|---|---|---|---|---|---|---|---|\n");
        for s in skews {
            let r = &s.report;
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {:.3e} |",
                s.corpus,
                s.condition,
                s.topic,
                fmt6(r.tau),
                r.n_pos,
                r.n_neg,
                r.n_neutral,
                fmt6(r.skew),
                r.p_value
            );
        }
    }
    let topics: Vec<&String> = sweep.rows.first().map(|r| r.per_topic.keys().collect()).unwrap_or_default();
    if !topics.is_empty() {
        out.push_str("\n## Per-topic macro-F1\n\n| tau | model | encoding |");
        for t in &topics {
            let _ = write!(out, " {t} |");
        }
        out.push_str("\n|---|---|---|");
        out.push_str(&"---|".repeat(topics.len()));
        out.push('\n');
        for r in &sweep.rows {
            let _ = write!(out, "| {} | {} | {} |", fmt6(r.tau), r.model, r.encoding);
            for t in &topics {
                let cell = r.per_topic.get(*t).map_or_else(|| "-".to_owned(), |m| fmt6(m.macro_f1));
                let _ = write!(out, " {cell} |");
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `metrics.csv`, `skew.json`, `report.md` and `plotdata.csv` into
/// `out_dir`. Output depends only on the inputs, so reruns are byte-identical.
pub fn emit_report(sweep: &SweepResult, skews: &[SkewEntry], out_dir: &Path) -> Result<Vec<ReportFile>, EvalError> {
    if sweep.rows.is_empty() {
        return Err(EvalError::EmptyInput("sweep has no rows".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| EvalError::io(out_dir, e))?;
    let mut skew_json = serde_json::to_string_pretty(skews).expect("skew entries serialize");
    skew_json.push('\n');
    let files = [
        ("metrics.csv", metrics_csv(sweep)),
        ("skew.json", skew_json),
        ("report.md", report_md(sweep, skews)),
        ("plotdata.csv", plotdata_csv(sweep)),
    ];
    let mut manifest = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, body.as_bytes()).map_err(|e| EvalError::io(&path, e))?;
        manifest.push(ReportFile {
            name: name.to_owned(),
            sha256: sha256_hex(body.as_bytes()),
        });
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{compute_metrics, LabelSummary, SweepRow};
    use crate::features::EncodingKind;
    use crate::models::ModelKind;
    use crate::weaklabel::LabelCounts;
    use std::collections::BTreeMap;

    fn sweep() -> SweepResult {
        let m = compute_metrics(&[1, 1, -1, -1], &[1, -1, -1, -1]).unwrap();
        let mut rows = Vec::new();
        for tau in [0.6, 0.85] {
            for enc in [EncodingKind::Tfidf, EncodingKind::Dense] {
                for model in [ModelKind::Mnb, ModelKind::LogReg, ModelKind::Svm, ModelKind::Vote] {
                    rows.push(SweepRow {
                        tau,
                        model,
                        encoding: enc,
                        hyper: "x".into(),
                        metrics: m,
                        n_labeled: 4,
                        n_train: 3,
                        n_test: 1,
                        n_discarded_neutral: 2,
                        per_topic: BTreeMap::from([("news".to_owned(), m)]),
                    });
                }
            }
        }
        SweepResult {
            rows,
            labels: vec![
                LabelSummary { tau: 0.6, counts: LabelCounts { positive: 2, negative: 2, neutral: 2 } },
                LabelSummary { tau: 0.85, counts: LabelCounts { positive: 2, negative: 2, neutral: 2 } },
            ],
        }
    }

    #[test]
    fn arity_empty_skews_and_rerun_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = emit_report(&sweep(), &[], dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(csv.lines().count(), 17);
        assert_eq!(csv.lines().next().unwrap(), METRICS_HEADER);
        assert_eq!(std::fs::read_to_string(dir.path().join("skew.json")).unwrap().trim(), "[]");
        let b = emit_report(&sweep(), &[], dir.path()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn six_decimal_formatting() {
        assert_eq!(fmt6(2.0 / 3.0), "0.666667");
        assert_eq!(fmt6(0.85), "0.850000");
    }
}
