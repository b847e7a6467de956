//! FNC score, accuracy, per-class and macro F1, confusion matrices, the two
//! naive reference predictors, and report rendering.
//!
//! Every metric is derived from one 4×4 confusion matrix (rows gold, columns
//! predicted, classes in [`StanceLabel::ALL`] order).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, StanceLabel};
use crate::error::{Error, Result};
use crate::exec::Execution;

const CONFUSION_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn get(&self, gold: StanceLabel, pred: StanceLabel) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn gold_counts(&self) -> [u64; 4] {
        self.counts.map(|row| row.iter().sum())
    }

    pub fn pred_counts(&self) -> [u64; 4] {
        std::array::from_fn(|p| (0..4).map(|g| self.counts[g][p]).sum())
    }

    pub fn correct(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    /// F1 of one class; 0 when the class has no true positives.
    pub fn class_f1(&self, label: StanceLabel) -> f64 {
        let i = label.index();
        let tp = self.counts[i][i] as f64;
        if tp == 0.0 {
            return 0.0;
        }
        let precision = tp / self.pred_counts()[i] as f64;
        let recall = tp / self.gold_counts()[i] as f64;
        2.0 * precision * recall / (precision + recall)
    }

    pub fn fnc_score(&self) -> f64 {
        let mut achieved = 0.0;
        let mut maximum = 0.0;
        for gold in StanceLabel::ALL {
            for pred in StanceLabel::ALL {
                let n = self.get(gold, pred) as f64;
                if gold.is_related() == pred.is_related() {
                    achieved += 0.25 * n;
                }
                if gold.is_related() && gold == pred {
                    achieved += 0.75 * n;
                }
                maximum += if gold.is_related() { n } else { 0.25 * n };
            }
        }
        if maximum == 0.0 {
            0.0
        } else {
            achieved / maximum
        }
    }
}

fn check(gold: &[StanceLabel], pred: &[StanceLabel]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::Empty("no labels to evaluate".into()));
    }
    Ok(())
}

pub fn confusion(gold: &[StanceLabel], pred: &[StanceLabel]) -> Result<ConfusionMatrix> {
    check(gold, pred)?;
    let mut m = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(pred) {
        m.counts[g.index()][p.index()] += 1;
    }
    Ok(m)
}

/// [`confusion`] with fixed-size chunks counted under `exec` and summed.
pub fn confusion_with(gold: &[StanceLabel], pred: &[StanceLabel], exec: Execution) -> Result<ConfusionMatrix> {
    check(gold, pred)?;
    let n_chunks = gold.len().div_ceil(CONFUSION_CHUNK);
    let parts = exec.map_range(n_chunks, |c| {
        let lo = c * CONFUSION_CHUNK;
        let hi = (lo + CONFUSION_CHUNK).min(gold.len());
        let mut m = ConfusionMatrix::default();
        for (g, p) in gold[lo..hi].iter().zip(&pred[lo..hi]) {
            m.counts[g.index()][p.index()] += 1;
        }
        m
    });
    let mut total = ConfusionMatrix::default();
    for m in parts {
        for (row, part) in total.counts.iter_mut().zip(m.counts) {
            for (t, c) in row.iter_mut().zip(part) {
                *t += c;
            }
        }
    }
    Ok(total)
}

/// Achieved over maximum achievable points.
pub fn fnc_score(gold: &[StanceLabel], pred: &[StanceLabel]) -> Result<f64> {
    Ok(confusion(gold, pred)?.fnc_score())
}

pub fn accuracy(gold: &[StanceLabel], pred: &[StanceLabel]) -> Result<f64> {
    let m = confusion(gold, pred)?;
    Ok(m.correct() as f64 / m.total() as f64)
}

pub fn class_f1(gold: &[StanceLabel], pred: &[StanceLabel], label: StanceLabel) -> Result<f64> {
    Ok(confusion(gold, pred)?.class_f1(label))
}

/// Unweighted mean over all four classes; absent classes count as 0.
pub fn macro_f1(gold: &[StanceLabel], pred: &[StanceLabel]) -> Result<f64> {
    Ok(evaluate(gold, pred)?.macro_f1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: u64,
    pub accuracy: f64,
    pub fnc_score: f64,
    pub per_class_f1: [f64; 4],
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let per_class_f1 = StanceLabel::ALL.map(|l| confusion.class_f1(l));
        let n = confusion.total();
        EvalReport {
            n,
            accuracy: if n == 0 { 0.0 } else { confusion.correct() as f64 / n as f64 },
            fnc_score: confusion.fnc_score(),
            macro_f1: per_class_f1.iter().sum::<f64>() / 4.0,
            per_class_f1,
            confusion,
        }
    }

    pub fn f1(&self, label: StanceLabel) -> f64 {
        self.per_class_f1[label.index()]
    }
}

pub fn evaluate(gold: &[StanceLabel], pred: &[StanceLabel]) -> Result<EvalReport> {
    Ok(EvalReport::from_confusion(confusion(gold, pred)?))
}

pub fn evaluate_with(gold: &[StanceLabel], pred: &[StanceLabel], exec: Execution) -> Result<EvalReport> {
    Ok(EvalReport::from_confusion(confusion_with(gold, pred, exec)?))
}

/// Oracle related/unrelated decision, `discuss` for every related pair.
pub fn oracle_discuss_predictions(gold: &[StanceLabel]) -> Vec<StanceLabel> {
    oracle_with(gold, StanceLabel::Discuss)
}

/// Oracle related/unrelated decision, `disagree` for every related pair.
pub fn oracle_disagree_predictions(gold: &[StanceLabel]) -> Vec<StanceLabel> {
    oracle_with(gold, StanceLabel::Disagree)
}

fn oracle_with(gold: &[StanceLabel], related: StanceLabel) -> Vec<StanceLabel> {
    gold.iter()
        .map(|g| if g.is_related() { related } else { StanceLabel::Unrelated })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBaselines {
    /// Always `discuss` on related pairs.
    pub always_discuss: EvalReport,
    /// Always `disagree` on related pairs.
    pub always_disagree: EvalReport,
}

pub fn naive_baselines(test: &Corpus) -> Result<NaiveBaselines> {
    let gold = test.labels();
    Ok(NaiveBaselines {
        always_discuss: evaluate(&gold, &oracle_discuss_predictions(&gold))?,
        always_disagree: evaluate(&gold, &oracle_disagree_predictions(&gold))?,
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Human-readable table: Accuracy, FNC score, F1 macro, then per-class F1,
/// all as percentages.
pub fn render_report_text(title: &str, report: &EvalReport) -> String {
    let mut rows: Vec<(String, String)> = vec![
        ("Accuracy".into(), pct(report.accuracy)),
        ("FNC score".into(), pct(report.fnc_score)),
        ("F1 macro".into(), pct(report.macro_f1)),
    ];
    for l in StanceLabel::ALL {
        rows.push((format!("F1 {l}"), pct(report.f1(l))));
    }
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let mut out = format!("{title} (n = {})\n", report.n);
    for (name, value) in rows {
        let _ = writeln!(out, "  {name:<width$}  {value:>6}");
    }
    out
}

/// One JSON record per metric.
pub fn render_report_jsonl(run: &str, report: &EvalReport) -> String {
    let mut records = vec![
        ("n", report.n as f64),
        ("accuracy", report.accuracy),
        ("fnc_score", report.fnc_score),
        ("macro_f1", report.macro_f1),
    ];
    let names = StanceLabel::ALL.map(|l| format!("f1_{l}"));
    for (l, name) in StanceLabel::ALL.iter().zip(&names) {
        records.push((name.as_str(), report.f1(*l)));
    }
    let mut out = String::new();
    for (metric, value) in records {
        let rec = serde_json::json!({"run": run, "metric": metric, "value": value});
        let _ = writeln!(out, "{rec}");
    }
    out
}

pub fn render_confusion(m: &ConfusionMatrix) -> String {
    let names = StanceLabel::ALL.map(|l| l.as_str());
    let width = m
        .counts
        .iter()
        .flatten()
        .map(|c| c.to_string().len())
        .chain(names.iter().map(|n| n.len()))
        .max()
        .unwrap_or(1);
    let mut out = format!("{:<width$}", "gold\\pred");
    for n in names {
        let _ = write!(out, "  {n:>width$}");
    }
    out.push('\n');
    for (g, row) in m.counts.iter().enumerate() {
        let _ = write!(out, "{:<width$}", names[g]);
        for c in row {
            let _ = write!(out, "  {c:>width$}");
        }
        out.push('\n');
    }
    out
}
