//! Classification metrics, ROC analysis and coefficient-based feature ranking.
//! Malware is always the positive class.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LinearModel;
use crate::trace::Label;
use crate::vectorizer::Vocabulary;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// The same counts with benign treated as the positive class.
    pub fn flipped(&self) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b || a == 0 {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

pub fn confusion(predictions: &[Label], truths: &[Label]) -> Result<ConfusionCounts> {
    check_lengths(predictions.len(), truths.len())?;
    let mut c = ConfusionCounts::default();
    for (p, t) in predictions.iter().zip(truths) {
        match (p, t) {
            (Label::Malicious, Label::Malicious) => c.tp += 1,
            (Label::Malicious, Label::Benign) => c.fp += 1,
            (Label::Benign, Label::Benign) => c.tn += 1,
            (Label::Benign, Label::Malicious) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn precision(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn f1(ps: f64, rs: f64) -> f64 {
    if ps + rs == 0.0 {
        0.0
    } else {
        2.0 * ps * rs / (ps + rs)
    }
}

/// F1 with malware as the positive class.
pub fn f1_score(predictions: &[Label], truths: &[Label]) -> Result<f64> {
    let c = confusion(predictions, truths)?;
    Ok(f1(precision(&c), recall(&c)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl ClassScores {
    fn from_counts(c: &ConfusionCounts) -> Self {
        let (p, r) = (precision(c), recall(c));
        ClassScores {
            precision: p,
            recall: r,
            f1: f1(p, r),
            support: c.tp + c.fn_,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Averaging {
    /// Mean of per-class scores weighted by class support.
    #[default]
    Weighted,
    /// Unweighted mean of per-class scores.
    Macro,
}

/// Per-class and averaged scores, laid out like a classic
/// "Benign / Malware / Average-Total" table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub benign: ClassScores,
    pub malware: ClassScores,
    pub average: ClassScores,
    pub confusion: ConfusionCounts,
    pub accuracy: f64,
    pub train_seconds: Option<f64>,
    pub test_seconds: Option<f64>,
}

pub fn classification_report(predictions: &[Label], truths: &[Label]) -> Result<EvaluationReport> {
    classification_report_with(predictions, truths, Averaging::Weighted)
}

pub fn classification_report_with(
    predictions: &[Label],
    truths: &[Label],
    averaging: Averaging,
) -> Result<EvaluationReport> {
    let c = confusion(predictions, truths)?;
    let malware = ClassScores::from_counts(&c);
    let benign = ClassScores::from_counts(&c.flipped());
    let total = benign.support + malware.support;
    let avg = |f: fn(&ClassScores) -> f64| match averaging {
        Averaging::Weighted => {
            (f(&benign) * benign.support as f64 + f(&malware) * malware.support as f64)
                / total as f64
        }
        Averaging::Macro => (f(&benign) + f(&malware)) / 2.0,
    };
    let average = ClassScores {
        precision: avg(|s| s.precision),
        recall: avg(|s| s.recall),
        f1: avg(|s| s.f1),
        support: total,
    };
    Ok(EvaluationReport {
        benign,
        malware,
        average,
        accuracy: c.accuracy(),
        confusion: c,
        train_seconds: None,
        test_seconds: None,
    })
}

impl EvaluationReport {
    fn rows(&self) -> [(&'static str, &ClassScores); 3] {
        [
            ("Benign", &self.benign),
            ("Malware", &self.malware),
            ("Average/Total", &self.average),
        ]
    }

    /// Plain-text table. Timing lines are appended only when requested.
    pub fn render_table(&self, include_timing: bool) -> String {
        let mut out = format!(
            "{:<15}{:>10}{:>8}{:>10}{:>9}\n",
            "", "Precision", "Recall", "F1-Score", "Support"
        );
        for (name, s) in self.rows() {
            let _ = writeln!(
                out,
                "{:<15}{:>10.2}{:>8.2}{:>10.2}{:>9}",
                name, s.precision, s.recall, s.f1, s.support
            );
        }
        let c = &self.confusion;
        let _ = writeln!(
            out,
            "\naccuracy {:.4}  tp {}  fp {}  tn {}  fn {}",
            self.accuracy, c.tp, c.fp, c.tn, c.fn_
        );
        if include_timing {
            if let Some(t) = self.train_seconds {
                let _ = writeln!(out, "training time {t:.3}s");
            }
            if let Some(t) = self.test_seconds {
                let _ = writeln!(out, "testing time {t:.3}s");
            }
        }
        out
    }

    /// CSV with header `class,precision,recall,f1,support`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1,support\n");
        for (name, s) in self.rows() {
            let name = match name {
                "Average/Total" => "average",
                "Benign" => "benign",
                _ => "malware",
            };
            let _ = writeln!(out, "{name},{},{},{},{}", s.precision, s.recall, s.f1, s.support);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocCurve {
    /// Descending threshold order, from `(0, 0)` at `+∞` to `(1, 1)`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve over the observed scores. A sample is predicted malicious at
/// threshold `θ` when its score is `≥ θ`; tied scores form one point.
pub fn roc_curve(scores: &[f64], truths: &[Label]) -> Result<RocCurve> {
    check_lengths(scores.len(), truths.len())?;
    let pos = truths.iter().filter(|t| **t == Label::Malicious).count();
    let neg = truths.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // counts kept as integers so the area is exact up to one final division
    let mut counts: Vec<(u64, u64, f64)> = vec![(0, 0, f64::INFINITY)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut k = 0;
    while k < order.len() {
        let theta = scores[order[k]];
        while k < order.len() && scores[order[k]] == theta {
            match truths[order[k]] {
                Label::Malicious => tp += 1,
                Label::Benign => fp += 1,
            }
            k += 1;
        }
        counts.push((tp, fp, theta));
    }

    let twice_area: u64 = counts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) * (w[1].0 + w[0].0))
        .sum();
    let (p, n) = (pos as u64, neg as u64);
    let auc = twice_area as f64 / (2 * p * n) as f64;

    let points = counts
        .into_iter()
        .map(|(tp, fp, threshold)| RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold,
        })
        .collect();
    Ok(RocCurve { points, auc })
}

impl RocCurve {
    /// CSV `threshold,fpr,tpr` with a trailing `auc,<value>` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        let _ = writeln!(out, "auc,{}", self.auc);
        out
    }
}

/// The `k` features with the largest signed coefficients, descending.
/// Ties keep vocabulary order.
pub fn top_features(model: &LinearModel, vocab: &Vocabulary, k: usize) -> Result<Vec<(f64, String)>> {
    if model.dim() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            found: model.dim(),
        });
    }
    let mut idx: Vec<usize> = (0..model.dim()).collect();
    idx.sort_by(|&a, &b| model.weights[b].total_cmp(&model.weights[a]).then(a.cmp(&b)));
    Ok(idx
        .into_iter()
        .take(k)
        .map(|i| (model.weights[i], vocab.keys()[i].clone()))
        .collect())
}
