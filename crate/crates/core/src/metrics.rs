//! Classification metrics: confusion matrix, per-class precision / recall /
//! F1, accuracy, macro and weighted averages, ROC/AUC and PR/AP.
//!
//! Binary reports treat class 1 (pedestrian in the two-class setup) as the
//! positive class.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if c == 0 || counts.iter().any(|r| r.len() != c) {
            return Err(Error::Shape("confusion matrix must be square and non-empty".into()));
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        for label in [t, p] {
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
        }
        counts[t][p] += 1;
    }
    ConfusionMatrix::from_counts(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when any of the three ratios had a zero denominator (reported as 0).
    pub zero_division: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Pr,
}

/// ROC: x = FPR, y = TPR. PR: x = recall, y = precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub kind: CurveKind,
    pub points: Vec<(f64, f64)>,
    /// Score threshold of each point (`inf` for the starting point).
    pub thresholds: Vec<f64>,
}

impl Curve {
    /// `threshold,x,y` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,x,y\n");
        for (t, (x, y)) in self.thresholds.iter().zip(&self.points) {
            let _ = writeln!(s, "{t},{x},{y}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub auc: Option<f64>,
    pub ap: Option<f64>,
    pub confusion: ConfusionMatrix,
    /// Curves are exported as CSV, not with the report.
    #[serde(skip)]
    pub roc: Option<Curve>,
    #[serde(skip)]
    pub pr: Option<Curve>,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and averaged metrics from a confusion matrix. Curve fields are
/// left empty.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<EvalReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Shape("empty confusion matrix".into()));
    }
    let per_class: Vec<ClassMetrics> = (0..cm.classes())
        .map(|c| {
            let tp = cm.counts[c][c];
            let mut zero_division = false;
            let precision = ratio(tp, cm.predicted(c), &mut zero_division);
            let recall = ratio(tp, cm.support(c), &mut zero_division);
            let f1 = if precision + recall == 0.0 {
                zero_division = true;
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support: cm.support(c),
                zero_division,
            }
        })
        .collect();
    let n = per_class.len() as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / n,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / n,
        support: total,
    };
    let w = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };
    let weighted_avg = Averages {
        precision: w(|m| m.precision),
        recall: w(|m| m.recall),
        f1: w(|m| m.f1),
        support: total,
    };
    Ok(EvalReport {
        class_names: (0..cm.classes()).map(|c| format!("class{c}")).collect(),
        per_class,
        accuracy: cm.trace() as f64 / total as f64,
        macro_avg,
        weighted_avg,
        auc: None,
        ap: None,
        confusion: cm.clone(),
        roc: None,
        pr: None,
    })
}

/// Descending-score groups of `(positives, negatives, score)`, equal scores merged.
fn score_groups(scores: &[f64], positive: &[bool]) -> Result<Vec<(u64, u64, f64)>> {
    if scores.len() != positive.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(u64, u64, f64)> = Vec::new();
    for i in order {
        let s = scores[i];
        match groups.last_mut() {
            Some(g) if g.2 == s => {}
            _ => groups.push((0, 0, s)),
        }
        let g = groups.last_mut().unwrap();
        if positive[i] {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    Ok(groups)
}

/// ROC curve over distinct thresholds and its trapezoidal area.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<(Curve, f64)> {
    let groups = score_groups(scores, positive)?;
    let p: u64 = groups.iter().map(|g| g.0).sum();
    let n: u64 = groups.iter().map(|g| g.1).sum();
    if p == 0 || n == 0 {
        return Err(Error::Shape("ROC needs both positive and negative samples".into()));
    }
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in count units: Σ ΔFP · (TP_prev + TP).
    let mut area2 = 0u128;
    for &(gp, gn, s) in &groups {
        area2 += gn as u128 * (2 * tp as u128 + gp as u128);
        tp += gp;
        fp += gn;
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
        thresholds.push(s);
    }
    let auc = area2 as f64 / (2.0 * p as f64 * n as f64);
    Ok((
        Curve {
            kind: CurveKind::Roc,
            points,
            thresholds,
        },
        auc,
    ))
}

/// PR curve and step-wise average precision `AP = Σ (R_n − R_{n−1}) · P_n`
/// over descending distinct thresholds.
pub fn pr_ap(scores: &[f64], positive: &[bool]) -> Result<(Curve, f64)> {
    let groups = score_groups(scores, positive)?;
    let p: u64 = groups.iter().map(|g| g.0).sum();
    if p == 0 {
        return Err(Error::Shape("average precision needs at least one positive".into()));
    }
    let mut points = vec![(0.0, 1.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &(gp, gn, s) in &groups {
        tp += gp;
        fp += gn;
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / p as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push((recall, precision));
        thresholds.push(s);
    }
    Ok((
        Curve {
            kind: CurveKind::Pr,
            points,
            thresholds,
        },
        ap,
    ))
}

/// One-vs-rest AUC per class from per-sample probability rows. Classes absent
/// (or universal) in `labels` yield `None`.
pub fn roc_auc_ovr(probs: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<Vec<Option<f64>>> {
    (0..classes)
        .map(|c| {
            let scores: Vec<f64> = probs.iter().map(|row| row[c]).collect();
            let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            if pos.iter().all(|&b| b) || !pos.iter().any(|&b| b) {
                Ok(None)
            } else {
                roc_auc(&scores, &pos).map(|(_, a)| Some(a))
            }
        })
        .collect()
}

/// Full report from predicted probabilities; curves use `positive_class`.
pub fn evaluate(
    probs: &[Vec<f64>],
    labels: &[usize],
    class_names: &[String],
    positive_class: usize,
) -> Result<EvalReport> {
    let classes = class_names.len();
    let predicted: Vec<usize> = probs.iter().map(|row| argmax(row)).collect();
    let cm = confusion(labels, &predicted, classes)?;
    let mut report = classification_report(&cm)?;
    report.class_names = class_names.to_vec();
    let scores: Vec<f64> = probs.iter().map(|row| row[positive_class]).collect();
    let pos: Vec<bool> = labels.iter().map(|&l| l == positive_class).collect();
    if pos.iter().any(|&b| b) {
        if pos.iter().any(|&b| !b) {
            let (roc, auc) = roc_auc(&scores, &pos)?;
            report.roc = Some(roc);
            report.auc = Some(auc);
        }
        let (pr, ap) = pr_ap(&scores, &pos)?;
        report.pr = Some(pr);
        report.ap = Some(ap);
    }
    Ok(report)
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

impl EvalReport {
    /// Text table with one row per class followed by accuracy and averages.
    pub fn to_table(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .chain([12])
            .max()
            .unwrap();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>6}  {:>8}  {:>7}",
            "Class", "Precision", "Recall", "F1-Score", "Support"
        );
        for (name, m) in self.class_names.iter().zip(&self.per_class) {
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.2}  {:>6.2}  {:>8.2}  {:>7}{}",
                name,
                m.precision,
                m.recall,
                m.f1,
                m.support,
                if m.zero_division { "  (zero division)" } else { "" }
            );
        }
        let total = self.confusion.total();
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>6}  {:>8.2}  {:>7}",
            "Accuracy", "", "", self.accuracy, total
        );
        for (name, a) in [("Macro Avg", &self.macro_avg), ("Weighted Avg", &self.weighted_avg)] {
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.2}  {:>6.2}  {:>8.2}  {:>7}",
                name, a.precision, a.recall, a.f1, a.support
            );
        }
        if let Some(auc) = self.auc {
            let _ = writeln!(s, "AUC {auc:.4}");
        }
        if let Some(ap) = self.ap {
            let _ = writeln!(s, "AP  {ap:.4}");
        }
        s
    }
}
