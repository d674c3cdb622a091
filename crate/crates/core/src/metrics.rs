//! Confusion matrices, derived rates, support-weighted averages and ROC/AUC.
//!
//! Derived metrics are percentages. A metric whose denominator is zero is
//! `None` rather than a silent zero.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The same counts seen with the other class as positive.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    /// Support of the positive class.
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

/// Counts predicted vs true classes with `positive` as the positive class.
pub fn confusion(predictions: &[usize], labels: &[usize], positive: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "predictions vs labels",
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p == positive, l == positive) {
            (true, true) => cm.tp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Percentages in `[0, 100]`; `None` marks an undefined ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    /// Also called sensitivity.
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
}

impl Metrics {
    /// Values in report column order: accuracy, precision, sensitivity, F1, specificity.
    pub fn columns(&self) -> [Option<f64>; 5] {
        [self.accuracy, self.precision, self.recall, self.f1, self.specificity]
    }

    pub fn undefined_count(&self) -> usize {
        self.columns().iter().filter(|v| v.is_none()).count()
    }
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Accuracy `(TP+TN)/total`, precision, recall, specificity `TN/(TN+FP)` and F1.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let precision = pct(cm.tp, cm.tp + cm.fp);
    let recall = pct(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Metrics {
        accuracy: pct(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        specificity: pct(cm.tn, cm.tn + cm.fp),
        f1,
    }
}

/// Metrics with each class in turn taken as positive, indexed by class.
pub fn per_class_metrics(cm_class1_positive: &ConfusionMatrix) -> [Metrics; 2] {
    [metrics(&cm_class1_positive.swapped()), metrics(cm_class1_positive)]
}

/// Support-weighted mean of each metric over classes.
///
/// Classes with zero support are ignored. A metric is `None` when it is
/// undefined for any class with nonzero support.
pub fn weighted_metrics(per_class: &[Metrics], supports: &[u64]) -> Result<Metrics> {
    if per_class.len() != supports.len() {
        return Err(Error::ShapeMismatch {
            context: "per-class metrics vs supports",
            expected: supports.len(),
            actual: per_class.len(),
        });
    }
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("supports sum to zero".into()));
    }
    let avg = |get: fn(&Metrics) -> Option<f64>| -> Option<f64> {
        let mut acc = 0.0;
        for (m, &s) in per_class.iter().zip(supports) {
            if s > 0 {
                acc += s as f64 * get(m)?;
            }
        }
        Some(acc / total as f64)
    };
    Ok(Metrics {
        accuracy: avg(|m| m.accuracy),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        specificity: avg(|m| m.specificity),
        f1: avg(|m| m.f1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from `(0,0)` to `(1,1)`.
    pub points: Vec<(f64, f64)>,
    /// Threshold reached at each point after the first, descending.
    pub thresholds: Vec<f64>,
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "scores vs labels",
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Threshold sweep over descending scores; tied scores move together.
/// The area is the trapezoid rule over the curve.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::with_capacity(scores.len() + 1);
    let mut thresholds = Vec::new();
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut auc2 = 0u128; // twice the area, scaled by pos * neg
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        auc2 += ((fp - fp0) as u128) * ((tp + tp0) as u128);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        thresholds.push(s);
    }
    let auc = auc2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok((RocCurve { points, thresholds }, auc))
}

/// Probability that a random positive outranks a random negative, ties
/// counted half.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut twice = 0u128;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            twice += match si.partial_cmp(&sj) {
                Some(core::cmp::Ordering::Greater) => 2,
                Some(core::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}
