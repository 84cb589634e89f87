//! Binary classification report.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionStats {
    pub threshold: Option<f64>,
    pub feature_space_reduction_pct: Option<f64>,
    pub token_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub positive_label: String,
    pub negative_label: String,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub balanced_accuracy: f64,
    pub roc_auc: f64,
    pub support: BTreeMap<String, usize>,
    pub reduction_stats: ReductionStats,
    pub warnings: Vec<String>,
}

fn ratio(num: usize, den: usize, what: &str, warnings: &mut Vec<String>) -> f64 {
    if den == 0 {
        warnings.push(format!("{what} is undefined (no cases); reported as 0"));
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Rank-based ROC AUC with average ranks for ties, which equals the share
/// of positive/negative pairs ordered correctly with ties counted half.
/// `None` when either class is absent.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Option<f64> {
    let n = labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = alloc::vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; tied runs share their mean rank.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let pos = labels.iter().filter(|&&b| b).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let rank_sum: f64 = (0..n).filter(|&k| labels[k]).map(|k| ranks[k]).sum();
    let p = pos as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Per-class precision/recall/F1, macro and support-weighted F1, balanced
/// accuracy and ROC AUC. Undefined ratios are reported as 0 with a warning.
pub fn classification_report(
    truth: &[bool],
    predicted: &[bool],
    scores: &[f64],
    positive: &str,
    negative: &str,
) -> Result<EvaluationReport, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.len() != scores.len() {
        return Err(EvalError::LengthMismatch(truth.len(), scores.len()));
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let mut warnings = Vec::new();
    let mut class = |label: &str, hit: usize, false_alarm: usize, miss: usize| {
        let precision = ratio(hit, hit + false_alarm, &format!("precision of `{label}`"), &mut warnings);
        let recall = ratio(hit, hit + miss, &format!("recall of `{label}`"), &mut warnings);
        ClassMetrics {
            precision,
            recall,
            f1: f1(precision, recall),
            support: hit + miss,
        }
    };
    let pos_m = class(positive, tp, fp, fn_);
    let neg_m = class(negative, tn, fn_, fp);
    let total = truth.len() as f64;
    let macro_f1 = (pos_m.f1 + neg_m.f1) / 2.0;
    let weighted_f1 = (pos_m.f1 * pos_m.support as f64 + neg_m.f1 * neg_m.support as f64) / total;
    let balanced_accuracy = (pos_m.recall + neg_m.recall) / 2.0;
    let roc_auc = roc_auc(truth, scores).unwrap_or_else(|| {
        warnings.push("ROC AUC is undefined with a single class; reported as 0".to_string());
        0.0
    });
    Ok(EvaluationReport {
        model: String::new(),
        positive_label: positive.to_string(),
        negative_label: negative.to_string(),
        per_class: [(positive.to_string(), pos_m), (negative.to_string(), neg_m)].into(),
        macro_f1,
        weighted_f1,
        balanced_accuracy,
        roc_auc,
        support: [(positive.to_string(), pos_m.support), (negative.to_string(), neg_m.support)].into(),
        reduction_stats: ReductionStats::default(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn confusion_fixture() {
        // TP=3, FN=2, FP=1, TN=4
        let truth = [true, true, true, true, true, false, false, false, false, false];
        let pred = [true, true, true, false, false, true, false, false, false, false];
        let r = classification_report(&truth, &pred, &[0.5; 10], "1", "0").unwrap();
        let p = r.per_class["1"];
        assert_abs_diff_eq!(p.precision, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(p.recall, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(p.f1, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.balanced_accuracy, 0.7, epsilon = 1e-12);
        assert_eq!(r.support["1"], 5);
    }

    #[test]
    fn pairwise_auc() {
        let auc = roc_auc(&[true, true, false, false], &[0.9, 0.8, 0.7, 0.8]).unwrap();
        assert_abs_diff_eq!(auc, 0.875, epsilon = 1e-12);
        assert_eq!(roc_auc(&[true, true], &[0.1, 0.2]), None);
    }

    #[test]
    fn perfect() {
        let truth = [true, false, true, false];
        let r = classification_report(&truth, &truth, &[1.0, 0.0, 1.0, 0.0], "y", "n").unwrap();
        for v in [r.macro_f1, r.weighted_f1, r.balanced_accuracy, r.roc_auc] {
            assert_eq!(v, 1.0);
        }
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn zero_denominators_warn() {
        let truth = [false, false];
        let r = classification_report(&truth, &[false, false], &[0.2, 0.1], "y", "n").unwrap();
        assert_eq!(r.per_class["y"].precision, 0.0);
        assert_eq!(r.roc_auc, 0.0);
        assert!(r.warnings.len() >= 3);
    }

    #[test]
    fn lengths() {
        assert_eq!(
            classification_report(&[true], &[true, false], &[0.0], "y", "n"),
            Err(EvalError::LengthMismatch(1, 2))
        );
    }
}
