//! Segmentation metrics: confusion matrix, per-class IoU, mIoU and OA.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::labels::LabelVector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    /// Row = truth, column = prediction.
    counts: Vec<u64>,
    /// IGNORE predictions per true class.
    ignored_by_class: Vec<u64>,
    count_ignored: bool,
    pub n_total: u64,
    pub n_ignored: u64,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: &[Vec<u64>]) -> Self {
        let k = counts.len();
        let flat: Vec<u64> = counts.iter().flat_map(|r| r.iter().copied()).collect();
        assert_eq!(flat.len(), k * k, "confusion counts must be square");
        let n_total = flat.iter().sum();
        Self { k, counts: flat, ignored_by_class: vec![0; k], count_ignored: false, n_total, n_ignored: 0 }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k.max(1)).map(<[u64]>::to_vec).collect()
    }

    /// Add another matrix's counts; both must use the same IGNORE policy.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.k, other.k);
        assert_eq!(self.count_ignored, other.count_ignored);
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.ignored_by_class.iter_mut().zip(&other.ignored_by_class).for_each(|(a, b)| *a += b);
        self.n_total += other.n_total;
        self.n_ignored += other.n_ignored;
    }
}

/// Tally truth against prediction. IGNORE predictions are skipped when
/// `count_ignored` is false, otherwise they count as misses of their true
/// class. Either way they are reported in `n_ignored`.
pub fn confusion(y_true: &LabelVector, y_pred: &LabelVector, count_ignored: bool) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    if y_true.k() != y_pred.k() {
        return Err(Error::ClassCountMismatch { left: y_true.k(), right: y_pred.k() });
    }
    let k = y_true.k();
    let mut cm = ConfusionMatrix {
        k,
        counts: vec![0; k * k],
        ignored_by_class: vec![0; k],
        count_ignored,
        n_total: 0,
        n_ignored: 0,
    };
    for (index, (t, p)) in y_true.iter().zip(y_pred.iter()).enumerate() {
        let t = t.class().ok_or_else(|| Error::InvalidConfig(format!("ground truth at {index} is IGNORE")))?;
        match p.class() {
            Some(p) => {
                cm.counts[t * k + p] += 1;
                cm.n_total += 1;
            }
            None => {
                cm.n_ignored += 1;
                cm.ignored_by_class[t] += 1;
                if count_ignored {
                    cm.n_total += 1;
                }
            }
        }
    }
    Ok(cm)
}

/// `TP / (TP + FP + FN)` per class; `None` where the denominator is zero.
pub fn iou_per_class(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.k)
        .map(|c| {
            let tp = cm.get(c, c);
            let fp: u64 = (0..cm.k).filter(|&t| t != c).map(|t| cm.get(t, c)).sum();
            let mut fn_: u64 = (0..cm.k).filter(|&p| p != c).map(|p| cm.get(c, p)).sum();
            if cm.count_ignored {
                fn_ += cm.ignored_by_class[c];
            }
            let denom = tp + fp + fn_;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect()
}

/// Mean over the defined classes.
pub fn miou(ious: &[Option<f64>]) -> Result<f64> {
    let defined: Vec<f64> = ious.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::NoDefinedClass);
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.n_total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(cm.trace() as f64 / cm.n_total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub overall_accuracy: f64,
    /// Fraction of points with a non-IGNORE prediction.
    pub coverage: f64,
    pub n_evaluated: u64,
    pub n_ignored: u64,
    pub confusion: Vec<Vec<u64>>,
}

pub fn evaluate(y_true: &LabelVector, y_pred: &LabelVector, count_ignored: bool) -> Result<EvaluationReport> {
    let cm = confusion(y_true, y_pred, count_ignored)?;
    let per_class_iou = iou_per_class(&cm);
    let points = y_true.len() as f64;
    Ok(EvaluationReport {
        miou: miou(&per_class_iou)?,
        overall_accuracy: overall_accuracy(&cm)?,
        per_class_iou,
        coverage: if points > 0.0 { (points - cm.n_ignored as f64) / points } else { 0.0 },
        n_evaluated: cm.n_total,
        n_ignored: cm.n_ignored,
        confusion: cm.rows(),
    })
}
