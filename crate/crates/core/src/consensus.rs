//! Local-global dual-consensus filtering.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::labels::{Label, LabelVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    pub y_final: LabelVector,
    pub kept_count: usize,
    pub per_class_kept: Vec<usize>,
    pub consensus_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusStats {
    pub kept_count: usize,
    pub per_class_kept: Vec<usize>,
    pub consensus_rate: f64,
}

impl ConsensusResult {
    pub fn stats(&self) -> ConsensusStats {
        ConsensusStats {
            kept_count: self.kept_count,
            per_class_kept: self.per_class_kept.clone(),
            consensus_rate: self.consensus_rate,
        }
    }
}

/// Keep a label where the ensemble prediction and the transport assignment
/// agree; mark everything else IGNORE. An IGNORE input never agrees.
pub fn dual_consensus_filter(y_raw: &LabelVector, y_sink: &LabelVector) -> Result<ConsensusResult> {
    if y_raw.len() != y_sink.len() {
        return Err(Error::LengthMismatch { left: y_raw.len(), right: y_sink.len() });
    }
    if y_raw.k() != y_sink.k() {
        return Err(Error::ClassCountMismatch { left: y_raw.k(), right: y_sink.k() });
    }
    let mut per_class_kept = vec![0; y_raw.k()];
    let labels: Vec<Label> = y_raw
        .iter()
        .zip(y_sink.iter())
        .map(|(a, b)| match (a, b) {
            (Label::Class(x), Label::Class(y)) if x == y => {
                per_class_kept[x as usize] += 1;
                a
            }
            _ => Label::Ignore,
        })
        .collect();
    let kept_count: usize = per_class_kept.iter().sum();
    let consensus_rate = if labels.is_empty() { 0.0 } else { kept_count as f64 / labels.len() as f64 };
    Ok(ConsensusResult {
        y_final: LabelVector::new(labels, y_raw.k())?,
        kept_count,
        per_class_kept,
        consensus_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(c: &[usize], k: usize) -> LabelVector {
        LabelVector::from_classes(c, k).unwrap()
    }

    #[test]
    fn partial_agreement() {
        let r = dual_consensus_filter(&lv(&[0, 1, 2], 3), &lv(&[0, 2, 2], 3)).unwrap();
        assert_eq!(r.y_final.as_slice(), &[Label::Class(0), Label::Ignore, Label::Class(2)]);
        assert_eq!(r.kept_count, 2);
        assert_eq!(r.per_class_kept, vec![1, 0, 1]);
        assert!((r.consensus_rate - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn full_agreement_and_disagreement() {
        let a = lv(&[0, 1, 1], 2);
        let r = dual_consensus_filter(&a, &a).unwrap();
        assert_eq!(r.y_final, a);
        assert_eq!(r.consensus_rate, 1.0);
        let r = dual_consensus_filter(&a, &lv(&[1, 0, 0], 2)).unwrap();
        assert_eq!(r.y_final.ignored_count(), 3);
        assert_eq!(r.consensus_rate, 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(
            dual_consensus_filter(&lv(&[0], 2), &lv(&[0, 1], 2)),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        );
    }

    proptest! {
        #[test]
        fn symmetric_and_idempotent(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)
        ) {
            let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let ab = dual_consensus_filter(&lv(&a, 4), &lv(&b, 4)).unwrap();
            let ba = dual_consensus_filter(&lv(&b, 4), &lv(&a, 4)).unwrap();
            prop_assert_eq!(&ab, &ba);
            let again = dual_consensus_filter(&ab.y_final, &ab.y_final).unwrap();
            prop_assert_eq!(again.kept_count, ab.kept_count);
            prop_assert_eq!(&again.y_final, &ab.y_final);
            for i in 0..a.len() {
                if let Some(c) = ab.y_final.get(i).class() {
                    prop_assert!(c == a[i] && c == b[i]);
                }
            }
        }
    }
}
