//! Class labels with an explicit IGNORE state, and class priors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of a [`ClassPrior`].
pub const PRIOR_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Class(u32),
    Ignore,
}

impl Label {
    pub fn class(self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(c as usize),
            Label::Ignore => None,
        }
    }

    pub fn is_ignore(self) -> bool {
        matches!(self, Label::Ignore)
    }
}

impl From<usize> for Label {
    fn from(c: usize) -> Self {
        Label::Class(c as u32)
    }
}

/// `N` labels over `{0..k-1}` plus IGNORE.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector {
    labels: Vec<Label>,
    k: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<Label>, k: usize) -> Result<Self> {
        for (index, l) in labels.iter().enumerate() {
            if let Label::Class(c) = *l {
                if c as usize >= k {
                    return Err(Error::LabelOutOfRange { index, label: c, k });
                }
            }
        }
        Ok(Self { labels, k })
    }

    /// Labels without IGNORE entries.
    pub fn from_classes(classes: &[usize], k: usize) -> Result<Self> {
        Self::new(classes.iter().map(|&c| Label::from(c)).collect(), k)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.labels
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Label> + '_ {
        self.labels.iter().copied()
    }

    pub fn select(&self, indices: &[usize]) -> LabelVector {
        LabelVector { labels: indices.iter().map(|&i| self.labels[i]).collect(), k: self.k }
    }

    pub fn ignored_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_ignore()).count()
    }

    /// Per-class counts, IGNORE excluded.
    pub fn histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for c in self.labels.iter().filter_map(|l| l.class()) {
            counts[c] += 1;
        }
        counts
    }
}

/// Global class prior `c` with its active-class mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrior {
    weights: Vec<f64>,
    active: Vec<bool>,
}

impl ClassPrior {
    /// Normalize nonnegative weights; zero-weight classes become inactive.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPrior("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidPrior(format!("weight {w} is negative or non-finite")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllCountsZero);
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let active = weights.iter().map(|&w| w > 0.0).collect();
        Ok(Self { weights, active })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_range_checked() {
        assert!(LabelVector::new(vec![Label::Class(0), Label::Ignore, Label::Class(2)], 3).is_ok());
        assert_eq!(
            LabelVector::new(vec![Label::Class(5)], 3),
            Err(Error::LabelOutOfRange { index: 0, label: 5, k: 3 })
        );
    }

    #[test]
    fn histogram_skips_ignore() {
        let y = LabelVector::new(vec![Label::Class(1), Label::Ignore, Label::Class(1)], 3).unwrap();
        assert_eq!(y.histogram(), vec![0, 2, 0]);
        assert_eq!(y.ignored_count(), 1);
    }

    #[test]
    fn prior_normalizes_and_masks() {
        let c = ClassPrior::from_weights(&[3.0, 1.0, 0.0]).unwrap();
        assert_eq!(c.weights(), &[0.75, 0.25, 0.0]);
        assert_eq!(c.active(), &[true, true, false]);
        assert!((c.weights().iter().sum::<f64>() - 1.0).abs() < PRIOR_SUM_TOL);
        assert_eq!(ClassPrior::from_weights(&[0.0, 0.0]), Err(Error::AllCountsZero));
        assert!(ClassPrior::from_weights(&[-1.0, 2.0]).is_err());
    }
}
