//! Class-balanced local prototype estimation.
//!
//! Anchors are mined independently inside each predicted class: the top `rho`
//! fraction of a class's candidates by confidence, with no global threshold.
//! A class's prototype is the normalized mean of its anchors' features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::matrix::{l2_norm, FeatureMatrix, Matrix};

/// Slack added before flooring `rho * n` so products such as `0.57 * 100`
/// land on the intended integer.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfig {
    /// Fraction of each class's candidates kept as anchors, in `(0, 1]`.
    pub rho: f64,
    /// Lower bound on anchors for any class with at least one candidate.
    pub min_anchors: usize,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self { rho: 0.8, min_anchors: 1 }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidConfig(format!("rho must be in (0, 1], got {}", self.rho)));
        }
        if self.min_anchors == 0 {
            return Err(Error::InvalidConfig("min_anchors must be positive".into()));
        }
        Ok(())
    }

    /// Number of anchors taken from a class with `candidates` members.
    pub fn anchor_count(&self, candidates: usize) -> usize {
        if candidates == 0 {
            return 0;
        }
        let floor = (self.rho * candidates as f64 + FLOOR_SLACK).floor() as usize;
        floor.max(self.min_anchors).min(candidates)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorSets {
    /// Anchor indices per class, in descending-confidence order.
    pub per_class: Vec<Vec<usize>>,
    pub candidate_counts: Vec<usize>,
}

impl AnchorSets {
    pub fn k(&self) -> usize {
        self.per_class.len()
    }

    pub fn anchor_counts(&self) -> Vec<usize> {
        self.per_class.iter().map(Vec::len).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    /// `K x D`; inactive rows are zero.
    pub mu: Matrix,
    pub active: Vec<bool>,
}

impl PrototypeSet {
    pub fn k(&self) -> usize {
        self.mu.rows()
    }

    pub fn d(&self) -> usize {
        self.mu.cols()
    }
}

/// Partition sample indices by predicted class. IGNORE entries are skipped.
pub fn build_candidate_sets(y_raw: &LabelVector) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); y_raw.k()];
    for (i, label) in y_raw.iter().enumerate() {
        if let Some(c) = label.class() {
            sets[c].push(i);
        }
    }
    sets
}

pub fn mine_anchors(candidates: &[Vec<usize>], confidence: &[f64], cfg: &AnchorConfig) -> Result<AnchorSets> {
    cfg.validate()?;
    let mut per_class = Vec::with_capacity(candidates.len());
    for members in candidates {
        if let Some(&bad) = members.iter().find(|&&i| i >= confidence.len()) {
            return Err(Error::LengthMismatch { left: bad + 1, right: confidence.len() });
        }
        let mut ranked = members.clone();
        // descending confidence, then ascending index
        ranked.sort_unstable_by(|&a, &b| confidence[b].total_cmp(&confidence[a]).then(a.cmp(&b)));
        ranked.truncate(cfg.anchor_count(members.len()));
        per_class.push(ranked);
    }
    Ok(AnchorSets { per_class, candidate_counts: candidates.iter().map(Vec::len).collect() })
}

pub fn aggregate_prototypes(anchors: &AnchorSets, features: &FeatureMatrix) -> Result<PrototypeSet> {
    let (k, d) = (anchors.k(), features.d());
    let mut mu = Matrix::zeros(k, d);
    let mut active = vec![false; k];
    for (class, members) in anchors.per_class.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if let Some(&bad) = members.iter().find(|&&i| i >= features.n()) {
            return Err(Error::LengthMismatch { left: bad + 1, right: features.n() });
        }
        // summation in index order makes the prototype independent of anchor order
        let mut sorted = members.clone();
        sorted.sort_unstable();
        let row = mu.row_mut(class);
        for &i in &sorted {
            for (acc, &x) in row.iter_mut().zip(features.row(i)) {
                *acc += x;
            }
        }
        let count = sorted.len() as f64;
        row.iter_mut().for_each(|v| *v /= count);
        let norm = l2_norm(row);
        if norm < 1e-12 {
            return Err(Error::ZeroMeanVector(class));
        }
        row.iter_mut().for_each(|v| *v /= norm);
        active[class] = true;
    }
    Ok(PrototypeSet { mu, active })
}
