//! Frozen linear classifier with a trainable per-feature affine adapter.
//!
//! `logits(x) = W (gamma * x + beta) + b`. Only `gamma` and `beta` move during
//! adaptation; `W` and `b` stay fixed once pretraining is done.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Label, LabelVector};
use crate::matrix::{argmax, FeatureMatrix, Matrix, ProbMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterModel {
    /// `K x D` classifier weights, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub k: usize,
    pub d: usize,
}

impl AdapterModel {
    /// Identity adapter over the given classifier.
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        let (k, d) = weights.shape();
        if k == 0 || d == 0 {
            return Err(Error::EmptyMatrix { rows: k, cols: d });
        }
        if bias.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: bias.len() });
        }
        Ok(Self {
            weights: weights.into_vec(),
            bias,
            gamma: vec![1.0; d],
            beta: vec![0.0; d],
            k,
            d,
        })
    }

    pub fn zeros(k: usize, d: usize) -> Result<Self> {
        Self::new(Matrix::zeros(k, d), vec![0.0; k])
    }

    /// Check internal shape consistency, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.k * self.d, self.weights.len()),
            (self.k, self.bias.len()),
            (self.d, self.gamma.len()),
            (self.d, self.beta.len()),
        ];
        for (expected, found) in checks {
            if expected != found {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        if self.k == 0 || self.d == 0 {
            return Err(Error::EmptyMatrix { rows: self.k, cols: self.d });
        }
        let all = [&self.weights, &self.bias, &self.gamma, &self.beta];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidConfig("model parameters must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn weight_row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.d..(class + 1) * self.d]
    }

    pub(crate) fn check_dim(&self, features: &FeatureMatrix) -> Result<()> {
        if features.d() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: features.d() });
        }
        Ok(())
    }

    /// Adapted feature `gamma * x + beta`.
    #[inline]
    pub fn embed_row(&self, x: &[f64], out: &mut [f64]) {
        for (((o, &xi), &g), &b) in out.iter_mut().zip(x).zip(&self.gamma).zip(&self.beta) {
            *o = g * xi + b;
        }
    }

    #[inline]
    pub fn logits_from_embedding(&self, h: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.bias[c] + crate::matrix::dot(self.weight_row(c), h);
        }
    }

    /// Softmax probabilities for one raw feature row; returns the embedding in
    /// `h` as a by-product.
    pub fn forward_row(&self, x: &[f64], h: &mut [f64], probs: &mut [f64]) {
        self.embed_row(x, h);
        self.logits_from_embedding(h, probs);
        softmax_in_place(probs);
    }

    pub fn embed(&self, features: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_dim(features)?;
        let mut out = Matrix::zeros(features.n(), self.d);
        for i in 0..features.n() {
            self.embed_row(features.row(i), out.row_mut(i));
        }
        FeatureMatrix::new(out)
    }

    pub fn predict_proba(&self, features: &FeatureMatrix) -> Result<ProbMatrix> {
        Ok(self.forward(features)?.0)
    }

    /// Probabilities and adapted embeddings in one pass.
    pub fn forward(&self, features: &FeatureMatrix) -> Result<(ProbMatrix, FeatureMatrix)> {
        self.check_dim(features)?;
        let n = features.n();
        let mut probs = Matrix::zeros(n, self.k);
        let mut emb = Matrix::zeros(n, self.d);
        for i in 0..n {
            let mut p = vec![0.0; self.k];
            self.forward_row(features.row(i), emb.row_mut(i), &mut p);
            probs.row_mut(i).copy_from_slice(&p);
        }
        Ok((ProbMatrix::new(probs)?, FeatureMatrix::new(emb)?))
    }

    /// Hard predictions on clean features.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<LabelVector> {
        let probs = self.predict_proba(features)?;
        let labels = (0..probs.n()).map(|i| Label::from(argmax(probs.row(i)))).collect();
        LabelVector::new(labels, self.k)
    }

    /// Fingerprint of the frozen parameters `(W, b)`.
    pub fn frozen_fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        (self.k, self.d).hash(&mut hasher);
        for v in self.weights.iter().chain(&self.bias) {
            v.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }

    pub(crate) fn frozen_equal(&self, other: &AdapterModel) -> bool {
        self.k == other.k && self.d == other.d && self.weights == other.weights && self.bias == other.bias
    }
}

/// Numerically stable softmax.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// `log softmax(z)[target]`.
pub fn log_softmax_at(z: &[f64], target: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z[target] - lse
}
