//! Multi-view ensemble inference.
//!
//! Per-view probabilities are averaged into a smoothed distribution, from
//! which the raw label (argmax) and the confidence (max) are read. Per-view
//! features are averaged the same way and then row-normalized.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Label, LabelVector};
use crate::matrix::{argmax, order_free_mean, row_normalize, FeatureMatrix, Matrix, ProbMatrix};
use crate::model::AdapterModel;
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Number of augmented views `V`.
    pub views: usize,
    /// Std-dev of the isotropic Gaussian feature perturbation per view.
    pub augmentation_noise_sigma: f64,
    pub seed: RngSeed,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { views: 4, augmentation_noise_sigma: 0.1, seed: RngSeed(0) }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.views == 0 {
            return Err(Error::InvalidConfig("views must be at least 1".into()));
        }
        if !(self.augmentation_noise_sigma >= 0.0 && self.augmentation_noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("augmentation_noise_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    pub p_bar: ProbMatrix,
    pub y_raw: LabelVector,
    /// Confidence `max_k p_bar[i, k]`.
    pub confidence: Vec<f64>,
    /// View-averaged, row-normalized features.
    pub f_bar: FeatureMatrix,
}

/// Average the views. Sums are taken in sorted order so the result does not
/// depend on the order in which views are supplied.
pub fn aggregate_views(views: &[ProbMatrix], view_features: &[FeatureMatrix]) -> Result<EnsembleOutput> {
    let first = views.first().ok_or(Error::EmptyViewList)?;
    let first_f = view_features.first().ok_or(Error::EmptyViewList)?;
    let (n, k) = (first.n(), first.k());
    let d = first_f.d();
    for v in views {
        if (v.n(), v.k()) != (n, k) {
            return Err(Error::ShapeMismatch { expected: (n, k), found: (v.n(), v.k()) });
        }
    }
    for f in view_features {
        if (f.n(), f.d()) != (n, d) {
            return Err(Error::ShapeMismatch { expected: (n, d), found: (f.n(), f.d()) });
        }
    }

    let mut p_bar = Matrix::zeros(n, k);
    let mut buf = vec![0.0; views.len().max(view_features.len())];
    for i in 0..n {
        for j in 0..k {
            let vals = &mut buf[..views.len()];
            for (slot, v) in vals.iter_mut().zip(views) {
                *slot = v.row(i)[j];
            }
            p_bar.set(i, j, order_free_mean(vals));
        }
    }

    let mut f_mean = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let vals = &mut buf[..view_features.len()];
            for (slot, f) in vals.iter_mut().zip(view_features) {
                *slot = f.row(i)[j];
            }
            f_mean.set(i, j, order_free_mean(vals));
        }
    }
    let f_bar = row_normalize(&FeatureMatrix::new(f_mean)?)?;

    let mut y_raw = Vec::with_capacity(n);
    let mut confidence = Vec::with_capacity(n);
    for row in p_bar.iter_rows() {
        let best = argmax(row);
        y_raw.push(Label::from(best));
        confidence.push(row[best]);
    }

    Ok(EnsembleOutput {
        p_bar: ProbMatrix::new(p_bar)?,
        y_raw: LabelVector::new(y_raw, k)?,
        confidence,
        f_bar,
    })
}

/// Run `model` on `V` perturbed copies of `features`; view `v` draws its noise
/// from `cfg.seed.split(v)`.
pub fn run_ensemble(model: &AdapterModel, features: &FeatureMatrix, cfg: &EnsembleConfig) -> Result<EnsembleOutput> {
    cfg.validate()?;
    model.check_dim(features)?;
    let mut probs = Vec::with_capacity(cfg.views);
    let mut feats = Vec::with_capacity(cfg.views);
    for v in 0..cfg.views {
        let input = perturb(features, cfg.augmentation_noise_sigma, cfg.seed.split(v as u64))?;
        let (p, f) = model.forward(&input)?;
        probs.push(p);
        feats.push(f);
    }
    aggregate_views(&probs, &feats)
}

fn perturb(features: &FeatureMatrix, sigma: f64, seed: RngSeed) -> Result<FeatureMatrix> {
    if sigma == 0.0 {
        return Ok(features.clone());
    }
    let mut rng = seed.rng();
    let data = features
        .matrix()
        .as_slice()
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x + sigma * z
        })
        .collect();
    FeatureMatrix::new(Matrix::new(features.n(), features.d(), data)?)
}
