//! Synthetic long-tailed Gaussian-mixture benchmark with controllable domain
//! shift.
//!
//! Source classes are isotropic Gaussians centred on random unit vectors, with
//! class `k` drawn with probability proportional to `tail_decay^k`. The target
//! domain rotates every class mean by a fixed angle inside one random 2-plane,
//! translates it along a random unit direction, and may re-weight the class
//! priors.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::matrix::{dot, l2_norm, FeatureMatrix, Matrix};
use crate::rng::{stream, RngSeed};

/// How target class priors differ from source priors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorShift {
    /// Target priors equal source priors.
    #[default]
    Same,
    /// Target priors in reverse class order.
    Reversed,
    /// Target class `k` weighted by `decay^k`.
    Decay(f64),
    /// Explicit unnormalized target weights.
    Weights(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub k: usize,
    pub d: usize,
    pub n_source: usize,
    pub n_target: usize,
    /// Source class `k` prior is proportional to `tail_decay^k`.
    pub tail_decay: f64,
    pub cluster_sigma: f64,
    /// Rotation of the target means, in radians.
    pub shift_rotation_angle: f64,
    /// Length of the target mean displacement.
    pub shift_translation: f64,
    #[serde(default)]
    pub prior_shift: PriorShift,
    pub seed: RngSeed,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            k: 5,
            d: 8,
            n_source: 5000,
            n_target: 5000,
            tail_decay: 0.5,
            cluster_sigma: 0.2,
            shift_rotation_angle: 0.3,
            shift_translation: 0.5,
            prior_shift: PriorShift::Same,
            seed: RngSeed(7),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k < 2 || self.d < 2 {
            return fail(format!("need k >= 2 and d >= 2, got k={} d={}", self.k, self.d));
        }
        if self.n_source < self.k || self.n_target < self.k {
            return fail("sample counts must be at least k".into());
        }
        if !(self.tail_decay > 0.0 && self.tail_decay <= 1.0) {
            return fail(format!("tail_decay must be in (0, 1], got {}", self.tail_decay));
        }
        if !(self.cluster_sigma >= 0.0 && self.cluster_sigma.is_finite()) {
            return fail("cluster_sigma must be finite and >= 0".into());
        }
        if !self.shift_rotation_angle.is_finite() || !(self.shift_translation >= 0.0 && self.shift_translation.is_finite()) {
            return fail("shift parameters must be finite, translation >= 0".into());
        }
        match &self.prior_shift {
            PriorShift::Decay(r) if !(*r > 0.0 && r.is_finite()) => fail("prior decay must be positive".into()),
            PriorShift::Weights(w) if w.len() != self.k => fail("prior weights must have k entries".into()),
            PriorShift::Weights(w) if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) => {
                fail("prior weights must be positive".into())
            }
            _ => Ok(()),
        }
    }

    pub fn source_priors(&self) -> Vec<f64> {
        normalize((0..self.k).map(|c| self.tail_decay.powi(c as i32)).collect())
    }

    pub fn target_priors(&self) -> Vec<f64> {
        let source = self.source_priors();
        match &self.prior_shift {
            PriorShift::Same => source,
            PriorShift::Reversed => source.into_iter().rev().collect(),
            PriorShift::Decay(r) => normalize((0..self.k).map(|c| r.powi(c as i32)).collect()),
            PriorShift::Weights(w) => normalize(w.clone()),
        }
    }
}

/// Generative parameters of a scenario, echoed next to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetadata {
    pub config: ScenarioConfig,
    pub source_priors: Vec<f64>,
    pub target_priors: Vec<f64>,
    pub source_means: Vec<Vec<f64>>,
    pub target_means: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub source_features: FeatureMatrix,
    pub source_labels: LabelVector,
    pub target_features: FeatureMatrix,
    pub target_labels: LabelVector,
    pub metadata: ScenarioMetadata,
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let (k, d) = (cfg.k, cfg.d);

    let mut mean_rng = cfg.seed.split(stream::MEANS).rng();
    let source_means: Vec<Vec<f64>> = (0..k).map(|_| random_unit(&mut mean_rng, d)).collect();

    // The shift geometry is always drawn so zero-magnitude shifts consume the
    // same stream as nonzero ones.
    let mut shift_rng = cfg.seed.split(stream::SHIFT).rng();
    let u = random_unit(&mut shift_rng, d);
    let v = orthonormal_to(&mut shift_rng, &u);
    let direction = random_unit(&mut shift_rng, d);
    let (sin, cos) = cfg.shift_rotation_angle.sin_cos();
    let target_means: Vec<Vec<f64>> = source_means
        .iter()
        .map(|m| {
            let (pu, pv) = (dot(m, &u), dot(m, &v));
            (0..d)
                .map(|j| {
                    let rotated = m[j] + (cos - 1.0) * (pu * u[j] + pv * v[j]) + sin * (pu * v[j] - pv * u[j]);
                    rotated + cfg.shift_translation * direction[j]
                })
                .collect()
        })
        .collect();

    let source_priors = cfg.source_priors();
    let target_priors = cfg.target_priors();
    let (source_features, source_labels) = sample_mixture(
        &source_means,
        &source_priors,
        cfg.cluster_sigma,
        cfg.n_source,
        cfg.seed.split(stream::SOURCE),
    )?;
    let (target_features, target_labels) = sample_mixture(
        &target_means,
        &target_priors,
        cfg.cluster_sigma,
        cfg.n_target,
        cfg.seed.split(stream::TARGET),
    )?;
    Ok(Scenario {
        source_features,
        source_labels,
        target_features,
        target_labels,
        metadata: ScenarioMetadata {
            config: cfg.clone(),
            source_priors,
            target_priors,
            source_means,
            target_means,
        },
    })
}

/// Registered benchmark presets, in a fixed order.
pub fn default_scenarios() -> Vec<(&'static str, ScenarioConfig)> {
    let base = ScenarioConfig::default();
    vec![
        ("mild-shift", base.clone()),
        (
            "severe-shift",
            ScenarioConfig {
                shift_rotation_angle: 0.7,
                shift_translation: 0.8,
                prior_shift: PriorShift::Decay(0.7),
                seed: RngSeed(11),
                ..base.clone()
            },
        ),
        (
            "long-tail-severe",
            ScenarioConfig {
                tail_decay: 0.4,
                shift_rotation_angle: 0.7,
                shift_translation: 0.8,
                seed: RngSeed(23),
                ..base
            },
        ),
    ]
}

pub fn scenario_by_name(name: &str) -> Option<ScenarioConfig> {
    default_scenarios().into_iter().find(|(n, _)| *n == name).map(|(_, c)| c)
}

fn sample_mixture(
    means: &[Vec<f64>],
    priors: &[f64],
    sigma: f64,
    n: usize,
    seed: RngSeed,
) -> Result<(FeatureMatrix, LabelVector)> {
    let d = means[0].len();
    let mut rng = seed.rng();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = sample_categorical(&mut rng, priors);
        labels.push(class);
        for &m in &means[class] {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(m + sigma * z);
        }
    }
    Ok((FeatureMatrix::new(Matrix::new(n, d, data)?)?, LabelVector::from_classes(&labels, means.len())?))
}

fn sample_categorical<R: Rng>(rng: &mut R, priors: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (c, p) in priors.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    priors.len() - 1
}

fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = l2_norm(&v);
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn orthonormal_to<R: Rng>(rng: &mut R, u: &[f64]) -> Vec<f64> {
    loop {
        let w = random_unit(rng, u.len());
        let p = dot(&w, u);
        let v: Vec<f64> = w.iter().zip(u).map(|(w, u)| w - p * u).collect();
        let norm = l2_norm(&v);
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn normalize(w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}
