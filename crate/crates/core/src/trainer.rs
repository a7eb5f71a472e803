//! Offline mean-teacher self-training over the affine adapter.
//!
//! Each epoch the teacher labels the whole target set (ensemble inference,
//! prototype estimation, transport assignment, consensus filtering). The
//! student then takes `steps_per_epoch` gradient steps on the kept labels, and
//! after every step the teacher's adapter moves toward the student's by EMA.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, EnsembleConfig};
use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::matrix::{FeatureMatrix, Matrix};
use crate::metrics::evaluate;
use crate::model::{log_softmax_at, softmax_in_place, AdapterModel};
use crate::pipeline::{refine, PseudoLabelMode, RefineConfig};
use crate::prototype::AnchorConfig;
use crate::rng::{stream, RngSeed};
use crate::transport::SinkhornConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub ema_momentum: f64,
    pub ensemble: EnsembleConfig,
    pub anchor: AnchorConfig,
    pub sinkhorn: SinkhornConfig,
    #[serde(default)]
    pub mode: PseudoLabelMode,
    pub seed: RngSeed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            steps_per_epoch: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            ema_momentum: 0.999,
            ensemble: EnsembleConfig::default(),
            anchor: AnchorConfig::default(),
            sinkhorn: SinkhornConfig::default(),
            mode: PseudoLabelMode::DualConsensus,
            seed: RngSeed(0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_epoch == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("steps_per_epoch and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.ema_momentum) {
            return Err(Error::InvalidConfig("ema_momentum must be in [0, 1)".into()));
        }
        self.ensemble.validate()?;
        self.anchor.validate()?;
        self.sinkhorn.validate()
    }

    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig { anchor: self.anchor.clone(), sinkhorn: self.sinkhorn.clone(), mode: self.mode }
    }
}

/// Supervised training of the frozen classifier on labeled source data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: RngSeed,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { epochs: 20, batch_size: 64, learning_rate: 0.5, seed: RngSeed(0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrad {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub consensus_rate: f64,
    pub kept_count: usize,
    pub per_class_kept: Vec<usize>,
    pub sinkhorn_converged: Option<bool>,
    pub mean_loss: f64,
    /// Accuracy of the raw ensemble labels over all samples.
    pub raw_accuracy: Option<f64>,
    /// Accuracy of the kept pseudo-labels.
    pub pseudo_label_accuracy: Option<f64>,
    /// Teacher mIoU / OA on clean features after the epoch.
    pub teacher_miou: Option<f64>,
    pub teacher_oa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    pub epochs: Vec<EpochReport>,
    pub teacher: AdapterModel,
}

/// Mean cross-entropy over the non-IGNORE samples and its gradient with
/// respect to `(gamma, beta)`. An all-IGNORE batch yields zero loss and zero
/// gradient.
pub fn cross_entropy_valid(
    model: &AdapterModel,
    batch_features: &FeatureMatrix,
    batch_labels: &LabelVector,
) -> Result<(f64, AdapterGrad)> {
    model.check_dim(batch_features)?;
    if batch_features.n() != batch_labels.len() {
        return Err(Error::LengthMismatch { left: batch_features.n(), right: batch_labels.len() });
    }
    if batch_labels.k() != model.k {
        return Err(Error::ClassCountMismatch { left: model.k, right: batch_labels.k() });
    }
    let (k, d) = (model.k, model.d);
    let mut grad = AdapterGrad { gamma: vec![0.0; d], beta: vec![0.0; d] };
    let mut loss = 0.0;
    let mut valid = 0usize;
    let mut h = vec![0.0; d];
    let mut z = vec![0.0; k];
    let mut dh = vec![0.0; d];
    for (i, label) in batch_labels.iter().enumerate() {
        let Some(target) = label.class() else { continue };
        valid += 1;
        let x = batch_features.row(i);
        model.embed_row(x, &mut h);
        model.logits_from_embedding(&h, &mut z);
        loss -= log_softmax_at(&z, target);
        softmax_in_place(&mut z);
        z[target] -= 1.0;
        // dL/dh = W^T (p - onehot)
        dh.iter_mut().for_each(|v| *v = 0.0);
        for (c, &err) in z.iter().enumerate() {
            for (acc, &w) in dh.iter_mut().zip(model.weight_row(c)) {
                *acc += err * w;
            }
        }
        for j in 0..d {
            grad.gamma[j] += dh[j] * x[j];
            grad.beta[j] += dh[j];
        }
    }
    if valid == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / valid as f64;
    grad.gamma.iter_mut().chain(grad.beta.iter_mut()).for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// `teacher <- alpha * teacher + (1 - alpha) * student` on the adapter only.
pub fn ema_update(teacher: &AdapterModel, student: &AdapterModel, alpha: f64) -> Result<AdapterModel> {
    if !teacher.frozen_equal(student) || teacher.gamma.len() != student.gamma.len() {
        return Err(Error::FrozenMismatch);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("EMA momentum must be in [0, 1], got {alpha}")));
    }
    let blend = |t: &[f64], s: &[f64]| -> Vec<f64> {
        t.iter()
            .zip(s)
            .map(|(&t, &s)| {
                if alpha == 1.0 {
                    t
                } else if alpha == 0.0 {
                    s
                } else {
                    t + (1.0 - alpha) * (s - t)
                }
            })
            .collect()
    };
    let mut out = teacher.clone();
    out.gamma = blend(&teacher.gamma, &student.gamma);
    out.beta = blend(&teacher.beta, &student.beta);
    Ok(out)
}

/// Self-train `source_model` on unlabeled `target_features`.
///
/// When `ground_truth` is given, each epoch report carries pseudo-label and
/// teacher accuracy figures; it never influences training.
pub fn adapt(
    source_model: &AdapterModel,
    target_features: &FeatureMatrix,
    cfg: &TrainConfig,
    ground_truth: Option<&LabelVector>,
) -> Result<AdaptationReport> {
    cfg.validate()?;
    source_model.check_dim(target_features)?;
    if let Some(gt) = ground_truth {
        if gt.len() != target_features.n() {
            return Err(Error::LengthMismatch { left: target_features.n(), right: gt.len() });
        }
    }
    let n = target_features.n();
    let mut teacher = source_model.clone();
    let mut student = source_model.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let refine_cfg = cfg.refine_config();

    for epoch in 0..cfg.epochs {
        let ens_cfg = EnsembleConfig { seed: cfg.ensemble.seed.split(epoch as u64), ..cfg.ensemble.clone() };
        let ensemble = run_ensemble(&teacher, target_features, &ens_cfg)?;
        let refined = refine(&ensemble, &refine_cfg)?;
        let pseudo = refined.labels;

        let (raw_accuracy, pseudo_label_accuracy) = match ground_truth {
            Some(gt) => (Some(accuracy_on_kept(gt, &ensemble.y_raw)), Some(accuracy_on_kept(gt, &pseudo))),
            None => (None, None),
        };
        let mut report = EpochReport {
            epoch,
            consensus_rate: refined.stats.consensus_rate,
            kept_count: refined.stats.kept_count,
            per_class_kept: refined.stats.per_class_kept.clone(),
            sinkhorn_converged: refined.stats.sinkhorn.as_ref().map(|s| s.converged),
            mean_loss: 0.0,
            raw_accuracy,
            pseudo_label_accuracy,
            teacher_miou: None,
            teacher_oa: None,
        };
        log::info!(
            "epoch {epoch}: kept {} of {n} pseudo-labels ({:.3})",
            report.kept_count,
            report.consensus_rate
        );
        if report.kept_count == 0 {
            epochs.push(report);
            let partial = AdaptationReport { epochs, teacher };
            return Err(Error::AllSamplesIgnored { epoch, report: Box::new(partial) });
        }

        let mut rng = cfg.seed.split(stream::BATCHES).split(epoch as u64).rng();
        let mut order: Vec<usize> = (0..n).collect();
        let mut cursor = n;
        let (mut loss_sum, mut loss_steps) = (0.0, 0usize);
        for _ in 0..cfg.steps_per_epoch {
            let mut batch = Vec::with_capacity(cfg.batch_size);
            while batch.len() < cfg.batch_size.min(n) {
                if cursor == n {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                batch.push(order[cursor]);
                cursor += 1;
            }
            let xb = target_features.select_rows(&batch)?;
            let yb = pseudo.select(&batch);
            let (loss, grad) = cross_entropy_valid(&student, &xb, &yb)?;
            if !loss.is_finite() {
                return Err(Error::InvalidConfig(format!("non-finite loss at epoch {epoch}")));
            }
            if yb.ignored_count() < yb.len() {
                loss_sum += loss;
                loss_steps += 1;
            }
            for (p, g) in student.gamma.iter_mut().zip(&grad.gamma) {
                *p -= cfg.learning_rate * g;
            }
            for (p, g) in student.beta.iter_mut().zip(&grad.beta) {
                *p -= cfg.learning_rate * g;
            }
            teacher = ema_update(&teacher, &student, cfg.ema_momentum)?;
        }
        report.mean_loss = if loss_steps > 0 { loss_sum / loss_steps as f64 } else { 0.0 };

        if let Some(gt) = ground_truth {
            let eval = evaluate(gt, &teacher.predict(target_features)?, false)?;
            report.teacher_miou = Some(eval.miou);
            report.teacher_oa = Some(eval.overall_accuracy);
        }
        epochs.push(report);
    }
    Ok(AdaptationReport { epochs, teacher })
}

fn accuracy_on_kept(truth: &LabelVector, pred: &LabelVector) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (t, p) in truth.iter().zip(pred.iter()) {
        if p.is_ignore() {
            continue;
        }
        total += 1;
        hit += usize::from(t == p);
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Mean cross-entropy of the full classifier and its gradient with respect to
/// `(W, b)`. Labels must not be IGNORE.
pub fn classifier_gradient(
    model: &AdapterModel,
    features: &FeatureMatrix,
    labels: &LabelVector,
) -> Result<(f64, Matrix, Vec<f64>)> {
    model.check_dim(features)?;
    if features.n() != labels.len() {
        return Err(Error::LengthMismatch { left: features.n(), right: labels.len() });
    }
    let (k, d) = (model.k, model.d);
    let mut gw = Matrix::zeros(k, d);
    let mut gb = vec![0.0; k];
    let mut loss = 0.0;
    let mut h = vec![0.0; d];
    let mut z = vec![0.0; k];
    for (i, label) in labels.iter().enumerate() {
        let target = label
            .class()
            .ok_or_else(|| Error::InvalidConfig(format!("source label {i} is IGNORE")))?;
        model.embed_row(features.row(i), &mut h);
        model.logits_from_embedding(&h, &mut z);
        loss -= log_softmax_at(&z, target);
        softmax_in_place(&mut z);
        z[target] -= 1.0;
        for (c, &err) in z.iter().enumerate() {
            gb[c] += err;
            for (g, &hj) in gw.row_mut(c).iter_mut().zip(&h) {
                *g += err * hj;
            }
        }
    }
    let scale = 1.0 / labels.len().max(1) as f64;
    let gw = Matrix::new(k, d, gw.into_vec().into_iter().map(|g| g * scale).collect())?;
    gb.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, gw, gb))
}

/// Train `W, b` (identity adapter) with mini-batch gradient descent from a
/// zero initialization.
pub fn source_pretrain(features: &FeatureMatrix, labels: &LabelVector, cfg: &PretrainConfig) -> Result<AdapterModel> {
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("batch_size and learning_rate must be positive".into()));
    }
    if features.n() != labels.len() {
        return Err(Error::LengthMismatch { left: features.n(), right: labels.len() });
    }
    if labels.ignored_count() > 0 {
        return Err(Error::InvalidConfig("source labels must not contain IGNORE".into()));
    }
    let mut model = AdapterModel::zeros(labels.k(), features.d())?;
    let mut rng = cfg.seed.split(stream::PRETRAIN).rng();
    let mut order: Vec<usize> = (0..features.n()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let xb = features.select_rows(chunk)?;
            let yb = labels.select(chunk);
            let (_, gw, gb) = classifier_gradient(&model, &xb, &yb)?;
            for (w, g) in model.weights.iter_mut().zip(gw.as_slice()) {
                *w -= cfg.learning_rate * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&gb) {
                *b -= cfg.learning_rate * g;
            }
        }
    }
    Ok(model)
}
