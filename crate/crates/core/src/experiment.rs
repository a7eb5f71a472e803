//! End-to-end runs on the synthetic benchmark: generate, pretrain on source,
//! evaluate source-only, adapt, evaluate the adapted teacher.

use serde::Serialize;

use crate::error::Result;
use crate::io::RunConfig;
use crate::metrics::{evaluate, EvaluationReport};
use crate::model::AdapterModel;
use crate::synth::{generate, Scenario, ScenarioConfig};
use crate::trainer::{adapt, source_pretrain, AdaptationReport, PretrainConfig, TrainConfig};

/// Training settings used for the benchmark presets.
///
/// The adapter steps are larger and the teacher momentum lighter than the
/// library defaults so that three short epochs on a few thousand points move
/// the teacher measurably.
pub fn benchmark_run_config(scenario: ScenarioConfig) -> RunConfig {
    let seed = scenario.seed;
    let mut train = TrainConfig {
        epochs: 3,
        steps_per_epoch: 100,
        batch_size: 64,
        learning_rate: 0.1,
        ema_momentum: 0.95,
        seed,
        ..TrainConfig::default()
    };
    train.ensemble.seed = seed;
    RunConfig { scenario, pretrain: PretrainConfig { seed, ..PretrainConfig::default() }, train }
}

/// A generated scenario with its source-trained model.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub model: AdapterModel,
    /// Source model on source data.
    pub source_domain: EvaluationReport,
    /// Source model on target data.
    pub source_only: EvaluationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub source_domain: EvaluationReport,
    pub source_only: EvaluationReport,
    pub adapted: EvaluationReport,
    pub adaptation: AdaptationReport,
}

impl ExperimentResult {
    pub fn miou_gain(&self) -> f64 {
        self.adapted.miou - self.source_only.miou
    }
}

pub fn prepare(scenario: &ScenarioConfig, pretrain: &PretrainConfig) -> Result<Prepared> {
    let scenario = generate(scenario)?;
    let model = source_pretrain(&scenario.source_features, &scenario.source_labels, pretrain)?;
    let source_domain = evaluate(&scenario.source_labels, &model.predict(&scenario.source_features)?, false)?;
    let source_only = evaluate(&scenario.target_labels, &model.predict(&scenario.target_features)?, false)?;
    Ok(Prepared { scenario, model, source_domain, source_only })
}

pub fn adapt_prepared(prepared: &Prepared, train: &TrainConfig) -> Result<ExperimentResult> {
    let target = &prepared.scenario.target_features;
    let truth = &prepared.scenario.target_labels;
    let adaptation = adapt(&prepared.model, target, train, Some(truth))?;
    let adapted = evaluate(truth, &adaptation.teacher.predict(target)?, false)?;
    Ok(ExperimentResult {
        source_domain: prepared.source_domain.clone(),
        source_only: prepared.source_only.clone(),
        adapted,
        adaptation,
    })
}

pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    adapt_prepared(&prepare(&cfg.scenario, &cfg.pretrain)?, &cfg.train)
}
