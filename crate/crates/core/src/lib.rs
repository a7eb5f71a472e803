//! Pseudo-label refinement for source-free domain adaptation of point-wise
//! classifiers.
//!
//! A teacher model's multi-view ensemble predictions are turned into
//! pseudo-labels in three stages:
//!
//! 1. [`prototype`]: per-class anchor mining (top `rho` by confidence inside
//!    each predicted class) and normalized class prototypes;
//! 2. [`transport`]: a cosine cost to the prototypes, a class prior from the
//!    prediction histogram, and an entropy-regularized transport plan solved
//!    with log-domain Sinkhorn iterations;
//! 3. [`consensus`]: labels survive only where the ensemble prediction and the
//!    transport assignment agree.
//!
//! [`trainer`] wraps the stages in a mean-teacher self-training loop over a
//! per-feature affine adapter, [`metrics`] scores the result, and [`synth`]
//! provides a seeded long-tailed domain-shift benchmark.

pub mod consensus;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod io;
pub mod labels;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod prototype;
pub mod rng;
pub mod synth;
pub mod trainer;
pub mod transport;

pub use consensus::{dual_consensus_filter, ConsensusResult};
pub use ensemble::{aggregate_views, run_ensemble, EnsembleConfig, EnsembleOutput};
pub use error::{Error, Result};
pub use labels::{ClassPrior, Label, LabelVector};
pub use matrix::{row_normalize, validate_prob_matrix, FeatureMatrix, Matrix, ProbMatrix};
pub use metrics::{confusion, evaluate, iou_per_class, miou, overall_accuracy, ConfusionMatrix, EvaluationReport};
pub use model::AdapterModel;
pub use pipeline::{pseudolabel_refine, refine, PseudoLabelMode, RefineConfig, RefineOutput, RefineStats};
pub use prototype::{aggregate_prototypes, build_candidate_sets, mine_anchors, AnchorConfig, AnchorSets, PrototypeSet};
pub use rng::RngSeed;
pub use synth::{default_scenarios, generate, PriorShift, Scenario, ScenarioConfig};
pub use trainer::{
    adapt, cross_entropy_valid, ema_update, source_pretrain, AdaptationReport, AdapterGrad, PretrainConfig,
    TrainConfig,
};
pub use transport::{
    assign_labels, build_cost_matrix, estimate_class_prior, sinkhorn_solve, CostMatrix, SinkhornConfig,
    TransportPlan,
};

/// Library version, shared with the CLI.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
