//! Pseudo-label refinement: ensemble output -> anchors -> prototypes ->
//! transport assignment -> dual-consensus filter.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consensus::{dual_consensus_filter, ConsensusResult};
use crate::ensemble::{aggregate_views, EnsembleOutput};
use crate::error::{Error, Result};
use crate::labels::{ClassPrior, LabelVector};
use crate::matrix::{FeatureMatrix, ProbMatrix};
use crate::prototype::{aggregate_prototypes, build_candidate_sets, mine_anchors, AnchorConfig};
use crate::transport::{assign_labels, build_cost_matrix, estimate_class_prior, sinkhorn_solve, SinkhornConfig};

/// How pseudo-labels are derived from the prototypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PseudoLabelMode {
    /// Nearest prototype per sample; no transport, no filtering.
    Greedy,
    /// Transport assignment for every sample; no filtering.
    Transport,
    /// Transport assignment intersected with the ensemble prediction.
    #[default]
    DualConsensus,
}

impl PseudoLabelMode {
    pub const ALL: [PseudoLabelMode; 3] = [Self::Greedy, Self::Transport, Self::DualConsensus];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::Transport => "transport",
            Self::DualConsensus => "dual-consensus",
        }
    }
}

impl fmt::Display for PseudoLabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PseudoLabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "transport" | "ot" => Ok(Self::Transport),
            "dual-consensus" | "full" => Ok(Self::DualConsensus),
            other => Err(Error::InvalidConfig(format!("unknown pseudo-label mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    pub anchor: AnchorConfig,
    pub sinkhorn: SinkhornConfig,
    #[serde(default)]
    pub mode: PseudoLabelMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinkhornSummary {
    pub converged: bool,
    pub iterations_used: usize,
    pub marginal_error: f64,
}

/// Diagnostics of one refinement pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineStats {
    pub mode: PseudoLabelMode,
    pub n: usize,
    pub k: usize,
    pub kept_count: usize,
    pub consensus_rate: f64,
    pub per_class_kept: Vec<usize>,
    pub candidate_counts: Vec<usize>,
    pub anchor_counts: Vec<usize>,
    pub class_prior: Vec<f64>,
    pub active_classes: Vec<bool>,
    pub sinkhorn: Option<SinkhornSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutput {
    /// Final pseudo-labels (IGNORE only in dual-consensus mode).
    pub labels: LabelVector,
    pub y_raw: LabelVector,
    pub y_sink: Option<LabelVector>,
    pub prior: ClassPrior,
    pub consensus: Option<ConsensusResult>,
    pub stats: RefineStats,
}

pub fn refine(ensemble: &EnsembleOutput, cfg: &RefineConfig) -> Result<RefineOutput> {
    let y_raw = &ensemble.y_raw;
    let candidates = build_candidate_sets(y_raw);
    let anchors = mine_anchors(&candidates, &ensemble.confidence, &cfg.anchor)?;
    let prototypes = aggregate_prototypes(&anchors, &ensemble.f_bar)?;
    let cost = build_cost_matrix(&ensemble.f_bar, &prototypes)?;
    let prior = estimate_class_prior(&anchors.candidate_counts)?;

    let (labels, y_sink, consensus, sinkhorn) = match cfg.mode {
        PseudoLabelMode::Greedy => (cost.greedy_labels(), None, None, None),
        PseudoLabelMode::Transport | PseudoLabelMode::DualConsensus => {
            let plan = sinkhorn_solve(&cost, &prior, &cfg.sinkhorn)?;
            let summary = SinkhornSummary {
                converged: plan.converged,
                iterations_used: plan.iterations_used,
                marginal_error: plan.marginal_error,
            };
            let y_sink = assign_labels(&plan);
            if cfg.mode == PseudoLabelMode::Transport {
                (y_sink.clone(), Some(y_sink), None, Some(summary))
            } else {
                let result = dual_consensus_filter(y_raw, &y_sink)?;
                (result.y_final.clone(), Some(y_sink), Some(result), Some(summary))
            }
        }
    };

    let n = labels.len();
    let per_class_kept = labels.histogram();
    let kept_count = per_class_kept.iter().sum();
    let stats = RefineStats {
        mode: cfg.mode,
        n,
        k: labels.k(),
        kept_count,
        consensus_rate: kept_count as f64 / n as f64,
        per_class_kept,
        candidate_counts: anchors.candidate_counts.clone(),
        anchor_counts: anchors.anchor_counts(),
        class_prior: prior.weights().to_vec(),
        active_classes: prior.active().to_vec(),
        sinkhorn,
    };
    Ok(RefineOutput { labels, y_raw: y_raw.clone(), y_sink, prior, consensus, stats })
}

/// Refine pseudo-labels from caller-supplied per-view probabilities and one
/// shared feature matrix.
pub fn pseudolabel_refine(features: &FeatureMatrix, views: &[ProbMatrix], cfg: &RefineConfig) -> Result<RefineOutput> {
    let ensemble = aggregate_views(views, std::slice::from_ref(features))?;
    refine(&ensemble, cfg)
}
