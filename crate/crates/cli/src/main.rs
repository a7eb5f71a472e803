use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use logo_core::PseudoLabelMode;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "logo", version = logo_core::VERSION, about = "Pseudo-label refinement for source-free domain adaptation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic source/target scenario as feature and label files.
    Generate(GenerateArgs),
    /// Train the frozen classifier on labelled source features.
    Pretrain(PretrainArgs),
    /// Self-train the adapter on unlabelled target features.
    Adapt(AdaptArgs),
    /// Refine pseudo-labels from dumped views or a model.
    Pseudolabel(PseudolabelArgs),
    /// Solve entropic optimal transport for a cost matrix and class prior.
    Sinkhorn(SinkhornArgs),
    /// Score predicted labels against ground truth.
    Evaluate(EvaluateArgs),
    /// Label features with a saved model.
    Predict(PredictArgs),
    /// Run the synthetic benchmark end to end, optionally sweeping a setting.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Preset name: mild-shift, severe-shift or long-tail-severe.
    #[arg(long, default_value = "mild-shift", conflicts_with = "config")]
    scenario: String,
    /// Run configuration JSON; its `scenario` section is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PretrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Destination model JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

/// Overrides for every training setting; unset flags keep the config value.
#[derive(Debug, Args)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    ema_momentum: Option<f64>,
    #[command(flatten)]
    refine: RefineFlags,
}

#[derive(Debug, Args)]
struct RefineFlags {
    /// Augmented views per ensemble pass.
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Anchor fraction per class.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    min_anchors: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// greedy, transport or dual-consensus.
    #[arg(long)]
    mode: Option<PseudoLabelMode>,
}

#[derive(Debug, Args)]
struct AdaptArgs {
    /// Source model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Target features.
    #[arg(long)]
    features: PathBuf,
    /// Target labels, used only for the per-epoch report.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Destination for the adapted teacher model JSON.
    #[arg(long)]
    out_model: PathBuf,
    /// Destination for the adaptation report JSON.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Args)]
struct PseudolabelArgs {
    /// Feature matrix shared by all views.
    #[arg(long)]
    features: PathBuf,
    /// Per-view probability matrix; repeat once per view.
    #[arg(long = "probs", conflicts_with = "model")]
    probs: Vec<PathBuf>,
    /// Run the built-in ensemble with this model instead of reading views.
    #[arg(long, required_unless_present = "probs")]
    model: Option<PathBuf>,
    /// Destination label file.
    #[arg(long)]
    out: PathBuf,
    /// Destination statistics JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    refine: RefineFlags,
}

#[derive(Debug, Args)]
struct SinkhornArgs {
    /// N x K cost matrix.
    #[arg(long)]
    cost: PathBuf,
    /// 1 x K class prior; renormalized on read.
    #[arg(long)]
    prior: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Destination for the dense N x K plan.
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Destination for the convergence summary JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Count IGNORE predictions as errors instead of skipping them.
    #[arg(long)]
    count_ignored: bool,
    /// Destination report JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Sweep {
    None,
    Ablation,
    Views,
    Rho,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, default_value = "mild-shift", conflicts_with = "config")]
    scenario: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "none")]
    sweep: Sweep,
    /// Destination results JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOGO_LOG", "off")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Pretrain(a) => commands::pretrain(a),
        Command::Adapt(a) => commands::adapt(a),
        Command::Pseudolabel(a) => commands::pseudolabel(a),
        Command::Sinkhorn(a) => commands::sinkhorn(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Predict(a) => commands::predict(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("logo: {e}");
            ExitCode::FAILURE
        }
    }
}
