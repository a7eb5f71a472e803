use std::error::Error;
use std::fs;
use std::io::{ErrorKind, Write};
use std::path::Path;

use log::info;
use logo_core::experiment::{adapt_prepared, benchmark_run_config, prepare};
use logo_core::io::{read_json, read_labels, read_matrix, write_json, write_labels, write_matrix, RunConfig};
use logo_core::synth::scenario_by_name;
use logo_core::{
    assign_labels, evaluate as score, generate as generate_scenario, refine, run_ensemble, sinkhorn_solve, AdapterModel,
    ClassPrior, CostMatrix, FeatureMatrix, ProbMatrix, PseudoLabelMode, RngSeed, SinkhornConfig, TrainConfig,
};
use serde::Serialize;

use crate::{
    AdaptArgs, EvaluateArgs, ExperimentArgs, GenerateArgs, PredictArgs, PretrainArgs, PseudolabelArgs, RefineFlags,
    SinkhornArgs, Sweep, TrainFlags,
};

pub type Result<T> = std::result::Result<T, Box<dyn Error>>;

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => RunConfig::default(),
    })
}

fn features(path: &Path) -> Result<FeatureMatrix> {
    let m = read_matrix(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(FeatureMatrix::new(m)?)
}

fn load_model(path: &Path) -> Result<AdapterModel> {
    let model: AdapterModel = read_json(path).map_err(|e| format!("{}: {e}", path.display()))?;
    model.validate()?;
    Ok(model)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_json(p, value)?,
        None => {
            let text = serde_json::to_string_pretty(value)?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

impl RefineFlags {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.views {
            cfg.ensemble.views = v;
        }
        if let Some(v) = self.noise_sigma {
            cfg.ensemble.augmentation_noise_sigma = v;
        }
        if let Some(v) = self.rho {
            cfg.anchor.rho = v;
        }
        if let Some(v) = self.min_anchors {
            cfg.anchor.min_anchors = v;
        }
        if let Some(v) = self.lambda {
            cfg.sinkhorn.lambda = v;
        }
        if let Some(v) = self.max_iters {
            cfg.sinkhorn.max_iters = v;
        }
        if let Some(v) = self.tol {
            cfg.sinkhorn.tol = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
    }
}

impl TrainFlags {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.steps_per_epoch {
            cfg.steps_per_epoch = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.ema_momentum {
            cfg.ema_momentum = v;
        }
        self.refine.apply(cfg);
    }
}

fn set_train_seed(cfg: &mut TrainConfig, seed: Option<u64>) {
    if let Some(s) = seed {
        cfg.seed = RngSeed(s);
        cfg.ensemble.seed = RngSeed(s);
    }
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let mut run = match &args.config {
        Some(p) => load_config(Some(p))?,
        None => benchmark_run_config(
            scenario_by_name(&args.scenario).ok_or_else(|| format!("unknown scenario `{}`", args.scenario))?,
        ),
    };
    if let Some(s) = args.seed {
        run.scenario.seed = RngSeed(s);
        run.pretrain.seed = RngSeed(s);
        set_train_seed(&mut run.train, Some(s));
    }
    let scenario = generate_scenario(&run.scenario)?;
    fs::create_dir_all(&args.out)?;
    let dir = &args.out;
    write_matrix(dir.join("source_features.lgf"), scenario.source_features.matrix())?;
    write_labels(dir.join("source_labels.lgl"), &scenario.source_labels)?;
    write_matrix(dir.join("target_features.lgf"), scenario.target_features.matrix())?;
    write_labels(dir.join("target_labels.lgl"), &scenario.target_labels)?;
    write_json(dir.join("metadata.json"), &scenario.metadata)?;
    fs::write(dir.join("run_config.json"), run.to_json() + "\n")?;
    info!("wrote scenario to {}", dir.display());
    Ok(())
}

pub fn pretrain(args: PretrainArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?.pretrain;
    if let Some(v) = args.seed {
        cfg.seed = RngSeed(v);
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    let x = features(&args.features)?;
    let y = read_labels(&args.labels).map_err(|e| format!("{}: {e}", args.labels.display()))?;
    let model = logo_core::source_pretrain(&x, &y, &cfg)?;
    write_json(&args.out, &model)?;
    Ok(())
}

pub fn adapt(args: AdaptArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?.train;
    set_train_seed(&mut cfg, args.seed);
    args.train.apply(&mut cfg);
    let model = load_model(&args.model)?;
    let x = features(&args.features)?;
    let truth = args.truth.as_deref().map(read_labels).transpose()?;
    let report = logo_core::adapt(&model, &x, &cfg, truth.as_ref())?;
    for e in &report.epochs {
        info!("epoch {}: kept {} ({:.3}), loss {:.4}", e.epoch, e.kept_count, e.consensus_rate, e.mean_loss);
    }
    write_json(&args.out_model, &report.teacher)?;
    write_json(&args.report, &report)?;
    Ok(())
}

pub fn pseudolabel(args: PseudolabelArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?.train;
    set_train_seed(&mut cfg, args.seed);
    args.refine.apply(&mut cfg);
    let x = features(&args.features)?;
    let out = match &args.model {
        Some(path) => {
            let ensemble = run_ensemble(&load_model(path)?, &x, &cfg.ensemble)?;
            refine(&ensemble, &cfg.refine_config())?
        }
        None => {
            let views = args
                .probs
                .iter()
                .map(|p| -> Result<ProbMatrix> {
                    let m = read_matrix(p).map_err(|e| format!("{}: {e}", p.display()))?;
                    Ok(ProbMatrix::new(m).map_err(|e| format!("{}: {e}", p.display()))?)
                })
                .collect::<Result<Vec<_>>>()?;
            logo_core::pseudolabel_refine(&x, &views, &cfg.refine_config())?
        }
    };
    write_labels(&args.out, &out.labels)?;
    if let Some(p) = &args.stats {
        write_json(p, &out.stats)?;
    }
    info!("kept {} of {} labels", out.stats.kept_count, out.stats.n);
    Ok(())
}

#[derive(Serialize)]
struct SinkhornReport {
    converged: bool,
    iterations_used: usize,
    marginal_error: f64,
    transport_cost: f64,
    classes: Vec<usize>,
    column_mass: Vec<f64>,
}

pub fn sinkhorn(args: SinkhornArgs) -> Result<()> {
    let cost = read_matrix(&args.cost).map_err(|e| format!("{}: {e}", args.cost.display()))?;
    let prior = read_matrix(&args.prior).map_err(|e| format!("{}: {e}", args.prior.display()))?;
    if prior.rows() != 1 {
        return Err(format!("prior must be a 1 x K matrix, got {} x {}", prior.rows(), prior.cols()).into());
    }
    let prior = ClassPrior::from_weights(prior.row(0))?;
    let cost = CostMatrix::new(cost, prior.active().to_vec())?;
    let cfg = SinkhornConfig { lambda: args.lambda, max_iters: args.max_iters, tol: args.tol };
    let plan = sinkhorn_solve(&cost, &prior, &cfg)?;
    write_matrix(&args.plan, &plan.dense())?;
    write_labels(&args.labels, &assign_labels(&plan))?;
    let report = SinkhornReport {
        converged: plan.converged,
        iterations_used: plan.iterations_used,
        marginal_error: plan.marginal_error,
        transport_cost: plan.transport_cost(&cost),
        classes: plan.classes.clone(),
        column_mass: plan.column_mass.clone(),
    };
    emit(&report, args.summary.as_deref())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let truth = read_labels(&args.truth).map_err(|e| format!("{}: {e}", args.truth.display()))?;
    let pred = read_labels(&args.pred).map_err(|e| format!("{}: {e}", args.pred.display()))?;
    emit(&score(&truth, &pred, args.count_ignored)?, args.out.as_deref())
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    write_labels(&args.out, &model.predict(&features(&args.features)?)?)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepPoint {
    setting: String,
    adapted_miou: f64,
    adapted_oa: f64,
    gain: f64,
}

#[derive(Serialize)]
struct ExperimentReport {
    config: RunConfig,
    source_domain_miou: f64,
    source_only_miou: f64,
    source_only_oa: f64,
    runs: Vec<SweepPoint>,
}

pub fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut run = match &args.config {
        Some(p) => load_config(Some(p))?,
        None => benchmark_run_config(
            scenario_by_name(&args.scenario).ok_or_else(|| format!("unknown scenario `{}`", args.scenario))?,
        ),
    };
    if let Some(s) = args.seed {
        run.scenario.seed = RngSeed(s);
        run.pretrain.seed = RngSeed(s);
        set_train_seed(&mut run.train, Some(s));
    }
    let base = run.train.clone();
    let settings: Vec<(String, TrainConfig)> = match args.sweep {
        Sweep::None => vec![(base.mode.to_string(), base.clone())],
        Sweep::Ablation => PseudoLabelMode::ALL
            .iter()
            .map(|&mode| (mode.to_string(), TrainConfig { mode, ..base.clone() }))
            .collect(),
        Sweep::Views => [1, 2, 4, 6]
            .iter()
            .map(|&v| {
                let mut t = base.clone();
                t.ensemble.views = v;
                (format!("views={v}"), t)
            })
            .collect(),
        Sweep::Rho => [0.5, 0.7, 0.8, 1.0]
            .iter()
            .map(|&rho| {
                let mut t = base.clone();
                t.anchor.rho = rho;
                (format!("rho={rho}"), t)
            })
            .collect(),
    };
    let prepared = prepare(&run.scenario, &run.pretrain)?;
    let mut runs = Vec::new();
    for (setting, train) in settings {
        let result = adapt_prepared(&prepared, &train)?;
        info!("{setting}: mIoU {:.4}", result.adapted.miou);
        runs.push(SweepPoint {
            setting,
            adapted_miou: result.adapted.miou,
            adapted_oa: result.adapted.overall_accuracy,
            gain: result.miou_gain(),
        });
    }
    let report = ExperimentReport {
        config: run,
        source_domain_miou: prepared.source_domain.miou,
        source_only_miou: prepared.source_only.miou,
        source_only_oa: prepared.source_only.overall_accuracy,
        runs,
    };
    emit(&report, args.out.as_deref())
}
