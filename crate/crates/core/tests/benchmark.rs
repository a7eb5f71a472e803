//! Oracle-pinned values of the synthetic benchmark at the documented seeds.
//! mIoU and accuracy are fractions, so one mIoU point is 0.01.

use logo_core::experiment::{adapt_prepared, benchmark_run_config, prepare, Prepared};
use logo_core::synth::scenario_by_name;
use logo_core::{default_scenarios, generate, PseudoLabelMode, ScenarioConfig, TrainConfig};

const POINT: f64 = 0.01;

fn prepared(name: &str) -> (Prepared, TrainConfig) {
    let cfg = benchmark_run_config(scenario_by_name(name).unwrap());
    (prepare(&cfg.scenario, &cfg.pretrain).unwrap(), cfg.train)
}

fn adapted_miou(p: &Prepared, train: &TrainConfig) -> f64 {
    adapt_prepared(p, train).unwrap().adapted.miou
}

#[test]
fn presets_are_registered() {
    let names: Vec<_> = default_scenarios().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["mild-shift", "severe-shift", "long-tail-severe"]);
}

#[test]
fn adaptation_gain_per_scenario() {
    for (name, pinned) in [("mild-shift", 0.008866), ("severe-shift", 0.159858), ("long-tail-severe", 0.060398)] {
        let (p, train) = prepared(name);
        let gain = adapted_miou(&p, &train) - p.source_only.miou;
        assert!(gain > 0.0, "{name}: gain {gain}");
        assert!((gain - pinned).abs() <= POINT, "{name}: gain {gain}, pinned {pinned}");
    }
}

#[test]
fn source_domain_miou() {
    let (p, _) = prepared("mild-shift");
    assert!((p.source_domain.miou - 0.981628).abs() <= 0.5 * POINT, "{}", p.source_domain.miou);
}

#[test]
fn shift_opens_a_gap_on_the_default_scenario() {
    let (p, _) = prepared("mild-shift");
    let gap = p.source_domain.miou - p.source_only.miou;
    assert!(gap > 0.0);
    assert!((gap - 0.024908).abs() <= 0.5 * POINT, "gap {gap}");
}

#[test]
fn translation_never_helps_source_only_accuracy() {
    let base = scenario_by_name("mild-shift").unwrap();
    let pretrain = benchmark_run_config(base.clone()).pretrain;
    let pinned = [0.992, 0.9912, 0.9882];
    let mut last = f64::INFINITY;
    for (tr, pin) in [0.0, 0.25, 0.5].into_iter().zip(pinned) {
        let cfg = ScenarioConfig { shift_translation: tr, ..base.clone() };
        let oa = prepare(&cfg, &pretrain).unwrap().source_only.overall_accuracy;
        assert!(oa <= last, "translation {tr}: {oa} > {last}");
        assert!((oa - pin).abs() <= 1e-9, "translation {tr}: {oa}");
        last = oa;
    }
}

#[test]
fn consensus_keeps_purer_labels_under_severe_shift() {
    let (p, train) = prepared("severe-shift");
    let first = &adapt_prepared(&p, &train).unwrap().adaptation.epochs[0];
    let margin = first.pseudo_label_accuracy.unwrap() - first.raw_accuracy.unwrap();
    assert!(margin > 0.0);
    assert!((margin - 0.037975).abs() <= 0.01, "margin {margin}");
}

#[test]
fn greedy_assignment_does_not_beat_full_pipeline() {
    let (p, train) = prepared("long-tail-severe");
    let run = |mode| adapted_miou(&p, &TrainConfig { mode, ..train.clone() });
    let greedy = run(PseudoLabelMode::Greedy);
    let full = run(PseudoLabelMode::DualConsensus);
    assert!(greedy <= full, "greedy {greedy} full {full}");
    assert!((greedy - 0.963772).abs() <= POINT);
    assert!((full - 0.968343).abs() <= POINT);
}

#[test]
fn long_tail_preset_has_a_rare_class() {
    let s = generate(&scenario_by_name("long-tail-severe").unwrap()).unwrap();
    let n = s.target_labels.len() as f64;
    let smallest = s.target_labels.histogram().into_iter().min().unwrap() as f64 / n;
    assert!(smallest < 0.03, "{smallest}");
}

#[test]
fn sampled_priors_stay_within_three_sigma() {
    for (name, cfg) in default_scenarios() {
        let s = generate(&cfg).unwrap();
        for (labels, priors) in [
            (&s.source_labels, &s.metadata.source_priors),
            (&s.target_labels, &s.metadata.target_priors),
        ] {
            let n = labels.len() as f64;
            for (count, p) in labels.histogram().into_iter().zip(priors) {
                let sigma = (n * p * (1.0 - p)).sqrt();
                assert!((count as f64 - n * p).abs() <= 3.0 * sigma, "{name}: count {count}, expected {}", n * p);
            }
        }
    }
}
