//! Cross-module round trips: generated data through ingestion, dictionary
//! construction, solving, persistence, and scoring.

use disagg::dataio::{
    build_dictionary, day_matrix, load_dictionary, save_dictionary, synth_generate, SynthSpec,
};
use disagg::metrics::{disaggregation_error, evaluate, rmse, EvaluationParams};
use disagg::nnls::{kkt_report, GramSystem};
use disagg::signal::{build_selector, Normalization};
use disagg::solvers::{detect_off_devices, s2k_augment, s2k_solve, S2kConfig};

/// A dictionary containing a day's exact decomposition must reproduce that
/// day: near-zero error, group sums at one, and first-order optimality on
/// every window against the materialized augmented system.
#[test]
fn exact_mixture_recovery_with_certificates() {
    let data = synth_generate(&SynthSpec {
        device_count: 3,
        states_per_device: 2,
        day_count: 8,
        samples_per_day: 96,
        correlation: 0.3,
        seed: 41,
        ..SynthSpec::default()
    })
    .unwrap();
    let all_days: Vec<usize> = (0..8).collect();
    let (dict, report) =
        build_dictionary(&data.table, &data.schema, &all_days, Normalization::None).unwrap();
    assert!(report.skipped_zero_days.is_empty());

    let unit = data.schema.unit();
    let aggregate = day_matrix(
        &data.table,
        data.schema.aggregate_channel().unwrap(),
        &all_days,
        unit,
    )
    .unwrap();
    let cfg = S2kConfig::default();
    let q = build_selector(dict.groups()).unwrap();
    let result = s2k_solve(&dict, &q, &aggregate, &cfg).unwrap();
    assert!(result.all_converged());

    // recovery: per-device estimates match ground truth
    let device_ids: Vec<String> = data.device_ids().iter().map(|s| s.to_string()).collect();
    let mut ground = Vec::new();
    for id in &device_ids {
        ground.push(day_matrix(&data.table, id, &all_days, unit).unwrap());
    }
    for (g, e) in ground.iter().zip(&result.per_device) {
        assert!(rmse(g, e).unwrap() <= 1e-6, "device recovery drifted");
    }
    let signal_energy: f64 = aggregate.values().iter().map(|v| v * v).sum();
    assert!(disaggregation_error(&ground, &result.per_device).unwrap() <= 1e-8 * signal_energy);
    for s in &result.group_sums {
        assert!((s - 1.0).abs() <= 1e-6, "group sum {s} drifted from 1");
    }

    // optimality certificates via the independently materialized system
    let aug = s2k_augment(&dict, &q, cfg.beta).unwrap();
    for j in 0..aggregate.windows() {
        let sys = GramSystem::from_design(aug.design().view(), aug.target(aggregate.column(j)).view())
            .unwrap();
        let col = result.activations.values().column(j).to_owned();
        let report = kkt_report(&sys, &col, 1e-8).unwrap();
        assert!(
            report.passes,
            "window {j}: stationarity {} complementarity {}",
            report.max_stationarity_violation, report.max_complementarity_violation
        );
    }

    // full evaluation report is consistent
    let eval = evaluate(&device_ids, &ground, &result, &EvaluationParams::default()).unwrap();
    assert!(eval.disaggregation_error <= 1e-8 * signal_energy);
    assert_eq!(eval.off_detection.false_positives, 0);
    for j in 0..aggregate.windows() {
        let col_sum: f64 = (0..3).map(|i| eval.pcec_estimated[i][j]).sum();
        assert!((col_sum - 100.0).abs() <= 1e-6);
    }
}

/// Persisting a dictionary must not change what the solver computes.
#[test]
fn saved_dictionary_solves_identically() {
    let data = synth_generate(&SynthSpec {
        device_count: 2,
        day_count: 4,
        samples_per_day: 48,
        seed: 7,
        ..SynthSpec::default()
    })
    .unwrap();
    let days: Vec<usize> = (0..4).collect();
    let (dict, _) =
        build_dictionary(&data.table, &data.schema, &days, Normalization::None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dictionary(dir.path(), &dict).unwrap();
    let loaded = load_dictionary(dir.path()).unwrap();
    assert_eq!(loaded.bases(), dict.bases());

    let aggregate = day_matrix(&data.table, "aggregate", &days, data.schema.unit()).unwrap();
    let cfg = S2kConfig::default();
    let q = build_selector(dict.groups()).unwrap();
    let a = s2k_solve(&dict, &q, &aggregate, &cfg).unwrap();
    let b = s2k_solve(&loaded, &build_selector(loaded.groups()).unwrap(), &aggregate, &cfg)
        .unwrap();
    assert_eq!(a.activations.values(), b.activations.values());
}

/// An OFF day scheduled into the generator comes back out as an OFF flag,
/// with no false flags on active devices.
#[test]
fn off_day_flows_through_to_detection() {
    let data = synth_generate(&SynthSpec {
        device_count: 3,
        states_per_device: 2,
        day_count: 6,
        samples_per_day: 96,
        correlation: 0.2,
        off_days: vec![(2, 5)],
        seed: 13,
    })
    .unwrap();
    // train on days where everything runs; day 5 is the test day
    let train: Vec<usize> = (0..5).collect();
    let (dict, _) =
        build_dictionary(&data.table, &data.schema, &train, Normalization::None).unwrap();
    let aggregate = day_matrix(&data.table, "aggregate", &[5], data.schema.unit()).unwrap();
    // The penalty leaks an activation of order beta²/‖d‖² onto absent
    // devices, so the spurious energy share shrinks with beta and grows as
    // the day gets shorter. At 96 samples a day, beta = 0.02 keeps the leak
    // well under the detection threshold.
    let cfg = S2kConfig::new(0.02).unwrap();
    let q = build_selector(dict.groups()).unwrap();
    let result = s2k_solve(&dict, &q, &aggregate, &cfg).unwrap();
    let detection = detect_off_devices(&dict, &result, cfg.off_threshold_pcec).unwrap();
    assert!(detection.flags[[2, 0]], "scheduled-OFF device not flagged");
    assert!(!detection.flags[[0, 0]] && !detection.flags[[1, 0]], "active device flagged OFF");
}
