mod common;

use corrector_core::bounds::{psi, rho};
use corrector_core::corrector::{
    calibrate, fit, fit_projectors, partition, ModelDocument, SplitMode,
};
use corrector_core::sim::generate;
use corrector_core::{
    CorrectorModel, DeltaSpec, Error, FitConfig, LabeledSample, Outcome, PcaTarget,
};

fn fitted(seed: u64, deltas: [f64; 3]) -> (CorrectorModel, Vec<LabeledSample>, Vec<LabeledSample>) {
    let spec = common::three_class_spec(seed);
    let (fit_set, test) = generate(&spec).unwrap();
    let model = fit(
        &fit_set,
        &spec.labels(),
        &FitConfig::with_deltas(deltas.to_vec()),
    )
    .unwrap();
    (model, fit_set, test)
}

#[test]
fn resubstitution_rejects_at_least_delta_of_errors() {
    for seed in 0..10 {
        let (model, fit_set, _) = fitted(seed, [0.9, 0.8, 0.75]);
        common::check_resubstitution_floor(&model, &fit_set).unwrap();
    }
}

#[test]
fn threshold_is_the_order_statistic_of_error_scores() {
    let (model, fit_set, _) = fitted(1, [0.9, 0.8, 0.75]);
    for c in &model.per_class {
        let mut scores: Vec<f64> = fit_set
            .iter()
            .filter(|s| s.predicted == c.class_label && s.is_correct() == Some(false))
            .map(|s| c.projector.project(&s.features).unwrap())
            .collect();
        scores.sort_by(f64::total_cmp);
        let rank = (c.delta * scores.len() as f64).ceil() as usize;
        assert_eq!(c.threshold, scores[rank - 1], "class {}", c.class_label);
        assert_eq!(c.m_minus as usize, scores.len());
        assert_eq!(c.bounds.gamma, rho(c.delta, c.m_minus).unwrap());
        let upsilon = (1.0 - psi(c.f_plus_at_theta, c.m_plus).unwrap()).max(0.0);
        assert_eq!(c.bounds.upsilon, upsilon);
        assert!(c.bounds.gamma <= c.delta);
    }
}

#[test]
fn larger_delta_rejects_a_superset() {
    let spec = common::three_class_spec(7);
    let (fit_set, test) = generate(&spec).unwrap();
    let deltas = [0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 0.99];
    common::check_nested_rejections(&fit_set, &spec.labels(), &deltas, &test).unwrap();
    common::check_nested_rejections(&fit_set, &spec.labels(), &deltas, &fit_set).unwrap();
}

#[test]
fn save_and_load_reproduce_decisions() {
    let (model, _, _) = fitted(3, [0.9, 0.8, 0.75]);
    common::check_round_trip(&model, 1000, 11).unwrap();
}

#[test]
fn single_label_models_round_trip() {
    let spec = common::spec(
        vec![common::class("only", 0.9, 40, 30, (1.0, 1.0), (-1.0, 1.0))],
        3,
        100,
        5,
    );
    let (fit_set, _) = generate(&spec).unwrap();
    assert!(fit_set.iter().any(|s| s.truth.as_deref() == Some("~only")));
    let model = fit(&fit_set, &spec.labels(), &FitConfig::with_deltas(vec![0.9])).unwrap();
    assert_eq!(model.per_class.len(), 1);
    let c = &model.per_class[0];
    let mut scores: Vec<f64> = fit_set
        .iter()
        .filter(|s| s.is_correct() == Some(false))
        .map(|s| c.projector.project(&s.features).unwrap())
        .collect();
    scores.sort_by(f64::total_cmp);
    assert_eq!(c.threshold, scores[26]);
    common::check_round_trip(&model, 200, 2).unwrap();
}

#[test]
fn truncated_or_foreign_files_are_rejected() {
    let (model, _, _) = fitted(3, [0.9, 0.8, 0.75]);
    let text = model.to_json().unwrap();
    let cut = &text[..text.len() / 2];
    assert!(CorrectorModel::from_json(cut).is_err());

    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["schema_version"] = 99.into();
    match CorrectorModel::from_json(&doc.to_string()) {
        Err(Error::UnsupportedVersion {
            found: 99,
            expected: 1,
        }) => {}
        other => panic!("{other:?}"),
    }

    let mut doc: ModelDocument = serde_json::from_str(&text).unwrap();
    doc.classes[0].weights.pop();
    assert!(matches!(doc.into_model(), Err(Error::Model(_))));
}

#[test]
fn perfectly_separated_classes_accept_every_correct_decision() {
    let spec = common::spec(
        vec![
            common::class("a", 0.9, 50, 50, (20.0, 1.0), (0.0, 1.0)),
            common::class("b", 0.9, 50, 50, (20.0, 1.0), (0.0, 1.0)),
        ],
        1,
        100,
        8,
    );
    let (fit_set, test) = generate(&spec).unwrap();
    let model = fit(
        &fit_set,
        &spec.labels(),
        &FitConfig::with_deltas(vec![0.9, 0.9]),
    )
    .unwrap();
    for c in &model.per_class {
        assert_eq!(c.f_plus_at_theta, 0.0);
    }
    for s in fit_set
        .iter()
        .chain(&test)
        .filter(|s| s.is_correct() == Some(true))
    {
        let d = model.decide(&s.predicted, &s.features).unwrap();
        assert_eq!(d.outcome, Outcome::Accept(s.predicted.clone()));
    }
}

#[test]
fn disjoint_split_separates_projector_and_threshold_data() {
    let spec = common::three_class_spec(4);
    let (fit_set, _) = generate(&spec).unwrap();
    let config = FitConfig {
        split: SplitMode::Disjoint {
            projector_fraction: 0.5,
            seed: 3,
        },
        ..FitConfig::with_deltas(vec![0.9, 0.8, 0.75])
    };
    let model = fit(&fit_set, &spec.labels(), &config).unwrap();
    let p = &model.provenance;
    assert_eq!(
        p.projector_sample_count + p.calibration_sample_count,
        fit_set.len()
    );
    for (c, class) in model.per_class.iter().zip(&spec.classes) {
        assert_eq!(
            c.m_minus as usize,
            class.m_minus - (class.m_minus as f64 * 0.5).round() as usize
        );
        assert_eq!(
            c.m_plus as usize,
            class.m_plus - (class.m_plus as f64 * 0.5).round() as usize
        );
    }
    let again = fit(&fit_set, &spec.labels(), &config).unwrap();
    assert_eq!(model, again);
}

#[test]
fn calibrate_reuses_supplied_projectors() {
    let spec = common::three_class_spec(9);
    let (fit_set, test) = generate(&spec).unwrap();
    let labels = spec.labels();
    let (_, projectors) =
        fit_projectors(&fit_set, &labels, PcaTarget::Components(4), 1e-6).unwrap();
    let per_class = calibrate(
        &test,
        &labels,
        &projectors,
        &DeltaSpec::Deltas(vec![0.9; 3]),
    )
    .unwrap();
    let parts = partition(&test, &labels).unwrap();
    for (c, p) in per_class.iter().zip(&parts) {
        assert_eq!(c.m_minus as usize, p.negatives.len());
        assert_eq!(
            c.projector,
            projectors
                .iter()
                .find(|h| h.class_label() == c.class_label)
                .unwrap()
                .clone()
        );
    }
}

#[test]
fn gamma_targets_pick_the_smallest_sufficient_delta() {
    let spec = common::three_class_spec(2);
    let (fit_set, _) = generate(&spec).unwrap();
    let config = FitConfig {
        deltas: DeltaSpec::GammaTargets(vec![0.6, 0.5, 0.4]),
        ..FitConfig::with_deltas(vec![])
    };
    let model = fit(&fit_set, &spec.labels(), &config).unwrap();
    for (c, target) in model.per_class.iter().zip([0.6, 0.5, 0.4]) {
        assert!(c.bounds.gamma >= target);
        assert!(rho(c.delta - 1e-6, c.m_minus).unwrap() < target);
    }

    let config = FitConfig {
        deltas: DeltaSpec::GammaTargets(vec![0.99, 0.5, 0.4]),
        ..FitConfig::with_deltas(vec![])
    };
    match fit(&fit_set, &spec.labels(), &config) {
        Err(Error::GammaUnattainable { class, .. }) => assert_eq!(class, "1"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn input_errors_name_the_offending_class_or_row() {
    let spec = common::three_class_spec(2);
    let (mut fit_set, _) = generate(&spec).unwrap();
    let labels = spec.labels();
    let config = FitConfig::with_deltas(vec![0.9; 3]);

    let only_correct: Vec<LabeledSample> = fit_set
        .iter()
        .filter(|s| s.predicted != "2" || s.is_correct() == Some(true))
        .cloned()
        .collect();
    let err = fit(&only_correct, &labels, &config).unwrap_err();
    assert!(
        matches!(err, Error::EmptyPartition { ref class, .. } if class == "2"),
        "{err}"
    );

    let bad = FitConfig::with_deltas(vec![0.9, 1.0, 0.9]);
    let err = fit(&fit_set, &labels, &bad).unwrap_err();
    assert!(
        matches!(err, Error::InvalidDelta { ref class, .. } if class == "2"),
        "{err}"
    );

    fit_set[5].predicted = "7".into();
    let err = fit(&fit_set, &labels, &config).unwrap_err();
    assert!(err.to_string().contains('7'), "{err}");
}
