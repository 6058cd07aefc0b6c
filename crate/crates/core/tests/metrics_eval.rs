mod common;

use corrector_core::corrector::fit;
use corrector_core::metrics::{compare_with_baseline, evaluate};
use corrector_core::sim::generate;
use corrector_core::{Error, FitConfig};

#[test]
fn counts_are_conserved() {
    let spec = common::three_class_spec(12);
    let (fit_set, test) = generate(&spec).unwrap();
    let model = fit(
        &fit_set,
        &spec.labels(),
        &FitConfig::with_deltas(vec![0.9, 0.8, 0.75]),
    )
    .unwrap();
    for data in [&fit_set, &test] {
        let report = evaluate(&model, data).unwrap();
        assert_eq!(report.sample_count, data.len());
        let total: u64 = report.per_class.iter().map(|r| r.total()).sum();
        assert_eq!(total as usize, data.len());
        for r in &report.per_class {
            let n = data.iter().filter(|s| s.predicted == r.class_label).count();
            assert_eq!(r.total() as usize, n);
        }
        assert_eq!(report, evaluate(&model, data).unwrap());
    }
}

#[test]
fn overall_rates_are_weighted_class_rates() {
    let spec = common::three_class_spec(13);
    let (fit_set, test) = generate(&spec).unwrap();
    let model = fit(
        &fit_set,
        &spec.labels(),
        &FitConfig::with_deltas(vec![0.9, 0.8, 0.75]),
    )
    .unwrap();
    let report = evaluate(&model, &test).unwrap();
    let correct: u64 = report
        .per_class
        .iter()
        .map(|r| r.accepted_correct + r.rejected_correct)
        .sum();
    let wrong: u64 = report
        .per_class
        .iter()
        .map(|r| r.accepted_incorrect + r.rejected_incorrect)
        .sum();
    let acc: f64 = report
        .per_class
        .iter()
        .map(|r| {
            r.accept_correct_rate().unwrap() * (r.accepted_correct + r.rejected_correct) as f64
                / correct as f64
        })
        .sum();
    let rej: f64 = report
        .per_class
        .iter()
        .map(|r| {
            r.reject_incorrect_rate().unwrap()
                * (r.accepted_incorrect + r.rejected_incorrect) as f64
                / wrong as f64
        })
        .sum();
    assert!((report.overall.accept_correct_rate.unwrap() - acc).abs() < 1e-12);
    assert!((report.overall.reject_incorrect_rate.unwrap() - rej).abs() < 1e-12);
    let priors: f64 = report.overall.priors.iter().sum();
    assert!((priors - 1.0).abs() < 1e-12);
    assert!(report.overall.collapsed_bounds.is_some());
}

#[test]
fn fit_data_rejects_delta_of_errors() {
    for seed in 0..5 {
        let spec = common::three_class_spec(seed);
        let (fit_set, _) = generate(&spec).unwrap();
        let model = fit(
            &fit_set,
            &spec.labels(),
            &FitConfig::with_deltas(vec![0.9, 0.8, 0.75]),
        )
        .unwrap();
        let report = evaluate(&model, &fit_set).unwrap();
        for (r, c) in report.per_class.iter().zip(&model.per_class) {
            let rate = r.reject_incorrect_rate().unwrap();
            assert!(
                rate >= c.delta - 1.0 / c.m_minus as f64,
                "{} {rate}",
                r.class_label
            );
        }
    }
}

#[test]
fn separated_data_beats_the_baseline() {
    let spec = common::spec(
        vec![
            common::class("a", 0.999, 50, 50, (20.0, 1.0), (0.0, 1.0)),
            common::class("b", 0.999, 50, 50, (20.0, 1.0), (0.0, 1.0)),
        ],
        1,
        100,
        2,
    );
    let (fit_set, _) = generate(&spec).unwrap();
    // Above (M - 1) / M the threshold is the largest error score.
    let model = fit(
        &fit_set,
        &spec.labels(),
        &FitConfig::with_deltas(vec![0.999, 0.999]),
    )
    .unwrap();
    let cmp = compare_with_baseline(&model, &fit_set).unwrap();
    for r in &cmp.per_class {
        assert_eq!(r.corrector_recall, Some(1.0));
        assert!(r.corrector_recall.unwrap() >= r.baseline_recall.unwrap());
        assert!(r.recall_delta.unwrap() > 0.0);
    }
    assert!(cmp.render_table().contains("Baseline recall"));
}

#[test]
fn tiny_delta_rejects_only_the_lowest_error_score() {
    let spec = common::three_class_spec(21);
    let (fit_set, test) = generate(&spec).unwrap();
    let model = fit(
        &fit_set,
        &spec.labels(),
        &FitConfig::with_deltas(vec![1e-9; 3]),
    )
    .unwrap();
    for data in [&fit_set, &test] {
        let report = evaluate(&model, data).unwrap();
        for (r, c) in report.per_class.iter().zip(&model.per_class) {
            let scores: Vec<(f64, bool)> = data
                .iter()
                .filter(|s| s.predicted == c.class_label)
                .map(|s| {
                    (
                        c.projector.project(&s.features).unwrap(),
                        s.is_correct().unwrap(),
                    )
                })
                .collect();
            let min_error = fit_set
                .iter()
                .filter(|s| s.predicted == c.class_label && s.is_correct() == Some(false))
                .map(|s| c.projector.project(&s.features).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(c.threshold, min_error);
            let below = |want: bool| {
                scores
                    .iter()
                    .filter(|&&(s, ok)| ok == want && s <= min_error)
                    .count() as u64
            };
            assert_eq!(r.rejected_correct, below(true));
            assert_eq!(r.rejected_incorrect, below(false));
        }
    }
}

#[test]
fn uninformative_scores_leave_recall_at_baseline() {
    let mut spec = common::spec(
        vec![
            common::class("a", 0.5, 200, 200, (0.0, 1.0), (0.0, 1.0)),
            common::class("b", 0.5, 200, 200, (0.0, 1.0), (0.0, 1.0)),
        ],
        3,
        100,
        31,
    );
    spec.test_count = 4000;
    let (fit_set, test) = generate(&spec).unwrap();
    let model = fit(
        &fit_set,
        &spec.labels(),
        &FitConfig::with_deltas(vec![0.5, 0.5]),
    )
    .unwrap();
    let cmp = compare_with_baseline(&model, &test).unwrap();
    for (r, c) in cmp.per_class.iter().zip(&cmp.evaluation.per_class) {
        let accepted = (c.accepted_correct + c.accepted_incorrect) as f64;
        let p = r.baseline_recall.unwrap();
        let se = (p * (1.0 - p) / accepted).sqrt();
        assert!(r.recall_delta.unwrap().abs() < 4.0 * se, "{r:?}");
    }
}

#[test]
fn unusable_inputs_are_errors() {
    let spec = common::three_class_spec(1);
    let (fit_set, _) = generate(&spec).unwrap();
    let model = fit(
        &fit_set,
        &spec.labels(),
        &FitConfig::with_deltas(vec![0.9, 0.8, 0.75]),
    )
    .unwrap();
    assert!(matches!(evaluate(&model, &[]), Err(Error::EmptySample)));
    let mut unlabeled = fit_set.clone();
    unlabeled[3].truth = None;
    assert!(matches!(
        evaluate(&model, &unlabeled),
        Err(Error::Unlabeled { .. })
    ));
    let mut unknown = fit_set;
    unknown[0].predicted = "nine".into();
    assert!(matches!(
        evaluate(&model, &unknown),
        Err(Error::UnknownLabel { .. })
    ));
}
