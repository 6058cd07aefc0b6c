#![allow(dead_code)]

use corrector_core::sim::{Gaussian, ProjectorSource, SyntheticClass, SyntheticSpec};
use corrector_core::LabeledSample;

pub fn class(
    label: &str,
    delta: f64,
    m_plus: usize,
    m_minus: usize,
    pos: (f64, f64),
    neg: (f64, f64),
) -> SyntheticClass {
    SyntheticClass {
        label: label.into(),
        delta,
        m_plus,
        m_minus,
        positive: Gaussian {
            mean: pos.0,
            sigma: pos.1,
        },
        negative: Gaussian {
            mean: neg.0,
            sigma: neg.1,
        },
    }
}

pub fn spec(
    classes: Vec<SyntheticClass>,
    feature_dim: usize,
    trials: usize,
    seed: u64,
) -> SyntheticSpec {
    SyntheticSpec {
        feature_dim,
        noise_sigma: 1.0,
        classes,
        test_count: 100,
        trials,
        seed,
        projector: ProjectorSource::Independent,
        pca_components: None,
    }
}

/// Three overlapping classes in four dimensions.
pub fn three_class_spec(seed: u64) -> SyntheticSpec {
    spec(
        vec![
            class("1", 0.9, 120, 80, (2.0, 1.0), (0.0, 1.0)),
            class("2", 0.8, 60, 40, (1.0, 0.7), (-0.5, 1.5)),
            class("3", 0.75, 90, 30, (0.5, 1.0), (0.0, 1.0)),
        ],
        4,
        100,
        seed,
    )
}

pub fn labels(spec: &SyntheticSpec) -> Vec<String> {
    spec.labels()
}

pub fn ids(samples: &[LabeledSample]) -> Vec<&str> {
    samples.iter().map(|s| s.id.as_str()).collect()
}

use corrector_core::corrector::fit;
use corrector_core::{CorrectorModel, FitConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Fraction of each class's fit-set errors falling in the reject region must
/// be at least `delta_j`. Checked by plain counting.
pub fn check_resubstitution_floor(
    model: &CorrectorModel,
    fit_set: &[LabeledSample],
) -> Result<(), String> {
    for c in &model.per_class {
        let errors: Vec<&LabeledSample> = fit_set
            .iter()
            .filter(|s| s.predicted == c.class_label && s.is_correct() == Some(false))
            .collect();
        let mut rejected = 0usize;
        for s in &errors {
            if model
                .decide(&s.predicted, &s.features)
                .map_err(|e| e.to_string())?
                .is_reject()
            {
                rejected += 1;
            }
        }
        // rejected / n >= delta  <=>  rejected >= delta * n
        if (rejected as f64) < c.delta * errors.len() as f64 {
            return Err(format!(
                "class {}: {rejected}/{} errors rejected, delta {}",
                c.class_label,
                errors.len(),
                c.delta
            ));
        }
    }
    Ok(())
}

/// Fits with each level in `deltas` (increasing) and checks the reject
/// regions on `probe` are nested.
pub fn check_nested_rejections(
    fit_set: &[LabeledSample],
    labels: &[String],
    deltas: &[f64],
    probe: &[LabeledSample],
) -> Result<(), String> {
    let mut previous: Option<Vec<bool>> = None;
    for &d in deltas {
        let model = fit(
            fit_set,
            labels,
            &FitConfig::with_deltas(vec![d; labels.len()]),
        )
        .map_err(|e| e.to_string())?;
        let rejects: Vec<bool> = probe
            .iter()
            .map(|s| {
                model
                    .decide(&s.predicted, &s.features)
                    .map(|d| d.is_reject())
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        if let Some(prev) = &previous {
            if let Some(i) = prev.iter().zip(&rejects).position(|(&a, &b)| a && !b) {
                return Err(format!(
                    "delta {d}: sample {} left the reject region",
                    probe[i].id
                ));
            }
        }
        previous = Some(rejects);
    }
    Ok(())
}

/// Saves, reloads and compares decisions bit for bit on `n` random inputs.
pub fn check_round_trip(model: &CorrectorModel, n: usize, seed: u64) -> Result<(), String> {
    let dir = std::env::temp_dir().join(format!("corrector-rt-{}-{seed}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let path = dir.join("model.json");
    model.save(&path).map_err(|e| e.to_string())?;
    let loaded = CorrectorModel::load(&path).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    if &loaded != model {
        return Err("reloaded model differs".into());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = model.feature_dim();
    for i in 0..n {
        let label = &model.label_set[i % model.label_set.len()];
        let z: Vec<f64> = (0..d)
            .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let a = model.decide(label, &z).map_err(|e| e.to_string())?;
        let b = loaded.decide(label, &z).map_err(|e| e.to_string())?;
        if a.outcome != b.outcome
            || a.score.to_bits() != b.score.to_bits()
            || a.threshold.to_bits() != b.threshold.to_bits()
        {
            return Err(format!("input {i}: {a:?} vs {b:?}"));
        }
    }
    Ok(())
}
