//! The corrector map: one reject threshold per base-model label.
//!
//! Samples of the correction set are grouped by the label the base model
//! predicted and split into correctly (`S+`) and incorrectly (`S-`)
//! classified subsets. Each class gets a score map `h_j`, and a new decision
//! `(l_j, z)` is rejected iff `h_j(z) <= F-_j^+(delta_j)`, the `delta_j`
//! empirical quantile of the error scores. The probability of rejecting an
//! error is then at least `rho(delta_j, M-_j)` and the probability of
//! accepting a correct decision at least `1 - psi(F+_j(theta_j), M+_j)`.

mod document;

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, ClassBounds};
use crate::ecdf::EmpiricalCdf;
use crate::error::{Error, Result};
use crate::projector::{self, FeatureMatrix, FisherProjector, PcaBasis, PcaTarget};

pub use document::{ModelDocument, SCHEMA_VERSION};

/// One record of the correction or evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub features: Vec<f64>,
    /// Label produced by the base classifier.
    pub predicted: String,
    /// Ground truth, when known.
    pub truth: Option<String>,
}

impl LabeledSample {
    pub fn new(
        id: impl Into<String>,
        features: Vec<f64>,
        predicted: impl Into<String>,
        truth: Option<String>,
    ) -> Self {
        Self {
            id: id.into(),
            features,
            predicted: predicted.into(),
            truth,
        }
    }

    /// `Some(true)` when the base model was right, `None` when truth is unknown.
    pub fn is_correct(&self) -> Option<bool> {
        self.truth.as_ref().map(|t| *t == self.predicted)
    }
}

/// Indices (into the sample slice) of the correct and incorrect decisions for one label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    pub label: String,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

fn label_index(label_set: &[String], label: &str) -> Option<usize> {
    label_set.iter().position(|l| l == label)
}

fn check_label_set(label_set: &[String]) -> Result<()> {
    if label_set.is_empty() {
        return Err(Error::InvalidArgument("empty label set".into()));
    }
    let mut seen = HashSet::new();
    for l in label_set {
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate label {l}")));
        }
    }
    Ok(())
}

/// Splits samples by predicted label into correct and incorrect subsets,
/// one entry per label in `label_set` order.
pub fn partition(samples: &[LabeledSample], label_set: &[String]) -> Result<Vec<ClassPartition>> {
    check_label_set(label_set)?;
    let mut parts: Vec<ClassPartition> = label_set
        .iter()
        .map(|l| ClassPartition {
            label: l.clone(),
            positives: Vec::new(),
            negatives: Vec::new(),
        })
        .collect();
    for (i, s) in samples.iter().enumerate() {
        let j = label_index(label_set, &s.predicted).ok_or_else(|| Error::UnknownLabel {
            label: s.predicted.clone(),
        })?;
        match s.is_correct() {
            Some(true) => parts[j].positives.push(i),
            Some(false) => parts[j].negatives.push(i),
            None => return Err(Error::Unlabeled { id: s.id.clone() }),
        }
    }
    Ok(parts)
}

/// How the per-class rejection levels are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "values", rename_all = "snake_case")]
pub enum DeltaSpec {
    /// `delta_j` per label, in label-set order.
    Deltas(Vec<f64>),
    /// Desired `gamma_j` per label; `delta_j` is the smallest level achieving it.
    GammaTargets(Vec<f64>),
}

/// Whether projectors are fitted on the same samples as the thresholds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitMode {
    /// Projectors and thresholds share the whole correction set.
    #[default]
    Resubstitution,
    /// A stratified `projector_fraction` of every `S+`/`S-` cell fits the
    /// projectors; the remainder fits thresholds and bounds.
    Disjoint { projector_fraction: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub deltas: DeltaSpec,
    pub pca_target: PcaTarget,
    pub ridge: f64,
    pub split: SplitMode,
}

impl FitConfig {
    pub fn with_deltas(deltas: Vec<f64>) -> Self {
        Self {
            deltas: DeltaSpec::Deltas(deltas),
            pca_target: PcaTarget::default(),
            ridge: projector::DEFAULT_RIDGE,
            split: SplitMode::Resubstitution,
        }
    }
}

/// Fit configuration and sample counts recorded alongside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub deltas: Vec<f64>,
    pub gamma_targets: Option<Vec<f64>>,
    pub pca_components: Option<usize>,
    pub pca_variance: Option<f64>,
    pub ridge: f64,
    pub split: SplitMode,
    pub sample_count: usize,
    pub projector_sample_count: usize,
    pub calibration_sample_count: usize,
    /// Seconds since the Unix epoch; filled in by callers that want it.
    pub created_unix: Option<u64>,
    pub generator: String,
}

/// Threshold, score map and guarantees for one label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCorrector {
    pub class_label: String,
    pub projector: FisherProjector,
    /// `theta_j`; always one of the calibration error scores.
    pub threshold: f64,
    pub delta: f64,
    pub m_plus: u64,
    pub m_minus: u64,
    /// `F+_j(theta_j)`.
    pub f_plus_at_theta: f64,
    pub bounds: ClassBounds,
}

/// Outcome of moderating one base-model decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "label", rename_all = "snake_case")]
pub enum Outcome {
    Accept(String),
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub score: f64,
    pub threshold: f64,
    pub class_bounds: ClassBounds,
}

impl Decision {
    pub fn is_reject(&self) -> bool {
        self.outcome == Outcome::Reject
    }
}

/// Fitted corrector for every label of the base model.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorModel {
    pub label_set: Vec<String>,
    pub pca: Arc<PcaBasis>,
    pub per_class: Vec<ClassCorrector>,
    pub provenance: Provenance,
}

impl CorrectorModel {
    pub fn feature_dim(&self) -> usize {
        self.pca.dim()
    }

    pub fn class(&self, label: &str) -> Option<&ClassCorrector> {
        label_index(&self.label_set, label).map(|j| &self.per_class[j])
    }

    /// Accepts or rejects the base model's `predicted` label for `features`.
    /// The boundary `score == threshold` rejects.
    pub fn decide(&self, predicted: &str, features: &[f64]) -> Result<Decision> {
        let class = self.class(predicted).ok_or_else(|| Error::UnknownLabel {
            label: predicted.to_string(),
        })?;
        let score = class.projector.project(features)?;
        let outcome = if score <= class.threshold {
            Outcome::Reject
        } else {
            Outcome::Accept(class.class_label.clone())
        };
        Ok(Decision {
            outcome,
            score,
            threshold: class.threshold,
            class_bounds: class.bounds,
        })
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument::from_model(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        ModelDocument::parse(text)?.into_model()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn feature_matrix(samples: &[LabeledSample], idx: &[usize]) -> Result<FeatureMatrix> {
    let rows: Vec<&[f64]> = idx
        .iter()
        .map(|&i| samples[i].features.as_slice())
        .collect();
    FeatureMatrix::from_rows(&rows)
}

fn check_features(samples: &[LabeledSample]) -> Result<usize> {
    let d = samples.first().ok_or(Error::EmptySample)?.features.len();
    if d == 0 {
        return Err(Error::InvalidArgument("zero feature dimension".into()));
    }
    for s in samples {
        if s.features.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.features.len(),
            });
        }
        if s.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
    }
    Ok(d)
}

fn require_count(label: &str, partition: &'static str, have: usize, need: usize) -> Result<()> {
    if have == 0 {
        Err(Error::EmptyPartition {
            class: label.to_string(),
            partition,
        })
    } else if have < need {
        Err(Error::TooFewSamples {
            class: label.to_string(),
            partition,
            have,
            need,
        })
    } else {
        Ok(())
    }
}

/// PCA on the pooled correct decisions, then one Fisher projector per label.
pub fn fit_projectors(
    samples: &[LabeledSample],
    label_set: &[String],
    pca_target: PcaTarget,
    ridge: f64,
) -> Result<(Arc<PcaBasis>, Vec<FisherProjector>)> {
    check_features(samples)?;
    let parts = partition(samples, label_set)?;
    for p in &parts {
        require_count(&p.label, "correct", p.positives.len(), 2)?;
        require_count(&p.label, "error", p.negatives.len(), 2)?;
    }
    let pooled: Vec<usize> = parts
        .iter()
        .flat_map(|p| p.positives.iter().copied())
        .collect();
    let pca = Arc::new(projector::fit_pca(
        &feature_matrix(samples, &pooled)?,
        pca_target,
    )?);
    let projectors = parts
        .iter()
        .map(|p| {
            projector::fit_fisher(
                &p.label,
                pca.clone(),
                &feature_matrix(samples, &p.positives)?,
                &feature_matrix(samples, &p.negatives)?,
                ridge,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((pca, projectors))
}

/// Resolves a [`DeltaSpec`] into one `delta_j` per label, given the error-set sizes.
pub fn resolve_deltas(spec: &DeltaSpec, label_set: &[String], m_minus: &[u64]) -> Result<Vec<f64>> {
    let values = match spec {
        DeltaSpec::Deltas(v) | DeltaSpec::GammaTargets(v) => v,
    };
    if values.len() != label_set.len() {
        return Err(Error::InvalidArgument(format!(
            "{} values given for {} labels",
            values.len(),
            label_set.len()
        )));
    }
    match spec {
        DeltaSpec::Deltas(deltas) => {
            for (l, &d) in label_set.iter().zip(deltas) {
                if !(d > 0.0 && d < 1.0) {
                    return Err(Error::InvalidDelta {
                        class: l.clone(),
                        value: d,
                    });
                }
            }
            Ok(deltas.clone())
        }
        DeltaSpec::GammaTargets(targets) => label_set
            .iter()
            .zip(targets)
            .zip(m_minus)
            .map(|((l, &target), &m)| {
                if !(target > 0.0 && target < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "class {l}: gamma target {target} outside (0,1)"
                    )));
                }
                let best = bounds::rho(1.0 - 1e-12, m)?;
                bounds::delta_for_gamma(target, m)?.ok_or(Error::GammaUnattainable {
                    class: l.clone(),
                    target,
                    m_minus: m as usize,
                    best,
                })
            })
            .collect(),
    }
}

/// Thresholds and bounds for given projectors: the per-class loop of the
/// corrector construction. `projectors` must be in `label_set` order.
pub fn calibrate(
    samples: &[LabeledSample],
    label_set: &[String],
    projectors: &[FisherProjector],
    deltas: &DeltaSpec,
) -> Result<Vec<ClassCorrector>> {
    if projectors.len() != label_set.len() {
        return Err(Error::InvalidArgument(format!(
            "{} projectors for {} labels",
            projectors.len(),
            label_set.len()
        )));
    }
    check_features(samples)?;
    let parts = partition(samples, label_set)?;
    for p in &parts {
        require_count(&p.label, "correct", p.positives.len(), 1)?;
        require_count(&p.label, "error", p.negatives.len(), 1)?;
    }
    let m_minus: Vec<u64> = parts.iter().map(|p| p.negatives.len() as u64).collect();
    let deltas = resolve_deltas(deltas, label_set, &m_minus)?;

    parts
        .iter()
        .zip(projectors)
        .zip(deltas)
        .map(|((part, h), delta)| {
            if h.class_label() != part.label {
                return Err(Error::InvalidArgument(format!(
                    "projector for {} given for class {}",
                    h.class_label(),
                    part.label
                )));
            }
            let neg_scores = h.project_rows(&feature_matrix(samples, &part.negatives)?)?;
            let pos_scores = h.project_rows(&feature_matrix(samples, &part.positives)?)?;
            let neg_cdf = EmpiricalCdf::from_vec(neg_scores)?;
            let pos_cdf = EmpiricalCdf::from_vec(pos_scores)?;
            let threshold = neg_cdf.pseudo_inverse(delta)?;
            let f_plus_at_theta = pos_cdf.evaluate(threshold)?;
            let (m_plus, m_minus) = (pos_cdf.len() as u64, neg_cdf.len() as u64);
            Ok(ClassCorrector {
                class_label: part.label.clone(),
                projector: h.clone(),
                threshold,
                delta,
                m_plus,
                m_minus,
                f_plus_at_theta,
                bounds: ClassBounds::compute(delta, f_plus_at_theta, m_plus, m_minus)?,
            })
        })
        .collect()
}

/// Stratified split of every `S+`/`S-` cell into (projector, calibration) index sets.
fn disjoint_split(
    parts: &[ClassPartition],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction {fraction} outside (0,1)"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut proj = Vec::new();
    let mut calib = Vec::new();
    for p in parts {
        for (cell, name) in [(&p.positives, "correct"), (&p.negatives, "error")] {
            let mut idx = cell.clone();
            idx.shuffle(&mut rng);
            let cut = (fraction * idx.len() as f64).round() as usize;
            require_count(&p.label, name, cut, 2)?;
            require_count(&p.label, name, idx.len() - cut, 2)?;
            proj.extend_from_slice(&idx[..cut]);
            calib.extend_from_slice(&idx[cut..]);
        }
    }
    proj.sort_unstable();
    calib.sort_unstable();
    Ok((proj, calib))
}

/// Fits projectors, thresholds and bounds for every label in `label_set`.
pub fn fit(
    samples: &[LabeledSample],
    label_set: &[String],
    config: &FitConfig,
) -> Result<CorrectorModel> {
    check_features(samples)?;
    let parts = partition(samples, label_set)?;
    for p in &parts {
        require_count(&p.label, "correct", p.positives.len(), 2)?;
        require_count(&p.label, "error", p.negatives.len(), 2)?;
    }

    let (proj_set, calib_set): (Vec<LabeledSample>, Vec<LabeledSample>) = match config.split {
        SplitMode::Resubstitution => (samples.to_vec(), samples.to_vec()),
        SplitMode::Disjoint {
            projector_fraction,
            seed,
        } => {
            let (p, c) = disjoint_split(&parts, projector_fraction, seed)?;
            (
                p.iter().map(|&i| samples[i].clone()).collect(),
                c.iter().map(|&i| samples[i].clone()).collect(),
            )
        }
    };

    let (pca, projectors) = fit_projectors(&proj_set, label_set, config.pca_target, config.ridge)?;
    let per_class = calibrate(&calib_set, label_set, &projectors, &config.deltas)?;

    let (pca_components, pca_variance) = match config.pca_target {
        PcaTarget::Components(k) => (Some(k), None),
        PcaTarget::Variance(v) => (None, Some(v)),
    };
    let provenance = Provenance {
        deltas: per_class.iter().map(|c| c.delta).collect(),
        gamma_targets: match &config.deltas {
            DeltaSpec::GammaTargets(t) => Some(t.clone()),
            DeltaSpec::Deltas(_) => None,
        },
        pca_components,
        pca_variance,
        ridge: config.ridge,
        split: config.split,
        sample_count: samples.len(),
        projector_sample_count: proj_set.len(),
        calibration_sample_count: calib_set.len(),
        created_unix: None,
        generator: concat!("corrector-core ", env!("CARGO_PKG_VERSION")).to_string(),
    };
    Ok(CorrectorModel {
        label_set: label_set.to_vec(),
        pca,
        per_class,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: &str, x: f64, pred: &str, truth: &str) -> LabeledSample {
        LabeledSample::new(id, vec![x, 0.5 * x * x], pred, Some(truth.to_string()))
    }

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|l| l.to_string()).collect()
    }

    #[test]
    fn partition_example() {
        let samples = vec![
            s("s1", 0.0, "1", "1"),
            s("s2", 1.0, "1", "2"),
            s("s3", 2.0, "2", "2"),
            s("s4", 3.0, "2", "2"),
        ];
        let parts = partition(&samples, &labels(&["1", "2"])).unwrap();
        assert_eq!(parts[0].positives, vec![0]);
        assert_eq!(parts[0].negatives, vec![1]);
        assert_eq!(parts[1].positives, vec![2, 3]);
        assert!(parts[1].negatives.is_empty());
    }

    #[test]
    fn partition_errors() {
        let mut samples = vec![s("s1", 0.0, "1", "1")];
        samples[0].truth = None;
        let err = partition(&samples, &labels(&["1"])).unwrap_err();
        assert!(err
            .to_string()
            .contains("unlabeled sample in correction set"));
        let samples = vec![s("s1", 0.0, "9", "1")];
        assert!(matches!(
            partition(&samples, &labels(&["1"])),
            Err(Error::UnknownLabel { .. })
        ));
        assert!(partition(&samples, &labels(&["1", "1"])).is_err());
        assert!(partition(&samples, &[]).is_err());
    }

    #[test]
    fn all_correct_fails_naming_class() {
        let samples: Vec<_> = (0..6)
            .map(|i| s(&i.to_string(), i as f64, "a", "a"))
            .collect();
        let err = fit(
            &samples,
            &labels(&["a"]),
            &FitConfig::with_deltas(vec![0.9]),
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::EmptyPartition { ref class, partition: "error" } if class == "a")
        );
    }

    #[test]
    fn missing_class_is_an_error() {
        let mut samples: Vec<_> = (0..6)
            .map(|i| s(&i.to_string(), i as f64, "a", "a"))
            .collect();
        samples.extend((0..6).map(|i| s(&format!("n{i}"), -(i as f64), "a", "b")));
        let err = fit(
            &samples,
            &labels(&["a", "b"]),
            &FitConfig::with_deltas(vec![0.9, 0.9]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyPartition { ref class, .. } if class == "b"));
    }

    #[test]
    fn delta_validation() {
        let ls = labels(&["a", "b"]);
        assert!(resolve_deltas(&DeltaSpec::Deltas(vec![0.5, 1.0]), &ls, &[10, 10]).is_err());
        assert!(resolve_deltas(&DeltaSpec::Deltas(vec![0.5]), &ls, &[10, 10]).is_err());
        assert!(matches!(
            resolve_deltas(&DeltaSpec::GammaTargets(vec![0.5, 0.99]), &ls, &[100, 10]),
            Err(Error::GammaUnattainable { ref class, .. }) if class == "b"
        ));
        let d =
            resolve_deltas(&DeltaSpec::GammaTargets(vec![0.5, 0.5]), &ls, &[100, 1000]).unwrap();
        assert!(d[1] < d[0]);
    }

    #[test]
    fn decide_boundary_rejects() {
        let samples: Vec<_> = (0..10)
            .map(|i| s(&format!("p{i}"), 5.0 + i as f64, "a", "a"))
            .chain((0..10).map(|i| s(&format!("n{i}"), i as f64 * 0.3, "a", "b")))
            .collect();
        let model = fit(
            &samples,
            &labels(&["a"]),
            &FitConfig {
                pca_target: PcaTarget::Components(2),
                ..FitConfig::with_deltas(vec![0.5])
            },
        )
        .unwrap();
        let class = &model.per_class[0];
        // Every calibration error score, including the threshold sample itself.
        for n in samples.iter().filter(|x| x.truth.as_deref() == Some("b")) {
            let d = model.decide("a", &n.features).unwrap();
            assert_eq!(d.is_reject(), d.score <= class.threshold);
            if d.score == class.threshold {
                assert!(d.is_reject());
            }
        }
        assert!(model.decide("zzz", &[0.0, 0.0]).is_err());
        assert!(model.decide("a", &[0.0]).is_err());
    }
}
