//! Synthetic correction sets and Monte-Carlo checks of the corrector guarantees.
//!
//! Every synthetic class has Gaussian scores for correct and incorrect
//! decisions along the first feature coordinate; the remaining coordinates
//! are isotropic Gaussian noise shared by both conditions. A trial draws a
//! fresh correction set, fits a corrector, then measures accept/reject rates
//! on fresh test samples. The guarantees are statements about the joint
//! draw of correction set and test sample, so rates are averaged over trials
//! before being compared with the bounds.
//!
//! Randomness comes from ChaCha20 seeded with the spec seed; trial `t` uses
//! stream `t`, so results do not depend on thread scheduling or platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrector::{self, DeltaSpec, LabeledSample};
use crate::error::{Error, Result};
use crate::projector::{FisherProjector, PcaTarget, DEFAULT_RIDGE};

/// Minimum trial count accepted by [`validate_bounds`].
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub sigma: f64,
}

impl Gaussian {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        self.mean + self.sigma * rng.sample::<f64, _>(StandardNormal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClass {
    pub label: String,
    pub delta: f64,
    /// Correct decisions in each correction set.
    pub m_plus: usize,
    /// Incorrect decisions in each correction set.
    pub m_minus: usize,
    /// Score distribution of correct decisions.
    pub positive: Gaussian,
    /// Score distribution of incorrect decisions.
    pub negative: Gaussian,
}

/// Where the score maps come from in each trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorSource {
    /// Fitted on an extra, independently drawn correction set.
    #[default]
    Independent,
    /// Fitted on the same correction set as the thresholds.
    Resubstitution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub feature_dim: usize,
    /// Standard deviation of the non-score coordinates.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    pub classes: Vec<SyntheticClass>,
    /// Test samples per class and condition in every trial.
    pub test_count: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub projector: ProjectorSource,
    /// Defaults to `feature_dim`.
    #[serde(default)]
    pub pca_components: Option<usize>,
}

fn default_noise() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if self.feature_dim > 1 && !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be positive when feature_dim > 1".into());
        }
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        if self.test_count < 2 {
            return bad("test_count must be at least 2".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if let Some(k) = self.pca_components {
            if k == 0 || k > self.feature_dim {
                return bad(format!(
                    "pca_components {k} outside 1..={}",
                    self.feature_dim
                ));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.classes {
            if !seen.insert(c.label.as_str()) {
                return bad(format!("duplicate label {}", c.label));
            }
            if c.m_plus < 2 || c.m_minus < 2 {
                return bad(format!("class {}: counts must be at least 2", c.label));
            }
            if !(c.delta > 0.0 && c.delta < 1.0) {
                return bad(format!(
                    "class {}: delta {} outside (0,1)",
                    c.label, c.delta
                ));
            }
            for g in [c.positive, c.negative] {
                if !(g.sigma > 0.0 && g.sigma.is_finite() && g.mean.is_finite()) {
                    return bad(format!(
                        "class {}: sigma must be positive and finite",
                        c.label
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.label.clone()).collect()
    }

    /// Truth label given to incorrect decisions of class `j`.
    fn wrong_label(&self, j: usize) -> String {
        if self.classes.len() > 1 {
            self.classes[(j + 1) % self.classes.len()].label.clone()
        } else {
            format!("~{}", self.classes[j].label)
        }
    }

    fn sample(&self, rng: &mut ChaCha20Rng, j: usize, correct: bool, id: String) -> LabeledSample {
        let class = &self.classes[j];
        let dist = if correct {
            class.positive
        } else {
            class.negative
        };
        let mut features = Vec::with_capacity(self.feature_dim);
        features.push(dist.sample(rng));
        for _ in 1..self.feature_dim {
            features.push(self.noise_sigma * rng.sample::<f64, _>(StandardNormal));
        }
        let truth = if correct {
            class.label.clone()
        } else {
            self.wrong_label(j)
        };
        LabeledSample::new(id, features, class.label.clone(), Some(truth))
    }

    /// Draws `counts(j) = (correct, incorrect)` samples for every class.
    fn draw(
        &self,
        rng: &mut ChaCha20Rng,
        prefix: &str,
        counts: impl Fn(&SyntheticClass) -> (usize, usize),
    ) -> Vec<LabeledSample> {
        let mut out = Vec::new();
        for (j, c) in self.classes.iter().enumerate() {
            let (np, nn) = counts(c);
            for i in 0..np {
                out.push(self.sample(rng, j, true, format!("{prefix}-{}-p{i}", c.label)));
            }
            for i in 0..nn {
                out.push(self.sample(rng, j, false, format!("{prefix}-{}-n{i}", c.label)));
            }
        }
        out
    }

    fn trial_rng(&self, trial: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

/// Samples drawn for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Independent set for fitting score maps, when the spec asks for one.
    pub projector: Option<Vec<LabeledSample>>,
    pub fit: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

/// Data of trial `trial`.
pub fn generate_trial(spec: &SyntheticSpec, trial: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = spec.trial_rng(trial);
    let projector = match spec.projector {
        ProjectorSource::Independent => {
            Some(spec.draw(&mut rng, "proj", |c| (c.m_plus, c.m_minus)))
        }
        ProjectorSource::Resubstitution => None,
    };
    let fit = spec.draw(&mut rng, "fit", |c| (c.m_plus, c.m_minus));
    let test = spec.draw(&mut rng, "test", |_| (spec.test_count, spec.test_count));
    Ok(SyntheticData {
        projector,
        fit,
        test,
    })
}

/// `(fit set, test set)` of the first trial.
pub fn generate(spec: &SyntheticSpec) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let data = generate_trial(spec, 0)?;
    Ok((data.fit, data.test))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub mean: f64,
    pub min: f64,
    pub p05: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl RateSummary {
    fn from_rates(rates: &[f64]) -> Self {
        let mut v = rates.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            p05: at(0.05),
            median: at(0.5),
            p95: at(0.95),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassValidation {
    pub label: String,
    pub delta: f64,
    pub m_plus: usize,
    pub m_minus: usize,
    /// `rho(delta, M-)`, identical in every trial.
    pub gamma: f64,
    /// `upsilon` averaged over trials (it depends on the drawn correction set).
    pub upsilon_mean: f64,
    pub upsilon_min: f64,
    /// Rejected fraction of fresh incorrect decisions, per trial.
    pub reject_rate: RateSummary,
    /// Accepted fraction of fresh correct decisions, per trial.
    pub accept_rate: RateSummary,
    pub reject_tolerance: f64,
    pub accept_tolerance: f64,
    pub reject_pass: bool,
    pub accept_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub trial: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub trials: usize,
    pub test_count: usize,
    pub projector: ProjectorSource,
    pub classes: Vec<ClassValidation>,
    pub failed_trials: Vec<FailedTrial>,
    pub pass: bool,
}

/// Monte-Carlo tolerance `3 sqrt(p (1 - p) / n)` for an average of `n` Bernoulli draws.
pub fn mc_tolerance(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

struct TrialOutcome {
    gamma: Vec<f64>,
    upsilon: Vec<f64>,
    reject_rate: Vec<f64>,
    accept_rate: Vec<f64>,
}

fn fit_trial_projectors(
    spec: &SyntheticSpec,
    labels: &[String],
    data: &[LabeledSample],
) -> Result<Vec<FisherProjector>> {
    let target = PcaTarget::Components(spec.pca_components.unwrap_or(spec.feature_dim));
    Ok(corrector::fit_projectors(data, labels, target, DEFAULT_RIDGE)?.1)
}

fn run_trial(spec: &SyntheticSpec, labels: &[String], trial: u64) -> Result<TrialOutcome> {
    let data = generate_trial(spec, trial)?;
    let projectors =
        fit_trial_projectors(spec, labels, data.projector.as_deref().unwrap_or(&data.fit))?;
    let deltas = DeltaSpec::Deltas(spec.classes.iter().map(|c| c.delta).collect());
    let classes = corrector::calibrate(&data.fit, labels, &projectors, &deltas)?;

    let q = labels.len();
    let mut rejected_errors = vec![0usize; q];
    let mut accepted_correct = vec![0usize; q];
    for s in &data.test {
        let j = labels
            .iter()
            .position(|l| *l == s.predicted)
            .expect("generated label");
        let c = &classes[j];
        let rejected = c.projector.project(&s.features)? <= c.threshold;
        match (s.is_correct() == Some(true), rejected) {
            (true, false) => accepted_correct[j] += 1,
            (false, true) => rejected_errors[j] += 1,
            _ => {}
        }
    }
    let n = spec.test_count as f64;
    Ok(TrialOutcome {
        gamma: classes.iter().map(|c| c.bounds.gamma).collect(),
        upsilon: classes.iter().map(|c| c.bounds.upsilon).collect(),
        reject_rate: rejected_errors.iter().map(|&r| r as f64 / n).collect(),
        accept_rate: accepted_correct.iter().map(|&a| a as f64 / n).collect(),
    })
}

/// Runs `spec.trials` independent trials and compares trial-averaged rates
/// with the guarantees, allowing [`mc_tolerance`] of Monte-Carlo slack.
pub fn validate_bounds(spec: &SyntheticSpec) -> Result<ValidationReport> {
    spec.validate()?;
    if spec.trials < MIN_TRIALS {
        return Err(Error::InvalidSpec(format!(
            "validation needs at least {MIN_TRIALS} trials, got {}",
            spec.trials
        )));
    }
    let labels = spec.labels();
    let results: Vec<(u64, Result<TrialOutcome>)> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| (t, run_trial(spec, &labels, t)))
        .collect();

    let mut ok = Vec::new();
    let mut failed_trials = Vec::new();
    for (trial, r) in results {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => failed_trials.push(FailedTrial {
                trial,
                error: e.to_string(),
            }),
        }
    }
    if ok.is_empty() {
        return Err(Error::InvalidSpec(format!(
            "all {} trials failed; first error: {}",
            spec.trials, failed_trials[0].error
        )));
    }

    let draws = ok.len() * spec.test_count;
    let classes: Vec<ClassValidation> = spec
        .classes
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let col = |f: fn(&TrialOutcome) -> &Vec<f64>| {
                ok.iter().map(|o| f(o)[j]).collect::<Vec<f64>>()
            };
            let reject = RateSummary::from_rates(&col(|o| &o.reject_rate));
            let accept = RateSummary::from_rates(&col(|o| &o.accept_rate));
            let upsilon = col(|o| &o.upsilon);
            let gamma = ok[0].gamma[j];
            let upsilon_mean = upsilon.iter().sum::<f64>() / upsilon.len() as f64;
            let reject_tolerance = mc_tolerance(reject.mean, draws);
            let accept_tolerance = mc_tolerance(accept.mean, draws);
            ClassValidation {
                label: c.label.clone(),
                delta: c.delta,
                m_plus: c.m_plus,
                m_minus: c.m_minus,
                gamma,
                upsilon_mean,
                upsilon_min: upsilon.iter().copied().fold(f64::INFINITY, f64::min),
                reject_rate: reject,
                accept_rate: accept,
                reject_tolerance,
                accept_tolerance,
                reject_pass: reject.mean >= gamma - reject_tolerance,
                accept_pass: accept.mean >= upsilon_mean - accept_tolerance,
            }
        })
        .collect();
    let pass = failed_trials.is_empty() && classes.iter().all(|c| c.reject_pass && c.accept_pass);
    Ok(ValidationReport {
        seed: spec.seed,
        trials: spec.trials,
        test_count: spec.test_count,
        projector: spec.projector,
        classes,
        failed_trials,
        pass,
    })
}
