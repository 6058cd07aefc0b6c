//! Accept/reject tallies of a fitted corrector on labeled data, compared with
//! the guarantees attached at fit time.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bounds::{collapse_bounds, CollapsedBounds};
use crate::corrector::{CorrectorModel, LabeledSample};
use crate::error::{Error, Result};

/// Outcome counts and derived rates for samples the base model assigned to one label.
///
/// Rates with an empty denominator are `None` (serialized as `null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_label: String,
    pub accepted_correct: u64,
    pub accepted_incorrect: u64,
    pub rejected_correct: u64,
    pub rejected_incorrect: u64,
    /// `accepted_correct / (accepted_correct + accepted_incorrect)`.
    pub conditional_recall: Option<f64>,
    /// `accepted_incorrect / (accepted_incorrect + rejected_incorrect)`.
    pub accepted_error_proportion: Option<f64>,
    /// `1 - gamma_j`.
    pub theoretical_accepted_error_ub: f64,
    /// `gamma_j`.
    pub theoretical_reject_lb: f64,
    pub upsilon: f64,
    /// The accepted-error proportion exceeds `1 - gamma_j`.
    pub bound_violated: bool,
}

impl ClassReport {
    pub fn total(&self) -> u64 {
        self.accepted_correct
            + self.accepted_incorrect
            + self.rejected_correct
            + self.rejected_incorrect
    }

    pub fn rejected(&self) -> u64 {
        self.rejected_correct + self.rejected_incorrect
    }

    /// Recall when every decision is accepted.
    pub fn baseline_recall(&self) -> Option<f64> {
        ratio(self.accepted_correct + self.rejected_correct, self.total())
    }

    pub fn accept_correct_rate(&self) -> Option<f64> {
        ratio(
            self.accepted_correct,
            self.accepted_correct + self.rejected_correct,
        )
    }

    pub fn reject_incorrect_rate(&self) -> Option<f64> {
        ratio(
            self.rejected_incorrect,
            self.accepted_incorrect + self.rejected_incorrect,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallReport {
    /// Empirical `P(truth = l_j)` among samples whose truth is a known label.
    pub priors: Vec<f64>,
    pub collapsed_bounds: Option<CollapsedBounds>,
    /// Accepted fraction of all correct decisions.
    pub accept_correct_rate: Option<f64>,
    /// Rejected fraction of all incorrect decisions.
    pub reject_incorrect_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_class: Vec<ClassReport>,
    pub overall: OverallReport,
    pub sample_count: usize,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Builds a class report from raw counts and the class's `gamma_j` and `upsilon_j`.
pub fn class_report(class_label: &str, counts: [u64; 4], gamma: f64, upsilon: f64) -> ClassReport {
    let [ac, ai, rc, ri] = counts;
    let accepted_error_proportion = ratio(ai, ai + ri);
    let ub = 1.0 - gamma;
    ClassReport {
        class_label: class_label.to_string(),
        accepted_correct: ac,
        accepted_incorrect: ai,
        rejected_correct: rc,
        rejected_incorrect: ri,
        conditional_recall: ratio(ac, ac + ai),
        accepted_error_proportion,
        theoretical_accepted_error_ub: ub,
        theoretical_reject_lb: gamma,
        upsilon,
        bound_violated: accepted_error_proportion.is_some_and(|p| p > ub),
    }
}

/// Runs the corrector on every sample and tallies outcomes per predicted label.
pub fn evaluate(model: &CorrectorModel, samples: &[LabeledSample]) -> Result<EvaluationReport> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let q = model.label_set.len();
    // accepted_correct, accepted_incorrect, rejected_correct, rejected_incorrect
    let mut counts = vec![[0u64; 4]; q];
    let mut truth_counts = vec![0u64; q];
    for s in samples {
        let correct = s
            .is_correct()
            .ok_or_else(|| Error::Unlabeled { id: s.id.clone() })?;
        let j = model
            .label_set
            .iter()
            .position(|l| *l == s.predicted)
            .ok_or_else(|| Error::UnknownLabel {
                label: s.predicted.clone(),
            })?;
        let rejected = model.decide(&s.predicted, &s.features)?.is_reject();
        let slot = match (rejected, correct) {
            (false, true) => 0,
            (false, false) => 1,
            (true, true) => 2,
            (true, false) => 3,
        };
        counts[j][slot] += 1;
        if let Some(t) = model
            .label_set
            .iter()
            .position(|l| Some(l) == s.truth.as_ref())
        {
            truth_counts[t] += 1;
        }
    }

    let per_class: Vec<ClassReport> = model
        .per_class
        .iter()
        .zip(&counts)
        .map(|(c, &n)| class_report(&c.class_label, n, c.bounds.gamma, c.bounds.upsilon))
        .collect();

    let known: u64 = truth_counts.iter().sum();
    let priors: Vec<f64> = truth_counts
        .iter()
        .map(|&c| {
            if known > 0 {
                c as f64 / known as f64
            } else {
                0.0
            }
        })
        .collect();
    let collapsed_bounds = if known > 0 {
        let bounds: Vec<_> = model.per_class.iter().map(|c| c.bounds).collect();
        Some(collapse_bounds(&priors, &bounds)?)
    } else {
        None
    };
    let sum = |slot: usize| counts.iter().map(|c| c[slot]).sum::<u64>();
    let overall = OverallReport {
        priors,
        collapsed_bounds,
        accept_correct_rate: ratio(sum(0), sum(0) + sum(2)),
        reject_incorrect_rate: ratio(sum(3), sum(1) + sum(3)),
    };
    Ok(EvaluationReport {
        per_class,
        overall,
        sample_count: samples.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallComparison {
    pub class_label: String,
    pub corrector_recall: Option<f64>,
    pub baseline_recall: Option<f64>,
    pub recall_delta: Option<f64>,
}

/// Corrector against the accept-everything baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub evaluation: EvaluationReport,
    pub per_class: Vec<RecallComparison>,
}

pub fn compare_with_baseline(
    model: &CorrectorModel,
    samples: &[LabeledSample],
) -> Result<BaselineComparison> {
    let evaluation = evaluate(model, samples)?;
    let per_class = evaluation
        .per_class
        .iter()
        .map(|r| {
            let corrector_recall = r.conditional_recall;
            let baseline_recall = r.baseline_recall();
            RecallComparison {
                class_label: r.class_label.clone(),
                corrector_recall,
                baseline_recall,
                recall_delta: corrector_recall.zip(baseline_recall).map(|(c, b)| c - b),
            }
        })
        .collect();
    Ok(BaselineComparison {
        evaluation,
        per_class,
    })
}

/// Marker printed in tables for rates with an empty denominator.
pub const UNDEFINED: &str = "n/a";

fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x:.2}"))
}

impl EvaluationReport {
    /// One column per class; rows mirror the usual corrector results table.
    pub fn render_table(&self) -> String {
        self.render_rows(None)
    }

    fn render_rows(&self, baseline: Option<&[RecallComparison]>) -> String {
        let mut rows: Vec<(String, Vec<String>)> = vec![
            (
                "Class".into(),
                self.per_class
                    .iter()
                    .map(|r| r.class_label.clone())
                    .collect(),
            ),
            (
                "Correct".into(),
                self.per_class
                    .iter()
                    .map(|r| r.accepted_correct.to_string())
                    .collect(),
            ),
            (
                "Incorrect".into(),
                self.per_class
                    .iter()
                    .map(|r| r.accepted_incorrect.to_string())
                    .collect(),
            ),
            (
                "Rejected".into(),
                self.per_class
                    .iter()
                    .map(|r| r.rejected().to_string())
                    .collect(),
            ),
            (
                "Proportion of accepted incorrect".into(),
                self.per_class
                    .iter()
                    .map(|r| fmt_rate(r.accepted_error_proportion))
                    .collect(),
            ),
            (
                "Theoretical upper bound 1-gamma".into(),
                self.per_class
                    .iter()
                    .map(|r| format!("{:.2}", r.theoretical_accepted_error_ub))
                    .collect(),
            ),
            (
                "Conditional recall".into(),
                self.per_class
                    .iter()
                    .map(|r| fmt_rate(r.conditional_recall))
                    .collect(),
            ),
        ];
        if let Some(b) = baseline {
            rows.push((
                "Baseline recall".into(),
                b.iter().map(|r| fmt_rate(r.baseline_recall)).collect(),
            ));
        }
        rows.push((
            "Bound exceeded".into(),
            self.per_class
                .iter()
                .map(|r| if r.bound_violated { "yes" } else { "no" }.to_string())
                .collect(),
        ));

        let head = rows.iter().map(|(h, _)| h.len()).max().unwrap_or(0);
        let width = rows
            .iter()
            .flat_map(|(_, cells)| cells.iter().map(String::len))
            .max()
            .unwrap_or(0)
            .max(6);
        let mut out = String::new();
        for (h, cells) in &rows {
            let _ = write!(out, "{h:<head$}");
            for c in cells {
                let _ = write!(out, "  {c:>width$}");
            }
            out.push('\n');
        }
        let o = &self.overall;
        let _ = writeln!(
            out,
            "\nsamples: {}  accept-correct rate: {}  reject-incorrect rate: {}",
            self.sample_count,
            fmt_rate(o.accept_correct_rate),
            fmt_rate(o.reject_incorrect_rate)
        );
        if let Some(c) = &o.collapsed_bounds {
            let _ = writeln!(
                out,
                "prior-weighted bounds: accept >= {:.4}  reject >= {:.4}",
                c.accept_lb, c.reject_lb
            );
        }
        out
    }
}

impl BaselineComparison {
    pub fn render_table(&self) -> String {
        self.evaluation.render_rows(Some(&self.per_class))
    }
}
