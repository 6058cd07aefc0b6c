//! Versioned JSON model document.
//!
//! Field names are part of the file format. Numbers are written with
//! shortest round-trip formatting and parsed exactly, so a saved model
//! reproduces decisions bit for bit.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ClassCorrector, CorrectorModel, Provenance};
use crate::bounds::ClassBounds;
use crate::error::{Error, Result};
use crate::projector::{FisherProjector, PcaBasis};

pub const SCHEMA_VERSION: u32 = 1;
pub const FORMAT_NAME: &str = "weak-corrector-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaDocument {
    pub mean: Vec<f64>,
    /// Row-major `k x d`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDocument {
    pub label: String,
    pub weights: Vec<f64>,
    pub threshold: f64,
    pub delta: f64,
    pub m_plus: u64,
    pub m_minus: u64,
    pub f_plus_at_theta: f64,
    pub gamma: f64,
    pub upsilon: f64,
    pub upsilon_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub format: String,
    pub labels: Vec<String>,
    pub feature_dim: usize,
    pub components: usize,
    pub pca: PcaDocument,
    pub classes: Vec<ClassDocument>,
    pub provenance: Provenance,
}

impl ModelDocument {
    pub fn from_model(model: &CorrectorModel) -> Self {
        let pca = &model.pca;
        Self {
            schema_version: SCHEMA_VERSION,
            format: FORMAT_NAME.to_string(),
            labels: model.label_set.clone(),
            feature_dim: pca.dim(),
            components: pca.k(),
            pca: PcaDocument {
                mean: pca.mean().iter().copied().collect(),
                components: pca
                    .components()
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect(),
                explained_variance_ratio: pca.explained_variance_ratio().to_vec(),
            },
            classes: model
                .per_class
                .iter()
                .map(|c| ClassDocument {
                    label: c.class_label.clone(),
                    weights: c.projector.weights().iter().copied().collect(),
                    threshold: c.threshold,
                    delta: c.delta,
                    m_plus: c.m_plus,
                    m_minus: c.m_minus,
                    f_plus_at_theta: c.f_plus_at_theta,
                    gamma: c.bounds.gamma,
                    upsilon: c.bounds.upsilon,
                    upsilon_raw: c.bounds.upsilon_raw,
                })
                .collect(),
            provenance: model.provenance.clone(),
        }
    }

    /// Parses a document, checking the schema version before anything else.
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Model("missing schema_version".into()))?;
        if version != SCHEMA_VERSION as u64 {
            return Err(Error::UnsupportedVersion {
                found: version.min(u32::MAX as u64) as u32,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn into_model(self) -> Result<CorrectorModel> {
        let bad = |msg: String| Error::Model(msg);
        if self.format != FORMAT_NAME {
            return Err(bad(format!("unexpected format {:?}", self.format)));
        }
        if self.labels.is_empty() {
            return Err(bad("empty label set".into()));
        }
        let unique: HashSet<&String> = self.labels.iter().collect();
        if unique.len() != self.labels.len() {
            return Err(bad("duplicate labels".into()));
        }
        if self.classes.len() != self.labels.len() {
            return Err(bad(format!(
                "{} class entries for {} labels",
                self.classes.len(),
                self.labels.len()
            )));
        }
        let (d, k) = (self.feature_dim, self.components);
        if self.pca.mean.len() != d {
            return Err(bad(format!(
                "pca.mean has {} entries, feature_dim is {d}",
                self.pca.mean.len()
            )));
        }
        if self.pca.components.len() != k || self.pca.components.iter().any(|r| r.len() != d) {
            return Err(bad(format!("pca.components is not {k}x{d}")));
        }
        let components = DMatrix::from_fn(k, d, |i, j| self.pca.components[i][j]);
        let pca = Arc::new(
            PcaBasis::new(
                components,
                DVector::from_vec(self.pca.mean),
                self.pca.explained_variance_ratio,
            )
            .map_err(|e| bad(e.to_string()))?,
        );

        let mut per_class = Vec::with_capacity(self.classes.len());
        for (label, c) in self.labels.iter().zip(self.classes) {
            if &c.label != label {
                return Err(bad(format!(
                    "class entry {} out of label order (expected {label})",
                    c.label
                )));
            }
            if c.weights.len() != k {
                return Err(bad(format!(
                    "class {label}: {} weights, expected {k}",
                    c.weights.len()
                )));
            }
            if !c.threshold.is_finite() || !c.f_plus_at_theta.is_finite() {
                return Err(bad(format!("class {label}: non-finite threshold")));
            }
            if !(c.delta > 0.0 && c.delta < 1.0) {
                return Err(bad(format!(
                    "class {label}: delta {} outside (0,1)",
                    c.delta
                )));
            }
            if c.m_plus == 0 || c.m_minus == 0 {
                return Err(bad(format!("class {label}: zero sample count")));
            }
            for (name, v) in [
                ("gamma", c.gamma),
                ("upsilon", c.upsilon),
                ("f_plus_at_theta", c.f_plus_at_theta),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad(format!("class {label}: {name} {v} outside [0,1]")));
                }
            }
            let projector =
                FisherProjector::new(label.clone(), DVector::from_vec(c.weights), pca.clone())
                    .map_err(|e| bad(e.to_string()))?;
            per_class.push(ClassCorrector {
                class_label: label.clone(),
                projector,
                threshold: c.threshold,
                delta: c.delta,
                m_plus: c.m_plus,
                m_minus: c.m_minus,
                f_plus_at_theta: c.f_plus_at_theta,
                bounds: ClassBounds {
                    upsilon: c.upsilon,
                    upsilon_raw: c.upsilon_raw,
                    gamma: c.gamma,
                    delta: c.delta,
                    m_plus: c.m_plus,
                    m_minus: c.m_minus,
                },
            });
        }
        Ok(CorrectorModel {
            label_set: self.labels,
            pca,
            per_class,
            provenance: self.provenance,
        })
    }
}
