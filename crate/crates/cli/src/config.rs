//! Fit settings from flags and an optional JSON config file.
//!
//! Flags override config values, which override defaults.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use corrector_core::projector::{DEFAULT_PCA_VARIANCE, DEFAULT_RIDGE};
use corrector_core::{DeltaSpec, FitConfig, PcaTarget, SplitMode};
use serde::Deserialize;

/// A value per label: one number for all, a list in label order, or a map.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LabelValues {
    One(f64),
    List(Vec<f64>),
    Map(BTreeMap<String, f64>),
}

impl LabelValues {
    /// Parses `0.9`, `0.9,0.8,0.7` or `a=0.9,b=0.8`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.iter().all(|p| p.contains('=')) {
            let mut map = BTreeMap::new();
            for p in parts {
                let (k, v) = p.split_once('=').expect("checked");
                let v: f64 = v
                    .trim()
                    .parse()
                    .with_context(|| format!("not a number: {v:?}"))?;
                if map.insert(k.trim().to_string(), v).is_some() {
                    bail!("label {} given twice", k.trim());
                }
            }
            return Ok(Self::Map(map));
        }
        let values = parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .with_context(|| format!("not a number: {p:?}"))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(match values.as_slice() {
            [v] => Self::One(*v),
            _ => Self::List(values),
        })
    }

    pub fn resolve(&self, labels: &[String]) -> Result<Vec<f64>> {
        match self {
            Self::One(v) => Ok(vec![*v; labels.len()]),
            Self::List(v) if v.len() == labels.len() => Ok(v.clone()),
            Self::List(v) => bail!("{} values given for {} labels", v.len(), labels.len()),
            Self::Map(m) => {
                if let Some(extra) = m.keys().find(|k| !labels.contains(k)) {
                    bail!("value given for unknown label {extra}");
                }
                labels
                    .iter()
                    .map(|l| {
                        m.get(l)
                            .copied()
                            .ok_or_else(|| anyhow!("class {l}: no value given"))
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub labels: Option<Vec<String>>,
    pub deltas: Option<LabelValues>,
    pub gamma_targets: Option<LabelValues>,
    pub pca_variance: Option<f64>,
    pub pca_k: Option<usize>,
    /// Projector fraction of a disjoint split.
    pub split: Option<f64>,
    pub seed: Option<u64>,
    pub ridge: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Fit flags as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct FitFlags {
    pub labels: Option<Vec<String>>,
    pub deltas: Option<LabelValues>,
    pub gamma_targets: Option<LabelValues>,
    pub pca_variance: Option<f64>,
    pub pca_k: Option<usize>,
    pub split: Option<f64>,
    pub seed: Option<u64>,
    pub ridge: Option<f64>,
}

pub const DEFAULT_SEED: u64 = 0;

/// Label set: flag, then config file, then the data file's directive.
pub fn resolve_labels(
    flags: &FitFlags,
    file: &FileConfig,
    declared: Option<&Vec<String>>,
) -> Result<Vec<String>> {
    flags
        .labels
        .clone()
        .or_else(|| file.labels.clone())
        .or_else(|| declared.cloned())
        .ok_or_else(|| {
            anyhow!("label set not declared; use --labels, a config file or a '# labels:' line")
        })
}

pub fn resolve_fit_config(
    flags: &FitFlags,
    file: &FileConfig,
    labels: &[String],
) -> Result<FitConfig> {
    // A flag of either kind overrides both config entries.
    let (deltas, targets) = if flags.deltas.is_some() || flags.gamma_targets.is_some() {
        (flags.deltas.clone(), flags.gamma_targets.clone())
    } else {
        (file.deltas.clone(), file.gamma_targets.clone())
    };
    let deltas = match (deltas, targets) {
        (Some(_), Some(_)) => bail!("give either deltas or gamma targets, not both"),
        (Some(d), None) => DeltaSpec::Deltas(d.resolve(labels)?),
        (None, Some(t)) => DeltaSpec::GammaTargets(t.resolve(labels)?),
        (None, None) => bail!("no rejection levels given; use --deltas or --gamma-targets"),
    };

    let (k, variance) = if flags.pca_k.is_some() || flags.pca_variance.is_some() {
        (flags.pca_k, flags.pca_variance)
    } else {
        (file.pca_k, file.pca_variance)
    };
    let pca_target = match (k, variance) {
        (Some(_), Some(_)) => bail!("give either a component count or a variance target, not both"),
        (Some(k), None) => PcaTarget::Components(k),
        (None, Some(v)) => PcaTarget::Variance(v),
        (None, None) => PcaTarget::Variance(DEFAULT_PCA_VARIANCE),
    };
    if let PcaTarget::Variance(v) = pca_target {
        if !(v > 0.0 && v <= 1.0) {
            bail!("variance target {v} outside (0,1]");
        }
    }

    let ridge = flags.ridge.or(file.ridge).unwrap_or(DEFAULT_RIDGE);
    if !(ridge > 0.0 && ridge.is_finite()) {
        bail!("ridge must be positive, got {ridge}");
    }
    let split = match flags.split.or(file.split) {
        None => SplitMode::Resubstitution,
        Some(fraction) => SplitMode::Disjoint {
            projector_fraction: fraction,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        },
    };
    Ok(FitConfig {
        deltas,
        pca_target,
        ridge,
        split,
    })
}
