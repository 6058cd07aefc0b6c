//! Linear score maps: a PCA reduction shared by all classes followed by a
//! per-class Fisher discriminant in the reduced space.
//!
//! The score of a feature vector `z` for class `j` is `w_j . T (z - mean)`,
//! where the rows of `T` are the leading principal directions of the pooled
//! correctly-classified features and `w_j` solves
//! `(Cov(T V+_j) + Cov(T V-_j)) w_j = T (Mean(V+_j) - Mean(V-_j))`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Default variance fraction retained by PCA.
pub const DEFAULT_PCA_VARIANCE: f64 = 0.9987;
/// Default ridge factor applied to ill-conditioned Fisher systems.
pub const DEFAULT_RIDGE: f64 = 1e-6;
/// Condition number above which the Fisher system is regularized.
pub const MAX_CONDITION: f64 = 1e8;

/// Dense matrix of feature vectors, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::EmptySample);
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidArgument("zero feature dimension".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self { data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(Error::EmptySample)?;
        for r in rows {
            if r.as_ref().len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.as_ref().len(),
                });
            }
        }
        let data = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i].as_ref()[j]);
        Self::new(data)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PcaTarget {
    Components(usize),
    /// Smallest `k` whose cumulative explained variance reaches this fraction.
    Variance(f64),
}

impl Default for PcaTarget {
    fn default() -> Self {
        PcaTarget::Variance(DEFAULT_PCA_VARIANCE)
    }
}

/// Principal directions (rows of `components`, orthonormal) and the centering vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    components: DMatrix<f64>,
    mean: DVector<f64>,
    explained_variance_ratio: Vec<f64>,
}

impl PcaBasis {
    /// Assembles a basis from stored parts, checking shapes and orthonormality.
    pub fn new(
        components: DMatrix<f64>,
        mean: DVector<f64>,
        explained_variance_ratio: Vec<f64>,
    ) -> Result<Self> {
        let (k, d) = components.shape();
        if k == 0 || d == 0 || k > d {
            return Err(Error::InvalidArgument(format!("bad PCA shape {k}x{d}")));
        }
        if mean.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: mean.len(),
            });
        }
        if explained_variance_ratio.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: explained_variance_ratio.len(),
            });
        }
        if components.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PCA basis"));
        }
        let gram = &components * components.transpose();
        let off = (gram - DMatrix::identity(k, k)).abs().max();
        if off > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "PCA components not orthonormal (max deviation {off:e})"
            )));
        }
        Ok(Self {
            components,
            mean,
            explained_variance_ratio,
        })
    }

    /// The `k x d` matrix `T`.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim(&self) -> usize {
        self.components.ncols()
    }

    /// `T (z - mean)`.
    pub fn transform(&self, z: &[f64]) -> Result<DVector<f64>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: z.len(),
            });
        }
        let centered = DVector::from_column_slice(z) - &self.mean;
        Ok(&self.components * centered)
    }

    /// Reduced coordinates of every row, as an `n x k` matrix.
    pub fn transform_rows(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        let mut centered = x.as_matrix().clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.components.transpose())
    }

    /// `mean + T^T y`, mapping reduced coordinates back to feature space.
    pub fn reconstruct(&self, y: &DVector<f64>) -> DVector<f64> {
        self.components.transpose() * y + &self.mean
    }
}

/// Centered PCA of the rows of `x` using the `n - 1` sample covariance.
pub fn fit_pca(x: &FeatureMatrix, target: PcaTarget) -> Result<PcaBasis> {
    let (n, d) = (x.rows(), x.dim());
    if n < 2 {
        return Err(Error::TooFewSamples {
            class: "*".into(),
            partition: "PCA",
            have: n,
            need: 2,
        });
    }
    let max_k = (n - 1).min(d);
    if let PcaTarget::Components(k) = target {
        if k == 0 || k > max_k {
            return Err(Error::ComponentCount { k, max: max_k });
        }
    }
    if let PcaTarget::Variance(v) = target {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "variance fraction {v} outside (0,1]"
            )));
        }
    }

    let data = x.as_matrix();
    let mean = data.row_mean().transpose();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / (n - 1) as f64;

    let scale = data.amax().max(f64::MIN_POSITIVE);
    let total: f64 = cov.trace();
    if total.is_nan() || total <= (scale * 1e-10).powi(2) {
        return Err(Error::ZeroVariance);
    }

    let eig = SymmetricEigen::try_new(cov, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("covariance eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();

    let k = match target {
        PcaTarget::Components(k) => k,
        PcaTarget::Variance(v) => {
            let mut cumulative = 0.0;
            let mut k = max_k;
            for (i, lambda) in eigenvalues.iter().enumerate().take(max_k) {
                cumulative += lambda;
                if cumulative / total >= v {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };

    let mut components = DMatrix::zeros(k, d);
    for (r, &i) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // Deterministic sign: largest-magnitude entry positive.
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        components.set_row(r, &v.transpose());
    }
    let ratios = eigenvalues.iter().take(k).map(|l| l / total).collect();
    PcaBasis::new(components, mean, ratios)
}

fn column_mean_and_cov(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / (n - 1) as f64;
    (mean, cov)
}

fn condition_number(s: &DMatrix<f64>) -> f64 {
    let eig = s.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Fisher discriminant direction separating the rows of `positives` from the
/// rows of `negatives` (both already in reduced coordinates).
///
/// If the summed covariance has condition number above [`MAX_CONDITION`],
/// `ridge * trace / k` is added to its diagonal before solving.
pub fn fisher_weights(
    positives: &DMatrix<f64>,
    negatives: &DMatrix<f64>,
    ridge: f64,
) -> Result<DVector<f64>> {
    let degenerate = || Error::DegenerateFisher { class: None };
    for (m, name) in [(positives, "positive"), (negatives, "negative")] {
        if m.nrows() < 2 {
            return Err(Error::TooFewSamples {
                class: "*".into(),
                partition: name,
                have: m.nrows(),
                need: 2,
            });
        }
    }
    if positives.ncols() != negatives.ncols() {
        return Err(Error::DimensionMismatch {
            expected: positives.ncols(),
            found: negatives.ncols(),
        });
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge {ridge} must be >= 0"
        )));
    }
    let k = positives.ncols();

    let (mean_pos, cov_pos) = column_mean_and_cov(positives);
    let (mean_neg, cov_neg) = column_mean_and_cov(negatives);
    let diff = &mean_pos - &mean_neg;
    let scale = mean_pos.amax().max(mean_neg.amax());
    if diff.amax() <= 16.0 * f64::EPSILON * scale {
        return Err(degenerate());
    }

    let mut scatter = cov_pos + cov_neg;
    if condition_number(&scatter) > MAX_CONDITION {
        let shift = ridge * scatter.trace() / k as f64;
        for i in 0..k {
            scatter[(i, i)] += shift;
        }
        if condition_number(&scatter).is_infinite() {
            return Err(degenerate());
        }
    }
    let weights = scatter.cholesky().ok_or_else(degenerate)?.solve(&diff);
    if weights.iter().any(|v| !v.is_finite()) || weights.dot(&diff) <= 0.0 {
        return Err(degenerate());
    }
    Ok(weights)
}

/// Score map `h_j(z) = w . T (z - mean)` for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherProjector {
    class_label: String,
    weights: DVector<f64>,
    pca: Arc<PcaBasis>,
}

impl FisherProjector {
    pub fn new(
        class_label: impl Into<String>,
        weights: DVector<f64>,
        pca: Arc<PcaBasis>,
    ) -> Result<Self> {
        if weights.len() != pca.k() {
            return Err(Error::DimensionMismatch {
                expected: pca.k(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Fisher weights"));
        }
        if weights.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateFisher {
                class: Some(class_label.into()),
            });
        }
        Ok(Self {
            class_label: class_label.into(),
            weights,
            pca,
        })
    }

    pub fn class_label(&self) -> &str {
        &self.class_label
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn pca(&self) -> &Arc<PcaBasis> {
        &self.pca
    }

    pub fn project(&self, z: &[f64]) -> Result<f64> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(self.weights.dot(&self.pca.transform(z)?))
    }

    pub fn project_rows(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok((self.pca.transform_rows(x)? * &self.weights)
            .iter()
            .copied()
            .collect())
    }
}

/// Fits the Fisher projector for one class; correctly classified samples score higher.
pub fn fit_fisher(
    class_label: &str,
    pca: Arc<PcaBasis>,
    positives: &FeatureMatrix,
    negatives: &FeatureMatrix,
    ridge: f64,
) -> Result<FisherProjector> {
    let pos = pca.transform_rows(positives)?;
    let neg = pca.transform_rows(negatives)?;
    let weights = fisher_weights(&pos, &neg, ridge).map_err(|e| match e {
        Error::DegenerateFisher { .. } => Error::DegenerateFisher {
            class: Some(class_label.to_string()),
        },
        Error::TooFewSamples {
            partition,
            have,
            need,
            ..
        } => Error::TooFewSamples {
            class: class_label.to_string(),
            partition,
            have,
            need,
        },
        other => other,
    })?;
    FisherProjector::new(class_label, weights, pca)
}
