//! Weakly supervised error correctors for an existing classifier.
//!
//! A corrector moderates each decision of a base classifier: it projects the
//! classifier's feature vector to a scalar score with a per-class linear map
//! and rejects the decision when the score falls at or below an empirical
//! quantile of the scores of known errors. Every class comes with two
//! distribution-free guarantees computable from sample counts alone:
//!
//! * `gamma_j = rho(delta_j, M-_j)` lower-bounds the probability that an
//!   incorrect decision is rejected;
//! * `upsilon_j = 1 - psi(F+_j(theta_j), M+_j)` lower-bounds the probability
//!   that a correct decision is accepted.
//!
//! Modules:
//! * [`ecdf`]: empirical CDFs and their pseudo-inverse;
//! * [`bounds`]: `rho`, `psi` and related bound computations;
//! * [`projector`]: PCA reduction and Fisher discriminant score maps;
//! * [`corrector`]: fitting, decisions, and the model file;
//! * [`metrics`]: evaluation reports;
//! * [`sim`]: synthetic data and Monte-Carlo validation of the guarantees.

pub mod bounds;
pub mod corrector;
pub mod ecdf;
pub mod error;
pub mod metrics;
pub mod projector;
pub mod sim;

pub use bounds::{psi, rho, BoundPair, ClassBounds};
pub use corrector::{
    CorrectorModel, Decision, DeltaSpec, FitConfig, LabeledSample, Outcome, SplitMode,
};
pub use ecdf::EmpiricalCdf;
pub use error::{Error, Result};
pub use projector::{FeatureMatrix, FisherProjector, PcaBasis, PcaTarget};
