//! Sparse Bayesian probit regression with an overlapping-group horseshoe
//! prior over main effects and pairwise interactions, fitted by partially
//! factorized coordinate-ascent variational inference.
//!
//! The crate also provides a Gibbs sampler for the same model as a
//! reference, a simulation benchmark harness, evaluation metrics and an
//! ingestion pipeline that turns motif matches and attribution scores into
//! design matrices.

pub mod design;
pub mod error;
pub mod gibbs;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod normal;
pub mod posterior;
pub mod simulate;
pub mod vi;

pub use error::{Error, Result};
pub use model::{BinaryResponse, DesignMatrix, EffectColumn, EffectKind, FeatureMatrix, FitResult, IndicatorMatrix};
pub use vi::{fit, CovariancePath, FitConfig, VariationalState};
