//! Partial-identification bounds for data-fusion estimands.
//!
//! Two data sets observe `(X, Y)` and `(X, Z)` on disjoint subjects, so the
//! joint law of `(Y, Z)` is never seen and targets of the form
//! `E[h(Y, Z, X)]` with decomposable `h = f(y,x)ᵀ g(z,x)` are only partially
//! identifiable. This crate computes closed-form outer bounds on the
//! identifiable region from conditional first and second moments, estimates
//! those bounds with cross-fitted debiased (double machine learning)
//! estimators, and builds confidence intervals that cover the whole region.
//!
//! The pieces:
//!
//! - [`numerics`]: dense symmetric PSD primitives (matrix square root, the
//!   trace term of the moment bound, finite-difference gradients).
//! - [`dataset`]: the fused two-sample data layout with per-row missingness.
//! - [`nuisance`]: cross-fitting folds and built-in learners for the five
//!   conditional functions (means, variances, propensity).
//! - [`estimator`]: plug-in bounds, efficient influence functions, the
//!   cross-fitted interval estimator, identifiable-moment estimation and the
//!   delta-method composer (including the OLS-coefficient target).
//! - [`oracle`]: exact tight bounds on small discrete instances via monotone
//!   couplings, used to validate the outer-bound property.
//! - [`sim`]: seeded data-generating processes and a Monte Carlo coverage
//!   harness.

pub mod dataset;
pub mod estimator;
pub mod exec;
pub mod numerics;
pub mod nuisance;
pub mod oracle;
pub mod sim;

pub use dataset::FusedDataset;
pub use estimator::{DecomposableEstimand, IntervalResult};
