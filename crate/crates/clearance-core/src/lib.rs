//! Core library for predicting and explaining homicide clearance from
//! MAP-schema victim records.
//!
//! The pipeline is organized as:
//!
//! - [`dataset`]: CSV ingestion, target derivation, filtering, deterministic
//!   splits and per-state partitions, plus a synthetic fixture generator.
//! - [`features`]: one-hot / count design matrices with a frozen, serializable
//!   schema (decade and age binning, the monthly-overlap flag).
//! - [`models`]: CART decision trees, random forests, gradient boosting,
//!   second-order regularized boosting, and penalized logistic regression,
//!   all predicting in log-odds (margin) space.
//! - [`shap`]: exact subset-enumeration Shapley values and the polynomial
//!   path algorithm for tree ensembles, with global and local reporting.
//! - [`eval`]: balanced accuracy / precision, stratified k-fold
//!   cross-validation, grid search, and the per-state model sweep.
//! - [`linkage`]: composite-key record linkage against a second homicide
//!   dataset with agreement accounting and outcome override.

pub mod dataset;
pub mod eval;
pub mod features;
pub mod linkage;
pub mod models;
pub mod report;
pub mod rng;
pub mod shap;
pub mod synth;

pub use dataset::{Dataset, Record, SplitPair};
pub use eval::{ConfusionMatrix, CvResult, GridResult, SweepResult};
pub use features::{FeatureMatrix, FeatureOptions, FeatureSchema};
pub use linkage::LinkResult;
pub use models::{Algorithm, Hyperparameters, Model};
pub use shap::{BackgroundSet, ShapExplanation};
