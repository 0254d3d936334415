//! Prediction of final surface roughness for laser-micromachined workpieces
//! from laser parameters and photodiode emission traces.
//!
//! The crate covers the full monitoring pipeline:
//!
//! * [`dataset`] — experiment/sample data model, on-disk format, and a
//!   synthetic generator with a planted latent-quality signal,
//! * [`features`] — temporal, statistical, and spectral trace features
//!   (389 per sensor channel, 1556 per sample),
//! * [`preprocess`] — min-max normalization, train/test splits, k-fold plans,
//! * [`mlp`] — multi-layer perceptron regressor with analytic gradients,
//! * [`hpo`] — tree-structured Parzen estimator for hyperparameter search,
//! * [`attribution`] — Shapley-value attribution and feature ranking,
//! * [`forest`] — CART, random forest, and extremely randomized trees,
//! * [`metrics`] — R² / RMSE evaluation,
//! * [`model`] — the common regressor trait and the by-name model registry,
//! * [`pipeline`] — end-to-end experiment orchestration and report emission.

pub mod attribution;
pub mod dataset;
pub mod error;
pub mod features;
pub mod forest;
pub mod hpo;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod rng;

pub use error::{Error, Result};
