//! Bi-level traffic incident duration modelling.
//!
//! The crate covers the whole experiment chain for incident-log data:
//!
//! * [`dataset`]: CSV ingestion, one-hot encoding, a seeded synthetic
//!   generator with planted effects, and duration profiling (ECDF, log-space
//!   histogram, log-normal / log-logistic / Weibull fits ranked by AIC).
//! * [`models`]: from-scratch CART, first- and second-order gradient boosting
//!   (with optional gradient-based one-side sampling), random forests, kNN and
//!   ridge / logistic linear models behind one fit/predict contract.
//! * [`outliers`]: Isolation Forest and Local Outlier Factor scoring plus
//!   top-percent record removal.
//! * [`metrics`]: precision / recall / accuracy / F1, F1-macro, MAPE, RMSE.
//! * [`labeling`]: duration thresholds to classes and the classification sweeps.
//! * [`tuning`]: fold construction, randomised search and the intra/extra
//!   joint optimisation of model and outlier-removal hyper-parameters.
//! * [`scenarios`]: train-on-X / test-on-Y regression scenarios, quantiled
//!   time-folding, and the pipeline / fusion composite models.
//! * [`importance`]: permutation importance and Monte-Carlo Shapley values.

pub mod dataset;
pub mod error;
pub mod importance;
pub mod labeling;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod outliers;
pub mod rng;
pub mod scenarios;
pub mod table;
pub mod tuning;

pub use error::{Error, Result};
pub use matrix::Matrix;
