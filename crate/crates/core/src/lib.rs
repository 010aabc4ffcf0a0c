//! Similarity-of-trajectories forecasting for 15-minute traffic flow.
//!
//! The crate turns a station's flow series into overlapping trajectories,
//! forecasts each query observation from the targets of its nearest past
//! trajectories, wraps the forecasts in prediction intervals and scores
//! everything on a tune/test split. Interchangeable pieces (distances,
//! outlier policies, aggregators, forecasters, interval methods) are trait
//! objects created by name from [`registry::Registry`] instances.

pub mod benchmarks;
pub mod dataset;
pub mod distances;
pub mod error;
pub mod evaluation;
pub mod forecaster;
pub mod gridsearch;
pub mod ingestion;
pub mod intervals;
mod linalg;
pub mod metrics;
pub mod neighbors;
pub mod outliers;
pub mod pointcast;
pub mod registry;
pub mod synthdata;

pub use error::{Error, Result};
pub use forecaster::{parse_model, EvalContext, Forecaster};
pub use ingestion::TimeSeries;
