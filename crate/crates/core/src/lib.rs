//! Distributional regression for zero-adjusted (intermittent) targets.
//!
//! The crate covers the zero-adjusted inverse Gaussian and gamma families,
//! linear and P-spline GAMLSS fitting, distributional regression forests,
//! linear quantile regression used as a stacking combiner, the 17-algorithm
//! experiment roster and quantile-based evaluation metrics.

pub mod dist;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod forest;
pub mod gamlss;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod qreg;
pub mod rng;
pub mod special;

pub use dist::{Family, PredictiveDistribution, ZeroAdjustedParams};
pub use error::{Error, Result};
pub use features::{Dataset, Sample, ThreeWaySplit};
