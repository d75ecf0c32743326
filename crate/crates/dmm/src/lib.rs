//! Denoised method of moments for k-component Gaussian location mixtures.
//!
//! The pipeline estimates the moments of the mixing distribution with
//! Hermite-polynomial unbiased estimators, projects the noisy vector onto
//! the moment space of distributions on an interval, and inverts the result
//! by Gauss quadrature. Variants cover unknown component variance, mixtures
//! with unbounded means, and d-dimensional mixtures via random projections.

pub use nalgebra;

pub mod baselines;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod hermite;
pub mod metrics;
pub mod moment_space;
pub mod quadrature;

pub use distributions::{DiscreteDistribution, GaussianMixture, MomentVector};
pub use error::{DmmError, Result};
pub use estimators::{
    dmm_known_variance, estimate_d_dimensional, estimate_unbounded, lindsay_unknown_variance,
    EstimationReport, EstimatorConfig,
};
