//! Estimation pipelines: denoised method of moments with known variance,
//! Lindsay's moment estimator for unknown variance, the clustering wrapper
//! for unbounded means, and the random-projection wrapper for d dimensions.

mod known;
mod lindsay;
mod multidim;
mod unbounded;

pub use known::{dmm_from_moments, dmm_known_variance};
pub use lindsay::{lindsay_unknown_variance, smallest_positive_root};
pub use multidim::{estimate_d_dimensional, MultiDimEstimate};
pub use unbounded::{estimate_unbounded, UnboundedOptions, UnboundedReport};

use crate::distributions::GaussianMixture;
use crate::error::Result;
use crate::moment_space::DEFAULT_PROJECTION_TOL;
use serde_json::json;
use std::time::Duration;

/// Shared knobs across the pipelines.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    /// Number of mixture components to fit.
    pub k: usize,
    /// Interval believed to contain all means; data-driven default when
    /// absent.
    pub interval: Option<(f64, f64)>,
    /// Known component variance; `None` routes to the unknown-variance
    /// pipeline.
    pub sigma2: Option<f64>,
    /// Median-of-batches count for the moment pass; 1 means plain averaging.
    pub batches: usize,
    /// Confidence parameter carried into wrapper defaults.
    pub high_prob_delta: Option<f64>,
    pub projection_tol: f64,
    /// Relative threshold for Hankel determinant rank decisions.
    pub rank_tol: f64,
    /// Root tolerance for the variance search, relative to the sample
    /// standard deviation.
    pub root_tol_factor: f64,
}

impl EstimatorConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            interval: None,
            sigma2: None,
            batches: 1,
            high_prob_delta: None,
            projection_tol: DEFAULT_PROJECTION_TOL,
            rank_tol: 1e-8,
            root_tol_factor: 1e-10,
        }
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = Some(sigma2);
        self
    }

    pub fn with_interval(mut self, a: f64, b: f64) -> Self {
        self.interval = Some((a, b));
        self
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.batches = batches.max(1);
        self
    }
}

/// Outcome of one pipeline run, with enough diagnostics to reconstruct what
/// happened.
#[derive(Debug, Clone)]
pub struct EstimationReport {
    pub model: GaussianMixture,
    /// Euclidean distance moved by the denoising projection.
    pub projection_distance: f64,
    /// Number of atoms in the returned mixing distribution.
    pub detected_order: usize,
    /// Bracket around the variance root, unknown-variance pipeline only.
    pub sigma_root_bracket: Option<(f64, f64)>,
    pub wallclock: Duration,
    pub diagnostics: Vec<String>,
}

impl EstimationReport {
    pub fn to_json(&self) -> String {
        json!({
            "model": {
                "weights": self.model.mixing.weights(),
                "means": self.model.mixing.atoms(),
                "sigma2": self.model.sigma2,
            },
            "projection_distance": self.projection_distance,
            "detected_order": self.detected_order,
            "sigma_root_bracket": self.sigma_root_bracket,
            "wallclock_ms": self.wallclock.as_secs_f64() * 1e3,
            "diagnostics": self.diagnostics,
        })
        .to_string()
    }
}

/// One merged cluster from the unbounded-means wrapper.
#[derive(Debug, Clone)]
pub struct ClusterInterval {
    pub center: f64,
    pub half_length: f64,
    /// Indices (into the original sample array) of the estimation samples
    /// assigned to this interval.
    pub members: Vec<usize>,
}

impl ClusterInterval {
    pub fn bounds(&self) -> (f64, f64) {
        (self.center - self.half_length, self.center + self.half_length)
    }
}

/// Density of the fitted mixture at `x`.
pub fn density_estimate(report: &EstimationReport, x: f64) -> Result<f64> {
    report.model.density(x)
}

/// Data-driven fallback interval: the sample range widened by three noise
/// standard deviations on each side.
fn default_interval(samples: &[f64], sigma: f64) -> (f64, f64) {
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 3.0 * sigma;
    if hi - lo + 2.0 * pad < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo - pad, hi + pad)
    }
}

/// The number of resolvable components grows like log n / log log n; flag
/// requests well beyond that.
fn order_advisory(k: usize, n: usize) -> Option<String> {
    if n < 16 {
        return None;
    }
    let nf = n as f64;
    let cap = 2.0 * nf.ln() / nf.ln().ln();
    if k as f64 > cap {
        Some(format!(
            "k = {k} exceeds the resolvable-order guideline {cap:.1} for n = {n}"
        ))
    } else {
        None
    }
}
