//! Known-variance pipeline: unbiased moment estimation, projection onto the
//! moment space, then Gauss quadrature.

use super::{default_interval, order_advisory, EstimatorConfig, EstimationReport};
use crate::distributions::{GaussianMixture, MomentVector};
use crate::error::{DmmError, Result};
use crate::hermite::{estimate_mixing_moments, median_of_batches};
use crate::moment_space::{nearest_feasible, project};
use crate::quadrature::gauss_quadrature;
use std::time::Instant;

/// Fits a k-component mixing distribution from samples with known component
/// variance. Always returns a model on finite input: the projection step
/// guarantees the quadrature sees a realizable moment vector.
pub fn dmm_known_variance(samples: &[f64], config: &EstimatorConfig) -> Result<EstimationReport> {
    let start = Instant::now();
    let sigma2 = config.sigma2.ok_or_else(|| {
        DmmError::InvalidDistribution("known-variance pipeline needs sigma2".into())
    })?;
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(DmmError::InvalidDistribution(format!(
            "sigma2 must be finite and non-negative, got {sigma2}"
        )));
    }
    if config.k == 0 {
        return Err(DmmError::InvalidDistribution("k must be positive".into()));
    }
    if samples.is_empty() {
        return Err(DmmError::InsufficientSamples { needed: 1, got: 0 });
    }

    let sigma = sigma2.sqrt();
    let order = 2 * config.k - 1;
    let estimate = if config.batches > 1 {
        median_of_batches(samples, order, sigma, config.batches)?
    } else {
        estimate_mixing_moments(samples, order, sigma)
    };
    let interval = config
        .interval
        .unwrap_or_else(|| default_interval(samples, sigma));
    let noisy = MomentVector::new(estimate.values, interval);

    let mut report = dmm_from_moments(&noisy, sigma2, config.projection_tol)?;
    if let Some(warning) = order_advisory(config.k, samples.len()) {
        report.diagnostics.push(warning);
    }
    report.wallclock = start.elapsed();
    Ok(report)
}

/// The denoise-and-invert core, starting from an already-assembled (possibly
/// infeasible) moment vector.
pub fn dmm_from_moments(
    noisy: &MomentVector,
    sigma2: f64,
    projection_tol: f64,
) -> Result<EstimationReport> {
    let start = Instant::now();
    let mut diagnostics = Vec::new();
    let (projected, distance) = match project(noisy, projection_tol) {
        Ok(result) => (result.projected, result.distance),
        Err(DmmError::ProjectionNonConvergence {
            iterations,
            residual,
            best,
        }) => {
            // The solver ran out of iterations; repair its best iterate so a
            // model still comes out.
            diagnostics.push(format!(
                "projection stopped at {iterations} iterations (residual {residual:.3e}); \
                 repaired the last iterate"
            ));
            let repaired =
                nearest_feasible(&MomentVector::new(best, noisy.interval()));
            let distance = repaired
                .values()
                .iter()
                .zip(noisy.values())
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                .sqrt();
            (repaired, distance)
        }
        Err(e) => return Err(e),
    };

    let mixing = gauss_quadrature(&projected)?;
    let detected_order = mixing.order();
    Ok(EstimationReport {
        model: GaussianMixture::new(mixing, sigma2)?,
        projection_distance: distance,
        detected_order,
        sigma_root_bracket: None,
        wallclock: start.elapsed(),
        diagnostics,
    })
}
