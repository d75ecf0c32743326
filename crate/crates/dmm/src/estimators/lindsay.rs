//! Unknown-variance pipeline: the variance is the smallest positive root of
//! the Hankel determinant of deconvolved moments, after which the problem
//! reduces to the known-variance inversion.

use super::{default_interval, order_advisory, EstimatorConfig, EstimationReport};
use crate::distributions::{DiscreteDistribution, GaussianMixture, MomentVector};
use crate::error::{DmmError, Result};
use crate::hermite::estimate_mixing_moments;
use crate::moment_space::{is_valid, nearest_feasible, project, HankelMatrix};
use crate::quadrature::gauss_quadrature;
use std::time::Instant;

/// Finds the smallest root of `d` on `(0, upper]` by a sign scan over a
/// combined geometric and linear grid (over 200 points) followed by
/// bisection. Returns the root and the grid bracket that contained it.
pub fn smallest_positive_root<F: Fn(f64) -> f64>(
    d: F,
    upper: f64,
    root_tol: f64,
) -> Result<(f64, (f64, f64))> {
    assert!(upper > 0.0 && root_tol > 0.0);
    let mut grid: Vec<f64> = (0..100)
        .map(|i| upper * 1e-8_f64.powf(1.0 - i as f64 / 99.0))
        .collect();
    grid.extend((1..=128).map(|i| upper * i as f64 / 128.0));
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut prev: Option<(f64, f64)> = None;
    for &sigma in &grid {
        let value = d(sigma);
        if value <= 0.0 {
            let (lo, lo_val) = match prev {
                Some(p) => p,
                None => {
                    return Err(DmmError::DegenerateSystem(format!(
                        "determinant is not positive near zero (d({sigma:.3e}) = {value:.3e})"
                    )))
                }
            };
            debug_assert!(lo_val > 0.0);
            let bracket = (lo, sigma);
            let (mut lo, mut hi) = bracket;
            for _ in 0..200 {
                if hi - lo <= root_tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if d(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok((0.5 * (lo + hi), bracket));
        }
        prev = Some((sigma, value));
    }
    // A root exactly at the endpoint can evaluate as a positive rounding
    // residue; accept it when the value is negligible at the scan's scale.
    let scale = grid
        .iter()
        .map(|&s| d(s).abs())
        .fold(0.0f64, f64::max);
    let at_upper = d(upper);
    if at_upper.abs() <= 1e-9 * (1.0 + scale) {
        let below = upper * (1.0 - 1e-9);
        return Ok((upper, (below, upper)));
    }
    Err(DmmError::NoRootBracket { upper })
}

/// Hankel determinant of the deconvolved moment sequence at scale `sigma`,
/// evaluated numerically.
fn hankel_determinant(samples: &[f64], k: usize, sigma: f64) -> f64 {
    let estimate = estimate_mixing_moments(samples, 2 * k, sigma);
    let mut seq = Vec::with_capacity(2 * k + 1);
    seq.push(1.0);
    seq.extend_from_slice(&estimate.values);
    HankelMatrix::from_moments(&seq, 0, 2 * k)
        .expect("even-span Hankel block")
        .determinant()
}

/// Fits a k-component mixture with unknown component variance.
pub fn lindsay_unknown_variance(
    samples: &[f64],
    config: &EstimatorConfig,
) -> Result<EstimationReport> {
    let start = Instant::now();
    let k = config.k;
    if k == 0 {
        return Err(DmmError::InvalidDistribution("k must be positive".into()));
    }
    let n = samples.len();
    if n < 2 * k - 1 {
        return Err(DmmError::InsufficientSamples {
            needed: 2 * k - 1,
            got: n,
        });
    }

    let mean = samples.iter().sum::<f64>() / n as f64;
    let s2 = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let mut diagnostics = Vec::new();
    if let Some(warning) = order_advisory(k, n) {
        diagnostics.push(warning);
    }

    if k == 1 {
        // d_1(sigma) = s^2 - sigma^2, so the root is the sample deviation.
        let s = s2.sqrt();
        return Ok(EstimationReport {
            model: GaussianMixture::new(DiscreteDistribution::point_mass(mean), s2)?,
            projection_distance: 0.0,
            detected_order: 1,
            sigma_root_bracket: Some((s, s)),
            wallclock: start.elapsed(),
            diagnostics,
        });
    }
    if !(s2 > 0.0) {
        return Err(DmmError::DegenerateSystem(
            "sample variance is zero; no mixture with positive noise fits".into(),
        ));
    }

    let s = s2.sqrt();
    let (sigma_hat, bracket) = smallest_positive_root(
        |sigma| hankel_determinant(samples, k, sigma),
        s,
        config.root_tol_factor * s,
    )?;

    let full = estimate_mixing_moments(samples, 2 * k, sigma_hat);
    let interval = config
        .interval
        .unwrap_or_else(|| default_interval(samples, sigma_hat));
    let full_mv = MomentVector::new(full.values.clone(), interval);
    let (valid, violation) = is_valid(&full_mv);
    let scale = 1.0
        + full
            .values
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
    if !valid && violation < -5e-2 * scale {
        // The determinant root does not correspond to any k-atomic mixing
        // distribution; the moment equations have no solution.
        return Err(DmmError::MomentEquationsUnsolvable(format!(
            "deconvolved moments at sigma = {sigma_hat:.6} violate realizability \
             (worst certificate eigenvalue {violation:.3e})"
        )));
    }
    if !valid {
        diagnostics.push(format!(
            "deconvolved moments marginally infeasible ({violation:.3e}); projecting"
        ));
    }

    let noisy = full_mv.truncated(2 * k - 1);
    let (projected, distance) = match project(&noisy, config.projection_tol) {
        Ok(result) => (result.projected, result.distance),
        Err(DmmError::ProjectionNonConvergence {
            iterations,
            residual,
            best,
        }) => {
            diagnostics.push(format!(
                "projection stopped at {iterations} iterations (residual {residual:.3e}); \
                 repaired the last iterate"
            ));
            (nearest_feasible(&MomentVector::new(best, interval)), 0.0)
        }
        Err(e) => return Err(e),
    };

    let mixing = gauss_quadrature(&projected)?;
    let detected_order = mixing.order();
    Ok(EstimationReport {
        model: GaussianMixture::new(mixing, sigma_hat * sigma_hat)?,
        projection_distance: distance,
        detected_order,
        sigma_root_bracket: Some(bracket),
        wallclock: start.elapsed(),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::wasserstein1;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn root_of_simple_polynomial() {
        let (root, _) = smallest_positive_root(|s| 1.0 - s * s, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(root, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn root_selection_takes_smallest() {
        let d = |s: f64| (s * s - 0.25) * (s * s - 1.0);
        let (root, _) = smallest_positive_root(d, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(root, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn root_scan_reports_missing_bracket() {
        match smallest_positive_root(|_| 1.0, 2.0, 1e-12) {
            Err(DmmError::NoRootBracket { upper }) => assert_eq!(upper, 2.0),
            other => panic!("expected NoRootBracket, got {other:?}"),
        }
    }

    #[test]
    fn pure_gaussian_root_near_one() {
        let gaussian = GaussianMixture::new(DiscreteDistribution::point_mass(0.0), 1.0).unwrap();
        let samples = gaussian.sample(1_000_000, 41);
        let config = EstimatorConfig::new(2);
        let report = lindsay_unknown_variance(&samples, &config).unwrap();
        let sigma_hat = report.model.sigma2.sqrt();
        assert!((sigma_hat - 1.0).abs() <= 0.05, "sigma = {sigma_hat}");
    }

    #[test]
    fn k1_reduces_to_sample_statistics() {
        let samples = vec![1.0, 2.0, 3.0, 6.0];
        let report = lindsay_unknown_variance(&samples, &EstimatorConfig::new(1)).unwrap();
        assert_abs_diff_eq!(report.model.mixing.atoms()[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.model.sigma2, 3.5, epsilon = 1e-12);
    }

    #[test]
    fn two_component_recovery() {
        let mixing =
            DiscreteDistribution::new(vec![-0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let model = GaussianMixture::new(mixing.clone(), 0.25).unwrap();
        let samples = model.sample(100_000, 53);
        let report = lindsay_unknown_variance(&samples, &EstimatorConfig::new(2)).unwrap();
        assert!((report.model.sigma2 - 0.25).abs() <= 0.1);
        assert!(wasserstein1(&report.model.mixing, &mixing) <= 0.2);
    }

    #[test]
    fn counterexample_dataset_rejected() {
        let r7 = 7.0f64.sqrt();
        let samples = vec![-r7, r7, 0.0, 0.0, 0.0, 0.0, 0.0];
        match lindsay_unknown_variance(&samples, &EstimatorConfig::new(2)) {
            Err(DmmError::MomentEquationsUnsolvable(_)) => {}
            other => panic!("expected unsolvable diagnostic, got {other:?}"),
        }
    }

    #[test]
    fn scale_equivariance() {
        let mixing =
            DiscreteDistribution::new(vec![-1.0, 1.0], vec![0.4, 0.6]).unwrap();
        let model = GaussianMixture::new(mixing, 0.25).unwrap();
        let samples = model.sample(20_000, 61);
        let scaled: Vec<f64> = samples.iter().map(|x| 2.0 * x).collect();
        let base = lindsay_unknown_variance(&samples, &EstimatorConfig::new(2)).unwrap();
        let big = lindsay_unknown_variance(&scaled, &EstimatorConfig::new(2)).unwrap();
        assert_abs_diff_eq!(big.model.sigma2, 4.0 * base.model.sigma2, epsilon = 1e-5);
        for (a, b) in base
            .model
            .mixing
            .atoms()
            .iter()
            .zip(big.model.mixing.atoms())
        {
            assert!((2.0 * a - b).abs() <= 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn implicit_denoising_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..100 {
            let atoms = vec![rng.gen_range(-1.0..-0.2), rng.gen_range(0.2..1.0)];
            let w = rng.gen_range(0.2..0.8);
            let mixing = DiscreteDistribution::new(atoms, vec![w, 1.0 - w]).unwrap();
            let model =
                GaussianMixture::new(mixing, rng.gen_range(0.05..0.5)).unwrap();
            let samples = model.sample(3000, rng.gen());
            let report =
                lindsay_unknown_variance(&samples, &EstimatorConfig::new(2)).unwrap();
            assert!(report.model.mixing.order() <= 2);
        }
    }

    #[test]
    fn rejects_too_few_samples() {
        assert!(matches!(
            lindsay_unknown_variance(&[0.0, 1.0], &EstimatorConfig::new(2)),
            Err(DmmError::InsufficientSamples { needed: 3, got: 2 })
        ));
    }
}
