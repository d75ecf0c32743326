//! Random-projection wrapper for d-dimensional mixtures with known
//! covariance: one base direction fixes the weights and the component order,
//! and d perturbed directions recover the mean coordinates by finite
//! differences.

use super::{dmm_known_variance, EstimatorConfig, EstimationReport};
use crate::error::{DmmError, Result};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Weights and d-dimensional means recovered from the projections.
#[derive(Debug, Clone)]
pub struct MultiDimEstimate {
    pub weights: Vec<f64>,
    /// One mean per component, each of length d, ordered to match `weights`.
    pub means: Vec<Vec<f64>>,
    /// Report of the base-direction fit.
    pub base_report: EstimationReport,
    pub diagnostics: Vec<String>,
}

/// Estimates a k-component mixture in d dimensions with known covariance.
/// `tau` is the basis perturbation step, `rho` bounds the projected means.
pub fn estimate_d_dimensional(
    samples: &[Vec<f64>],
    covariance: &DMatrix<f64>,
    config: &EstimatorConfig,
    tau: f64,
    rho: f64,
    seed: u64,
) -> Result<MultiDimEstimate> {
    if samples.is_empty() {
        return Err(DmmError::InsufficientSamples { needed: 1, got: 0 });
    }
    let d = samples[0].len();
    if d == 0 || samples.iter().any(|x| x.len() != d) {
        return Err(DmmError::LengthMismatch(
            "samples must share a positive dimension".into(),
        ));
    }
    if covariance.nrows() != d || covariance.ncols() != d {
        return Err(DmmError::LengthMismatch(format!(
            "covariance is {}x{}, samples have dimension {d}",
            covariance.nrows(),
            covariance.ncols()
        )));
    }
    if !(tau > 0.0) || !(rho > 0.0) {
        return Err(DmmError::InvalidDistribution(
            "tau and rho must be positive".into(),
        ));
    }
    let sym = (covariance + covariance.transpose()) * 0.5;
    let min_eig = sym
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        return Err(DmmError::DegenerateSystem(
            "covariance must be positive definite".into(),
        ));
    }

    // Random orthonormal basis via QR of a Gaussian matrix.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = if d == 1 {
        DMatrix::from_element(1, 1, 1.0)
    } else {
        let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        g.qr().q()
    };
    let project = |direction: &DVector<f64>| -> Vec<f64> {
        samples
            .iter()
            .map(|x| direction.iter().zip(x).map(|(r, xi)| r * xi).sum())
            .collect()
    };

    let r = basis.column(0).into_owned();
    let base_variance = (&sym * &r).dot(&r);
    let base_config = EstimatorConfig {
        sigma2: Some(base_variance),
        interval: Some((-rho, rho)),
        ..config.clone()
    };
    let base_report = dmm_known_variance(&project(&r), &base_config)?;
    let base_means = base_report.model.mixing.atoms().to_vec();
    let weights = base_report.model.mixing.weights().to_vec();
    let k_found = base_means.len();

    let mut means = vec![vec![0.0; d]; k_found];
    let mut diagnostics = Vec::new();
    for i in 0..d {
        let b = basis.column(i).into_owned();
        let r_prime = &r + &b * tau;
        let variance = (&sym * &r_prime).dot(&r_prime);
        let sub_config = EstimatorConfig {
            sigma2: Some(variance),
            interval: Some((-rho - tau * rho, rho + tau * rho)),
            ..config.clone()
        };
        let report = dmm_known_variance(&project(&r_prime), &sub_config)?;
        let perturbed = report.model.mixing.atoms();
        if perturbed.len() != k_found {
            return Err(DmmError::DirectionMismatch(format!(
                "direction {i} found {} components, base direction found {k_found}",
                perturbed.len()
            )));
        }
        // Atoms are sorted on both directions; matching is by rank.
        for (j, mean) in means.iter_mut().enumerate() {
            let coord = (perturbed[j] - base_means[j]) / tau;
            for (m, bl) in mean.iter_mut().zip(b.iter()) {
                *m += bl * coord;
            }
        }
        diagnostics.extend(
            report
                .diagnostics
                .into_iter()
                .map(|note| format!("direction {i}: {note}")),
        );
    }

    Ok(MultiDimEstimate {
        weights,
        means,
        base_report,
        diagnostics,
    })
}
