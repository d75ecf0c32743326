//! EM baseline for Gaussian location mixtures with a shared component
//! variance, used as the comparison point in benchmarks.

use crate::distributions::{DiscreteDistribution, GaussianMixture};
use crate::error::{DmmError, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

/// Settings for [`em_fit`].
#[derive(Debug, Clone)]
pub struct EmConfig {
    pub k: usize,
    /// Shared component variance; `None` estimates it jointly.
    pub sigma2: Option<f64>,
    pub max_iters: usize,
    /// Stop when the log-likelihood improves by less than this.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl EmConfig {
    pub fn new(k: usize, sigma2: Option<f64>, seed: u64) -> Self {
        Self {
            k,
            sigma2,
            max_iters: 5000,
            tol: 1e-3,
            restarts: 5,
            seed,
        }
    }
}

/// A fitted mixture with its final log-likelihood and iteration count of the
/// winning restart.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub mixture: GaussianMixture,
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// Average log-likelihood terms summed over the sample, with the per-point
/// sums computed by log-sum-exp.
pub fn log_likelihood(samples: &[f64], weights: &[f64], means: &[f64], sigma2: f64) -> f64 {
    let half_log = 0.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
    samples
        .iter()
        .map(|&x| {
            let logs: Vec<f64> = weights
                .iter()
                .zip(means)
                .map(|(&w, &m)| w.max(1e-300).ln() - (x - m) * (x - m) / (2.0 * sigma2) - half_log)
                .collect();
            log_sum_exp(&logs)
        })
        .sum()
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Fits a k-component location mixture by EM with random restarts: means
/// drawn uniformly over the sample range, weights from a flat Dirichlet.
/// Deterministic given the seed; ties between restarts go to the earliest.
pub fn em_fit(samples: &[f64], config: &EmConfig) -> Result<EmFit> {
    if config.k == 0 {
        return Err(DmmError::InvalidDistribution("k must be positive".into()));
    }
    if samples.len() < 2 {
        return Err(DmmError::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if let Some(s2) = config.sigma2 {
        if !(s2 > 0.0) {
            return Err(DmmError::DegenerateDensity);
        }
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut best: Option<EmFit> = None;
    for _ in 0..config.restarts.max(1) {
        let means: Vec<f64> = (0..config.k)
            .map(|_| if hi > lo { rng.gen_range(lo..hi) } else { lo })
            .collect();
        let weights: Vec<f64> = if config.k == 1 {
            vec![1.0]
        } else {
            Dirichlet::new(&vec![1.0; config.k])
                .expect("valid concentration")
                .sample(&mut rng)
        };
        let fit = run_em(samples, means, weights, config)?;
        let better = match &best {
            None => true,
            Some(b) => fit.log_likelihood > b.log_likelihood,
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn run_em(
    samples: &[f64],
    mut means: Vec<f64>,
    mut weights: Vec<f64>,
    config: &EmConfig,
) -> Result<EmFit> {
    let n = samples.len();
    let k = config.k;
    let sample_var = {
        let mean = samples.iter().sum::<f64>() / n as f64;
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64
    };
    let mut sigma2 = config.sigma2.unwrap_or(sample_var.max(1e-12));

    let mut prev_ll = f64::NEG_INFINITY;
    let mut responsibilities = vec![0.0f64; n * k];
    let mut iterations = config.max_iters;
    for iter in 0..config.max_iters {
        // E-step.
        let half_log = 0.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
        let mut ll = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let logs: Vec<f64> = (0..k)
                .map(|j| {
                    weights[j].max(1e-300).ln()
                        - (x - means[j]) * (x - means[j]) / (2.0 * sigma2)
                        - half_log
                })
                .collect();
            let lse = log_sum_exp(&logs);
            ll += lse;
            for j in 0..k {
                responsibilities[i * k + j] = (logs[j] - lse).exp();
            }
        }
        // M-step.
        for j in 0..k {
            let nj: f64 = (0..n).map(|i| responsibilities[i * k + j]).sum();
            weights[j] = nj / n as f64;
            if nj > 1e-300 {
                means[j] = (0..n)
                    .map(|i| responsibilities[i * k + j] * samples[i])
                    .sum::<f64>()
                    / nj;
            }
        }
        if config.sigma2.is_none() {
            let ss: f64 = (0..n)
                .map(|i| {
                    (0..k)
                        .map(|j| {
                            let d = samples[i] - means[j];
                            responsibilities[i * k + j] * d * d
                        })
                        .sum::<f64>()
                })
                .sum();
            sigma2 = (ss / n as f64).max(1e-12);
        }
        if (ll - prev_ll).abs() < config.tol {
            iterations = iter + 1;
            break;
        }
        prev_ll = ll;
    }

    let final_ll = log_likelihood(samples, &weights, &means, sigma2);
    // Guard against components that lost all mass.
    let mut atoms = Vec::with_capacity(k);
    let mut ws = Vec::with_capacity(k);
    for j in 0..k {
        if weights[j] > 0.0 {
            atoms.push(means[j]);
            ws.push(weights[j]);
        }
    }
    let mixing = DiscreteDistribution::new(atoms, ws)?;
    Ok(EmFit {
        mixture: GaussianMixture::new(mixing, sigma2)?,
        log_likelihood: final_ll,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::wasserstein1;
    use approx::assert_abs_diff_eq;

    fn two_component() -> GaussianMixture {
        let mixing =
            DiscreteDistribution::new(vec![-2.0, 2.0], vec![0.5, 0.5]).unwrap();
        GaussianMixture::new(mixing, 0.25).unwrap()
    }

    #[test]
    fn log_sum_exp_stability() {
        assert_abs_diff_eq!(
            log_sum_exp(&[-1000.0, -1000.0]),
            -1000.0 + std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_likelihood_single_gaussian() {
        // n = 1, x = 0, N(0, 1): log density = -0.5 log(2 pi).
        let ll = log_likelihood(&[0.0], &[1.0], &[0.0], 1.0);
        assert_abs_diff_eq!(
            ll,
            -0.5 * (2.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn em_recovers_separated_mixture() {
        let model = two_component();
        let samples = model.sample(4000, 7);
        let fit = em_fit(&samples, &EmConfig::new(2, Some(0.25), 1)).unwrap();
        let w1 = wasserstein1(&fit.mixture.mixing, &model.mixing);
        assert!(w1 <= 0.1, "W1 = {w1}");
    }

    #[test]
    fn em_unknown_variance_recovers_sigma2() {
        let model = two_component();
        let samples = model.sample(6000, 11);
        let fit = em_fit(&samples, &EmConfig::new(2, None, 3)).unwrap();
        assert!(
            (fit.mixture.sigma2 - 0.25).abs() <= 0.08,
            "sigma2 = {}",
            fit.mixture.sigma2
        );
        let w1 = wasserstein1(&fit.mixture.mixing, &model.mixing);
        assert!(w1 <= 0.15, "W1 = {w1}");
    }

    #[test]
    fn em_deterministic_given_seed() {
        let samples = two_component().sample(500, 5);
        let a = em_fit(&samples, &EmConfig::new(2, Some(0.25), 42)).unwrap();
        let b = em_fit(&samples, &EmConfig::new(2, Some(0.25), 42)).unwrap();
        assert_eq!(a.mixture.mixing.atoms(), b.mixture.mixing.atoms());
        assert_eq!(a.log_likelihood, b.log_likelihood);
    }

    #[test]
    fn em_monotone_in_restarts() {
        let samples = two_component().sample(800, 9);
        let mut one = EmConfig::new(2, Some(0.25), 17);
        one.restarts = 1;
        let mut five = EmConfig::new(2, Some(0.25), 17);
        five.restarts = 5;
        let a = em_fit(&samples, &one).unwrap();
        let b = em_fit(&samples, &five).unwrap();
        assert!(b.log_likelihood >= a.log_likelihood - 1e-9);
    }

    #[test]
    fn em_k1_matches_sample_mean() {
        let samples = vec![1.0, 2.0, 3.0, 6.0];
        let fit = em_fit(&samples, &EmConfig::new(1, Some(1.0), 0)).unwrap();
        assert_abs_diff_eq!(fit.mixture.mixing.atoms()[0], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn em_rejects_bad_inputs() {
        assert!(em_fit(&[1.0], &EmConfig::new(2, Some(1.0), 0)).is_err());
        assert!(em_fit(&[1.0, 2.0], &EmConfig::new(0, Some(1.0), 0)).is_err());
        assert!(em_fit(&[1.0, 2.0], &EmConfig::new(2, Some(0.0), 0)).is_err());
    }

    #[test]
    fn em_likelihood_not_below_init_model() {
        // The fitted likelihood should beat evaluating the true model.
        let model = two_component();
        let samples = model.sample(2000, 13);
        let fit = em_fit(&samples, &EmConfig::new(2, Some(0.25), 2)).unwrap();
        let truth_ll = log_likelihood(&samples, model.mixing.weights(), model.mixing.atoms(), 0.25);
        assert!(fit.log_likelihood >= truth_ll - 1.0);
    }
}
