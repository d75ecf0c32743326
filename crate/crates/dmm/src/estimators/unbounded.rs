//! Clustering wrapper for mixtures with unbounded means: a held-out prefix
//! of the sample defines disjoint intervals, the base estimator runs on each
//! interval's recentered samples, and confidently weighted atoms are kept.

use super::{
    dmm_known_variance, lindsay_unknown_variance, ClusterInterval, EstimatorConfig,
    EstimationReport,
};
use crate::error::{DmmError, Result};

/// Wrapper-specific knobs; `None` fields take the data-driven defaults.
#[derive(Debug, Clone)]
pub struct UnboundedOptions {
    /// Cluster radius L; default sqrt(6 log n).
    pub cluster_radius: Option<f64>,
    /// Minimum weight for an atom to be reported.
    pub weight_threshold: f64,
    /// Number of held-out samples used only for interval construction;
    /// default n/2.
    pub split_size: Option<usize>,
}

impl UnboundedOptions {
    pub fn new(weight_threshold: f64) -> Self {
        Self {
            cluster_radius: None,
            weight_threshold,
            split_size: None,
        }
    }
}

/// Union of per-interval estimates.
#[derive(Debug, Clone)]
pub struct UnboundedReport {
    /// All kept atom locations, sorted.
    pub means: Vec<f64>,
    /// Each merged interval with the report of its sub-estimation; `None`
    /// when the interval received no estimation samples or its fit failed.
    pub clusters: Vec<(ClusterInterval, Option<EstimationReport>)>,
    pub diagnostics: Vec<String>,
}

/// Estimates the set of component means without a bound on their range.
pub fn estimate_unbounded(
    samples: &[f64],
    config: &EstimatorConfig,
    options: &UnboundedOptions,
) -> Result<UnboundedReport> {
    let n = samples.len();
    if n < 2 {
        return Err(DmmError::InsufficientSamples { needed: 2, got: n });
    }
    let n_prime = options.split_size.unwrap_or(n / 2).max(1);
    if n < 2 * n_prime {
        return Err(DmmError::InsufficientSamples {
            needed: 2 * n_prime,
            got: n,
        });
    }
    let radius = options
        .cluster_radius
        .unwrap_or_else(|| (6.0 * (n as f64).ln()).sqrt());
    if !(radius > 0.0) {
        return Err(DmmError::InvalidDistribution(
            "cluster radius must be positive".into(),
        ));
    }

    // Merge [x - L, x + L] over the held-out prefix into disjoint intervals.
    let mut anchors: Vec<f64> = samples[..n_prime].to_vec();
    anchors.sort_by(f64::total_cmp);
    let mut bounds: Vec<(f64, f64)> = Vec::new();
    for &x in &anchors {
        match bounds.last_mut() {
            Some((_, hi)) if x - radius <= *hi => *hi = (*hi).max(x + radius),
            _ => bounds.push((x - radius, x + radius)),
        }
    }

    let mut clusters: Vec<ClusterInterval> = bounds
        .iter()
        .map(|&(lo, hi)| ClusterInterval {
            center: 0.5 * (lo + hi),
            half_length: 0.5 * (hi - lo),
            members: Vec::new(),
        })
        .collect();
    for (i, &x) in samples.iter().enumerate().skip(n_prime) {
        if let Some(j) = bounds
            .iter()
            .position(|&(lo, hi)| (lo..=hi).contains(&x))
        {
            clusters[j].members.push(i);
        }
    }

    let mut diagnostics = Vec::new();
    let mut means = Vec::new();
    let mut reported = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let local: Vec<f64> = cluster
            .members
            .iter()
            .map(|&i| samples[i] - cluster.center)
            .collect();
        if local.is_empty() {
            diagnostics.push(format!(
                "interval centered at {:.3} received no estimation samples; skipped",
                cluster.center
            ));
            reported.push((cluster, None));
            continue;
        }
        let sub_config = EstimatorConfig {
            interval: Some((-cluster.half_length, cluster.half_length)),
            ..config.clone()
        };
        let outcome = match config.sigma2 {
            Some(_) => dmm_known_variance(&local, &sub_config),
            None => lindsay_unknown_variance(&local, &sub_config),
        };
        match outcome {
            Ok(report) => {
                for (&atom, &w) in report
                    .model
                    .mixing
                    .atoms()
                    .iter()
                    .zip(report.model.mixing.weights())
                {
                    if w >= options.weight_threshold {
                        means.push(atom + cluster.center);
                    }
                }
                reported.push((cluster, Some(report)));
            }
            Err(e) => {
                diagnostics.push(format!(
                    "interval centered at {:.3} failed: {e}",
                    cluster.center
                ));
                reported.push((cluster, None));
            }
        }
    }
    means.sort_by(f64::total_cmp);

    Ok(UnboundedReport {
        means,
        clusters: reported,
        diagnostics,
    })
}
