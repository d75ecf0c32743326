//! Unbiased estimation of mixing-distribution moments from noisy samples.
//!
//! `gamma_r(x, sigma) = sigma^r H_r(x / sigma)` is the unique unbiased
//! single-sample estimate of `mu^r` when `X ~ N(mu, sigma^2)`, with `H_r`
//! the probabilists' Hermite polynomial. Averaging over samples yields the
//! raw estimate of `m_r(nu)`; the median-of-batches variant trades a constant
//! factor of samples for robustness to heavy tails and outliers.

use crate::error::{DmmError, Result};

/// Probabilists' Hermite polynomial `H_r(x)`, by the three-term recurrence
/// `H_{r+1} = x H_r - r H_{r-1}`.
pub fn hermite(r: usize, x: f64) -> f64 {
    let mut prev = 1.0; // H_0
    if r == 0 {
        return prev;
    }
    let mut cur = x; // H_1
    for j in 1..r {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `gamma_r(x, sigma) = sigma^r H_r(x / sigma)`, evaluated by the scaled
/// recurrence `g_{r+1} = x g_r - r sigma^2 g_{r-1}` so that `sigma = 0`
/// degrades gracefully to `x^r`.
pub fn gamma_r(r: usize, x: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let mut prev = 1.0;
    if r == 0 {
        return prev;
    }
    let mut cur = x;
    for j in 1..r {
        let next = x * cur - j as f64 * s2 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Moment estimates `(m~_1, ..., m~_L)` with plug-in variances.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    /// Estimated mixing-distribution moments, order 1..=L.
    pub values: Vec<f64>,
    /// Plug-in variance of each estimate: empirical variance of the
    /// per-sample statistics divided by n.
    pub per_order_variance: Vec<f64>,
    /// Sample count behind the estimate.
    pub n: usize,
}

/// `m~_r = (1/n) sum_i gamma_r(X_i, sigma)` for `r = 1..=order`.
pub fn estimate_mixing_moments(samples: &[f64], order: usize, sigma: f64) -> MomentEstimate {
    assert!(order >= 1);
    assert!(!samples.is_empty(), "need at least one sample");
    let n = samples.len();
    let mut values = vec![0.0; order];
    let mut sq = vec![0.0; order];
    for &x in samples {
        // One recurrence pass per sample covers every order.
        let s2 = sigma * sigma;
        let mut prev = 1.0;
        let mut cur = x;
        for r in 1..=order {
            values[r - 1] += cur;
            sq[r - 1] += cur * cur;
            let next = x * cur - r as f64 * s2 * prev;
            prev = cur;
            cur = next;
        }
    }
    let nf = n as f64;
    for v in values.iter_mut() {
        *v /= nf;
    }
    let per_order_variance = values
        .iter()
        .zip(&sq)
        .map(|(m, s)| ((s / nf - m * m).max(0.0)) / nf)
        .collect();
    MomentEstimate {
        values,
        per_order_variance,
        n,
    }
}

/// Median over `batches` disjoint batches of the batch estimate, per order.
///
/// `batches = 1` reduces exactly to [`estimate_mixing_moments`]. The reported
/// plug-in variance is the whole-sample plug-in variance, which is what the
/// screening rule consumes.
pub fn median_of_batches(
    samples: &[f64],
    order: usize,
    sigma: f64,
    batches: usize,
) -> Result<MomentEstimate> {
    assert!(batches >= 1);
    if samples.len() < batches {
        return Err(DmmError::InsufficientSamples {
            needed: batches,
            got: samples.len(),
        });
    }
    let full = estimate_mixing_moments(samples, order, sigma);
    if batches == 1 {
        return Ok(full);
    }
    let mut per_batch: Vec<Vec<f64>> = Vec::with_capacity(batches);
    let chunk = samples.len() / batches;
    for t in 0..batches {
        let lo = t * chunk;
        let hi = if t + 1 == batches {
            samples.len()
        } else {
            lo + chunk
        };
        per_batch.push(estimate_mixing_moments(&samples[lo..hi], order, sigma).values);
    }
    let values = (0..order)
        .map(|r| {
            let mut col: Vec<f64> = per_batch.iter().map(|b| b[r]).collect();
            median_in_place(&mut col)
        })
        .collect();
    Ok(MomentEstimate {
        values,
        per_order_variance: full.per_order_variance,
        n: samples.len(),
    })
}

fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Moment-screening rule: the largest `k~ <= k_max` such that every order
/// `j <= 2 k~` has plug-in variance at most `tau`. Returns at least 1.
///
/// The estimate must cover orders up to `2 * k_max` and should be built from
/// raw empirical moments (`sigma = 0`), so that the per-order variance is
/// `(E_n[X^{2j}] - E_n[X^j]^2) / n`.
pub fn screen_order(estimate: &MomentEstimate, k_max: usize, tau: f64) -> usize {
    assert!(k_max >= 1);
    assert!(
        estimate.values.len() >= 2 * k_max,
        "estimate must cover orders up to 2*k_max"
    );
    let mut selected = 1;
    for k in 1..=k_max {
        let ok = (1..=2 * k).all(|j| estimate.per_order_variance[j - 1] <= tau);
        if ok {
            selected = k;
        } else {
            break;
        }
    }
    selected
}
