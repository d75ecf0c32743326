//! Loss functions and test fixtures: Wasserstein-1, Hausdorff distance,
//! permutation-matched parameter error, moment distance, total variation by
//! numeric integration, and moment-matched pair construction.

use crate::distributions::{DiscreteDistribution, GaussianMixture, MomentVector};
use crate::error::{DmmError, Result};
use nalgebra::DMatrix;

/// Wasserstein-1 distance between two discrete distributions, computed
/// exactly as the L1 distance between CDFs over the merged atom grid.
pub fn wasserstein1(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let mut grid: Vec<f64> = p.atoms().iter().chain(q.atoms()).cloned().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut total = 0.0;
    for w in grid.windows(2) {
        total += (p.cdf(w[0]) - q.cdf(w[0])).abs() * (w[1] - w[0]);
    }
    total
}

/// Hausdorff distance between two non-empty point sets.
pub fn hausdorff(s: &[f64], s_prime: &[f64]) -> Result<f64> {
    if s.is_empty() || s_prime.is_empty() {
        return Err(DmmError::EmptySet);
    }
    let directed = |from: &[f64], to: &[f64]| -> f64 {
        from.iter()
            .map(|x| {
                to.iter()
                    .map(|y| (x - y).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(s, s_prime).max(directed(s_prime, s)))
}

/// Permutation-matched parameter errors between two distributions with equal
/// atom counts.
#[derive(Debug, Clone)]
pub struct MatchedError {
    /// Max absolute atom error after matching.
    pub mean_error: f64,
    /// Max absolute weight error after matching.
    pub weight_error: f64,
    /// The matching as indices into the second distribution's canonical order.
    pub permutation: Vec<usize>,
    /// Whether the hypothesis `W1 < eps1 * eps2 / 4` held, with eps1 the
    /// minimum atom separation and eps2 the minimum weight across both inputs.
    pub hypothesis_held: bool,
}

/// Matches atoms by sorted order (optimal in one dimension) and reports the
/// l-infinity errors on atoms and weights.
pub fn matched_parameter_error(
    truth: &DiscreteDistribution,
    estimate: &DiscreteDistribution,
) -> Result<MatchedError> {
    if truth.order() != estimate.order() {
        return Err(DmmError::LengthMismatch(format!(
            "{} vs {} atoms",
            truth.order(),
            estimate.order()
        )));
    }
    // Canonical distributions are already sorted, so the minimizing matching
    // is the identity on canonical order.
    let mean_error = truth
        .atoms()
        .iter()
        .zip(estimate.atoms())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let weight_error = truth
        .weights()
        .iter()
        .zip(estimate.weights())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let min_sep = |d: &DiscreteDistribution| -> f64 {
        d.atoms()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    };
    let eps1 = min_sep(truth).min(min_sep(estimate));
    let eps2 = truth
        .weights()
        .iter()
        .chain(estimate.weights())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let w1 = wasserstein1(truth, estimate);
    let hypothesis_held = eps1.is_finite() && w1 < eps1 * eps2 / 4.0;

    Ok(MatchedError {
        mean_error,
        weight_error,
        permutation: (0..truth.order()).collect(),
        hypothesis_held,
    })
}

/// From `2k` sorted distinct points, builds the pair of k-atomic
/// distributions on the odd- and even-indexed points whose first `2k - 2`
/// moments agree (weights from the null space of the Vandermonde system,
/// normalized to total variation 2).
pub fn moment_matched_pair(
    points: &[f64],
) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    let n = points.len();
    if n < 2 || n % 2 != 0 {
        return Err(DmmError::LengthMismatch(format!(
            "need an even number of points >= 2, got {n}"
        )));
    }
    for w in points.windows(2) {
        if w[1] <= w[0] {
            return Err(DmmError::DegenerateSystem(
                "points must be strictly increasing".into(),
            ));
        }
    }
    let k = n / 2;
    if k == 1 {
        return Ok((
            DiscreteDistribution::point_mass(points[0]),
            DiscreteDistribution::point_mass(points[1]),
        ));
    }
    // Near-coincident points make the full square Vandermonde singular, and
    // the null-space weights then collapse onto the coincident pair.
    let full = DMatrix::from_fn(n, n, |i, j| points[j].powi(i as i32));
    let full_svd = full.svd(false, false);
    let (mut sv_max, mut sv_min) = (0.0f64, f64::INFINITY);
    for &s in full_svd.singular_values.iter() {
        sv_max = sv_max.max(s);
        sv_min = sv_min.min(s);
    }
    if !(sv_min > sv_max / 1e12) {
        return Err(DmmError::DegenerateSystem(
            "Vandermonde system too ill-conditioned (points too close)".into(),
        ));
    }

    // Rows are powers 0..2k-2, padded square with a zero row so the full
    // right singular basis is available; the one-dimensional null space
    // carries the alternating-sign weights.
    let v = DMatrix::from_fn(n, n, |i, j| {
        if i < n - 1 {
            points[j].powi(i as i32)
        } else {
            0.0
        }
    });
    let mut svd = v.svd(true, true);
    svd.sort_by_singular_values();
    let v_t = svd.v_t.as_ref().unwrap();
    let mut w: Vec<f64> = (0..n).map(|j| v_t[(n - 1, j)]).collect();
    if w[0] < 0.0 {
        for x in w.iter_mut() {
            *x = -*x;
        }
    }
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    for x in w.iter_mut() {
        *x *= 2.0 / l1;
    }

    let mut pos_atoms = Vec::new();
    let mut pos_w = Vec::new();
    let mut neg_atoms = Vec::new();
    let mut neg_w = Vec::new();
    for (x, wt) in points.iter().zip(&w) {
        if *wt > 0.0 {
            pos_atoms.push(*x);
            pos_w.push(*wt);
        } else {
            neg_atoms.push(*x);
            neg_w.push(-*wt);
        }
    }
    let nu = DiscreteDistribution::new(pos_atoms, pos_w)?;
    let nu_prime = DiscreteDistribution::new(neg_atoms, neg_w)?;
    Ok((nu, nu_prime))
}

/// Coordinate-wise max and Euclidean norm of the moment differences.
pub fn moment_distance(m: &MomentVector, m_prime: &MomentVector) -> Result<(f64, f64)> {
    if m.len() != m_prime.len() {
        return Err(DmmError::LengthMismatch(format!(
            "{} vs {} moments",
            m.len(),
            m_prime.len()
        )));
    }
    let mut linf = 0.0f64;
    let mut l2 = 0.0f64;
    for (a, b) in m.values().iter().zip(m_prime.values()) {
        let d = (a - b).abs();
        linf = linf.max(d);
        l2 += d * d;
    }
    Ok((linf, l2.sqrt()))
}

/// Total variation distance between two Gaussian mixtures by trapezoid
/// integration, refined until the change drops below the resolution target
/// (at most 1e-4).
pub fn total_variation(f: &GaussianMixture, g: &GaussianMixture, resolution: f64) -> Result<f64> {
    let target = resolution.min(1e-4).max(1e-10);
    let sigma = f.sigma2.max(g.sigma2).sqrt();
    let lo = f
        .mixing
        .atoms()
        .iter()
        .chain(g.mixing.atoms())
        .cloned()
        .fold(f64::INFINITY, f64::min)
        - 10.0 * sigma;
    let hi = f
        .mixing
        .atoms()
        .iter()
        .chain(g.mixing.atoms())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        + 10.0 * sigma;

    let integrate = |n: usize| -> Result<f64> {
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * (f.density(x)? - g.density(x)?).abs();
        }
        Ok(0.5 * acc * h)
    };

    let mut n = 512;
    let mut prev = integrate(n)?;
    loop {
        n *= 2;
        let cur = integrate(n)?;
        if (cur - prev).abs() <= target || n >= 1 << 22 {
            return Ok(cur);
        }
        prev = cur;
    }
}
