//! Core probability types: discrete mixing distributions, Gaussian location
//! mixtures, sampling, exact moments, and density evaluation.

use crate::error::{DmmError, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Atoms closer than this are merged during canonicalization.
pub const MERGE_TOL: f64 = 1e-10;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A finitely supported mixing distribution: atoms with non-negative weights.
///
/// Always stored in canonical form: atoms strictly increasing, near-duplicate
/// atoms merged, zero-weight atoms dropped, weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a canonical distribution from raw atoms and weights.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(DmmError::InvalidDistribution(format!(
                "need equal, non-zero lengths; got {} atoms and {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(DmmError::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(DmmError::InvalidDistribution("atoms must be finite".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(DmmError::InvalidDistribution(format!(
                "weights sum to {sum}, expected 1"
            )));
        }

        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut canon: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match canon.last_mut() {
                Some((la, lw)) if (a - *la).abs() <= MERGE_TOL => {
                    // Merge near-duplicates; keep the weighted midpoint.
                    let tw = *lw + w;
                    if tw > 0.0 {
                        *la = (*la * *lw + a * w) / tw;
                    }
                    *lw = tw;
                }
                _ => canon.push((a, w)),
            }
        }
        canon.retain(|(_, w)| *w > 0.0);
        if canon.is_empty() {
            return Err(DmmError::InvalidDistribution(
                "all atoms have zero weight".into(),
            ));
        }
        let total: f64 = canon.iter().map(|(_, w)| w).sum();
        let (atoms, weights) = canon.into_iter().map(|(a, w)| (a, w / total)).unzip();
        Ok(Self { atoms, weights })
    }

    /// Point mass at `c`.
    pub fn point_mass(c: f64) -> Self {
        Self {
            atoms: vec![c],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of atoms.
    pub fn order(&self) -> usize {
        self.atoms.len()
    }

    pub fn mean(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a * w)
            .sum()
    }

    /// CDF evaluated at `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .filter(|(a, _)| **a <= t)
            .map(|(_, w)| w)
            .sum()
    }

    /// Shifts every atom by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| a + c).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Scales every atom by `lambda` (must be positive to preserve order).
    pub fn scaled(&self, lambda: f64) -> Self {
        assert!(lambda > 0.0);
        Self {
            atoms: self.atoms.iter().map(|a| a * lambda).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Exact raw moments `m_r = sum_i w_i atom_i^r` for `r = 1..=order`.
    ///
    /// The attached interval is the hull of the atoms, widened when degenerate.
    pub fn exact_moments(&self, order: usize) -> MomentVector {
        assert!(order >= 1);
        let values = (1..=order)
            .map(|r| {
                self.atoms
                    .iter()
                    .zip(&self.weights)
                    .map(|(a, w)| w * a.powi(r as i32))
                    .sum()
            })
            .collect();
        let a = self.atoms[0];
        let b = *self.atoms.last().unwrap();
        let (a, b) = if b - a < 1e-9 {
            (a - 1.0, b + 1.0)
        } else {
            (a, b)
        };
        MomentVector::new(values, (a, b))
    }
}

/// A Gaussian location mixture `nu * N(0, sigma2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub mixing: DiscreteDistribution,
    pub sigma2: f64,
}

impl GaussianMixture {
    pub fn new(mixing: DiscreteDistribution, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(DmmError::InvalidDistribution(format!(
                "sigma2 must be finite and non-negative, got {sigma2}"
            )));
        }
        Ok(Self { mixing, sigma2 })
    }

    /// Mixture density at `x`. Errors when `sigma2 = 0` (no density exists).
    pub fn density(&self, x: f64) -> Result<f64> {
        if self.sigma2 <= 0.0 {
            return Err(DmmError::DegenerateDensity);
        }
        let sigma = self.sigma2.sqrt();
        Ok(self
            .mixing
            .atoms()
            .iter()
            .zip(self.mixing.weights())
            .map(|(mu, w)| w * standard_normal_pdf((x - mu) / sigma) / sigma)
            .sum())
    }

    /// Draws `n` i.i.d. samples: component by inverse CDF on the weights, then
    /// Gaussian noise of variance `sigma2`. Deterministic for a fixed seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        assert!(n >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    /// Same as [`sample`](Self::sample) but with caller-owned generator state.
    pub fn sample_with<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let sigma = self.sigma2.sqrt();
        let atoms = self.mixing.atoms();
        let weights = self.mixing.weights();
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut mu = *atoms.last().unwrap();
                for (a, w) in atoms.iter().zip(weights) {
                    acc += w;
                    if u <= acc {
                        mu = *a;
                        break;
                    }
                }
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            })
            .collect()
    }

    /// Serializes to the canonical JSON model schema
    /// `{"weights": [...], "means": [...], "sigma2": s}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelJson {
            weights: self.mixing.weights().to_vec(),
            means: self.mixing.atoms().to_vec(),
            sigma2: self.sigma2,
        })
        .expect("model serialization cannot fail")
    }

    /// Parses the canonical JSON model schema.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: ModelJson = serde_json::from_str(s).map_err(|e| {
            DmmError::InvalidDistribution(format!(
                "malformed model JSON at line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        let mixing = DiscreteDistribution::new(raw.means, raw.weights)?;
        Self::new(mixing, raw.sigma2)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    weights: Vec<f64>,
    means: Vec<f64>,
    sigma2: f64,
}

/// Ordered raw moments `(m_1, ..., m_L)` with an attached support interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    values: Vec<f64>,
    interval: (f64, f64),
}

impl MomentVector {
    pub fn new(values: Vec<f64>, interval: (f64, f64)) -> Self {
        assert!(!values.is_empty(), "need at least one moment");
        assert!(
            interval.0 < interval.1 && interval.0.is_finite() && interval.1.is_finite(),
            "interval must be finite with a < b"
        );
        Self { values, interval }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw moment of the given order (1-based).
    pub fn moment(&self, order: usize) -> f64 {
        self.values[order - 1]
    }

    /// Keeps only the first `len` moments.
    pub fn truncated(&self, len: usize) -> Self {
        assert!(len >= 1 && len <= self.values.len());
        Self {
            values: self.values[..len].to_vec(),
            interval: self.interval,
        }
    }

    /// Replaces the attached interval.
    pub fn with_interval(&self, interval: (f64, f64)) -> Self {
        Self::new(self.values.clone(), interval)
    }
}

pub(crate) fn standard_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
