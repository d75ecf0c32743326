//! Gauss quadrature: invert a valid moment vector of odd length 2k-1 into
//! the unique k-atomic distribution realizing it.
//!
//! Nodes come from the eigenvalues of the Jacobi matrix assembled through a
//! partial Cholesky factorization of the Hankel moment matrix (the
//! Golub-Welsch route, chosen for conditioning over the companion-matrix
//! polynomial). Weights are recomputed from the nodes through the Vandermonde
//! system with a Bjorck-Pereyra solver, which stays accurate on clustered
//! nodes. A rank-deficient Hankel block or a decisively negative weight
//! signals that the input sits on the boundary of the moment space and is
//! realized by fewer atoms, so the order is reduced and the solve retried.

use crate::distributions::{DiscreteDistribution, MomentVector};
use crate::error::{DmmError, Result};
use crate::hermite::hermite;
use crate::moment_space::is_valid;
use nalgebra::DMatrix;

const NEGATIVE_WEIGHT_TOL: f64 = 1e-8;
const INTERVAL_SLACK: f64 = 1e-6;

/// Solves `sum_j x_j^i w_j = q_i` for `i = 0..n-1` (the dual Vandermonde
/// system) by the Bjorck-Pereyra recurrences, in O(n^2).
pub fn vandermonde_solve(nodes: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = nodes.len();
    if rhs.len() != n {
        return Err(DmmError::LengthMismatch(format!(
            "{n} nodes vs {} right-hand sides",
            rhs.len()
        )));
    }
    for i in 0..n {
        for j in i + 1..n {
            if nodes[i] == nodes[j] {
                return Err(DmmError::DegenerateSystem(
                    "repeated Vandermonde nodes".into(),
                ));
            }
        }
    }
    let mut b = rhs.to_vec();
    for k in 0..n.saturating_sub(1) {
        for i in (k + 1..n).rev() {
            b[i] = b[i] - nodes[k] * b[i - 1];
        }
    }
    for k in (0..n.saturating_sub(1)).rev() {
        for i in k + 1..n {
            b[i] /= nodes[i] - nodes[i - k - 1];
        }
        for i in k..n - 1 {
            b[i] -= b[i + 1];
        }
    }
    Ok(b)
}

/// Jacobi matrix of order `k` from the moment sequence `(1, m_1, ..., m_{2k-1})`
/// via partial Cholesky of the Hankel block. Returns `None` when the k x k
/// Hankel matrix is not decisively positive definite (order too high).
fn jacobi_from_moments(seq: &[f64], k: usize) -> Option<DMatrix<f64>> {
    // Upper-trapezoidal R, rows 0..k-1, columns 0..k: M = R^T R on the square
    // part, with the extra column solved by forward substitution.
    let mut r = vec![vec![0.0f64; k + 1]; k];
    for i in 0..k {
        for j in i..=k {
            let mut s = seq[i + j];
            for p in 0..i {
                s -= r[p][i] * r[p][j];
            }
            if i == j {
                let scale: f64 = (0..i).map(|p| r[p][i] * r[p][i]).sum::<f64>() + seq[2 * i].abs();
                if s <= 1e-13 * (1.0 + scale) {
                    return None;
                }
                r[i][j] = s.sqrt();
            } else {
                r[i][j] = s / r[i][i];
            }
        }
    }
    let mut jac = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut alpha = r[j][j + 1] / r[j][j];
        if j > 0 {
            alpha -= r[j - 1][j] / r[j - 1][j - 1];
        }
        jac[(j, j)] = alpha;
        if j > 0 {
            let beta = r[j][j] / r[j - 1][j - 1];
            jac[(j, j - 1)] = beta;
            jac[(j - 1, j)] = beta;
        }
    }
    Some(jac)
}

/// Inverts a valid moment vector of odd length `2k - 1` into the unique
/// k'-atomic distribution reproducing it (`k' <= k` after order reduction).
pub fn gauss_quadrature(moments: &MomentVector) -> Result<DiscreteDistribution> {
    if moments.len() % 2 == 0 {
        return Err(DmmError::QuadratureFailure(format!(
            "need an odd number of moments, got {}",
            moments.len()
        )));
    }
    let (ok, violation) = is_valid(moments);
    if !ok {
        return Err(DmmError::InvalidMoments { violation });
    }
    let k = (moments.len() + 1) / 2;
    let (a, b) = moments.interval();
    let mut seq = Vec::with_capacity(moments.len() + 1);
    seq.push(1.0);
    seq.extend_from_slice(moments.values());

    let mut order = k;
    while order >= 1 {
        match solve_at_order(&seq, order, a, b) {
            Ok(dist) => return Ok(dist),
            Err(Reduce) => order -= 1,
        }
    }
    Err(DmmError::QuadratureFailure(
        "order reduction exhausted without a realizable solution".into(),
    ))
}

struct Reduce;

fn solve_at_order(
    seq: &[f64],
    order: usize,
    a: f64,
    b: f64,
) -> std::result::Result<DiscreteDistribution, Reduce> {
    if order == 1 {
        let atom = seq[1].clamp(a, b);
        return Ok(DiscreteDistribution::point_mass(atom));
    }
    let jac = jacobi_from_moments(seq, order).ok_or(Reduce)?;
    let eig = jac.symmetric_eigenvalues();
    let mut nodes: Vec<f64> = eig.iter().cloned().collect();
    nodes.sort_by(f64::total_cmp);

    // Nodes of a realizable vector stay inside the interval up to round-off.
    if nodes[0] < a - INTERVAL_SLACK || *nodes.last().unwrap() > b + INTERVAL_SLACK {
        return Err(Reduce);
    }

    let rhs: Vec<f64> = seq[..order].to_vec();
    let weights = vandermonde_solve(&nodes, &rhs).map_err(|_| Reduce)?;
    if weights.iter().any(|w| *w < -NEGATIVE_WEIGHT_TOL) {
        return Err(Reduce);
    }
    let clipped: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Reduce);
    }
    let weights: Vec<f64> = clipped.iter().map(|w| w / total).collect();
    let atoms: Vec<f64> = nodes.iter().map(|x| x.clamp(a, b)).collect();
    DiscreteDistribution::new(atoms, weights).map_err(|_| Reduce)
}

/// The k-point Gauss quadrature of `N(0, variance)`: scaled Hermite roots with
/// Golub-Welsch weights.
pub fn quadrature_of_gaussian(k: usize, variance: f64) -> DiscreteDistribution {
    assert!(k >= 1);
    assert!(variance > 0.0);
    let eps = variance.sqrt();
    if k == 1 {
        return DiscreteDistribution::point_mass(0.0);
    }
    // Jacobi matrix of N(0,1): zero diagonal, off-diagonal sqrt(1..k-1).
    let mut jac = DMatrix::zeros(k, k);
    for j in 1..k {
        let beta = (j as f64).sqrt();
        jac[(j, j - 1)] = beta;
        jac[(j - 1, j)] = beta;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = eig.eigenvectors[(0, i)].powi(2);
            (node * eps, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (atoms, weights) = pairs.into_iter().unzip();
    DiscreteDistribution::new(atoms, weights).expect("Gauss-Hermite rule is always proper")
}

/// Expectation of the degree-r Hermite polynomial under a discrete
/// distribution. Test hook for the quadrature identities.
pub fn expect_hermite(dist: &DiscreteDistribution, r: usize) -> f64 {
    dist.atoms()
        .iter()
        .zip(dist.weights())
        .map(|(x, w)| w * hermite(r, *x))
        .sum()
}
