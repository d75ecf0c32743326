//! Truncated moment space on an interval: Hankel construction, membership
//! testing, Euclidean projection (the denoising step), and atom-count
//! detection.
//!
//! A length-r moment vector m = (m_1, ..., m_r) with m_0 = 1 is realizable by
//! a distribution on [a, b] iff
//!   r even:  M_{0,r} >= 0  and  (a+b) M_{1,r-1} >= ab M_{0,r-2} + M_{2,r}
//!   r odd:   b M_{0,r-1} >= M_{1,r} >= a M_{0,r-1}
//! where M_{i,j} is the Hankel matrix spanning m_i ... m_j and ">=" is the
//! semidefinite order.

use crate::distributions::MomentVector;
use crate::error::{DmmError, Result};
use nalgebra::DMatrix;

/// Relative PSD tolerance used by [`is_valid`]: smallest eigenvalue is allowed
/// down to `-PSD_TOL * (1 + trace)`.
pub const PSD_TOL: f64 = 1e-10;

/// Default projection stopping tolerance.
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-8;

/// Projection iteration cap.
pub const MAX_PROJECTION_ITERS: usize = 100_000;

/// Square Hankel matrix built from a moment subsequence.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    entries: DMatrix<f64>,
}

impl HankelMatrix {
    /// Builds `M_{i,j}` from the full sequence `(m_0, m_1, ..., m_L)` with
    /// `m_0 = 1` prepended by the caller. Requires `i + j` even and `j <= L`.
    pub fn from_moments(with_m0: &[f64], i: usize, j: usize) -> Result<Self> {
        if (i + j) % 2 != 0 || j < i {
            return Err(DmmError::MomentIndex(format!(
                "need i <= j with i + j even, got i={i}, j={j}"
            )));
        }
        if j >= with_m0.len() {
            return Err(DmmError::MomentIndex(format!(
                "order {j} exceeds available {} moments",
                with_m0.len() - 1
            )));
        }
        let size = (j - i) / 2 + 1;
        let entries = DMatrix::from_fn(size, size, |p, q| with_m0[i + p + q]);
        Ok(Self { entries })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn determinant(&self) -> f64 {
        self.entries.clone().lu().determinant()
    }
}

/// Smallest eigenvalue of a symmetric matrix.
fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    eig.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// The pair of affine-in-m matrices whose positive semidefiniteness
/// characterizes membership in the moment space on the attached interval.
fn certificate_matrices(moments: &MomentVector) -> [DMatrix<f64>; 2] {
    let (a, b) = moments.interval();
    let r = moments.len();
    let mut seq = Vec::with_capacity(r + 1);
    seq.push(1.0);
    seq.extend_from_slice(moments.values());
    if r % 2 == 0 {
        let m0r = HankelMatrix::from_moments(&seq, 0, r).unwrap();
        let m1 = HankelMatrix::from_moments(&seq, 1, r - 1).unwrap();
        let m0 = HankelMatrix::from_moments(&seq, 0, r - 2).unwrap();
        let m2 = HankelMatrix::from_moments(&seq, 2, r).unwrap();
        [
            m0r.entries,
            m1.entries * (a + b) - m0.entries * (a * b) - m2.entries,
        ]
    } else {
        let m0 = HankelMatrix::from_moments(&seq, 0, r - 1).unwrap();
        let m1 = HankelMatrix::from_moments(&seq, 1, r).unwrap();
        [
            m0.entries.clone() * b - m1.entries.clone(),
            m1.entries - m0.entries * a,
        ]
    }
}

/// Signed feasibility margin: the most negative eigenvalue across the
/// certifying matrices, relative tolerance folded in by the caller.
pub fn feasibility_violation(moments: &MomentVector) -> f64 {
    certificate_matrices(moments)
        .iter()
        .map(min_eigenvalue)
        .fold(f64::INFINITY, f64::min)
}

/// Membership test for the moment space on the attached interval.
///
/// Returns the verdict together with the violation magnitude (most negative
/// certifying eigenvalue; non-negative values mean strictly feasible).
pub fn is_valid(moments: &MomentVector) -> (bool, f64) {
    let mats = certificate_matrices(moments);
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for m in &mats {
        let lam = min_eigenvalue(m);
        worst = worst.min(lam);
        let tol = PSD_TOL * (1.0 + m.trace().abs());
        if lam < -tol {
            ok = false;
        }
    }
    (ok, worst)
}

/// Outcome of the Euclidean projection onto the moment space.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub projected: MomentVector,
    pub distance: f64,
    pub iterations: usize,
    /// Most negative eigenvalue across the certifying matrices of the output.
    pub feasibility_violation: f64,
}

/// Linear part of one certificate matrix: `C + sum_l m_l G_l`.
struct AffineCone {
    constant: DMatrix<f64>,
    gradients: Vec<DMatrix<f64>>,
}

impl AffineCone {
    fn build(len: usize, interval: (f64, f64)) -> [AffineCone; 2] {
        let zero = MomentVector::new(vec![0.0; len], interval);
        let base = certificate_matrices(&zero);
        let mut cones: Vec<AffineCone> = base
            .into_iter()
            .map(|constant| AffineCone {
                constant,
                gradients: Vec::with_capacity(len),
            })
            .collect();
        for l in 0..len {
            let mut unit = vec![0.0; len];
            unit[l] = 1.0;
            let mats = certificate_matrices(&MomentVector::new(unit, interval));
            for (cone, mat) in cones.iter_mut().zip(mats) {
                cone.gradients.push(mat - &cone.constant);
            }
        }
        let mut it = cones.into_iter();
        [it.next().unwrap(), it.next().unwrap()]
    }

    fn eval(&self, m: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (coef, g) in m.iter().zip(&self.gradients) {
            out += g * *coef;
        }
        out
    }

    /// Adjoint applied to a matrix: `(A* Z)_l = <G_l, Z>_F`.
    fn adjoint(&self, z: &DMatrix<f64>, out: &mut [f64]) {
        for (o, g) in out.iter_mut().zip(&self.gradients) {
            *o += g.dot(z);
        }
    }
}

fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        *v = v.max(0.0);
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Euclidean projection of `noisy` onto the moment space on its interval.
///
/// Solved by ADMM on the consensus form: the moment vector is the primal
/// variable, each certificate matrix carries a PSD-constrained copy. Every
/// sub-step is closed form (a small linear solve and an eigenvalue clip), and
/// the scheme converges to the exact Euclidean projection of the convex
/// program. Inputs already in the moment space are returned unchanged.
pub fn project(noisy: &MomentVector, tol: f64) -> Result<ProjectionResult> {
    assert!(tol > 0.0);
    let (valid, violation) = is_valid(noisy);
    if valid {
        return Ok(ProjectionResult {
            projected: noisy.clone(),
            distance: 0.0,
            iterations: 0,
            feasibility_violation: violation,
        });
    }

    let len = noisy.len();
    let interval = noisy.interval();
    let target = noisy.values().to_vec();
    let cones = AffineCone::build(len, interval);

    // Scale-aware: larger intervals inflate moment magnitudes; normalize the
    // penalty weight by the problem scale so iteration counts stay stable.
    let scale: f64 = target
        .iter()
        .map(|v| v.abs())
        .fold(1.0f64, f64::max);
    let mut rho = 1.0 / scale;

    // Normal matrix for the m-update: 2 I + rho * sum_i A_i^T A_i.
    let gram = {
        let mut g = DMatrix::zeros(len, len);
        for cone in &cones {
            for p in 0..len {
                for q in 0..len {
                    g[(p, q)] += cone.gradients[p].dot(&cone.gradients[q]);
                }
            }
        }
        g
    };

    let dims: Vec<usize> = cones.iter().map(|c| c.constant.nrows()).collect();
    let mut z: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    let mut u: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    let mut m = target.clone();

    let stop = (tol * 1e-2).max(1e-12);
    let mut iterations = 0;

    for it in 0..MAX_PROJECTION_ITERS {
        iterations = it + 1;

        // m-update: (2 I + rho Gram) m = 2 m~ + rho sum_i A_i^T (Z_i - U_i - C_i)
        let mut rhs: Vec<f64> = target.iter().map(|t| 2.0 * t).collect();
        let mut tmp = vec![0.0; len];
        for (cone, (zi, ui)) in cones.iter().zip(z.iter().zip(&u)) {
            let resid = zi - ui - &cone.constant;
            tmp.iter_mut().for_each(|t| *t = 0.0);
            cone.adjoint(&resid, &mut tmp);
            for (r, t) in rhs.iter_mut().zip(&tmp) {
                *r += rho * t;
            }
        }
        let mut sys = &gram * rho;
        for d in 0..len {
            sys[(d, d)] += 2.0;
        }
        let sol = sys
            .lu()
            .solve(&nalgebra::DVector::from_vec(rhs))
            .ok_or_else(|| DmmError::DegenerateSystem("projection normal equations".into()))?;
        m.copy_from_slice(sol.as_slice());

        // Z-update: PSD clip; U-update: running dual residual.
        let mut primal_sq = 0.0;
        let mut dual_sq = 0.0;
        for (i, cone) in cones.iter().enumerate() {
            let am = cone.eval(&m);
            let znew = project_psd(&(&am + &u[i]));
            let dz = &znew - &z[i];
            dual_sq += rho * rho * dz.norm_squared();
            let r = &am - &znew;
            primal_sq += r.norm_squared();
            u[i] += r;
            z[i] = znew;
        }

        let last_residual = primal_sq.sqrt().max(dual_sq.sqrt());
        if primal_sq.sqrt() < stop && dual_sq.sqrt() < stop {
            break;
        }

        // Standard residual balancing.
        if it % 50 == 49 {
            let (rp, rd) = (primal_sq.sqrt(), dual_sq.sqrt());
            if rp > 10.0 * rd {
                rho *= 2.0;
                for ui in u.iter_mut() {
                    *ui *= 0.5;
                }
            } else if rd > 10.0 * rp {
                rho *= 0.5;
                for ui in u.iter_mut() {
                    *ui *= 2.0;
                }
            }
        }

        if it + 1 == MAX_PROJECTION_ITERS {
            return Err(DmmError::ProjectionNonConvergence {
                iterations: MAX_PROJECTION_ITERS,
                residual: last_residual,
                best: m,
            });
        }
    }

    let mut projected = MomentVector::new(m, interval);
    // ADMM leaves the iterate a hair outside the cone; nudge toward a strictly
    // interior point until the certificate holds at the reporting tolerance.
    let mut violation = feasibility_violation(&projected);
    if violation < -1e-9 {
        let interior = interior_point(len, interval);
        let mut lambda = 1e-9;
        while violation < -1e-9 && lambda < 1e-2 {
            let blended: Vec<f64> = projected
                .values()
                .iter()
                .zip(interior.values())
                .map(|(p, q)| (1.0 - lambda) * p + lambda * q)
                .collect();
            projected = MomentVector::new(blended, interval);
            violation = feasibility_violation(&projected);
            lambda *= 10.0;
        }
    }

    let distance = projected
        .values()
        .iter()
        .zip(&target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        .sqrt();

    Ok(ProjectionResult {
        projected,
        distance,
        iterations,
        feasibility_violation: violation,
    })
}

/// Last-resort repair: blends a vector that sits slightly outside the moment
/// space toward a strictly interior point until the certificate holds. The
/// blend weight grows geometrically, ending at the interior point itself, so
/// the result is always valid.
pub fn nearest_feasible(moments: &MomentVector) -> MomentVector {
    if is_valid(moments).0 {
        return moments.clone();
    }
    let interior = interior_point(moments.len(), moments.interval());
    let mut lambda = 1e-9;
    loop {
        let blended: Vec<f64> = moments
            .values()
            .iter()
            .zip(interior.values())
            .map(|(p, q)| (1.0 - lambda) * p + lambda * q)
            .collect();
        let candidate = MomentVector::new(blended, moments.interval());
        if is_valid(&candidate).0 || lambda >= 1.0 {
            return candidate;
        }
        lambda = (lambda * 10.0).min(1.0);
    }
}

/// Moments of a well-spread discrete distribution on [a, b]; strictly inside
/// the moment space for every order up to `len`.
fn interior_point(len: usize, interval: (f64, f64)) -> MomentVector {
    let (a, b) = interval;
    let n = len + 2;
    let values = (1..=len)
        .map(|r| {
            (0..n)
                .map(|i| {
                    // Chebyshev-style nodes strictly inside (a, b).
                    let t = (i as f64 + 0.5) / n as f64 * std::f64::consts::PI;
                    let x = 0.5 * (a + b) + 0.5 * (b - a) * t.cos();
                    x.powi(r as i32) / n as f64
                })
                .sum()
        })
        .collect();
    MomentVector::new(values, interval)
}

/// Detects the number of atoms behind a full even moment sequence
/// `(m_1, ..., m_{2 r_max})`: the smallest `r` with `det(M_r)` at the zero
/// threshold while `det(M_{r-1})` stays above it. Returns `r_max + 1` when
/// every determinant is decisively positive.
pub fn detect_order(moments: &MomentVector, rank_tol: f64) -> usize {
    let l = moments.len();
    assert!(l % 2 == 0, "need an even number of moments");
    let r_max = l / 2;
    let mut seq = Vec::with_capacity(l + 1);
    seq.push(1.0);
    seq.extend_from_slice(moments.values());

    let mut prev_positive = true; // det(M_0) = 1
    for r in 1..=r_max {
        let h = HankelMatrix::from_moments(&seq, 0, 2 * r).unwrap();
        let det = h.determinant();
        // Determinant of a (r+1)x(r+1) matrix scales like ||M||^(r+1).
        let scale = (1.0 + h.matrix().norm()).powi((r + 1) as i32);
        let positive = det > rank_tol * scale;
        if prev_positive && !positive {
            return r;
        }
        prev_positive = positive;
    }
    r_max + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DiscreteDistribution;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mv(values: &[f64], interval: (f64, f64)) -> MomentVector {
        MomentVector::new(values.to_vec(), interval)
    }

    #[test]
    fn hankel_standard_normal_like() {
        let h = HankelMatrix::from_moments(&[1.0, 0.0, 1.0, 0.0], 0, 2).unwrap();
        assert_eq!(h.matrix().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn hankel_footnote_moments() {
        let h = HankelMatrix::from_moments(&[1.0, 0.0, 2.0, 0.0, 14.0], 0, 4).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 14.0]);
        assert_eq!(h.matrix(), &expect);
    }

    #[test]
    fn hankel_odd_block() {
        let h = HankelMatrix::from_moments(&[1.0, 0.5, 0.3, 0.2], 1, 3).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 0.2]);
        assert_eq!(h.matrix(), &expect);
    }

    #[test]
    fn hankel_rejects_bad_indices() {
        assert!(HankelMatrix::from_moments(&[1.0, 0.0, 1.0], 0, 1).is_err());
        assert!(HankelMatrix::from_moments(&[1.0, 0.0], 0, 4).is_err());
    }

    #[test]
    fn negative_second_moment_invalid() {
        let (ok, violation) = is_valid(&mv(&[0.0, -0.5, 0.0], (-1.0, 1.0)));
        assert!(!ok);
        assert!(violation < -0.1);
    }

    #[test]
    fn sylvester_criterion_on_unit_interval() {
        // On [0,1] validity of (m1, m2, m3) is equivalent to
        // m1 m3 >= m2^2, (1-m1)(m2-m3) >= (m1-m2)^2, 0<=m1<=1, m2>=m3>=0.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut both = 0;
        for _ in 0..2000 {
            let m1: f64 = rng.gen();
            let m2: f64 = rng.gen();
            let m3: f64 = rng.gen();
            let (ok, _) = is_valid(&mv(&[m1, m2, m3], (0.0, 1.0)));
            let slack = 1e-9;
            let closed_form = m1 * m3 + slack >= m2 * m2
                && (1.0 - m1) * (m2 - m3) + slack >= (m1 - m2) * (m1 - m2)
                && m2 + slack >= m3;
            // Only compare decisively classified points.
            let margin = (m1 * m3 - m2 * m2)
                .abs()
                .min(((1.0 - m1) * (m2 - m3) - (m1 - m2) * (m1 - m2)).abs());
            if margin > 1e-6 {
                assert_eq!(ok, closed_form, "({m1},{m2},{m3})");
                both += 1;
            }
        }
        assert!(both > 1000);
    }

    #[test]
    fn exact_moments_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let k = rng.gen_range(1..=4);
            let atoms: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= s);
            let d = DiscreteDistribution::new(atoms, weights).unwrap();
            let m = d.exact_moments(2 * k - 1).with_interval((-1.0, 1.0));
            let (ok, violation) = is_valid(&m);
            assert!(ok, "violation {violation}");
        }
    }

    #[test]
    fn project_known_minimizer() {
        // Nearest valid point to (0, -0.5, 0) on [-1,1] is (0, 0, 0).
        let res = project(&mv(&[0.0, -0.5, 0.0], (-1.0, 1.0)), 1e-8).unwrap();
        assert_abs_diff_eq!(res.distance, 0.5, epsilon = 1e-5);
        for v in res.projected.values() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-5);
        }
        assert!(res.feasibility_violation >= -1e-8);
    }

    #[test]
    fn project_valid_input_is_identity() {
        let m = mv(&[0.0, 0.5, 0.0], (-1.0, 1.0));
        let res = project(&m, 1e-8).unwrap();
        assert_eq!(res.projected.values(), m.values());
        assert_eq!(res.distance, 0.0);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn project_small_perturbation_stays_close() {
        let truth = DiscreteDistribution::new(vec![-1.0, 1.0], vec![0.5, 0.5])
            .unwrap()
            .exact_moments(3)
            .with_interval((-1.0, 1.0));
        let mut vals = truth.values().to_vec();
        vals[1] += 0.01;
        let res = project(&mv(&vals, (-1.0, 1.0)), 1e-8).unwrap();
        let dev: f64 = res
            .projected
            .values()
            .iter()
            .zip(truth.values())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            .sqrt();
        assert!(dev <= 0.011, "deviation {dev}");
    }

    #[test]
    fn projection_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let vals: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let first = project(&mv(&vals, (-1.0, 1.0)), 1e-8).unwrap();
            let second = project(&first.projected, 1e-8).unwrap();
            let dev: f64 = first
                .projected
                .values()
                .iter()
                .zip(second.projected.values())
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            assert!(dev <= 1e-6, "not idempotent: {dev}");
        }
    }

    #[test]
    fn detect_order_point_mass() {
        let m = DiscreteDistribution::point_mass(0.7).exact_moments(2);
        assert_eq!(detect_order(&m, 1e-9), 1);
    }

    #[test]
    fn detect_order_two_atoms() {
        let m = mv(&[0.0, 1.0, 0.0, 1.0], (-2.0, 2.0));
        assert_eq!(detect_order(&m, 1e-9), 2);
    }

    #[test]
    fn detect_order_gaussian_sentinel() {
        // N(0,1) moments: 0, 1, 0, 3, 0, 15; all Hankel determinants positive.
        let m = mv(&[0.0, 1.0, 0.0, 3.0, 0.0, 15.0], (-10.0, 10.0));
        assert_eq!(detect_order(&m, 1e-9), 4);
    }

    #[test]
    fn detect_order_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let k = rng.gen_range(1..=4usize);
            // Separated atoms, weights bounded below.
            let mut atoms: Vec<f64> = Vec::new();
            while atoms.len() < k {
                let c = rng.gen_range(-1.0..1.0);
                if atoms.iter().all(|a: &f64| (a - c).abs() >= 0.3) {
                    atoms.push(c);
                }
            }
            let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.15..1.0)).collect();
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= s);
            let d = DiscreteDistribution::new(atoms, weights).unwrap();
            let m = d.exact_moments(2 * (k + 1));
            assert_eq!(detect_order(&m, 1e-10), k, "distribution {d:?}");
        }
    }

    #[test]
    fn boundary_rank_deficiency() {
        // Fewer than k atoms: M_{k-1} loses strict positive definiteness.
        let d = DiscreteDistribution::new(vec![-0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let m = d.exact_moments(6);
        let mut seq = vec![1.0];
        seq.extend_from_slice(m.values());
        // k = 3 here; M_2 should be singular at rank_tol scale.
        let h = HankelMatrix::from_moments(&seq, 0, 4).unwrap();
        assert!(min_eigenvalue(h.matrix()) < 1e-10);
    }
}
