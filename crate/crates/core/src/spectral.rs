//! Spectral primitives for symmetric tridiagonal operators: Sturm counts,
//! bisection, inverse iteration, and a dense QL reference solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::TridiagonalOperator;

/// Relative (to [`TridiagonalOperator::norm_proxy`]) bisection tolerance.
pub const LOCATION_TOL: f64 = 1e-10;
/// Largest dimension accepted by the dense solvers.
pub const MAX_DENSE: usize = 4096;
const MAX_INVERSE_ITERATIONS: usize = 50;

/// Energy interval `[a, b]` with independent endpoint closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub lo: f64,
    pub hi: f64,
    pub closed_lo: bool,
    pub closed_hi: bool,
}

impl SpectralWindow {
    pub fn new(lo: f64, hi: f64, closed_lo: bool, closed_hi: bool) -> Result<Self> {
        if !lo.is_finite() {
            return Err(Error::NonFiniteEnergy(lo));
        }
        if !hi.is_finite() {
            return Err(Error::NonFiniteEnergy(hi));
        }
        if lo > hi {
            return Err(Error::Config(format!("window [{lo}, {hi}] is reversed")));
        }
        Ok(Self {
            lo,
            hi,
            closed_lo,
            closed_hi,
        })
    }

    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    /// `[lo, hi)`.
    pub fn half_open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, false)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn is_empty(&self) -> bool {
        self.lo == self.hi && !(self.closed_lo && self.closed_hi)
    }
}

/// Eigenvalue with an `h`-weighted, unit-norm eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    /// `weight · Σ ψ_i² = 1`; the largest-magnitude component is positive.
    pub vector: Vec<f64>,
    /// `‖(H - λ)ψ‖` in the same weighted norm.
    pub residual: f64,
}

/// Number of eigenvalues strictly below `energy`, from the signs of the
/// LDLᵀ pivots `q_i = (d_i - E) - e_{i-1}² / q_{i-1}`.
///
/// Pivots smaller than `ε(|d_i| + 2 max|e|)` are replaced by that tiny
/// negative value.
pub fn count_below(op: &TridiagonalOperator, energy: f64) -> Result<usize> {
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy(energy));
    }
    Ok(sturm_count(op.diag(), op.offdiag(), energy))
}

pub(crate) fn sturm_count(diag: &[f64], offdiag: &[f64], energy: f64) -> usize {
    let e_max = offdiag.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut count = 0;
    let mut q = 1.0;
    for (i, d) in diag.iter().enumerate() {
        let coupling = if i > 0 { offdiag[i - 1] * offdiag[i - 1] / q } else { 0.0 };
        q = (d - energy) - coupling;
        let pivmin = (f64::EPSILON * (d.abs() + 2.0 * e_max)).max(f64::MIN_POSITIVE);
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// One unit in the last place of the counting problem at `energy`.
fn nudge(op: &TridiagonalOperator, energy: f64) -> f64 {
    f64::EPSILON * (energy.abs() + op.norm_proxy())
}

/// `Tr P([a, b])`: eigenvalues inside the window, honoring closure flags.
pub fn trace_projection(op: &TridiagonalOperator, window: &SpectralWindow) -> Result<usize> {
    if window.is_empty() {
        return Ok(0);
    }
    let upper = if window.closed_hi {
        count_below(op, window.hi + nudge(op, window.hi))?
    } else {
        count_below(op, window.hi)?
    };
    Ok(upper.saturating_sub(count_before(op, window)?))
}

/// Eigenvalues that lie to the left of the window.
fn count_before(op: &TridiagonalOperator, window: &SpectralWindow) -> Result<usize> {
    if window.closed_lo {
        count_below(op, window.lo)
    } else {
        count_below(op, window.lo + nudge(op, window.lo))
    }
}

/// The `k`-th smallest eigenvalue (0-based) by bisection inside `[lo, hi]`,
/// which must satisfy `count_below(lo) ≤ k < count_below(hi)`. A zero
/// tolerance bisects to machine precision.
pub fn bisect_eigenvalue(op: &TridiagonalOperator, k: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(op.diag(), op.offdiag(), mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo + 0.5 * (hi - lo)
}

/// The `k`-th smallest eigenvalue bracketed by the Gershgorin discs.
pub fn kth_eigenvalue(op: &TridiagonalOperator, k: usize, tol: f64) -> Result<f64> {
    if k >= op.len() {
        return Err(Error::Config(format!("eigenvalue index {k} out of range 0..{}", op.len())));
    }
    let (lo, hi) = op.gershgorin_bounds();
    let pad = nudge(op, lo.abs().max(hi.abs())) + f64::MIN_POSITIVE;
    Ok(bisect_eigenvalue(op, k, lo - pad, hi + pad, tol))
}

/// All eigenvalues in the window, ascending, each to within
/// `LOCATION_TOL · norm_proxy`. Repeated eigenvalues appear once per
/// multiplicity.
pub fn eigenvalues_in(op: &TridiagonalOperator, window: &SpectralWindow, max_count: usize) -> Result<Vec<f64>> {
    let found = trace_projection(op, window)?;
    if found > max_count {
        return Err(Error::TooManyEigenvalues { found, max: max_count });
    }
    if found == 0 {
        return Ok(Vec::new());
    }
    let first = count_before(op, window)?;
    let tol = LOCATION_TOL * op.norm_proxy();
    let lo = window.lo - 2.0 * nudge(op, window.lo);
    let hi = window.hi + 2.0 * nudge(op, window.hi);
    Ok((first..first + found)
        .map(|k| bisect_eigenvalue(op, k, lo, hi, tol))
        .collect())
}

/// LU factorization with partial pivoting of `H - σI` (LAPACK `dgttrf`
/// layout).
struct ShiftedLu {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    upper2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(op: &TridiagonalOperator, shift: f64) -> Self {
        let n = op.len();
        let mut lower = op.offdiag().to_vec();
        let mut upper = op.offdiag().to_vec();
        let mut diag: Vec<f64> = op.diag().iter().map(|d| d - shift).collect();
        let mut upper2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if diag[i].abs() >= lower[i].abs() {
                if diag[i] != 0.0 {
                    let fact = lower[i] / diag[i];
                    lower[i] = fact;
                    diag[i + 1] -= fact * upper[i];
                }
            } else {
                let fact = diag[i] / lower[i];
                diag[i] = lower[i];
                lower[i] = fact;
                let temp = upper[i];
                upper[i] = diag[i + 1];
                diag[i + 1] = temp - fact * diag[i + 1];
                if i + 2 < n {
                    upper2[i] = upper[i + 1];
                    upper[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        // Exactly singular shifts: perturb the pivot, as inverse iteration wants.
        let tiny = f64::EPSILON * op.norm_proxy();
        for d in &mut diag {
            if d.abs() < tiny {
                *d = if *d < 0.0 { -tiny } else { tiny };
            }
        }
        Self {
            lower,
            diag,
            upper,
            upper2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.lower[i] * b[i];
            } else {
                b[i + 1] -= self.lower[i] * b[i];
            }
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= self.upper[i] * b[i + 1];
            }
            if i + 2 < n {
                v -= self.upper2[i] * b[i + 2];
            }
            b[i] = v / self.diag[i];
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Deterministic start vector with no special symmetry.
fn default_start(n: usize) -> Vec<f64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

/// Eigenpair nearest `approx` by shifted inverse iteration.
pub fn eigenpair(op: &TridiagonalOperator, approx: f64) -> Result<EigenPair> {
    eigenpair_from(op, approx, &default_start(op.len()))
}

/// [`eigenpair`] with an explicit start vector.
pub fn eigenpair_from(op: &TridiagonalOperator, approx: f64, start: &[f64]) -> Result<EigenPair> {
    if !approx.is_finite() {
        return Err(Error::NonFiniteEnergy(approx));
    }
    if start.len() != op.len() {
        return Err(Error::Config("start vector has the wrong length".into()));
    }
    let lu = ShiftedLu::new(op, approx);
    let mut v = start.to_vec();
    if normalize(&mut v) == 0.0 {
        return Err(Error::Config("start vector is zero".into()));
    }
    let mut best = (f64::INFINITY, approx, v.clone());
    let mut previous = f64::INFINITY;
    for iteration in 1..=MAX_INVERSE_ITERATIONS {
        lu.solve(&mut v);
        if normalize(&mut v) == 0.0 || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("inverse iteration produced a degenerate vector".into()));
        }
        let hv = op.apply(&v);
        let value: f64 = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
        let residual = hv
            .iter()
            .zip(&v)
            .map(|(h, x)| (h - value * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual < best.0 {
            best = (residual, value, v.clone());
        }
        let scale = value.abs() + op.norm_proxy();
        if iteration >= 2 && residual <= 1e-12 * scale {
            break;
        }
        if iteration >= 3 && residual <= 1e-8 * scale && residual > 0.5 * previous {
            break;
        }
        previous = residual;
    }
    let (residual, value, mut v) = best;
    if !(residual <= 1e-8 * (value.abs() + op.norm_proxy())) {
        return Err(Error::NoConvergence {
            shift: approx,
            residual,
        });
    }
    let pivot = v
        .iter()
        .copied()
        .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    let scale = if pivot < 0.0 { -1.0 } else { 1.0 } / op.weight().sqrt();
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(EigenPair {
        value,
        vector: v,
        residual,
    })
}

/// Full spectrum, ascending, by implicit QL iteration.
pub fn dense_spectrum(op: &TridiagonalOperator) -> Result<Vec<f64>> {
    check_dense(op)?;
    let mut d = op.diag().to_vec();
    let mut e = op.offdiag().to_vec();
    e.push(0.0);
    ql_implicit(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Full spectrum with eigenvectors (`h`-weighted unit norm), ascending.
pub fn dense_eigensystem(op: &TridiagonalOperator) -> Result<Vec<EigenPair>> {
    check_dense(op)?;
    let n = op.len();
    let mut d = op.diag().to_vec();
    let mut e = op.offdiag().to_vec();
    e.push(0.0);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    ql_implicit(&mut d, &mut e, Some(&mut z))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let w = op.weight().sqrt();
    Ok(order
        .into_iter()
        .map(|c| {
            let mut v: Vec<f64> = (0..n).map(|r| z[r * n + c]).collect();
            normalize(&mut v);
            let hv = op.apply(&v);
            let residual = hv
                .iter()
                .zip(&v)
                .map(|(h, x)| (h - d[c] * x).powi(2))
                .sum::<f64>()
                .sqrt();
            let pivot = v
                .iter()
                .copied()
                .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            let s = if pivot < 0.0 { -1.0 } else { 1.0 } / w;
            EigenPair {
                value: d[c],
                vector: v.into_iter().map(|x| x * s).collect(),
                residual,
            }
        })
        .collect())
}

fn check_dense(op: &TridiagonalOperator) -> Result<()> {
    if op.len() > MAX_DENSE {
        Err(Error::TooLarge(op.len(), MAX_DENSE))
    } else {
        Ok(())
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. `e[i]` couples rows
/// `i` and `i + 1`, `e[n-1] = 0`. `z` (row-major `n × n`) accumulates the
/// rotations when present.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(Error::Numerical("QL iteration did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_m4() -> TridiagonalOperator {
        TridiagonalOperator::from_parts(vec![32.0; 3], vec![-16.0; 2]).unwrap()
    }

    fn closed_form_m4() -> [f64; 3] {
        let pi = std::f64::consts::PI;
        [1.0, 2.0, 3.0].map(|k: f64| 64.0 * (k * pi / 8.0).sin().powi(2))
    }

    fn random_op(rng: &mut ChaCha8Rng, n: usize) -> TridiagonalOperator {
        let d = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let e = (0..n - 1).map(|_| rng.gen_range(-100.0..100.0)).collect();
        TridiagonalOperator::from_parts(d, e).unwrap()
    }

    #[test]
    fn counts_on_closed_form_spectrum() {
        let op = fd_m4();
        assert_eq!(count_below(&op, 10.0).unwrap(), 1);
        assert_eq!(count_below(&op, -1.0).unwrap(), 0);
        assert_eq!(count_below(&op, 100.0).unwrap(), 3);
        assert!(count_below(&op, f64::NAN).is_err());
        assert!(count_below(&op, f64::INFINITY).is_err());
    }

    #[test]
    fn counts_with_exact_pivot_hits() {
        // d_0 = E makes the first pivot exactly zero.
        let op = TridiagonalOperator::from_parts(vec![5.0, 5.0], vec![1.0]).unwrap();
        assert_eq!(count_below(&op, 5.0).unwrap(), 1);
        // Zero pivot followed by a decoupled block.
        let op = TridiagonalOperator::from_parts(vec![2.0, 7.0, 1.0, 3.0], vec![3.0, 0.0, 2.0]).unwrap();
        let dense = dense_spectrum(&op).unwrap();
        for e in [2.0, 7.0, 1.0, 3.0, 0.0, 4.5] {
            let expect = dense.iter().filter(|l| **l < e).count();
            assert_eq!(count_below(&op, e).unwrap(), expect, "E = {e}");
        }
        // Zero matrix.
        let zero = TridiagonalOperator::from_parts(vec![0.0; 3], vec![0.0; 2]).unwrap();
        assert_eq!(count_below(&zero, 1.0).unwrap(), 3);
        assert_eq!(count_below(&zero, -1.0).unwrap(), 0);
    }

    #[test]
    fn windows() {
        let op = fd_m4();
        let lam = closed_form_m4();
        assert_eq!(trace_projection(&op, &SpectralWindow::new(5.0, 5.0, false, false).unwrap()).unwrap(), 0);
        assert_eq!(trace_projection(&op, &SpectralWindow::half_open(32.0, 32.0).unwrap()).unwrap(), 0);
        let (lo, hi) = op.gershgorin_bounds();
        assert_eq!(trace_projection(&op, &SpectralWindow::closed(lo, hi).unwrap()).unwrap(), 3);
        assert_eq!(trace_projection(&op, &SpectralWindow::closed(31.9, 40.0).unwrap()).unwrap(), 1);
        assert_eq!(trace_projection(&op, &SpectralWindow::new(0.0, 32.1, false, false).unwrap()).unwrap(), 2);
        assert_eq!(trace_projection(&op, &SpectralWindow::closed(lam[0] - 1.0, lam[2] + 1.0).unwrap()).unwrap(), 3);
        assert!(SpectralWindow::closed(1.0, 0.0).is_err());
    }

    #[test]
    fn bisection_matches_closed_form() {
        let op = fd_m4();
        let got = eigenvalues_in(&op, &SpectralWindow::closed(0.0, 60.0).unwrap(), 10).unwrap();
        for (g, e) in got.iter().zip(closed_form_m4()) {
            assert!((g - e).abs() < 1e-6, "{g} vs {e}");
        }
        assert!((got[0] - 9.3726).abs() < 1e-4 && (got[2] - 54.6274).abs() < 1e-4);
        assert!(eigenvalues_in(&op, &SpectralWindow::closed(10.0, 20.0).unwrap(), 10)
            .unwrap()
            .is_empty());
        assert!(matches!(
            eigenvalues_in(&op, &SpectralWindow::closed(0.0, 60.0).unwrap(), 2),
            Err(Error::TooManyEigenvalues { found: 3, max: 2 })
        ));
    }

    #[test]
    fn multiplicities_are_repeated() {
        let op = TridiagonalOperator::from_parts(vec![1.0, 1.0, 3.0, 1.0], vec![0.0, 0.0, 0.0]).unwrap();
        let got = eigenvalues_in(&op, &SpectralWindow::closed(0.0, 5.0).unwrap(), 4).unwrap();
        assert_eq!(got.len(), 4);
        assert!(got[..3].iter().all(|v| (v - 1.0).abs() < 1e-8));
        assert!((got[3] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn dense_solver_on_trivial_cases() {
        let got = dense_spectrum(&fd_m4()).unwrap();
        for (g, e) in got.iter().zip(closed_form_m4()) {
            assert!((g - e).abs() < 1e-12);
        }
        let diag = TridiagonalOperator::from_parts(vec![3.0, -1.0, 2.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(dense_spectrum(&diag).unwrap(), vec![-1.0, 2.0, 3.0]);
        let big = TridiagonalOperator::from_parts(vec![0.0; MAX_DENSE + 1], vec![0.0; MAX_DENSE]).unwrap();
        assert!(matches!(dense_spectrum(&big), Err(Error::TooLarge(..))));
    }

    #[test]
    fn dense_solver_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..40 {
            let n = rng.gen_range(1..40);
            let op = random_op(&mut rng, n.max(2));
            let n = op.len();
            let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    op.diag()[i]
                } else if i + 1 == j {
                    op.offdiag()[i]
                } else if j + 1 == i {
                    op.offdiag()[j]
                } else {
                    0.0
                }
            });
            let mut reference: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            let ours = dense_spectrum(&op).unwrap();
            for (a, b) in ours.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-10 * 300.0, "{a} vs {b}");
            }
            let pairs = dense_eigensystem(&op).unwrap();
            for p in &pairs {
                assert!(p.residual < 1e-10 * 300.0);
            }
        }
    }

    #[test]
    fn sturm_matches_dense_on_random_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(2..=128);
            let op = random_op(&mut rng, n);
            let spectrum = dense_spectrum(&op).unwrap();
            for _ in 0..5 {
                let e = rng.gen_range(-300.0..300.0);
                let expect = spectrum.iter().filter(|l| **l < e).count();
                assert_eq!(count_below(&op, e).unwrap(), expect);
            }
        }
    }

    #[test]
    fn bisection_matches_dense_on_random_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.gen_range(2..=64);
            let op = random_op(&mut rng, n);
            let spectrum = dense_spectrum(&op).unwrap();
            let (lo, hi) = op.gershgorin_bounds();
            let got = eigenvalues_in(&op, &SpectralWindow::closed(lo, hi).unwrap(), n).unwrap();
            let tol = 2.0 * LOCATION_TOL * op.norm_proxy();
            for (a, b) in got.iter().zip(&spectrum) {
                assert!((a - b).abs() <= tol, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn inverse_iteration_ground_state_is_positive() {
        let op = fd_m4();
        let pair = eigenpair(&op, 9.0).unwrap();
        assert!((pair.value - closed_form_m4()[0]).abs() < 1e-10);
        assert!(pair.vector.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn inverse_iteration_residuals_and_start_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        while checked < 100 {
            let n = rng.gen_range(4..=96);
            let op = random_op(&mut rng, n);
            let spectrum = dense_spectrum(&op).unwrap();
            let k = rng.gen_range(0..n);
            let gap = spectrum
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, v)| (v - spectrum[k]).abs())
                .fold(f64::INFINITY, f64::min);
            if gap < 1e-4 * op.norm_proxy() {
                continue;
            }
            let approx = kth_eigenvalue(&op, k, 0.0).unwrap();
            let a = eigenpair(&op, approx).unwrap();
            assert!(a.residual <= 1e-8 * (a.value.abs() + op.norm_proxy()));
            let norm: f64 = a.vector.iter().map(|x| x * x).sum::<f64>() * op.weight();
            assert!((norm - 1.0).abs() < 1e-12);
            let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = eigenpair_from(&op, approx, &start).unwrap();
            assert!((a.value - b.value).abs() < 1e-8);
            for (x, y) in a.vector.iter().zip(&b.vector) {
                assert!((x.abs() - y.abs()).abs() < 1e-8);
            }
            checked += 1;
        }
    }
}
