use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{realization, realization_stream, EnsembleConfig};
use crate::error::{Error, Result};
use crate::model::{sample_couplings, sample_total_potential, CanonicalModel};
use crate::operator::{assemble, Boundary, GridSpec};
use crate::spectral::{eigenpair, kth_eigenvalue, EigenPair};

/// Steps between renormalizations of the running transfer-matrix product.
const RENORMALIZE_EVERY: usize = 16;

/// Stream index of the long chain; far away from box realizations.
pub const CHAIN_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovPoint {
    pub energy: f64,
    pub gamma: f64,
}

/// Exponential-decay fit of one eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub energy: f64,
    /// Slope of `log |ψ|` envelope versus distance from the peak; negative
    /// means decay.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
    pub participation_ratio: f64,
}

/// Decay fit of eigenfunction `state` of box realization `realization`,
/// with the Lyapunov exponent at its eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDecay {
    pub realization: u64,
    pub state: usize,
    pub fit: DecayFit,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub chain_length: u64,
    pub lyapunov: Vec<LyapunovPoint>,
    pub decay: Vec<StateDecay>,
}

/// Which eigenfunctions to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySetup {
    pub box_length: u32,
    /// Eigenvalue indices, counted from the bottom of the spectrum.
    pub states: Vec<usize>,
    pub realizations: u64,
}

/// `γ(E)` along one chain drawn from stream [`CHAIN_STREAM`], and decay fits
/// of the requested eigenfunctions in Dirichlet boxes drawn from streams
/// `0..realizations`, all under `master_seed`.
pub fn localization_report(
    model: &CanonicalModel,
    master_seed: u64,
    energies: &[f64],
    chain_length: u64,
    points_per_cell: u32,
    setup: &DecaySetup,
) -> Result<LocalizationReport> {
    super::check_energies(energies)?;
    if chain_length == 0 {
        return Err(Error::Config("chain needs at least one cell".into()));
    }
    let h = 1.0 / f64::from(points_per_cell);
    let potential = chain_potential(
        model,
        &mut realization_stream(master_seed, CHAIN_STREAM),
        chain_length,
        points_per_cell,
    )?;
    let gamma_at = |e: f64| -> Result<f64> {
        let g = lyapunov_from_potential(&potential, h, e);
        if g.is_finite() {
            Ok(g)
        } else {
            Err(Error::Numerical(format!("transfer-matrix product overflowed at E = {e}")))
        }
    };
    let lyapunov = energies
        .par_iter()
        .map(|&energy| Ok(LyapunovPoint { energy, gamma: gamma_at(energy)? }))
        .collect::<Result<Vec<_>>>()?;

    let mut decay = Vec::new();
    if setup.realizations > 0 && !setup.states.is_empty() {
        let grid = GridSpec::new(setup.box_length, points_per_cell, Boundary::Dirichlet)?;
        let ensemble = EnsembleConfig::new(master_seed, setup.realizations, model.clone(), grid)?;
        let per: Vec<Vec<StateDecay>> = (0..setup.realizations)
            .into_par_iter()
            .map(|r| {
                let op = assemble(model, &realization(&ensemble, r), &grid)?;
                setup
                    .states
                    .iter()
                    .map(|&state| {
                        let value = kth_eigenvalue(&op, state, 0.0)?;
                        let pair = eigenpair(&op, value)?;
                        let fit = decay_rate(&pair, op.positions(), points_per_cell as usize)?;
                        Ok(StateDecay {
                            realization: r,
                            state,
                            fit,
                            gamma: gamma_at(value)?,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        decay = per.into_iter().flatten().collect();
    }
    Ok(LocalizationReport {
        chain_length,
        lyapunov,
        decay,
    })
}

/// Largest singular value of a 2×2 matrix `[[a, b], [c, d]]`.
fn spectral_norm(m: [f64; 4]) -> f64 {
    let [a, b, c, d] = m;
    let frob2 = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (frob2 * frob2 - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (frob2 + disc)).sqrt()
}

/// `γ = log ‖T_N ⋯ T_1‖ / (N h)` with `T_i = [[2 + h²(V_i - E), -1], [1, 0]]`.
pub fn lyapunov_from_potential(potential: &[f64], spacing: f64, energy: f64) -> f64 {
    let h2 = spacing * spacing;
    // Row-major running product, starting from the identity.
    let mut p = [1.0, 0.0, 0.0, 1.0];
    let mut log_norm = 0.0;
    for (i, v) in potential.iter().enumerate() {
        let t = 2.0 + h2 * (v - energy);
        p = [t * p[0] - p[2], t * p[1] - p[3], p[0], p[1]];
        if (i + 1) % RENORMALIZE_EVERY == 0 {
            let s = p.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            p.iter_mut().for_each(|x| *x /= s);
            log_norm += s.ln();
        }
    }
    log_norm += spectral_norm(p).ln();
    (log_norm / (spacing * potential.len() as f64)).max(0.0)
}

/// Lyapunov exponent per unit length along a fresh chain of `chain_length`
/// cells sampled from `rng`.
pub fn lyapunov_exponent<R: Rng + ?Sized>(
    model: &CanonicalModel,
    rng: &mut R,
    energy: f64,
    chain_length: u64,
    points_per_cell: u32,
) -> Result<f64> {
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy(energy));
    }
    if chain_length == 0 || points_per_cell == 0 {
        return Err(Error::Config("chain needs at least one cell and one point per cell".into()));
    }
    let potential = chain_potential(model, rng, chain_length, points_per_cell)?;
    let gamma = lyapunov_from_potential(&potential, 1.0 / f64::from(points_per_cell), energy);
    if !gamma.is_finite() {
        return Err(Error::Numerical(format!("transfer-matrix product overflowed at E = {energy}")));
    }
    Ok(gamma)
}

/// Potential at nodes `x_i = i h`, `i = 1..=L·m`, of a chain on `[0, L]`.
pub fn chain_potential<R: Rng + ?Sized>(
    model: &CanonicalModel,
    rng: &mut R,
    chain_length: u64,
    points_per_cell: u32,
) -> Result<Vec<f64>> {
    let (lo, hi) = model.site().support();
    let first = (-hi).ceil() as i64;
    let last = (chain_length as f64 - lo).floor() as i64;
    let couplings = sample_couplings(model.coupling(), rng, first..=last, 0);
    let h = 1.0 / f64::from(points_per_cell);
    let steps = chain_length * u64::from(points_per_cell);
    let positions: Vec<f64> = (1..=steps).map(|i| i as f64 * h).collect();
    sample_total_potential(model, &couplings, &positions)
}

/// `1 / (h Σ ψ_i⁴)` for an `h`-normalized vector; in length units.
pub fn participation_ratio(vector: &[f64], weight: f64) -> f64 {
    let s2: f64 = vector.iter().map(|x| x * x).sum::<f64>() * weight;
    let s4: f64 = vector.iter().map(|x| x.powi(4)).sum::<f64>() * weight;
    s2 * s2 / s4
}

/// Fits `log |ψ|` against distance from the peak, using the per-cell maxima
/// of `|ψ|` above `1e-12 · max|ψ|`.
pub fn decay_rate(pair: &EigenPair, positions: &[f64], points_per_cell: usize) -> Result<DecayFit> {
    let psi = &pair.vector;
    if psi.len() != positions.len() || psi.is_empty() {
        return Err(Error::Config("eigenvector and positions differ in length".into()));
    }
    let peak = psi
        .iter()
        .enumerate()
        .fold(0, |best, (i, x)| if x.abs() > psi[best].abs() { i } else { best });
    let peak_abs = psi[peak].abs();
    let floor = 1e-12 * peak_abs;
    let x_peak = positions[peak];
    let (xs, ys): (Vec<f64>, Vec<f64>) = psi
        .chunks(points_per_cell.max(1))
        .zip(positions.chunks(points_per_cell.max(1)))
        .filter_map(|(cell, pos)| {
            let (j, v) = cell
                .iter()
                .enumerate()
                .fold((0, 0.0_f64), |best, (j, x)| if x.abs() > best.1 { (j, x.abs()) } else { best });
            (v > floor).then(|| ((pos[j] - x_peak).abs(), v.ln()))
        })
        .unzip();
    if xs.len() < 10 {
        return Err(Error::Numerical(format!("decay envelope has only {} points", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let rate = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    let h = positions.get(1).map_or(1.0, |p| p - positions[0]);
    Ok(DecayFit {
        energy: pair.value,
        rate,
        r_squared,
        points: xs.len(),
        participation_ratio: participation_ratio(psi, h),
    })
}
