use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, EnsembleConfig, RunOptions};
use crate::error::{Error, Result};
use crate::operator::assemble;
use crate::spectral::{trace_projection, SpectralWindow};

/// Ensemble statistics of `Tr P([E - ε, E))` for one `(ε, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WegnerCell {
    pub box_length: u32,
    pub epsilon: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `mean / (ε l)`; absent for `ε = 0`.
    pub c_hat: Option<f64>,
    /// Standard error of `c_hat`.
    pub c_hat_stderr: Option<f64>,
    /// Fraction of realizations with at least one eigenvalue in the window.
    pub hit_probability: f64,
}

/// Least-squares fit `mean ≈ slope · ε` at fixed `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WegnerFit {
    pub box_length: u32,
    pub slope: f64,
    /// `1 - SS_res / Σ y²`, the usual figure for a fit without intercept.
    pub r_squared: f64,
    /// `1 - SS_res / Σ (y - ȳ)²`; stricter, and negative when the line
    /// through the origin does worse than the mean.
    pub r_squared_centered: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerStatistic {
    pub energy: f64,
    pub epsilons: Vec<f64>,
    pub box_lengths: Vec<u32>,
    /// Ordered by box length, then by `ε`.
    pub cells: Vec<WegnerCell>,
    pub fits: Vec<WegnerFit>,
    pub realizations: u64,
}

impl WegnerStatistic {
    pub fn cell(&self, box_length: u32, epsilon: f64) -> Option<&WegnerCell> {
        self.cells
            .iter()
            .find(|c| c.box_length == box_length && c.epsilon == epsilon)
    }

    /// Largest `Ĉ` over the grid, with its standard error.
    pub fn max_c_hat(&self) -> Option<(f64, f64)> {
        self.cells
            .iter()
            .filter_map(|c| Some((c.c_hat?, c.c_hat_stderr?)))
            .fold(None, |best: Option<(f64, f64)>, x| match best {
                Some(b) if b.0 >= x.0 => Some(b),
                _ => Some(x),
            })
    }

    /// `max Ĉ / min Ĉ` over the grid.
    pub fn c_hat_spread(&self) -> f64 {
        let (lo, hi) = self
            .cells
            .iter()
            .filter_map(|c| c.c_hat)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)));
        hi / lo
    }
}

fn fit_through_origin(eps: &[f64], means: &[f64]) -> (f64, f64, f64) {
    let sxy: f64 = eps.iter().zip(means).map(|(x, y)| x * y).sum();
    let sxx: f64 = eps.iter().map(|x| x * x).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    let ss_res: f64 = eps.iter().zip(means).map(|(x, y)| (y - slope * x).powi(2)).sum();
    let ss_tot: f64 = means.iter().map(|y| (y - avg).powi(2)).sum();
    let ss_raw: f64 = means.iter().map(|y| y * y).sum();
    let r2 = if ss_raw > 0.0 { 1.0 - ss_res / ss_raw } else { f64::NAN };
    let r2_centered = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
    (slope, r2, r2_centered)
}

/// Mean of `Tr P([E - ε, E))` over the ensemble for every `(ε, l)`.
///
/// Each box length runs its own ensemble with the same master seed. Per
/// realization the counts for all `ε` come from one operator, so the
/// estimates are additive across nested windows.
pub fn wegner_statistic(
    ensemble: &EnsembleConfig,
    energy: f64,
    epsilons: &[f64],
    box_lengths: &[u32],
    options: RunOptions,
) -> Result<WegnerStatistic> {
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy(energy));
    }
    if epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::Config("window widths must be finite and nonnegative".into()));
    }
    let windows: Vec<SpectralWindow> = epsilons
        .iter()
        .map(|eps| SpectralWindow::half_open(energy - eps, energy))
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    let mut fits = Vec::new();
    for &l in box_lengths {
        let config = ensemble.with_grid(ensemble.grid.with_box_length(l)?);
        let result = run_ensemble(&config, options, |m, r, g| {
            let op = assemble(m, r, g)?;
            windows
                .iter()
                .map(|w| Ok(trace_projection(&op, w)? as f64))
                .collect::<Result<Vec<f64>>>()
        })?;
        for (j, &eps) in epsilons.iter().enumerate() {
            let scale = eps * f64::from(l);
            let hits = result.values.iter().filter(|v| v[j] >= 1.0).count();
            cells.push(WegnerCell {
                box_length: l,
                epsilon: eps,
                mean: result.mean[j],
                stderr: result.stderr[j],
                c_hat: (eps > 0.0).then(|| result.mean[j] / scale),
                c_hat_stderr: (eps > 0.0).then(|| result.stderr[j] / scale),
                hit_probability: hits as f64 / result.realizations() as f64,
            });
        }
        let (slope, r_squared, r_squared_centered) = fit_through_origin(epsilons, &result.mean);
        fits.push(WegnerFit {
            box_length: l,
            slope,
            r_squared,
            r_squared_centered,
        });
    }
    Ok(WegnerStatistic {
        energy,
        epsilons: epsilons.to_vec(),
        box_lengths: box_lengths.to_vec(),
        cells,
        fits,
        realizations: ensemble.realizations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingProbability {
    /// Fraction of realizations with `Tr P([E - ε, E)) ≥ 1`.
    pub probability: f64,
    pub mean_trace: f64,
    pub stderr_trace: f64,
}

/// Empirical probability that the spectrum meets `[E - ε, E)`.
pub fn hitting_probability(
    ensemble: &EnsembleConfig,
    energy: f64,
    epsilon: f64,
    options: RunOptions,
) -> Result<HittingProbability> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!("window width must be positive, got {epsilon}")));
    }
    let stat = wegner_statistic(ensemble, energy, &[epsilon], &[ensemble.grid.box_length()], options)?;
    let cell = stat.cells[0];
    Ok(HittingProbability {
        probability: cell.hit_probability,
        mean_trace: cell.mean,
        stderr_trace: cell.stderr,
    })
}
