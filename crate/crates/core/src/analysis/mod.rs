//! Estimators built on the spectral kernel and the ensemble runner.

mod ids;
mod localization;
mod wegner;

pub use ids::{averaged_ids, finite_volume_ids, free_ids, lipschitz_modulus, IdsCurve, LipschitzEstimate};
pub use localization::{
    chain_potential, decay_rate, localization_report, lyapunov_exponent, lyapunov_from_potential,
    participation_ratio, DecayFit, DecaySetup, LocalizationReport, LyapunovPoint, StateDecay, CHAIN_STREAM,
};
pub use wegner::{
    hitting_probability, wegner_statistic, HittingProbability, WegnerCell, WegnerFit, WegnerStatistic,
};

use crate::error::{Error, Result};

pub(crate) fn check_energies(energies: &[f64]) -> Result<()> {
    if let Some(bad) = energies.iter().find(|e| !e.is_finite()) {
        return Err(Error::NonFiniteEnergy(*bad));
    }
    if energies.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("energy grid must be ascending".into()));
    }
    Ok(())
}
