use serde::{Deserialize, Serialize};

use super::check_energies;
use crate::ensemble::{mean_and_stderr, run_ensemble, EnsembleConfig, RunOptions};
use crate::error::{Error, Result};
use crate::model::{CanonicalModel, Realization};
use crate::operator::{assemble, GridSpec};
use crate::spectral::count_below;

/// Eigenvalue counting function per unit length, `N(E) = #{λ < E} / l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsCurve {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    /// Standard error of each value over the ensemble, if averaged.
    pub stderr: Option<Vec<f64>>,
    /// Standard error of each adjacent difference quotient, if averaged.
    pub quotient_stderr: Option<Vec<f64>>,
    pub box_length: u32,
    pub points_per_cell: u32,
    pub realizations: u64,
    /// Matrix dimension; `values ≤ unknowns / box_length`.
    pub unknowns: usize,
}

/// `√E / π` for `E ≥ 0`: the IDS of `-d²/dx²` on the line.
pub fn free_ids(energy: f64) -> f64 {
    if energy <= 0.0 {
        0.0
    } else {
        energy.sqrt() / std::f64::consts::PI
    }
}

fn counts(model: &CanonicalModel, realization: &Realization, grid: &GridSpec, energies: &[f64]) -> Result<Vec<f64>> {
    let op = assemble(model, realization, grid)?;
    let l = f64::from(grid.box_length());
    energies
        .iter()
        .map(|&e| Ok(count_below(&op, e)? as f64 / l))
        .collect()
}

/// `N_ω^l(E)` for one realization.
pub fn finite_volume_ids(
    model: &CanonicalModel,
    realization: &Realization,
    grid: &GridSpec,
    energies: &[f64],
) -> Result<IdsCurve> {
    check_energies(energies)?;
    Ok(IdsCurve {
        energies: energies.to_vec(),
        values: counts(model, realization, grid, energies)?,
        stderr: None,
        quotient_stderr: None,
        box_length: grid.box_length(),
        points_per_cell: grid.points_per_cell(),
        realizations: 1,
        unknowns: grid.len(),
    })
}

/// Ensemble mean of `N_ω^l(E)` with standard-error bands.
pub fn averaged_ids(ensemble: &EnsembleConfig, energies: &[f64], options: RunOptions) -> Result<IdsCurve> {
    check_energies(energies)?;
    let result = run_ensemble(ensemble, options, |m, r, g| counts(m, r, g, energies))?;
    let quotient_stderr = energies
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let de = w[1] - w[0];
            if de > 0.0 {
                result.reduce_with(|v| (v[i + 1] - v[i]) / de).1
            } else {
                0.0
            }
        })
        .collect();
    Ok(IdsCurve {
        energies: energies.to_vec(),
        values: result.mean,
        stderr: Some(result.stderr),
        quotient_stderr: Some(quotient_stderr),
        box_length: ensemble.grid.box_length(),
        points_per_cell: ensemble.grid.points_per_cell(),
        realizations: ensemble.realizations,
        unknowns: ensemble.grid.len(),
    })
}

/// Largest adjacent difference quotient of an IDS curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub modulus: f64,
    /// The quotient is taken over `[energies[index], energies[index + 1]]`.
    pub index: usize,
    pub stderr: Option<f64>,
}

/// `max_i (N(E_{i+1}) - N(E_i)) / (E_{i+1} - E_i)` on a uniform grid.
pub fn lipschitz_modulus(curve: &IdsCurve) -> Result<LipschitzEstimate> {
    let e = &curve.energies;
    if e.len() < 2 {
        return Err(Error::Config("Lipschitz modulus needs at least two energies".into()));
    }
    let step = (e[e.len() - 1] - e[0]) / (e.len() - 1) as f64;
    if !(step > 0.0) || e.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0)) {
        return Err(Error::Config("Lipschitz modulus needs a uniform energy grid".into()));
    }
    let (index, modulus) = curve
        .values
        .windows(2)
        .zip(e.windows(2))
        .map(|(v, w)| (v[1] - v[0]) / (w[1] - w[0]))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, q)| if q > best.1 { (i, q) } else { best });
    Ok(LipschitzEstimate {
        modulus,
        index,
        stderr: curve.quotient_stderr.as_ref().map(|s| s[index]),
    })
}

impl IdsCurve {
    /// Checks monotonicity and the `n / l` ceiling.
    pub fn is_consistent(&self) -> bool {
        let cap = self.unknowns as f64 / f64::from(self.box_length);
        self.values.windows(2).all(|w| w[1] >= w[0]) && self.values.iter().all(|v| *v >= 0.0 && *v <= cap)
    }

    /// `sup_i |N(E_i) - reference(E_i)|`.
    pub fn sup_deviation<F: Fn(f64) -> f64>(&self, reference: F) -> f64 {
        self.energies
            .iter()
            .zip(&self.values)
            .map(|(e, v)| (v - reference(*e)).abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise mean of several curves on the same grid; bands are dropped.
    pub fn mean_of(curves: &[IdsCurve]) -> Result<IdsCurve> {
        let first = curves
            .first()
            .ok_or_else(|| Error::Config("no curves to average".into()))?;
        let values = (0..first.values.len())
            .map(|i| mean_and_stderr(&curves.iter().map(|c| c.values[i]).collect::<Vec<_>>()).0)
            .collect();
        Ok(IdsCurve {
            values,
            stderr: None,
            quotient_stderr: None,
            realizations: curves.iter().map(|c| c.realizations).sum(),
            ..first.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Realization;
    use crate::operator::Boundary;

    fn free_setup(l: u32, m: u32) -> (CanonicalModel, Realization, GridSpec) {
        let model = CanonicalModel::small_support();
        let r = Realization::constant(model.touching_sites(l), 0.0, l);
        (model, r, GridSpec::new(l, m, Boundary::Dirichlet).unwrap())
    }

    #[test]
    fn free_ids_matches_sqrt_law() {
        let (model, r, grid) = free_setup(256, 32);
        let energies: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
        let curve = finite_volume_ids(&model, &r, &grid, &energies).unwrap();
        assert!(curve.is_consistent());
        assert!(curve.sup_deviation(free_ids) <= 0.02);
    }

    #[test]
    fn ids_limits() {
        let (model, r, grid) = free_setup(8, 8);
        let curve = finite_volume_ids(&model, &r, &grid, &[-1.0, 1e6]).unwrap();
        assert_eq!(curve.values[0], 0.0);
        assert_eq!(curve.values[1], grid.len() as f64 / 8.0);
    }

    #[test]
    fn disorder_off_average_equals_single_curve() {
        let (model, r, grid) = free_setup(16, 16);
        let model = model
            .with_coupling(crate::model::CouplingDensity::point(0.0).unwrap())
            .unwrap();
        let energies: Vec<f64> = (0..50).map(|i| i as f64 * 0.4).collect();
        let single = finite_volume_ids(&model, &r, &grid, &energies).unwrap();
        let cfg = EnsembleConfig::new(1, 8, model, grid).unwrap();
        let avg = averaged_ids(&cfg, &energies, RunOptions::default()).unwrap();
        assert_eq!(avg.values, single.values);
        assert!(avg.stderr.unwrap().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn lipschitz_of_simple_curves() {
        let energies: Vec<f64> = (0..=190).map(|i| 1.0 + i as f64 * 0.1).collect();
        let mut curve = IdsCurve {
            values: vec![0.3; energies.len()],
            energies: energies.clone(),
            stderr: None,
            quotient_stderr: None,
            box_length: 1,
            points_per_cell: 1,
            realizations: 1,
            unknowns: 1,
        };
        assert_eq!(lipschitz_modulus(&curve).unwrap().modulus, 0.0);
        curve.values = energies.iter().map(|e| free_ids(*e)).collect();
        let est = lipschitz_modulus(&curve).unwrap();
        let expect = 1.0 / (2.0 * std::f64::consts::PI);
        assert_eq!(est.index, 0);
        assert!((est.modulus - expect).abs() < 0.05 * expect);
        curve.energies.truncate(1);
        curve.values.truncate(1);
        assert!(lipschitz_modulus(&curve).is_err());
    }

    #[test]
    fn nonuniform_grid_is_rejected() {
        let curve = IdsCurve {
            energies: vec![0.0, 1.0, 3.0],
            values: vec![0.0, 0.1, 0.2],
            stderr: None,
            quotient_stderr: None,
            box_length: 1,
            points_per_cell: 1,
            realizations: 1,
            unknowns: 1,
        };
        assert!(lipschitz_modulus(&curve).is_err());
    }
}
