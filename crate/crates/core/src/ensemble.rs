//! Monte Carlo over disorder realizations.
//!
//! Realization `r` draws its couplings from a ChaCha stream keyed by the
//! master seed with stream id `r`, so any realization can be regenerated in
//! isolation and a run with `2ℛ` realizations starts with the `ℛ` of a
//! smaller run. Statistics may be evaluated on any number of workers; the
//! reduction always walks realizations in ascending order.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{sample_realization, CanonicalModel, Realization, StreamId};
use crate::operator::GridSpec;

/// Counter-mode stream for realization `index`.
pub fn realization_stream(master_seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Regenerates realization `index` of an ensemble.
pub fn realization(config: &EnsembleConfig, index: u64) -> Realization {
    let mut rng = realization_stream(config.master_seed, index);
    sample_realization(
        &config.model,
        &mut rng,
        config.grid.box_length(),
        Some(StreamId {
            master_seed: config.master_seed,
            index,
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub master_seed: u64,
    pub realizations: u64,
    pub model: CanonicalModel,
    pub grid: GridSpec,
}

impl EnsembleConfig {
    pub fn new(master_seed: u64, realizations: u64, model: CanonicalModel, grid: GridSpec) -> Result<Self> {
        if realizations == 0 {
            return Err(Error::Config("ensemble needs at least one realization".into()));
        }
        Ok(Self {
            master_seed,
            realizations,
            model,
            grid,
        })
    }

    pub fn with_grid(&self, grid: GridSpec) -> Self {
        Self { grid, ..self.clone() }
    }

    pub fn with_realizations(&self, realizations: u64) -> Self {
        Self {
            realizations,
            ..self.clone()
        }
    }
}

/// How to execute an ensemble; never affects results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Report progress on standard error.
    pub progress: bool,
}

impl RunOptions {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: Some(workers),
            progress: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    /// `values[r]` is the statistic of realization `r`.
    pub values: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Sample standard deviation over `√ℛ`; zero when `ℛ = 1`.
    pub stderr: Vec<f64>,
    /// SHA-256 over every realization's couplings, in order.
    pub realizations_digest: String,
}

impl EnsembleResult {
    pub fn realizations(&self) -> usize {
        self.values.len()
    }

    /// Mean and standard error of any per-realization functional.
    pub fn reduce_with<F>(&self, f: F) -> (f64, f64)
    where
        F: Fn(&[f64]) -> f64,
    {
        let column: Vec<f64> = self.values.iter().map(|v| f(v)).collect();
        mean_and_stderr(&column)
    }
}

/// Welford mean and standard error, in slice order.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = values.len();
    let stderr = if n > 1 {
        (m2 / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    } else {
        0.0
    };
    (mean, stderr)
}

/// Evaluates `statistic` on every realization and reduces in index order.
///
/// The statistic must return the same number of values for every
/// realization. The first failing realization (lowest index) aborts the run.
pub fn run_ensemble<F, E>(config: &EnsembleConfig, options: RunOptions, statistic: F) -> Result<EnsembleResult>
where
    F: Fn(&CanonicalModel, &Realization, &GridSpec) -> std::result::Result<Vec<f64>, E> + Sync,
    E: std::fmt::Display,
{
    let total = config.realizations;
    let done = AtomicUsize::new(0);
    let step = (total as usize / 10).max(1);
    let evaluate = |r: u64| -> (Vec<f64>, std::result::Result<Vec<f64>, String>) {
        let realization = realization(config, r);
        let out = statistic(&config.model, &realization, &config.grid).map_err(|e| e.to_string());
        if options.progress {
            let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
            if finished % step == 0 || finished as u64 == total {
                eprintln!("  realizations: {finished}/{total}");
            }
        }
        (realization.couplings().to_vec(), out)
    };
    let outputs: Vec<_> = match options.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| Error::Numerical(format!("could not start worker pool: {e}")))?;
            pool.install(|| (0..total).into_par_iter().map(evaluate).collect())
        }
        None => (0..total).into_par_iter().map(evaluate).collect(),
    };

    let mut hasher = Sha256::new();
    hasher.update(config.master_seed.to_le_bytes());
    let mut values = Vec::with_capacity(outputs.len());
    for (r, (couplings, out)) in outputs.into_iter().enumerate() {
        let v = out.map_err(|message| Error::Realization {
            seed: config.master_seed,
            realization: r as u64,
            message,
        })?;
        if let Some(first) = values.first() {
            let first: &Vec<f64> = first;
            if first.len() != v.len() {
                return Err(Error::Realization {
                    seed: config.master_seed,
                    realization: r as u64,
                    message: format!("statistic returned {} values, expected {}", v.len(), first.len()),
                });
            }
        }
        for w in couplings {
            hasher.update(w.to_le_bytes());
        }
        values.push(v);
    }
    let width = values.first().map_or(0, Vec::len);
    let (mean, stderr) = (0..width)
        .map(|j| {
            let column: Vec<f64> = values.iter().map(|v| v[j]).collect();
            mean_and_stderr(&column)
        })
        .unzip();
    let realizations_digest = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(EnsembleResult {
        values,
        mean,
        stderr,
        realizations_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{assemble, Boundary};
    use crate::spectral::{trace_projection, SpectralWindow};
    use rand::Rng;
    use std::collections::HashSet;

    fn config(r: u64) -> EnsembleConfig {
        EnsembleConfig::new(
            42,
            r,
            CanonicalModel::small_support(),
            GridSpec::new(8, 8, Boundary::Dirichlet).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_statistic() {
        let out = run_ensemble(&config(7), RunOptions::default(), |_, _, _| Ok::<_, Error>(vec![0.1, 3.0])).unwrap();
        assert_eq!(out.mean, vec![0.1, 3.0]);
        assert_eq!(out.stderr, vec![0.0, 0.0]);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let stat = |_: &CanonicalModel, r: &Realization, _: &GridSpec| {
            Ok::<_, Error>(vec![r.couplings().iter().map(|w| w.sin()).sum::<f64>() / 3.0])
        };
        let one = run_ensemble(&config(64), RunOptions::with_workers(1), stat).unwrap();
        let four = run_ensemble(&config(64), RunOptions::with_workers(4), stat).unwrap();
        let eight = run_ensemble(&config(64), RunOptions::with_workers(8), stat).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, eight);
        assert_eq!(one.mean[0].to_bits(), eight.mean[0].to_bits());
    }

    #[test]
    fn prefix_property() {
        let stat = |_: &CanonicalModel, r: &Realization, _: &GridSpec| Ok::<_, Error>(r.couplings().to_vec());
        let small = run_ensemble(&config(10), RunOptions::default(), stat).unwrap();
        let big = run_ensemble(&config(20), RunOptions::default(), stat).unwrap();
        assert_eq!(small.values[..], big.values[..10]);
    }

    #[test]
    fn full_window_counts_every_eigenvalue() {
        let cfg = config(16);
        let n = cfg.grid.len() as f64;
        let out = run_ensemble(&cfg, RunOptions::default(), |m, r, g| {
            let op = assemble(m, r, g)?;
            let (lo, hi) = op.gershgorin_bounds();
            let w = SpectralWindow::closed(lo - 1.0, hi + 1.0)?;
            Ok::<_, Error>(vec![trace_projection(&op, &w)? as f64])
        })
        .unwrap();
        assert_eq!(out.mean, vec![n]);
        assert_eq!(out.stderr, vec![0.0]);
    }

    #[test]
    fn failures_report_lowest_realization() {
        let err = run_ensemble(&config(50), RunOptions::with_workers(4), |_, r, _| {
            let idx = r.stream().unwrap().index;
            if idx == 17 || idx == 33 {
                Err(format!("boom at {idx}"))
            } else {
                Ok(vec![1.0])
            }
        })
        .unwrap_err();
        assert_eq!(
            err,
            Error::Realization {
                seed: 42,
                realization: 17,
                message: "boom at 17".into()
            }
        );
    }

    #[test]
    fn streams_do_not_collide() {
        let mut seen = HashSet::new();
        for r in 0..10_000 {
            let mut rng = realization_stream(42, r);
            let head: Vec<u64> = (0..32).map(|_| rng.gen::<u64>()).collect();
            assert!(seen.insert(head), "stream {r} repeats an earlier stream");
        }
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let (mean, se) = mean_and_stderr(&xs);
        let m2: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 = xs.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((mean - m2).abs() < 1e-12);
        assert!((se - (var / xs.len() as f64).sqrt()).abs() < 1e-12);
    }
}
