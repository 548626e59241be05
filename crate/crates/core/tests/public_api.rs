use nalgebra::DMatrix;
use wegnerlab_core::analysis::{averaged_ids, wegner_statistic};
use wegnerlab_core::ensemble::{realization, realization_stream, EnsembleConfig, RunOptions};
use wegnerlab_core::{
    assemble, count_below, eigenpair, sample_realization, split_at, Boundary, CanonicalModel, GridSpec,
    TridiagonalOperator,
};

fn dense(op: &TridiagonalOperator) -> DMatrix<f64> {
    let n = op.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = op.diag()[i];
    }
    for (i, &b) in op.offdiag().iter().enumerate() {
        m[(i, i + 1)] = b;
        m[(i + 1, i)] = b;
    }
    m
}

fn sorted_eigenvalues(op: &TridiagonalOperator) -> Vec<f64> {
    let mut v: Vec<f64> = dense(op).symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn disordered(l: u32, boundary: Boundary, seed: u64) -> TridiagonalOperator {
    let model = CanonicalModel::small_support();
    let grid = GridSpec::new(l, 16, boundary).unwrap();
    let real = sample_realization(&model, &mut realization_stream(seed, 0), l, None);
    assemble(&model, &real, &grid).unwrap()
}

#[test]
fn counts_agree_with_nalgebra() {
    for (seed, boundary) in [(1, Boundary::Dirichlet), (2, Boundary::Neumann), (3, Boundary::Dirichlet)] {
        let op = disordered(12, boundary, seed);
        let spectrum = sorted_eigenvalues(&op);
        for i in 0..spectrum.len() - 1 {
            let mid = 0.5 * (spectrum[i] + spectrum[i + 1]);
            assert_eq!(count_below(&op, mid).unwrap(), i + 1);
        }
        assert_eq!(count_below(&op, spectrum[0] - 1.0).unwrap(), 0);
    }
}

#[test]
fn eigenpairs_have_small_residuals() {
    let op = disordered(10, Boundary::Dirichlet, 4);
    let spectrum = sorted_eigenvalues(&op);
    for &target in spectrum.iter().take(12) {
        let pair = eigenpair(&op, target).unwrap();
        assert!((pair.value - target).abs() < 1e-8 * spectrum[spectrum.len() - 1]);
        let hv = op.apply(&pair.vector);
        let res = hv
            .iter()
            .zip(&pair.vector)
            .map(|(a, v)| (a - pair.value * v).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = pair.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res < 1e-7 * norm * spectrum[spectrum.len() - 1], "{res}");
    }
}

#[test]
fn cuts_shift_counts_by_at_most_two() {
    let op = disordered(8, Boundary::Dirichlet, 5);
    let spectrum = sorted_eigenvalues(&op);
    for kind in [Boundary::Dirichlet, Boundary::Neumann] {
        let cut = split_at(&op, 1, 0.5, kind).unwrap();
        let cut_spectrum = sorted_eigenvalues(&cut);
        for e in [1.0, 10.0, 50.0, 200.0, 600.0] {
            let a = spectrum.iter().filter(|&&v| v < e).count() as i64;
            let b = cut_spectrum.iter().filter(|&&v| v < e).count() as i64;
            assert!((a - b).abs() <= 2, "{kind:?} at {e}: {a} vs {b}");
            assert_eq!(count_below(&cut, e).unwrap() as i64, b);
        }
    }
}

#[test]
fn ensemble_results_ignore_worker_count() {
    let model = CanonicalModel::small_support();
    let grid = GridSpec::new(16, 16, Boundary::Dirichlet).unwrap();
    let ensemble = EnsembleConfig::new(9, 40, model, grid).unwrap();
    let energies = [0.5, 1.0, 4.0, 9.0];
    let one = averaged_ids(&ensemble, &energies, RunOptions::with_workers(1)).unwrap();
    let four = averaged_ids(&ensemble, &energies, RunOptions::with_workers(4)).unwrap();
    assert_eq!(one, four);
    let w1 = wegner_statistic(&ensemble, 4.0, &[0.01, 0.1], &[16, 32], RunOptions::with_workers(1)).unwrap();
    let w3 = wegner_statistic(&ensemble, 4.0, &[0.01, 0.1], &[16, 32], RunOptions::with_workers(3)).unwrap();
    assert_eq!(w1, w3);
}

#[test]
fn realizations_depend_only_on_seed_and_index() {
    let model = CanonicalModel::small_support();
    let grid = GridSpec::new(16, 16, Boundary::Dirichlet).unwrap();
    let small = EnsembleConfig::new(3, 10, model.clone(), grid).unwrap();
    let large = EnsembleConfig::new(3, 1000, model.clone(), grid).unwrap();
    assert_eq!(realization(&small, 7).couplings(), realization(&large, 7).couplings());
    let other = EnsembleConfig::new(4, 10, model, grid).unwrap();
    assert_ne!(realization(&small, 7).couplings(), realization(&other, 7).couplings());
    let (lo, hi) = small.model.coupling().support();
    assert!(realization(&small, 0).couplings().iter().all(|w| (lo..=hi).contains(w)));
}
