//! Fixtures shared by the benchmarks.

use wegnerlab_core::ensemble::realization_stream;
use wegnerlab_core::{assemble, sample_realization, Boundary, CanonicalModel, GridSpec, Realization, TridiagonalOperator};

pub struct Fixture {
    pub model: CanonicalModel,
    pub realization: Realization,
    pub grid: GridSpec,
}

impl Fixture {
    /// Default model in a Dirichlet box of length `l` with 32 points per cell.
    pub fn new(l: u32, seed: u64) -> Self {
        let model = CanonicalModel::small_support();
        let grid = GridSpec::new(l, 32, Boundary::Dirichlet).expect("valid grid");
        let realization = sample_realization(&model, &mut realization_stream(seed, 0), l, None);
        Self { model, realization, grid }
    }

    pub fn operator(&self) -> TridiagonalOperator {
        assemble(&self.model, &self.realization, &self.grid).expect("assembles")
    }
}
