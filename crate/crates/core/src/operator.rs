//! Finite-difference restriction of `H_ω` to the box `[-l/2, l/2]` as a
//! symmetric tridiagonal matrix, plus interior Dirichlet/Neumann cuts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_total_potential, CanonicalModel, Realization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

/// Uniform grid on `[-l/2, l/2]` with `m` points per unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    box_length: u32,
    points_per_cell: u32,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new(box_length: u32, points_per_cell: u32, boundary: Boundary) -> Result<Self> {
        if box_length == 0 || points_per_cell == 0 {
            return Err(Error::Grid("box length and points per cell must be positive".into()));
        }
        let grid = Self {
            box_length,
            points_per_cell,
            boundary,
        };
        if grid.len() == 0 {
            return Err(Error::Grid(format!(
                "grid l = {box_length}, m = {points_per_cell} has no interior points"
            )));
        }
        Ok(grid)
    }

    pub fn box_length(&self) -> u32 {
        self.box_length
    }

    pub fn points_per_cell(&self) -> u32 {
        self.points_per_cell
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn with_box_length(&self, box_length: u32) -> Result<Self> {
        Self::new(box_length, self.points_per_cell, self.boundary)
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        Self { boundary, ..*self }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / f64::from(self.points_per_cell)
    }

    /// Number of unknowns: `l·m - 1` (Dirichlet) or `l·m + 1` (Neumann).
    pub fn len(&self) -> usize {
        let cells = self.box_length as usize * self.points_per_cell as usize;
        match self.boundary {
            Boundary::Dirichlet => cells.saturating_sub(1),
            Boundary::Neumann => cells + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node positions carrying unknowns, ascending.
    pub fn positions(&self) -> Vec<f64> {
        let cells = self.box_length * self.points_per_cell;
        let h = self.spacing();
        let left = -f64::from(self.box_length) / 2.0;
        let range = match self.boundary {
            Boundary::Dirichlet => 1..cells,
            Boundary::Neumann => 0..cells + 1,
        };
        range.map(|i| left + f64::from(i) * h).collect()
    }
}

/// An interior boundary condition inserted by [`split_at`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    /// Node position the cut was placed at.
    pub position: f64,
    /// Requested position minus `position`.
    pub rounding: f64,
    pub kind: Boundary,
}

/// Symmetric tridiagonal matrix with optional finite-difference metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalOperator {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    positions: Vec<f64>,
    spacing: Option<f64>,
    boundary: Option<Boundary>,
    interfaces: Vec<Interface>,
}

impl TridiagonalOperator {
    /// A bare matrix; positions default to row indices.
    pub fn from_parts(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Grid("operator must have at least one row".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::Grid(format!(
                "{} off-diagonal entries for {} rows",
                offdiag.len(),
                diag.len()
            )));
        }
        if diag.iter().chain(&offdiag).any(|v| !v.is_finite()) {
            return Err(Error::Grid("operator entries must be finite".into()));
        }
        let positions = (0..diag.len()).map(|i| i as f64).collect();
        Ok(Self {
            diag,
            offdiag,
            positions,
            spacing: None,
            boundary: None,
            interfaces: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    /// Quadrature weight of one node: `h`, or `1` for bare matrices.
    pub fn weight(&self) -> f64 {
        self.spacing.unwrap_or(1.0)
    }

    pub fn boundary(&self) -> Option<Boundary> {
        self.boundary
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    /// Energy scale used for tolerances: `2/h²` for grid operators, the
    /// Gershgorin radius bound `max|d| + 2 max|e|` otherwise.
    pub fn norm_proxy(&self) -> f64 {
        match self.spacing {
            Some(h) => 2.0 / (h * h),
            None => {
                let d = self.diag.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                let e = self.offdiag.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                (d + 2.0 * e).max(f64::MIN_POSITIVE)
            }
        }
    }

    /// Interval containing the whole spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.offdiag[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// `H + c·I`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.diag.iter_mut().for_each(|d| *d += c);
        out
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.offdiag[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Whitespace-separated `index diag offdiag` rows; the last row carries
    /// no off-diagonal entry.
    pub fn to_three_column(&self) -> String {
        let mut out = String::with_capacity(self.diag.len() * 40);
        for (i, d) in self.diag.iter().enumerate() {
            match self.offdiag.get(i) {
                Some(e) => out.push_str(&format!("{i} {d} {e}\n")),
                None => out.push_str(&format!("{i} {d}\n")),
            }
        }
        out
    }

    fn nearest_node(&self, x: f64) -> usize {
        let idx = self.positions.partition_point(|p| *p < x);
        if idx == 0 {
            0
        } else if idx == self.positions.len() {
            idx - 1
        } else if (self.positions[idx] - x) < (x - self.positions[idx - 1]) {
            idx
        } else {
            idx - 1
        }
    }
}

/// Second-order finite-difference `-d²/dx² + V` on `grid`.
///
/// Dirichlet eliminates the boundary values; Neumann reflects a ghost point so
/// the end rows read `1/h² + V`.
pub fn assemble(
    model: &CanonicalModel,
    realization: &Realization,
    grid: &GridSpec,
) -> Result<TridiagonalOperator> {
    if realization.box_length() != grid.box_length() {
        return Err(Error::Grid(format!(
            "realization box length {} does not match grid box length {}",
            realization.box_length(),
            grid.box_length()
        )));
    }
    let positions = grid.positions();
    let potential = sample_total_potential(model, realization, &positions)?;
    Ok(assemble_from_potential(grid, positions, &potential))
}

/// Stencil around an already sampled potential at `grid.positions()`.
pub fn assemble_from_potential(
    grid: &GridSpec,
    positions: Vec<f64>,
    potential: &[f64],
) -> TridiagonalOperator {
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let n = positions.len();
    let mut diag: Vec<f64> = potential.iter().map(|v| 2.0 * inv_h2 + v).collect();
    if grid.boundary() == Boundary::Neumann {
        diag[0] -= inv_h2;
        diag[n - 1] -= inv_h2;
    }
    TridiagonalOperator {
        diag,
        offdiag: vec![-inv_h2; n.saturating_sub(1)],
        positions,
        spacing: Some(h),
        boundary: Some(grid.boundary()),
        interfaces: Vec::new(),
    }
}

/// Deliberate stencil defects, used to check that verification catches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StencilFault {
    /// Neumann cuts add `+1/h²` to the adjacent diagonals instead of `-1/h²`.
    FlippedNeumannCompensation,
}

/// Inserts boundary conditions of `kind` at the nodes nearest `j - R` and
/// `j + R`, making the operator block diagonal.
///
/// A Dirichlet cut removes the cut node and decouples its neighbours. A
/// Neumann cut removes the bond just outside `[j - R, j + R]` and lowers both
/// adjacent diagonals by `1/h²`, i.e. subtracts `(ψ_a - ψ_{a-1})²/h²` from the
/// quadratic form.
pub fn split_at(op: &TridiagonalOperator, j: i64, r: f64, kind: Boundary) -> Result<TridiagonalOperator> {
    split_at_with_fault(op, j, r, kind, None)
}

pub fn split_at_with_fault(
    op: &TridiagonalOperator,
    j: i64,
    r: f64,
    kind: Boundary,
    fault: Option<StencilFault>,
) -> Result<TridiagonalOperator> {
    let h = op
        .spacing
        .ok_or_else(|| Error::Grid("cuts need a grid operator".into()))?;
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::Grid(format!("cut half-width must be nonnegative, got {r}")));
    }
    let n = op.len();
    let targets = [j as f64 - r, j as f64 + r];
    let first = op.positions[0];
    let last = op.positions[n - 1];
    if targets.iter().any(|t| *t <= first || *t >= last) {
        return Err(Error::Grid(format!(
            "cut points {:?} are not strictly inside [{first}, {last}]",
            targets
        )));
    }
    let a = op.nearest_node(targets[0]);
    let b = op.nearest_node(targets[1]);
    let mut interfaces = op.interfaces.clone();
    for (&t, &p) in targets.iter().zip(&[a, b]) {
        let rounding = t - op.positions[p];
        if rounding.abs() > 1e-9 * h {
            log::warn!("cut at {t} rounded to node {} (off by {rounding:e})", op.positions[p]);
        }
        interfaces.push(Interface {
            position: op.positions[p],
            rounding,
            kind,
        });
    }
    if a == b {
        interfaces.pop();
    }
    let inv_h2 = 1.0 / (h * h);

    let mut out = match kind {
        Boundary::Dirichlet => {
            if a == 0 || b + 1 >= n {
                return Err(Error::Grid("Dirichlet cut needs a node on each side".into()));
            }
            let keep: Vec<usize> = (0..n).filter(|&i| i != a && i != b).collect();
            let diag = keep.iter().map(|&i| op.diag[i]).collect();
            let positions = keep.iter().map(|&i| op.positions[i]).collect();
            let offdiag = keep
                .windows(2)
                .map(|w| if w[1] == w[0] + 1 { op.offdiag[w[0]] } else { 0.0 })
                .collect();
            TridiagonalOperator {
                diag,
                offdiag,
                positions,
                ..op.clone()
            }
        }
        Boundary::Neumann => {
            if a == 0 || b + 1 >= n {
                return Err(Error::Grid("Neumann cut needs a bond on each side".into()));
            }
            let mut cut = op.clone();
            for (left, right) in [(a - 1, a), (b, b + 1)] {
                let bond = cut.offdiag[left].abs();
                cut.offdiag[left] = 0.0;
                let shift = match fault {
                    Some(StencilFault::FlippedNeumannCompensation) => inv_h2,
                    None => -bond,
                };
                cut.diag[left] += shift;
                cut.diag[right] += shift;
            }
            cut
        }
    };
    out.interfaces = interfaces;
    Ok(out)
}
