//! The random operator family `H = -d²/dx² + V_per + Σ_k ω_k u(· - k)`.
//!
//! A [`ModelSpec`] is whatever the user wrote down. [`ModelSpec::canonicalize`]
//! turns it into a [`CanonicalModel`] describing the same family of operators
//! with the single-site lower bound normalized to one, the lower-bound window
//! centered at the origin, and coupling support starting at zero.

use std::ops::RangeInclusive;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `∫ f = 1` for tabulated coupling densities.
pub const DENSITY_NORMALIZATION_TOL: f64 = 1e-12;

/// Evaluates `a + t (b - a)`; exact when `a == b`.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// One period of a ℤ-periodic background potential, stored as `m` uniform
/// samples on `[0, 1)` and linearly interpolated (periodically) in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPotential {
    values: Vec<f64>,
    /// Evaluation at `x` reads the stored period at `x + phase`.
    phase: f64,
}

impl PeriodicPotential {
    pub fn zero() -> Self {
        Self {
            values: vec![0.0],
            phase: 0.0,
        }
    }

    /// `amplitude · cos(2πx)` sampled at `samples_per_cell` points.
    pub fn harmonic(amplitude: f64, samples_per_cell: usize) -> Result<Self> {
        if samples_per_cell == 0 {
            return Err(Error::Model("harmonic potential needs at least one sample".into()));
        }
        let m = samples_per_cell as f64;
        let values = (0..samples_per_cell)
            .map(|i| amplitude * (2.0 * std::f64::consts::PI * i as f64 / m).cos())
            .collect();
        Self::from_samples(values)
    }

    pub fn from_samples(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Model("periodic potential needs at least one sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("periodic potential samples must be finite".into()));
        }
        Ok(Self { values, phase: 0.0 })
    }

    pub fn samples_per_cell(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// The potential `y ↦ V(y + offset)`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            values: self.values.clone(),
            phase: self.phase + offset,
        }
    }

    pub fn at(&self, x: f64) -> f64 {
        let m = self.values.len();
        if m == 1 {
            return self.values[0];
        }
        let t = ((x + self.phase) * m as f64).rem_euclid(m as f64);
        let i = (t.floor() as usize).min(m - 1);
        let frac = t - i as f64;
        lerp(self.values[i], self.values[(i + 1) % m], frac)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Nonnegative single-site profile `u` supported on `[lo, hi]`, sampled
/// uniformly and linearly interpolated, with `u ≥ κ` on the window
/// `[c - s/2, c + s/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleSitePotential {
    support: (f64, f64),
    samples: Vec<f64>,
    window_center: f64,
    window_half_width: f64,
    lower_bound: f64,
}

impl SingleSitePotential {
    /// `χ_[-R, R]`, with window equal to the support and `κ = 1`.
    pub fn indicator(half_width: f64) -> Result<Self> {
        Self::new((-half_width, half_width), vec![1.0, 1.0], 0.0, half_width, 1.0)
    }

    pub fn new(
        support: (f64, f64),
        samples: Vec<f64>,
        window_center: f64,
        window_half_width: f64,
        lower_bound: f64,
    ) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Model(format!("site support [{lo}, {hi}] is not a bounded interval")));
        }
        if samples.len() < 2 {
            return Err(Error::Model("site profile needs at least two samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Model("site profile must be finite and nonnegative".into()));
        }
        if !(lower_bound.is_finite() && lower_bound > 0.0) {
            return Err(Error::Model(format!("lower bound κ must be positive, got {lower_bound}")));
        }
        if !(window_half_width.is_finite() && window_half_width > 0.0) {
            return Err(Error::Model("lower-bound window is empty".into()));
        }
        if !window_center.is_finite() {
            return Err(Error::Model("window center must be finite".into()));
        }
        let site = Self {
            support,
            samples,
            window_center,
            window_half_width,
            lower_bound,
        };
        let (wa, wb) = site.window();
        let slack = 1e-12 * (hi - lo);
        if wa < lo - slack || wb > hi + slack {
            return Err(Error::Model(format!(
                "window [{wa}, {wb}] is not contained in the support [{lo}, {hi}]"
            )));
        }
        // A piecewise-linear profile attains its minimum over the window at the
        // window endpoints or at sample nodes inside it.
        let floor = lower_bound * (1.0 - 1e-12);
        let node_min = site
            .nodes()
            .filter(|(y, _)| *y >= wa && *y <= wb)
            .map(|(_, v)| v)
            .fold(f64::INFINITY, f64::min);
        let min = node_min.min(site.at(wa.max(lo))).min(site.at(wb.min(hi)));
        if min < floor {
            return Err(Error::Model(format!(
                "profile drops to {min} inside the window, below κ = {lower_bound}"
            )));
        }
        Ok(site)
    }

    fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (lo, hi) = self.support;
        let last = (self.samples.len() - 1) as f64;
        self.samples
            .iter()
            .enumerate()
            .map(move |(i, &v)| (lo + (hi - lo) * i as f64 / last, v))
    }

    pub fn at(&self, y: f64) -> f64 {
        let (lo, hi) = self.support;
        if !(y >= lo && y <= hi) {
            return 0.0;
        }
        let last = self.samples.len() - 1;
        let t = (y - lo) / (hi - lo) * last as f64;
        let i = (t.floor() as usize).min(last - 1);
        lerp(self.samples[i], self.samples[i + 1], t - i as f64)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// `R`: the support is contained in `[-R, R]`.
    pub fn half_width(&self) -> f64 {
        self.support.0.abs().max(self.support.1.abs())
    }

    pub fn window_center(&self) -> f64 {
        self.window_center
    }

    /// `s`, the width of the lower-bound window.
    pub fn window_width(&self) -> f64 {
        2.0 * self.window_half_width
    }

    pub fn window(&self) -> (f64, f64) {
        (
            self.window_center - self.window_half_width,
            self.window_center + self.window_half_width,
        )
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc, v| acc.max(*v))
    }

    /// `y ↦ u(y + offset) / scale`, window and bound transported alike.
    fn shifted_scaled(&self, offset: f64, scale: f64) -> Self {
        Self {
            support: (self.support.0 - offset, self.support.1 - offset),
            samples: self.samples.iter().map(|v| v / scale).collect(),
            window_center: self.window_center - offset,
            window_half_width: self.window_half_width,
            lower_bound: self.lower_bound / scale,
        }
    }

    /// Sites `k` whose support `[k + lo, k + hi]` meets `[-l/2, l/2]`
    /// (closed intersection).
    pub fn touching_sites(&self, box_length: u32) -> RangeInclusive<i64> {
        let half = f64::from(box_length) / 2.0;
        let (lo, hi) = self.support;
        let first = (-half - hi).ceil() as i64;
        let last = (half - lo).floor() as i64;
        first..=last
    }

    /// `Σ_k u(y - k)` over all `k ∈ ℤ`.
    pub fn lattice_sum(&self, y: f64) -> f64 {
        let (lo, hi) = self.support;
        let first = (y - hi).ceil() as i64;
        let last = (y - lo).floor() as i64;
        (first..=last).map(|k| self.at(y - k as f64)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum DensityKind {
    Uniform { lo: f64, hi: f64 },
    /// Piecewise-linear density through `(t_i, f_i)`, zero outside.
    Table { points: Vec<(f64, f64)> },
    /// Every coupling equals `at`; the disorder-free limit.
    Point { at: f64 },
}

/// Bounded probability density of the coupling constants, supported on a
/// bounded interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDensity {
    kind: DensityKind,
}

impl CouplingDensity {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Model(format!("uniform density needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self {
            kind: DensityKind::Uniform { lo, hi },
        })
    }

    /// Degenerate law: every coupling equals `at`. Not a bounded density, so
    /// it only serves disorder-free reference runs.
    pub fn point(at: f64) -> Result<Self> {
        if !at.is_finite() {
            return Err(Error::Model(format!("point mass must be finite, got {at}")));
        }
        Ok(Self {
            kind: DensityKind::Point { at },
        })
    }

    pub fn is_point(&self) -> bool {
        matches!(self.kind, DensityKind::Point { .. })
    }

    /// Piecewise-linear density; must integrate to one within
    /// [`DENSITY_NORMALIZATION_TOL`].
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::check_table(&points)?;
        let mass = table_mass(&points);
        if (mass - 1.0).abs() > DENSITY_NORMALIZATION_TOL {
            return Err(Error::Model(format!("density integrates to {mass}, not 1")));
        }
        Ok(Self {
            kind: DensityKind::Table { points },
        })
    }

    /// Like [`CouplingDensity::table`] but rescales the values to unit mass.
    pub fn table_normalized(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::check_table(&points)?;
        let mass = table_mass(&points);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Model("density table has no mass".into()));
        }
        let points = points.into_iter().map(|(t, f)| (t, f / mass)).collect();
        Ok(Self {
            kind: DensityKind::Table { points },
        })
    }

    fn check_table(points: &[(f64, f64)]) -> Result<()> {
        if points.len() < 2 {
            return Err(Error::Model("density table needs at least two points".into()));
        }
        if points.iter().any(|(t, f)| !t.is_finite() || !f.is_finite() || *f < 0.0) {
            return Err(Error::Model("density table must be finite and nonnegative".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Model("density abscissae must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            DensityKind::Uniform { lo, hi } => (*lo, *hi),
            DensityKind::Table { points } => (points[0].0, points[points.len() - 1].0),
            DensityKind::Point { at } => (*at, *at),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, DensityKind::Uniform { .. })
    }

    /// Table points, if tabulated.
    pub fn table_points(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            DensityKind::Table { points } => Some(points),
            _ => None,
        }
    }

    /// `‖f‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match &self.kind {
            DensityKind::Uniform { lo, hi } => 1.0 / (hi - lo),
            DensityKind::Table { points } => points.iter().fold(0.0, |acc, p| acc.max(p.1)),
            DensityKind::Point { .. } => f64::INFINITY,
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        match &self.kind {
            DensityKind::Uniform { lo, hi } => {
                if t >= *lo && t <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            DensityKind::Table { points } => {
                if t < points[0].0 || t > points[points.len() - 1].0 {
                    return 0.0;
                }
                let i = points.partition_point(|p| p.0 <= t).clamp(1, points.len() - 1);
                let (t0, f0) = points[i - 1];
                let (t1, f1) = points[i];
                lerp(f0, f1, (t - t0) / (t1 - t0))
            }
            DensityKind::Point { at } => {
                if t == *at {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// Inverse of the distribution function, for `p ∈ [0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match &self.kind {
            DensityKind::Uniform { lo, hi } => lerp(*lo, *hi, p),
            DensityKind::Table { points } => {
                let mut remaining = p;
                for w in points.windows(2) {
                    let (t0, f0) = w[0];
                    let (t1, f1) = w[1];
                    let width = t1 - t0;
                    let mass = 0.5 * (f0 + f1) * width;
                    if remaining <= mass && mass > 0.0 {
                        // Solve f0·x + (f1 - f0)·x²/(2·width) = remaining for x.
                        let a = (f1 - f0) / (2.0 * width);
                        let disc = (f0 * f0 + 4.0 * a * remaining).max(0.0);
                        let denom = f0 + disc.sqrt();
                        let x = if denom > 0.0 { 2.0 * remaining / denom } else { 0.0 };
                        return t0 + x.clamp(0.0, width);
                    }
                    remaining -= mass;
                }
                points[points.len() - 1].0
            }
            DensityKind::Point { at } => *at,
        }
    }

    /// Law of `scale · (ω - shift)` when `ω` has this density; `scale > 0`.
    fn transformed(&self, scale: f64, shift: f64) -> Self {
        let kind = match &self.kind {
            DensityKind::Uniform { lo, hi } => DensityKind::Uniform {
                lo: scale * (lo - shift),
                hi: scale * (hi - shift),
            },
            DensityKind::Table { points } => DensityKind::Table {
                points: points
                    .iter()
                    .map(|(t, f)| (scale * (t - shift), f / scale))
                    .collect(),
            },
            DensityKind::Point { at } => DensityKind::Point { at: scale * (at - shift) },
        };
        Self { kind }
    }
}

fn table_mass(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum()
}

/// A user-supplied description of the operator family, in arbitrary gauge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub periodic: PeriodicPotential,
    pub site: SingleSitePotential,
    pub coupling: CouplingDensity,
}

impl ModelSpec {
    /// The default small-support model: `V_per = 0`, `u = χ_[-0.15, 0.15]`,
    /// couplings uniform on `[0, 1]`.
    pub fn small_support() -> Self {
        Self {
            periodic: PeriodicPotential::zero(),
            site: SingleSitePotential::indicator(0.15).expect("valid default site"),
            coupling: CouplingDensity::uniform(0.0, 1.0).expect("valid default density"),
        }
    }

    /// Rewrites the family in canonical gauge: origin moved to the window
    /// center, `u ↦ u/κ` with couplings `ω ↦ κω`, and the coupling support
    /// `[κa, κb]` shifted to `[0, κ(b - a)]` with `κa·Σ_k u(· - k)` moved into
    /// the periodic part.
    pub fn canonicalize(&self) -> Result<CanonicalModel> {
        let kappa = self.site.lower_bound;
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Model(format!("lower bound κ must be positive, got {kappa}")));
        }
        let (a, b) = self.coupling.support();
        if !(a < b || self.coupling.is_point()) {
            return Err(Error::Model("coupling support is empty".into()));
        }
        let origin = self.site.window_center;
        let site = self.site.shifted_scaled(origin, kappa);
        let coupling = self.coupling.transformed(kappa, a);
        Ok(CanonicalModel {
            periodic: self.periodic.shifted(origin),
            absorbed_coupling: kappa * a,
            site,
            coupling,
            origin,
            coupling_scale: kappa,
            coupling_shift: a,
        })
    }
}

/// Operator family in canonical gauge: `κ = 1`, window centered at `0`,
/// coupling support `[0, ω_+]`.
///
/// The periodic background is `V_per(y) + absorbed_coupling · Σ_k u(y - k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalModel {
    periodic: PeriodicPotential,
    absorbed_coupling: f64,
    site: SingleSitePotential,
    coupling: CouplingDensity,
    origin: f64,
    coupling_scale: f64,
    coupling_shift: f64,
}

impl CanonicalModel {
    pub fn small_support() -> Self {
        ModelSpec::small_support()
            .canonicalize()
            .expect("default model is valid")
    }

    pub fn periodic(&self) -> &PeriodicPotential {
        &self.periodic
    }

    pub fn site(&self) -> &SingleSitePotential {
        &self.site
    }

    pub fn coupling(&self) -> &CouplingDensity {
        &self.coupling
    }

    /// Constant coupling moved into the periodic background.
    pub fn absorbed_coupling(&self) -> f64 {
        self.absorbed_coupling
    }

    /// Physical position of the canonical origin.
    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// `ω_+`.
    pub fn max_coupling(&self) -> f64 {
        self.coupling.support().1
    }

    /// Canonical coordinate of a physical position.
    pub fn to_canonical_position(&self, x: f64) -> f64 {
        x - self.origin
    }

    /// Canonical coupling value of a raw coupling value.
    pub fn transport_coupling(&self, raw: f64) -> f64 {
        self.coupling_scale * (raw - self.coupling_shift)
    }

    /// Maps a realization drawn from the raw density into this gauge.
    pub fn transport(&self, raw: &Realization) -> Realization {
        Realization {
            first_site: raw.first_site,
            couplings: raw.couplings.iter().map(|w| self.transport_coupling(*w)).collect(),
            box_length: raw.box_length,
            stream: raw.stream,
        }
    }

    /// Same family with a different periodic background.
    pub fn with_periodic(&self, periodic: PeriodicPotential) -> Self {
        Self {
            periodic,
            ..self.clone()
        }
    }

    /// Same family with a different coupling density (given in canonical gauge).
    pub fn with_coupling(&self, coupling: CouplingDensity) -> Result<Self> {
        if coupling.support().0 != 0.0 {
            return Err(Error::Model("canonical coupling support must start at 0".into()));
        }
        Ok(Self {
            coupling,
            ..self.clone()
        })
    }

    /// Background (non-random) potential at canonical position `y`.
    pub fn background_at(&self, y: f64) -> f64 {
        let base = self.periodic.at(y);
        if self.absorbed_coupling == 0.0 {
            base
        } else {
            base + self.absorbed_coupling * self.site.lattice_sum(y)
        }
    }

    /// `Λ⁺` for the box `[-l/2, l/2]`.
    pub fn touching_sites(&self, box_length: u32) -> RangeInclusive<i64> {
        self.site.touching_sites(box_length)
    }

    /// `‖V_per‖_∞ + ω_+ ‖u‖_∞ (2R + 1)`, plus the absorbed background.
    pub fn potential_bound(&self) -> f64 {
        let overlap = 2.0 * self.site.half_width() + 1.0;
        self.periodic.sup_norm()
            + (self.absorbed_coupling.abs() + self.max_coupling()) * self.site.sup_norm() * overlap
    }
}

/// Integer sites `ℤ ∩ [-l/2, l/2]`.
pub fn lattice_sites(box_length: u32) -> RangeInclusive<i64> {
    let half = f64::from(box_length) / 2.0;
    (-half).ceil() as i64..=half.floor() as i64
}

/// Where a realization's couplings came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamId {
    pub master_seed: u64,
    pub index: u64,
}

/// One sample of the coupling constants `{ω_k}` on a contiguous site range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    first_site: i64,
    couplings: Vec<f64>,
    box_length: u32,
    stream: Option<StreamId>,
}

impl Realization {
    pub fn new(sites: RangeInclusive<i64>, couplings: Vec<f64>, box_length: u32) -> Result<Self> {
        let expected = (sites.end() - sites.start() + 1).max(0) as usize;
        if couplings.len() != expected {
            return Err(Error::Config(format!(
                "{} couplings supplied for {} sites",
                couplings.len(),
                expected
            )));
        }
        Ok(Self {
            first_site: *sites.start(),
            couplings,
            box_length,
            stream: None,
        })
    }

    /// Every coupling set to `value`.
    pub fn constant(sites: RangeInclusive<i64>, value: f64, box_length: u32) -> Self {
        let n = (sites.end() - sites.start() + 1).max(0) as usize;
        Self {
            first_site: *sites.start(),
            couplings: vec![value; n],
            box_length,
            stream: None,
        }
    }

    pub fn box_length(&self) -> u32 {
        self.box_length
    }

    pub fn sites(&self) -> RangeInclusive<i64> {
        self.first_site..=self.first_site + self.couplings.len() as i64 - 1
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn stream(&self) -> Option<StreamId> {
        self.stream
    }

    pub fn coupling(&self, site: i64) -> Option<f64> {
        let idx = site.checked_sub(self.first_site)?;
        usize::try_from(idx).ok().and_then(|i| self.couplings.get(i).copied())
    }

    /// Overwrites `ω_site`; returns `false` if the site is not covered.
    pub fn set_coupling(&mut self, site: i64, value: f64) -> bool {
        let Some(idx) = site
            .checked_sub(self.first_site)
            .and_then(|i| usize::try_from(i).ok())
        else {
            return false;
        };
        match self.couplings.get_mut(idx) {
            Some(slot) => {
                *slot = value;
                true
            }
            None => false,
        }
    }

    pub fn with_coupling(&self, site: i64, value: f64) -> Self {
        let mut out = self.clone();
        out.set_coupling(site, value);
        out
    }
}

/// Draws i.i.d. couplings for `sites` by inverse-CDF sampling of `density`,
/// exactly one uniform draw per site in ascending site order.
pub fn sample_couplings<R: Rng + ?Sized>(
    density: &CouplingDensity,
    rng: &mut R,
    sites: RangeInclusive<i64>,
    box_length: u32,
) -> Realization {
    let couplings = sites
        .clone()
        .map(|_| density.quantile(rng.gen::<f64>()))
        .collect();
    Realization {
        first_site: *sites.start(),
        couplings,
        box_length,
        stream: None,
    }
}

/// [`sample_couplings`] over `Λ⁺` of the box, tagged with its stream.
pub fn sample_realization<R: Rng + ?Sized>(
    model: &CanonicalModel,
    rng: &mut R,
    box_length: u32,
    stream: Option<StreamId>,
) -> Realization {
    let mut r = sample_couplings(model.coupling(), rng, model.touching_sites(box_length), box_length);
    r.stream = stream;
    r
}

/// `V(y_i) = V_bg(y_i) + Σ_k ω_k u(y_i - k)` at canonical positions `y_i`.
pub fn sample_total_potential(
    model: &CanonicalModel,
    realization: &Realization,
    positions: &[f64],
) -> Result<Vec<f64>> {
    let (lo, hi) = model.site.support();
    positions
        .iter()
        .map(|&y| {
            let mut v = model.background_at(y);
            let first = (y - hi).ceil() as i64;
            let last = (y - lo).floor() as i64;
            for k in first..=last {
                let w = realization.coupling(k).ok_or_else(|| {
                    Error::Config(format!("realization has no coupling for site {k} (needed at x = {y})"))
                })?;
                v += w * model.site.at(y - k as f64);
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(l: u32, m: u32) -> Vec<f64> {
        let h = 1.0 / f64::from(m);
        (0..=l * m).map(|i| -f64::from(l) / 2.0 + f64::from(i) * h).collect()
    }

    /// Raw-model potential evaluated straight from its definition.
    fn raw_total(spec: &ModelSpec, couplings: &dyn Fn(i64) -> f64, x: f64) -> f64 {
        let mut v = spec.periodic.at(x);
        for k in (x - 2.0).floor() as i64..=(x + 2.0).ceil() as i64 {
            v += couplings(k) * spec.site.at(x - k as f64);
        }
        v
    }

    #[test]
    fn point_mass_is_absorbed() {
        let spec = ModelSpec {
            coupling: CouplingDensity::point(0.5).unwrap(),
            ..ModelSpec::small_support()
        };
        let canon = spec.canonicalize().unwrap();
        assert_eq!(canon.coupling().support(), (0.0, 0.0));
        assert_eq!(canon.max_coupling(), 0.0);
        assert_eq!(canon.background_at(0.0), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = sample_couplings(canon.coupling(), &mut rng, -3..=3, 4);
        assert!(r.couplings().iter().all(|w| *w == 0.0));
        assert!(CouplingDensity::point(f64::NAN).is_err());
    }

    #[test]
    fn canonical_model_is_fixed_point() {
        let canon = CanonicalModel::small_support();
        let spec = ModelSpec::small_support();
        assert_eq!(canon.site(), &spec.site);
        assert_eq!(canon.coupling(), &spec.coupling);
        assert_eq!(canon.periodic(), &spec.periodic);
        assert_eq!(canon.origin(), 0.0);
        assert_eq!(canon.absorbed_coupling(), 0.0);
        assert_eq!(canon.transport_coupling(0.37), 0.37);
    }

    #[test]
    fn canonicalize_rescales_and_recenters() {
        let site = SingleSitePotential::new((-0.1, 0.3), vec![2.0, 2.0], 0.1, 0.2, 2.0).unwrap();
        let spec = ModelSpec {
            periodic: PeriodicPotential::harmonic(0.7, 32).unwrap(),
            site,
            coupling: CouplingDensity::uniform(0.0, 1.0).unwrap(),
        };
        let canon = spec.canonicalize().unwrap();
        let (lo, hi) = canon.site().support();
        assert!((lo + 0.2).abs() < 1e-15 && (hi - 0.2).abs() < 1e-15);
        assert_eq!(canon.site().lower_bound(), 1.0);
        assert!((canon.site().at(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(canon.coupling().support(), (0.0, 2.0));
        assert_eq!(canon.origin(), 0.1);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = sample_couplings(&spec.coupling, &mut rng, -12..=12, 16);
        let moved = canon.transport(&raw);
        for x in grid(16, 32) {
            let y = canon.to_canonical_position(x);
            let expect = raw_total(&spec, &|k| raw.coupling(k).unwrap(), x);
            let got = sample_total_potential(&canon, &moved, &[y]).unwrap()[0];
            assert!((got - expect).abs() <= 1e-12, "x={x}: {got} vs {expect}");
        }
    }

    #[test]
    fn canonicalize_absorbs_coupling_offset() {
        let spec = ModelSpec {
            periodic: PeriodicPotential::zero(),
            site: SingleSitePotential::indicator(0.15).unwrap(),
            coupling: CouplingDensity::uniform(-1.0, 1.0).unwrap(),
        };
        let canon = spec.canonicalize().unwrap();
        assert_eq!(canon.coupling().support(), (0.0, 2.0));
        assert_eq!(canon.absorbed_coupling(), -1.0);
        // Background is decremented by Σ_k u(x - k).
        assert_eq!(canon.background_at(0.05), -1.0);
        assert_eq!(canon.background_at(0.5), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let raw = sample_couplings(&spec.coupling, &mut rng, -10..=10, 16);
        assert!(raw.couplings().iter().any(|w| *w < 0.0));
        let moved = canon.transport(&raw);
        assert!(moved.couplings().iter().all(|w| (0.0..=2.0).contains(w)));
        for x in grid(16, 32) {
            let expect = raw_total(&spec, &|k| raw.coupling(k).unwrap(), x);
            let got = sample_total_potential(&canon, &moved, &[x]).unwrap()[0];
            assert!((got - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn canonicalize_transports_tabulated_density() {
        let spec = ModelSpec {
            periodic: PeriodicPotential::zero(),
            site: SingleSitePotential::new((-0.2, 0.2), vec![4.0, 4.0, 4.0], 0.0, 0.1, 4.0).unwrap(),
            coupling: CouplingDensity::table(vec![(1.0, 0.0), (2.0, 2.0)]).unwrap(),
        };
        let canon = spec.canonicalize().unwrap();
        assert_eq!(canon.coupling().support(), (0.0, 4.0));
        // Density of 4(ω - 1) at t is f(t/4 + 1)/4.
        assert!((canon.coupling().pdf(2.0) - 0.25).abs() < 1e-15);
        assert!((canon.coupling().sup_norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(SingleSitePotential::new((-0.1, 0.1), vec![1.0, 1.0], 0.0, 0.1, 0.0).is_err());
        assert!(SingleSitePotential::new((-0.1, 0.1), vec![1.0, 1.0], 0.0, 0.0, 1.0).is_err());
        assert!(SingleSitePotential::new((-0.1, 0.1), vec![1.0, -1.0], 0.0, 0.05, 1.0).is_err());
        // Lower bound violated inside the window.
        assert!(SingleSitePotential::new((-0.1, 0.1), vec![1.0, 0.5, 1.0], 0.0, 0.05, 1.0).is_err());
        // Window sticks out of the support.
        assert!(SingleSitePotential::new((-0.1, 0.1), vec![1.0, 1.0], 0.05, 0.1, 1.0).is_err());
        assert!(CouplingDensity::uniform(1.0, 1.0).is_err());
        assert!(CouplingDensity::table(vec![(0.0, 1.0), (1.0, 1.5)]).is_err());
        assert!(CouplingDensity::table(vec![(0.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(PeriodicPotential::from_samples(vec![]).is_err());
    }

    #[test]
    fn potential_samples_follow_definition() {
        let model = CanonicalModel::small_support();
        let xs = grid(8, 32);
        let zeros = Realization::constant(model.touching_sites(8), 0.0, 8);
        assert!(sample_total_potential(&model, &zeros, &xs)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));

        let ones = Realization::constant(model.touching_sites(8), 1.0, 8);
        let v = sample_total_potential(&model, &ones, &xs).unwrap();
        for (x, v) in xs.iter().zip(&v) {
            let dist = (x - x.round()).abs();
            let expect = if dist <= 0.15 { 1.0 } else { 0.0 };
            assert_eq!(*v, expect, "x = {x}");
        }
    }

    #[test]
    fn harmonic_background_is_periodic_on_grid() {
        let model = CanonicalModel::small_support().with_periodic(PeriodicPotential::harmonic(1.0, 32).unwrap());
        let zeros = Realization::constant(model.touching_sites(4), 0.0, 4);
        let xs = grid(4, 32);
        let v = sample_total_potential(&model, &zeros, &xs).unwrap();
        for i in 0..v.len() - 32 {
            assert!((v[i] - v[i + 32]).abs() < 1e-15);
        }
        assert!((v[0] - 1.0).abs() < 1e-15); // x = -2
        assert!((v[16] + 1.0).abs() < 1e-15); // x = -1.5
    }

    #[test]
    fn missing_coupling_is_a_config_error() {
        let model = CanonicalModel::small_support();
        let short = Realization::constant(0..=2, 1.0, 8);
        let err = sample_total_potential(&model, &short, &[-3.0]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn index_sets() {
        let site = SingleSitePotential::indicator(0.15).unwrap();
        assert_eq!(site.touching_sites(16), -8..=8);
        assert_eq!(site.touching_sites(15), -7..=7);
        assert_eq!(lattice_sites(16), -8..=8);
        assert_eq!(lattice_sites(15), -7..=7);
        // Boundary-touching supports count.
        let wide = SingleSitePotential::indicator(0.5).unwrap();
        assert_eq!(wide.touching_sites(15), -8..=8);
        assert_eq!(wide.touching_sites(16), -8..=8);
    }

    #[test]
    fn sampling_is_deterministic_and_in_support() {
        let f = CouplingDensity::uniform(0.0, 1.0).unwrap();
        let a = sample_couplings(&f, &mut ChaCha8Rng::seed_from_u64(5), -20..=20, 40);
        let b = sample_couplings(&f, &mut ChaCha8Rng::seed_from_u64(5), -20..=20, 40);
        assert_eq!(a, b);
        assert!(a.couplings().iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn uniform_draws_pass_kolmogorov_smirnov() {
        let f = CouplingDensity::uniform(0.0, 1.0).unwrap();
        let n = 100_000;
        let r = sample_couplings(&f, &mut ChaCha8Rng::seed_from_u64(2024), 0..=n - 1, 1);
        let mut xs = r.couplings().to_vec();
        xs.sort_by(f64::total_cmp);
        let nf = n as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / nf).abs().max(((i + 1) as f64 / nf - x).abs()))
            .fold(0.0, f64::max);
        // Asymptotic 99% critical value 1.628/√n.
        assert!(d < 1.628 / nf.sqrt(), "KS distance {d}");
    }

    #[test]
    fn table_quantile_inverts_cdf() {
        let f = CouplingDensity::table_normalized(vec![(0.0, 0.0), (0.5, 3.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        for i in 0..=200 {
            let p = i as f64 / 200.0;
            let t = f.quantile(p);
            // Trapezoid integration of the piecewise-linear pdf up to t.
            let steps = 20_000;
            let (lo, _) = f.support();
            let dt = (t - lo) / steps as f64;
            let cdf: f64 = (0..steps)
                .map(|j| 0.5 * (f.pdf(lo + j as f64 * dt) + f.pdf(lo + (j + 1) as f64 * dt)) * dt)
                .sum();
            assert!((cdf - p).abs() < 1e-6, "p={p} t={t} cdf={cdf}");
        }
    }
}
