//! Case-by-case numerical checks of the ingredients behind the Wegner bound:
//! Hellmann–Feynman derivatives, the lower bound on the summed eigenvalue
//! derivatives, quantitative unique continuation, and Dirichlet–Neumann
//! bracketing with rank-two interlacing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{realization, EnsembleConfig};
use crate::error::{Error, Result};
use crate::model::{lattice_sites, CanonicalModel, Realization};
use crate::operator::{assemble, split_at_with_fault, Boundary, GridSpec, StencilFault, TridiagonalOperator};
use crate::spectral::{
    count_below, dense_spectrum, eigenpair, eigenvalues_in, kth_eigenvalue, EigenPair, SpectralWindow,
    LOCATION_TOL,
};

/// Default floor for the unique-continuation window ratio.
pub const DEFAULT_RATIO_FLOOR: f64 = 1e-6;
/// Hellmann–Feynman acceptance threshold on `|finite difference - ⟨ψ, u_k ψ⟩|`.
pub const HF_TOLERANCE: f64 = 1e-5;
/// Bracketing tolerance relative to `2/h²`.
pub const BRACKETING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub label: String,
    pub digest: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub label: String,
    pub digest: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Checked(CaseRecord),
    Skipped(SkipRecord),
}

fn digest(label: &str) -> String {
    Sha256::digest(label.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn checked(label: String, measured: f64, bound: f64, passed: bool) -> Outcome {
    Outcome::Checked(CaseRecord {
        digest: digest(&label),
        label,
        measured,
        bound,
        passed,
    })
}

fn skipped(label: String, reason: impl Into<String>) -> Outcome {
    Outcome::Skipped(SkipRecord {
        digest: digest(&label),
        label,
        reason: reason.into(),
    })
}

/// All cases of one check, in deterministic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub cases: Vec<CaseRecord>,
    pub skipped: Vec<SkipRecord>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            cases: Vec::new(),
            skipped: Vec::new(),
            min: None,
            max: None,
        }
    }

    pub fn push(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Checked(c) => {
                if c.measured.is_finite() {
                    self.min = Some(self.min.map_or(c.measured, |m| m.min(c.measured)));
                    self.max = Some(self.max.map_or(c.measured, |m| m.max(c.measured)));
                }
                self.cases.push(c);
            }
            Outcome::Skipped(s) => self.skipped.push(s),
        }
    }

    pub fn extend(&mut self, outcomes: impl IntoIterator<Item = Outcome>) {
        outcomes.into_iter().for_each(|o| self.push(o));
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.extend(other.cases.into_iter().map(Outcome::Checked));
        self.skipped.extend(other.skipped);
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseRecord> {
        self.cases.iter().filter(|c| !c.passed)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {} cases, {} failed, {} skipped, measured range [{}, {}]",
            self.check,
            self.cases.len(),
            self.failures().count(),
            self.skipped.len(),
            self.min.map_or("-".into(), |v| format!("{v:.6e}")),
            self.max.map_or("-".into(), |v| format!("{v:.6e}")),
        )
    }
}

/// `h Σ_i w(x_i) ψ_i²`.
fn weighted_mass<W: Fn(f64) -> f64>(op: &TridiagonalOperator, psi: &[f64], weight: W) -> f64 {
    op.weight()
        * op
            .positions()
            .iter()
            .zip(psi)
            .map(|(x, p)| weight(*x) * p * p)
            .sum::<f64>()
}

/// Nodes with `x ∈ [a, b)` carry the window; the continuum window is
/// approximated by the grid nodes it contains.
fn window_mass(op: &TridiagonalOperator, psi: &[f64], a: f64, b: f64) -> (f64, usize) {
    let mut mass = 0.0;
    let mut nodes = 0;
    for (x, p) in op.positions().iter().zip(psi) {
        if *x >= a && *x < b {
            mass += p * p;
            nodes += 1;
        }
    }
    (op.weight() * mass, nodes)
}

/// Smallest distance from eigenvalue `n` to its neighbours.
fn spectral_gap(op: &TridiagonalOperator, n: usize, value: f64) -> Result<f64> {
    let mut gap = f64::INFINITY;
    if n > 0 {
        gap = gap.min(value - kth_eigenvalue(op, n - 1, 0.0)?);
    }
    if n + 1 < op.len() {
        gap = gap.min(kth_eigenvalue(op, n + 1, 0.0)? - value);
    }
    Ok(gap)
}

/// Compares `(E_n(ω + δe_k) - E_n(ω - δe_k)) / 2δ` with `⟨ψ_n, u(· - k) ψ_n⟩`.
pub fn hellmann_feynman_check(
    model: &CanonicalModel,
    realization: &Realization,
    grid: &GridSpec,
    n: usize,
    site: i64,
    delta: f64,
) -> Result<Outcome> {
    let label = format!(
        "hf l={} stream={:?} n={n} k={site} delta={delta:e}",
        grid.box_length(),
        realization.stream()
    );
    let omega = realization
        .coupling(site)
        .ok_or_else(|| Error::Config(format!("site {site} has no coupling")))?;
    let op = assemble(model, realization, grid)?;
    let value = kth_eigenvalue(&op, n, 0.0)?;
    let gap = spectral_gap(&op, n, value)?;
    let guard = 1e3 * delta * model.site().sup_norm();
    if gap <= guard {
        return Ok(skipped(label, format!("gap {gap:e} below guard {guard:e}")));
    }
    let pair = match eigenpair(&op, value) {
        Ok(p) => p,
        Err(e) => return Ok(skipped(label, format!("eigenpair failed: {e}"))),
    };
    let site_x = site as f64;
    let overlap = weighted_mass(&op, &pair.vector, |x| model.site().at(x - site_x));
    let plus = assemble(model, &realization.with_coupling(site, omega + delta), grid)?;
    let minus = assemble(model, &realization.with_coupling(site, omega - delta), grid)?;
    let derivative = (kth_eigenvalue(&plus, n, 0.0)? - kth_eigenvalue(&minus, n, 0.0)?) / (2.0 * delta);
    let diff = (derivative - overlap).abs();
    Ok(checked(label, diff, HF_TOLERANCE, diff <= HF_TOLERANCE))
}

/// Per-eigenvalue values entering the derivative lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EderCase {
    pub energy: f64,
    /// `Σ_{k ∈ Λ̃} ⟨ψ_n, u(· - k) ψ_n⟩`.
    pub derivative_sum: f64,
    /// `∫_S |ψ_n|²` with `S` the union of lower-bound windows.
    pub window_mass: f64,
    /// `min_k` of the window-to-cell mass ratio for this eigenfunction.
    pub ratio_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EderSummary {
    pub box_length: u32,
    pub cases: Vec<EderCase>,
    /// `min_n Σ_k ∂E_n/∂ω_k` over the window; `None` if no eigenvalue.
    pub min_derivative_sum: Option<f64>,
    pub report: VerificationReport,
}

/// Eigenpairs in `window` whose eigenvalue is isolated enough for inverse
/// iteration; the others are reported as skips.
fn isolated_pairs(op: &TridiagonalOperator, window: &SpectralWindow, tag: &str) -> Result<(Vec<EigenPair>, Vec<Outcome>)> {
    let values = eigenvalues_in(op, window, op.len())?;
    let first = crate::spectral::count_below(op, window.lo)?;
    let tol = LOCATION_TOL * op.norm_proxy();
    let mut pairs = Vec::new();
    let mut skips = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let n = first + i;
        let label = format!("{tag} n={n}");
        let value = kth_eigenvalue(op, n, 0.0)?;
        let gap = spectral_gap(op, n, value)?;
        if gap <= 10.0 * tol || gap < 1e-4 * op.norm_proxy() * f64::EPSILON.sqrt() {
            skips.push(skipped(label, format!("near-degenerate: gap {gap:e} at {v}")));
            continue;
        }
        match eigenpair(op, value) {
            Ok(p) => pairs.push(p),
            Err(e) => skips.push(skipped(label, format!("eigenpair failed: {e}"))),
        }
    }
    Ok((pairs, skips))
}

/// For every eigenvalue in `window`, checks
/// `Σ_k ⟨ψ, u_k ψ⟩ ≥ ∫_S ψ² ≥ min_k ρ_k` term by term.
pub fn eder_lower_bound(
    model: &CanonicalModel,
    realization: &Realization,
    grid: &GridSpec,
    window: &SpectralWindow,
) -> Result<EderSummary> {
    let op = assemble(model, realization, grid)?;
    let tag = format!("eder l={} stream={:?}", grid.box_length(), realization.stream());
    let (pairs, skips) = isolated_pairs(&op, window, &tag)?;
    let sites: Vec<i64> = lattice_sites(grid.box_length()).collect();
    let (wa, wb) = model.site().window();
    let mut report = VerificationReport::new("eder_lower_bound");
    report.extend(skips);
    let mut cases = Vec::new();
    let slack = 1e-12;
    for pair in &pairs {
        let psi = &pair.vector;
        let derivative_sum: f64 = sites
            .iter()
            .map(|&k| weighted_mass(&op, psi, |x| model.site().at(x - k as f64)))
            .sum();
        let mut window_total = 0.0;
        let mut ratio_floor = f64::INFINITY;
        for &k in &sites {
            let kf = k as f64;
            let (small, _) = window_mass(&op, psi, kf + wa, kf + wb);
            let (cell, _) = window_mass(&op, psi, kf - 0.5, kf + 0.5);
            window_total += small;
            if cell > 1e-300 {
                ratio_floor = ratio_floor.min(small / cell);
            }
        }
        let label = format!("{tag} E={}", pair.value);
        report.push(checked(
            format!("{label} derivative_sum>=window_mass"),
            derivative_sum - window_total,
            -slack,
            derivative_sum >= window_total - slack,
        ));
        report.push(checked(
            format!("{label} window_mass>=ratio_floor"),
            window_total - ratio_floor,
            -slack,
            window_total >= ratio_floor - slack,
        ));
        report.push(checked(
            format!("{label} derivative_sum>0"),
            derivative_sum,
            0.0,
            derivative_sum > 0.0,
        ));
        cases.push(EderCase {
            energy: pair.value,
            derivative_sum,
            window_mass: window_total,
            ratio_floor,
        });
    }
    let min_derivative_sum = cases.iter().map(|c| c.derivative_sum).reduce(f64::min);
    Ok(EderSummary {
        box_length: grid.box_length(),
        cases,
        min_derivative_sum,
        report,
    })
}

/// Window-to-cell mass ratio around one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRatio {
    pub site: i64,
    /// `∫_{Λ_s(k)} ψ² / ∫_{Λ_1(k)} ψ²`.
    pub ratio: f64,
    /// Width of the discrete window, `nodes · h`.
    pub window_width: f64,
    /// `log(s / ρ)`: the smallest `C₆` with `ρ ≥ s e^{-C₆}`.
    pub implied_constant: f64,
    /// The unit cell carries no mass; the ratio is meaningless.
    pub vacuous: bool,
}

/// `ρ_k` for the window `[k + a, k + a + s)` inside `[k - 1/2, k + 1/2)`.
pub fn window_ratio(op: &TridiagonalOperator, pair: &EigenPair, site: i64, offset: f64, width: f64) -> WindowRatio {
    let k = site as f64;
    let (small, nodes) = window_mass(op, &pair.vector, k + offset, k + offset + width);
    let (cell, _) = window_mass(op, &pair.vector, k - 0.5, k + 0.5);
    let window_width = nodes as f64 * op.weight();
    if cell < 1e-300 {
        return WindowRatio {
            site,
            ratio: f64::NAN,
            window_width,
            implied_constant: f64::NAN,
            vacuous: true,
        };
    }
    let ratio = small / cell;
    WindowRatio {
        site,
        ratio,
        window_width,
        implied_constant: (window_width / ratio).ln(),
        vacuous: false,
    }
}

/// Checks `ρ_k ≥ floor` for one eigenfunction and site.
pub fn unique_continuation_check(
    op: &TridiagonalOperator,
    pair: &EigenPair,
    site: i64,
    window_width: f64,
    floor: f64,
) -> (WindowRatio, Outcome) {
    let r = window_ratio(op, pair, site, -0.5 * window_width, window_width);
    let label = format!("uc E={} k={site} s={window_width}", pair.value);
    let outcome = if r.vacuous {
        checked(format!("{label} vacuous"), 0.0, floor, true)
    } else {
        checked(label, r.ratio, floor, r.ratio >= floor && r.ratio > 0.0)
    };
    (r, outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueContinuationSummary {
    pub box_length: u32,
    pub min_ratio: Option<f64>,
    pub max_implied_constant: Option<f64>,
    pub vacuous: usize,
    pub total: usize,
    pub report: VerificationReport,
}

/// Sites whose unit cell lies inside the box.
fn interior_sites(box_length: u32) -> impl Iterator<Item = i64> {
    let half = f64::from(box_length) / 2.0;
    lattice_sites(box_length).filter(move |k| (*k as f64) - 0.5 >= -half && (*k as f64) + 0.5 <= half)
}

/// `ρ_k` for every interior site and every eigenfunction with energy in
/// `window`.
pub fn unique_continuation_sweep(
    model: &CanonicalModel,
    realization: &Realization,
    grid: &GridSpec,
    window: &SpectralWindow,
    floor: f64,
) -> Result<UniqueContinuationSummary> {
    let op = assemble(model, realization, grid)?;
    let tag = format!("uc l={} stream={:?}", grid.box_length(), realization.stream());
    let (pairs, skips) = isolated_pairs(&op, window, &tag)?;
    let s = model.site().window_width();
    let mut report = VerificationReport::new("unique_continuation");
    report.extend(skips);
    let mut min_ratio: Option<f64> = None;
    let mut max_c: Option<f64> = None;
    let mut vacuous = 0;
    let mut total = 0;
    for pair in &pairs {
        for k in interior_sites(grid.box_length()) {
            let (r, outcome) = unique_continuation_check(&op, pair, k, s, floor);
            total += 1;
            if r.vacuous {
                vacuous += 1;
            } else {
                min_ratio = Some(min_ratio.map_or(r.ratio, |m| m.min(r.ratio)));
                max_c = Some(max_c.map_or(r.implied_constant, |m| m.max(r.implied_constant)));
            }
            report.push(outcome);
        }
    }
    Ok(UniqueContinuationSummary {
        box_length: grid.box_length(),
        min_ratio,
        max_implied_constant: max_c,
        vacuous,
        total,
        report,
    })
}

/// Dirichlet–Neumann bracketing and rank-two interlacing around site `j`.
///
/// Checks at each energy `count_N(E) ≥ count(E) ≥ count_D(E)` and
/// `|count_cut(E) - count(E)| ≤ 2`; the dimension bookkeeping of the
/// Dirichlet cut; index-wise `λ_k(Neumann box) ≤ λ_k(Dirichlet box)`; and
/// index-wise monotonicity in `ω_j` between `0` and `ω_+`.
pub fn bracketing_check(
    model: &CanonicalModel,
    realization: &Realization,
    grid: &GridSpec,
    site: i64,
    energies: &[f64],
    fault: Option<StencilFault>,
) -> Result<VerificationReport> {
    let grid = grid.with_boundary(Boundary::Dirichlet);
    let op = assemble(model, realization, &grid)?;
    let r = model.site().half_width();
    let neumann = split_at_with_fault(&op, site, r, Boundary::Neumann, fault)?;
    let dirichlet = split_at_with_fault(&op, site, r, Boundary::Dirichlet, fault)?;
    let tol = BRACKETING_TOL * op.norm_proxy();
    let tag = format!("bracket l={} stream={:?} j={site}", grid.box_length(), realization.stream());
    let mut report = VerificationReport::new("bracketing");

    for &e in energies {
        let base = count_below(&op, e)?;
        let base_up = count_below(&op, e + tol)?;
        let n_cut = count_below(&neumann, e)?;
        let n_up = count_below(&neumann, e + tol)?;
        let d_cut = count_below(&dirichlet, e)?;
        let d_up = count_below(&dirichlet, e + tol)?;
        let label = format!("{tag} E={e}");
        report.push(checked(
            format!("{label} neumann>=uncut"),
            n_up as f64 - base as f64,
            0.0,
            n_up >= base,
        ));
        report.push(checked(
            format!("{label} uncut>=dirichlet"),
            base_up as f64 - d_cut as f64,
            0.0,
            base_up >= d_cut,
        ));
        report.push(checked(
            format!("{label} |neumann-uncut|<=2"),
            n_cut as f64 - base_up as f64,
            2.0,
            n_cut <= base_up + 2,
        ));
        report.push(checked(
            format!("{label} |dirichlet-uncut|<=2"),
            base as f64 - d_up as f64,
            2.0,
            base <= d_up + 2,
        ));
    }

    let removed = op.len() - dirichlet.len();
    let (lo, hi) = op.gershgorin_bounds();
    let everything = SpectralWindow::closed(lo - 1.0, hi + 1.0)?;
    let d_total = crate::spectral::trace_projection(&dirichlet, &everything)?;
    let n_total = crate::spectral::trace_projection(&neumann, &everything)?;
    report.push(checked(
        format!("{tag} dirichlet dimension"),
        d_total as f64,
        (op.len() - removed) as f64,
        d_total == op.len() - removed && (1..=2).contains(&removed),
    ));
    report.push(checked(
        format!("{tag} neumann dimension"),
        n_total as f64,
        op.len() as f64,
        n_total == op.len(),
    ));

    // Whole-box Neumann versus Dirichlet, index by index.
    let box_d = dense_spectrum(&op)?;
    let box_n = dense_spectrum(&assemble(model, realization, &grid.with_boundary(Boundary::Neumann))?)?;
    let worst = box_n
        .iter()
        .zip(&box_d)
        .map(|(n, d)| n - d)
        .fold(f64::NEG_INFINITY, f64::max);
    report.push(checked(format!("{tag} neumann box <= dirichlet box"), worst, tol, worst <= tol));

    // Monotonicity in ω_j.
    let high = realization.with_coupling(site, model.max_coupling());
    let low = realization.with_coupling(site, 0.0);
    let spec_high = dense_spectrum(&assemble(model, &high, &grid)?)?;
    let spec_low = dense_spectrum(&assemble(model, &low, &grid)?)?;
    let worst = spec_low
        .iter()
        .zip(&spec_high)
        .map(|(lo, hi)| lo - hi)
        .fold(f64::NEG_INFINITY, f64::max);
    report.push(checked(format!("{tag} monotone in coupling"), worst, tol, worst <= tol));
    Ok(report)
}

/// Settings for the full verification matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub model: CanonicalModel,
    pub points_per_cell: u32,
    pub master_seed: u64,
    /// Box lengths for the derivative-bound and unique-continuation sweeps.
    pub box_lengths: Vec<u32>,
    /// Realizations per box length in those sweeps.
    pub sweep_realizations: u64,
    /// Energy window `I` for the sweeps.
    pub window: (f64, f64),
    pub ratio_floor: f64,
    /// Hellmann–Feynman cases (realization, eigenvalue index, site) drawn.
    pub hf_cases: usize,
    pub hf_box_length: u32,
    /// Coupling step as a fraction of `ω_+` (absolute when `ω_+ = 0`).
    pub hf_relative_step: f64,
    /// Highest eigenvalue index drawn for Hellmann–Feynman cases.
    pub hf_max_index: usize,
    pub bracket_box_length: u32,
    pub bracket_realizations: u64,
    pub bracket_energies: usize,
    pub fault: Option<StencilFault>,
}

impl SuiteConfig {
    pub fn new(model: CanonicalModel, master_seed: u64) -> Self {
        Self {
            model,
            points_per_cell: 32,
            master_seed,
            box_lengths: vec![16, 32, 64],
            sweep_realizations: 4,
            window: (0.0, 10.0),
            ratio_floor: DEFAULT_RATIO_FLOOR,
            hf_cases: 240,
            hf_box_length: 16,
            hf_relative_step: 1e-4,
            hf_max_index: 40,
            bracket_box_length: 16,
            bracket_realizations: 100,
            bracket_energies: 200,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub hellmann_feynman: VerificationReport,
    pub eder: Vec<EderSummary>,
    pub unique_continuation: Vec<UniqueContinuationSummary>,
    pub bracketing: VerificationReport,
}

impl SuiteReport {
    pub fn reports(&self) -> Vec<VerificationReport> {
        let mut eder = VerificationReport::new("eder_lower_bound");
        for s in &self.eder {
            eder.merge(s.report.clone());
        }
        let mut uc = VerificationReport::new("unique_continuation");
        for s in &self.unique_continuation {
            uc.merge(s.report.clone());
        }
        vec![self.hellmann_feynman.clone(), eder, uc, self.bracketing.clone()]
    }

    pub fn passed(&self) -> bool {
        self.reports().iter().all(VerificationReport::passed)
    }

    /// `max/min` over box lengths of the per-length minimum derivative sum.
    pub fn eder_spread(&self) -> Option<f64> {
        spread(self.eder.iter().map(|s| s.min_derivative_sum))
    }

    /// `max/min` over box lengths of the per-length minimum window ratio.
    pub fn ratio_spread(&self) -> Option<f64> {
        spread(self.unique_continuation.iter().map(|s| s.min_ratio))
    }
}

fn spread(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    let v = v?;
    let lo = v.iter().copied().reduce(f64::min)?;
    let hi = v.iter().copied().reduce(f64::max)?;
    Some(hi / lo)
}

/// Merges per-realization summaries of one box length.
fn merge_eder(l: u32, parts: Vec<EderSummary>) -> EderSummary {
    let mut report = VerificationReport::new("eder_lower_bound");
    let mut cases = Vec::new();
    for p in parts {
        report.merge(p.report);
        cases.extend(p.cases);
    }
    let min_derivative_sum = cases.iter().map(|c| c.derivative_sum).reduce(f64::min);
    EderSummary {
        box_length: l,
        cases,
        min_derivative_sum,
        report,
    }
}

fn merge_uc(l: u32, parts: Vec<UniqueContinuationSummary>) -> UniqueContinuationSummary {
    let mut report = VerificationReport::new("unique_continuation");
    let mut out = UniqueContinuationSummary {
        box_length: l,
        min_ratio: None,
        max_implied_constant: None,
        vacuous: 0,
        total: 0,
        report: VerificationReport::new("unique_continuation"),
    };
    for p in parts {
        out.min_ratio = match (out.min_ratio, p.min_ratio) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        out.max_implied_constant = match (out.max_implied_constant, p.max_implied_constant) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        out.vacuous += p.vacuous;
        out.total += p.total;
        report.merge(p.report);
    }
    out.report = report;
    out
}

/// Runs all four checks. Cases are evaluated in parallel and merged in a
/// fixed order.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    let model = &config.model;
    let m = config.points_per_cell;
    let window = SpectralWindow::closed(config.window.0, config.window.1)?;

    // Hellmann–Feynman: random (realization, n, k) triples.
    let hf_grid = GridSpec::new(config.hf_box_length, m, Boundary::Dirichlet)?;
    let hf_ensemble = EnsembleConfig::new(config.master_seed, config.hf_cases as u64, model.clone(), hf_grid)?;
    // A disorder-free model has ω_+ = 0; fall back to an absolute step.
    let scale = if model.max_coupling() > 0.0 { model.max_coupling() } else { 1.0 };
    let delta = config.hf_relative_step * scale;
    let sites: Vec<i64> = lattice_sites(config.hf_box_length).collect();
    let max_index = config.hf_max_index.min(hf_grid.len() - 1);
    let hf: Vec<Outcome> = (0..config.hf_cases as u64)
        .into_par_iter()
        .map(|c| {
            let mut pick = ChaCha8Rng::seed_from_u64(config.master_seed ^ 0x4846_0000_0000_0000 ^ c);
            let n = pick.gen_range(0..=max_index);
            let k = sites[pick.gen_range(0..sites.len())];
            hellmann_feynman_check(model, &realization(&hf_ensemble, c), &hf_grid, n, k, delta)
        })
        .collect::<Result<_>>()?;
    let mut hellmann_feynman = VerificationReport::new("hellmann_feynman");
    hellmann_feynman.extend(hf);

    let mut eder = Vec::new();
    let mut unique_continuation = Vec::new();
    for &l in &config.box_lengths {
        let grid = GridSpec::new(l, m, Boundary::Dirichlet)?;
        let ens = EnsembleConfig::new(config.master_seed, config.sweep_realizations, model.clone(), grid)?;
        let per: Vec<(EderSummary, UniqueContinuationSummary)> = (0..config.sweep_realizations)
            .into_par_iter()
            .map(|r| {
                let real = realization(&ens, r);
                Ok((
                    eder_lower_bound(model, &real, &grid, &window)?,
                    unique_continuation_sweep(model, &real, &grid, &window, config.ratio_floor)?,
                ))
            })
            .collect::<Result<_>>()?;
        let (e, u): (Vec<_>, Vec<_>) = per.into_iter().unzip();
        eder.push(merge_eder(l, e));
        unique_continuation.push(merge_uc(l, u));
    }

    let b_grid = GridSpec::new(config.bracket_box_length, m, Boundary::Dirichlet)?;
    let b_ens = EnsembleConfig::new(config.master_seed, config.bracket_realizations, model.clone(), b_grid)?;
    let bracket: Vec<VerificationReport> = (0..config.bracket_realizations)
        .into_par_iter()
        .map(|r| {
            let real = realization(&b_ens, r);
            let mut pick = ChaCha8Rng::seed_from_u64(config.master_seed ^ 0x4252_0000_0000_0000 ^ r);
            let op_top = 4.0 / (b_grid.spacing() * b_grid.spacing()) + model.potential_bound();
            let energies: Vec<f64> = (0..config.bracket_energies)
                .map(|i| {
                    if i % 2 == 0 {
                        pick.gen_range(-1.0..50.0)
                    } else {
                        pick.gen_range(-1.0..op_top)
                    }
                })
                .collect();
            let inner = lattice_sites(config.bracket_box_length)
                .filter(|k| (*k as f64).abs() + model.site().half_width() + 2.0 * b_grid.spacing() < f64::from(config.bracket_box_length) / 2.0)
                .collect::<Vec<_>>();
            let j = inner[pick.gen_range(0..inner.len())];
            bracketing_check(model, &real, &b_grid, j, &energies, config.fault)
        })
        .collect::<Result<_>>()?;
    let mut bracketing = VerificationReport::new("bracketing");
    for b in bracket {
        bracketing.merge(b);
    }

    Ok(SuiteReport {
        hellmann_feynman,
        eder,
        unique_continuation,
        bracketing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CouplingDensity, PeriodicPotential, SingleSitePotential};
    use crate::ensemble::realization_stream;
    use crate::model::sample_realization;

    fn default_case(l: u32, seed: u64) -> (CanonicalModel, Realization, GridSpec) {
        let model = CanonicalModel::small_support();
        let grid = GridSpec::new(l, 32, Boundary::Dirichlet).unwrap();
        let r = sample_realization(&model, &mut realization_stream(seed, 0), l, None);
        (model, r, grid)
    }

    fn expect_checked(o: Outcome) -> CaseRecord {
        match o {
            Outcome::Checked(c) => c,
            Outcome::Skipped(s) => panic!("unexpected skip: {}", s.reason),
        }
    }

    #[test]
    fn hellmann_feynman_ground_state() {
        let (model, r, grid) = default_case(16, 1);
        let c = expect_checked(hellmann_feynman_check(&model, &r, &grid, 0, 0, 1e-4).unwrap());
        assert!(c.passed, "discrepancy {}", c.measured);
        assert!(c.measured <= 1e-5);
    }

    #[test]
    fn hellmann_feynman_in_a_barrier() {
        // Wide sites, huge couplings on the right half: the ground state lives
        // on the left and barely sees site 6.
        let site = SingleSitePotential::indicator(0.5).unwrap();
        let model = crate::model::ModelSpec {
            periodic: PeriodicPotential::zero(),
            site,
            coupling: CouplingDensity::uniform(0.0, 2000.0).unwrap(),
        }
        .canonicalize()
        .unwrap();
        let l = 16;
        let grid = GridSpec::new(l, 32, Boundary::Dirichlet).unwrap();
        let mut r = Realization::constant(model.touching_sites(l), 0.0, l);
        for k in 1..=8 {
            r.set_coupling(k, 2000.0);
        }
        let c = expect_checked(hellmann_feynman_check(&model, &r, &grid, 0, 6, 1e-4).unwrap());
        assert!(c.measured <= 1e-8, "discrepancy {}", c.measured);
        let op = assemble(&model, &r, &grid).unwrap();
        let pair = eigenpair(&op, kth_eigenvalue(&op, 0, 0.0).unwrap()).unwrap();
        assert!(weighted_mass(&op, &pair.vector, |x| model.site().at(x - 6.0)) < 1e-12);
    }

    #[test]
    fn hellmann_feynman_is_linear_in_the_profile() {
        let (model, r, grid) = default_case(16, 2);
        let op = assemble(&model, &r, &grid).unwrap();
        let pair = eigenpair(&op, kth_eigenvalue(&op, 3, 0.0).unwrap()).unwrap();
        let one = weighted_mass(&op, &pair.vector, |x| model.site().at(x - 2.0));
        let two = weighted_mass(&op, &pair.vector, |x| 2.0 * model.site().at(x - 2.0));
        assert!((two - 2.0 * one).abs() <= 1e-8 * two.abs());
    }

    #[test]
    fn near_degenerate_cases_are_skipped() {
        let (model, r, grid) = default_case(16, 3);
        // A huge step makes the guard reject every eigenvalue.
        let o = hellmann_feynman_check(&model, &r, &grid, 5, 0, 10.0).unwrap();
        assert!(matches!(o, Outcome::Skipped(_)));
    }

    #[test]
    fn full_coverage_sites_give_unit_derivative_sum() {
        let model = CanonicalModel::small_support();
        let wide = crate::model::ModelSpec {
            periodic: PeriodicPotential::zero(),
            site: SingleSitePotential::indicator(0.5).unwrap(),
            coupling: CouplingDensity::uniform(0.0, 1.0).unwrap(),
        }
        .canonicalize()
        .unwrap();
        let _ = model;
        let l = 8;
        let grid = GridSpec::new(l, 16, Boundary::Dirichlet).unwrap();
        let r = sample_realization(&wide, &mut realization_stream(4, 0), l, None);
        let s = eder_lower_bound(&wide, &r, &grid, &SpectralWindow::closed(0.0, 10.0).unwrap()).unwrap();
        assert!(s.report.passed());
        for c in &s.cases {
            // Adjacent closed supports overlap at half-integers, which are
            // not grid nodes for m = 16 only when shifted; count them once.
            assert!(c.derivative_sum >= 1.0 - 1e-9, "sum {}", c.derivative_sum);
            assert!((c.window_mass - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn eder_chain_on_default_model() {
        let (model, r, grid) = default_case(32, 5);
        let s = eder_lower_bound(&model, &r, &grid, &SpectralWindow::closed(0.0, 10.0).unwrap()).unwrap();
        assert!(s.report.passed(), "{}", s.report.summary());
        assert!(s.min_derivative_sum.unwrap() > 0.0);
    }

    #[test]
    fn constant_function_has_ratio_s() {
        let grid = GridSpec::new(4, 32, Boundary::Dirichlet).unwrap();
        let model = CanonicalModel::small_support();
        let r = Realization::constant(model.touching_sites(4), 0.0, 4);
        let op = assemble(&model, &r, &grid).unwrap();
        let pair = EigenPair {
            value: 0.0,
            vector: vec![1.0; op.len()],
            residual: 0.0,
        };
        let r = window_ratio(&op, &pair, 0, -0.125, 0.25);
        assert!((r.ratio - 0.25).abs() < 1e-15);
        assert!(r.implied_constant.abs() < 1e-12);
        let (r, o) = unique_continuation_check(&op, &pair, 1, 0.3, DEFAULT_RATIO_FLOOR);
        assert!((r.ratio - r.window_width).abs() < 1e-15);
        assert!(matches!(o, Outcome::Checked(c) if c.passed));
    }

    #[test]
    fn vacuous_windows_are_flagged() {
        let grid = GridSpec::new(4, 32, Boundary::Dirichlet).unwrap();
        let model = CanonicalModel::small_support();
        let r = Realization::constant(model.touching_sites(4), 0.0, 4);
        let op = assemble(&model, &r, &grid).unwrap();
        let mut v = vec![0.0; op.len()];
        v[0] = 1.0;
        let pair = EigenPair {
            value: 0.0,
            vector: v,
            residual: 0.0,
        };
        let (r, o) = unique_continuation_check(&op, &pair, 1, 0.3, DEFAULT_RATIO_FLOOR);
        assert!(r.vacuous);
        assert!(matches!(o, Outcome::Checked(c) if c.passed));
    }

    #[test]
    fn free_ground_state_ratio_is_positive() {
        let grid = GridSpec::new(16, 32, Boundary::Dirichlet).unwrap();
        let model = CanonicalModel::small_support();
        let r = Realization::constant(model.touching_sites(16), 0.0, 16);
        let op = assemble(&model, &r, &grid).unwrap();
        let pair = eigenpair(&op, kth_eigenvalue(&op, 0, 0.0).unwrap()).unwrap();
        for k in interior_sites(16) {
            let (ratio, _) = unique_continuation_check(&op, &pair, k, 0.3, DEFAULT_RATIO_FLOOR);
            assert!(ratio.ratio > 0.0);
            // Nearly flat on one cell: close to the window fraction.
            assert!((ratio.ratio - ratio.window_width).abs() < 0.05);
        }
    }

    #[test]
    fn bracketing_holds_for_free_and_disordered() {
        let (model, r, grid) = default_case(16, 6);
        let mut pick = ChaCha8Rng::seed_from_u64(1);
        let energies: Vec<f64> = (0..200).map(|_| pick.gen_range(-1.0..4200.0)).collect();
        let rep = bracketing_check(&model, &r, &grid, 2, &energies, None).unwrap();
        assert!(rep.passed(), "{}", rep.summary());
        let free = Realization::constant(model.touching_sites(16), 0.0, 16);
        let rep = bracketing_check(&model, &free, &grid, -3, &energies, None).unwrap();
        assert!(rep.passed(), "{}", rep.summary());
    }

    #[test]
    fn broken_stencil_is_caught() {
        let (model, r, grid) = default_case(16, 6);
        let energies: Vec<f64> = (0..200).map(|i| i as f64 * 0.25).collect();
        let rep = bracketing_check(
            &model,
            &r,
            &grid,
            0,
            &energies,
            Some(StencilFault::FlippedNeumannCompensation),
        )
        .unwrap();
        assert!(!rep.passed());
    }

    #[test]
    fn dirichlet_cut_removes_two_nodes() {
        let (model, r, grid) = default_case(8, 7);
        let op = assemble(&model, &r, &grid).unwrap();
        let cut = crate::operator::split_at(&op, 1, 0.15, Boundary::Dirichlet).unwrap();
        assert_eq!(op.len() - cut.len(), 2);
    }

    #[test]
    fn split_spectrum_is_union_of_blocks() {
        let grid = GridSpec::new(1, 8, Boundary::Dirichlet).unwrap();
        let model = CanonicalModel::small_support();
        let r = Realization::constant(model.touching_sites(1), 0.0, 1);
        let op = assemble(&model, &r, &grid).unwrap();
        let cut = crate::operator::split_at(&op, 0, 0.0, Boundary::Dirichlet).unwrap();
        let block = TridiagonalOperator::from_parts(vec![128.0; 3], vec![-64.0; 2]).unwrap();
        let mut expect = dense_spectrum(&block).unwrap();
        expect.extend(dense_spectrum(&block).unwrap());
        expect.sort_by(f64::total_cmp);
        let got = dense_spectrum(&cut).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
