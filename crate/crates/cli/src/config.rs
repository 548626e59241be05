//! Experiment configuration. TOML is the primary format; a `.json` file is
//! read as JSON with the same schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wegnerlab_core::verify::SuiteConfig;
use wegnerlab_core::{
    Boundary, CanonicalModel, CouplingDensity, GridSpec, ModelSpec, PeriodicPotential, SingleSitePotential,
};

use crate::error::CliError;

/// Samples per cell used for `harmonic(A)`.
const HARMONIC_SAMPLES: usize = 64;
const MAX_ENERGIES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Realizations for `ids` and `wegner`.
    pub realizations: u64,
    pub points_per_cell: u32,
    pub boundary: Boundary,
    pub model: ModelConfig,
    pub ids: IdsConfig,
    pub wegner: WegnerConfig,
    pub verify: VerifyConfig,
    pub localize: LocalizeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            realizations: 1000,
            points_per_cell: 32,
            boundary: Boundary::Dirichlet,
            model: ModelConfig::default(),
            ids: IdsConfig::default(),
            wegner: WegnerConfig::default(),
            verify: VerifyConfig::default(),
            localize: LocalizeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub periodic: PeriodicConfig,
    pub site: SiteConfig,
    pub coupling: CouplingConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            periodic: PeriodicConfig::Named("zero".into()),
            site: SiteConfig::Named("indicator(0.15)".into()),
            coupling: CouplingConfig::Named("uniform(0, 1)".into()),
        }
    }
}

/// `"zero"`, `"harmonic(A)"`, or one cell of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PeriodicConfig {
    Named(String),
    Samples { samples: Vec<f64> },
}

/// `"indicator(R)"` or a sampled profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SiteConfig {
    Named(String),
    Profile(SiteProfile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteProfile {
    pub support: [f64; 2],
    pub samples: Vec<f64>,
    pub window_center: f64,
    pub window_half_width: f64,
    pub lower_bound: f64,
}

/// `"uniform(a, b)"`, `"point(a)"`, or a piecewise-linear density table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingConfig {
    Named(String),
    Table(DensityTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityTable {
    pub table: Vec<[f64; 2]>,
    #[serde(default)]
    pub normalize: bool,
}

/// Explicit list, or `{ from, to, step }` inclusive of both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergyGrid {
    List(Vec<f64>),
    Range(EnergyRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyRange {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl EnergyGrid {
    pub fn range(from: f64, to: f64, step: f64) -> Self {
        EnergyGrid::Range(EnergyRange { from, to, step })
    }

    pub fn expand(&self, field: &str) -> Result<Vec<f64>, CliError> {
        match self {
            EnergyGrid::List(v) => {
                if v.is_empty() {
                    return Err(CliError::config(field, "energy list is empty"));
                }
                Ok(v.clone())
            }
            EnergyGrid::Range(EnergyRange { from, to, step }) => {
                if !(from.is_finite() && to.is_finite() && step.is_finite() && *step > 0.0 && to >= from) {
                    return Err(CliError::config(
                        field,
                        format!("need finite from ≤ to and step > 0, got from={from} to={to} step={step}"),
                    ));
                }
                let n = ((to - from) / step + 1e-9).floor() as usize;
                if n >= MAX_ENERGIES {
                    return Err(CliError::config(field, format!("{} energies requested", n + 1)));
                }
                Ok((0..=n).map(|i| from + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdsConfig {
    pub energies: EnergyGrid,
    pub box_lengths: Vec<u32>,
}

impl Default for IdsConfig {
    fn default() -> Self {
        Self {
            energies: EnergyGrid::range(0.0, 20.0, 0.05),
            box_lengths: vec![256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WegnerConfig {
    pub energy: f64,
    pub epsilons: Vec<f64>,
    pub box_lengths: Vec<u32>,
}

impl Default for WegnerConfig {
    fn default() -> Self {
        Self {
            energy: 4.0,
            epsilons: vec![0.002, 0.005, 0.01, 0.02, 0.05, 0.1],
            box_lengths: vec![16, 32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub box_lengths: Vec<u32>,
    pub sweep_realizations: u64,
    pub window: [f64; 2],
    pub ratio_floor: f64,
    pub hf_cases: usize,
    pub hf_box_length: u32,
    pub hf_relative_step: f64,
    pub hf_max_index: usize,
    pub bracket_box_length: u32,
    pub bracket_realizations: u64,
    pub bracket_energies: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let s = SuiteConfig::new(CanonicalModel::small_support(), 0);
        Self {
            box_lengths: s.box_lengths,
            sweep_realizations: s.sweep_realizations,
            window: [s.window.0, s.window.1],
            ratio_floor: s.ratio_floor,
            hf_cases: s.hf_cases,
            hf_box_length: s.hf_box_length,
            hf_relative_step: s.hf_relative_step,
            hf_max_index: s.hf_max_index,
            bracket_box_length: s.bracket_box_length,
            bracket_realizations: s.bracket_realizations,
            bracket_energies: s.bracket_energies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizeConfig {
    pub energies: EnergyGrid,
    /// Cells in the transfer-matrix chain.
    pub chain_length: u64,
    /// Box for the eigenfunction decay fits.
    pub box_length: u32,
    /// Eigenvalue indices to fit, from the bottom of the spectrum.
    pub states: Vec<usize>,
    pub realizations: u64,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            energies: EnergyGrid::range(0.05, 2.0, 0.05),
            chain_length: 100_000,
            box_length: 256,
            states: vec![0, 1, 2],
            realizations: 4,
        }
    }
}

/// Splits `name(a, b, ...)` into the name and its numeric arguments.
fn parse_call(field: &str, text: &str) -> Result<(String, Vec<f64>), CliError> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        return Ok((text.to_ascii_lowercase(), Vec::new()));
    };
    if !text.ends_with(')') {
        return Err(CliError::config(field, format!("unbalanced parentheses in {text:?}")));
    }
    let name = text[..open].trim().to_ascii_lowercase();
    let inner = &text[open + 1..text.len() - 1];
    let args = inner
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(|a| {
            a.parse::<f64>()
                .map_err(|_| CliError::config(field, format!("{a:?} is not a number in {text:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((name, args))
}

fn arity(field: &str, name: &str, args: &[f64], n: usize) -> Result<(), CliError> {
    if args.len() == n {
        Ok(())
    } else {
        Err(CliError::config(field, format!("{name} takes {n} argument(s), got {}", args.len())))
    }
}

impl ModelConfig {
    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        let wrap = |field: &'static str| move |e: wegnerlab_core::Error| CliError::config(field, e.to_string());

        let periodic = match &self.periodic {
            PeriodicConfig::Named(s) => match parse_call("model.periodic", s)? {
                (n, a) if n == "zero" => {
                    arity("model.periodic", "zero", &a, 0)?;
                    PeriodicPotential::zero()
                }
                (n, a) if n == "harmonic" => {
                    arity("model.periodic", "harmonic", &a, 1)?;
                    PeriodicPotential::harmonic(a[0], HARMONIC_SAMPLES).map_err(wrap("model.periodic"))?
                }
                (n, _) => {
                    return Err(CliError::config(
                        "model.periodic",
                        format!("unknown potential {n:?}; expected zero or harmonic(A)"),
                    ))
                }
            },
            PeriodicConfig::Samples { samples } => {
                PeriodicPotential::from_samples(samples.clone()).map_err(wrap("model.periodic"))?
            }
        };

        let site = match &self.site {
            SiteConfig::Named(s) => match parse_call("model.site", s)? {
                (n, a) if n == "indicator" => {
                    arity("model.site", "indicator", &a, 1)?;
                    SingleSitePotential::indicator(a[0]).map_err(wrap("model.site"))?
                }
                (n, _) => {
                    return Err(CliError::config(
                        "model.site",
                        format!("unknown profile {n:?}; expected indicator(R) or a sampled profile"),
                    ))
                }
            },
            SiteConfig::Profile(SiteProfile {
                support,
                samples,
                window_center,
                window_half_width,
                lower_bound,
            }) => SingleSitePotential::new(
                (support[0], support[1]),
                samples.clone(),
                *window_center,
                *window_half_width,
                *lower_bound,
            )
            .map_err(wrap("model.site"))?,
        };

        let coupling = match &self.coupling {
            CouplingConfig::Named(s) => match parse_call("model.coupling", s)? {
                (n, a) if n == "uniform" => {
                    arity("model.coupling", "uniform", &a, 2)?;
                    CouplingDensity::uniform(a[0], a[1]).map_err(wrap("model.coupling"))?
                }
                (n, a) if n == "point" => {
                    arity("model.coupling", "point", &a, 1)?;
                    CouplingDensity::point(a[0]).map_err(wrap("model.coupling"))?
                }
                (n, _) => {
                    return Err(CliError::config(
                        "model.coupling",
                        format!("unknown density {n:?}; expected uniform(a, b), point(a) or a table"),
                    ))
                }
            },
            CouplingConfig::Table(DensityTable { table, normalize }) => {
                let points = table.iter().map(|p| (p[0], p[1])).collect();
                if *normalize {
                    CouplingDensity::table_normalized(points)
                } else {
                    CouplingDensity::table(points)
                }
                .map_err(wrap("model.coupling"))?
            }
        };
        Ok(ModelSpec {
            periodic,
            site,
            coupling,
        })
    }

    pub fn build(&self) -> Result<CanonicalModel, CliError> {
        self.spec()?
            .canonicalize()
            .map_err(|e| CliError::config("model", e.to_string()))
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("line {}, column {}: {e}", e.line(), e.column()))
    }

    /// Grid for box length `l` with the configured resolution and boundary.
    pub fn grid(&self, l: u32) -> Result<GridSpec, CliError> {
        GridSpec::new(l, self.points_per_cell, self.boundary).map_err(|e| CliError::config("grid", e.to_string()))
    }

    pub fn suite(&self, model: CanonicalModel) -> SuiteConfig {
        let v = &self.verify;
        SuiteConfig {
            model,
            points_per_cell: self.points_per_cell,
            master_seed: self.seed,
            box_lengths: v.box_lengths.clone(),
            sweep_realizations: v.sweep_realizations,
            window: (v.window[0], v.window[1]),
            ratio_floor: v.ratio_floor,
            hf_cases: v.hf_cases,
            hf_box_length: v.hf_box_length,
            hf_relative_step: v.hf_relative_step,
            hf_max_index: v.hf_max_index,
            bracket_box_length: v.bracket_box_length,
            bracket_realizations: v.bracket_realizations,
            bracket_energies: v.bracket_energies,
            fault: None,
        }
    }

    /// Checks that do not need a model build.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.realizations == 0 {
            return Err(CliError::config("realizations", "must be at least 1"));
        }
        if self.points_per_cell == 0 {
            return Err(CliError::config("points_per_cell", "must be at least 1"));
        }
        let nonempty = |field: &str, v: &[u32]| {
            if v.is_empty() || v.contains(&0) {
                Err(CliError::config(field, "need at least one positive box length"))
            } else {
                Ok(())
            }
        };
        nonempty("ids.box_lengths", &self.ids.box_lengths)?;
        nonempty("wegner.box_lengths", &self.wegner.box_lengths)?;
        nonempty("verify.box_lengths", &self.verify.box_lengths)?;
        if !self.wegner.energy.is_finite() {
            return Err(CliError::config("wegner.energy", "must be finite"));
        }
        if self.wegner.epsilons.is_empty() || self.wegner.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(CliError::config("wegner.epsilons", "need finite, nonnegative widths"));
        }
        if self.localize.box_length == 0 || self.localize.chain_length == 0 {
            return Err(CliError::config("localize", "box_length and chain_length must be positive"));
        }
        Ok(())
    }
}
