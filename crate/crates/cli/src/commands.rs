//! One function per subcommand. Each fills a [`Bundle`] and returns summary
//! lines for the terminal.

use serde::Serialize;
use wegnerlab_core::analysis::{
    averaged_ids, lipschitz_modulus, localization_report, wegner_statistic, DecaySetup, IdsCurve,
    LipschitzEstimate, LocalizationReport, WegnerStatistic,
};
use wegnerlab_core::ensemble::{EnsembleConfig, RunOptions};
use wegnerlab_core::verify::{run_suite, SuiteReport};
use wegnerlab_core::StencilFault;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{format_float, Bundle, Table};
use crate::plot::{Plot, Series};

#[derive(Serialize)]
struct IdsOutput<'a> {
    curves: &'a [IdsCurve],
    lipschitz: Vec<Option<LipschitzEstimate>>,
}

pub fn ids(config: &ExperimentConfig, bundle: &mut Bundle, options: RunOptions) -> Result<Vec<String>, CliError> {
    let model = config.model.build()?;
    let energies = config.ids.energies.expand("ids.energies")?;
    let mut table = Table::new(&["l", "E", "N", "stderr"]);
    let mut curves = Vec::new();
    let mut series = Vec::new();
    for &l in &config.ids.box_lengths {
        let ensemble = EnsembleConfig::new(config.seed, config.realizations, model.clone(), config.grid(l)?)?;
        let curve = averaged_ids(&ensemble, &energies, options)?;
        let stderr = curve.stderr.clone().unwrap_or_else(|| vec![0.0; energies.len()]);
        for ((e, n), se) in energies.iter().zip(&curve.values).zip(&stderr) {
            table.push(vec![l.into(), (*e).into(), (*n).into(), (*se).into()]);
        }
        series.push(Series {
            label: format!("l = {l}"),
            points: energies.iter().copied().zip(curve.values.iter().copied()).collect(),
            band: Some(
                energies
                    .iter()
                    .zip(&curve.values)
                    .zip(&stderr)
                    .map(|((e, n), se)| (*e, n - se, n + se))
                    .collect(),
            ),
            scatter: false,
        });
        curves.push(curve);
    }
    let lipschitz: Vec<Option<LipschitzEstimate>> = curves.iter().map(|c| lipschitz_modulus(c).ok()).collect();

    bundle.csv("ids.csv", &table)?;
    let plot = Plot {
        title: format!("Integrated density of states, {} realizations", config.realizations),
        x_label: "E".into(),
        y_label: "N(E)".into(),
        series,
        ..Default::default()
    };
    bundle.text("ids.svg", &plot.to_svg())?;
    bundle.json(
        "ids.json",
        "ids",
        &IdsOutput {
            curves: &curves,
            lipschitz: lipschitz.clone(),
        },
    )?;

    Ok(curves
        .iter()
        .zip(&lipschitz)
        .map(|(c, lip)| {
            let last = c.values.len() - 1;
            format!(
                "l = {}: N({}) = {}, Lipschitz modulus {}",
                c.box_length,
                format_float(c.energies[last]),
                format_float(c.values[last]),
                lip.map_or("n/a".into(), |l| format_float(l.modulus))
            )
        })
        .collect())
}

#[derive(Serialize)]
struct WegnerOutput<'a> {
    statistic: &'a WegnerStatistic,
    max_c_hat: Option<(f64, f64)>,
    c_hat_spread: f64,
}

pub fn wegner(config: &ExperimentConfig, bundle: &mut Bundle, options: RunOptions) -> Result<Vec<String>, CliError> {
    let model = config.model.build()?;
    let w = &config.wegner;
    let ensemble = EnsembleConfig::new(config.seed, config.realizations, model, config.grid(w.box_lengths[0])?)?;
    let stat = wegner_statistic(&ensemble, w.energy, &w.epsilons, &w.box_lengths, options)?;

    let mut table = Table::new(&[
        "E",
        "epsilon",
        "l",
        "mean",
        "stderr",
        "C_hat",
        "C_hat_stderr",
        "hit_probability",
        "fit_slope",
        "r_squared",
        "r_squared_centered",
    ]);
    let mut series = Vec::new();
    for fit in &stat.fits {
        let cells: Vec<_> = stat.cells.iter().filter(|c| c.box_length == fit.box_length).collect();
        for c in &cells {
            table.push(vec![
                stat.energy.into(),
                c.epsilon.into(),
                c.box_length.into(),
                c.mean.into(),
                c.stderr.into(),
                c.c_hat.into(),
                c.c_hat_stderr.into(),
                c.hit_probability.into(),
                fit.slope.into(),
                fit.r_squared.into(),
                fit.r_squared_centered.into(),
            ]);
        }
        series.push(Series::line(
            format!("l = {}", fit.box_length),
            cells.iter().map(|c| (c.epsilon, c.mean)).collect(),
        ));
    }
    bundle.csv("wegner.csv", &table)?;
    let plot = Plot {
        title: format!("Mean eigenvalue count in [E - eps, E), E = {}", format_float(stat.energy)),
        x_label: "eps".into(),
        y_label: "E Tr P".into(),
        log_x: true,
        log_y: true,
        series,
    };
    bundle.text("wegner.svg", &plot.to_svg())?;
    let max_c_hat = stat.max_c_hat();
    let spread = stat.c_hat_spread();
    bundle.json(
        "wegner.json",
        "wegner",
        &WegnerOutput {
            statistic: &stat,
            max_c_hat,
            c_hat_spread: spread,
        },
    )?;

    let mut lines: Vec<String> = stat
        .fits
        .iter()
        .map(|f| {
            format!(
                "l = {}: slope {}, R² {} (centered {})",
                f.box_length,
                format_float(f.slope),
                format_float(f.r_squared),
                format_float(f.r_squared_centered)
            )
        })
        .collect();
    lines.push(format!(
        "max C_hat {}, max/min C_hat {}",
        max_c_hat.map_or("n/a".into(), |c| format_float(c.0)),
        format_float(spread)
    ));
    Ok(lines)
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    passed: bool,
    eder_spread: Option<f64>,
    ratio_spread: Option<f64>,
    fault: Option<StencilFault>,
    report: &'a SuiteReport,
}

pub fn verify(
    config: &ExperimentConfig,
    bundle: &mut Bundle,
    fault: Option<StencilFault>,
) -> Result<Vec<String>, CliError> {
    let model = config.model.build()?;
    let mut suite = config.suite(model);
    suite.fault = fault;
    let report = run_suite(&suite)?;
    let passed = report.passed();

    let mut lines: Vec<String> = report.reports().iter().map(|r| r.summary()).collect();
    for e in &report.eder {
        lines.push(format!(
            "derivative sum, l = {}: min {} over {} eigenvalues",
            e.box_length,
            e.min_derivative_sum.map_or("n/a".into(), format_float),
            e.cases.len()
        ));
    }
    for u in &report.unique_continuation {
        lines.push(format!(
            "window ratio, l = {}: min {}, max implied C6 {}, vacuous {}/{}",
            u.box_length,
            u.min_ratio.map_or("n/a".into(), format_float),
            u.max_implied_constant.map_or("n/a".into(), format_float),
            u.vacuous,
            u.total
        ));
    }
    lines.push(format!(
        "cross-l spread: derivative sum {}, window ratio {}",
        report.eder_spread().map_or("n/a".into(), format_float),
        report.ratio_spread().map_or("n/a".into(), format_float)
    ));

    let mut text = lines.join("\n");
    text.push('\n');
    for r in report.reports() {
        for c in r.failures().take(50) {
            text.push_str(&format!(
                "FAIL {} {} {}: measured {} bound {}\n",
                r.check,
                c.digest,
                c.label,
                format_float(c.measured),
                format_float(c.bound)
            ));
        }
        for s in &r.skipped {
            text.push_str(&format!("SKIP {} {} {}: {}\n", r.check, s.digest, s.label, s.reason));
        }
    }
    bundle.text("verify.txt", &text)?;
    bundle.json(
        "verify.json",
        "verify",
        &VerifyOutput {
            passed,
            eder_spread: report.eder_spread(),
            ratio_spread: report.ratio_spread(),
            fault,
            report: &report,
        },
    )?;

    if !passed {
        let first = report
            .reports()
            .into_iter()
            .find_map(|r| {
                r.failures().next().map(|c| {
                    format!(
                        "{}: case {} ({}) measured {} bound {}",
                        r.check,
                        c.digest,
                        c.label,
                        format_float(c.measured),
                        format_float(c.bound)
                    )
                })
            })
            .unwrap_or_default();
        return Err(CliError::Verification(first));
    }
    Ok(lines)
}

pub fn localize(config: &ExperimentConfig, bundle: &mut Bundle) -> Result<Vec<String>, CliError> {
    let model = config.model.build()?;
    let lc = &config.localize;
    let energies = lc.energies.expand("localize.energies")?;
    let setup = DecaySetup {
        box_length: lc.box_length,
        states: lc.states.clone(),
        realizations: lc.realizations,
    };
    let report: LocalizationReport = localization_report(
        &model,
        config.seed,
        &energies,
        lc.chain_length,
        config.points_per_cell,
        &setup,
    )?;

    let mut gamma = Table::new(&["E", "gamma"]);
    for p in &report.lyapunov {
        gamma.push(vec![p.energy.into(), p.gamma.into()]);
    }
    let mut decay = Table::new(&[
        "realization",
        "state",
        "E",
        "rate",
        "r_squared",
        "points",
        "participation_ratio",
        "gamma",
    ]);
    for d in &report.decay {
        decay.push(vec![
            d.realization.into(),
            d.state.into(),
            d.fit.energy.into(),
            d.fit.rate.into(),
            d.fit.r_squared.into(),
            d.fit.points.into(),
            d.fit.participation_ratio.into(),
            d.gamma.into(),
        ]);
    }
    bundle.csv("gamma.csv", &gamma)?;
    bundle.csv("decay.csv", &decay)?;

    let gamma_plot = Plot {
        title: format!("Lyapunov exponent, chain of {} cells", report.chain_length),
        x_label: "E".into(),
        y_label: "gamma".into(),
        series: vec![Series::line(
            "gamma(E)",
            report.lyapunov.iter().map(|p| (p.energy, p.gamma)).collect(),
        )],
        ..Default::default()
    };
    bundle.text("gamma.svg", &gamma_plot.to_svg())?;
    let top = report
        .decay
        .iter()
        .flat_map(|d| [d.gamma, -d.fit.rate])
        .fold(0.0_f64, f64::max);
    let decay_plot = Plot {
        title: "Eigenfunction decay rate against gamma at its energy".into(),
        x_label: "gamma(E_n)".into(),
        y_label: "-rate".into(),
        series: vec![
            Series {
                label: "states".into(),
                points: report.decay.iter().map(|d| (d.gamma, -d.fit.rate)).collect(),
                scatter: true,
                ..Default::default()
            },
            Series::line("rate = gamma", vec![(0.0, 0.0), (top, top)]),
        ],
        ..Default::default()
    };
    bundle.text("decay.svg", &decay_plot.to_svg())?;
    bundle.json("localize.json", "localize", &report)?;

    let max_gamma = report.lyapunov.iter().map(|p| p.gamma).fold(f64::NEG_INFINITY, f64::max);
    let mut lines = vec![format!(
        "{} energies, max gamma {}",
        report.lyapunov.len(),
        format_float(max_gamma)
    )];
    for d in &report.decay {
        lines.push(format!(
            "realization {} state {}: E {} rate {} R² {} gamma {}",
            d.realization,
            d.state,
            format_float(d.fit.energy),
            format_float(d.fit.rate),
            format_float(d.fit.r_squared),
            format_float(d.gamma)
        ));
    }
    Ok(lines)
}

