//! Preset families with pass/fail checks.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use transhape_core::metrics::Verdict;
use transhape_core::stability::{BoundaryProbe, Stability};
use transhape_core::StabilityReport;

use crate::error::{CliError, Result};
use crate::io::{trajectory_csv, write_atomic};
use crate::run::{run_scenario, stability_report, to_finite_json, with_pool, Outcome, ReportDocument, RunResult};
use crate::scenario::{preset, Scenario};

/// Reproducible experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Cubic plant, three feed-forward fractions.
    Fig3,
    /// Saturated mass-spring-damper, three integral gains plus bounds.
    Fig4,
}

impl std::str::FromStr for Experiment {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(Experiment::Fig3),
            "fig4" => Ok(Experiment::Fig4),
            other => Err(CliError::Config(format!("unknown experiment `{other}`; expected fig3 or fig4"))),
        }
    }
}

impl Experiment {
    /// Family name.
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
        }
    }
}

/// One verdict line.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// Check identifier.
    pub name: String,
    /// Verdict.
    pub passed: bool,
    /// Measured values.
    pub detail: String,
}

/// The summary written last.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    /// Experiment name.
    pub experiment: &'static str,
    /// True when every check passed.
    pub passed: bool,
    /// Per-check verdicts.
    pub checks: Vec<Check>,
}

impl Summary {
    /// Names of the failed checks.
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

/// Runs the experiment, writes `<member>.csv`, `<member>.json` and `summary.json` into `out_dir`.
pub fn reproduce(experiment: Experiment, out_dir: &Path) -> Result<Summary> {
    let members = preset(experiment.name(), &[])?;
    let (runs, bounds) = with_pool(|| {
        rayon::join(
            || members.par_iter().map(run_scenario).collect::<Result<Vec<_>>>(),
            || match experiment {
                Experiment::Fig3 => Ok(None),
                Experiment::Fig4 => bounds_with_probe(&members[1]).map(Some),
            },
        )
    });
    let (runs, bounds) = (runs?, bounds?);
    for run in &runs {
        let label = run.scenario.label();
        write_atomic(&out_dir.join(format!("{label}.csv")), trajectory_csv(&run.trajectory).as_bytes())?;
        write_atomic(&out_dir.join(format!("{label}.json")), ReportDocument::from_run(run, true).to_json()?.as_bytes())?;
    }
    let checks = match experiment {
        Experiment::Fig3 => fig3_checks(&runs),
        Experiment::Fig4 => {
            let (report, sufficient_stable) = bounds.expect("fig4 computes bounds");
            let doc = ReportDocument::from_bounds(&members[1], report.clone());
            write_atomic(&out_dir.join("bounds.json"), doc.to_json()?.as_bytes())?;
            fig4_checks(&runs, &report, sufficient_stable)
        }
    };
    let summary = Summary { experiment: experiment.name(), passed: checks.iter().all(|c| c.passed), checks };
    write_atomic(&out_dir.join("summary.json"), to_finite_json(&summary)?.as_bytes())?;
    Ok(summary)
}

fn bounds_with_probe(scenario: &Scenario) -> Result<(StabilityReport, Stability)> {
    let report = stability_report(scenario, true)?;
    let plant = scenario.plant.build()?;
    let probe = BoundaryProbe {
        plant: &plant,
        alpha: scenario.compensator.alpha,
        step: scenario.step_signal()?,
        solver: &scenario.solver,
        settle: scenario.metrics.settle(),
    };
    let verdict = probe.classify(report.lambda_sufficient, probe.classification_horizon()?)?;
    Ok((report, verdict))
}

fn residual(run: &RunResult) -> f64 {
    run.residual().unwrap_or(f64::NAN)
}

fn fig3_checks(runs: &[RunResult]) -> Vec<Check> {
    const TOL: f64 = 1.3e-3;
    let mut checks = Vec::new();
    for run in runs {
        let label = run.scenario.label();
        checks.push(check(format!("{label} settled"), run.outcome == Outcome::Settled, format!("outcome {:?}", run.outcome)));
        let (passed, detail) = match &run.lemma1 {
            Some(l) => (l.verdict == Verdict::Pass, format!("e_r = {:.6}, predicted {:.6}", l.e_r_simulated, l.e_r_predicted)),
            None => (false, "no residual check".into()),
        };
        checks.push(check(format!("{label} residual matches r(k - alpha)/lambda"), passed, detail));
    }
    let e: Vec<f64> = runs.iter().map(residual).collect();
    checks.push(check(
        "fig3 residual signs (+, 0, -)",
        e[0] > TOL && e[1].abs() <= TOL && e[2] < -TOL,
        format!("e_r = {:.6}, {:.6}, {:.6}", e[0], e[1], e[2]),
    ));
    if let Some(a) = runs[1].areas {
        let gap = (a.area_above - a.area_below).abs();
        checks.push(check("fig3-alpha1 areas balance", gap < 1e-3, format!("|A_a - A_b| = {gap:.3e}")));
    }
    if let Some(a) = runs[0].areas {
        let diff = a.area_below - a.area_above;
        checks.push(check("fig3-alpha0 area residual", (diff - 0.125).abs() <= 0.01 * 0.125, format!("A_b - A_a = {diff:.6}")));
    }
    checks
}

fn fig4_checks(runs: &[RunResult], bounds: &StabilityReport, sufficient_stable: Stability) -> Vec<Check> {
    let (open, stable, unstable) = (&runs[0], &runs[1], &runs[2]);
    let mut checks = Vec::new();
    let r = stable.scenario.step.r;
    let y_end = stable.trajectory.outputs.last().copied().unwrap_or(f64::NAN);
    let e_stable = residual(stable);
    checks.push(check(
        "fig4-stable converges to r",
        stable.outcome == Outcome::Settled && (y_end - r).abs() < 5e-3 && e_stable.abs() < 5e-3,
        format!("outcome {:?}, y(T) = {y_end:.6}, e_r = {e_stable:.3e}", stable.outcome),
    ));
    let e_open = residual(open);
    checks.push(check(
        "fig4-open keeps a residual",
        open.outcome == Outcome::Settled && e_open.abs() > 0.1,
        format!("outcome {:?}, e_r = {e_open:.6}", open.outcome),
    ));
    let t_div = unstable.trajectory.divergence;
    checks.push(check(
        "fig4-unstable diverges",
        t_div.is_some_and(|t| t - unstable.scenario.step.t_s < 200.0),
        format!("divergence at {t_div:?}"),
    ));
    let s = bounds.lambda_sufficient;
    checks.push(check("sufficient bound", (0.0017..=0.00175).contains(&s), format!("lambda < {s:.6}")));
    checks.push(check(
        "sufficient bound is empirically stable",
        sufficient_stable == Stability::Stable,
        format!("lambda = {s:.6} classified {sufficient_stable:?}"),
    ));
    let lin = bounds.lambda_linearized.unwrap_or(f64::NAN);
    checks.push(check("linearized bound", lin == 1.4, format!("lambda < {lin}")));
    let (passed, detail) = match &bounds.lambda_empirical {
        Some(b) => (
            b.stable_max >= 1.26 && b.unstable_min <= 1.54 && b.stable_max < b.unstable_min,
            format!("boundary in [{:.4}, {:.4}] after {} probes", b.stable_max, b.unstable_min, b.probes),
        ),
        None => (false, "no empirical boundary".into()),
    };
    checks.push(check("empirical boundary within 10% of linearized", passed, detail));
    checks
}
