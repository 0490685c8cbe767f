//! Scenario execution, JSON reports, bounds and sweeps.

use rayon::prelude::*;
use serde::Serialize;
use transhape_core::compensator::close_loop;
use transhape_core::metrics::{area_decomposition, lemma1_from_trajectory, residual_integral, settling_detector, soc_trace, Verdict};
use transhape_core::plants::PlantModel;
use transhape_core::stability::{
    affine_constants, empirical_lambda_boundary, msd_constants, msd_linearized_lambda_max, unsupported_plant, BoundaryProbe,
};
use transhape_core::{AreaReport, Lemma1Record, Settling, SocTrace, StabilityReport, Trajectory};

use crate::error::{CliError, Result};
use crate::scenario::{PlantSpec, Scenario};

/// How a run ended. Decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    /// The error stayed in band over the trailing window.
    Settled,
    /// Neither settled nor diverged within the horizon.
    Inconclusive,
    /// The divergence detector fired.
    Diverged,
}

impl Outcome {
    /// 0 settled, 2 diverged, 3 inconclusive.
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Settled => 0,
            Outcome::Diverged => 2,
            Outcome::Inconclusive => 3,
        }
    }
}

/// Everything computed for one scenario.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// The scenario as run.
    pub scenario: Scenario,
    /// Sampled closed-loop trajectory.
    pub trajectory: Trajectory,
    /// Settled, diverged or neither.
    pub outcome: Outcome,
    /// Settling verdict; absent after divergence.
    pub settling: Option<Settling>,
    /// Area decomposition; absent after divergence.
    pub areas: Option<AreaReport>,
    /// Steady-state residual check; needs `λ > 0` and no divergence.
    pub lemma1: Option<Lemma1Record>,
    /// State-of-charge trace when a capacity is configured.
    pub soc: Option<SocTrace>,
}

impl RunResult {
    /// Final `∫e`, or `None` after divergence.
    pub fn residual(&self) -> Option<f64> {
        residual_integral(&self.trajectory).ok()
    }
}

/// Simulates one scenario and evaluates its metrics.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    let plant = scenario.plant.build()?;
    let step = scenario.step_signal()?;
    let cfg = scenario.compensator_config();
    let trajectory = close_loop(&plant, &cfg, step)?.simulate(&scenario.solver)?;
    let mut result = RunResult {
        scenario: scenario.clone(),
        outcome: Outcome::Diverged,
        settling: None,
        areas: None,
        lemma1: None,
        soc: None,
        trajectory,
    };
    if result.trajectory.diverged() {
        return Ok(result);
    }
    let traj = &result.trajectory;
    let m = &scenario.metrics;
    let settling = settling_detector(traj, &step, m.band, m.window)?;
    result.outcome = if settling.settled { Outcome::Settled } else { Outcome::Inconclusive };
    result.settling = Some(settling);
    result.areas = Some(area_decomposition(traj, &step, &m.settle())?);
    if cfg.lambda > 0.0 {
        let k = plant.inverse_dc_gain();
        result.lemma1 = Some(lemma1_from_trajectory(traj, k, &cfg, &step, &m.settle(), m.abs_tol, m.rel_tol)?);
    }
    if let Some(capacity) = m.capacity {
        result.soc = Some(soc_trace(traj, &step, capacity, m.soc_initial.unwrap_or(0.0))?);
    }
    Ok(result)
}

/// Area report plus the optional storage trace.
#[derive(Debug, Clone, Serialize)]
pub struct AreaSection {
    /// Signed areas between output and reference.
    #[serde(flatten)]
    pub report: AreaReport,
    /// State-of-charge trace.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soc: Option<SocTrace>,
}

/// Steady-state residual check with a JSON-safe relative gap.
#[derive(Debug, Clone, Serialize)]
pub struct Lemma1Section {
    /// Simulated `e_r`.
    pub e_r_simulated: f64,
    /// `r(k − α)/λ`.
    pub e_r_predicted: f64,
    /// `|simulated − predicted|`.
    pub abs_gap: f64,
    /// Absent when the prediction is zero and the gap is not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_gap: Option<f64>,
    /// Pass, fail or inconclusive.
    pub verdict: Verdict,
    /// Simulated span.
    pub horizon_used: f64,
}

impl From<Lemma1Record> for Lemma1Section {
    fn from(r: Lemma1Record) -> Self {
        Self {
            e_r_simulated: r.e_r_simulated,
            e_r_predicted: r.e_r_predicted,
            abs_gap: r.abs_gap,
            rel_gap: r.rel_gap.is_finite().then_some(r.rel_gap),
            verdict: r.verdict,
            horizon_used: r.horizon_used,
        }
    }
}

/// Solver and outcome diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    /// Run outcome.
    pub outcome: Outcome,
    /// Reported samples.
    pub samples: usize,
    /// Accepted steps.
    pub steps: usize,
    /// Rejected steps.
    pub rejected_steps: usize,
    /// Right-hand-side evaluations.
    pub rhs_evals: usize,
    /// Time at which divergence was detected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_time: Option<f64>,
    /// Earliest time after which the run stayed settled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settle_time: Option<f64>,
    /// Last reported output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_output: Option<f64>,
}

/// The JSON report. Absent sections are omitted.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    /// Echo of the scenario; enough to rerun it.
    pub scenario: Scenario,
    /// Area decomposition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub areas: Option<AreaSection>,
    /// Steady-state residual check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma1: Option<Lemma1Section>,
    /// Gain bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityReport>,
    /// Solver diagnostics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

impl ReportDocument {
    /// Report of a simulation run.
    pub fn from_run(run: &RunResult, with_lemma1: bool) -> Self {
        let t = &run.trajectory;
        let diagnostics = Diagnostics {
            outcome: run.outcome,
            samples: t.len(),
            steps: t.stats.steps,
            rejected_steps: t.stats.rejected,
            rhs_evals: t.stats.rhs_evals,
            divergence_time: t.divergence,
            settle_time: run.settling.and_then(|s| s.settle_time),
            final_output: t.outputs.last().copied().filter(|_| !t.diverged()),
        };
        Self {
            scenario: run.scenario.clone(),
            areas: run.areas.map(|report| AreaSection { report, soc: run.soc.clone() }),
            lemma1: run.lemma1.filter(|_| with_lemma1).map(Lemma1Section::from),
            stability: None,
            diagnostics: Some(diagnostics),
        }
    }

    /// Report of a bounds computation.
    pub fn from_bounds(scenario: &Scenario, stability: StabilityReport) -> Self {
        Self { scenario: scenario.clone(), areas: None, lemma1: None, stability: Some(stability), diagnostics: None }
    }

    /// Pretty JSON; fails if any number would have been written as `null`.
    pub fn to_json(&self) -> Result<String> {
        to_finite_json(self)
    }
}

/// Pretty JSON with a guard against non-finite numbers, which serde_json writes as `null`.
pub fn to_finite_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(path) = find_null(&v, String::new()) {
        return Err(CliError::Config(format!("report field `{path}` is not a finite number")));
    }
    serde_json::to_string_pretty(&v).map_err(|e| CliError::Config(e.to_string()))
}

fn find_null(v: &serde_json::Value, path: String) -> Option<String> {
    match v {
        serde_json::Value::Null => Some(path),
        serde_json::Value::Array(items) => items.iter().enumerate().find_map(|(i, x)| find_null(x, format!("{path}[{i}]"))),
        serde_json::Value::Object(map) => map.iter().find_map(|(k, x)| find_null(x, if path.is_empty() { k.clone() } else { format!("{path}.{k}") })),
        _ => None,
    }
}

/// Sufficient, linearized and optionally empirical bounds on `λ`.
pub fn stability_report(scenario: &Scenario, empirical: bool) -> Result<StabilityReport> {
    let plant = scenario.plant.build()?;
    let mut report = match scenario.plant {
        PlantSpec::Msd { omega_n, zeta, beta_sq, .. } => {
            let c = msd_constants(omega_n, zeta, beta_sq)?;
            StabilityReport::from_constants(c, Some(scenario.bounds.deta_du_norm_max))?
                .with_linearized(msd_linearized_lambda_max(omega_n, zeta)?)
        }
        PlantSpec::Affine { b, .. } => StabilityReport::from_constants(affine_constants(b)?, None)?,
        PlantSpec::Linear { tau } => StabilityReport::from_constants(affine_constants(1.0 / tau)?, None)?,
        PlantSpec::Cubic { .. } => return Err(unsupported_plant(&plant.label()).into()),
    };
    if empirical {
        let boundary = empirical_boundary(scenario, &plant, report.lambda_linearized)?;
        report = report.with_empirical(boundary);
    }
    Ok(report)
}

fn empirical_boundary(scenario: &Scenario, plant: &PlantModel, linearized: Option<f64>) -> Result<transhape_core::EmpiricalBoundary> {
    let range = match (scenario.bounds.lambda_range, linearized) {
        (Some([lo, hi]), _) => (lo, hi),
        (None, Some(m)) => (0.1 * m, 1.5 * m),
        (None, None) => return Err(CliError::Config("bounds.lambda_range is required for --empirical on this plant".into())),
    };
    let probe = BoundaryProbe {
        plant,
        alpha: scenario.compensator.alpha,
        step: scenario.step_signal()?,
        solver: &scenario.solver,
        settle: scenario.metrics.settle(),
    };
    Ok(empirical_lambda_boundary(&probe, range, scenario.bounds.bisection_tol)?)
}

/// Gain swept by `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Feed-forward fraction.
    Alpha,
    /// Integral gain.
    Lambda,
}

/// One sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Swept value.
    pub value: f64,
    /// Run outcome.
    pub outcome: Outcome,
    /// Final `∫e`; `None` after divergence.
    pub e_r: Option<f64>,
    /// Settling time when settled.
    pub settle_time: Option<f64>,
}

/// Runs the scenario once per value, in parallel.
pub fn sweep(scenario: &Scenario, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let scenarios = values
        .iter()
        .map(|&v| {
            let mut s = scenario.clone();
            match param {
                SweepParam::Alpha => s.compensator.alpha = v,
                SweepParam::Lambda => s.compensator.lambda = v,
            }
            s.validate().map(|_| s)
        })
        .collect::<Result<Vec<_>>>()?;
    with_pool(|| {
        scenarios
            .par_iter()
            .zip(values)
            .map(|(s, &value)| {
                let run = run_scenario(s)?;
                Ok(SweepRow { value, outcome: run.outcome, e_r: run.residual(), settle_time: run.settling.and_then(|x| x.settle_time) })
            })
            .collect()
    })
}

/// `value,e_r,settled,settle_time`; diverged rows carry `diverged` in the numeric columns.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,e_r,settled,settle_time\n");
    for r in rows {
        let line = match (r.outcome, r.e_r) {
            (Outcome::Diverged, _) | (_, None) => format!("{:?},diverged,false,diverged\n", r.value),
            (outcome, Some(e_r)) => {
                let t = r.settle_time.filter(|_| outcome == Outcome::Settled).map(|t| format!("{t:?}")).unwrap_or_default();
                format!("{:?},{e_r:?},{},{t}\n", r.value, outcome == Outcome::Settled)
            }
        };
        out.push_str(&line);
    }
    out
}

/// Runs `f` on a pool capped by `TRANSHAPE_THREADS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var("TRANSHAPE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Outcome::Settled.exit_code(), 0);
        assert_eq!(Outcome::Diverged.exit_code(), 2);
        assert_eq!(Outcome::Inconclusive.exit_code(), 3);
    }

    #[test]
    fn null_guard_names_the_field() {
        #[derive(Serialize)]
        struct Inner {
            x: f64,
        }
        #[derive(Serialize)]
        struct Outer {
            a: Vec<Inner>,
        }
        let msg = to_finite_json(&Outer { a: vec![Inner { x: 1.0 }, Inner { x: f64::NAN }] }).unwrap_err().to_string();
        assert!(msg.contains("a[1].x"), "{msg}");
    }

    #[test]
    fn sweep_rows_render() {
        let rows = [
            SweepRow { value: 0.5, outcome: Outcome::Settled, e_r: Some(0.25), settle_time: Some(3.0) },
            SweepRow { value: 1.0, outcome: Outcome::Inconclusive, e_r: Some(0.1), settle_time: None },
            SweepRow { value: 2.0, outcome: Outcome::Diverged, e_r: None, settle_time: None },
        ];
        assert_eq!(sweep_csv(&rows), "value,e_r,settled,settle_time\n0.5,0.25,true,3.0\n1.0,0.1,false,\n2.0,diverged,false,diverged\n");
    }
}
