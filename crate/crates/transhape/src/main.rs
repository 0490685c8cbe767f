use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use transhape::io::{suffixed, trajectory_csv, write_atomic};
use transhape::run::with_pool;
use transhape::{preset, reproduce, run_scenario, stability_report, sweep, sweep_csv, CliError, Experiment, Outcome, ReportDocument, Scenario, SweepParam};

/// Simulate integral-compensated step responses and report their areas and gain bounds.
#[derive(Parser)]
#[command(name = "transhape", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, write the trajectory CSV and the full report.
    Simulate(Common),
    /// Simulate and report the area decomposition only.
    Areas(Common),
    /// Compute sufficient, linearized and (optionally) empirical gain bounds.
    Bounds(Common),
    /// Rerun a scenario over a list of alpha or lambda values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Gain to vary.
        #[arg(long, value_enum)]
        param: Param,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Run a preset family and check it (fig3 or fig4).
    Reproduce {
        /// Experiment name.
        experiment: String,
        /// Directory for CSVs, reports and summary.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Embedded preset or preset family.
    #[arg(long)]
    preset: Option<String>,
    /// Override a scenario key, e.g. `compensator.lambda=0.4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Trajectory CSV path.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Bracket the stability boundary by simulation.
    #[arg(long)]
    empirical: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Alpha,
    Lambda,
}

impl Common {
    fn scenarios(&self) -> Result<Vec<Scenario>, CliError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => Ok(vec![Scenario::load(path, &self.overrides)?]),
            (None, Some(name)) => preset(name, &self.overrides),
            (None, None) => Err(CliError::Config("one of --config or --preset is required".into())),
        }
    }

    /// Output path for one member; family members get their label appended.
    fn path(&self, flag: &Option<PathBuf>, configured: &Option<PathBuf>, scenario: &Scenario, family: bool) -> Option<PathBuf> {
        let p = flag.as_ref().or(configured.as_ref())?;
        Some(if family { suffixed(p, scenario.label()) } else { p.clone() })
    }
}

fn emit_json(docs: Vec<(Option<PathBuf>, String)>) -> Result<(), CliError> {
    let mut stdout = Vec::new();
    for (path, json) in docs {
        match path {
            Some(p) => write_atomic(&p, json.as_bytes())?,
            None => stdout.push(json),
        }
    }
    match stdout.len() {
        0 => {}
        1 => println!("{}", stdout[0]),
        _ => println!("[\n{}\n]", stdout.join(",\n")),
    }
    Ok(())
}

fn simulate(common: &Common, areas_only: bool) -> Result<u8, CliError> {
    let scenarios = common.scenarios()?;
    let family = scenarios.len() > 1;
    let runs = with_pool(|| scenarios.par_iter().map(run_scenario).collect::<Result<Vec<_>, _>>())?;
    let mut docs = Vec::new();
    for run in &runs {
        let s = &run.scenario;
        if !areas_only {
            if let Some(p) = common.path(&common.out_csv, &s.outputs.csv, s, family) {
                write_atomic(&p, trajectory_csv(&run.trajectory).as_bytes())?;
            }
        }
        let doc = ReportDocument::from_run(run, !areas_only);
        docs.push((common.path(&common.out_json, &s.outputs.json, s, family), doc.to_json()?));
        let e_r = run.residual().map(|e| format!(", e_r = {e:.6}")).unwrap_or_default();
        eprintln!("{}: {:?}{e_r}", s.label(), run.outcome);
    }
    emit_json(docs)?;
    Ok(runs.iter().map(|r| r.outcome).max().unwrap_or(Outcome::Settled).exit_code())
}

fn bounds(common: &Common) -> Result<u8, CliError> {
    let scenarios = common.scenarios()?;
    let family = scenarios.len() > 1;
    let mut docs = Vec::new();
    for s in &scenarios {
        let report = stability_report(s, common.empirical)?;
        eprintln!("{}: lambda < {} ({})", s.label(), report.lambda_sufficient, report.sufficient_method);
        let json = ReportDocument::from_bounds(s, report).to_json()?;
        docs.push((common.path(&common.out_json, &s.outputs.json, s, family), json));
    }
    emit_json(docs)?;
    Ok(0)
}

fn run_sweep(common: &Common, param: Param, values: &[f64]) -> Result<u8, CliError> {
    let scenarios = common.scenarios()?;
    let [scenario] = scenarios.as_slice() else {
        return Err(CliError::Config("sweep needs a single scenario, not a preset family".into()));
    };
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("sweep value {v} is not finite")));
    }
    let param = match param {
        Param::Alpha => SweepParam::Alpha,
        Param::Lambda => SweepParam::Lambda,
    };
    let csv = sweep_csv(&sweep(scenario, param, values)?);
    match common.out_csv.as_ref().or(scenario.outputs.csv.as_ref()) {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn run_reproduce(experiment: &str, out_dir: &Path) -> Result<u8, CliError> {
    let experiment: Experiment = experiment.parse()?;
    let summary = reproduce(experiment, out_dir)?;
    for c in &summary.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if summary.passed {
        return Ok(0);
    }
    eprintln!("failed checks: {}", summary.failures().join("; "));
    Ok(4)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c, false),
        Command::Areas(c) => simulate(c, true),
        Command::Bounds(c) => bounds(c),
        Command::Sweep { common, param, values } => run_sweep(common, *param, values),
        Command::Reproduce { experiment, out_dir } => run_reproduce(experiment, out_dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
