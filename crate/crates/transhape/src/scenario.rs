//! Scenario files, embedded presets and `--set` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transhape_core::compensator::{CompensatorConfig, StepSignal};
use transhape_core::integrator::SolverConfig;
use transhape_core::metrics::SettleCriteria;
use transhape_core::plants::{affine_first_order, cubic_first_order, linear_first_order, mass_spring_damper, PlantModel, SaturatedStiffness};

use crate::error::{CliError, Result};

/// One closed-loop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Free-form label, echoed in reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Catalog plant.
    pub plant: PlantSpec,
    /// Integral compensator gains.
    pub compensator: CompensatorSpec,
    /// Step reference.
    pub step: StepSpec,
    /// Integrator settings.
    #[serde(default)]
    pub solver: SolverConfig,
    /// Settling and residual-check settings.
    #[serde(default)]
    pub metrics: MetricsSpec,
    /// Options for the `bounds` command.
    #[serde(default)]
    pub bounds: BoundsSpec,
    /// Default output paths, overridden by command-line flags.
    #[serde(default, skip_serializing_if = "OutputSpec::is_empty")]
    pub outputs: OutputSpec,
}

/// Plant catalog entry with its parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PlantSpec {
    /// `ẋ = −g·x³ + u`.
    Cubic {
        /// Cubic gain.
        gain: f64,
    },
    /// `ẋ = −g(x)(x − u)` with `b ≤ g ≤ a`.
    Affine {
        /// Lower bound of `g`.
        b: f64,
        /// Upper bound of `g`.
        a: f64,
        /// Shape of `g` between its bounds.
        #[serde(default)]
        shape: AffineShape,
    },
    /// `τẋ = −x + u`.
    Linear {
        /// Time constant.
        tau: f64,
    },
    /// Mass-spring-damper with saturated stiffness.
    Msd {
        /// Natural frequency.
        omega_n: f64,
        /// Damping ratio.
        zeta: f64,
        /// Stiffness saturation level `β²`.
        beta_sq: f64,
        /// Saturate on `|z|` instead of `z`.
        #[serde(default)]
        symmetric: bool,
    },
}

/// Shape of an affine plant's `g`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffineShape {
    /// `g(x) = b + (a − b)/(1 + e^{−x})`.
    #[default]
    Sigmoid,
    /// `g(x) = b`.
    Constant,
}

/// Compensator gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompensatorSpec {
    /// Feed-forward fraction.
    pub alpha: f64,
    /// Integral gain.
    pub lambda: f64,
    /// Plant state at the step onset; defaults to the zero-input equilibrium.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
}

/// Step reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    /// Amplitude.
    pub r: f64,
    /// Onset time.
    #[serde(default)]
    pub t_s: f64,
}

/// Settling criteria, residual-check tolerances and the optional storage model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSpec {
    /// Error band for settling.
    pub band: f64,
    /// Window over which the error and its integral must stay quiet.
    pub window: f64,
    /// Absolute tolerance of the steady-state residual check.
    pub abs_tol: f64,
    /// Relative tolerance of the steady-state residual check.
    pub rel_tol: f64,
    /// Storage capacity for the state-of-charge trace.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    /// Initial state of charge.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soc_initial: Option<f64>,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        let s = SettleCriteria::default();
        Self { band: s.band, window: s.window, abs_tol: 1e-4, rel_tol: 1e-2, capacity: None, soc_initial: None }
    }
}

impl MetricsSpec {
    /// Settling criteria in core form.
    pub fn settle(&self) -> SettleCriteria {
        SettleCriteria { band: self.band, window: self.window }
    }
}

/// Gain-bound options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSpec {
    /// Upper bound on `‖∂η/∂u‖`.
    pub deta_du_norm_max: f64,
    /// Search interval for the empirical boundary.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_range: Option<[f64; 2]>,
    /// Bisection stopping width.
    pub bisection_tol: f64,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self { deta_du_norm_max: 0.0, lambda_range: None, bisection_tol: 0.05 }
    }
}

/// Output paths.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Trajectory CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Report JSON.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

impl OutputSpec {
    fn is_empty(&self) -> bool {
        self.csv.is_none() && self.json.is_none()
    }
}

impl PlantSpec {
    /// Instantiates the catalog plant.
    pub fn build(&self) -> Result<PlantModel> {
        let plant = match *self {
            PlantSpec::Cubic { gain } => cubic_first_order(gain),
            PlantSpec::Affine { b, a, shape } => match shape {
                AffineShape::Sigmoid => affine_first_order(move |x| b + (a - b) / (1.0 + (-x).exp()), b, a),
                AffineShape::Constant => affine_first_order(move |_| b, b, a),
            },
            PlantSpec::Linear { tau } => linear_first_order(tau),
            PlantSpec::Msd { omega_n, zeta, beta_sq, symmetric } => {
                SaturatedStiffness::from_beta_sq(beta_sq).and_then(|s| mass_spring_damper(omega_n, zeta, s.symmetric(symmetric)))
            }
        };
        plant.map_err(|e| CliError::Config(format!("plant: {e}")))
    }
}

impl Scenario {
    /// Parses a TOML scenario.
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Serializes back to TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a scenario file, applying `key=value` overrides first.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse_with_overrides(&text, overrides).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses TOML text after applying dotted-key overrides such as `compensator.alpha=0`.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Self::from_toml(text);
        }
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let scenario: Self = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Checks every field that the core constructors would otherwise reject later.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, r: transhape_core::Result<()>| r.map_err(|e| CliError::Config(format!("{name}: {e}")));
        self.plant.build()?;
        field("step", StepSignal::new(self.step.r, self.step.t_s).map(drop))?;
        field("solver", self.solver.validate())?;
        let c = &self.compensator;
        if !(c.alpha.is_finite() && c.alpha >= 0.0) {
            return Err(CliError::Config(format!("compensator.alpha must be finite and ≥ 0, got {}", c.alpha)));
        }
        if !(c.lambda.is_finite() && c.lambda >= 0.0) {
            return Err(CliError::Config(format!("compensator.lambda must be finite and ≥ 0, got {}", c.lambda)));
        }
        field("metrics", self.metrics.settle().validate())?;
        for (name, v) in [("metrics.abs_tol", self.metrics.abs_tol), ("metrics.rel_tol", self.metrics.rel_tol)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        if let Some(cap) = self.metrics.capacity {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(CliError::Config(format!("metrics.capacity must be finite and > 0, got {cap}")));
            }
        }
        if self.metrics.soc_initial.is_some() && self.metrics.capacity.is_none() {
            return Err(CliError::Config("metrics.soc_initial needs metrics.capacity".into()));
        }
        if let Some([lo, hi]) = self.bounds.lambda_range {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(CliError::Config(format!("bounds.lambda_range must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
            }
        }
        if !(self.bounds.bisection_tol.is_finite() && self.bounds.bisection_tol > 0.0) {
            return Err(CliError::Config(format!("bounds.bisection_tol must be finite and > 0, got {}", self.bounds.bisection_tol)));
        }
        if !(self.bounds.deta_du_norm_max.is_finite() && self.bounds.deta_du_norm_max >= 0.0) {
            return Err(CliError::Config(format!("bounds.deta_du_norm_max must be finite and ≥ 0, got {}", self.bounds.deta_du_norm_max)));
        }
        Ok(())
    }

    /// Step reference in core form.
    pub fn step_signal(&self) -> Result<StepSignal> {
        Ok(StepSignal::new(self.step.r, self.step.t_s)?)
    }

    /// Compensator settings in core form.
    pub fn compensator_config(&self) -> CompensatorConfig {
        CompensatorConfig {
            alpha: self.compensator.alpha,
            lambda: self.compensator.lambda,
            initial_state: self.compensator.initial_state.clone(),
        }
    }

    /// Label used for file names: the scenario name or `scenario`.
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item.split_once('=').ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::Config(format!("override `{item}` has an empty key")))?;
    let mut cursor = table;
    for part in parts {
        cursor = cursor
            .entry(part)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{item}`: `{part}` is not a table")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

const PRESETS: &[(&str, &str)] = &[
    ("fig3-alpha0", include_str!("../presets/fig3-alpha0.toml")),
    ("fig3-alpha1", include_str!("../presets/fig3-alpha1.toml")),
    ("fig3-alpha2", include_str!("../presets/fig3-alpha2.toml")),
    ("fig4-open", include_str!("../presets/fig4-open.toml")),
    ("fig4-stable", include_str!("../presets/fig4-stable.toml")),
    ("fig4-unstable", include_str!("../presets/fig4-unstable.toml")),
    ("msd", include_str!("../presets/msd.toml")),
    ("linear", include_str!("../presets/linear.toml")),
    ("affine", include_str!("../presets/affine.toml")),
];

const FAMILIES: &[(&str, &[&str])] = &[
    ("fig3", &["fig3-alpha0", "fig3-alpha1", "fig3-alpha2"]),
    ("fig4", &["fig4-open", "fig4-stable", "fig4-unstable"]),
];

/// Names accepted by `--preset`, families included.
pub fn preset_names() -> Vec<&'static str> {
    FAMILIES.iter().map(|(n, _)| *n).chain(PRESETS.iter().map(|(n, _)| *n)).collect()
}

/// Raw TOML of a single preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Resolves a preset or family name to its member scenarios.
pub fn preset(name: &str, overrides: &[String]) -> Result<Vec<Scenario>> {
    let members: Vec<&str> = match FAMILIES.iter().find(|(n, _)| *n == name) {
        Some((_, members)) => members.to_vec(),
        None => vec![name],
    };
    members
        .into_iter()
        .map(|m| {
            let text = preset_text(m)
                .ok_or_else(|| CliError::Config(format!("unknown preset `{m}`; known presets: {}", preset_names().join(", "))))?;
            Scenario::parse_with_overrides(text, overrides).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("preset {m}: {msg}")),
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            assert!(!preset(name, &[]).unwrap().is_empty(), "{name}");
        }
    }

    #[test]
    fn toml_round_trip() {
        for (name, text) in PRESETS {
            let s = Scenario::from_toml(text).unwrap();
            assert_eq!(Scenario::from_toml(&s.to_toml().unwrap()).unwrap(), s, "{name}");
        }
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let s = preset("fig4-stable", &["compensator.alpha=0".into(), "solver.method=\"rk4\"".into(), "name=x".into()]).unwrap();
        assert_eq!(s[0].compensator.alpha, 0.0);
        assert_eq!(s[0].solver.method, transhape_core::Method::Rk4);
        assert_eq!(s[0].name.as_deref(), Some("x"));
    }

    #[test]
    fn diagnostics_name_the_field() {
        let missing = "[plant]\nkind = \"msd\"\nomega_n = 1.0\nzeta = 0.7\n\n[compensator]\nalpha = 1.0\nlambda = 0.2\n\n[step]\nr = 5.0\n";
        let msg = Scenario::from_toml(missing).unwrap_err().to_string();
        assert!(msg.contains("beta_sq") && msg.contains("line"), "{msg}");
        let typo = preset_text("linear").unwrap().replace("tau", "tua");
        let msg = Scenario::from_toml(&typo).unwrap_err().to_string();
        assert!(msg.contains("tua"), "{msg}");
        let bad = preset_text("msd").unwrap().replace("zeta = 0.7", "zeta = 1.5");
        let msg = Scenario::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.starts_with("plant:"), "{msg}");
        assert!(preset("nope", &[]).is_err());
    }
}
