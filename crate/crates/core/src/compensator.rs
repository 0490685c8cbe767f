//! Feedforward plus integral compensation around a plant.
//!
//! The augmented state is `[x; u]` with `u̇ = λ(r − h(x))` and `u(t_s) = α·r`.
//! The integrator state `∫e` lives inside `u`, so for `λ > 0` the running
//! error integral is recovered as `(u − α·r)/λ`.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::integrator::{integrate, SolverConfig, Trajectory};
use crate::plants::PlantModel;

/// Step reference `r` applied at `t_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepSignal {
    /// Step amplitude `r`.
    pub amplitude: f64,
    /// Step onset `t_s`, seconds.
    pub onset: f64,
}

impl StepSignal {
    /// Validated step.
    pub fn new(amplitude: f64, onset: f64) -> Result<Self> {
        let s = Self { amplitude, onset };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(invalid!("step amplitude must be finite"));
        }
        if !(self.onset.is_finite() && self.onset >= 0.0) {
            return Err(invalid!("step onset must be finite and ≥ 0, got {}", self.onset));
        }
        Ok(())
    }
}

/// Gains of the compensation structure.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompensatorConfig {
    /// Feedforward gain `α`.
    pub alpha: f64,
    /// Integral gain `λ`; zero means open loop.
    pub lambda: f64,
    /// Plant state at the onset. `None` means the zero-input equilibrium.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub initial_state: Option<Vec<f64>>,
}

impl CompensatorConfig {
    /// Gains with the default initial state.
    pub fn new(alpha: f64, lambda: f64) -> Self {
        Self { alpha, lambda, initial_state: None }
    }
}

/// Augmented closed-loop system ready to integrate.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    plant: PlantModel,
    step: StepSignal,
    lambda: f64,
    /// `Some(α)` for [`close_loop`]; open loop has no feedforward gain.
    alpha: Option<f64>,
    x0: Vec<f64>,
    u0: f64,
}

/// Builds the compensated loop around `plant`.
pub fn close_loop(plant: &PlantModel, cfg: &CompensatorConfig, step: StepSignal) -> Result<ClosedLoop> {
    step.validate()?;
    if !(cfg.alpha.is_finite() && cfg.alpha >= 0.0) {
        return Err(invalid!("alpha must be finite and ≥ 0, got {}", cfg.alpha));
    }
    if !(cfg.lambda.is_finite() && cfg.lambda >= 0.0) {
        return Err(invalid!("lambda must be finite and ≥ 0, got {}", cfg.lambda));
    }
    let x0 = initial_state(plant, cfg.initial_state.as_deref())?;
    Ok(ClosedLoop {
        plant: plant.clone(),
        step,
        lambda: cfg.lambda,
        alpha: Some(cfg.alpha),
        x0,
        u0: cfg.alpha * step.amplitude,
    })
}

/// Open-loop reference configuration: `u ≡ u_level` from the onset.
pub fn open_loop(plant: &PlantModel, step: StepSignal, u_level: f64) -> Result<ClosedLoop> {
    step.validate()?;
    if !u_level.is_finite() {
        return Err(invalid!("u_level must be finite"));
    }
    let x0 = initial_state(plant, None)?;
    Ok(ClosedLoop { plant: plant.clone(), step, lambda: 0.0, alpha: None, x0, u0: u_level })
}

fn initial_state(plant: &PlantModel, given: Option<&[f64]>) -> Result<Vec<f64>> {
    let x0 = match given {
        Some(x) => x.to_vec(),
        None => plant.equilibrium(0.0),
    };
    if x0.len() != plant.dim() {
        return Err(invalid!("initial state has length {} but plant dim is {}", x0.len(), plant.dim()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("initial state is not finite"));
    }
    Ok(x0)
}

impl ClosedLoop {
    /// Replaces the plant state at the onset.
    pub fn with_initial_state(mut self, x0: &[f64]) -> Result<Self> {
        self.x0 = initial_state(&self.plant, Some(x0))?;
        Ok(self)
    }

    /// Augmented dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.plant.dim() + 1
    }

    /// The wrapped plant.
    pub fn plant(&self) -> &PlantModel {
        &self.plant
    }

    /// Step reference.
    pub fn step(&self) -> StepSignal {
        self.step
    }

    /// Integral gain.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Feedforward gain, `None` for an open loop.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Augmented initial state `[x(t_s); u(t_s)]`.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut z = self.x0.clone();
        z.push(self.u0);
        z
    }

    /// Augmented vector field.
    pub fn rhs(&self, _t: f64, z: &[f64], dz: &mut [f64]) {
        let n = self.plant.dim();
        let (x, u) = (&z[..n], z[n]);
        self.plant.dynamics(x, u, &mut dz[..n]);
        dz[n] = self.lambda * (self.step.amplitude - self.plant.output(x));
    }

    /// Output of an augmented state.
    pub fn output(&self, z: &[f64]) -> f64 {
        self.plant.output(&z[..self.plant.dim()])
    }

    /// Integrates from the onset and assembles the full trajectory.
    pub fn simulate(&self, solver: &SolverConfig) -> Result<Trajectory> {
        let r = self.step.amplitude;
        let hist = integrate(|t, z, dz| self.rhs(t, z, dz), self.step.onset, &self.initial_state(), r, solver)?;
        let n = self.plant.dim();
        let len = hist.times.len();
        let mut traj = Trajectory {
            times: hist.times,
            states: Vec::with_capacity(len),
            controls: Vec::with_capacity(len),
            outputs: Vec::with_capacity(len),
            errors: Vec::with_capacity(len),
            error_integral: Vec::with_capacity(len),
            divergence: hist.divergence,
            stats: hist.stats,
        };
        for z in hist.states {
            let y = self.plant.output(&z[..n]);
            traj.controls.push(z[n]);
            traj.outputs.push(y);
            traj.errors.push(r - y);
            traj.states.push(z[..n].to_vec());
        }
        match self.alpha {
            Some(alpha) if self.lambda > 0.0 => {
                let u_ff = alpha * r;
                traj.error_integral.extend(traj.controls.iter().map(|u| (u - u_ff) / self.lambda));
                // u(t_s) = αr exactly, but keep the invariant bit-exact.
                traj.error_integral[0] = 0.0;
            }
            _ => {
                let mut acc = 0.0;
                traj.error_integral.push(0.0);
                for i in 1..len {
                    acc += 0.5 * (traj.times[i] - traj.times[i - 1]) * (traj.errors[i] + traj.errors[i - 1]);
                    traj.error_integral.push(acc);
                }
            }
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{cubic_first_order, linear_first_order, mass_spring_damper, SaturatedStiffness};
    use approx::assert_abs_diff_eq;

    #[test]
    fn augmented_initial_point() {
        let p = cubic_first_order(20.0).unwrap();
        let cl = close_loop(&p, &CompensatorConfig::new(1.0, 8.0), StepSignal::new(1.0, 0.0).unwrap()).unwrap();
        let z0 = cl.initial_state();
        assert_eq!(z0, [0.0, 1.0]);
        let mut dz = [0.0; 2];
        cl.rhs(0.0, &z0, &mut dz);
        assert_eq!(dz[1], 8.0);
        // At the closed-loop equilibrium u̇ = 0 forces y = r.
        cl.rhs(0.0, &[1.0, 1.0], &mut dz);
        assert_eq!(dz, [0.0, 0.0]);
    }

    #[test]
    fn zero_gain_freezes_control() {
        let p = cubic_first_order(20.0).unwrap();
        let step = StepSignal::new(2.0, 0.0).unwrap();
        let traj = close_loop(&p, &CompensatorConfig::new(1.0, 0.0), step)
            .unwrap()
            .simulate(&SolverConfig::fixed(0.01, 2.0))
            .unwrap();
        assert!(traj.controls.iter().all(|&u| u == 2.0));
    }

    #[test]
    fn open_loop_linear_closed_form() {
        let p = linear_first_order(1.0).unwrap();
        let step = StepSignal::new(1.0, 0.0).unwrap();
        let traj = open_loop(&p, step, 1.0).unwrap().simulate(&SolverConfig::fixed(0.01, 5.0)).unwrap();
        for (t, y) in traj.times.iter().zip(&traj.outputs) {
            assert_abs_diff_eq!(*y, 1.0 - libm::exp(-t), epsilon = 1e-9);
        }
        let rest = open_loop(&p, step, 0.0).unwrap().simulate(&SolverConfig::fixed(0.01, 5.0)).unwrap();
        assert!(rest.outputs.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn open_and_zero_gain_closed_are_bit_identical() {
        let s = SaturatedStiffness::from_beta_sq(20.0).unwrap();
        let p = mass_spring_damper(1.0, 0.7, s).unwrap();
        let step = StepSignal::new(5.0, 0.0).unwrap();
        let solver = SolverConfig::adaptive(1e-9, 20.0, 0.05);
        let a = close_loop(&p, &CompensatorConfig::new(1.0, 0.0), step).unwrap().simulate(&solver).unwrap();
        let b = open_loop(&p, step, 5.0).unwrap().simulate(&solver).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonzero_onset_starts_there() {
        let p = linear_first_order(1.0).unwrap();
        let step = StepSignal::new(1.0, 3.0).unwrap();
        let traj = close_loop(&p, &CompensatorConfig::new(1.0, 0.5), step)
            .unwrap()
            .simulate(&SolverConfig::fixed(0.01, 1.0))
            .unwrap();
        assert_eq!(traj.times[0], 3.0);
        assert_eq!(traj.error_integral[0], 0.0);
        assert_abs_diff_eq!(traj.end_time(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = linear_first_order(1.0).unwrap();
        let step = StepSignal::new(1.0, 0.0).unwrap();
        assert!(close_loop(&p, &CompensatorConfig::new(1.0, -1.0), step).is_err());
        assert!(close_loop(&p, &CompensatorConfig::new(-1.0, 1.0), step).is_err());
        let cfg = CompensatorConfig { initial_state: Some(alloc::vec![0.0, 0.0]), ..CompensatorConfig::new(1.0, 1.0) };
        assert!(close_loop(&p, &cfg, step).is_err());
        assert!(StepSignal::new(f64::NAN, 0.0).is_err());
        assert!(StepSignal::new(1.0, -1.0).is_err());
    }
}
