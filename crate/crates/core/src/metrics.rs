//! Transient-area metrics.
//!
//! Over `[t_s, T]` the response splits into
//! `A_a = ∫(y − r)⁺`, `A_b = ∫(r − y)⁺` and the common area `A_c = ∫min(r, y)`,
//! so that `∫y = A_a + A_c`, `∫r = A_b + A_c` and `e_r = A_b − A_a`.
//! Samples are joined linearly and crossings of `y = r` are located on the
//! linear interpolant.

use alloc::vec::Vec;

use crate::compensator::{close_loop, CompensatorConfig, StepSignal};
use crate::error::{invalid, Error, Result};
use crate::integrator::{SolverConfig, Trajectory};
use crate::plants::PlantModel;

/// Settling band and window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SettleCriteria {
    /// Fraction of `max(|r|, 1)` allowed for `|e|`.
    pub band: f64,
    /// Trailing window length, seconds.
    pub window: f64,
}

impl Default for SettleCriteria {
    fn default() -> Self {
        Self { band: 1e-3, window: 10.0 }
    }
}

impl SettleCriteria {
    /// Checks `0 < band < 1` and a finite positive window.
    pub fn validate(&self) -> Result<()> {
        if !(self.band > 0.0 && self.band < 1.0) {
            return Err(invalid!("settling band must lie in (0, 1), got {}", self.band));
        }
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(invalid!("settling window must be finite and > 0, got {}", self.window));
        }
        Ok(())
    }
}

/// Settling verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Settling {
    /// Both settling conditions hold over the trailing window.
    pub settled: bool,
    /// Earliest time after which both conditions hold.
    pub settle_time: Option<f64>,
}

/// Area decomposition of one response.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AreaReport {
    /// `A_a`: area where the response is above the reference.
    pub area_above: f64,
    /// `A_b`: area where the response is below the reference.
    pub area_below: f64,
    /// `A_c`: common area under both signals.
    pub area_common: f64,
    /// `e_r = A_b − A_a`.
    pub residual: f64,
    /// Span integrated, seconds.
    pub horizon_used: f64,
    /// Settling verdict for the run.
    pub settled: bool,
    /// Settling time if settled.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub settle_time: Option<f64>,
    /// Output at the last sample.
    pub steady_output: f64,
}

fn tie_tolerance(r: f64) -> f64 {
    1e-12 * r.abs().max(1.0)
}

/// Positive part of the integral of a linear segment from `d0` to `d1` over `dt`.
fn positive_area(d0: f64, d1: f64, dt: f64) -> f64 {
    if d0 >= 0.0 && d1 >= 0.0 {
        0.5 * dt * (d0 + d1)
    } else if d0 <= 0.0 && d1 <= 0.0 {
        0.0
    } else if d0 > 0.0 {
        // Crossing at θ = d0 / (d0 − d1).
        0.5 * dt * d0 * d0 / (d0 - d1)
    } else {
        0.5 * dt * d1 * d1 / (d1 - d0)
    }
}

/// Computes `A_a`, `A_b`, `A_c` and `e_r` over the whole trajectory.
pub fn area_decomposition(traj: &Trajectory, step: &StepSignal, settle: &SettleCriteria) -> Result<AreaReport> {
    if let Some(time) = traj.divergence {
        return Err(Error::Diverged { time });
    }
    if traj.is_empty() {
        return Err(invalid!("empty trajectory"));
    }
    if traj.times[0] < step.onset {
        return Err(invalid!("trajectory starts before the step onset"));
    }
    let r = step.amplitude;
    let tie = tie_tolerance(r);
    let dev = |y: f64| {
        let d = y - r;
        if d.abs() < tie {
            0.0
        } else {
            d
        }
    };
    let (mut above, mut below, mut common) = (0.0, 0.0, 0.0);
    for i in 1..traj.len() {
        let dt = traj.times[i] - traj.times[i - 1];
        let (y0, y1) = (traj.outputs[i - 1], traj.outputs[i]);
        let (d0, d1) = (dev(y0), dev(y1));
        let a = positive_area(d0, d1, dt);
        let b = positive_area(-d0, -d1, dt);
        above += a;
        below += b;
        common += 0.5 * dt * (y0 + y1) - a;
    }
    let settling = settling_detector(traj, step, settle.band, settle.window)?;
    Ok(AreaReport {
        area_above: above,
        area_below: below,
        area_common: common,
        residual: below - above,
        horizon_used: traj.end_time() - traj.times[0],
        settled: settling.settled,
        settle_time: settling.settle_time,
        steady_output: *traj.outputs.last().unwrap(),
    })
}

/// Final value of the running error integral.
pub fn residual_integral(traj: &Trajectory) -> Result<f64> {
    if let Some(time) = traj.divergence {
        return Err(Error::Diverged { time });
    }
    traj.error_integral.last().copied().ok_or_else(|| invalid!("empty trajectory"))
}

/// Settling detection.
///
/// A run is settled when, over the trailing `window`, `|e| < band·max(|r|, 1)`
/// and every window increment of `∫e` stays below `band·window·max(|r|, 1)`.
/// The settle time is the earliest sample after which both hold.
pub fn settling_detector(traj: &Trajectory, step: &StepSignal, band: f64, window: f64) -> Result<Settling> {
    SettleCriteria { band, window }.validate()?;
    let not_settled = Settling { settled: false, settle_time: None };
    if traj.diverged() || traj.is_empty() {
        return Ok(not_settled);
    }
    let scale = step.amplitude.abs().max(1.0);
    let err_tol = band * scale;
    let inc_tol = band * window * scale;
    let n = traj.len();
    let t = &traj.times;

    // Earliest index from which |e| stays inside the band.
    let mut first_err = n;
    while first_err > 0 && traj.errors[first_err - 1].abs() < err_tol && traj.errors[first_err - 1].is_finite() {
        first_err -= 1;
    }
    if first_err == n {
        return Ok(not_settled);
    }

    // Earliest index from which every window increment ending later stays small.
    // `lag[i]` is the first sample at least `window` before sample `i`.
    let mut first_inc = 0usize;
    let mut j = 0usize;
    for i in 0..n {
        while j < i && t[i] - t[j + 1] >= window - 1e-9 * window {
            j += 1;
        }
        if t[i] - t[j] < window - 1e-9 * window {
            continue;
        }
        let inc = (traj.error_integral[i] - traj.error_integral[j]).abs();
        if !(inc < inc_tol) {
            first_inc = j + 1;
        }
    }
    let start = first_err.max(first_inc).min(n - 1);
    let t_star = t[start];
    if traj.end_time() - t_star >= window - 1e-9 * window {
        Ok(Settling { settled: true, settle_time: Some(t_star) })
    } else {
        Ok(not_settled)
    }
}

/// Outcome of a steady-state identity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    /// Gap within tolerance.
    Pass,
    /// Gap exceeds tolerance.
    Fail,
    /// The run did not settle, so no verdict is possible.
    Inconclusive,
}

/// Simulated versus predicted residual integral.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lemma1Record {
    /// Final `∫e` from the simulation.
    pub e_r_simulated: f64,
    /// `r(k − α)/λ`.
    pub e_r_predicted: f64,
    /// `|simulated − predicted|`.
    pub abs_gap: f64,
    /// `abs_gap / |predicted|`, infinite when the prediction is zero and the gap is not.
    pub rel_gap: f64,
    /// Verdict at the caller's tolerance.
    pub verdict: Verdict,
    /// Span simulated, seconds.
    pub horizon_used: f64,
}

/// Predicted steady-state residual `r(k − α)/λ`.
pub fn predicted_residual(k: f64, alpha: f64, lambda: f64, r: f64) -> f64 {
    r * (k - alpha) / lambda
}

/// Compares a trajectory's final `∫e` with `r(k − α)/λ`.
///
/// Passes when `abs_gap ≤ abs_tol + rel_tol·|predicted|`.
pub fn lemma1_from_trajectory(
    traj: &Trajectory,
    k: f64,
    cfg: &CompensatorConfig,
    step: &StepSignal,
    settle: &SettleCriteria,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Lemma1Record> {
    if !(cfg.lambda > 0.0) {
        return Err(invalid!("the steady-state identity needs lambda > 0"));
    }
    let predicted = predicted_residual(k, cfg.alpha, cfg.lambda, step.amplitude);
    let horizon_used = traj.end_time() - traj.times.first().copied().unwrap_or(f64::NAN);
    let settling = settling_detector(traj, step, settle.band, settle.window)?;
    if !settling.settled {
        let simulated = traj.error_integral.last().copied().unwrap_or(f64::NAN);
        return Ok(Lemma1Record {
            e_r_simulated: simulated,
            e_r_predicted: predicted,
            abs_gap: (simulated - predicted).abs(),
            rel_gap: rel(simulated, predicted),
            verdict: Verdict::Inconclusive,
            horizon_used,
        });
    }
    let simulated = residual_integral(traj)?;
    let abs_gap = (simulated - predicted).abs();
    let verdict = if abs_gap <= abs_tol + rel_tol * predicted.abs() { Verdict::Pass } else { Verdict::Fail };
    Ok(Lemma1Record {
        e_r_simulated: simulated,
        e_r_predicted: predicted,
        abs_gap,
        rel_gap: rel(simulated, predicted),
        verdict,
        horizon_used,
    })
}

fn rel(simulated: f64, predicted: f64) -> f64 {
    let gap = (simulated - predicted).abs();
    if predicted == 0.0 {
        if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        gap / predicted.abs()
    }
}

/// Simulates the compensated loop and checks `e_r = r(k − α)/λ`.
pub fn verify_lemma1(
    plant: &PlantModel,
    cfg: &CompensatorConfig,
    step: &StepSignal,
    solver: &SolverConfig,
    settle: &SettleCriteria,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Lemma1Record> {
    if !(cfg.lambda > 0.0) {
        return Err(invalid!("the steady-state identity needs lambda > 0"));
    }
    let traj = close_loop(plant, cfg, *step)?.simulate(solver)?;
    lemma1_from_trajectory(&traj, plant.inverse_dc_gain(), cfg, step, settle, abs_tol, rel_tol)
}

/// Normalised state of charge of a storage element that covers the
/// shortfall `r − y`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SocTrace {
    /// Sample times.
    pub times: Vec<f64>,
    /// State of charge per sample.
    pub soc: Vec<f64>,
    /// Storage capacity in energy units.
    pub capacity: f64,
    /// State of charge at the onset.
    pub soc_initial: f64,
}

/// `soc(t) = soc_initial − ∫_{t_s}^{t} (r − y) dτ / capacity`.
pub fn soc_trace(traj: &Trajectory, _step: &StepSignal, capacity: f64, soc_initial: f64) -> Result<SocTrace> {
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(invalid!("capacity must be finite and > 0, got {capacity}"));
    }
    if !soc_initial.is_finite() {
        return Err(invalid!("soc_initial must be finite"));
    }
    Ok(SocTrace {
        times: traj.times.clone(),
        soc: traj.error_integral.iter().map(|i| soc_initial - i / capacity).collect(),
        capacity,
        soc_initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::SolverStats;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn synthetic(times: Vec<f64>, outputs: Vec<f64>, r: f64) -> Trajectory {
        let errors: Vec<f64> = outputs.iter().map(|y| r - y).collect();
        let mut integral = vec![0.0];
        for i in 1..times.len() {
            let last = integral[i - 1];
            integral.push(last + 0.5 * (times[i] - times[i - 1]) * (errors[i] + errors[i - 1]));
        }
        Trajectory {
            states: outputs.iter().map(|y| vec![*y]).collect(),
            controls: vec![r; times.len()],
            times,
            outputs,
            errors,
            error_integral: integral,
            divergence: None,
            stats: SolverStats::default(),
        }
    }

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn perfect_tracking() {
        let t = grid(1001, 0.01);
        let traj = synthetic(t, vec![2.0; 1001], 2.0);
        let step = StepSignal::new(2.0, 0.0).unwrap();
        let rep = area_decomposition(&traj, &step, &SettleCriteria { band: 1e-3, window: 1.0 }).unwrap();
        assert_eq!(rep.area_above, 0.0);
        assert_eq!(rep.area_below, 0.0);
        assert_abs_diff_eq!(rep.area_common, 20.0, epsilon = 1e-12);
        assert_eq!(rep.residual, 0.0);
        assert!(rep.settled);
        assert_eq!(rep.settle_time, Some(0.0));
        assert_eq!(residual_integral(&traj).unwrap(), 0.0);
        let soc = soc_trace(&traj, &step, 3.0, 0.4).unwrap();
        assert!(soc.soc.iter().all(|&s| s == 0.4));
    }

    #[test]
    fn crossing_is_split_linearly() {
        // y goes 0 → 2 over one second against r = 1: half a unit triangle each side.
        let traj = synthetic(vec![0.0, 1.0], vec![0.0, 2.0], 1.0);
        let step = StepSignal::new(1.0, 0.0).unwrap();
        let rep = area_decomposition(&traj, &step, &SettleCriteria::default()).unwrap();
        assert_abs_diff_eq!(rep.area_above, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.area_below, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.area_common, 0.75, epsilon = 1e-15);
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn near_ties_count_as_common_only() {
        let traj = synthetic(vec![0.0, 1.0, 2.0], vec![1.0 + 1e-14, 1.0 - 1e-14, 1.0], 1.0);
        let step = StepSignal::new(1.0, 0.0).unwrap();
        let rep = area_decomposition(&traj, &step, &SettleCriteria::default()).unwrap();
        assert_eq!(rep.area_above, 0.0);
        assert_eq!(rep.area_below, 0.0);
    }

    #[test]
    fn exponential_settle_time() {
        let dt = 0.01;
        let t = grid(2001, dt);
        let y: Vec<f64> = t.iter().map(|t| 1.0 - libm::exp(-t)).collect();
        let traj = synthetic(t, y, 1.0);
        let step = StepSignal::new(1.0, 0.0).unwrap();
        let s = settling_detector(&traj, &step, 1e-3, 1.0).unwrap();
        assert!(s.settled);
        let expected = -libm::log(1e-3);
        assert!((s.settle_time.unwrap() - expected).abs() <= dt + 1e-12, "{:?}", s.settle_time);
    }

    #[test]
    fn diverged_runs() {
        let mut traj = synthetic(grid(10, 0.1), vec![0.0; 10], 1.0);
        traj.divergence = Some(1.0);
        let step = StepSignal::new(1.0, 0.0).unwrap();
        assert!(!settling_detector(&traj, &step, 1e-3, 0.1).unwrap().settled);
        assert_eq!(residual_integral(&traj), Err(Error::Diverged { time: 1.0 }));
        assert!(matches!(area_decomposition(&traj, &step, &SettleCriteria::default()), Err(Error::Diverged { .. })));
    }

    #[test]
    fn short_run_is_not_settled() {
        let traj = synthetic(grid(11, 0.1), vec![1.0; 11], 1.0);
        let step = StepSignal::new(1.0, 0.0).unwrap();
        assert!(!settling_detector(&traj, &step, 1e-3, 5.0).unwrap().settled);
        assert!(settling_detector(&traj, &step, 0.0, 5.0).is_err());
        assert!(settling_detector(&traj, &step, 0.1, 0.0).is_err());
    }

    #[test]
    fn prediction_is_linear_in_inverse_gain() {
        let a = predicted_residual(1.0, 0.3, 0.4, 2.0);
        let b = predicted_residual(1.0, 0.3, 0.8, 2.0);
        assert_eq!(a, 2.0 * b);
        assert_eq!(predicted_residual(1.0, 0.0, 8.0, 1.0), 0.125);
    }

    #[test]
    fn soc_requires_capacity() {
        let traj = synthetic(grid(3, 0.1), vec![0.0; 3], 1.0);
        let step = StepSignal::new(1.0, 0.0).unwrap();
        assert!(soc_trace(&traj, &step, 0.0, 0.5).is_err());
        let soc = soc_trace(&traj, &step, 2.0, 0.5).unwrap();
        assert_abs_diff_eq!(*soc.soc.last().unwrap(), 0.5 - 0.2 / 2.0, epsilon = 1e-15);
    }
}
