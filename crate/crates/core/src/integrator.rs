//! Explicit Runge–Kutta integration of the augmented closed-loop ODE.
//!
//! Both solver modes report on a uniform time grid. The fixed-step mode
//! samples every `stride` steps; the adaptive Dormand–Prince 4(5) mode
//! interpolates accepted steps with cubic Hermite polynomials, so area
//! quadrature downstream never sees the solver's own step sequence.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    Rk4,
    /// Dormand–Prince 5(4) with PI step-size control.
    Rk45,
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverConfig {
    /// Integration scheme.
    pub method: Method,
    /// Step size for [`Method::Rk4`], seconds.
    pub step_size: f64,
    /// Absolute tolerance for [`Method::Rk45`].
    pub abs_tol: f64,
    /// Relative tolerance for [`Method::Rk45`].
    pub rel_tol: f64,
    /// Simulated span after the step onset, seconds.
    pub horizon: f64,
    /// Spacing of the reporting grid, seconds. For `Rk4` it is rounded to a
    /// whole number of steps.
    pub report_step: f64,
    /// Divergence is flagged when `‖x‖∞ > divergence_threshold · max(1, |r|)`.
    pub divergence_threshold: f64,
    /// Upper bound on attempted steps (accepted plus rejected).
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45,
            step_size: 1e-3,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            horizon: 100.0,
            report_step: 0.01,
            divergence_threshold: 1e6,
            max_steps: 10_000_000,
        }
    }
}

impl SolverConfig {
    /// Fixed-step RK4 reporting at every step.
    pub fn fixed(step_size: f64, horizon: f64) -> Self {
        Self {
            method: Method::Rk4,
            step_size,
            report_step: step_size,
            horizon,
            ..Self::default()
        }
    }

    /// Adaptive RK45 with `abs_tol = rel_tol = tol`.
    pub fn adaptive(tol: f64, horizon: f64, report_step: f64) -> Self {
        Self {
            method: Method::Rk45,
            abs_tol: tol,
            rel_tol: tol,
            horizon,
            report_step,
            ..Self::default()
        }
    }

    /// Same settings with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self { horizon, ..self.clone() }
    }

    /// Checks the range constraints of every field.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid!("{name} must be finite and > 0, got {v}"))
            }
        };
        positive("horizon", self.horizon)?;
        positive("report_step", self.report_step)?;
        positive("divergence_threshold", self.divergence_threshold)?;
        match self.method {
            Method::Rk4 => positive("step_size", self.step_size)?,
            Method::Rk45 => {
                positive("abs_tol", self.abs_tol)?;
                positive("rel_tol", self.rel_tol)?;
            }
        }
        if self.max_steps == 0 {
            return Err(invalid!("max_steps must be > 0"));
        }
        Ok(())
    }
}

/// Work counters reported alongside a solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverStats {
    /// Accepted steps.
    pub steps: usize,
    /// Rejected steps (adaptive mode only).
    pub rejected: usize,
    /// Right-hand-side evaluations.
    pub rhs_evals: usize,
}

/// Raw solver output on the reporting grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateHistory {
    /// Sample times, strictly increasing, starting at the initial time.
    pub times: Vec<f64>,
    /// State vector per sample.
    pub states: Vec<Vec<f64>>,
    /// Time at which divergence was detected, if any. Samples stop at the
    /// last grid point before it.
    pub divergence: Option<f64>,
    /// Work counters.
    pub stats: SolverStats,
}

/// Sampled closed-loop response.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample times; `times[0]` is the step onset.
    pub times: Vec<f64>,
    /// Plant state `x` per sample.
    pub states: Vec<Vec<f64>>,
    /// Control input `u` per sample.
    pub controls: Vec<f64>,
    /// Output `y = h(x)` per sample.
    pub outputs: Vec<f64>,
    /// Tracking error `e = r − y` per sample.
    pub errors: Vec<f64>,
    /// Running `∫ e dτ` from the step onset.
    pub error_integral: Vec<f64>,
    /// Divergence time if the run diverged.
    pub divergence: Option<f64>,
    /// Solver work counters.
    pub stats: SolverStats,
}

impl Trajectory {
    /// Whether divergence was detected.
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// True when the trajectory holds no samples.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Plant state dimension.
    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Last sample time.
    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NAN)
    }
}

/// True iff any component is non-finite or `‖state‖∞ > threshold · max(1, reference_scale)`.
pub fn detect_divergence(state: &[f64], reference_scale: f64, threshold: f64) -> bool {
    let limit = threshold * reference_scale.abs().max(1.0);
    state.iter().any(|v| !v.is_finite() || v.abs() > limit)
}

/// Integrates `ẋ = rhs(t, x)` from `t0` over `cfg.horizon`.
///
/// `reference_scale` feeds the divergence test (usually `|r|`). Divergence is
/// not an error: the returned history is truncated and carries the time.
pub fn integrate<F>(rhs: F, t0: f64, x0: &[f64], reference_scale: f64, cfg: &SolverConfig) -> Result<StateHistory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    if !t0.is_finite() {
        return Err(invalid!("initial time must be finite"));
    }
    if x0.is_empty() {
        return Err(invalid!("initial state is empty"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("initial state is not finite"));
    }
    let mut f0 = vec![0.0; x0.len()];
    rhs(t0, x0, &mut f0);
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("derivative at the initial state is not finite"));
    }
    match cfg.method {
        Method::Rk4 => rk4(&rhs, t0, x0, reference_scale, cfg),
        Method::Rk45 => dopri5(&rhs, t0, x0, f0, reference_scale, cfg),
    }
}

fn axpy_into(out: &mut [f64], base: &[f64], terms: &[(f64, &[f64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = base[i];
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o = acc;
    }
}

fn rk4<F>(rhs: &F, t0: f64, x0: &[f64], scale: f64, cfg: &SolverConfig) -> Result<StateHistory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let h = cfg.step_size;
    let total = libm::ceil(cfg.horizon / h - 1e-9).max(1.0);
    if total > cfg.max_steps as f64 {
        return Err(Error::StepBudget { max_steps: cfg.max_steps, time: t0 });
    }
    let total = total as usize;
    let stride = (libm::round(cfg.report_step / h) as usize).max(1);
    let t_end = t0 + cfg.horizon;

    let mut hist = StateHistory {
        times: vec![t0],
        states: vec![x0.to_vec()],
        divergence: None,
        stats: SolverStats::default(),
    };
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut x = x0.to_vec();
    for i in 0..total {
        let t = t0 + i as f64 * h;
        let t_next = if i + 1 == total { t_end } else { t0 + (i + 1) as f64 * h };
        let dt = t_next - t;
        rhs(t, &x, &mut k1);
        axpy_into(&mut tmp, &x, &[(0.5 * dt, &k1)]);
        rhs(t + 0.5 * dt, &tmp, &mut k2);
        axpy_into(&mut tmp, &x, &[(0.5 * dt, &k2)]);
        rhs(t + 0.5 * dt, &tmp, &mut k3);
        axpy_into(&mut tmp, &x, &[(dt, &k3)]);
        rhs(t_next, &tmp, &mut k4);
        for j in 0..n {
            x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        hist.stats.steps += 1;
        hist.stats.rhs_evals += 4;
        if detect_divergence(&x, scale, cfg.divergence_threshold) {
            hist.divergence = Some(t_next);
            return Ok(hist);
        }
        if (i + 1) % stride == 0 || i + 1 == total {
            hist.times.push(t_next);
            hist.states.push(x.clone());
        }
    }
    Ok(hist)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;
const PI_EXPO: f64 = 0.2 - 0.75 * PI_BETA;

fn err_weight(atol: f64, rtol: f64, a: f64, b: f64) -> f64 {
    atol + rtol * a.abs().max(b.abs())
}

fn initial_step<F>(rhs: &F, t0: f64, x0: &[f64], f0: &[f64], cfg: &SolverConfig) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..n {
        let sk = err_weight(cfg.abs_tol, cfg.rel_tol, x0[i], 0.0);
        d0 += (x0[i] / sk) * (x0[i] / sk);
        d1 += (f0[i] / sk) * (f0[i] / sk);
    }
    d0 = libm::sqrt(d0 / n as f64);
    d1 = libm::sqrt(d1 / n as f64);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.horizon);
    let x1: Vec<f64> = x0.iter().zip(f0).map(|(x, f)| x + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + h0, &x1, &mut f1);
    let mut d2 = 0.0;
    for i in 0..n {
        let sk = err_weight(cfg.abs_tol, cfg.rel_tol, x0[i], 0.0);
        let v = (f1[i] - f0[i]) / sk;
        d2 += v * v;
    }
    let d2 = libm::sqrt(d2 / n as f64) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (1e-6_f64).max(h0 * 1e-3)
    } else {
        libm::pow(0.01 / d1.max(d2), 1.0 / 5.0)
    };
    if h1.is_finite() {
        (100.0 * h0).min(h1).min(cfg.horizon)
    } else {
        h0
    }
}

fn hermite(out: &mut [f64], y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], h: f64, theta: f64) {
    // Difference form: reproduces y0 exactly when y1 = y0 and f0 = f1 = 0.
    let w = theta * (theta - 1.0);
    for i in 0..out.len() {
        let dy = y1[i] - y0[i];
        out[i] = y0[i] + theta * dy + w * ((1.0 - 2.0 * theta) * dy + (theta - 1.0) * h * f0[i] + theta * h * f1[i]);
    }
}

fn dopri5<F>(rhs: &F, t0: f64, x0: &[f64], f0: Vec<f64>, scale: f64, cfg: &SolverConfig) -> Result<StateHistory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let t_end = t0 + cfg.horizon;
    let grid_len = libm::floor(cfg.horizon / cfg.report_step + 1e-9) as usize;
    let grid_time = |j: usize| if j > grid_len { t_end } else { t0 + j as f64 * cfg.report_step };
    // The final horizon point is always reported, even off-grid.
    let last_index = if grid_time(grid_len) < t_end - 1e-12 * t_end.abs().max(1.0) { grid_len + 1 } else { grid_len };

    let mut hist = StateHistory {
        times: vec![t0],
        states: vec![x0.to_vec()],
        divergence: None,
        stats: SolverStats { rhs_evals: 1, ..SolverStats::default() },
    };
    let mut next_grid = 1usize;

    let mut h = initial_step(rhs, t0, x0, &f0, cfg);
    hist.stats.rhs_evals += 1;
    let mut t = t0;
    let mut y = x0.to_vec();
    let mut k1 = f0;
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut y_new = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut dense = vec![0.0; n];
    let mut err_prev: f64 = 1e-4;
    let mut attempts = 0usize;
    let mut last_rejected = false;

    while t < t_end {
        if attempts >= cfg.max_steps {
            return Err(Error::StepBudget { max_steps: cfg.max_steps, time: t });
        }
        attempts += 1;
        if t + h > t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { time: t });
        }

        axpy_into(&mut tmp, &y, &[(h * A21, &k1)]);
        rhs(t + C2 * h, &tmp, &mut k2);
        axpy_into(&mut tmp, &y, &[(h * A31, &k1), (h * A32, &k2)]);
        rhs(t + C3 * h, &tmp, &mut k3);
        axpy_into(&mut tmp, &y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]);
        rhs(t + C4 * h, &tmp, &mut k4);
        axpy_into(&mut tmp, &y, &[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]);
        rhs(t + C5 * h, &tmp, &mut k5);
        axpy_into(&mut tmp, &y, &[(h * A61, &k1), (h * A62, &k2), (h * A63, &k3), (h * A64, &k4), (h * A65, &k5)]);
        rhs(t + h, &tmp, &mut k6);
        axpy_into(&mut y_new, &y, &[(h * A71, &k1), (h * A73, &k3), (h * A74, &k4), (h * A75, &k5), (h * A76, &k6)]);
        rhs(t + h, &y_new, &mut k7);
        hist.stats.rhs_evals += 6;

        let mut err = 0.0f64;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let w = err_weight(cfg.abs_tol, cfg.rel_tol, y[i], y_new[i]);
            err = err.max((e / w).abs());
        }
        if !err.is_finite() {
            // A trial stage left the finite range; retry with a much smaller step.
            hist.stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            let t_new = if h == t_end - t { t_end } else { t + h };
            hist.stats.steps += 1;
            // Dense output onto the reporting grid.
            while next_grid <= last_index && grid_time(next_grid) <= t_new {
                let tg = grid_time(next_grid);
                if tg >= t_new {
                    dense.copy_from_slice(&y_new);
                } else {
                    hermite(&mut dense, &y, &k1, &y_new, &k7, h, (tg - t) / h);
                }
                hist.times.push(tg);
                hist.states.push(dense.clone());
                next_grid += 1;
            }
            if detect_divergence(&y_new, scale, cfg.divergence_threshold) {
                // Grid samples past the divergence time are dropped.
                while hist.times.len() > 1 && detect_divergence(hist.states.last().unwrap(), scale, cfg.divergence_threshold) {
                    hist.times.pop();
                    hist.states.pop();
                }
                hist.divergence = Some(t_new);
                return Ok(hist);
            }
            core::mem::swap(&mut y, &mut y_new);
            core::mem::swap(&mut k1, &mut k7);
            t = t_new;

            let err_c = err.max(1e-10);
            let mut fac = libm::pow(err_c, PI_EXPO) / libm::pow(err_prev, PI_BETA) / SAFETY;
            fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            err_prev = err_c;
            last_rejected = false;
            h = h_new.min(cfg.horizon);
        } else {
            hist.stats.rejected += 1;
            let fac = (libm::pow(err, PI_EXPO) / SAFETY).min(1.0 / FAC_MIN);
            h /= fac;
            last_rejected = true;
        }
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn decay(_t: f64, x: &[f64], dx: &mut [f64]) {
        dx[0] = -x[0];
    }

    #[test]
    fn rk4_exponential_decay() {
        let h = integrate(decay, 0.0, &[1.0], 1.0, &SolverConfig::fixed(0.01, 1.0)).unwrap();
        assert_abs_diff_eq!(*h.times.last().unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.states.last().unwrap()[0], libm::exp(-1.0), epsilon = 1e-6);
        assert_eq!(h.times.len(), 101);
    }

    #[test]
    fn constant_solution_is_exact() {
        let zero = |_t: f64, _x: &[f64], dx: &mut [f64]| dx[0] = 0.0;
        for cfg in [SolverConfig::fixed(0.1, 5.0), SolverConfig::adaptive(1e-8, 5.0, 0.1)] {
            let h = integrate(zero, 0.0, &[3.0], 3.0, &cfg).unwrap();
            assert!(h.states.iter().all(|s| s[0] == 3.0));
        }
    }

    #[test]
    fn finite_escape_is_flagged_near_one() {
        let sq = |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0];
        for cfg in [SolverConfig::fixed(1e-3, 2.0), SolverConfig::adaptive(1e-8, 2.0, 0.01)] {
            let h = integrate(sq, 0.0, &[1.0], 1.0, &cfg).unwrap();
            let td = h.divergence.expect("must diverge");
            assert!((td - 1.0).abs() < 5e-3, "divergence time {td}");
            assert!(h.states.iter().all(|s| s[0].is_finite()));
            assert!(*h.times.last().unwrap() <= td);
        }
    }

    #[test]
    fn divergence_predicate() {
        assert!(!detect_divergence(&[5.0, 0.0], 5.0, 1e6));
        assert!(detect_divergence(&[f64::NAN, 0.0], 5.0, 1e6));
        assert!(detect_divergence(&[2e7, 0.0], 5.0, 1e6));
        assert!(detect_divergence(&[f64::INFINITY], 0.0, 1e6));
        // The scale never drops below one.
        assert!(detect_divergence(&[2e6], 0.1, 1e6));
    }

    #[test]
    fn adaptive_respects_tolerance_on_oscillator() {
        let osc = |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        };
        let h = integrate(osc, 0.0, &[1.0, 0.0], 1.0, &SolverConfig::adaptive(1e-10, 10.0, 0.05)).unwrap();
        for (t, s) in h.times.iter().zip(&h.states) {
            // Hermite interpolation is third order, so interior points are looser than step ends.
            assert_abs_diff_eq!(s[0], libm::cos(*t), epsilon = 1e-6);
        }
        assert_abs_diff_eq!(h.states.last().unwrap()[0], libm::cos(10.0), epsilon = 1e-8);
        assert!(h.stats.steps > 0);
    }

    #[test]
    fn off_grid_horizon_ends_exactly() {
        let h = integrate(decay, 0.0, &[1.0], 1.0, &SolverConfig::adaptive(1e-9, 1.005, 0.01)).unwrap();
        assert_eq!(*h.times.last().unwrap(), 1.005);
        assert!(h.times.windows(2).all(|w| w[1] > w[0]));
        let h = integrate(decay, 0.0, &[1.0], 1.0, &SolverConfig::fixed(0.3, 1.0)).unwrap();
        assert_eq!(*h.times.last().unwrap(), 1.0);
        assert_abs_diff_eq!(h.states.last().unwrap()[0], libm::exp(-1.0), epsilon = 1e-3);
    }

    #[test]
    fn errors_are_distinct() {
        let bad = |_t: f64, _x: &[f64], dx: &mut [f64]| dx[0] = f64::NAN;
        assert!(matches!(integrate(bad, 0.0, &[1.0], 1.0, &SolverConfig::default()), Err(Error::InvalidInput(_))));
        let cfg = SolverConfig { max_steps: 10, ..SolverConfig::fixed(0.01, 1.0) };
        assert!(matches!(integrate(decay, 0.0, &[1.0], 1.0, &cfg), Err(Error::StepBudget { .. })));
        let cfg = SolverConfig { max_steps: 5, ..SolverConfig::adaptive(1e-12, 100.0, 0.1) };
        assert!(matches!(integrate(decay, 0.0, &[1.0], 1.0, &cfg), Err(Error::StepBudget { .. })));
        let cfg = SolverConfig { horizon: -1.0, ..SolverConfig::default() };
        assert!(matches!(integrate(decay, 0.0, &[1.0], 1.0, &cfg), Err(Error::InvalidInput(_))));
    }
}
