//! Integral-gain bounds.
//!
//! Three independent routes:
//!
//! * sufficient bounds from Lyapunov constants `c₁..c₄` of the uncompensated
//!   plant (`4c₃/(1 + c₄)²`, and the normal-form variant with the internal
//!   dynamics sensitivity `‖dη_u/du‖`), or a grid certificate `σ` from class-𝒦
//!   bounds `α₃`, `α₄`;
//! * the exact Routh–Hurwitz range of the linearised mass-spring-damper loop;
//! * an empirical boundary found by simulating and bisecting on `λ`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::compensator::{close_loop, open_loop, CompensatorConfig, StepSignal};
use crate::error::{invalid, Error, Result};
use crate::integrator::{SolverConfig, Trajectory};
use crate::metrics::{settling_detector, SettleCriteria};
use crate::plants::{check_msd_params, PlantModel};

/// Provenance of a sufficient exponential bound.
pub const METHOD_THEOREM1: &str = "theorem1";
/// Provenance of the grid `σ` certificate.
pub const METHOD_THEOREM2: &str = "theorem2-grid";
/// Provenance of the higher-order (normal form) bound.
pub const METHOD_SECTION4: &str = "section4";
/// Provenance of the linearised bound.
pub const METHOD_ROUTH: &str = "routh-hurwitz";
/// Provenance of the simulated boundary.
pub const METHOD_BISECTION: &str = "bisection";

/// Quadratic Lyapunov bounds `c₁|ē|² ≤ V ≤ c₂|ē|²`, `V̇ ≤ −c₃|ē|²`, `|∂V/∂ē| ≤ c₄|ē|`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LyapunovConstants {
    /// Lower quadratic bound on `V`.
    pub c1: f64,
    /// Upper quadratic bound on `V`.
    pub c2: f64,
    /// Decay rate bound.
    pub c3: f64,
    /// Gradient bound.
    pub c4: f64,
}

impl LyapunovConstants {
    /// Validated constants: all positive and `c1 ≤ c2`.
    pub fn new(c1: f64, c2: f64, c3: f64, c4: f64) -> Result<Self> {
        for (name, v) in [("c1", c1), ("c2", c2), ("c3", c3), ("c4", c4)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid!("{name} must be finite and > 0, got {v}"));
            }
        }
        if c1 > c2 {
            return Err(invalid!("c1 = {c1} exceeds c2 = {c2}"));
        }
        Ok(Self { c1, c2, c3, c4 })
    }
}

/// `4c₃/(1 + c₄)²`.
pub fn lambda_bound_exponential(c: &LyapunovConstants) -> f64 {
    let d = 1.0 + c.c4;
    4.0 * c.c3 / (d * d)
}

/// `4c₃/[1 + c₄(1 + ‖dη_u/du‖_max)]²`.
pub fn lambda_bound_higher_order(c: &LyapunovConstants, deta_du_norm_max: f64) -> Result<f64> {
    if !(deta_du_norm_max.is_finite() && deta_du_norm_max >= 0.0) {
        return Err(invalid!("‖dη_u/du‖_max must be finite and ≥ 0, got {deta_du_norm_max}"));
    }
    let d = 1.0 + c.c4 * (1.0 + deta_du_norm_max);
    Ok(4.0 * c.c3 / (d * d))
}

/// Constants of the saturated mass-spring-damper.
pub fn msd_constants(omega_n: f64, zeta: f64, beta_sq: f64) -> Result<LyapunovConstants> {
    check_msd_params(omega_n, zeta)?;
    if !(beta_sq.is_finite() && beta_sq > 0.0) {
        return Err(invalid!("beta_sq must be finite and > 0, got {beta_sq}"));
    }
    let w2 = omega_n * omega_n;
    let s = 1.0 + w2;
    let c1 = 0.5 * (s - libm::sqrt(s * s - 4.0 * w2 * (1.0 - zeta * zeta)));
    let c2 = 0.5 * (1.0 + w2 * (1.0 + beta_sq));
    let c3 = zeta * omega_n * c1;
    let stiff = w2 * (1.0 + beta_sq);
    let c4 = libm::sqrt(1.0 + zeta * zeta * w2 + stiff * stiff);
    LyapunovConstants::new(c1, c2, c3, c4)
}

/// Constants of `ẋ = −g(x)(x − u)` with `g ≥ b` and `V = ē²/2`.
pub fn affine_constants(b: f64) -> Result<LyapunovConstants> {
    if !(b.is_finite() && b > 0.0) {
        return Err(invalid!("lower bound b of g must be finite and > 0, got {b}"));
    }
    LyapunovConstants::new(0.5, 0.5, b, 1.0)
}

/// Routh–Hurwitz test for `s³ + a2·s² + a1·s + a0`. Marginal cases are not stable.
pub fn routh_hurwitz_cubic(a2: f64, a1: f64, a0: f64) -> bool {
    a2 > 0.0 && a1 > 0.0 && a0 > 0.0 && a2 * a1 > a0
}

/// Coefficients `(a2, a1, a0)` of the mass-spring-damper loop linearised at `x = r`.
pub fn msd_linearized_coefficients(omega_n: f64, zeta: f64, lambda: f64) -> (f64, f64, f64) {
    let w2 = omega_n * omega_n;
    (2.0 * zeta * omega_n, w2, w2 * lambda)
}

/// Largest `λ` for which the linearised mass-spring-damper loop is stable: `2ζω_n`.
pub fn msd_linearized_lambda_max(omega_n: f64, zeta: f64) -> Result<f64> {
    check_msd_params(omega_n, zeta)?;
    Ok(2.0 * zeta * omega_n)
}

type ClassK = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Class-𝒦 bounds `V̇ ≤ −α₃(|ē|)`, `|∂V/∂ē| ≤ α₄(|ē|)` sampled on a grid.
pub struct ClassKPair {
    alpha3: ClassK,
    alpha4: ClassK,
    grid: Vec<f64>,
}

impl core::fmt::Debug for ClassKPair {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ClassKPair").field("grid_len", &self.grid.len()).finish()
    }
}

/// `count` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (libm::log10(lo), libm::log10(hi));
    if count == 1 {
        return alloc::vec![lo];
    }
    (0..count).map(|i| libm::pow(10.0, a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}

impl ClassKPair {
    /// Validates the pair on `grid`: both vanish at zero and increase strictly.
    pub fn new<A3, A4>(alpha3: A3, alpha4: A4, grid: Vec<f64>) -> Result<Self>
    where
        A3: Fn(f64) -> f64 + Send + Sync + 'static,
        A4: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if grid.is_empty() {
            return Err(invalid!("class-K grid is empty"));
        }
        if grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid!("class-K grid points must be finite and > 0"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid!("class-K grid must be strictly increasing"));
        }
        for (name, f) in [("alpha3", &alpha3 as &dyn Fn(f64) -> f64), ("alpha4", &alpha4)] {
            if f(0.0) != 0.0 {
                return Err(invalid!("{name}(0) must be 0"));
            }
            let mut prev = 0.0;
            for &s in &grid {
                let v = f(s);
                if !(v.is_finite() && v > prev) {
                    return Err(invalid!("{name} is not strictly increasing at s = {s}"));
                }
                prev = v;
            }
        }
        Ok(Self { alpha3: Box::new(alpha3), alpha4: Box::new(alpha4), grid })
    }

    /// Uses 200 log-spaced points on `[1e-4, 1e4]`.
    pub fn with_default_grid<A3, A4>(alpha3: A3, alpha4: A4) -> Result<Self>
    where
        A3: Fn(f64) -> f64 + Send + Sync + 'static,
        A4: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(alpha3, alpha4, log_grid(1e-4, 1e4, 200))
    }

    /// Quadratic pair `α₃ = c₃s²`, `α₄ = c₄s` from exponential constants.
    pub fn from_constants(c: &LyapunovConstants) -> Result<Self> {
        let (c3, c4) = (c.c3, c.c4);
        Self::with_default_grid(move |s| c3 * s * s, move |s| c4 * s)
    }

    /// Sample points.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `α₃(s) / (¼[α₄(s) + s]² + α₄(s)·s)`.
    pub fn ratio(&self, s: f64) -> f64 {
        let a3 = (self.alpha3)(s);
        let a4 = (self.alpha4)(s);
        let w = a4 + s;
        a3 / (0.25 * w * w + a4 * s)
    }
}

/// Outcome of the grid search for `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SigmaVerdict {
    /// Interior positive minimum: a numerical certificate on the grid.
    Certified,
    /// The ratio still falls at a grid edge, so no positive lower bound is evident.
    DecreasingAtGridEdge,
    /// Some ratio was not positive.
    HypothesisViolated,
}

/// Grid infimum of the `σ` ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigmaCertificate {
    /// Infimum on the grid, zero if the hypothesis is violated.
    pub sigma: f64,
    /// Grid point attaining the infimum.
    pub argmin: f64,
    /// Verdict.
    pub verdict: SigmaVerdict,
}

impl SigmaCertificate {
    /// `λ` range `(0, σ)` if certified.
    pub fn lambda_range(&self) -> Option<(f64, f64)> {
        (self.verdict == SigmaVerdict::Certified && self.sigma > 0.0).then_some((0.0, self.sigma))
    }
}

/// Relative fall between neighbouring edge samples that counts as still decreasing.
const EDGE_TREND: f64 = 1e-9;

/// Grid infimum of `α₃(s)/(¼[α₄(s) + s]² + α₄(s)s)`; a numerical certificate, not a proof.
pub fn sigma_bound(pair: &ClassKPair) -> SigmaCertificate {
    let ratios: Vec<f64> = pair.grid.iter().map(|&s| pair.ratio(s)).collect();
    let mut best = 0usize;
    for (i, &q) in ratios.iter().enumerate() {
        if !(q.is_finite() && q > 0.0) {
            return SigmaCertificate { sigma: 0.0, argmin: pair.grid[i], verdict: SigmaVerdict::HypothesisViolated };
        }
        if q < ratios[best] {
            best = i;
        }
    }
    let sigma = ratios[best];
    let n = ratios.len();
    let falling_low = n > 1 && ratios[0] < ratios[1] * (1.0 - EDGE_TREND);
    let falling_high = n > 1 && ratios[n - 1] < ratios[n - 2] * (1.0 - EDGE_TREND);
    let verdict = if falling_low || falling_high { SigmaVerdict::DecreasingAtGridEdge } else { SigmaVerdict::Certified };
    SigmaCertificate { sigma, argmin: pair.grid[best], verdict }
}

/// Closed-form `σ` for the quadratic pair `(c₃s², c₄s)`: `c₃/(¼(1 + c₄)² + c₄)`.
pub fn sigma_quadratic(c3: f64, c4: f64) -> f64 {
    let d = 1.0 + c4;
    c3 / (0.25 * d * d + c4)
}

/// Classification of one closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Stability {
    /// Settled.
    Stable,
    /// Diverged, or not settled with a growing error envelope.
    Unstable,
    /// Neither, even on the extended horizon.
    Inconclusive,
}

/// Simulated stability boundary `[stable_max, unstable_min]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalBoundary {
    /// Largest gain classified stable.
    pub stable_max: f64,
    /// Smallest gain classified unstable.
    pub unstable_min: f64,
    /// Gains that stayed inconclusive; they lie inside the interval.
    pub inconclusive: Vec<f64>,
    /// Classification horizon before extension, seconds.
    pub horizon: f64,
    /// Number of simulated probes.
    pub probes: usize,
}

impl EmpiricalBoundary {
    /// Interval width.
    pub fn width(&self) -> f64 {
        self.unstable_min - self.stable_max
    }

    /// Whether `lambda` lies in the closed interval.
    pub fn contains(&self, lambda: f64) -> bool {
        self.stable_max <= lambda && lambda <= self.unstable_min
    }
}

/// Multiplier from open-loop settling time to classification horizon.
pub const HORIZON_FACTOR: f64 = 50.0;
/// Horizon extension applied once to inconclusive runs.
pub const EXTENSION_FACTOR: f64 = 4.0;

/// Shared settings of the simulate-and-classify probes.
#[derive(Debug, Clone)]
pub struct BoundaryProbe<'a> {
    /// Plant under test.
    pub plant: &'a PlantModel,
    /// Feedforward gain.
    pub alpha: f64,
    /// Step reference.
    pub step: StepSignal,
    /// Solver; its horizon is replaced by the classification horizon.
    pub solver: &'a SolverConfig,
    /// Settling criteria.
    pub settle: SettleCriteria,
}

fn peak_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn growing(traj: &Trajectory) -> bool {
    let n = traj.errors.len();
    if n < 8 {
        return false;
    }
    let q = n / 4;
    let late = peak_abs(&traj.errors[n - q..]);
    let earlier = peak_abs(&traj.errors[n - 2 * q..n - q]);
    late > earlier
}

impl BoundaryProbe<'_> {
    /// Classification horizon: `HORIZON_FACTOR ×` the open-loop settling time
    /// with `u = k·r`, or the solver horizon if the open loop does not settle
    /// within it.
    pub fn classification_horizon(&self) -> Result<f64> {
        let u = self.plant.inverse_dc_gain() * self.step.amplitude;
        let traj = open_loop(self.plant, self.step, u)?.simulate(self.solver)?;
        let s = settling_detector(&traj, &self.step, self.settle.band, self.settle.window)?;
        Ok(match s.settle_time {
            Some(t) if s.settled => HORIZON_FACTOR * (t - self.step.onset).max(self.settle.window),
            _ => self.solver.horizon,
        })
    }

    fn run(&self, lambda: f64, horizon: f64) -> Result<Trajectory> {
        let cfg = CompensatorConfig::new(self.alpha, lambda);
        close_loop(self.plant, &cfg, self.step)?.simulate(&self.solver.with_horizon(horizon))
    }

    fn verdict(&self, traj: &Trajectory) -> Result<Option<Stability>> {
        if traj.diverged() {
            return Ok(Some(Stability::Unstable));
        }
        let s = settling_detector(traj, &self.step, self.settle.band, self.settle.window)?;
        Ok(s.settled.then_some(Stability::Stable))
    }

    /// Simulate and classify one gain, extending the horizon once.
    pub fn classify(&self, lambda: f64, horizon: f64) -> Result<Stability> {
        if let Some(v) = self.verdict(&self.run(lambda, horizon)?)? {
            return Ok(v);
        }
        let traj = self.run(lambda, EXTENSION_FACTOR * horizon)?;
        if let Some(v) = self.verdict(&traj)? {
            return Ok(v);
        }
        Ok(if growing(&traj) { Stability::Unstable } else { Stability::Inconclusive })
    }
}

/// Bisects on `λ` over `lambda_range = (lo, hi)` until the bracket is at most
/// `bisection_tol` wide.
///
/// `lo` must classify stable and `hi` unstable. An inconclusive probe splits
/// the search: the stable side is bisected below it and the unstable side
/// above it, so the returned interval widens to contain it.
pub fn empirical_lambda_boundary(probe: &BoundaryProbe<'_>, lambda_range: (f64, f64), bisection_tol: f64) -> Result<EmpiricalBoundary> {
    let (lo, hi) = lambda_range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
        return Err(invalid!("lambda range must satisfy 0 < lo < hi, got [{lo}, {hi}]"));
    }
    if !(bisection_tol > 0.0) {
        return Err(invalid!("bisection tolerance must be > 0"));
    }
    let horizon = probe.classification_horizon()?;
    let mut probes = 0usize;
    let mut classify = |l: f64| {
        probes += 1;
        probe.classify(l, horizon)
    };
    match classify(lo)? {
        Stability::Stable => {}
        other => return Err(invalid!("lower endpoint lambda = {lo} classified {other:?}, expected stable")),
    }
    match classify(hi)? {
        Stability::Unstable => {}
        other => return Err(invalid!("upper endpoint lambda = {hi} classified {other:?}, expected unstable")),
    }

    let mut inconclusive = Vec::new();
    // (stable side lo, stable side hi) and (unstable side lo, unstable side hi).
    let (mut s_lo, mut s_hi) = (lo, hi);
    let (mut u_lo, mut u_hi) = (lo, hi);
    let mut split = false;
    while !split && s_hi - s_lo > bisection_tol {
        let mid = 0.5 * (s_lo + s_hi);
        match classify(mid)? {
            Stability::Stable => s_lo = mid,
            Stability::Unstable => s_hi = mid,
            Stability::Inconclusive => {
                inconclusive.push(mid);
                split = true;
                (u_lo, u_hi) = (mid, s_hi);
                s_hi = mid;
            }
        }
    }
    if !split {
        return Ok(EmpiricalBoundary { stable_max: s_lo, unstable_min: s_hi, inconclusive, horizon, probes });
    }
    // Stable side: anything not stable moves the upper limit down.
    while s_hi - s_lo > bisection_tol {
        let mid = 0.5 * (s_lo + s_hi);
        match classify(mid)? {
            Stability::Stable => s_lo = mid,
            Stability::Inconclusive => {
                inconclusive.push(mid);
                s_hi = mid;
            }
            Stability::Unstable => s_hi = mid,
        }
    }
    // Unstable side: anything not unstable moves the lower limit up.
    while u_hi - u_lo > bisection_tol {
        let mid = 0.5 * (u_lo + u_hi);
        match classify(mid)? {
            Stability::Unstable => u_hi = mid,
            Stability::Inconclusive => {
                inconclusive.push(mid);
                u_lo = mid;
            }
            Stability::Stable => u_lo = mid,
        }
    }
    inconclusive.sort_by(f64::total_cmp);
    Ok(EmpiricalBoundary { stable_max: s_lo, unstable_min: u_hi, inconclusive, horizon, probes })
}

/// Collected bounds for one plant.
///
/// Sufficient bounds from different hypotheses are reported side by side.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StabilityReport {
    /// Sufficient exponential-stability bound.
    pub lambda_sufficient: f64,
    /// Provenance of `lambda_sufficient`.
    pub sufficient_method: &'static str,
    /// Constants behind the sufficient bound.
    pub constants: LyapunovConstants,
    /// Grid `σ` certificate from the quadratic class-𝒦 pair of the constants.
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub sigma: Option<SigmaCertificate>,
    /// Exact linearised bound, absent when the linearisation is stable for all `λ > 0`.
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub lambda_linearized: Option<f64>,
    /// Simulated bracket.
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub lambda_empirical: Option<EmpiricalBoundary>,
    /// Provenance strings of every populated bound.
    pub methods: Vec<&'static str>,
}

impl StabilityReport {
    /// Report from Lyapunov constants with an optional normal-form sensitivity.
    pub fn from_constants(constants: LyapunovConstants, deta_du_norm_max: Option<f64>) -> Result<Self> {
        let (lambda_sufficient, sufficient_method) = match deta_du_norm_max {
            Some(norm) => (lambda_bound_higher_order(&constants, norm)?, METHOD_SECTION4),
            None => (lambda_bound_exponential(&constants), METHOD_THEOREM1),
        };
        let sigma = sigma_bound(&ClassKPair::from_constants(&constants)?);
        Ok(Self {
            lambda_sufficient,
            sufficient_method,
            constants,
            sigma: Some(sigma),
            lambda_linearized: None,
            lambda_empirical: None,
            methods: alloc::vec![sufficient_method, METHOD_THEOREM2],
        })
    }

    /// Adds the Routh–Hurwitz bound.
    pub fn with_linearized(mut self, lambda_max: f64) -> Self {
        self.lambda_linearized = Some(lambda_max);
        self.methods.push(METHOD_ROUTH);
        self
    }

    /// Adds the bisection bracket.
    pub fn with_empirical(mut self, boundary: EmpiricalBoundary) -> Self {
        self.lambda_empirical = Some(boundary);
        self.methods.push(METHOD_BISECTION);
        self
    }
}

/// Error for plants without a known Lyapunov construction.
pub fn unsupported_plant(label: &str) -> Error {
    Error::Unsupported(alloc::format!("no Lyapunov constants are available for plant {label}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_bound_values() {
        let c = LyapunovConstants::new(0.3, 11.0, 0.21, 21.04).unwrap();
        assert!((lambda_bound_exponential(&c) - 0.00173).abs() < 1e-5);
        let unit = LyapunovConstants::new(0.5, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(lambda_bound_exponential(&unit), 1.0);
        let affine = affine_constants(3.5).unwrap();
        assert_eq!(lambda_bound_exponential(&affine), 3.5);
    }

    #[test]
    fn higher_order_bound_values() {
        let unit = LyapunovConstants::new(0.5, 0.5, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(lambda_bound_higher_order(&unit, 1.0).unwrap(), 4.0 / 9.0, epsilon = 1e-15);
        assert_eq!(lambda_bound_higher_order(&unit, 0.0).unwrap(), lambda_bound_exponential(&unit));
        assert!(lambda_bound_higher_order(&unit, -1.0).is_err());
    }

    #[test]
    fn msd_constant_values() {
        let c = msd_constants(1.0, 0.7, 20.0).unwrap();
        assert_abs_diff_eq!(c.c1, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c2, 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c3, 0.21, epsilon = 1e-12);
        assert!((21.0..21.1).contains(&c.c4));
        assert!(msd_constants(1.0, 1.2, 20.0).is_err());
        assert!(msd_constants(1.0, 0.7, 0.0).is_err());
    }

    #[test]
    fn affine_constant_values() {
        assert_eq!(affine_constants(1.0).unwrap(), LyapunovConstants { c1: 0.5, c2: 0.5, c3: 1.0, c4: 1.0 });
        assert!(affine_constants(0.0).is_err());
        assert!(LyapunovConstants::new(2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn routh_hurwitz_cases() {
        let (a2, a1, a0) = msd_linearized_coefficients(1.0, 0.7, 1.0);
        assert!(routh_hurwitz_cubic(a2, a1, a0));
        let (a2, a1, a0) = msd_linearized_coefficients(1.0, 0.7, 2.0);
        assert!(!routh_hurwitz_cubic(a2, a1, a0));
        assert!(!routh_hurwitz_cubic(1.0, 1.0, 1.0));
        assert!(!routh_hurwitz_cubic(-1.0, 1.0, 0.5));
    }

    #[test]
    fn linearized_max_values() {
        assert_eq!(msd_linearized_lambda_max(1.0, 0.7).unwrap(), 1.4);
        assert_eq!(msd_linearized_lambda_max(2.0, 0.5).unwrap(), 2.0);
        assert!(msd_linearized_lambda_max(-1.0, 0.5).is_err());
    }

    #[test]
    fn sigma_cases() {
        let unit = ClassKPair::with_default_grid(|s| s * s, |s| s).unwrap();
        let cert = sigma_bound(&unit);
        assert_abs_diff_eq!(cert.sigma, 0.5, epsilon = 1e-14);
        assert_eq!(cert.verdict, SigmaVerdict::Certified);

        let linear = ClassKPair::with_default_grid(|s| s, |s| s).unwrap();
        let cert = sigma_bound(&linear);
        assert_eq!(cert.verdict, SigmaVerdict::DecreasingAtGridEdge);
        assert_eq!(cert.argmin, 1e4_f64.max(*linear.grid().last().unwrap()));
        assert!(cert.lambda_range().is_none());
        // Extending the grid keeps pushing the infimum down.
        let wider = ClassKPair::new(|s| s, |s| s, log_grid(1e-4, 1e8, 300)).unwrap();
        assert!(sigma_bound(&wider).sigma < cert.sigma);
    }

    #[test]
    fn class_k_validation() {
        assert!(ClassKPair::with_default_grid(|s| s * s + 1.0, |s| s).is_err());
        assert!(ClassKPair::with_default_grid(|s| -s, |s| s).is_err());
        assert!(ClassKPair::new(|s| s, |s| s, alloc::vec![]).is_err());
        assert!(ClassKPair::new(|s| s, |s| s, alloc::vec![1.0, 0.5]).is_err());
        assert!(ClassKPair::new(|s| s, |s| s, alloc::vec![-1.0, 0.5]).is_err());
    }

    #[test]
    fn report_carries_methods() {
        let c = msd_constants(1.0, 0.7, 20.0).unwrap();
        let r = StabilityReport::from_constants(c, Some(0.0)).unwrap().with_linearized(1.4);
        assert_eq!(r.methods, [METHOD_SECTION4, METHOD_THEOREM2, METHOD_ROUTH]);
        assert!(r.lambda_sufficient < r.lambda_linearized.unwrap());
    }
}
