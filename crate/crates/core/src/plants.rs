//! Plant catalog.
//!
//! Every plant is a SISO system `ẋ = f(x, u)`, `y = h(x)` with a known
//! equilibrium map `u ↦ x_u` and inverse DC gain `k` (`h(x_u) = u/k`).

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;

use crate::error::{invalid, Error, Result};

/// Step inputs on which equilibrium consistency is checked.
pub const VALIDATION_INPUTS: [f64; 5] = [-5.0, -1.0, 0.0, 1.0, 5.0];

const EQUILIBRIUM_TOL: f64 = 1e-9;

/// A single-input single-output plant.
pub trait Plant: Send + Sync {
    /// State dimension `n`.
    fn dim(&self) -> usize;
    /// Writes `f(x, u)` into `dx`.
    fn dynamics(&self, x: &[f64], u: f64, dx: &mut [f64]);
    /// Output map `h(x)`.
    fn output(&self, x: &[f64]) -> f64;
    /// Inverse DC gain `k`.
    fn inverse_dc_gain(&self) -> f64;
    /// Equilibrium state for a constant input `u`.
    fn equilibrium(&self, u: f64) -> Vec<f64>;
    /// Human-readable descriptor.
    fn label(&self) -> String;
}

/// Shared, immutable handle to a plant.
#[derive(Clone)]
pub struct PlantModel(Arc<dyn Plant>);

impl PlantModel {
    /// Wraps any [`Plant`] implementation.
    pub fn new<P: Plant + 'static>(plant: P) -> Self {
        Self(Arc::new(plant))
    }

    /// Evaluates the dynamics into a fresh vector.
    pub fn derivative(&self, x: &[f64], u: f64) -> Vec<f64> {
        let mut dx = vec![0.0; self.dim()];
        self.dynamics(x, u, &mut dx);
        dx
    }
}

impl Deref for PlantModel {
    type Target = dyn Plant;

    fn deref(&self) -> &Self::Target {
        &*self.0
    }
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel").field("label", &self.label()).field("dim", &self.dim()).finish()
    }
}

/// Saturated spring stiffness `f(z) = z²` for `z < β`, `β²` for `z ≥ β`.
///
/// The one-sided form leaves `f` unbounded for large negative `z`. The
/// `symmetric` flag switches to `min(z², β²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SaturatedStiffness {
    /// Saturation threshold `β > 0`.
    pub beta: f64,
    /// Saturate on `|z| ≥ β` instead of `z ≥ β`.
    pub symmetric: bool,
}

impl SaturatedStiffness {
    /// One-sided saturation at `beta`.
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(invalid!("beta must be finite and > 0, got {beta}"));
        }
        Ok(Self { beta, symmetric: false })
    }

    /// One-sided saturation at `sqrt(beta_sq)`.
    pub fn from_beta_sq(beta_sq: f64) -> Result<Self> {
        if !(beta_sq.is_finite() && beta_sq > 0.0) {
            return Err(invalid!("beta_sq must be finite and > 0, got {beta_sq}"));
        }
        Self::new(libm::sqrt(beta_sq))
    }

    /// Switches to the symmetric variant.
    pub fn symmetric(self, on: bool) -> Self {
        Self { symmetric: on, ..self }
    }

    /// `β²`.
    pub fn beta_sq(&self) -> f64 {
        self.beta * self.beta
    }

    /// Evaluates `f(z)`.
    pub fn eval(&self, z: f64) -> f64 {
        let saturated = if self.symmetric { z.abs() >= self.beta } else { z >= self.beta };
        if saturated {
            self.beta_sq()
        } else {
            z * z
        }
    }
}

/// `f(z)` for the given stiffness.
pub fn saturated_stiffness_eval(s: &SaturatedStiffness, z: f64) -> f64 {
    s.eval(z)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid!("{name} must be finite and > 0, got {v}"))
    }
}

/// `ẋ = −gain·(x − u)³`, `y = x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicFirstOrder {
    /// Cubic gain.
    pub gain: f64,
}

impl Plant for CubicFirstOrder {
    fn dim(&self) -> usize {
        1
    }
    fn dynamics(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let d = x[0] - u;
        dx[0] = -self.gain * d * d * d;
    }
    fn output(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn inverse_dc_gain(&self) -> f64 {
        1.0
    }
    fn equilibrium(&self, u: f64) -> Vec<f64> {
        vec![u]
    }
    fn label(&self) -> String {
        format!("cubic{{gain={}}}", self.gain)
    }
}

/// Cubic first-order plant `ẋ = −gain·(x − u)³`.
pub fn cubic_first_order(gain: f64) -> Result<PlantModel> {
    positive("gain", gain)?;
    Ok(PlantModel::new(CubicFirstOrder { gain }))
}

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `ẋ = −g(x)(x − u)` with `0 < b ≤ g(x) ≤ a`.
#[derive(Clone)]
pub struct AffineFirstOrder {
    g: ScalarMap,
    /// Lower bound of `g`.
    pub lower: f64,
    /// Upper bound of `g`.
    pub upper: f64,
    name: String,
}

impl AffineFirstOrder {
    /// Evaluates `g(x)`.
    pub fn g(&self, x: f64) -> f64 {
        (self.g)(x)
    }
}

impl Plant for AffineFirstOrder {
    fn dim(&self) -> usize {
        1
    }
    fn dynamics(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        dx[0] = -(self.g)(x[0]) * (x[0] - u);
    }
    fn output(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn inverse_dc_gain(&self) -> f64 {
        1.0
    }
    fn equilibrium(&self, u: f64) -> Vec<f64> {
        vec![u]
    }
    fn label(&self) -> String {
        self.name.clone()
    }
}

/// Points on which the bounds of an affine `g` are spot-checked.
fn affine_check_grid() -> impl Iterator<Item = f64> {
    (0..=2000).map(|i| -100.0 + 0.1 * i as f64)
}

/// Affine first-order plant `ẋ = −g(x)(x − u)`.
///
/// The bounds `b ≤ g ≤ a` are checked on a grid over `[-100, 100]`.
pub fn affine_first_order<G>(g: G, b: f64, a: f64) -> Result<PlantModel>
where
    G: Fn(f64) -> f64 + Send + Sync + 'static,
{
    affine_first_order_labeled(g, b, a, format!("affine{{b={b}, a={a}}}"))
}

/// [`affine_first_order`] with a custom label.
pub fn affine_first_order_labeled<G>(g: G, b: f64, a: f64, label: String) -> Result<PlantModel>
where
    G: Fn(f64) -> f64 + Send + Sync + 'static,
{
    positive("b", b)?;
    if !(a.is_finite() && a >= b) {
        return Err(invalid!("upper bound a = {a} must be finite and ≥ b = {b}"));
    }
    for x in affine_check_grid() {
        let v = g(x);
        if !(v.is_finite() && v >= b && v <= a) {
            return Err(Error::Validation(format!("g({x}) = {v} violates {b} ≤ g ≤ {a}")));
        }
    }
    Ok(PlantModel::new(AffineFirstOrder { g: Arc::new(g), lower: b, upper: a, name: label }))
}

/// Nonlinear mass-spring-damper
/// `ẍ = −2ζω_n ẋ − [1 + f(x − u)]ω_n²(x − u)`, `y = x`, state `[x, ẋ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSpringDamper {
    /// Natural frequency, rad/s.
    pub omega_n: f64,
    /// Damping ratio.
    pub zeta: f64,
    /// Spring saturation.
    pub stiffness: SaturatedStiffness,
}

impl Plant for MassSpringDamper {
    fn dim(&self) -> usize {
        2
    }
    fn dynamics(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let z = x[0] - u;
        let w2 = self.omega_n * self.omega_n;
        dx[0] = x[1];
        dx[1] = -2.0 * self.zeta * self.omega_n * x[1] - (1.0 + self.stiffness.eval(z)) * w2 * z;
    }
    fn output(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn inverse_dc_gain(&self) -> f64 {
        1.0
    }
    fn equilibrium(&self, u: f64) -> Vec<f64> {
        vec![u, 0.0]
    }
    fn label(&self) -> String {
        format!(
            "msd{{omega_n={}, zeta={}, beta_sq={}{}}}",
            self.omega_n,
            self.zeta,
            self.stiffness.beta_sq(),
            if self.stiffness.symmetric { ", symmetric" } else { "" }
        )
    }
}

pub(crate) fn check_msd_params(omega_n: f64, zeta: f64) -> Result<()> {
    positive("omega_n", omega_n)?;
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(invalid!("zeta must lie in (0, 1), got {zeta}"));
    }
    Ok(())
}

/// Saturated mass-spring-damper plant.
pub fn mass_spring_damper(omega_n: f64, zeta: f64, stiffness: SaturatedStiffness) -> Result<PlantModel> {
    check_msd_params(omega_n, zeta)?;
    positive("beta", stiffness.beta)?;
    Ok(PlantModel::new(MassSpringDamper { omega_n, zeta, stiffness }))
}

/// `ẋ = (u − x)/τ`, `y = x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFirstOrder {
    /// Time constant.
    pub tau: f64,
}

impl Plant for LinearFirstOrder {
    fn dim(&self) -> usize {
        1
    }
    fn dynamics(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        dx[0] = (u - x[0]) / self.tau;
    }
    fn output(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn inverse_dc_gain(&self) -> f64 {
        1.0
    }
    fn equilibrium(&self, u: f64) -> Vec<f64> {
        vec![u]
    }
    fn label(&self) -> String {
        format!("linear{{tau={}}}", self.tau)
    }
}

/// Linear first-order lag.
pub fn linear_first_order(tau: f64) -> Result<PlantModel> {
    positive("tau", tau)?;
    Ok(PlantModel::new(LinearFirstOrder { tau }))
}

type VectorField = Box<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
type OutputMap = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type EquilibriumMap = Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Plant assembled from user-supplied maps.
pub struct CustomPlant {
    dim: usize,
    dynamics: VectorField,
    output: OutputMap,
    k: f64,
    equilibrium: EquilibriumMap,
    label: String,
}

impl Plant for CustomPlant {
    fn dim(&self) -> usize {
        self.dim
    }
    fn dynamics(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let v = (self.dynamics)(x, u);
        dx.copy_from_slice(&v);
    }
    fn output(&self, x: &[f64]) -> f64 {
        (self.output)(x)
    }
    fn inverse_dc_gain(&self) -> f64 {
        self.k
    }
    fn equilibrium(&self, u: f64) -> Vec<f64> {
        (self.equilibrium)(u)
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Wraps user maps into a plant after checking, for each `u` in
/// [`VALIDATION_INPUTS`], the shapes, `f(x_u, u) = 0` and `h(x_u) = u/k`.
pub fn custom_plant<F, H, E>(dim: usize, dynamics: F, output: H, k: f64, equilibrium: E, label: &str) -> Result<PlantModel>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    H: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    E: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
{
    if dim == 0 {
        return Err(invalid!("dim must be ≥ 1"));
    }
    positive("k", k)?;
    for u in VALIDATION_INPUTS {
        let xu = equilibrium(u);
        if xu.len() != dim {
            return Err(Error::Validation(format!("equilibrium({u}) has length {} but dim is {dim}", xu.len())));
        }
        let dx = dynamics(&xu, u);
        if dx.len() != dim {
            return Err(Error::Validation(format!("dynamics returned length {} but dim is {dim} (u = {u})", dx.len())));
        }
        let resid = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(resid < EQUILIBRIUM_TOL) {
            return Err(Error::Validation(format!("f(x_u, u) = {resid:e} ≠ 0 at u = {u}")));
        }
        let y = output(&xu);
        if !((y - u / k).abs() < EQUILIBRIUM_TOL) {
            return Err(Error::Validation(format!("h(x_u) = {y} ≠ u/k = {} at u = {u}", u / k)));
        }
    }
    Ok(PlantModel::new(CustomPlant {
        dim,
        dynamics: Box::new(dynamics),
        output: Box::new(output),
        k,
        equilibrium: Box::new(equilibrium),
        label: String::from(label),
    }))
}
