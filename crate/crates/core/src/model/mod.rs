//! Model data (potential gradient, interaction kernel, noise), the generator,
//! and the derived constants used by the monitors.

mod assumptions;
mod mean_field;
mod testfn;

pub use assumptions::{validate_assumptions, ModelAssumptions, ProbeRatios};
pub use mean_field::{kernel_convolve, MeanField};
pub use testfn::{BumpPoly, Constant, Derivatives, SumOf, TestFunction};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::galerkin::{GalerkinBasis, PhasePoint};
use crate::measure::EmpiricalMeasure;

/// A scalar map applied componentwise, `w ↦ −s·w` or `w ↦ −s·tanh(w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Linear { strength: f64 },
    Saturated { strength: f64 },
}

/// Sum of primitives acting on coefficient vectors.
///
/// Every composition collapses to `w ↦ −a·w − b·tanh(w)`, which is how it is evaluated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldMap {
    terms: Vec<Primitive>,
}

impl FieldMap {
    pub fn new(terms: Vec<Primitive>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn linear(strength: f64) -> Self {
        Self::new(vec![Primitive::Linear { strength }])
    }

    pub fn saturated(strength: f64) -> Self {
        Self::new(vec![Primitive::Saturated { strength }])
    }

    pub fn terms(&self) -> &[Primitive] {
        &self.terms
    }

    /// Coefficient `a` of the linear part.
    pub fn linear_strength(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                Primitive::Linear { strength } => *strength,
                _ => 0.0,
            })
            .sum()
    }

    /// Coefficient `b` of the tanh part.
    pub fn saturated_strength(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                Primitive::Saturated { strength } => *strength,
                _ => 0.0,
            })
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.linear_strength() == 0.0 && self.saturated_strength() == 0.0
    }

    /// Exact Lipschitz constant: the derivative `−a − b·sech²` ranges over `[−a−b, −a]`.
    pub fn lipschitz(&self) -> f64 {
        let a = self.linear_strength();
        let b = self.saturated_strength();
        a.abs().max((a + b).abs())
    }

    #[inline]
    pub fn eval_scalar(&self, w: f64) -> f64 {
        -self.linear_strength() * w - self.saturated_strength() * w.tanh()
    }

    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        let a = self.linear_strength();
        let b = self.saturated_strength();
        for (o, &x) in out.iter_mut().zip(w) {
            *o = -a * x - if b != 0.0 { b * x.tanh() } else { 0.0 };
        }
    }
}

/// Mode-diagonal noise factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSpec {
    /// `σ_k = level` for every mode.
    Constant { level: f64 },
    /// `σ_k(u) = base + amplitude·tanh(u_k)`.
    Saturated { base: f64, amplitude: f64 },
}

impl SigmaSpec {
    #[inline]
    pub fn entry(&self, u_k: f64) -> f64 {
        match *self {
            SigmaSpec::Constant { level } => level,
            SigmaSpec::Saturated { base, amplitude } => base + amplitude * u_k.tanh(),
        }
    }

    pub fn diag(&self, u: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(u) {
            *o = self.entry(x);
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SigmaSpec::Constant { .. })
    }

    /// Lower bound of `|σ_k|`.
    pub fn s_min(&self) -> f64 {
        match *self {
            SigmaSpec::Constant { level } => level.abs(),
            SigmaSpec::Saturated { base, amplitude } => (base.abs() - amplitude.abs()).max(0.0),
        }
    }

    pub fn s_max(&self) -> f64 {
        match *self {
            SigmaSpec::Constant { level } => level.abs(),
            SigmaSpec::Saturated { base, amplitude } => base.abs() + amplitude.abs(),
        }
    }

    /// Hilbert–Schmidt Lipschitz constant of `u ↦ σ(u)`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            SigmaSpec::Constant { .. } => 0.0,
            SigmaSpec::Saturated { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Bound on `|∂_{u_k} q_k|` with `q_k = σ_k²/2`.
    pub fn diffusion_slope(&self) -> f64 {
        self.s_max() * self.lipschitz()
    }
}

/// Optional overrides of the Lipschitz constants for custom models.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeclaredConstants {
    pub l_sigma: Option<f64>,
    pub l_kernel: Option<f64>,
    pub l_psi: Option<f64>,
}

/// Complete description of the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub gamma: f64,
    pub epsilon: f64,
    pub psi_grad: FieldMap,
    pub kernel: FieldMap,
    pub sigma: SigmaSpec,
    /// Bound on the first moment of the measures the Lyapunov constants are valid for.
    pub moment_budget: f64,
    pub declared: DeclaredConstants,
}

pub const DEFAULT_MOMENT_BUDGET: f64 = 10.0;

impl ModelSpec {
    /// `K(w) = −κw`, `∇Ψ(u) = −a·u`, constant `σ`.
    pub fn linear(kappa: f64, a: f64, gamma: f64, sigma: f64) -> Self {
        Self {
            name: "linear".into(),
            gamma,
            epsilon: 1.0,
            psi_grad: FieldMap::linear(a),
            kernel: FieldMap::linear(kappa),
            sigma: SigmaSpec::Constant { level: sigma },
            moment_budget: DEFAULT_MOMENT_BUDGET,
            declared: DeclaredConstants::default(),
        }
    }

    /// `K(w) = −κ_b·tanh(w)`, `∇Ψ(u) = −b_ψ·tanh(u)`, `σ_k = s0 + s1·tanh(u_k)`.
    pub fn saturated(kappa_b: f64, psi_b: f64, gamma: f64, s0: f64, s1: f64) -> Self {
        Self {
            name: "saturated".into(),
            gamma,
            epsilon: 1.0,
            psi_grad: FieldMap::saturated(psi_b),
            kernel: FieldMap::saturated(kappa_b),
            sigma: SigmaSpec::Saturated {
                base: s0,
                amplitude: s1,
            },
            moment_budget: DEFAULT_MOMENT_BUDGET,
            declared: DeclaredConstants::default(),
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", "must be finite and nonnegative"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be finite and positive"));
        }
        if !(self.moment_budget >= 0.0) {
            return Err(Error::invalid("moment_budget", "must be nonnegative"));
        }
        let finite = |x: f64| x.is_finite();
        for t in self.psi_grad.terms().iter().chain(self.kernel.terms()) {
            let s = match t {
                Primitive::Linear { strength } | Primitive::Saturated { strength } => *strength,
            };
            if !finite(s) {
                return Err(Error::invalid("strength", "must be finite"));
            }
        }
        match self.sigma {
            SigmaSpec::Constant { level } if !finite(level) => {
                return Err(Error::invalid("sigma", "must be finite"))
            }
            SigmaSpec::Saturated { base, amplitude }
                if (!finite(base) || !finite(amplitude) || base < amplitude.abs()) => {
                    return Err(Error::invalid(
                        "sigma",
                        "need base >= |amplitude| so the entries stay nonnegative",
                    ));
                }
            _ => {}
        }
        Ok(())
    }

    /// Whether the mean-field force only depends on the atoms through their mean.
    pub fn kernel_is_linear(&self) -> bool {
        self.kernel.saturated_strength() == 0.0
    }

    /// Diffusion coefficients `q_k(u) = σ_k(u)²/2`.
    pub fn diffusion_diag(&self, u: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(u) {
            let s = self.sigma.entry(x);
            *o = 0.5 * s * s;
        }
    }
}

fn check_finite(xs: &[f64], term: &'static str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::ModelFault { term })
    }
}

/// `F(u, ρ) = ∇Ψ(u) + (K⋆ρ)(u)`.
pub fn total_force(u: &[f64], mf: &MeanField, model: &ModelSpec, out: &mut [f64]) -> Result<()> {
    model.psi_grad.apply(u, out);
    check_finite(out, "potential")?;
    let mut k = vec![0.0; u.len()];
    mf.force(u, &mut k);
    check_finite(&k, "kernel")?;
    for (o, x) in out.iter_mut().zip(&k) {
        *o += x;
    }
    Ok(())
}

/// Full drift `(v, (Δu − γv + ∇Ψ(u) + K⋆ρ(u))/ε)`.
///
/// `rho` is a measure over `u`-coefficients (dimension `m`).
pub fn drift_full(
    z: &PhasePoint,
    rho: &EmpiricalMeasure,
    model: &ModelSpec,
    basis: &GalerkinBasis,
) -> Result<PhasePoint> {
    let m = z.modes();
    crate::error::check_dim(basis.mode_count(), m)?;
    crate::error::check_dim(m, rho.dim())?;
    let mf = MeanField::from_measure(model, rho)?;
    let (du, dv) = drift_with(z.u.as_slice(), z.v.as_slice(), &mf, model, basis)?;
    PhasePoint::new(du.into(), dv.into())
}

pub(crate) fn drift_with(
    u: &[f64],
    v: &[f64],
    mf: &MeanField,
    model: &ModelSpec,
    basis: &GalerkinBasis,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = u.len();
    let mut f = vec![0.0; m];
    total_force(u, mf, model, &mut f)?;
    let dv: Vec<f64> = (0..m)
        .map(|k| {
            (-basis.effective_eigenvalue(k) * u[k] - model.gamma * v[k] + f[k]) / model.epsilon
        })
        .collect();
    check_finite(&dv, "drift")?;
    Ok((v.to_vec(), dv))
}

/// `L_ρ φ(z)`: transport, linear damping, mean-field force, and velocity diffusion.
pub fn generator_apply(
    phi: &dyn TestFunction,
    z: &PhasePoint,
    rho: &EmpiricalMeasure,
    model: &ModelSpec,
    basis: &GalerkinBasis,
) -> Result<f64> {
    let mf = MeanField::from_measure(model, rho)?;
    generator_with(phi, z.u.as_slice(), z.v.as_slice(), &mf, model, basis)
}

pub(crate) fn generator_with(
    phi: &dyn TestFunction,
    u: &[f64],
    v: &[f64],
    mf: &MeanField,
    model: &ModelSpec,
    basis: &GalerkinBasis,
) -> Result<f64> {
    let mb = phi.based_modes();
    if mb > u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: mb,
        });
    }
    let mut d = Derivatives::zeros(mb);
    if !phi.derivatives(&u[..mb], &v[..mb], &mut d) {
        return Err(Error::MissingDerivatives);
    }
    let (du, dv) = drift_with(u, v, mf, model, basis)?;
    let eps2 = model.epsilon * model.epsilon;
    let mut total = 0.0;
    for k in 0..mb {
        let s = model.sigma.entry(u[k]);
        total += du[k] * d.grad_u[k] + dv[k] * d.grad_v[k] + 0.5 * s * s / eps2 * d.hess_vv[k];
    }
    Ok(total)
}

/// `L_Γ φ` at every state of `states` (layout `[u, v]` per particle), where `Γ`
/// is the empirical measure of the same states.
pub fn generator_on_states(
    phi: &dyn TestFunction,
    states: &[f64],
    modes: usize,
    model: &ModelSpec,
    basis: &GalerkinBasis,
) -> Result<Vec<f64>> {
    let mf = MeanField::from_phase_states(model, modes, states)?;
    states
        .par_chunks_exact(2 * modes)
        .map(|row| generator_with(phi, &row[..modes], &row[modes..], &mf, model, basis))
        .collect()
}

/// `L_ρ V(z)` for `V = 1 + |z|²`.
pub fn lyapunov_rate(
    z: &PhasePoint,
    rho: &EmpiricalMeasure,
    model: &ModelSpec,
    basis: &GalerkinBasis,
) -> Result<f64> {
    let mf = MeanField::from_measure(model, rho)?;
    lyapunov_rate_with(z.u.as_slice(), z.v.as_slice(), &mf, model, basis)
}

pub(crate) fn lyapunov_rate_with(
    u: &[f64],
    v: &[f64],
    mf: &MeanField,
    model: &ModelSpec,
    basis: &GalerkinBasis,
) -> Result<f64> {
    let (du, dv) = drift_with(u, v, mf, model, basis)?;
    let eps2 = model.epsilon * model.epsilon;
    let mut total = 0.0;
    for k in 0..u.len() {
        let s = model.sigma.entry(u[k]);
        total += 2.0 * (u[k] * du[k] + v[k] * dv[k]) + s * s / eps2;
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
