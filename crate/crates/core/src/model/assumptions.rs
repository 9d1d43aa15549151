use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ModelSpec, TestFunction};
use crate::error::{Error, Hypothesis, Result};
use crate::galerkin::GalerkinBasis;

/// Largest difference quotients seen over the probe pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProbeRatios {
    pub sigma: f64,
    pub kernel: f64,
    pub psi: f64,
    pub probes: usize,
}

/// Lipschitz and ellipticity constants plus the quantities derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelAssumptions {
    pub l_sigma: f64,
    pub l_kernel: f64,
    pub l_psi: f64,
    /// Ellipticity of the velocity diffusion block, `s_min²/2`.
    pub theta: f64,
    /// One-sided Lipschitz constant of the full drift.
    pub alpha: f64,
    /// Largest eigenvalue of the symmetric part of the linear block.
    pub omega: f64,
    /// Bound on the `u`-derivatives of the diffusion matrix.
    pub varpi: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Growth rate for the coupled distance, `α + L_K/ε + L_σ²/(2ε²)`.
    pub stability_rate: f64,
    /// `|∇Ψ(0)| + |K(0)|`.
    pub force_at_zero: f64,
    pub s_max: f64,
    pub modes: usize,
    pub estimated: ProbeRatios,
}

impl ModelAssumptions {
    /// Grönwall bound on `E V(Z_t)` given `E V(Z_0) = v0`.
    pub fn v_moment_bound(&self, v0: f64, t: f64) -> f64 {
        if self.lambda2 > 0.0 {
            (v0 + self.lambda1 / self.lambda2) * (self.lambda2 * t).exp()
                - self.lambda1 / self.lambda2
        } else {
            v0 + self.lambda1 * t
        }
    }

    /// Bound on `|d/dt ∫φ dμ_t|` for a compactly supported `φ`, valid while
    /// `E V(Z_t) ≤ v_bound`. Infinite when `φ` has no bounded support.
    pub fn equicontinuity_constant(
        &self,
        phi: &dyn TestFunction,
        model: &ModelSpec,
        basis: &GalerkinBasis,
        v_bound: f64,
    ) -> f64 {
        let Some((center, radius)) = phi.support() else {
            return f64::INFINITY;
        };
        let reach = center.iter().map(|x| x * x).sum::<f64>().sqrt() + radius;
        let m1 = (v_bound - 1.0).max(0.0).sqrt();
        let eps = model.epsilon;
        let lin_norm = (0..basis.mode_count())
            .map(|k| linear_block_norm(basis.effective_eigenvalue(k), model.gamma, eps))
            .fold(0.0, f64::max);
        let force = self.force_at_zero + self.l_psi * reach + self.l_kernel * (reach + m1);
        let drift = lin_norm * reach + force / eps;
        let diffusion = 0.5 * self.s_max * self.s_max / (eps * eps);
        phi.sup_grad() * drift + diffusion * phi.sup_hess_vv()
    }
}

/// Spectral norm of `[[0, 1], [−λ/ε, −γ/ε]]`.
fn linear_block_norm(lambda: f64, gamma: f64, eps: f64) -> f64 {
    let (a, b, c, d) = (0.0, 1.0, -lambda / eps, -gamma / eps);
    let fro2: f64 = a * a + b * b + c * c + d * d;
    let det: f64 = a * d - b * c;
    (0.5 * (fro2 + (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}

/// `(−q + sqrt(q² + c²))/2`, the top eigenvalue of `[[0, c/2], [c/2, −q]]`.
fn sym_top(q: f64, c: f64) -> f64 {
    0.5 * (-q + (q * q + c * c).sqrt())
}

/// Declared constants, probed ratios, and the derived `(θ, α, ϖ, Λ₁, Λ₂)`.
///
/// Probe pairs alternate between nearby points (sensitive to the slope at a
/// point) and independent points (sensitive to global behavior).
pub fn validate_assumptions(
    model: &ModelSpec,
    basis: &GalerkinBasis,
    probe_count: usize,
    seed: u64,
) -> Result<ModelAssumptions> {
    if probe_count < 2 {
        return Err(Error::invalid("probe_count", "must be at least 2"));
    }
    model.validate()?;
    let m = basis.mode_count();
    let declared_sigma = model.declared.l_sigma.unwrap_or(model.sigma.lipschitz());
    let declared_kernel = model.declared.l_kernel.unwrap_or(model.kernel.lipschitz());
    let declared_psi = model.declared.l_psi.unwrap_or(model.psi_grad.lipschitz());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = ProbeRatios {
        probes: probe_count,
        ..ProbeRatios::default()
    };
    let scales = [0.05, 0.5, 2.0];
    let (mut a1, mut a2, mut b) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for p in 0..probe_count {
        let scale = scales[p % scales.len()];
        let u1: Vec<f64> = (0..m)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let u2: Vec<f64> = if p % 2 == 0 {
            u1.iter()
                .map(|x| x + 1e-4 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        } else {
            (0..m)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let du = dist(&u1, &u2);
        if du == 0.0 {
            continue;
        }
        model.kernel.apply(&u1, &mut a1);
        model.kernel.apply(&u2, &mut a2);
        ratios.kernel = ratios.kernel.max(dist(&a1, &a2) / du);
        model.psi_grad.apply(&u1, &mut a1);
        model.psi_grad.apply(&u2, &mut a2);
        ratios.psi = ratios.psi.max(dist(&a1, &a2) / du);
        model.sigma.diag(&u1, &mut a1);
        model.sigma.diag(&u2, &mut b);
        ratios.sigma = ratios.sigma.max(dist(&a1, &b) / du);
    }
    let checks = [
        (Hypothesis::SigmaLipschitz, declared_sigma, ratios.sigma),
        (Hypothesis::KernelLipschitz, declared_kernel, ratios.kernel),
        (Hypothesis::PotentialLipschitz, declared_psi, ratios.psi),
    ];
    for (hypothesis, declared, estimated) in checks {
        if estimated > 1.01 * declared + 1e-15 {
            return Err(Error::AssumptionViolation {
                hypothesis,
                declared,
                estimated,
            });
        }
    }

    let s_min = model.sigma.s_min();
    let s_max = model.sigma.s_max();
    let theta = 0.5 * s_min * s_min;
    let eps = model.epsilon;
    let q = model.gamma / eps;
    let l = declared_kernel + declared_psi;
    let omega = (0..m)
        .map(|k| sym_top(q, 1.0 - basis.effective_eigenvalue(k) / eps))
        .fold(0.0, f64::max);
    let alpha_nonlinear = l / (2.0 * eps);
    let alpha_full = (0..m)
        .map(|k| sym_top(q, (1.0 - basis.effective_eigenvalue(k) / eps).abs() + l / eps))
        .fold(f64::NEG_INFINITY, f64::max);
    let alpha = alpha_nonlinear.max(alpha_full);
    debug_assert!(alpha <= l / eps + omega + 1e-12);

    let mut zero = vec![0.0; m];
    let mut c0 = 0.0;
    model.psi_grad.apply(&vec![0.0; m], &mut zero);
    c0 += zero.iter().map(|x| x * x).sum::<f64>().sqrt();
    model.kernel.apply(&vec![0.0; m], &mut zero);
    c0 += zero.iter().map(|x| x * x).sum::<f64>().sqrt();

    // L V ≤ 2ω|z|² + 2|v||F|/ε + Σσ²/ε², with |F| ≤ c0 + L_K R + L|u| and Young's inequality.
    let lambda2 = (2.0 * omega + (l + 1.0) / eps).max(0.0);
    let lambda1 = (c0 + declared_kernel * model.moment_budget).powi(2) / eps
        + m as f64 * s_max * s_max / (eps * eps);
    let varpi = (m as f64).sqrt() * model.sigma.diffusion_slope();
    let stability_rate = alpha + declared_kernel / eps + declared_sigma.powi(2) / (2.0 * eps * eps);

    Ok(ModelAssumptions {
        l_sigma: declared_sigma,
        l_kernel: declared_kernel,
        l_psi: declared_psi,
        theta,
        alpha,
        omega,
        varpi,
        lambda1,
        lambda2,
        stability_rate,
        force_at_zero: c0,
        s_max,
        modes: m,
        estimated: ratios,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
