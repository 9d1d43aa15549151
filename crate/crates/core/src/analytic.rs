//! Closed-form law of the mean-field limit for the linear model.
//!
//! With `K(w) = −κw`, `∇Ψ(u) = −a·u` and constant `σ`, a Gaussian initial law
//! stays Gaussian and each mode evolves independently. The mean follows
//! `[[0, 1], [−(λ+a)/ε, −γ/ε]]` (the interaction cancels in the mean), the
//! covariance follows `[[0, 1], [−(λ+a+κ)/ε, −γ/ε]]` with noise `σ²/ε²` on `v`.

use nalgebra::{Matrix2, Matrix4, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::galerkin::GalerkinBasis;
use crate::measure::EmpiricalMeasure;
use crate::model::{ModelSpec, SigmaSpec};

/// Per-mode mean and covariance of `(u_k, v_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    pub mean: Vec<Vector2<f64>>,
    pub cov: Vec<Matrix2<f64>>,
}

impl GaussianLaw {
    pub fn modes(&self) -> usize {
        self.mean.len()
    }

    /// Draw `n` states in the ensemble layout `[u_1..u_m, v_1..v_m]`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
        let m = self.modes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chol: Vec<Matrix2<f64>> = self.cov.iter().map(cholesky2).collect();
        let mut atoms = vec![0.0; n * 2 * m];
        for row in atoms.chunks_exact_mut(2 * m) {
            for k in 0..m {
                let g = Vector2::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                );
                let x = self.mean[k] + chol[k] * g;
                row[k] = x[0];
                row[m + k] = x[1];
            }
        }
        EmpiricalMeasure::uniform(2 * m, atoms)
    }

    /// `E[u_k²]`, `E[u_k v_k]`, `E[v_k²]`.
    pub fn second_moments(&self, k: usize) -> [f64; 3] {
        let (mu, c) = (self.mean[k], self.cov[k]);
        [
            c[(0, 0)] + mu[0] * mu[0],
            c[(0, 1)] + mu[0] * mu[1],
            c[(1, 1)] + mu[1] * mu[1],
        ]
    }
}

/// Lower-triangular factor of a 2×2 positive semidefinite matrix.
fn cholesky2(c: &Matrix2<f64>) -> Matrix2<f64> {
    let l00 = c[(0, 0)].max(0.0).sqrt();
    let l10 = if l00 > 0.0 { c[(1, 0)] / l00 } else { 0.0 };
    let l11 = (c[(1, 1)] - l10 * l10).max(0.0).sqrt();
    Matrix2::new(l00, 0.0, l10, l11)
}

/// Parameters `(κ, a, σ)` if the model is linear with constant noise.
pub fn linear_parameters(model: &ModelSpec) -> Result<(f64, f64, f64)> {
    let sigma = match model.sigma {
        SigmaSpec::Constant { level } => level,
        _ => return Err(Error::invalid("model", "closed-form law needs constant sigma")),
    };
    if model.kernel.saturated_strength() != 0.0 || model.psi_grad.saturated_strength() != 0.0 {
        return Err(Error::invalid("model", "closed-form law needs a linear model"));
    }
    Ok((
        model.kernel.linear_strength(),
        model.psi_grad.linear_strength(),
        sigma,
    ))
}

/// Law at time `t` from independent Gaussian initial coordinates.
pub fn linear_gaussian_law(
    model: &ModelSpec,
    basis: &GalerkinBasis,
    init_mean: &[f64],
    init_var: &[f64],
    t: f64,
) -> Result<GaussianLaw> {
    let (kappa, a, sigma) = linear_parameters(model)?;
    let m = basis.mode_count();
    crate::error::check_dim(2 * m, init_mean.len())?;
    crate::error::check_dim(2 * m, init_var.len())?;
    if init_var.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("init_var", "must be nonnegative"));
    }
    let eps = model.epsilon;
    let g = model.gamma / eps;
    let d = sigma * sigma / (eps * eps);
    let mut mean = Vec::with_capacity(m);
    let mut cov = Vec::with_capacity(m);
    for k in 0..m {
        let lam = basis.effective_eigenvalue(k);
        let a_mean = Matrix2::new(0.0, 1.0, -(lam + a) / eps, -g);
        let a_cov = Matrix2::new(0.0, 1.0, -(lam + a + kappa) / eps, -g);
        let mu0 = Vector2::new(init_mean[k], init_mean[m + k]);
        mean.push((a_mean * t).exp() * mu0);
        let c0 = Matrix2::new(init_var[k], 0.0, 0.0, init_var[m + k]);
        cov.push(propagate_covariance(&a_cov, d, &c0, t));
    }
    Ok(GaussianLaw { mean, cov })
}

/// `e^{At} C e^{Aᵀt} + ∫₀ᵗ e^{As} D e^{Aᵀs} ds` with `D = diag(0, d)`, via the
/// block exponential of `[[−A, D], [0, Aᵀ]]`.
fn propagate_covariance(a: &Matrix2<f64>, d: f64, c0: &Matrix2<f64>, t: f64) -> Matrix2<f64> {
    let mut big = Matrix4::zeros();
    big.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-a));
    big[(1, 3)] = d;
    big.fixed_view_mut::<2, 2>(2, 2).copy_from(&a.transpose());
    let e = (big * t).exp();
    let f12: Matrix2<f64> = e.fixed_view::<2, 2>(0, 2).into();
    let f22: Matrix2<f64> = e.fixed_view::<2, 2>(2, 2).into();
    let phi = f22.transpose();
    let q = phi * f12;
    let c = phi * c0 * phi.transpose() + q;
    // Symmetrize against round-off.
    (c + c.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::MeanEstimate;

    /// RK4 on the moment system `μ' = A_m μ`, `C' = A_c C + C A_cᵀ + D`.
    fn rk4_moments(
        am: Matrix2<f64>,
        ac: Matrix2<f64>,
        d: f64,
        mu0: Vector2<f64>,
        c0: Matrix2<f64>,
        t: f64,
    ) -> (Vector2<f64>, Matrix2<f64>) {
        let dd = Matrix2::new(0.0, 0.0, 0.0, d);
        let f = |mu: &Vector2<f64>, c: &Matrix2<f64>| (am * mu, ac * c + c * ac.transpose() + dd);
        let n = 20_000;
        let h = t / n as f64;
        let (mut mu, mut c) = (mu0, c0);
        for _ in 0..n {
            let (k1m, k1c) = f(&mu, &c);
            let (k2m, k2c) = f(&(mu + k1m * (h / 2.0)), &(c + k1c * (h / 2.0)));
            let (k3m, k3c) = f(&(mu + k2m * (h / 2.0)), &(c + k2c * (h / 2.0)));
            let (k4m, k4c) = f(&(mu + k3m * h), &(c + k3c * h));
            mu += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (h / 6.0);
            c += (k1c + k2c * 2.0 + k3c * 2.0 + k4c) * (h / 6.0);
        }
        (mu, c)
    }

    #[test]
    fn closed_form_matches_moment_ode() {
        let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5).with_epsilon(0.8);
        let basis = GalerkinBasis::new(2.0, 3).unwrap();
        let mean0 = [1.0, -0.5, 0.2, 0.3, 0.0, -0.1];
        let var0 = [0.25, 0.1, 0.0, 0.5, 0.2, 0.3];
        let t = 1.7;
        let law = linear_gaussian_law(&model, &basis, &mean0, &var0, t).unwrap();
        let eps = 0.8;
        for k in 0..3 {
            let lam = basis.eigenvalues()[k];
            let am = Matrix2::new(0.0, 1.0, -(lam + 0.2) / eps, -1.0 / eps);
            let ac = Matrix2::new(0.0, 1.0, -(lam + 0.6) / eps, -1.0 / eps);
            let (mu, c) = rk4_moments(
                am,
                ac,
                0.25 / (eps * eps),
                Vector2::new(mean0[k], mean0[3 + k]),
                Matrix2::new(var0[k], 0.0, 0.0, var0[3 + k]),
                t,
            );
            assert!((law.mean[k] - mu).norm() < 1e-10);
            assert!((law.cov[k] - c).norm() < 1e-10);
        }
    }

    #[test]
    fn stationary_free_mode_variances() {
        // Long time, λ_eff = λ + a + κ: E v² = σ²/(2γ), E u² = σ²/(2γλ_eff).
        let model = ModelSpec::linear(0.3, 0.2, 1.5, 0.7);
        let basis = GalerkinBasis::new(4.0, 1).unwrap();
        let law = linear_gaussian_law(&model, &basis, &[0.5, 0.0], &[0.0, 0.0], 60.0).unwrap();
        let lam = basis.eigenvalues()[0] + 0.5;
        assert!((law.cov[0][(1, 1)] - 0.49 / 3.0).abs() < 1e-9);
        assert!((law.cov[0][(0, 0)] - 0.49 / (3.0 * lam)).abs() < 1e-9);
        assert!(law.mean[0].norm() < 1e-9);
    }

    #[test]
    fn samples_reproduce_moments() {
        let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5);
        let basis = GalerkinBasis::new(2.0, 2).unwrap();
        let law =
            linear_gaussian_law(&model, &basis, &[1.0, 0.0, 0.0, 1.0], &[0.1; 4], 0.5).unwrap();
        let s = law.sample(20_000, 3).unwrap();
        let u1: Vec<f64> = (0..s.len()).map(|i| s.atom(i)[0]).collect();
        let uv: Vec<f64> = (0..s.len()).map(|i| s.atom(i)[1] * s.atom(i)[3]).collect();
        let e = MeanEstimate::of(&u1);
        assert!((e.mean - law.mean[0][0]).abs() < 4.0 * e.stderr);
        let e = MeanEstimate::of(&uv);
        assert!((e.mean - law.second_moments(1)[1]).abs() < 4.0 * e.stderr);
    }

    #[test]
    fn rejects_nonlinear_models() {
        let model = ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.0);
        let basis = GalerkinBasis::new(1.0, 1).unwrap();
        assert!(linear_gaussian_law(&model, &basis, &[0.0; 2], &[1.0; 2], 1.0).is_err());
    }
}
