use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::galerkin::FieldCoeffs;

fn basis(m: usize) -> GalerkinBasis {
    GalerkinBasis::new(1.0, m).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn point(u: Vec<f64>, v: Vec<f64>) -> PhasePoint {
    PhasePoint::new(u.into(), v.into()).unwrap()
}

#[test]
fn convolve_single_atom_gives_kernel_at_zero() {
    let model = ModelSpec::linear(0.7, 0.0, 1.0, 0.5);
    let u = FieldCoeffs::from(vec![0.3, -1.2]);
    let rho = EmpiricalMeasure::uniform(2, u.0.clone()).unwrap();
    let k = kernel_convolve(&u, &rho, &model).unwrap();
    assert_eq!(k.0, vec![0.0, 0.0]);
}

#[test]
fn convolve_linear_through_the_mean() {
    let model = ModelSpec::linear(0.5, 0.0, 1.0, 0.5);
    let rho = EmpiricalMeasure::uniform(1, vec![0.0, 2.0]).unwrap();
    let k = kernel_convolve(&vec![1.0].into(), &rho, &model).unwrap();
    assert_eq!(k.0, vec![0.0]);
    let k = kernel_convolve(&vec![3.0].into(), &rho, &model).unwrap();
    assert_abs_diff_eq!(k.0[0], -1.0, epsilon = 1e-15);
}

#[test]
fn convolve_rejects_empty_measure() {
    let model = ModelSpec::linear(0.5, 0.0, 1.0, 0.5);
    assert!(matches!(
        EmpiricalMeasure::uniform(1, vec![]),
        Err(Error::EmptyMeasure)
    ));
    assert!(matches!(
        MeanField::new(&model, 1, &[], None),
        Err(Error::EmptyMeasure)
    ));
}

#[test]
fn saturated_fast_path_matches_direct_sum() {
    let model = ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = 3;
    // Includes atoms far out so both branches of the tanh identity are used.
    let atoms = random_vec(&mut rng, 64 * m, 4.0);
    let rho = EmpiricalMeasure::uniform(m, atoms.clone()).unwrap();
    for _ in 0..20 {
        let u = random_vec(&mut rng, m, 4.0);
        let fast = kernel_convolve(&u.clone().into(), &rho, &model).unwrap();
        for k in 0..m {
            let direct: f64 = (0..64)
                .map(|j| -0.3 * (u[k] - atoms[j * m + k]).tanh())
                .sum::<f64>()
                / 64.0;
            assert!((fast.0[k] - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn weighted_measure_convolution() {
    let model = ModelSpec::saturated(0.4, 0.0, 1.0, 0.5, 0.0);
    let rho = EmpiricalMeasure::weighted(1, vec![0.0, 1.0, -2.0], vec![0.2, 0.5, 0.3]).unwrap();
    let k = kernel_convolve(&vec![0.5].into(), &rho, &model).unwrap();
    let direct = -0.4 * (0.2 * 0.5f64.tanh() + 0.5 * (-0.5f64).tanh() + 0.3 * 2.5f64.tanh());
    assert_abs_diff_eq!(k.0[0], direct, epsilon = 1e-14);
}

#[test]
fn drift_examples() {
    let model = ModelSpec::linear(0.0, 0.0, 2.0, 0.0);
    let b = basis(1);
    let rho = EmpiricalMeasure::uniform(1, vec![1.0]).unwrap();
    let d = drift_full(&point(vec![1.0], vec![0.0]), &rho, &model, &b).unwrap();
    assert_eq!(d.u.0, vec![0.0]);
    assert_abs_diff_eq!(d.v.0[0], -std::f64::consts::PI.powi(2), epsilon = 1e-12);

    let z0 = PhasePoint::zeros(1);
    let rho0 = EmpiricalMeasure::uniform(1, vec![0.0]).unwrap();
    let d0 = drift_full(&z0, &rho0, &ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.1), &b).unwrap();
    assert_eq!(d0.to_flat(), vec![0.0, 0.0]);
}

#[test]
fn drift_scales_with_inverse_mass() {
    let b = basis(2);
    let base = ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.1);
    let z = point(vec![0.3, -0.2], vec![0.5, 0.1]);
    let rho = EmpiricalMeasure::uniform(2, vec![0.1, 0.2, -0.4, 0.0]).unwrap();
    let d1 = drift_full(&z, &rho, &base, &b).unwrap();
    let d2 = drift_full(&z, &rho, &base.clone().with_epsilon(0.5), &b).unwrap();
    assert_eq!(d1.u, d2.u);
    for k in 0..2 {
        assert_abs_diff_eq!(d2.v.0[k], 2.0 * d1.v.0[k], epsilon = 1e-12);
    }
}

#[test]
fn drift_reports_non_finite_terms() {
    let mut model = ModelSpec::linear(0.5, 0.0, 1.0, 0.5);
    model.psi_grad = FieldMap::linear(f64::INFINITY);
    let b = basis(1);
    let rho = EmpiricalMeasure::uniform(1, vec![0.0]).unwrap();
    let r = drift_full(&point(vec![1.0], vec![0.0]), &rho, &model, &b);
    assert!(matches!(r, Err(Error::ModelFault { term: "potential" })));
}

#[test]
fn generator_constant_and_flat_region() {
    let model = ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.1);
    let b = basis(2);
    let rho = EmpiricalMeasure::uniform(2, vec![0.1, 0.2, -0.4, 0.0]).unwrap();
    let z = point(vec![0.3, -0.2], vec![0.5, 0.1]);
    let c = Constant {
        value: 3.0,
        modes: 2,
    };
    assert_eq!(generator_apply(&c, &z, &rho, &model, &b).unwrap(), 0.0);
    // A bump supported far from z is flat there.
    let far = BumpPoly::radial(vec![5.0, 5.0, 5.0, 5.0], 1.0, 1.0);
    assert_eq!(generator_apply(&far, &z, &rho, &model, &b).unwrap(), 0.0);
}

struct NoDerivatives;

impl TestFunction for NoDerivatives {
    fn based_modes(&self) -> usize {
        1
    }
    fn value(&self, u: &[f64], _v: &[f64]) -> f64 {
        u[0]
    }
    fn sup_value(&self) -> f64 {
        f64::INFINITY
    }
    fn sup_grad(&self) -> f64 {
        1.0
    }
    fn sup_hess_vv(&self) -> f64 {
        0.0
    }
}

#[test]
fn generator_requires_derivatives() {
    let model = ModelSpec::linear(0.5, 0.1, 1.0, 0.5);
    let rho = EmpiricalMeasure::uniform(1, vec![0.0]).unwrap();
    let r = generator_apply(&NoDerivatives, &PhasePoint::zeros(1), &rho, &model, &basis(1));
    assert!(matches!(r, Err(Error::MissingDerivatives)));
}

/// Generator evaluated by central differences of `φ` itself.
fn generator_fd(
    phi: &dyn TestFunction,
    z: &PhasePoint,
    rho: &EmpiricalMeasure,
    model: &ModelSpec,
    b: &GalerkinBasis,
    h: f64,
) -> f64 {
    let m = z.modes();
    let drift = drift_full(z, rho, model, b).unwrap();
    let f = |dz: &[f64]| {
        let u: Vec<f64> = (0..m).map(|k| z.u.0[k] + dz[k]).collect();
        let v: Vec<f64> = (0..m).map(|k| z.v.0[k] + dz[m + k]).collect();
        phi.value(&u, &v)
    };
    let mut total = 0.0;
    for i in 0..2 * m {
        let mut e = vec![0.0; 2 * m];
        e[i] = h;
        let plus = f(&e);
        e[i] = -h;
        let minus = f(&e);
        let first = (plus - minus) / (2.0 * h);
        let b_i = if i < m { drift.u.0[i] } else { drift.v.0[i - m] };
        total += b_i * first;
        if i >= m {
            let second = (plus - 2.0 * f(&vec![0.0; 2 * m]) + minus) / (h * h);
            let s = model.sigma.entry(z.u.0[i - m]);
            total += 0.5 * s * s / model.epsilon.powi(2) * second;
        }
    }
    total
}

#[test]
fn generator_matches_finite_differences() {
    let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5);
    let b = basis(2);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rho = EmpiricalMeasure::uniform(2, random_vec(&mut rng, 40, 1.0)).unwrap();
    // φ(z) = bump(z)·z₁
    let mut lin = vec![0.0; 4];
    lin[0] = 1.0;
    let phi = BumpPoly::radial(vec![0.0; 4], 2.0, 1.0).with_affine(0.0, lin);
    for _ in 0..10 {
        let z = point(random_vec(&mut rng, 2, 0.8), random_vec(&mut rng, 2, 0.8));
        let exact = generator_apply(&phi, &z, &rho, &model, &b).unwrap();
        let fd = generator_fd(&phi, &z, &rho, &model, &b, 1e-4);
        assert!((exact - fd).abs() < 1e-6, "{exact} vs {fd}");
    }
}

/// Test function whose `u`-curvature can be altered without touching the rest.
struct Tweaked {
    inner: BumpPoly,
    extra: f64,
}

impl TestFunction for Tweaked {
    fn based_modes(&self) -> usize {
        self.inner.based_modes()
    }
    fn value(&self, u: &[f64], v: &[f64]) -> f64 {
        self.inner.value(u, v)
    }
    fn derivatives(&self, u: &[f64], v: &[f64], d: &mut Derivatives) -> bool {
        self.inner.derivatives(u, v, d);
        for x in d.hess_uu.iter_mut() {
            *x += self.extra;
        }
        true
    }
    fn sup_value(&self) -> f64 {
        self.inner.sup_value()
    }
    fn sup_grad(&self) -> f64 {
        self.inner.sup_grad()
    }
    fn sup_hess_vv(&self) -> f64 {
        self.inner.sup_hess_vv()
    }
}

#[test]
fn generator_on_states_matches_pointwise_generator() {
    let model = ModelSpec::saturated(0.5, 0.3, 1.0, 0.5, 0.1);
    let b = basis(2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let states = random_vec(&mut rng, 6 * 4, 1.0);
    let rho = EmpiricalMeasure::uniform(
        2,
        states.chunks_exact(4).flat_map(|r| r[..2].to_vec()).collect(),
    )
    .unwrap();
    let phi = BumpPoly::radial(vec![0.1, 0.0, 0.2, -0.1], 1.5, 1.0);
    let batch = generator_on_states(&phi, &states, 2, &model, &b).unwrap();
    for (row, g) in states.chunks_exact(4).zip(&batch) {
        let z = point(row[..2].to_vec(), row[2..].to_vec());
        let expected = generator_apply(&phi, &z, &rho, &model, &b).unwrap();
        assert_abs_diff_eq!(*g, expected, epsilon = 1e-14);
    }
}

#[test]
fn generator_ignores_position_curvature() {
    let model = ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.1);
    let b = basis(1);
    let rho = EmpiricalMeasure::uniform(1, vec![0.1, -0.3]).unwrap();
    let z = point(vec![0.2], vec![-0.1]);
    let inner = BumpPoly::radial(vec![0.0, 0.0], 1.5, 1.0);
    let a = Tweaked {
        inner: inner.clone(),
        extra: 0.0,
    };
    let c = Tweaked { inner, extra: 17.0 };
    assert_eq!(
        generator_apply(&a, &z, &rho, &model, &b).unwrap(),
        generator_apply(&c, &z, &rho, &model, &b).unwrap()
    );
}

#[test]
fn lyapunov_rate_at_origin_is_trace() {
    let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5);
    let rho = EmpiricalMeasure::uniform(3, vec![0.0; 3]).unwrap();
    let r = lyapunov_rate(&PhasePoint::zeros(3), &rho, &model, &basis(3)).unwrap();
    // 2 Σ q_k with q_k = σ²/2.
    assert_abs_diff_eq!(r, 3.0 * 0.25, epsilon = 1e-15);
}

#[test]
fn lyapunov_rate_linear_expansion() {
    let (kappa, a, gamma, s) = (0.4, 0.2, 1.0, 0.5);
    let model = ModelSpec::linear(kappa, a, gamma, s);
    let m = 2;
    let b = basis(m);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let atoms = random_vec(&mut rng, 10 * m, 1.0);
        let rho = EmpiricalMeasure::uniform(m, atoms).unwrap();
        let mean = rho.mean();
        let u = random_vec(&mut rng, m, 2.0);
        let v = random_vec(&mut rng, m, 2.0);
        let mut expected = 0.0;
        for k in 0..m {
            let lam = b.eigenvalues()[k];
            // 2u v + 2v(−λu − γv − a u − κ(u − ū)) + σ²
            expected += 2.0 * u[k] * v[k]
                + 2.0 * v[k] * (-lam * u[k] - gamma * v[k] - a * u[k] - kappa * (u[k] - mean[k]))
                + s * s;
        }
        let r = lyapunov_rate(&point(u, v), &rho, &model, &b).unwrap();
        assert!((r - expected).abs() < 1e-10 * expected.abs().max(1.0));
    }
}

#[test]
fn lyapunov_rate_below_derived_bound() {
    let b = basis(2);
    for model in [
        ModelSpec::linear(0.4, 0.2, 1.0, 0.5),
        ModelSpec::saturated(0.3, 0.2, 0.5, 0.5, 0.2),
    ] {
        let asm = validate_assumptions(&model, &b, 200, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..1000 {
            let scale = [0.1, 1.0, 5.0][rng.random_range(0..3)];
            let atoms = random_vec(&mut rng, 8 * 2, scale);
            let rho = EmpiricalMeasure::uniform(2, atoms).unwrap();
            if rho.first_moment() > model.moment_budget {
                continue;
            }
            let z = point(random_vec(&mut rng, 2, scale), random_vec(&mut rng, 2, scale));
            let v = 1.0 + z.norm_sq();
            let r = lyapunov_rate(&z, &rho, &model, &b).unwrap();
            assert!(r <= asm.lambda1 + asm.lambda2 * v + 1e-9, "{r} vs {v}");
        }
    }
}

#[test]
fn assumptions_linear_and_constant_sigma() {
    let model = ModelSpec::linear(0.5, 0.0, 1.0, 0.5);
    let asm = validate_assumptions(&model, &basis(2), 1000, 3).unwrap();
    assert_eq!(asm.l_kernel, 0.5);
    assert!(asm.estimated.kernel <= 0.5 + 1e-12);
    assert!(asm.estimated.kernel > 0.49);
    assert_eq!(asm.l_sigma, 0.0);
    assert_eq!(asm.estimated.sigma, 0.0);
    assert_abs_diff_eq!(asm.theta, 0.125, epsilon = 1e-15);
}

#[test]
fn assumptions_saturated_kernel_probe() {
    let model = ModelSpec::saturated(0.3, 0.0, 1.0, 0.5, 0.0);
    let asm = validate_assumptions(&model, &basis(1), 1000, 4).unwrap();
    assert!((0.29..=0.30).contains(&asm.estimated.kernel), "{}", asm.estimated.kernel);
    assert_eq!(asm.l_kernel, 0.3);
}

#[test]
fn assumptions_reject_understated_constant() {
    let mut model = ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.1);
    model.declared.l_kernel = Some(0.2);
    let err = validate_assumptions(&model, &basis(1), 1000, 5).unwrap_err();
    assert!(matches!(
        err,
        Error::AssumptionViolation {
            hypothesis: crate::error::Hypothesis::KernelLipschitz,
            ..
        }
    ));
    let mut model = ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.1);
    model.declared.l_sigma = Some(0.05);
    assert!(validate_assumptions(&model, &basis(1), 1000, 5).is_err());
    assert!(validate_assumptions(&model, &basis(1), 1, 5).is_err());
}

#[test]
fn ellipticity_and_diffusion_derivatives() {
    let model = ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.2);
    let b = basis(3);
    let asm = validate_assumptions(&model, &b, 100, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut q = vec![0.0; 3];
    for _ in 0..500 {
        let u = random_vec(&mut rng, 3, 5.0);
        model.diffusion_diag(&u, &mut q);
        let xi = random_vec(&mut rng, 3, 1.0);
        let norm2: f64 = xi.iter().map(|x| x * x).sum();
        let quad: f64 = q.iter().zip(&xi).map(|(a, x)| a * x * x).sum();
        assert!(quad >= asm.theta * norm2 - 1e-15);
        // Derivative of q along a random direction stays within ϖ.
        let h = 1e-6;
        let up: Vec<f64> = u.iter().zip(&xi).map(|(a, x)| a + h * x).collect();
        let mut qp = vec![0.0; 3];
        model.diffusion_diag(&up, &mut qp);
        let slope = qp
            .iter()
            .zip(&q)
            .map(|(a, b)| ((a - b) / h).powi(2))
            .sum::<f64>()
            .sqrt()
            / norm2.sqrt();
        assert!(slope <= asm.varpi + 1e-6);
    }
    assert!(asm.alpha <= asm.l_kernel + asm.l_psi + asm.omega + 1e-12);
}

#[test]
fn one_sided_lipschitz_of_full_drift() {
    let b = basis(3);
    for model in [
        ModelSpec::linear(0.4, 0.2, 1.0, 0.5),
        ModelSpec::saturated(0.3, 0.2, 0.5, 0.5, 0.2),
        ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.2).with_epsilon(0.5),
    ] {
        let asm = validate_assumptions(&model, &b, 100, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let rho = EmpiricalMeasure::uniform(3, random_vec(&mut rng, 30, 1.0)).unwrap();
        for _ in 0..300 {
            let z1 = point(random_vec(&mut rng, 3, 2.0), random_vec(&mut rng, 3, 2.0));
            let z2 = point(random_vec(&mut rng, 3, 2.0), random_vec(&mut rng, 3, 2.0));
            let d1 = drift_full(&z1, &rho, &model, &b).unwrap().to_flat();
            let d2 = drift_full(&z2, &rho, &model, &b).unwrap().to_flat();
            let dz: Vec<f64> = z1.to_flat().iter().zip(z2.to_flat()).map(|(a, b)| a - b).collect();
            let inner: f64 = d1.iter().zip(&d2).zip(&dz).map(|((a, b), c)| (a - b) * c).sum();
            let n2: f64 = dz.iter().map(|x| x * x).sum();
            assert!(inner <= asm.alpha * n2 + 1e-10);
        }
    }
}

#[test]
fn invalid_models_rejected() {
    let mut m = ModelSpec::linear(0.5, 0.0, 1.0, 0.5);
    m.gamma = -1.0;
    assert!(m.validate().is_err());
    let m = ModelSpec::linear(0.5, 0.0, 1.0, 0.5).with_epsilon(0.0);
    assert!(m.validate().is_err());
    let m = ModelSpec::saturated(0.3, 0.2, 1.0, 0.1, 0.2);
    assert!(m.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_lipschitz_bound_holds(a in -2.0f64..2.0, b in -2.0f64..2.0, x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let map = FieldMap::new(vec![Primitive::Linear { strength: a }, Primitive::Saturated { strength: b }]);
        let d = (map.eval_scalar(x) - map.eval_scalar(y)).abs();
        prop_assert!(d <= map.lipschitz() * (x - y).abs() + 1e-12);
    }

    #[test]
    fn mean_field_self_consistency(seed in 0u64..500) {
        let model = ModelSpec::saturated(0.3, 0.2, 1.0, 0.5, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = random_vec(&mut rng, 12 * 4, 2.0);
        let mf = MeanField::from_phase_states(&model, 2, &states).unwrap();
        let u_atoms: Vec<f64> = states.chunks(4).flat_map(|r| r[..2].to_vec()).collect();
        let rho = EmpiricalMeasure::uniform(2, u_atoms).unwrap();
        for row in states.chunks(4) {
            let mut f = vec![0.0; 2];
            mf.force(&row[..2], &mut f);
            let g = kernel_convolve(&row[..2].to_vec().into(), &rho, &model).unwrap();
            prop_assert!((f[0] - g.0[0]).abs() < 1e-12 && (f[1] - g.0[1]).abs() < 1e-12);
        }
    }
}
