use super::*;
use crate::measure::{w1_marginal_1d, LyapunovMonitor};
use crate::model::validate_assumptions;

fn basis(l: f64) -> GalerkinBasis {
    GalerkinBasis::new(l, 1).unwrap()
}

/// Stationary covariance of the one-mode linear model with zero mean.
fn stationary_var(model: &ModelSpec, b: &GalerkinBasis) -> [f64; 2] {
    let lam = b.eigenvalues()[0] + model.psi_grad.linear_strength() + model.kernel.linear_strength();
    let s = match model.sigma {
        crate::model::SigmaSpec::Constant { level } => level,
        _ => unreachable!(),
    };
    let q = 0.5 * s * s;
    [q / (model.gamma * lam), q / model.gamma]
}

#[test]
fn grid_geometry() {
    let g = PhaseGrid::new(1.0, 2.0, 4, 8).unwrap();
    assert_eq!(g.hu(), 0.5);
    assert_eq!(g.hv(), 0.5);
    assert_eq!(g.u_center(0), -0.75);
    assert_eq!(g.v_edges().len(), 9);
    assert!(PhaseGrid::new(1.0, 1.0, 2, 8).is_err());
    assert!(PhaseGrid::new(-1.0, 1.0, 8, 8).is_err());
}

#[test]
fn pure_transport_moves_rows_without_mixing() {
    let model = ModelSpec::linear(0.0, 0.0, 0.0, 0.0);
    let b = basis(1.0).with_free_transport(true);
    let g = PhaseGrid::new(2.0, 1.0, 200, 10).unwrap();
    // Indicator block in u, uniform over v.
    let mut mass = vec![0.0; g.cells()];
    let mut count = 0;
    for iu in 0..g.n_u {
        let u = g.u_center(iu);
        if (-0.5..0.0).contains(&u) {
            for iv in 0..g.n_v {
                mass[g.index(iu, iv)] = 1.0;
                count += 1;
            }
        }
    }
    for x in &mut mass {
        *x /= count as f64;
    }
    let rho = DensityField::new(g, mass).unwrap();
    let dt = 0.01;
    let traj = fpe_run(&rho, &model, &b, FpeConfig::new(dt), 0.5, 50).unwrap();
    let out = traj.fields.last().unwrap();
    assert_eq!(out.marginal_v_masses().len(), g.n_v);
    for (a, c) in rho.marginal_v_masses().iter().zip(out.marginal_v_masses()) {
        assert!((a - c).abs() < 1e-14);
    }
    for iv in 0..g.n_v {
        let v = g.v_center(iv);
        let (mut m0, mut m1, mut w0, mut w1) = (0.0, 0.0, 0.0, 0.0);
        for iu in 0..g.n_u {
            let u = g.u_center(iu);
            m0 += rho.masses()[g.index(iu, iv)] * u;
            w0 += rho.masses()[g.index(iu, iv)];
            m1 += out.masses()[g.index(iu, iv)] * u;
            w1 += out.masses()[g.index(iu, iv)];
        }
        let shift = m1 / w1 - m0 / w0;
        assert!((shift - v * 0.5).abs() < g.hu(), "row {iv}: {shift} vs {}", v * 0.5);
    }
    assert!((out.total_mass() - 1.0).abs() < 1e-12);
    assert!(out.masses().iter().all(|&x| x >= 0.0));
}

#[test]
fn mass_is_conserved_every_step() {
    let model = ModelSpec::saturated(0.5, 0.3, 1.0, 0.5, 0.2);
    let b = basis(2.0);
    let g = PhaseGrid::new(2.0, 2.5, 64, 64).unwrap();
    let rho = DensityField::gaussian(g, [0.4, -0.3], [0.1, 0.2]).unwrap();
    let traj = fpe_run(&rho, &model, &b, FpeConfig::new(5e-3), 0.25, 10).unwrap();
    assert_eq!(traj.diagnostics.len(), 50);
    for d in &traj.diagnostics {
        assert!(d.mass_change < 1e-12, "{}", d.mass_change);
        assert!(d.picard_iterations >= 1);
    }
    assert!((traj.fields.last().unwrap().total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn run_with_zero_time_returns_input() {
    let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5);
    let g = PhaseGrid::new(1.5, 2.0, 16, 16).unwrap();
    let rho = DensityField::gaussian(g, [0.0, 0.0], [0.1, 0.1]).unwrap();
    let traj = fpe_run(&rho, &model, &basis(4.0), FpeConfig::new(1e-3), 0.0, 1).unwrap();
    assert_eq!(traj.fields.len(), 1);
    assert_eq!(traj.fields[0], rho);
    assert!(traj.diagnostics.is_empty());
}

#[test]
fn marginals_of_product_and_symmetric_densities() {
    let g = PhaseGrid::new(1.0, 1.0, 20, 30).unwrap();
    let f: Vec<f64> = (0..20).map(|i| 1.0 + (i as f64 * 0.3).sin().abs()).collect();
    let h: Vec<f64> = (0..30).map(|j| 1.0 + j as f64).collect();
    let (sf, sh): (f64, f64) = (f.iter().sum(), h.iter().sum());
    let mut mass = vec![0.0; g.cells()];
    for i in 0..20 {
        for j in 0..30 {
            mass[g.index(i, j)] = f[i] / sf * h[j] / sh;
        }
    }
    let rho = DensityField::new(g, mass).unwrap();
    let Marginal1d::Histogram { mass: mu, .. } = marginal_u(&rho) else {
        unreachable!()
    };
    for i in 0..20 {
        assert!((mu[i] - f[i] / sf).abs() < 1e-15);
    }
    let sym = DensityField::gaussian(g, [0.0, 0.3], [0.2, 0.1]).unwrap();
    let Marginal1d::Histogram { mass: ms, .. } = marginal_u(&sym) else {
        unreachable!()
    };
    for i in 0..10 {
        assert!((ms[i] - ms[19 - i]).abs() < 1e-15);
    }
}

#[test]
fn stationary_marginal_matches_gaussian_cdf() {
    let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5);
    let b = basis(4.0);
    let var = stationary_var(&model, &b);
    let g = PhaseGrid::new(1.8, 2.0, 256, 256).unwrap();
    let rho = DensityField::gaussian(g, [0.0, 0.0], var).unwrap();
    let Marginal1d::Histogram { mass, edges } = marginal_u(&rho) else {
        unreachable!()
    };
    let sd = var[0].sqrt();
    let l1: f64 = edges
        .windows(2)
        .zip(&mass)
        .map(|(e, m)| (m - (normal_cdf(e[1] / sd) - normal_cdf(e[0] / sd))).abs())
        .sum();
    assert!(l1 < 1e-3, "{l1}");
}

#[test]
fn stationary_gaussian_stays_put() {
    let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5);
    let b = basis(4.0);
    let var = stationary_var(&model, &b);
    let g = PhaseGrid::new(1.8, 2.0, 96, 96).unwrap();
    let rho = DensityField::gaussian(g, [0.0, 0.0], var).unwrap();
    let traj = fpe_run(&rho, &model, &b, FpeConfig::new(4e-3), 0.5, 125).unwrap();
    let drift = traj.fields.last().unwrap().l1_distance(&rho).unwrap();
    assert!(drift < 0.02, "{drift}");
    assert!(traj.diagnostics.iter().all(|d| d.boundary_mass < 1e-6));
}

#[test]
fn fixed_point_force_is_consistent() {
    let model = ModelSpec::saturated(1.5, 0.0, 1.0, 0.5, 0.0);
    let b = basis(2.0);
    let g = PhaseGrid::new(2.0, 2.5, 48, 48).unwrap();
    let rho = DensityField::gaussian(g, [0.5, 1.0], [0.1, 0.2]).unwrap();
    let cfg = FpeConfig::new(0.01);
    let solver = FpeSolver::new(&model, &b, g, cfg).unwrap();
    let (out, diag) = solver.step(&rho, 0, 0.0).unwrap();
    assert!(diag.picard_iterations > 1);
    let avg: Vec<f64> = rho
        .marginal_u_masses()
        .iter()
        .zip(out.marginal_u_masses())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let force = solver.force_field(&avg).unwrap();
    let again = solver.step_frozen(&rho, &force).unwrap();
    let diff: f64 = again.iter().zip(out.masses()).map(|(a, b)| (a - b).abs()).sum();
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn picard_failure_is_reported() {
    let model = ModelSpec::saturated(1.5, 0.0, 1.0, 0.5, 0.0);
    let g = PhaseGrid::new(2.0, 2.5, 24, 24).unwrap();
    let rho = DensityField::gaussian(g, [0.5, 1.0], [0.1, 0.2]).unwrap();
    let cfg = FpeConfig {
        picard_max_iter: 1,
        ..FpeConfig::new(0.01)
    };
    let err = fpe_step(&rho, &model, &basis(2.0), g, cfg).unwrap_err();
    assert!(matches!(err, Error::PicardDiverged { step: 0, .. }));
}

#[test]
fn v_moment_trace_respects_lyapunov_bound() {
    let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5);
    let b = basis(4.0);
    let asm = validate_assumptions(&model, &b, 100, 0).unwrap();
    let g = PhaseGrid::new(2.5, 2.5, 64, 64).unwrap();
    let rho = DensityField::gaussian(g, [0.6, 0.0], [0.05, 0.05]).unwrap();
    let traj = fpe_run(&rho, &model, &b, FpeConfig::new(5e-3), 0.5, 100).unwrap();
    let mut mon = LyapunovMonitor::new(asm.lambda1, asm.lambda2);
    mon.push_moment(0.0, rho.v_moment()).unwrap();
    for d in &traj.diagnostics {
        mon.push_moment(d.time, d.v_moment).unwrap();
    }
    assert!(mon.flags.is_empty());
}

/// Sum 2×2 blocks of a field on a grid twice as fine.
fn coarsen(fine: &DensityField, coarse: &PhaseGrid) -> Vec<f64> {
    let fg = fine.grid();
    let mut out = vec![0.0; coarse.cells()];
    for iu in 0..fg.n_u {
        for iv in 0..fg.n_v {
            out[coarse.index(iu / 2, iv / 2)] += fine.masses()[fg.index(iu, iv)];
        }
    }
    out
}

#[test]
fn refinement_reduces_change() {
    let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5);
    let b = basis(4.0);
    let t = 0.4;
    let run = |n: usize, dt: f64| {
        let g = PhaseGrid::new(2.0, 2.0, n, n).unwrap();
        let rho = DensityField::gaussian(g, [0.5, -0.3], [0.05, 0.08]).unwrap();
        let traj = fpe_run(&rho, &model, &b, FpeConfig::new(dt), t, 1000).unwrap();
        traj.fields.last().unwrap().clone()
    };
    let r1 = run(32, 0.02);
    let r2 = run(64, 0.01);
    let r3 = run(128, 0.005);
    let c12 = coarsen(&r2, r1.grid());
    let d1: f64 = c12.iter().zip(r1.masses()).map(|(a, b)| (a - b).abs()).sum();
    let c23 = coarsen(&r3, r2.grid());
    let d2: f64 = c23.iter().zip(r2.masses()).map(|(a, b)| (a - b).abs()).sum();
    assert!(d2 < d1 / 1.8, "{d1} then {d2}");
}

#[test]
fn grid_and_particle_marginals_agree_roughly() {
    use crate::particles::{init_ensemble, InitialDistribution, Integrator, IntegratorConfig};
    let model = ModelSpec::linear(0.4, 0.2, 1.0, 0.5);
    let b = basis(4.0);
    let g = PhaseGrid::new(2.0, 2.0, 96, 96).unwrap();
    let rho = DensityField::gaussian(g, [0.5, 0.0], [0.05, 0.05]).unwrap();
    let traj = fpe_run(&rho, &model, &b, FpeConfig::new(5e-3), 0.5, 1000).unwrap();
    let dist = InitialDistribution::Gaussian {
        mean: vec![0.5, 0.0],
        var: vec![0.05, 0.05],
    };
    let mut ens = init_ensemble(&dist, 4096, 1, 3).unwrap();
    let integ = Integrator::new(&model, &b, IntegratorConfig::new(5e-3)).unwrap();
    let snaps = integ.run(&mut ens, 0.5, 100).unwrap();
    let last = snaps.last().unwrap();
    let pu = Marginal1d::uniform_atoms(last.coordinate(0));
    let w = w1_marginal_1d(&marginal_u(traj.fields.last().unwrap()), &pu).unwrap();
    assert!(w < 0.03, "{w}");
}
