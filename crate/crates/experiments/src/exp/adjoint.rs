//! Backward equation along a recorded run: maximum principle and gradient
//! bound at seeded probe points, and the duality trace `I(s)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kinetic_mf::adjoint::{duality_check, grad_fk, gradient_bound_cert, solve_fk, AdjointProblem, FrozenFlow};
use kinetic_mf::galerkin::PhasePoint;
use kinetic_mf::model::{BumpPoly, Constant, TestFunction};
use kinetic_mf::noise::derive_seed;
use kinetic_mf::particles::init_ensemble;

use super::{monitor_run, Context};
use crate::config::RunConfig;
use crate::error::{ExpError, Result};
use crate::output::{Chart, Report, Series, Table};

const PROBE_LABEL: u64 = 0xADA;
const FK_LABEL: u64 = 0xF4C;
const DUALITY_LABEL: u64 = 0xD0A1;

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let ctx = Context::new(cfg)?;
    let a = &cfg.experiment.adjoint;
    let m = ctx.modes();
    let t = cfg.experiment.t;
    let mut report = Report::default();
    report.add_assumptions(&ctx.assumptions);

    let center = if a.psi_center.is_empty() {
        vec![0.0; 2 * m]
    } else {
        a.psi_center.clone()
    };
    let psi = BumpPoly::with_unit_gradient(center.clone(), a.psi_radius, 1.0);
    let cert = gradient_bound_cert(&ctx.assumptions, &psi)?;
    report.constant("kappa", cert.kappa);
    report.constant("c_tilde", cert.c_tilde);
    let max_psi = psi.sup_value();

    let steps = ctx.integrator.steps_for(t)?;
    let intervals = (a.duality_points - 1) as u64;
    if steps == 0 || steps % intervals != 0 {
        return Err(ExpError::config(
            "adjoint.duality_points - 1 must divide the number of time steps",
        ));
    }
    let mut ens = init_ensemble(&cfg.initial_distribution(), cfg.experiment.n, m, cfg.seed)?;
    let (flow, snaps) = FrozenFlow::record(&ctx.integrator, &mut ens, t, a.thin, steps / intervals)?;
    monitor_run(&ctx, &snaps, "adjoint", false, &mut report)?;
    let dt = flow.dt();
    let prob = AdjointProblem::new(Arc::new(psi.clone()), t, flow.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, PROBE_LABEL));
    let mut header = vec!["s".to_string()];
    header.extend((1..=m).map(|k| format!("u{k}")));
    header.extend((1..=m).map(|k| format!("v{k}")));
    header.extend(["f", "f_stderr", "grad_norm", "grad_stderr"].map(String::from));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut probes = Table::new("probes", &refs);
    let (mut max_ok, mut grad_ok) = (true, true);
    let (mut worst_f, mut worst_g): (f64, f64) = (0.0, 0.0);
    for k in 0..a.probes {
        let s = rng.random_range(0..=steps) as f64 * dt;
        let z: Vec<f64> = center
            .iter()
            .map(|c| c + rng.random_range(-1.0..1.0) * a.psi_radius)
            .collect();
        let p = PhasePoint::from_flat(&z)?;
        let seed = derive_seed(derive_seed(cfg.seed, FK_LABEL), k as u64);
        let f = solve_fk(&prob, s, &p, a.fk_samples, seed)?;
        let g = grad_fk(&prob, s, &p, a.fk_samples, seed)?;
        max_ok &= f.mean.abs() <= max_psi + 3.0 * f.stderr;
        grad_ok &= g.norm() <= cert.c_tilde + 3.0 * g.norm_stderr();
        worst_f = worst_f.max(f.mean.abs() / max_psi);
        worst_g = worst_g.max(g.norm() / cert.c_tilde);
        let mut row = vec![s];
        row.extend(&z);
        row.extend([f.mean, f.stderr, g.norm(), g.norm_stderr()]);
        probes.push(row);
    }
    report.check(
        "maximum_principle",
        max_ok,
        format!("max |f| / max|psi| = {worst_f:.4}"),
    );
    report.check(
        "gradient_bound",
        grad_ok,
        format!("max |grad f| / C~ = {worst_g:.4}, C~ = {:.4}", cert.c_tilde),
    );

    let z0 = PhasePoint::from_flat(&center)?;
    let end = solve_fk(&prob, t, &z0, 8, 0)?;
    report.check(
        "terminal_identity",
        end.mean == psi.value(z0.u.as_slice(), z0.v.as_slice()) && end.stderr == 0.0,
        format!("f(t, center) = {}", end.mean),
    );
    let constant = AdjointProblem::new(Arc::new(Constant { value: 0.7, modes: m }), t, flow)?;
    let c = solve_fk(&constant, 0.0, &z0, 64, 1)?;
    report.check(
        "constant_identity",
        c.mean == 0.7 && c.stderr == 0.0,
        format!("f = {}, stderr = {}", c.mean, c.stderr),
    );

    let dual = duality_check(&prob, &snaps, a.duality_samples, derive_seed(cfg.seed, DUALITY_LABEL))?;
    report.constant("duality_max_deviation", dual.max_deviation);
    report.check(
        "duality",
        dual.within_budget(),
        format!(
            "max |I(s) - I(t)| = {:.3e}, tightest budget {:.3e}",
            dual.max_deviation,
            dual.budget[..dual.budget.len() - 1]
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b))
        ),
    );
    let mut buf = Vec::new();
    dual.write_csv(&mut buf)?;
    report
        .files
        .push(("duality.csv".into(), String::from_utf8(buf).expect("ascii")));
    report.charts.push(
        Chart::new("duality", "Duality trace", "s", "I(s)")
            .with(Series::new("I(s)", dual.s.iter().copied().zip(dual.integral.iter().copied()).collect()))
            .with(Series::new("I(t)", dual.s.iter().map(|&s| (s, dual.terminal)).collect())),
    );
    report.tables.push(probes);
    Ok(report)
}
