//! Residual of the weak formulation along particle runs, under joint
//! refinement of the particle count and the time step.
//!
//! `R(φ, t) = ∫φ dΓ_t − ∫φ dΓ_0 − ∫_0^t ∫L_Γφ dΓ_s ds`, with the time
//! integral taken by the trapezoid rule over every step.

use rayon::prelude::*;

use kinetic_mf::model::{generator_on_states, Constant, TestFunction};
use kinetic_mf::noise::derive_seed;
use kinetic_mf::particles::{init_ensemble, Snapshot};
use kinetic_mf::reduce::MeanEstimate;

use super::{bump_family, monitor_run, Context};
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{Chart, Report, Series, Table};

const WEAK_LABEL: u64 = 0x3EA4;

/// `max_t |R(φ, t)|` for each test function along one run, plus the snapshots
/// taken every `snapshot_every` steps.
pub fn max_residuals(
    ctx: &Context,
    phis: &[&dyn TestFunction],
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Snapshot>)> {
    let e = &ctx.cfg.experiment;
    let m = ctx.modes();
    let mut ens = init_ensemble(&ctx.cfg.initial_distribution(), n, m, seed)?;
    let steps = ctx.integrator.steps_for(e.t)?;
    let dt = ctx.integrator.dt();
    let k = phis.len();
    let mut first = vec![0.0; k];
    let mut prev_gen = vec![0.0; k];
    let mut integral = vec![0.0; k];
    let mut worst = vec![0.0f64; k];
    let mut snaps = Vec::new();
    for step in 0..=steps {
        if step > 0 {
            ctx.integrator.step(&mut ens)?;
        }
        if step % e.snapshot_every == 0 || step == steps {
            snaps.push(ens.snapshot());
        }
        let states = ens.states();
        for (j, phi) in phis.iter().enumerate() {
            let vals: Vec<f64> = states
                .chunks_exact(2 * m)
                .map(|r| phi.value(&r[..m], &r[m..]))
                .collect();
            let mean = MeanEstimate::of(&vals).mean;
            let gen = MeanEstimate::of(&generator_on_states(*phi, states, m, &ctx.model, &ctx.basis)?).mean;
            if step == 0 {
                first[j] = mean;
            } else {
                integral[j] += 0.5 * dt * (prev_gen[j] + gen);
            }
            prev_gen[j] = gen;
            worst[j] = worst[j].max((mean - first[j] - integral[j]).abs());
        }
    }
    Ok((worst, snaps))
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let ctx0 = Context::new(cfg)?;
    let w = &cfg.experiment.weak_residual;
    let mut report = Report::default();
    report.add_assumptions(&ctx0.assumptions);

    let family = bump_family();
    let phis: Vec<&dyn TestFunction> = family.iter().map(|(_, p)| p as &dyn TestFunction).collect();
    let mut table = Table::new("weak_residual", &["level", "n", "dt", "phi", "mean_max_residual", "stderr"]);
    let mut means: Vec<Vec<f64>> = Vec::new();
    for level in 0..w.levels {
        let n = cfg.experiment.n * 4usize.pow(level as u32);
        let dt = cfg.integrator.dt / 2f64.powi(level as i32);
        let ctx = ctx0.with_dt(dt)?;
        let runs: Vec<(Vec<f64>, Vec<Snapshot>)> = (0..w.repetitions)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(derive_seed(cfg.seed, WEAK_LABEL), (level * 1_000_003 + r) as u64);
                max_residuals(&ctx, &phis, n, seed)
            })
            .collect::<Result<_>>()?;
        if level == 0 {
            monitor_run(&ctx, &runs[0].1, "weak_residual", false, &mut report)?;
        }
        let mut row_means = Vec::new();
        for (j, (name, _)) in family.iter().enumerate() {
            let xs: Vec<f64> = runs.iter().map(|r| r.0[j]).collect();
            let est = MeanEstimate::of(&xs);
            table.push([
                level.to_string(),
                n.to_string(),
                dt.to_string(),
                name.clone(),
                est.mean.to_string(),
                est.stderr.to_string(),
            ]);
            row_means.push(est.mean);
        }
        means.push(row_means);
    }

    let lo = 0.5 / w.ratio_tolerance;
    let hi = 0.5 * w.ratio_tolerance;
    for (j, (name, _)) in family.iter().enumerate() {
        let ratios: Vec<f64> = means.windows(2).map(|p| p[1][j] / p[0][j]).collect();
        let ok = ratios.iter().all(|r| *r >= lo && *r <= hi);
        report.check(
            format!("refinement[{name}]"),
            ok,
            format!(
                "ratios {:?} (expected 0.5 within factor {})",
                ratios.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                w.ratio_tolerance
            ),
        );
    }

    let one = Constant { value: 1.0, modes: 1 };
    let (r0, _) = max_residuals(&ctx0, &[&one], cfg.experiment.n, cfg.seed)?;
    report.check(
        "constant_test_function",
        r0[0] == 0.0,
        format!("max residual {:e}", r0[0]),
    );

    let mut chart = Chart::new("weak_residual", "Weak-form residual under refinement", "N", "mean max |R|").log_log();
    for (j, (name, _)) in family.iter().enumerate() {
        chart = chart.with(Series::new(
            name,
            means
                .iter()
                .enumerate()
                .map(|(l, m)| ((cfg.experiment.n * 4usize.pow(l as u32)) as f64, m[j]))
                .collect(),
        ));
    }
    report.charts.push(chart);
    report.tables.push(table);
    Ok(report)
}
