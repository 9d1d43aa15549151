//! Grid solve of the one-mode Fokker–Planck equation.

use kinetic_mf::fpe::{DensityField, FpeSolver, FpeTrajectory, StepDiagnostics};
use kinetic_mf::measure::LyapunovMonitor;

use super::Context;
use crate::config::RunConfig;
use crate::error::{ExpError, Result};
use crate::output::{Chart, Report, Series, Table};

/// Largest per-step mass change accepted as conservation.
pub const MASS_TOLERANCE: f64 = 1e-12;

pub fn require_one_mode(ctx: &Context) -> Result<()> {
    if ctx.modes() != 1 {
        return Err(ExpError::config("the grid solver needs galerkin.modes = 1"));
    }
    Ok(())
}

/// Gaussian initial density matching the configured particle initial law.
pub fn initial_density(ctx: &Context, grid: kinetic_mf::fpe::PhaseGrid) -> Result<DensityField> {
    let mean = ctx.cfg.init_mean();
    let var = ctx.cfg.init_var();
    Ok(DensityField::gaussian(grid, [mean[0], mean[1]], [var[0], var[1]])?)
}

pub fn solver(ctx: &Context, grid: kinetic_mf::fpe::PhaseGrid) -> Result<FpeSolver> {
    Ok(FpeSolver::new(&ctx.model, &ctx.basis, grid, ctx.cfg.fpe_config())?)
}

/// Mass-conservation and moment-bound checks for one grid run.
pub fn check_trajectory(ctx: &Context, traj: &FpeTrajectory, tag: &str, report: &mut Report) -> Result<()> {
    let worst = traj
        .diagnostics
        .iter()
        .map(|d| d.mass_change)
        .fold(0.0, f64::max);
    report.check(
        format!("mass[{tag}]"),
        worst <= MASS_TOLERANCE,
        format!("max per-step mass change {worst:.3e}"),
    );
    let mut mon = LyapunovMonitor::new(ctx.assumptions.lambda1, ctx.assumptions.lambda2);
    for (t, f) in traj.times.iter().zip(&traj.fields) {
        mon.push_moment(*t, f.v_moment())?;
    }
    report.check(
        format!("lyapunov[{tag}]"),
        mon.flags.is_empty(),
        format!("{} flagged intervals, max excess {:.3e}", mon.flags.len(), mon.max_excess),
    );
    Ok(())
}

pub fn diagnostics_csv(diag: &[StepDiagnostics]) -> String {
    let mut s = String::from(StepDiagnostics::CSV_HEADER);
    s.push('\n');
    for d in diag {
        s.push_str(&d.csv_row());
        s.push('\n');
    }
    s
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let ctx = Context::new(cfg)?;
    require_one_mode(&ctx)?;
    let mut report = Report::default();
    report.add_assumptions(&ctx.assumptions);
    let grid = cfg.phase_grid()?;
    let solver = solver(&ctx, grid)?;
    let rho0 = initial_density(&ctx, grid)?;
    let traj = solver.run(&rho0, cfg.experiment.t, cfg.experiment.snapshot_every)?;
    check_trajectory(&ctx, &traj, "fpe", &mut report)?;
    report
        .files
        .push(("diagnostics.csv".into(), diagnostics_csv(&traj.diagnostics)));
    let last = traj.fields.last().expect("initial field present");
    let mut mat = Vec::new();
    last.write_matrix(&mut mat)?;
    report
        .files
        .push(("density_final.dat".into(), String::from_utf8(mat).expect("ascii")));
    let mut mu = Table::new("marginal_u", &["u", "density"]);
    for (i, m) in last.marginal_u_masses().iter().enumerate() {
        mu.push([grid.u_center(i), m / grid.hu()]);
    }
    let mut mv = Table::new("marginal_v", &["v", "density"]);
    for (j, m) in last.marginal_v_masses().iter().enumerate() {
        mv.push([grid.v_center(j), m / grid.hv()]);
    }
    report.charts.push(
        Chart::new("marginals", "Final marginal densities", "coordinate", "density")
            .with(Series::new("u", column_pairs(&mu)))
            .with(Series::new("v", column_pairs(&mv))),
    );
    report.tables.push(mu);
    report.tables.push(mv);
    report.constant("final_boundary_mass", last.boundary_mass());
    Ok(report)
}

fn column_pairs(t: &Table) -> Vec<(f64, f64)> {
    let x = t.column(&t.header[0]).unwrap_or_default();
    let y = t.column(&t.header[1]).unwrap_or_default();
    x.into_iter().zip(y).collect()
}
