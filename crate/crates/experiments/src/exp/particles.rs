//! Plain particle run: trajectory CSV plus the moment diagnostics.

use kinetic_mf::particles::{init_ensemble, write_csv, Snapshot};
use kinetic_mf::reduce::MeanEstimate;

use super::{monitor_run, Context};
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{Chart, Report, Series, Table};

/// Run the configured ensemble and return its snapshots.
pub fn simulate(ctx: &Context) -> Result<Vec<Snapshot>> {
    let e = &ctx.cfg.experiment;
    let mut ens = init_ensemble(&ctx.cfg.initial_distribution(), e.n, ctx.modes(), ctx.cfg.seed)?;
    ens.model_ref = ctx.model.name.clone();
    Ok(ctx.integrator.run(&mut ens, e.t, e.snapshot_every)?)
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let ctx = Context::new(cfg)?;
    let mut report = Report::default();
    report.add_assumptions(&ctx.assumptions);
    let snaps = simulate(&ctx)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, "run0", &snaps)?;
    report
        .files
        .push(("trajectory.csv".into(), String::from_utf8(csv).expect("ascii csv")));

    let m = ctx.modes();
    let mut header = vec!["t".to_string()];
    for k in 1..=m {
        header.push(format!("mean_u{k}"));
        header.push(format!("mean_v{k}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut moments = Table::new("moments", &header_refs);
    let mut series = Vec::new();
    for s in &snaps {
        let mut row = vec![s.time];
        for k in 0..m {
            row.push(MeanEstimate::of(&s.coordinate(k)).mean);
            row.push(MeanEstimate::of(&s.coordinate(m + k)).mean);
        }
        series.push((s.time, row[1]));
        moments.push(row);
    }
    report.tables.push(moments);
    report
        .charts
        .push(Chart::new("mean_u1", "Ensemble mean of u_1", "t", "mean").with(Series::new("u_1", series)));
    monitor_run(&ctx, &snaps, "particles", true, &mut report)?;
    Ok(report)
}
