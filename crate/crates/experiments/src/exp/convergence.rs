//! Empirical measure against a reference law as the particle count grows.

use rayon::prelude::*;

use kinetic_mf::analytic::linear_gaussian_law;
use kinetic_mf::measure::{EmpiricalMeasure, SlicedProjector, W1Method};
use kinetic_mf::noise::derive_seed;
use kinetic_mf::particles::{init_ensemble, Snapshot};
use kinetic_mf::reduce::MeanEstimate;

use super::{monitor_run, Context};
use crate::config::{InitKind, ReferenceKind, RunConfig};
use crate::error::{ExpError, Result};
use crate::output::{Chart, Report, Series, Table};

const REFERENCE_LABEL: u64 = 0x5EF;
const PROJECTION_LABEL: u64 = 0x940;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub repetitions: usize,
    pub mean_w1: f64,
    pub stderr: f64,
    pub method: W1Method,
}

/// Rows sorted by `N`, all computed with one W1 method.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTable {
    rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn push(&mut self, row: ConvergenceRow) -> Result<()> {
        if let Some(first) = self.rows.first() {
            if first.method != row.method {
                return Err(ExpError::config(format!(
                    "cannot mix {} and {} distances in one table",
                    first.method.label(),
                    row.method.label()
                )));
            }
        }
        let at = self.rows.partition_point(|r| r.n < row.n);
        self.rows.insert(at, row);
        Ok(())
    }

    pub fn rows(&self) -> &[ConvergenceRow] {
        &self.rows
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_w1 < w[0].mean_w1)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new("convergence", &["n", "repetitions", "mean_w1", "stderr", "method"]);
        for r in &self.rows {
            t.push([
                r.n.to_string(),
                r.repetitions.to_string(),
                r.mean_w1.to_string(),
                r.stderr.to_string(),
                r.method.label().to_string(),
            ]);
        }
        t
    }
}

/// Particle ensemble at time `t` as an empirical measure, plus its snapshots.
pub fn particle_measure(ctx: &Context, n: usize, seed: u64) -> Result<(EmpiricalMeasure, Vec<Snapshot>)> {
    let e = &ctx.cfg.experiment;
    let mut ens = init_ensemble(&ctx.cfg.initial_distribution(), n, ctx.modes(), seed)?;
    let snaps = ctx.integrator.run(&mut ens, e.t, e.snapshot_every)?;
    Ok((ens.to_measure(), snaps))
}

/// Reference sample for the law at time `t`.
pub fn reference_sample(ctx: &Context, n_ref: usize) -> Result<EmpiricalMeasure> {
    let cfg = &ctx.cfg;
    let seed = derive_seed(cfg.seed, REFERENCE_LABEL);
    match cfg.experiment.convergence.reference {
        ReferenceKind::Analytic => {
            let var = match cfg.experiment.init {
                InitKind::Gaussian => cfg.init_var(),
                InitKind::Point => vec![0.0; 2 * ctx.modes()],
                InitKind::TwoCluster => {
                    return Err(ExpError::config(
                        "the analytic reference needs a gaussian or point initial law",
                    ))
                }
            };
            let law = linear_gaussian_law(&ctx.model, &ctx.basis, &cfg.init_mean(), &var, cfg.experiment.t)
                .map_err(|e| ExpError::config(format!("analytic reference unavailable: {e}")))?;
            Ok(law.sample(n_ref, seed)?)
        }
        ReferenceKind::LargeN => Ok(particle_measure(ctx, n_ref, seed)?.0),
    }
}

fn halves(mu: &EmpiricalMeasure) -> Result<(EmpiricalMeasure, EmpiricalMeasure)> {
    let d = mu.dim();
    let half = mu.len() / 2;
    let atoms = mu.atoms();
    Ok((
        EmpiricalMeasure::uniform(d, atoms[..half * d].to_vec())?,
        EmpiricalMeasure::uniform(d, atoms[half * d..2 * half * d].to_vec())?,
    ))
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let ctx = Context::new(cfg)?;
    let c = &cfg.experiment.convergence;
    let mut report = Report::default();
    report.add_assumptions(&ctx.assumptions);

    let n_max = *c.sweep_n.iter().max().expect("nonempty sweep");
    let n_ref = c.reference_factor * n_max;
    let reference = reference_sample(&ctx, n_ref)?;
    let proj = SlicedProjector::random(2 * ctx.modes(), c.projections, derive_seed(cfg.seed, PROJECTION_LABEL))?;
    let ref_proj = proj.project(&reference)?;
    let (h1, h2) = halves(&reference)?;
    let split_half = proj.distance_projected(&proj.project(&h1)?, &proj.project(&h2)?);
    report.constant("reference_size", n_ref as f64);
    report.constant("reference_split_half_w1", split_half);

    let mut sweep = c.sweep_n.clone();
    sweep.sort_unstable();
    sweep.dedup();
    let cells: Vec<(usize, usize)> = sweep
        .iter()
        .flat_map(|&n| (0..c.repetitions).map(move |r| (n, r)))
        .collect();
    let results: Vec<(f64, Option<Vec<Snapshot>>)> = cells
        .par_iter()
        .map(|&(n, r)| -> Result<_> {
            let seed = derive_seed(derive_seed(cfg.seed, n as u64), r as u64);
            let (mu, snaps) = particle_measure(&ctx, n, seed)?;
            let w = proj.distance_projected(&proj.project(&mu)?, &ref_proj);
            let keep = n == n_max && r == 0;
            Ok((w, keep.then_some(snaps)))
        })
        .collect::<Result<_>>()?;

    let mut table = ConvergenceTable::default();
    let mut raw = Table::new("convergence_raw", &["n", "repetition", "w1"]);
    for (k, &n) in sweep.iter().enumerate() {
        let ws: Vec<f64> = results[k * c.repetitions..(k + 1) * c.repetitions]
            .iter()
            .map(|r| r.0)
            .collect();
        for (r, w) in ws.iter().enumerate() {
            raw.push([n as f64, r as f64, *w]);
        }
        let est = MeanEstimate::of(&ws);
        table.push(ConvergenceRow {
            n,
            repetitions: c.repetitions,
            mean_w1: est.mean,
            stderr: est.stderr,
            method: W1Method::Sliced,
        })?;
    }
    if let Some(snaps) = results.iter().find_map(|r| r.1.as_ref()) {
        monitor_run(&ctx, snaps, "convergence", false, &mut report)?;
    }

    let rows = table.rows();
    let last = rows.last().expect("nonempty table");
    report.check(
        "w1_decreasing",
        table.strictly_decreasing(),
        rows.iter()
            .map(|r| format!("N={}: {:.4e}", r.n, r.mean_w1))
            .collect::<Vec<_>>()
            .join(", "),
    );
    report.check(
        "w1_reaches_reference_noise",
        last.mean_w1 < 2.0 * split_half,
        format!("N={} mean {:.4e} vs 2 x split-half {:.4e}", last.n, last.mean_w1, 2.0 * split_half),
    );
    report.charts.push(
        Chart::new("convergence", "Sliced W1 to the reference", "N", "W1")
            .log_log()
            .with(Series::new("mean W1", rows.iter().map(|r| (r.n as f64, r.mean_w1)).collect()))
            .with(Series::new(
                "split-half",
                rows.iter().map(|r| (r.n as f64, split_half)).collect(),
            )),
    );
    report.tables.push(table.to_table());
    report.tables.push(raw);
    Ok(report)
}
