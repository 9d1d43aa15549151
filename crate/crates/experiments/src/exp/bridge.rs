//! One-mode grid solution against a large particle ensemble from the same
//! initial law, compared through the 1D marginals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kinetic_mf::analytic::linear_gaussian_law;
use kinetic_mf::fpe::{marginal_u, DensityField, FpeTrajectory, PhaseGrid};
use kinetic_mf::measure::{w1_marginal_1d, Marginal1d};
use kinetic_mf::noise::derive_seed;
use kinetic_mf::particles::{init_ensemble, Snapshot};
use kinetic_mf::reduce::MeanEstimate;

use super::fpe::{check_trajectory, initial_density, require_one_mode, solver};
use super::{monitor_run, Context};
use crate::config::{ModelKind, RunConfig};
use crate::error::{ExpError, Result};
use crate::output::{Chart, Report, Series, Table};

const BOOT_LABEL: u64 = 0xB007;

/// Tolerance on the L1 drift of the stationary density.
pub const STATIONARY_L1: f64 = 0.02;

/// `n` draws from a normalized histogram, uniform within each cell.
pub fn sample_histogram(edges: &[f64], mass: &[f64], n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(mass.len());
    let mut acc = 0.0;
    for m in mass {
        acc += m;
        cdf.push(acc);
    }
    (0..n)
        .map(|_| {
            let x: f64 = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= x).min(mass.len() - 1);
            edges[i] + rng.random::<f64>() * (edges[i + 1] - edges[i])
        })
        .collect()
}

/// Mean W1 between a histogram and `n`-point samples drawn from it.
pub fn sampling_fluctuation(hist: &Marginal1d, n: usize, reps: usize, seed: u64) -> Result<f64> {
    let Marginal1d::Histogram { edges, mass } = hist else {
        return Err(ExpError::config("fluctuation needs a histogram marginal"));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = Vec::with_capacity(reps);
    for _ in 0..reps {
        let xs = sample_histogram(edges, mass, n, &mut rng);
        ws.push(w1_marginal_1d(hist, &Marginal1d::uniform_atoms(xs))?);
    }
    Ok(MeanEstimate::of(&ws).mean)
}

/// Per-checkpoint distances and fluctuation levels.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeRow {
    pub t: f64,
    pub w1_u: f64,
    pub w1_v: f64,
    pub fluct_u: f64,
    pub fluct_v: f64,
}

impl BridgeRow {
    /// Distance in excess of the sampling fluctuation, summed over both marginals.
    pub fn gap(&self) -> f64 {
        (self.w1_u - self.fluct_u).max(0.0) + (self.w1_v - self.fluct_v).max(0.0)
    }
}

fn compare(
    fpe: &FpeTrajectory,
    snaps: &[Snapshot],
    bootstrap: usize,
    seed: u64,
) -> Result<Vec<BridgeRow>> {
    if fpe.fields.len() != snaps.len() {
        return Err(ExpError::config("grid and particle checkpoints do not line up"));
    }
    let mut rows = Vec::new();
    for (k, (rho, snap)) in fpe.fields.iter().zip(snaps).enumerate() {
        let mu = marginal_u(rho);
        let mv = rho.marginal_v();
        let n = snap.len();
        let s = derive_seed(seed, k as u64);
        rows.push(BridgeRow {
            t: snap.time,
            w1_u: w1_marginal_1d(&mu, &Marginal1d::uniform_atoms(snap.coordinate(0)))?,
            w1_v: w1_marginal_1d(&mv, &Marginal1d::uniform_atoms(snap.coordinate(1)))?,
            fluct_u: sampling_fluctuation(&mu, n, bootstrap, derive_seed(s, 0))?,
            fluct_v: sampling_fluctuation(&mv, n, bootstrap, derive_seed(s, 1))?,
        });
    }
    Ok(rows)
}

fn cadence(checkpoint_dt: f64, dt: f64, what: &str) -> Result<u64> {
    let k = (checkpoint_dt / dt).round();
    if k < 1.0 || (k * dt - checkpoint_dt).abs() > 1e-9 * checkpoint_dt {
        return Err(ExpError::config(format!(
            "bridge.checkpoint_dt must be a multiple of the {what} step"
        )));
    }
    Ok(k as u64)
}

/// Stationary Gaussian of the linear model, advanced by the grid solver;
/// returns the L1 drift and the trajectory.
pub fn stationary_drift(ctx: &Context, grid: PhaseGrid, t: f64) -> Result<(f64, FpeTrajectory)> {
    let law = linear_gaussian_law(&ctx.model, &ctx.basis, &[0.0, 0.0], &[0.0, 0.0], 200.0)?;
    let c = law.cov[0];
    let rho0 = DensityField::correlated_gaussian(
        grid,
        [law.mean[0][0], law.mean[0][1]],
        [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]],
    )?;
    let traj = solver(ctx, grid)?.run(&rho0, t, u64::MAX)?;
    let last = traj.fields.last().expect("field present");
    Ok((last.l1_distance(&rho0)?, traj))
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let ctx = Context::new(cfg)?;
    require_one_mode(&ctx)?;
    let b = &cfg.experiment.bridge;
    let mut report = Report::default();
    report.add_assumptions(&ctx.assumptions);

    let grid = cfg.phase_grid()?;
    let h = grid.hu().max(grid.hv());
    let fpe_every = cadence(b.checkpoint_dt, cfg.fpe.dt, "grid")?;
    let traj = solver(&ctx, grid)?.run(&initial_density(&ctx, grid)?, cfg.experiment.t, fpe_every)?;
    check_trajectory(&ctx, &traj, "bridge_grid", &mut report)?;

    let part_every = cadence(b.checkpoint_dt, cfg.integrator.dt, "particle")?;
    let mut ens = init_ensemble(&cfg.initial_distribution(), cfg.experiment.n, 1, cfg.seed)?;
    let snaps = ctx.integrator.run(&mut ens, cfg.experiment.t, part_every)?;
    monitor_run(&ctx, &snaps, "bridge_particles", false, &mut report)?;
    let boot_seed = derive_seed(cfg.seed, BOOT_LABEL);
    let rows = compare(&traj, &snaps, b.bootstrap, boot_seed)?;

    let coarse = if b.coarse_comparison {
        let g2 = PhaseGrid::new(grid.r_u, grid.r_v, (grid.n_u / 2).max(2), (grid.n_v / 2).max(2))?;
        let t2 = solver(&ctx, g2)?.run(&initial_density(&ctx, g2)?, cfg.experiment.t, fpe_every)?;
        Some(compare(&t2, &snaps, b.bootstrap, boot_seed)?)
    } else {
        None
    };

    let mut table = Table::new(
        "bridge",
        &["t", "w1_u", "w1_v", "fluct_u", "fluct_v", "budget_u", "budget_v", "gap", "gap_coarse"],
    );
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (k, r) in rows.iter().enumerate() {
        let bu = 3.0 * r.fluct_u + h;
        let bv = 3.0 * r.fluct_v + h;
        ok &= r.w1_u <= bu && r.w1_v <= bv;
        worst = worst.max((r.w1_u / bu).max(r.w1_v / bv));
        let gc = coarse.as_ref().map(|c| c[k].gap()).unwrap_or(f64::NAN);
        table.push([r.t, r.w1_u, r.w1_v, r.fluct_u, r.fluct_v, bu, bv, r.gap(), gc]);
    }
    report.check(
        "marginal_w1_budget",
        ok,
        format!("max distance / (3 x fluctuation + h) = {worst:.3}"),
    );
    if let Some(c) = &coarse {
        let fine: f64 = rows.iter().map(BridgeRow::gap).sum();
        let crude: f64 = c.iter().map(BridgeRow::gap).sum();
        report.constant("gap_fine", fine);
        report.constant("gap_coarse", crude);
        report.notes.push(format!(
            "non-statistical gap summed over checkpoints: fine grid {fine:.3e}, half-resolution grid {crude:.3e}"
        ));
    }
    report.charts.push(
        Chart::new("bridge", "Grid against particles", "t", "W1")
            .with(Series::new("u", rows.iter().map(|r| (r.t, r.w1_u)).collect()))
            .with(Series::new("v", rows.iter().map(|r| (r.t, r.w1_v)).collect()))
            .with(Series::new("3 fluct_u + h", rows.iter().map(|r| (r.t, 3.0 * r.fluct_u + h)).collect())),
    );
    report.tables.push(table);

    if cfg.model.kind == ModelKind::Linear {
        let (l1, st) = stationary_drift(&ctx, grid, b.stationary_t)?;
        check_trajectory(&ctx, &st, "stationary_grid", &mut report)?;
        report.constant("stationary_l1", l1);
        report.check(
            "stationary_self_consistency",
            l1 <= STATIONARY_L1,
            format!("L1 drift {l1:.3e} over T = {}", b.stationary_t),
        );
    } else {
        report
            .notes
            .push("stationary self-consistency needs the linear model; skipped".into());
    }
    Ok(report)
}
