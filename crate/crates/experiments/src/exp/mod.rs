//! One module per CLI subcommand. Each returns a [`Report`] and never writes
//! to disk itself.

pub mod adjoint;
pub mod bridge;
pub mod convergence;
pub mod fpe;
pub mod particles;
pub mod stability;
pub mod validate;
pub mod weak_residual;

use kinetic_mf::galerkin::GalerkinBasis;
use kinetic_mf::measure::{equicontinuity_check, lyapunov_track};
use kinetic_mf::model::{validate_assumptions, BumpPoly, ModelAssumptions, ModelSpec};
use kinetic_mf::noise::derive_seed;
use kinetic_mf::particles::{Integrator, Snapshot};

use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{Chart, Report, Series, Table};

const PROBE_COUNT: usize = 256;
const PROBE_LABEL: u64 = 0xA55;

/// Model, basis, integrator and validated constants for one config.
pub struct Context {
    pub cfg: RunConfig,
    pub model: ModelSpec,
    pub basis: GalerkinBasis,
    pub integrator: Integrator,
    pub assumptions: ModelAssumptions,
}

impl Context {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let model = cfg.model_spec()?;
        let basis = cfg.basis()?;
        let integrator = Integrator::new(&model, &basis, cfg.integrator_config())?;
        let assumptions =
            validate_assumptions(&model, &basis, PROBE_COUNT, derive_seed(cfg.seed, PROBE_LABEL))?;
        Ok(Self {
            cfg: cfg.clone(),
            model,
            basis,
            integrator,
            assumptions,
        })
    }

    pub fn modes(&self) -> usize {
        self.basis.mode_count()
    }

    /// Same context with a different time step.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        let mut cfg = self.cfg.clone();
        cfg.integrator.dt = dt;
        let integrator = Integrator::new(&self.model, &self.basis, cfg.integrator_config())?;
        Ok(Self {
            cfg,
            model: self.model.clone(),
            basis: self.basis.clone(),
            integrator,
            assumptions: self.assumptions.clone(),
        })
    }
}

/// Three bumps in the first mode with distinct centers and scales.
pub fn bump_family() -> Vec<(String, BumpPoly)> {
    [
        ("bump_a", [0.0, 0.0], 1.0),
        ("bump_b", [0.4, -0.2], 0.7),
        ("bump_c", [-0.3, 0.3], 1.5),
    ]
    .into_iter()
    .map(|(name, c, r)| (name.to_string(), BumpPoly::radial(c.to_vec(), r, 1.0)))
    .collect()
}

/// Moment-bound and equicontinuity checks along one recorded run.
///
/// Adds `lyapunov[tag]` and `equicontinuity[tag]` checks and, when `detail`
/// is set, a table and chart of the `V`-moment against its bound.
pub fn monitor_run(
    ctx: &Context,
    snaps: &[Snapshot],
    tag: &str,
    detail: bool,
    report: &mut Report,
) -> Result<()> {
    let a = &ctx.assumptions;
    let mon = lyapunov_track(snaps, a)?;
    let v0 = mon.v_mean[0];
    let t0 = snaps[0].time;
    report.check(
        format!("lyapunov[{tag}]"),
        mon.flags.is_empty(),
        format!(
            "{} flagged steps, max excess {:.3e}",
            mon.flags.len(),
            mon.max_excess
        ),
    );
    let horizon = snaps.last().map(|s| s.time - t0).unwrap_or(0.0);
    let v_bound = a.v_moment_bound(v0, horizon);
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for (_, phi) in bump_family() {
        let c = a.equicontinuity_constant(&phi, &ctx.model, &ctx.basis, v_bound);
        let rep = equicontinuity_check(snaps, &phi, c)?;
        worst = worst.max(rep.max_excess);
        violations += rep.violations;
    }
    report.check(
        format!("equicontinuity[{tag}]"),
        violations == 0,
        format!("{violations} violating pairs, max excess {worst:.3e}"),
    );
    if detail {
        let mut t = Table::new("lyapunov", &["t", "v_mean", "v_stderr", "bound"]);
        let mut emp = Vec::new();
        let mut bnd = Vec::new();
        for k in 0..mon.times.len() {
            let b = a.v_moment_bound(v0, mon.times[k] - t0);
            t.push([mon.times[k], mon.v_mean[k], mon.v_stderr[k], b]);
            emp.push((mon.times[k], mon.v_mean[k]));
            bnd.push((mon.times[k], b));
        }
        report.tables.push(t);
        report.charts.push(
            Chart::new("lyapunov", "V-moment against its bound", "t", "E V")
                .with(Series::new("empirical", emp))
                .with(Series::new("bound", bnd)),
        );
    }
    Ok(())
}
