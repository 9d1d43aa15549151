//! Experiment orchestration for the kinetic mean-field simulator.

pub mod config;
pub mod error;
pub mod exp;
pub mod output;

use std::path::PathBuf;

use config::RunConfig;
use error::{ExpError, Result};
use output::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Particles,
    Fpe,
    Convergence,
    Stability,
    WeakResidual,
    Bridge,
    Adjoint,
    Validate,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Particles,
        Command::Fpe,
        Command::Convergence,
        Command::Stability,
        Command::WeakResidual,
        Command::Bridge,
        Command::Adjoint,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Particles => "particles",
            Command::Fpe => "fpe",
            Command::Convergence => "convergence",
            Command::Stability => "stability",
            Command::WeakResidual => "weak-residual",
            Command::Bridge => "bridge",
            Command::Adjoint => "adjoint",
            Command::Validate => "validate",
        }
    }
}

/// Run one experiment, on a pool of `cfg.threads` workers when nonzero.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Report> {
    let body = || match cmd {
        Command::Particles => exp::particles::run(cfg),
        Command::Fpe => exp::fpe::run(cfg),
        Command::Convergence => exp::convergence::run(cfg),
        Command::Stability => exp::stability::run(cfg),
        Command::WeakResidual => exp::weak_residual::run(cfg),
        Command::Bridge => exp::bridge::run(cfg),
        Command::Adjoint => exp::adjoint::run(cfg),
        Command::Validate => exp::validate::run(cfg),
    };
    if cfg.threads == 0 {
        return body();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| ExpError::config(format!("thread pool: {e}")))?;
    pool.install(body)
}

/// Run and write outputs to `cfg.out/<command>`; returns the report and the run directory.
pub fn execute_and_write(cmd: Command, cfg: &RunConfig) -> Result<(Report, PathBuf)> {
    let report = execute(cmd, cfg)?;
    let dir = cfg.out.join(cmd.name());
    output::write_run(&dir, cmd.name(), cfg, &report)?;
    Ok((report, dir))
}
