use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kinetic_mf_experiments::config::RunConfig;
use kinetic_mf_experiments::{execute_and_write, Command};

#[derive(Parser, Debug)]
#[command(name = "kmf", version, about = "Kinetic mean-field particle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides `seed`)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides `out`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (overrides `threads`)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Set a config key, e.g. `--override model.kind=saturated`
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Exit with status 4 when any experiment check fails
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Particle run with trajectory output
    Particles,
    /// One-mode Fokker–Planck grid solve
    Fpe,
    /// W1 to a reference law across particle counts
    Convergence,
    /// Distance growth between coupled ensembles
    Stability,
    /// Weak-form residual under refinement
    WeakResidual,
    /// Grid solution against particles
    Bridge,
    /// Backward equation, gradient bound and duality
    Adjoint,
    /// Assumption checks and derived constants only
    Validate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Particles => Command::Particles,
            Cmd::Fpe => Command::Fpe,
            Cmd::Convergence => Command::Convergence,
            Cmd::Stability => Command::Stability,
            Cmd::WeakResidual => Command::WeakResidual,
            Cmd::Bridge => Command::Bridge,
            Cmd::Adjoint => Command::Adjoint,
            Cmd::Validate => Command::Validate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(o) = &cli.out {
        overrides.push(format!("out={:?}", o.display().to_string()));
    }
    if let Some(t) = cli.threads {
        overrides.push(format!("threads={t}"));
    }
    let cfg = match RunConfig::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cmd = Command::from(cli.command);
    match execute_and_write(cmd, &cfg) {
        Ok((report, dir)) => {
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            println!("wrote {}", dir.display());
            if cli.check && !report.all_passed() {
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
