//! `vpflow`: solves, studies and diagnostics driven by a TOML config.
//!
//! Exit status: 0 on success, 1 on a configuration or I/O error, 2 when an
//! iteration fails to converge.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{Command, InfSupModeName, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] vpflow::Error),
}

impl CliError {
    pub fn config(key: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{key}: {msg}"))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(e) if e.is_nonconvergence() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vpflow",
    version,
    about = "Generalized Newtonian flow with concentration-dependent power-law index"
)]
struct Cli {
    /// TOML config; flags below override its entries.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Output directory (config key `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for sampling and eigen start vectors (config key `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Run the command named by the config's `command` key.
    Run,
    /// Coupled solve in physical mode.
    Solve {
        /// Take law, body force and boundary data from a shipped scenario.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Convergence study against a manufactured solution.
    Mms(MmsArgs),
    /// Solves for a list of regularization parameters.
    SweepK {
        /// Comma-separated values of k.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
    },
    /// Sampled checks of the constitutive laws.
    CertifyLaws {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Discrete inf-sup constant per refinement level.
    Infsup {
        /// Use levels 1..=N.
        #[arg(long)]
        levels: Option<usize>,
        /// Deflate exact spurious pressure modes before estimating.
        #[arg(long)]
        diagnostic: bool,
    },
}

#[derive(Debug, Args)]
struct MmsArgs {
    #[arg(long)]
    preset: Option<String>,
    /// Use levels 1..=N.
    #[arg(long)]
    levels: Option<usize>,
    /// Interpolate the analytic fields instead of solving.
    #[arg(long)]
    interpolation_only: bool,
}

/// Config file (or defaults) with the command-line overrides applied.
fn effective_config(cli: &Cli) -> Result<(Command, RunConfig), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let command = match &cli.command {
        CliCommand::Run => cfg.command.ok_or_else(|| {
            CliError::config("command", "`run` needs the config to name a command")
        })?,
        CliCommand::Solve { .. } => Command::Solve,
        CliCommand::Mms(_) => Command::Mms,
        CliCommand::SweepK { .. } => Command::SweepK,
        CliCommand::CertifyLaws { .. } => Command::CertifyLaws,
        CliCommand::Infsup { .. } => Command::Infsup,
    };
    if let Some(named) = cfg.command {
        if named != command {
            return Err(CliError::config(
                "command",
                format!(
                    "config names '{}' but '{}' was requested",
                    named.name(),
                    command.name()
                ),
            ));
        }
    }
    cfg.command = Some(command);
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        CliCommand::Run => {}
        CliCommand::Solve { scenario } => {
            if let Some(name) = scenario {
                let s = vpflow::verify::scenario(name)
                    .map_err(|e| CliError::config("--scenario", e))?;
                cfg.law = config::LawConfig::from_laws(&s.stress, &s.flux);
                cfg.data.swirl = s.swirl;
                cfg.data.boundary_c = config::BoundaryData::Preset { name: name.clone() };
            }
        }
        CliCommand::Mms(args) => {
            if let Some(p) = &args.preset {
                cfg.mms.preset = p.clone();
            }
            if let Some(n) = args.levels {
                cfg.mms.levels = (1..=n).collect();
            }
            if args.interpolation_only {
                cfg.mms.interpolation_only = true;
            }
        }
        CliCommand::SweepK { k } => {
            if let Some(k) = k {
                cfg.sweep.k = k.clone();
            }
        }
        CliCommand::CertifyLaws { samples } => {
            if let Some(n) = samples {
                cfg.certify.samples = *n;
            }
        }
        CliCommand::Infsup { levels, diagnostic } => {
            if let Some(n) = levels {
                cfg.infsup.levels = (1..=*n).collect();
            }
            if *diagnostic {
                cfg.infsup.mode = InfSupModeName::Diagnostic;
            }
        }
    }
    cfg.validate(command)?;
    Ok((command, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = effective_config(&cli).and_then(|(command, cfg)| run::execute(command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vpflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
