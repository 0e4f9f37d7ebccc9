mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coupled_opo_core::criteria::{Objective, Pairing};
use coupled_opo_core::spectrum::Mode;

use commands::{open_output, CliError};
use config::RunConfig;

/// Correlation spectra of two evanescently coupled intracavity downconverters.
#[derive(Parser, Debug)]
#[command(name = "coupled-opo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in figure configuration.
    #[arg(long, value_parser = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"])]
    preset: Option<String>,

    /// Override a config value by dotted path, e.g. `system.j_a=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Output file (stdout if omitted; required by sde-dump).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// SDE seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    Squeezing,
    DuanMinusPlus,
    DuanPlusMinus,
    EprOne,
    EprTwo,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Squeezing => Objective::Squeezing,
            ObjectiveArg::DuanMinusPlus => Objective::Duan(Pairing::XMinusYPlus),
            ObjectiveArg::DuanPlusMinus => Objective::Duan(Pairing::XPlusYMinus),
            ObjectiveArg::EprOne => Objective::Epr(Mode::One),
            ObjectiveArg::EprTwo => Objective::Epr(Mode::Two),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Output spectra and correlation criteria over a frequency grid.
    Spectrum(Common),
    /// Threshold and smallest drift eigenvalue over a parameter grid.
    Stability(Common),
    /// Quadrature angle minimising an objective.
    OptimizeAngle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "squeezing")]
        objective: ObjectiveArg,
    },
    /// Compare stochastic and linearized spectra; exit 3 on disagreement.
    Verify(Common),
    /// Integrate the stochastic equations and write the raw ensemble.
    SdeDump(Common),
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let base = match (&c.config, &c.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    let mut cfg = base.with_overrides(&c.sets)?;
    if let Some(seed) = c.seed {
        cfg.sde.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.output = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum(c) => {
            let cfg = load(&c)?;
            let mut out = open_output(cfg.output.as_deref())?;
            commands::spectrum(&cfg, &mut out)?;
            out.flush()?;
        }
        Command::Stability(c) => {
            let cfg = load(&c)?;
            let mut out = open_output(cfg.output.as_deref())?;
            commands::stability(&cfg, &mut out)?;
            out.flush()?;
        }
        Command::OptimizeAngle { common, objective } => {
            let cfg = load(&common)?;
            let mut out = open_output(cfg.output.as_deref())?;
            commands::optimize_angle(&cfg, objective.into(), &mut out)?;
            out.flush()?;
        }
        Command::Verify(c) => {
            let cfg = load(&c)?;
            let mut out = open_output(cfg.output.as_deref())?;
            let r = commands::verify(&cfg, &mut out);
            out.flush()?;
            r?;
        }
        Command::SdeDump(c) => {
            let cfg = load(&c)?;
            let path = cfg
                .output
                .clone()
                .ok_or_else(|| CliError::Usage("sde-dump needs --out PATH".into()))?;
            commands::sde_dump(&cfg, path.as_ref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
