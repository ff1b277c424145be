use std::path::PathBuf;
use std::process::ExitCode;

use bragg_cli::commands::{execute, Command};
use bragg_cli::config::{RunConfig, Source};
use bragg_cli::presets::Preset;
use bragg_cli::{CliError, CliResult};
use clap::Parser;

/// Bragg scattering from an optical lattice: reflection spectra, heterodyne
/// beats, moving lattices and self-checks.
#[derive(Debug, Parser)]
#[command(name = "bragg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Starting parameter set; the default depends on the subcommand.
    #[arg(long, global = true)]
    preset: Option<Preset>,

    /// TOML file overlaid on the preset. Unset keys keep preset values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed, overriding `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn default_preset(command: Command) -> Preset {
    match command {
        Command::Spectrum => Preset::Spectrum,
        Command::Heterodyne | Command::Validate => Preset::Heterodyne,
        Command::Moving => Preset::MovingLattice,
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let preset = cli.preset.unwrap_or_else(|| default_preset(cli.command));
    let (mut cfg, source) = match &cli.config {
        Some(path) => RunConfig::load(&preset.config(), path)?,
        None => (preset.config(), Source::default()),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let outcome = execute(
        cli.command,
        &cfg,
        &source,
        preset.name(),
        cli.out.as_deref(),
    )?;
    for finding in &outcome.findings {
        println!("{}", finding.render());
    }
    for path in &outcome.outputs {
        println!("wrote {}", path.display());
    }
    match outcome.failures() {
        0 => Ok(()),
        n => Err(CliError::ChecksFailed(n)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
