use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wiretap_cli::{emit, parse_config_with, run, CliError, Command, Format, Overrides};

/// Secrecy rate regions of Gaussian MIMO broadcast channels with an eavesdropper.
#[derive(Debug, Parser)]
#[command(name = "wiretap", version)]
struct Args {
    /// Overrides the command given in the config file.
    #[arg(value_enum)]
    command: Option<Command>,

    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,

    #[arg(long)]
    output: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<Format>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    restarts: Option<usize>,

    /// Number of μ grid points.
    #[arg(long = "mu-grid")]
    mu_grid: Option<usize>,

    /// Number of α grid points.
    #[arg(long = "alpha-grid")]
    alpha_grid: Option<usize>,
}

fn execute(args: Args) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::io(args.config.display(), e))?;
    let overrides = Overrides {
        command: args.command,
        output: args.output,
        format: args.format,
        seed: args.seed,
        restarts: args.restarts,
        mu_points: args.mu_grid,
        alpha_points: args.alpha_grid,
    };
    let cfg = parse_config_with(&text, &overrides)?;
    let outcome = run(&cfg)?;
    emit(&cfg, &outcome)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
