use attitude_cli::commands::{run_check, run_plot, run_simulate, run_solve, CliError, EXIT_OK};
use attitude_cli::config::load_config;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "attitude", version, about = "Energy-optimal spacecraft attitude maneuvers")]
struct Cli {
    /// Newton tolerance on the infinity norm of the matching conditions.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Maximum number of Newton iterations.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Newton step scaling in (0, 1].
    #[arg(long, global = true)]
    damping: Option<f64>,
    /// Directory for written artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the maneuver and export trajectory, report and plots.
    Solve { config: PathBuf },
    /// Propagate a control sequence through the discrete dynamics.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        controls: PathBuf,
    },
    /// Report inertia-derived diagnostics for the maneuver.
    Check { config: PathBuf },
    /// Render plots of an exported trajectory CSV.
    Plot { trajectory: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<attitude_cli::ManeuverConfig, CliError> {
    let mut cfg = load_config(path)?;
    if let Some(tol) = cli.tol {
        cfg.solver.tol = tol;
    }
    if let Some(n) = cli.max_iter {
        cfg.solver.max_iter = n;
    }
    if let Some(d) = cli.damping {
        if !(d > 0.0 && d <= 1.0) {
            return Err(attitude_cli::ConfigError::Validation {
                field: "damping".into(),
                message: "must lie in (0, 1]".into(),
            }
            .into());
        }
        cfg.solver.damping = d;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let out = cli.out_dir.as_deref();
    match &cli.command {
        Command::Solve { config } => {
            let cfg = load(cli, config)?;
            let outcome = run_solve(&cfg, out)?;
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
        }
        Command::Simulate { config, controls } => {
            let cfg = load(cli, config)?;
            let outcome = run_simulate(&cfg, controls, out)?;
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
        }
        Command::Check { config } => {
            let cfg = load(cli, config)?;
            println!("{}", serde_json::to_string_pretty(&run_check(&cfg, out)?)?);
        }
        Command::Plot { trajectory } => {
            println!("{}", run_plot(trajectory, out)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
