use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfg_epi::scenarios::Overrides;
use mfg_epi::Integrator;

mod commands;
mod output;
mod plot;

/// Multi-population mean field game epidemic solver.
#[derive(Parser)]
#[command(name = "mfg-epi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write trajectories, metrics and plots.
    Run(RunArgs),
    /// Solve the members of a comparison and write comparison metrics.
    Compare(RunArgs),
    /// Solve a scenario and check it against independent oracles.
    Validate(ValidateArgs),
    /// List the built-in scenarios.
    List,
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Catalog name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    /// Time horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    /// Convergence tolerance on both residuals.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Damping in (0, 1].
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// euler or rk4.
    #[arg(long)]
    integrator: Option<Integrator>,
    /// Patch length; shorter than the horizon enables time patching.
    #[arg(long)]
    patch: Option<f64>,
    /// Write artifacts and exit 0 even if the solver did not converge.
    #[arg(long)]
    allow_nonconverged: bool,
}

impl SolveArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            horizon: self.horizon,
            dt: self.dt,
            epsilon: self.epsilon,
            damping: self.damping,
            max_iters: self.max_iters,
            integrator: self.integrator,
            patch_length: self.patch,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// Number of agents in each simulated population.
    #[arg(long, default_value_t = 10_000)]
    agents: usize,
    #[arg(long, default_value_t = 50)]
    replicas: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Shift every susceptible socialization level before checking.
    #[arg(long, hide = true, allow_hyphen_values = true)]
    perturb_controls: Option<f64>,
}

/// Exit statuses other than success.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Usage = 1,
    NotConverged = 2,
    ValidationFailed = 3,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MFG_EPI_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("MFG_EPI_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("MFG_EPI_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Usage as u8 } else { 0 });
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run(a) => commands::run(&a.solve),
        Command::Compare(a) => commands::compare(&a.solve),
        Command::Validate(a) => commands::validate(&a.solve, a.agents, a.replicas, a.seed, a.perturb_controls),
        Command::List => commands::list(),
    });
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Usage as u8)
        }
    }
}
